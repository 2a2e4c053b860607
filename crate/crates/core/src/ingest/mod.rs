//! Parsing of schemas and record sets into a format-neutral shape.
//!
//! Parsers here are pure: they read bytes and return a [`ParsedVocabulary`]
//! or [`ParsedRecords`]. Resolving IRIs to stored terms, deduplication and
//! persistence happen in the registry.

pub mod audit;
mod json;
pub mod rdf;
mod xml;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Literal;

pub use audit::{hash_bytes, DefaultFetcher, FetchError, Fetcher, DEFAULT_HASH_ALGORITHM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    RdfXml,
    Turtle,
    Skos,
    GenericXml,
    JsonTerms,
}

impl Format {
    pub const ALL: [Format; 5] = [
        Format::RdfXml,
        Format::Turtle,
        Format::Skos,
        Format::GenericXml,
        Format::JsonTerms,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Format::RdfXml => "rdfxml",
            Format::Turtle => "turtle",
            Format::Skos => "skos",
            Format::GenericXml => "genericxml",
            Format::JsonTerms => "jsonterms",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rdfxml" | "rdf" | "rdf/xml" | "rdf-xml" => Ok(Format::RdfXml),
            "turtle" | "ttl" => Ok(Format::Turtle),
            "skos" => Ok(Format::Skos),
            "genericxml" | "xml" => Ok(Format::GenericXml),
            "jsonterms" | "json" => Ok(Format::JsonTerms),
            other => Err(Error::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Object position of a parsed triple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum RawObject {
    Iri(String),
    Blank(String),
    Literal(Literal),
}

/// A triple as it appears in the document. Subjects are IRIs or blank node
/// labels written `_:label`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RawTriple {
    pub subject: String,
    pub predicate: String,
    pub object: RawObject,
}

/// A schema element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectTerm {
    pub label: String,
    pub definition: String,
    pub iri: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedVocabulary {
    pub format: Format,
    pub title: Option<String>,
    pub rights_link: Option<String>,
    pub subject_terms: Vec<SubjectTerm>,
    /// Distinct predicate IRIs used by `triples`.
    pub predicates: Vec<String>,
    /// Relations between elements, metadata predicates removed.
    pub triples: Vec<RawTriple>,
    pub warnings: Vec<String>,
}

impl ParsedVocabulary {
    fn finish(mut self) -> Result<Self> {
        self.subject_terms.retain(|t| !t.label.trim().is_empty());
        if self.subject_terms.is_empty() {
            return Err(Error::EmptyImport);
        }
        let mut preds: Vec<String> = self.triples.iter().map(|t| t.predicate.clone()).collect();
        preds.sort();
        preds.dedup();
        self.predicates = preds;
        Ok(self)
    }
}

/// One record: an identifier plus (element, value) pairs. The element is an
/// IRI or a bare element name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Record {
    pub id: String,
    pub fields: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedRecords {
    pub format: Format,
    pub records: Vec<Record>,
}

pub fn parse_schema(doc: &[u8], format: Format, base_iri: Option<&str>) -> Result<ParsedVocabulary> {
    if doc.iter().all(u8::is_ascii_whitespace) {
        return Err(Error::EmptyImport);
    }
    let parsed = match format {
        Format::RdfXml | Format::Turtle | Format::Skos => {
            let triples = rdf::parse_triples(doc, format, base_iri)?;
            rdf::extract_schema(&triples, format)
        }
        Format::GenericXml => xml::extract_schema(doc)?,
        Format::JsonTerms => json::extract_schema(doc)?,
    };
    parsed.finish()
}

pub fn parse_records(doc: &[u8], format: Format, base_iri: Option<&str>) -> Result<ParsedRecords> {
    if doc.iter().all(u8::is_ascii_whitespace) {
        return Err(Error::EmptyImport);
    }
    let records = match format {
        Format::RdfXml | Format::Turtle | Format::Skos => {
            rdf::extract_records(&rdf::parse_triples(doc, format, base_iri)?)
        }
        Format::GenericXml => xml::extract_records(doc)?,
        Format::JsonTerms => json::extract_records(doc)?,
    };
    Ok(ParsedRecords { format, records })
}

/// Last path segment or fragment of an IRI, used when an element has no
/// label of its own.
pub fn local_name(iri: &str) -> &str {
    let cut = iri.rfind(['#', '/', ':']).map_or(0, |i| i + 1);
    &iri[cut..]
}

/// Root element name and child count of an XML document.
#[cfg(test)]
pub(crate) fn xml_root(doc: &[u8]) -> Result<(String, usize)> {
    let root = xml::parse_dom(doc)?;
    Ok((root.name, root.children.len()))
}
