//! Serialization of term sets as JSON, generic XML, RDF/XML and SKOS (Turtle).
//!
//! Every format carries each term's IRI as its local ARK URL, so feeding an
//! export back through the importer resolves to the existing terms.

use std::fmt;
use std::str::FromStr;

use quick_xml::events::{BytesDecl, BytesEnd, BytesStart, BytesText, Event};
use quick_xml::Writer;
use rio_api::formatter::TriplesFormatter;
use rio_api::model::{Literal as RioLiteral, NamedNode, Subject, Term as RioTerm, Triple as RioTriple};
use rio_turtle::TurtleFormatter;
use rio_xml::RdfXmlFormatter;
use serde::{Deserialize, Serialize};

use super::{BrowseFilter, Registry, State};
use crate::ark::{self, VersionMetadata};
use crate::error::{Error, Result};
use crate::ingest::rdf::ns;
use crate::ingest::{RawObject, RawTriple};
use crate::model::{Literal, Object, Predicate, Status, Term, XSD_STRING};

const XSD_BOOLEAN: &str = "http://www.w3.org/2001/XMLSchema#boolean";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Json,
    Xml,
    Rdf,
    Skos,
}

impl ExportFormat {
    pub const ALL: [ExportFormat; 4] = [
        ExportFormat::Json,
        ExportFormat::Xml,
        ExportFormat::Rdf,
        ExportFormat::Skos,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExportFormat::Json => "json",
            ExportFormat::Xml => "xml",
            ExportFormat::Rdf => "rdf",
            ExportFormat::Skos => "skos",
        }
    }

    pub fn media_type(self) -> &'static str {
        match self {
            ExportFormat::Json => "application/json",
            ExportFormat::Xml => "application/xml",
            ExportFormat::Rdf => "application/rdf+xml",
            ExportFormat::Skos => "text/turtle",
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "json" => Ok(ExportFormat::Json),
            "xml" => Ok(ExportFormat::Xml),
            "rdf" | "rdfxml" | "rdf/xml" => Ok(ExportFormat::Rdf),
            "skos" => Ok(ExportFormat::Skos),
            other => Err(Error::invalid(format!("unsupported export format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportRequest {
    pub format: ExportFormat,
    #[serde(default)]
    pub filter: BrowseFilter,
    #[serde(default)]
    pub include_versions: bool,
}

impl ExportRequest {
    pub fn new(format: ExportFormat) -> Self {
        Self {
            format,
            filter: BrowseFilter::default(),
            include_versions: false,
        }
    }
}

#[derive(Serialize)]
struct JsonRelation {
    predicate: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    object: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    literal: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    datatype: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    language: Option<String>,
}

#[derive(Serialize)]
struct JsonTerm<'a> {
    label: &'a str,
    definition: &'a str,
    iri: String,
    ark: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    source_iri: Option<&'a str>,
    status: Status,
    consensus_score: f64,
    stability_score: f64,
    applicability_score: f64,
    rights: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    schema: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    collection: Option<&'a str>,
    relations: Vec<JsonRelation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    versions: Option<VersionMetadata>,
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    title: &'a str,
    terms: Vec<JsonTerm<'a>>,
}

/// A selected term plus everything its serializations need.
struct Entry<'a> {
    term: &'a Term,
    iri: String,
    scheme: String,
    relations: Vec<(String, RawObject)>,
    versions: Option<VersionMetadata>,
}

const EXPORT_TITLE: &str = "Vocabulary registry export";

impl State {
    fn iri_of(&self, base: &str, id: crate::ids::TermId) -> String {
        let ark = self.terms.get(&id).map_or("", |t| t.ark.as_str());
        format!("{base}/{ark}")
    }

    fn entries<'a>(&'a self, req: &ExportRequest, base: &str) -> Result<Vec<Entry<'a>>> {
        let mut terms = self.filter_terms(&req.filter);
        terms.sort_by_key(|t| t.id);
        terms
            .into_iter()
            .map(|term| {
                let iri = format!("{base}/{}", term.ark);
                let relations = self
                    .triples
                    .iter()
                    .filter(|t| t.subject == term.id)
                    .map(|t| {
                        let predicate = match &t.predicate {
                            Predicate::Term(p) => self.iri_of(base, *p),
                            Predicate::Iri(i) => i.clone(),
                        };
                        let object = match &t.object {
                            Object::Term(o) => RawObject::Iri(self.iri_of(base, *o)),
                            Object::Literal(l) if l.is_any_uri() => RawObject::Iri(l.value.clone()),
                            Object::Literal(l) => RawObject::Literal(l.clone()),
                        };
                        (predicate, object)
                    })
                    .collect();
                let scheme = match term.schema.and_then(|s| self.schemas.get(&s)) {
                    Some(s) => format!("{base}/{}", s.ark),
                    None => format!("{base}/terms"),
                };
                let versions = if req.include_versions {
                    let chain = self.versions.get(&term.id).map(Vec::as_slice).unwrap_or_default();
                    Some(ark::version_metadata(term, chain, &iri, None)?)
                } else {
                    None
                };
                Ok(Entry {
                    term,
                    iri,
                    scheme,
                    relations,
                    versions,
                })
            })
            .collect()
    }

    fn scheme_titles(&self, base: &str, entries: &[Entry<'_>]) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        for e in entries {
            if out.iter().any(|(iri, _)| *iri == e.scheme) {
                continue;
            }
            let title = e
                .term
                .schema
                .and_then(|s| self.schemas.get(&s))
                .map_or_else(|| format!("Terms contributed at {base}"), |s| s.label.clone());
            out.push((e.scheme.clone(), title));
        }
        out
    }
}

fn lit(value: &str) -> RawObject {
    RawObject::Literal(Literal::string(value))
}

fn iri(value: &str) -> RawObject {
    RawObject::Iri(value.to_string())
}

fn push(out: &mut Vec<RawTriple>, subject: &str, predicate: &str, object: RawObject) {
    out.push(RawTriple {
        subject: subject.to_string(),
        predicate: predicate.to_string(),
        object,
    });
}

fn version_triples(out: &mut Vec<RawTriple>, subject: &str, v: &VersionMetadata) {
    for (key, value) in v.entries() {
        let (predicate, object) = match key {
            "dcterms:created" => (format!("{}created", ns::DCTERMS), lit(value)),
            "dcterms:modified" => (format!("{}modified", ns::DCTERMS), lit(value)),
            "dcterms:isReplacedBy" => (format!("{}isReplacedBy", ns::DCTERMS), iri(value)),
            "dcterms:replaces" => (format!("{}replaces", ns::DCTERMS), iri(value)),
            "owl:deprecated" => (
                format!("{}deprecated", ns::OWL),
                RawObject::Literal(Literal {
                    value: value.to_string(),
                    datatype: XSD_BOOLEAN.to_string(),
                    language: None,
                }),
            ),
            "owl:priorVersion" => (format!("{}priorVersion", ns::OWL), iri(value)),
            "owl:versionInfo" => (format!("{}versionInfo", ns::OWL), lit(value)),
            "skos:changeNote" => (format!("{}changeNote", ns::SKOS), lit(value)),
            "skos:historyNote" => (format!("{}historyNote", ns::SKOS), lit(value)),
            _ => continue,
        };
        push(out, subject, &predicate, object);
    }
}

/// Triples of an RDF export. SKOS exports type terms as concepts in
/// per-schema concept schemes.
fn graph(entries: &[Entry<'_>], schemes: &[(String, String)], skos: bool) -> Vec<RawTriple> {
    let mut out = Vec::new();
    if skos {
        for (scheme, title) in schemes {
            push(&mut out, scheme, ns::RDF_TYPE, iri(ns::SKOS_CONCEPT_SCHEME));
            push(&mut out, scheme, ns::DCTERMS_TITLE, lit(title));
        }
    }
    for e in entries {
        let s = e.iri.as_str();
        if skos {
            push(&mut out, s, ns::RDF_TYPE, iri(ns::SKOS_CONCEPT));
            push(&mut out, s, ns::SKOS_PREF_LABEL, lit(&e.term.label));
            if !e.term.definition.is_empty() {
                push(&mut out, s, ns::SKOS_DEFINITION, lit(&e.term.definition));
            }
            push(&mut out, s, ns::SKOS_IN_SCHEME, iri(&e.scheme));
        } else {
            push(&mut out, s, ns::RDFS_LABEL, lit(&e.term.label));
            if !e.term.definition.is_empty() {
                push(&mut out, s, ns::RDFS_COMMENT, lit(&e.term.definition));
            }
        }
        push(&mut out, s, ns::DCTERMS_RIGHTS, iri(e.term.rights.url()));
        if let Some(source) = &e.term.iri {
            push(&mut out, s, ns::OWL_SAME_AS, iri(source));
        }
        for (p, o) in &e.relations {
            push(&mut out, s, p, o.clone());
        }
        if let Some(v) = &e.versions {
            version_triples(&mut out, s, v);
        }
    }
    out
}

fn io_err(e: impl fmt::Display) -> Error {
    Error::Storage(format!("serialization failed: {e}"))
}

fn with_rio<R>(t: &RawTriple, f: impl FnOnce(&RioTriple<'_>) -> R) -> R {
    let object = match &t.object {
        RawObject::Iri(i) => RioTerm::NamedNode(NamedNode { iri: i }),
        RawObject::Blank(b) => RioTerm::BlankNode(rio_api::model::BlankNode { id: b }),
        RawObject::Literal(l) => RioTerm::Literal(match (&l.language, l.datatype.as_str()) {
            (Some(lang), _) => RioLiteral::LanguageTaggedString {
                value: &l.value,
                language: lang,
            },
            (None, XSD_STRING) => RioLiteral::Simple { value: &l.value },
            (None, dt) => RioLiteral::Typed {
                value: &l.value,
                datatype: NamedNode { iri: dt },
            },
        }),
    };
    let subject = match t.subject.strip_prefix("_:") {
        Some(b) => Subject::BlankNode(rio_api::model::BlankNode { id: b }),
        None => Subject::NamedNode(NamedNode { iri: &t.subject }),
    };
    f(&RioTriple {
        subject,
        predicate: NamedNode { iri: &t.predicate },
        object,
    })
}

/// RDF/XML serialization of `triples`.
pub fn write_rdf_xml(triples: &[RawTriple]) -> Result<Vec<u8>> {
    let mut f = RdfXmlFormatter::with_indentation(Vec::new(), 2).map_err(io_err)?;
    for t in triples {
        with_rio(t, |r| f.format(r)).map_err(io_err)?;
    }
    f.finish().map_err(io_err)
}

/// Turtle serialization of `triples`.
pub fn write_turtle(triples: &[RawTriple]) -> Result<Vec<u8>> {
    let mut f = TurtleFormatter::new(Vec::new());
    for t in triples {
        with_rio(t, |r| f.format(r)).map_err(io_err)?;
    }
    f.finish().map_err(io_err)
}

fn json(entries: &[Entry<'_>]) -> Result<Vec<u8>> {
    let terms = entries
        .iter()
        .map(|e| JsonTerm {
            label: &e.term.label,
            definition: &e.term.definition,
            iri: e.iri.clone(),
            ark: &e.term.ark,
            source_iri: e.term.iri.as_deref(),
            status: e.term.status(),
            consensus_score: e.term.consensus_score(),
            stability_score: e.term.stability_score(),
            applicability_score: e.term.applicability_score(),
            rights: e.term.rights.url(),
            schema: e.term.schema.map(|s| s.to_string()),
            collection: e.term.collection.as_deref(),
            relations: e
                .relations
                .iter()
                .map(|(p, o)| match o {
                    RawObject::Iri(i) | RawObject::Blank(i) => JsonRelation {
                        predicate: p.clone(),
                        object: Some(i.clone()),
                        literal: None,
                        datatype: None,
                        language: None,
                    },
                    RawObject::Literal(l) => JsonRelation {
                        predicate: p.clone(),
                        object: None,
                        literal: Some(l.value.clone()),
                        datatype: (l.datatype != XSD_STRING && l.language.is_none()).then(|| l.datatype.clone()),
                        language: l.language.clone(),
                    },
                })
                .collect(),
            versions: e.versions.clone(),
        })
        .collect();
    serde_json::to_vec_pretty(&JsonDocument {
        title: EXPORT_TITLE,
        terms,
    })
    .map_err(io_err)
}

fn xml(entries: &[Entry<'_>]) -> Result<Vec<u8>> {
    type W = Writer<Vec<u8>>;
    fn text(w: &mut W, name: &str, value: &str) -> quick_xml::Result<()> {
        w.write_event(Event::Start(BytesStart::new(name)))?;
        w.write_event(Event::Text(BytesText::new(value)))?;
        w.write_event(Event::End(BytesEnd::new(name)))
    }
    let run = || -> quick_xml::Result<Vec<u8>> {
        let mut w = Writer::new_with_indent(Vec::new(), b' ', 2);
        w.write_event(Event::Decl(BytesDecl::new("1.0", Some("UTF-8"), None)))?;
        let mut root = BytesStart::new("vocabulary");
        root.push_attribute(("title", EXPORT_TITLE));
        w.write_event(Event::Start(root))?;
        for e in entries {
            let mut el = BytesStart::new("term");
            el.push_attribute(("iri", e.iri.as_str()));
            el.push_attribute(("ark", e.term.ark.as_str()));
            el.push_attribute(("status", e.term.status().as_str()));
            if let Some(source) = &e.term.iri {
                el.push_attribute(("source", source.as_str()));
            }
            w.write_event(Event::Start(el))?;
            text(&mut w, "label", &e.term.label)?;
            text(&mut w, "definition", &e.term.definition)?;
            text(&mut w, "rights", e.term.rights.url())?;
            for (p, o) in &e.relations {
                let mut rel = BytesStart::new("relation");
                rel.push_attribute(("predicate", p.as_str()));
                match o {
                    RawObject::Iri(i) | RawObject::Blank(i) => rel.push_attribute(("object", i.as_str())),
                    RawObject::Literal(l) => {
                        rel.push_attribute(("literal", l.value.as_str()));
                        if let Some(lang) = &l.language {
                            rel.push_attribute(("lang", lang.as_str()));
                        } else if l.datatype != XSD_STRING {
                            rel.push_attribute(("datatype", l.datatype.as_str()));
                        }
                    }
                }
                w.write_event(Event::Empty(rel))?;
            }
            if let Some(v) = &e.versions {
                w.write_event(Event::Start(BytesStart::new("versionMetadata")))?;
                for (key, value) in v.entries() {
                    let mut m = BytesStart::new("meta");
                    m.push_attribute(("property", key));
                    w.write_event(Event::Start(m))?;
                    w.write_event(Event::Text(BytesText::new(value)))?;
                    w.write_event(Event::End(BytesEnd::new("meta")))?;
                }
                w.write_event(Event::End(BytesEnd::new("versionMetadata")))?;
            }
            w.write_event(Event::End(BytesEnd::new("term")))?;
        }
        w.write_event(Event::End(BytesEnd::new("vocabulary")))?;
        Ok(w.into_inner())
    };
    run().map_err(io_err)
}

impl Registry {
    /// Serializes the terms matching `req.filter`. An empty match yields a
    /// valid empty document.
    pub fn export(&self, req: &ExportRequest) -> Result<Vec<u8>> {
        let base = self.config.base_url.trim_end_matches('/');
        let st = self.state.read();
        let entries = st.entries(req, base)?;
        match req.format {
            ExportFormat::Json => json(&entries),
            ExportFormat::Xml => xml(&entries),
            ExportFormat::Rdf => write_rdf_xml(&graph(&entries, &[], false)),
            ExportFormat::Skos => write_turtle(&graph(&entries, &st.scheme_titles(base, &entries), true)),
        }
    }
}
