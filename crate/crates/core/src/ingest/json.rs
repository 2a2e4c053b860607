//! Flat JSON term lists.
//!
//! Schema: `{"title": .., "rights": .., "terms": [{"label", "definition",
//! "iri", "relations": [{"predicate", "object" | "literal"}]}]}`, or a bare
//! array of terms. Records: `{"records": [{"id", "fields": {name: value or
//! [values]}}]}` or a bare array of records.

use std::collections::BTreeMap;

use serde::Deserialize;

use super::{Format, ParsedVocabulary, RawObject, RawTriple, Record, SubjectTerm};
use crate::error::{Error, Result};
use crate::ingest::rdf::ns::RDF_LANG_STRING;
use crate::model::Literal;

#[derive(Deserialize)]
struct JsonRelation {
    predicate: String,
    #[serde(default)]
    object: Option<String>,
    #[serde(default)]
    literal: Option<String>,
    #[serde(default)]
    datatype: Option<String>,
    #[serde(default)]
    language: Option<String>,
}

#[derive(Deserialize)]
struct JsonTerm {
    label: String,
    #[serde(default)]
    definition: String,
    #[serde(default)]
    iri: Option<String>,
    #[serde(default)]
    relations: Vec<JsonRelation>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonSchema {
    Wrapped {
        #[serde(default)]
        title: Option<String>,
        #[serde(default)]
        rights: Option<String>,
        terms: Vec<JsonTerm>,
    },
    Bare(Vec<JsonTerm>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum FieldValue {
    One(String),
    Many(Vec<String>),
}

#[derive(Deserialize)]
struct JsonRecord {
    id: String,
    fields: BTreeMap<String, FieldValue>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonRecords {
    Wrapped { records: Vec<JsonRecord> },
    Bare(Vec<JsonRecord>),
}

fn parse<'a, T: Deserialize<'a>>(doc: &'a [u8]) -> Result<T> {
    // Syntax is checked first so that syntax errors keep their position;
    // untagged enums would otherwise report a generic mismatch.
    let value: serde_json::Value = serde_json::from_slice(doc).map_err(|e| Error::Parse {
        line: e.line() as u64,
        column: e.column() as u64,
        message: e.to_string(),
    })?;
    drop(value);
    serde_json::from_slice(doc).map_err(|e| Error::Parse {
        line: e.line() as u64,
        column: e.column() as u64,
        message: format!("unexpected structure: {e}"),
    })
}

pub(crate) fn extract_schema(doc: &[u8]) -> Result<ParsedVocabulary> {
    let (title, rights, terms) = match parse::<JsonSchema>(doc)? {
        JsonSchema::Wrapped { title, rights, terms } => (title, rights, terms),
        JsonSchema::Bare(terms) => (None, None, terms),
    };
    let mut out = ParsedVocabulary {
        format: Format::JsonTerms,
        title,
        rights_link: rights,
        subject_terms: Vec::new(),
        predicates: Vec::new(),
        triples: Vec::new(),
        warnings: Vec::new(),
    };
    for t in terms {
        for r in t.relations {
            let Some(subject) = t.iri.clone() else {
                out.warnings
                    .push(format!("relation on `{}` needs an element IRI", t.label));
                continue;
            };
            let object = match (r.object, r.literal) {
                (Some(o), _) => RawObject::Iri(o),
                (None, Some(l)) => RawObject::Literal(match (r.language, r.datatype) {
                    (Some(lang), _) => Literal {
                        value: l,
                        datatype: RDF_LANG_STRING.to_string(),
                        language: Some(lang.to_ascii_lowercase()),
                    },
                    (None, Some(dt)) => Literal {
                        value: l,
                        datatype: dt,
                        language: None,
                    },
                    (None, None) => Literal::string(l),
                }),
                (None, None) => {
                    out.warnings.push(format!("relation on `{}` has no object", t.label));
                    continue;
                }
            };
            out.triples.push(RawTriple {
                subject,
                predicate: r.predicate,
                object,
            });
        }
        out.subject_terms.push(SubjectTerm {
            label: t.label.trim().to_string(),
            definition: t.definition.trim().to_string(),
            iri: t.iri,
        });
    }
    Ok(out)
}

pub(crate) fn extract_records(doc: &[u8]) -> Result<Vec<Record>> {
    let records = match parse::<JsonRecords>(doc)? {
        JsonRecords::Wrapped { records } | JsonRecords::Bare(records) => records,
    };
    Ok(records
        .into_iter()
        .map(|r| Record {
            id: r.id,
            fields: r
                .fields
                .into_iter()
                .flat_map(|(k, v)| {
                    let values = match v {
                        FieldValue::One(s) => vec![s],
                        FieldValue::Many(v) => v,
                    };
                    values.into_iter().map(move |v| (k.clone(), v))
                })
                .collect(),
        })
        .collect())
}
