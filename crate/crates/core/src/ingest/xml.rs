//! Generic XML input.
//!
//! Schema documents: any element named `term`, `element`, `property` or
//! `concept` is an element. Its label comes from a `label`/`name` attribute
//! or child, its definition from a `definition`/`description`/`comment`
//! child, its IRI from an `iri`/`uri`/`about` attribute. `relation` children
//! with `predicate` plus `object` (IRI) or `literal` become triples. A
//! `rights` or `license` child or attribute on the root is the rights link.
//!
//! Record documents: each `record` element is a record; its child elements
//! are fields named by element.

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;

use super::{ParsedVocabulary, RawObject, RawTriple, Record, SubjectTerm};
use crate::error::{Error, Result};
use crate::ingest::rdf::ns::RDF_LANG_STRING;
use crate::ingest::Format;
use crate::model::{is_absolute_iri, Literal, XSD_STRING};

#[derive(Debug, Default, Clone, PartialEq)]
pub(crate) struct Element {
    pub name: String,
    pub attrs: Vec<(String, String)>,
    pub children: Vec<Element>,
    pub text: String,
}

impl Element {
    fn is(&self, names: &[&str]) -> bool {
        names.iter().any(|n| self.name.eq_ignore_ascii_case(n))
    }

    fn attr(&self, names: &[&str]) -> Option<&str> {
        names.iter().find_map(|n| {
            self.attrs
                .iter()
                .find(|(k, _)| k.eq_ignore_ascii_case(n))
                .map(|(_, v)| v.trim())
                .filter(|v| !v.is_empty())
        })
    }

    fn child_text(&self, names: &[&str]) -> Option<&str> {
        names.iter().find_map(|n| {
            self.children
                .iter()
                .find(|c| c.name.eq_ignore_ascii_case(n))
                .map(|c| c.text.trim())
                .filter(|t| !t.is_empty())
        })
    }

    fn walk<'a>(&'a self, out: &mut Vec<&'a Element>) {
        out.push(self);
        for c in &self.children {
            c.walk(out);
        }
    }
}

fn start_element(e: &BytesStart<'_>, doc: &[u8], pos: u64) -> Result<Element> {
    let name = String::from_utf8_lossy(e.local_name().as_ref()).into_owned();
    let mut attrs = Vec::new();
    for a in e.attributes() {
        let a = a.map_err(|err| Error::parse_at(doc, pos as usize, err.to_string()))?;
        let key = String::from_utf8_lossy(a.key.local_name().as_ref()).into_owned();
        let value = a
            .unescape_value()
            .map_err(|err| Error::parse_at(doc, pos as usize, err.to_string()))?
            .into_owned();
        attrs.push((key, value));
    }
    Ok(Element {
        name,
        attrs,
        children: Vec::new(),
        text: String::new(),
    })
}

/// Parses a whole document into its root element.
pub(crate) fn parse_dom(doc: &[u8]) -> Result<Element> {
    let mut reader = Reader::from_reader(doc);
    reader.config_mut().trim_text(true);
    let mut stack: Vec<Element> = Vec::new();
    let mut root: Option<Element> = None;
    let fail = |reader: &Reader<&[u8]>, msg: String| Error::parse_at(doc, reader.error_position() as usize, msg);
    loop {
        let pos = reader.buffer_position();
        match reader.read_event() {
            Err(e) => return Err(fail(&reader, e.to_string())),
            Ok(Event::Eof) => break,
            Ok(Event::Start(e)) => stack.push(start_element(&e, doc, pos)?),
            Ok(Event::Empty(e)) => {
                let el = start_element(&e, doc, pos)?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None if root.is_none() => root = Some(el),
                    None => return Err(Error::parse_at(doc, pos as usize, "more than one root element")),
                }
            }
            Ok(Event::End(_)) => {
                let el = stack
                    .pop()
                    .ok_or_else(|| Error::parse_at(doc, pos as usize, "unbalanced end tag"))?;
                match stack.last_mut() {
                    Some(parent) => parent.children.push(el),
                    None if root.is_none() => root = Some(el),
                    None => return Err(Error::parse_at(doc, pos as usize, "more than one root element")),
                }
            }
            Ok(Event::Text(t)) => {
                let text = t
                    .unescape()
                    .map_err(|e| Error::parse_at(doc, pos as usize, e.to_string()))?;
                match stack.last_mut() {
                    Some(top) => top.text.push_str(&text),
                    None => return Err(Error::parse_at(doc, pos as usize, "text outside the root element")),
                }
            }
            Ok(Event::CData(c)) => {
                if let Some(top) = stack.last_mut() {
                    top.text.push_str(&String::from_utf8_lossy(&c.into_inner()));
                }
            }
            Ok(_) => {}
        }
    }
    if !stack.is_empty() {
        return Err(Error::parse_at(doc, doc.len(), "unexpected end of document"));
    }
    root.ok_or(Error::EmptyImport)
}

const TERM_ELEMENTS: &[&str] = &["term", "element", "property", "concept"];

pub(crate) fn extract_schema(doc: &[u8]) -> Result<ParsedVocabulary> {
    let root = parse_dom(doc)?;
    let mut out = ParsedVocabulary {
        format: Format::GenericXml,
        title: root
            .attr(&["title"])
            .or_else(|| root.child_text(&["title"]))
            .map(str::to_string),
        rights_link: root
            .attr(&["rights", "license"])
            .or_else(|| root.child_text(&["rights", "license"]))
            .or_else(|| {
                root.children
                    .iter()
                    .find(|c| c.is(&["rights", "license"]))
                    .and_then(|c| c.attr(&["href", "resource", "url"]))
            })
            .map(str::to_string),
        subject_terms: Vec::new(),
        predicates: Vec::new(),
        triples: Vec::new(),
        warnings: Vec::new(),
    };
    let mut all = Vec::new();
    root.walk(&mut all);
    for el in all.into_iter().filter(|e| e.is(TERM_ELEMENTS)) {
        let Some(label) = el
            .attr(&["label", "name"])
            .or_else(|| el.child_text(&["label", "name", "title"]))
        else {
            out.warnings.push(format!("<{}> without a label skipped", el.name));
            continue;
        };
        let iri = el
            .attr(&["iri", "uri", "about"])
            .filter(|i| is_absolute_iri(i))
            .map(str::to_string);
        out.subject_terms.push(SubjectTerm {
            label: label.to_string(),
            definition: el
                .child_text(&["definition", "description", "comment"])
                .or_else(|| el.attr(&["definition"]))
                .unwrap_or("")
                .to_string(),
            iri: iri.clone(),
        });
        for rel in el.children.iter().filter(|c| c.is(&["relation"])) {
            let (Some(subject), Some(predicate)) = (iri.as_deref(), rel.attr(&["predicate"])) else {
                out.warnings
                    .push(format!("relation on `{label}` needs an element IRI and a predicate"));
                continue;
            };
            let object = if let Some(o) = rel.attr(&["object"]) {
                RawObject::Iri(o.to_string())
            } else if let Some(l) = rel.attrs.iter().find(|(k, _)| k == "literal").map(|(_, v)| v.as_str()) {
                let language = rel.attr(&["lang"]).map(str::to_ascii_lowercase);
                let datatype = match &language {
                    Some(_) => RDF_LANG_STRING,
                    None => rel.attr(&["datatype"]).unwrap_or(XSD_STRING),
                };
                RawObject::Literal(Literal {
                    value: l.to_string(),
                    datatype: datatype.to_string(),
                    language,
                })
            } else {
                out.warnings.push(format!("relation on `{label}` has no object"));
                continue;
            };
            out.triples.push(RawTriple {
                subject: subject.to_string(),
                predicate: predicate.to_string(),
                object,
            });
        }
    }
    Ok(out)
}

pub(crate) fn extract_records(doc: &[u8]) -> Result<Vec<Record>> {
    let root = parse_dom(doc)?;
    let mut all = Vec::new();
    root.walk(&mut all);
    Ok(all
        .into_iter()
        .filter(|e| e.is(&["record"]))
        .enumerate()
        .map(|(i, r)| Record {
            id: r
                .attr(&["id", "about", "identifier"])
                .map_or_else(|| format!("record-{}", i + 1), str::to_string),
            fields: r
                .children
                .iter()
                .filter(|c| !c.text.trim().is_empty())
                .map(|c| (c.name.clone(), c.text.trim().to_string()))
                .collect(),
        })
        .collect())
}
