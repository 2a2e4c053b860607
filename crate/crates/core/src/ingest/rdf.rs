//! RDF/XML and Turtle input, via the rio parsers.

use std::cell::Cell;
use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Read};
use std::rc::Rc;

use oxiri::Iri;
use rio_api::model::{Literal as RioLiteral, Subject, Term as RioTerm, Triple as RioTriple};
use rio_api::parser::{ParseError, TriplesParser};
use rio_turtle::{TurtleError, TurtleParser};
use rio_xml::{RdfXmlError, RdfXmlParser};

use super::{local_name, Format, ParsedVocabulary, RawObject, RawTriple, Record, SubjectTerm};
use crate::error::{Error, Result};
use crate::model::{Literal, XSD_STRING};

pub mod ns {
    pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
    pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
    pub const RDF_PROPERTY: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#Property";
    pub const RDF_LANG_STRING: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#langString";
    pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
    pub const RDFS_COMMENT: &str = "http://www.w3.org/2000/01/rdf-schema#comment";
    pub const RDFS_CLASS: &str = "http://www.w3.org/2000/01/rdf-schema#Class";
    pub const RDFS_IS_DEFINED_BY: &str = "http://www.w3.org/2000/01/rdf-schema#isDefinedBy";
    pub const RDFS_SUB_PROPERTY_OF: &str = "http://www.w3.org/2000/01/rdf-schema#subPropertyOf";
    pub const OWL: &str = "http://www.w3.org/2002/07/owl#";
    pub const OWL_ONTOLOGY: &str = "http://www.w3.org/2002/07/owl#Ontology";
    pub const OWL_CLASS: &str = "http://www.w3.org/2002/07/owl#Class";
    pub const OWL_OBJECT_PROPERTY: &str = "http://www.w3.org/2002/07/owl#ObjectProperty";
    pub const OWL_DATATYPE_PROPERTY: &str = "http://www.w3.org/2002/07/owl#DatatypeProperty";
    pub const OWL_ANNOTATION_PROPERTY: &str = "http://www.w3.org/2002/07/owl#AnnotationProperty";
    pub const OWL_SAME_AS: &str = "http://www.w3.org/2002/07/owl#sameAs";
    pub const SKOS: &str = "http://www.w3.org/2004/02/skos/core#";
    pub const SKOS_CONCEPT: &str = "http://www.w3.org/2004/02/skos/core#Concept";
    pub const SKOS_CONCEPT_SCHEME: &str = "http://www.w3.org/2004/02/skos/core#ConceptScheme";
    pub const SKOS_PREF_LABEL: &str = "http://www.w3.org/2004/02/skos/core#prefLabel";
    pub const SKOS_DEFINITION: &str = "http://www.w3.org/2004/02/skos/core#definition";
    pub const SKOS_IN_SCHEME: &str = "http://www.w3.org/2004/02/skos/core#inScheme";
    pub const DCTERMS: &str = "http://purl.org/dc/terms/";
    pub const DCTERMS_TITLE: &str = "http://purl.org/dc/terms/title";
    pub const DCTERMS_DESCRIPTION: &str = "http://purl.org/dc/terms/description";
    pub const DCTERMS_RIGHTS: &str = "http://purl.org/dc/terms/rights";
    pub const DCTERMS_LICENSE: &str = "http://purl.org/dc/terms/license";
    pub const DC_TITLE: &str = "http://purl.org/dc/elements/1.1/title";
    pub const DC_DESCRIPTION: &str = "http://purl.org/dc/elements/1.1/description";
    pub const DC_RIGHTS: &str = "http://purl.org/dc/elements/1.1/rights";
    pub const CC_LICENSE: &str = "http://creativecommons.org/ns#license";
    pub const SCHEMA_LICENSE: &str = "http://schema.org/license";
}

use ns::*;

const ELEMENT_TYPES: &[&str] = &[
    RDF_PROPERTY,
    RDFS_CLASS,
    OWL_CLASS,
    OWL_OBJECT_PROPERTY,
    OWL_DATATYPE_PROPERTY,
    OWL_ANNOTATION_PROPERTY,
    SKOS_CONCEPT,
];

const CONTAINER_TYPES: &[&str] = &[OWL_ONTOLOGY, SKOS_CONCEPT_SCHEME];

const RIGHTS_PREDICATES: &[&str] = &[DCTERMS_RIGHTS, DCTERMS_LICENSE, DC_RIGHTS, CC_LICENSE, SCHEMA_LICENSE];

const TITLE_PREDICATES: &[&str] = &[DCTERMS_TITLE, DC_TITLE, RDFS_LABEL, SKOS_PREF_LABEL];

/// Predicates that describe an element rather than relate it, checked in
/// preference order for labels and definitions.
const LABEL_PREDICATES: &[&str] = &[SKOS_PREF_LABEL, RDFS_LABEL];
const DEFINITION_PREDICATES: &[&str] = &[SKOS_DEFINITION, RDFS_COMMENT, DCTERMS_DESCRIPTION, DC_DESCRIPTION];

/// Local names, under the dcterms/owl/skos namespaces, of descriptive and
/// versioning predicates that are never stored as relations.
const METADATA_LOCAL: &[(&str, &[&str])] = &[
    (
        DCTERMS,
        &[
            "created",
            "modified",
            "issued",
            "isReplacedBy",
            "replaces",
            "hasVersion",
            "title",
            "description",
            "rights",
            "license",
        ],
    ),
    (OWL, &["deprecated", "priorVersion", "versionInfo", "sameAs"]),
    (
        SKOS,
        &[
            "prefLabel",
            "definition",
            "inScheme",
            "topConceptOf",
            "hasTopConcept",
            "changeNote",
            "historyNote",
        ],
    ),
];

pub fn is_metadata_predicate(p: &str) -> bool {
    if [RDF_TYPE, RDFS_LABEL, RDFS_COMMENT, RDFS_IS_DEFINED_BY].contains(&p) || RIGHTS_PREDICATES.contains(&p) {
        return true;
    }
    if [DC_TITLE, DC_DESCRIPTION].contains(&p) {
        return true;
    }
    METADATA_LOCAL
        .iter()
        .any(|(base, names)| p.strip_prefix(base).is_some_and(|rest| names.contains(&rest)))
}

/// Reader over a byte slice that records how far the parser has consumed.
struct Tracked<'a> {
    doc: &'a [u8],
    pos: Rc<Cell<usize>>,
}

impl Read for Tracked<'_> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let rest = &self.doc[self.pos.get()..];
        let n = rest.len().min(buf.len());
        buf[..n].copy_from_slice(&rest[..n]);
        self.pos.set(self.pos.get() + n);
        Ok(n)
    }
}

impl BufRead for Tracked<'_> {
    fn fill_buf(&mut self) -> std::io::Result<&[u8]> {
        Ok(&self.doc[self.pos.get()..])
    }

    fn consume(&mut self, amt: usize) {
        self.pos.set((self.pos.get() + amt).min(self.doc.len()));
    }
}

/// Decides whether a SKOS document is RDF/XML or Turtle.
pub fn sniff(doc: &[u8]) -> Format {
    let text = String::from_utf8_lossy(&doc[..doc.len().min(512)]);
    let t = text.trim_start_matches('\u{feff}').trim_start();
    if t.starts_with("<?") || t.starts_with("<!") {
        return Format::RdfXml;
    }
    if let Some(rest) = t.strip_prefix('<') {
        let token: String = rest.chars().take_while(|c| !c.is_whitespace() && *c != '>').collect();
        if !token.contains("://") && !token.starts_with("urn:") {
            return Format::RdfXml;
        }
    }
    Format::Turtle
}

fn convert(t: &RioTriple<'_>) -> std::result::Result<RawTriple, String> {
    let subject = match t.subject {
        Subject::NamedNode(n) => n.iri.to_string(),
        Subject::BlankNode(b) => format!("_:{}", b.id),
        Subject::Triple(_) => return Err("quoted triples are not supported".into()),
    };
    let object = match t.object {
        RioTerm::NamedNode(n) => RawObject::Iri(n.iri.to_string()),
        RioTerm::BlankNode(b) => RawObject::Blank(b.id.to_string()),
        RioTerm::Literal(RioLiteral::Simple { value }) => RawObject::Literal(Literal::string(value)),
        RioTerm::Literal(RioLiteral::LanguageTaggedString { value, language }) => RawObject::Literal(Literal {
            value: value.to_string(),
            datatype: RDF_LANG_STRING.to_string(),
            language: Some(language.to_ascii_lowercase()),
        }),
        RioTerm::Literal(RioLiteral::Typed { value, datatype }) => RawObject::Literal(Literal {
            value: value.to_string(),
            datatype: datatype.iri.to_string(),
            language: None,
        }),
        RioTerm::Triple(_) => return Err("quoted triples are not supported".into()),
    };
    Ok(RawTriple {
        subject,
        predicate: t.predicate.iri.to_string(),
        object,
    })
}

enum Failure<E> {
    Syntax(E),
    Unsupported(String),
}

impl<E> From<E> for Failure<E> {
    fn from(e: E) -> Self {
        Failure::Syntax(e)
    }
}

fn run<P, E>(mut parser: P) -> std::result::Result<Vec<RawTriple>, Failure<E>>
where
    P: TriplesParser<Error = E>,
{
    let mut out = Vec::new();
    parser.parse_all(&mut |t: RioTriple<'_>| -> std::result::Result<(), Failure<E>> {
        out.push(convert(&t).map_err(Failure::Unsupported)?);
        Ok(())
    })?;
    Ok(out)
}

/// Parses an RDF document into raw triples in document order.
pub fn parse_triples(doc: &[u8], format: Format, base_iri: Option<&str>) -> Result<Vec<RawTriple>> {
    let format = if format == Format::Skos { sniff(doc) } else { format };
    let base = base_iri
        .map(|b| Iri::parse(b.to_string()).map_err(|e| Error::invalid(format!("base IRI `{b}`: {e}"))))
        .transpose()?;
    let pos = Rc::new(Cell::new(0));
    let reader = Tracked { doc, pos: pos.clone() };
    match format {
        Format::Turtle => run(TurtleParser::new(reader, base)).map_err(|f| match f {
            Failure::Syntax(e) => turtle_error(doc, &e, pos.get()),
            Failure::Unsupported(m) => Error::parse_at(doc, pos.get(), m),
        }),
        Format::RdfXml => run(RdfXmlParser::new(reader, base)).map_err(|f| match f {
            Failure::Syntax(e) => xml_error(doc, &e, pos.get()),
            Failure::Unsupported(m) => Error::parse_at(doc, pos.get(), m),
        }),
        other => Err(Error::UnsupportedFormat(format!("{other} is not an RDF syntax"))),
    }
}

fn turtle_error(doc: &[u8], e: &TurtleError, consumed: usize) -> Error {
    match e.textual_position() {
        // both already 1-based
        Some(p) => Error::Parse {
            line: p.line_number(),
            column: p.byte_number(),
            message: strip_position(&e.to_string()),
        },
        None => Error::parse_at(doc, consumed, e.to_string()),
    }
}

fn strip_position(msg: &str) -> String {
    match msg.find(" on line ") {
        Some(i) => msg[..i].to_string(),
        None => msg.to_string(),
    }
}

fn xml_error(doc: &[u8], e: &RdfXmlError, consumed: usize) -> Error {
    Error::parse_at(doc, consumed.saturating_sub(1), e.to_string())
}

fn first_literal<'a>(props: &'a [(&'a str, &'a RawObject)], preds: &[&str]) -> Option<&'a str> {
    for p in preds {
        let mut best: Option<&str> = None;
        for (pred, obj) in props {
            if pred != p {
                continue;
            }
            if let RawObject::Literal(l) = obj {
                let english = l
                    .language
                    .as_deref()
                    .is_none_or(|lang| lang == "en" || lang.starts_with("en-"));
                if best.is_none() || english {
                    best = Some(l.value.as_str());
                }
                if english {
                    break;
                }
            }
        }
        if let Some(b) = best.map(str::trim).filter(|b| !b.is_empty()) {
            return Some(b);
        }
    }
    None
}

type Outgoing<'a> = BTreeMap<&'a str, Vec<(&'a str, &'a RawObject)>>;

/// Groups triples by subject, keeping first-appearance order.
fn by_subject(triples: &[RawTriple]) -> (Vec<&str>, Outgoing<'_>) {
    let mut order = Vec::new();
    let mut map: BTreeMap<&str, Vec<(&str, &RawObject)>> = BTreeMap::new();
    for t in triples {
        let entry = map.entry(t.subject.as_str()).or_insert_with(|| {
            order.push(t.subject.as_str());
            Vec::new()
        });
        entry.push((t.predicate.as_str(), &t.object));
    }
    (order, map)
}

fn types<'a>(props: &[(&str, &'a RawObject)]) -> Vec<&'a str> {
    props
        .iter()
        .filter(|(p, _)| *p == RDF_TYPE)
        .filter_map(|(_, o)| match o {
            RawObject::Iri(i) => Some(i.as_str()),
            _ => None,
        })
        .collect()
}

pub fn extract_schema(triples: &[RawTriple], format: Format) -> ParsedVocabulary {
    let (order, map) = by_subject(triples);
    let mut out = ParsedVocabulary {
        format,
        title: None,
        rights_link: None,
        subject_terms: Vec::new(),
        predicates: Vec::new(),
        triples: Vec::new(),
        warnings: Vec::new(),
    };
    let mut elements: HashSet<&str> = HashSet::new();
    let mut container_rights = None;
    let mut any_rights = None;
    for s in &order {
        let props = &map[s];
        let kinds = types(props);
        let rights = props
            .iter()
            .find(|(p, _)| RIGHTS_PREDICATES.contains(p))
            .map(|(_, o)| match o {
                RawObject::Iri(i) => i.clone(),
                RawObject::Literal(l) => l.value.trim().to_string(),
                RawObject::Blank(b) => format!("_:{b}"),
            });
        if kinds.iter().any(|k| CONTAINER_TYPES.contains(k)) {
            if out.title.is_none() {
                out.title = first_literal(props, TITLE_PREDICATES).map(str::to_string);
            }
            container_rights = container_rights.or(rights);
            continue;
        }
        any_rights = any_rights.or(rights);
        if s.starts_with("_:") {
            continue;
        }
        let label = first_literal(props, LABEL_PREDICATES);
        let typed = kinds.iter().any(|k| ELEMENT_TYPES.contains(k));
        if label.is_none() && !typed {
            continue;
        }
        elements.insert(s);
        out.subject_terms.push(SubjectTerm {
            label: label.unwrap_or_else(|| local_name(s)).to_string(),
            definition: first_literal(props, DEFINITION_PREDICATES).unwrap_or("").to_string(),
            iri: Some(s.to_string()),
        });
    }
    out.rights_link = container_rights.or(any_rights).filter(|r| !r.is_empty());
    for t in triples {
        if !elements.contains(t.subject.as_str()) || is_metadata_predicate(&t.predicate) {
            continue;
        }
        if let RawObject::Blank(b) = &t.object {
            out.warnings.push(format!(
                "{} {}: blank-node object _:{b} skipped",
                t.subject, t.predicate
            ));
            continue;
        }
        out.triples.push(t.clone());
    }
    out
}

/// Every subject with at least one non-type property becomes a record.
pub fn extract_records(triples: &[RawTriple]) -> Vec<Record> {
    let (order, map) = by_subject(triples);
    order
        .into_iter()
        .filter_map(|s| {
            let fields: Vec<(String, String)> = map[s]
                .iter()
                .filter(|(p, _)| *p != RDF_TYPE)
                .filter_map(|(p, o)| match o {
                    RawObject::Literal(l) => Some((p.to_string(), l.value.clone())),
                    RawObject::Iri(i) => Some((p.to_string(), i.clone())),
                    RawObject::Blank(_) => None,
                })
                .collect();
            (!fields.is_empty()).then(|| Record {
                id: s.to_string(),
                fields,
            })
        })
        .collect()
}

/// Literal from an RDF literal with a plain datatype.
pub fn is_plain_string(l: &Literal) -> bool {
    l.datatype == XSD_STRING && l.language.is_none()
}
