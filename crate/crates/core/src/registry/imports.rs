use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::terms::TermSeed;
use super::{Registry, State};
use crate::ark::Target;
use crate::clock::Timestamp;
use crate::consensus::{self, StabilityCheck};
use crate::error::{Error, Result};
use crate::ids::{SchemaId, SourceId, TermId, UserId};
use crate::ingest::{self, audit, Fetcher, Format, RawObject, DEFAULT_HASH_ALGORITHM};
use crate::model::{
    is_absolute_iri, ActionKind, AuditOutcome, AuditResult, Collection, EventKind, Literal, Object, Predicate, Rights,
    Schema, SourceRecord, Triple,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemaImport {
    pub schema: Schema,
    pub source: SourceRecord,
    pub created: Vec<TermId>,
    /// Elements that resolved to terms already in the registry.
    pub existing: Vec<TermId>,
    pub triples_added: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordImport {
    pub collection: Collection,
    pub records: usize,
    pub created: Vec<TermId>,
    /// Field values that matched an existing object term.
    pub reused: usize,
    pub triples_added: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub audits: Vec<AuditResult>,
    pub events_processed: usize,
}

impl State {
    /// Term named by an IRI: a known element IRI, or an IRI embedding one of
    /// this registry's ARKs.
    pub(crate) fn term_for_iri(&self, iri: &str) -> Option<TermId> {
        if let Some(id) = self.idx.iris.get(iri) {
            return Some(*id);
        }
        let at = iri.find("ark:/")?;
        match self.arks.resolve(&iri[at..]).ok()?.target {
            Target::Term(t) => Some(t),
            _ => None,
        }
    }

    fn apply_audit(&mut self, result: &AuditResult, th: &consensus::Thresholds, now: Timestamp) {
        let Some(src) = self.sources.get_mut(&result.source) else {
            return;
        };
        let transition = src
            .last_audit
            .as_ref()
            .is_none_or(|l| l.outcome != result.outcome || l.new_hash != result.new_hash);
        src.last_audit = Some(result.clone());
        if !transition {
            return;
        }
        let check = match result.outcome {
            AuditOutcome::Unchanged => StabilityCheck::Unchanged,
            AuditOutcome::Changed => StabilityCheck::Changed,
            AuditOutcome::Unreachable => StabilityCheck::Unreachable,
        };
        let affected: Vec<TermId> = self
            .terms
            .values()
            .filter(|t| t.source == Some(result.source))
            .map(|t| t.id)
            .collect();
        for id in affected {
            let t = self.terms.get_mut(&id).expect("collected above");
            t.stability_score = consensus::stability_update(t.stability_score, check, 0.0, th);
            match result.outcome {
                AuditOutcome::Unchanged => t.flagged = false,
                AuditOutcome::Changed => t.flagged = true,
                AuditOutcome::Unreachable => {}
            }
            self.enqueue(EventKind::Sweep, Some(id), None, now);
        }
    }
}

fn literal_of(l: &Literal) -> Literal {
    l.clone()
}

impl Registry {
    /// Imports a schema document. Elements already present (same element
    /// IRI, or an IRI carrying one of our ARKs) are reused, so importing the
    /// same document twice creates nothing new.
    pub fn import_schema(
        &self,
        user: UserId,
        doc: &[u8],
        format: Format,
        source_url: Option<&str>,
    ) -> Result<SchemaImport> {
        if let Some(url) = source_url {
            if !is_absolute_iri(url) {
                return Err(Error::invalid(format!("source URL `{url}` is not an absolute IRI")));
            }
        }
        let parsed = ingest::parse_schema(doc, format, source_url)?;
        let hash = ingest::hash_bytes(DEFAULT_HASH_ALGORITHM, doc)?;
        let url = source_url.map_or_else(|| format!("urn:{DEFAULT_HASH_ALGORITHM}:{hash}"), str::to_string);
        let now = self.now();
        let mut st = self.state.write();
        st.user(user)?;

        let existing_source = st.sources.values().find(|s| s.url == url).map(|s| s.id);
        let (source_id, schema_id) = match existing_source {
            Some(sid) => {
                let schema = st
                    .schemas
                    .values()
                    .find(|s| s.source == sid)
                    .map(|s| s.id)
                    .ok_or_else(|| Error::Storage(format!("{sid} has no schema")))?;
                (sid, schema)
            }
            None => {
                st.seq.source += 1;
                let sid = SourceId(st.seq.source);
                st.sources.insert(
                    sid,
                    SourceRecord {
                        id: sid,
                        url: url.clone(),
                        content_hash: hash.clone(),
                        hash_algorithm: DEFAULT_HASH_ALGORITHM.to_string(),
                        fetched_at: Some(now),
                        rights_link: parsed.rights_link.clone(),
                        collection_id: None,
                        last_audit: None,
                    },
                );
                st.seq.schema += 1;
                let schema_id = SchemaId(st.seq.schema);
                let ark = st.arks.mint(Target::Schema(schema_id), now)?.ark;
                st.schemas.insert(
                    schema_id,
                    Schema {
                        id: schema_id,
                        ark,
                        label: parsed.title.clone().unwrap_or_else(|| url.clone()),
                        source: sid,
                        custodian: user,
                    },
                );
                (sid, schema_id)
            }
        };
        let rights = match st.sources[&source_id].rights_link.clone() {
            Some(link) => Rights::Link(link),
            None if source_url.is_some() => Rights::Link(url.clone()),
            None => Rights::Cc0,
        };

        let mut out = SchemaImport {
            schema: st.schemas[&schema_id].clone(),
            source: st.sources[&source_id].clone(),
            created: Vec::new(),
            existing: Vec::new(),
            triples_added: 0,
            warnings: parsed.warnings.clone(),
        };
        let mut local: HashMap<String, TermId> = HashMap::new();
        for element in &parsed.subject_terms {
            let found = element.iri.as_deref().and_then(|i| st.term_for_iri(i));
            let id = match found {
                Some(id) => {
                    out.existing.push(id);
                    id
                }
                None => {
                    let id = st.insert_term(
                        TermSeed {
                            label: element.label.trim().to_string(),
                            definition: element.definition.trim().to_string(),
                            contributor: user,
                            source: Some(source_id),
                            iri: element.iri.clone(),
                            schema: Some(schema_id),
                            collection: None,
                            rights: rights.clone(),
                            stability: 1.0,
                            change_note: format!("imported from {url}"),
                            unique_label: false,
                        },
                        now,
                    )?;
                    out.created.push(id);
                    id
                }
            };
            if let Some(iri) = &element.iri {
                local.insert(iri.clone(), id);
            }
        }

        let lookup = |st: &State, iri: &str| local.get(iri).copied().or_else(|| st.term_for_iri(iri));
        for raw in &parsed.triples {
            let Some(subject) = lookup(&st, &raw.subject) else {
                out.warnings
                    .push(format!("subject {} is not an element; triple skipped", raw.subject));
                continue;
            };
            let predicate = match lookup(&st, &raw.predicate) {
                Some(p) => Predicate::Term(p),
                None if is_absolute_iri(&raw.predicate) => Predicate::Iri(raw.predicate.clone()),
                None => {
                    out.warnings
                        .push(format!("predicate `{}` is not an IRI; triple skipped", raw.predicate));
                    continue;
                }
            };
            let object = match &raw.object {
                RawObject::Iri(i) => match lookup(&st, i) {
                    Some(o) => Object::Term(o),
                    None => Object::Literal(Literal::any_uri(i.clone())),
                },
                RawObject::Literal(l) => Object::Literal(literal_of(l)),
                RawObject::Blank(b) => {
                    out.warnings.push(format!("blank node _:{b} skipped"));
                    continue;
                }
            };
            if st.triples.insert(Triple {
                subject,
                predicate,
                object,
            }) {
                out.triples_added += 1;
            }
        }
        for id in &out.created {
            st.enqueue(EventKind::Import, Some(*id), Some(user), now);
        }
        st.log_action(user, ActionKind::Import, now);
        for w in &out.warnings {
            tracing::warn!(source = %url, "{w}");
        }
        Ok(out)
    }

    /// Imports records encoded against a previously imported schema. Each
    /// field value becomes an object term, deduplicated by (lowercase value,
    /// element), linked to its element by a triple whose object is the
    /// record identifier.
    pub fn import_records(
        &self,
        user: UserId,
        doc: &[u8],
        format: Format,
        schema: SchemaId,
        collection: &str,
    ) -> Result<RecordImport> {
        let collection = collection.trim();
        if collection.is_empty() || collection.chars().any(char::is_whitespace) {
            return Err(Error::invalid("collection ids are non-empty and contain no whitespace"));
        }
        let parsed = ingest::parse_records(doc, format, None)?;
        if parsed.records.is_empty() {
            return Err(Error::EmptyImport);
        }
        let now = self.now();
        let mut st = self.state.write();
        st.user(user)?;
        let schema_rec = st
            .schemas
            .get(&schema)
            .cloned()
            .ok_or_else(|| Error::not_found(schema))?;
        if !st.collections.contains_key(collection) {
            let ark = st.arks.mint(Target::Collection(collection.to_string()), now)?.ark;
            st.collections.insert(
                collection.to_string(),
                Collection {
                    id: collection.to_string(),
                    ark,
                    schema,
                    custodian: user,
                },
            );
        }

        // element names: IRI, lowercase label, lowercase IRI local name
        let mut elements: BTreeMap<String, TermId> = BTreeMap::new();
        for t in st.terms.values().filter(|t| t.source == Some(schema_rec.source)) {
            elements.entry(t.label.to_lowercase()).or_insert(t.id);
            if let Some(iri) = &t.iri {
                elements.insert(iri.clone(), t.id);
                elements.entry(ingest::local_name(iri).to_lowercase()).or_insert(t.id);
            }
        }

        let mut out = RecordImport {
            collection: st.collections[collection].clone(),
            records: parsed.records.len(),
            created: Vec::new(),
            reused: 0,
            triples_added: 0,
            warnings: Vec::new(),
        };
        for record in &parsed.records {
            for (name, value) in &record.fields {
                let element = elements
                    .get(name)
                    .or_else(|| elements.get(&name.to_lowercase()))
                    .copied()
                    .or_else(|| {
                        st.term_for_iri(name)
                            .filter(|t| st.terms[t].source == Some(schema_rec.source))
                    });
                let Some(element) = element else {
                    let w = format!("record {}: unknown element `{name}`", record.id);
                    tracing::warn!("{w}");
                    out.warnings.push(w);
                    continue;
                };
                let value = value.trim();
                if value.is_empty() {
                    continue;
                }
                let el = &st.terms[&element];
                let element_key = el.iri.clone().unwrap_or_else(|| el.ark.clone());
                let element_label = el.label.clone();
                let key = (value.to_lowercase(), element_key.clone());
                let object_term = match st.idx.object_keys.get(&key) {
                    Some(id) => {
                        out.reused += 1;
                        *id
                    }
                    None => {
                        let id = st.insert_term(
                            TermSeed {
                                label: value.to_string(),
                                definition: format!("Value of {element_label} in collection {collection}."),
                                contributor: user,
                                source: None,
                                iri: None,
                                schema: Some(schema),
                                collection: Some(collection.to_string()),
                                rights: Rights::Cc0,
                                stability: 0.0,
                                change_note: format!("imported from records of collection {collection}"),
                                unique_label: false,
                            },
                            now,
                        )?;
                        st.idx.object_keys.insert(key.clone(), id);
                        st.object_keys.push((key.0, key.1, id));
                        out.created.push(id);
                        id
                    }
                };
                let triple = Triple {
                    subject: object_term,
                    predicate: Predicate::Term(element),
                    object: Object::Literal(Literal::string(record.id.clone())),
                };
                if st.triples.insert(triple) {
                    out.triples_added += 1;
                }
            }
        }
        for id in &out.created {
            st.enqueue(EventKind::Import, Some(*id), Some(user), now);
        }
        st.log_action(user, ActionKind::Import, now);
        Ok(out)
    }

    pub fn sources(&self) -> Vec<SourceRecord> {
        self.state.read().sources.values().cloned().collect()
    }

    pub fn schemas(&self) -> Vec<Schema> {
        self.state.read().schemas.values().cloned().collect()
    }

    pub fn collections(&self) -> Vec<Collection> {
        self.state.read().collections.values().cloned().collect()
    }

    fn audit(&self, ids: Vec<SourceId>, fetcher: &dyn Fetcher) -> Result<Vec<AuditResult>> {
        let sources: Vec<SourceRecord> = {
            let st = self.state.read();
            ids.iter()
                .filter_map(|id| st.sources.get(id))
                .filter(|s| !s.url.starts_with("urn:"))
                .cloned()
                .collect()
        };
        let timeout = self.config.audit.timeout;
        let now = self.now();
        let width = self.config.audit.concurrency.max(1);
        let mut results = Vec::with_capacity(sources.len());
        // fetch without holding the state lock, `width` at a time
        for chunk in sources.chunks(width) {
            let batch: Vec<Result<AuditResult>> = std::thread::scope(|scope| {
                let handles: Vec<_> = chunk
                    .iter()
                    .map(|s| scope.spawn(move || audit::verify_source(s, fetcher, timeout, now)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| {
                        h.join()
                            .unwrap_or_else(|_| Err(Error::Storage("audit worker panicked".into())))
                    })
                    .collect()
            });
            for r in batch {
                results.push(r?);
            }
        }
        let mut st = self.state.write();
        for r in &results {
            st.apply_audit(r, &self.config.thresholds, now);
        }
        Ok(results)
    }

    /// Audits every source once.
    pub fn audit_sources(&self, fetcher: &dyn Fetcher) -> Result<Vec<AuditResult>> {
        let ids = self.state.read().sources.keys().copied().collect();
        self.audit(ids, fetcher)
    }

    /// Audits sources queued by detail views, skipping any audited within
    /// the configured minimum interval.
    pub fn run_pending_audits(&self, fetcher: &dyn Fetcher) -> Result<Vec<AuditResult>> {
        let now = self.now();
        let min = chrono::Duration::from_std(self.config.audit.min_interval).unwrap_or_default();
        let ids: Vec<SourceId> = {
            let mut st = self.state.write();
            let pending = std::mem::take(&mut st.pending_audits);
            pending
                .into_iter()
                .filter(|id| {
                    st.sources
                        .get(id)
                        .and_then(|s| s.last_audit.as_ref())
                        .is_none_or(|a| now - a.checked_at >= min)
                })
                .collect()
        };
        self.audit(ids, fetcher)
    }

    pub fn pending_audit_count(&self) -> usize {
        self.state.read().pending_audits.len()
    }

    /// Audits all sources, then rescores every term and user.
    pub fn run_sweep(&self, fetcher: &dyn Fetcher) -> Result<SweepReport> {
        let audits = self.audit_sources(fetcher)?;
        self.enqueue_sweep();
        let events_processed = self.drain_queue();
        Ok(SweepReport {
            audits,
            events_processed,
        })
    }
}
