use serde::{Deserialize, Serialize};

use super::{Registry, State};
use crate::ark::{self, MintCheck, PersistenceStatement, Target, VersionMetadata};
use crate::error::{Error, Result};
use crate::ids::TermId;
use crate::model::{Collection, Schema, Term, TermVersion};

/// What a resolver request asks for, from the query part of the URL.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inflection {
    /// Bare ARK: the record itself.
    Record,
    /// `?`
    Statement,
    /// `??`
    StatementWithVersions,
    /// `?version=N`
    Version(u32),
}

impl Inflection {
    /// `query` is everything after the first `?`, or `None` if there was no
    /// `?` at all.
    pub fn from_query(query: Option<&str>) -> Result<Self> {
        match query {
            None => Ok(Inflection::Record),
            Some("") => Ok(Inflection::Statement),
            Some("?") => Ok(Inflection::StatementWithVersions),
            Some(q) => {
                let n = q
                    .strip_prefix("version=")
                    .and_then(|n| n.parse::<u32>().ok())
                    .filter(|n| *n > 0)
                    .ok_or_else(|| Error::invalid(format!("unsupported inflection `?{q}`")))?;
                Ok(Inflection::Version(n))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "record", rename_all = "lowercase")]
pub enum Resolved {
    Term(Box<Term>),
    Schema(Schema),
    Collection(Collection),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InflectionBody {
    Record {
        ark: String,
        resolved: Resolved,
    },
    Statement {
        statement: PersistenceStatement,
    },
    StatementWithVersions {
        statement: PersistenceStatement,
        #[serde(skip_serializing_if = "Option::is_none")]
        version_metadata: Option<VersionMetadata>,
    },
    Version {
        version: TermVersion,
        version_metadata: VersionMetadata,
    },
}

impl State {
    fn resolve_ark(&self, ark_text: &str) -> Result<(String, Resolved)> {
        let record = self.arks.resolve(ark_text)?;
        let resolved = match &record.target {
            Target::Term(t) => Resolved::Term(Box::new(self.term(*t)?.clone())),
            Target::Schema(s) => Resolved::Schema(self.schemas.get(s).cloned().ok_or_else(|| Error::not_found(s))?),
            Target::Collection(c) => Resolved::Collection(
                self.collections
                    .get(c)
                    .cloned()
                    .ok_or_else(|| Error::not_found(format!("collection {c}")))?,
            ),
        };
        Ok((record.ark.clone(), resolved))
    }

    fn statement(&self, ark_text: &str) -> Result<PersistenceStatement> {
        let record = self.arks.resolve(ark_text)?;
        Ok(match &record.target {
            Target::Term(t) => ark::term_statement(self.term(*t)?),
            Target::Schema(s) => {
                let schema = self.schemas.get(s).ok_or_else(|| Error::not_found(s))?;
                let n = self.terms.values().filter(|t| t.schema == Some(*s)).count();
                ark::group_statement(record, &schema.label, n)
            }
            Target::Collection(c) => {
                let n = self
                    .terms
                    .values()
                    .filter(|t| t.collection.as_deref() == Some(c.as_str()))
                    .count();
                ark::group_statement(record, c, n)
            }
        })
    }
}

impl Registry {
    /// Accepts a full ARK (`ark:/99999/y20001m`, hyphens allowed) or just the
    /// name part (`y20001m`), which is read under the configured NAAN.
    pub fn normalize_ark(&self, text: &str) -> String {
        let t = text.trim();
        if t.starts_with("ark:") {
            t.to_string()
        } else {
            format!("ark:/{}/{}", self.config.ark.naan, t.trim_start_matches('/'))
        }
    }

    pub fn resolve(&self, ark_text: &str) -> Result<Resolved> {
        let st = self.state.read();
        Ok(st.resolve_ark(&self.normalize_ark(ark_text))?.1)
    }

    pub fn term_id_by_ark(&self, ark_text: &str) -> Result<TermId> {
        let ark_text = self.normalize_ark(ark_text);
        let st = self.state.read();
        match &st.arks.resolve(&ark_text)?.target {
            Target::Term(t) => Ok(*t),
            other => Err(Error::not_found(format!(
                "term with ARK {ark_text} (it names a {})",
                other.kind()
            ))),
        }
    }

    pub fn term_by_ark(&self, ark_text: &str) -> Result<Term> {
        let id = self.term_id_by_ark(ark_text)?;
        self.term(id)
    }

    pub fn persistence_statement(&self, ark_text: &str) -> Result<PersistenceStatement> {
        self.state.read().statement(&self.normalize_ark(ark_text))
    }

    /// Version metadata for a term ARK, as of `version` or the current one.
    pub fn version_metadata(&self, ark_text: &str, version: Option<u32>) -> Result<VersionMetadata> {
        let id = self.term_id_by_ark(ark_text)?;
        let st = self.state.read();
        let term = st.term(id)?;
        let chain = st.versions.get(&id).map(Vec::as_slice).unwrap_or_default();
        ark::version_metadata(term, chain, &self.ark_url(&term.ark), version)
    }

    /// Audits the minted ARKs and dry-runs `sample` further mints per kind;
    /// also checks that every term, schema and collection ARK resolves back
    /// to its record.
    pub fn mint_check(&self, sample: u64) -> MintCheck {
        let st = self.state.read();
        let mut report = st.arks.check(sample, self.now());
        let owned = st
            .terms
            .values()
            .map(|t| (t.ark.as_str(), Target::Term(t.id)))
            .chain(st.schemas.values().map(|s| (s.ark.as_str(), Target::Schema(s.id))))
            .chain(
                st.collections
                    .values()
                    .map(|c| (c.ark.as_str(), Target::Collection(c.id.clone()))),
            );
        for (ark, target) in owned {
            match st.arks.resolve(ark) {
                Ok(rec) if rec.target == target => {}
                Ok(rec) => report
                    .problems
                    .push(format!("{ark} resolves to {:?}, not {target:?}", rec.target)),
                Err(e) => report.problems.push(format!("{ark}: {e}")),
            }
        }
        report
    }

    pub fn inflect(&self, ark_text: &str, inflection: Inflection) -> Result<InflectionBody> {
        let ark_text = self.normalize_ark(ark_text);
        match inflection {
            Inflection::Record => {
                let (ark, resolved) = self.state.read().resolve_ark(&ark_text)?;
                Ok(InflectionBody::Record { ark, resolved })
            }
            Inflection::Statement => Ok(InflectionBody::Statement {
                statement: self.persistence_statement(&ark_text)?,
            }),
            Inflection::StatementWithVersions => {
                let statement = self.persistence_statement(&ark_text)?;
                let version_metadata = match self.term_id_by_ark(&ark_text) {
                    Ok(_) => Some(self.version_metadata(&ark_text, None)?),
                    Err(Error::NotFound(_)) => None,
                    Err(e) => return Err(e),
                };
                Ok(InflectionBody::StatementWithVersions {
                    statement,
                    version_metadata,
                })
            }
            Inflection::Version(n) => {
                let id = self.term_id_by_ark(&ark_text)?;
                let version = self
                    .versions(id)?
                    .into_iter()
                    .find(|v| v.version == n)
                    .ok_or_else(|| Error::not_found(format!("version {n} of {ark_text}")))?;
                Ok(InflectionBody::Version {
                    version,
                    version_metadata: self.version_metadata(&ark_text, Some(n))?,
                })
            }
        }
    }
}
