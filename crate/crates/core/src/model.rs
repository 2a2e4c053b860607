//! Domain records held by the registry.
//!
//! Scores and status on [`Term`] are crate-private: status only changes in
//! `Registry::apply_classification`, and the scores only change through the
//! rescore path, source audits, and interaction bonuses.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::error::Error;
use crate::ids::{CommentId, SchemaId, SourceId, TermId, UserId};

pub const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
pub const XSD_ANY_URI: &str = "http://www.w3.org/2001/XMLSchema#anyURI";
pub const CC0_URL: &str = "https://creativecommons.org/publicdomain/zero/1.0/";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Vernacular,
    Canonical,
    Deprecated,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Vernacular => "vernacular",
            Status::Canonical => "canonical",
            Status::Deprecated => "deprecated",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Status {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vernacular" => Ok(Status::Vernacular),
            "canonical" => Ok(Status::Canonical),
            "deprecated" => Ok(Status::Deprecated),
            other => Err(Error::invalid(format!("unknown status `{other}`"))),
        }
    }
}

/// Usage rights attached to a term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "url", rename_all = "lowercase")]
pub enum Rights {
    /// Public-domain dedication; the default for contributed terms.
    Cc0,
    /// Link to the rights statement of the organization that published the term.
    Link(String),
}

impl Rights {
    pub fn url(&self) -> &str {
        match self {
            Rights::Cc0 => CC0_URL,
            Rights::Link(url) => url,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub id: TermId,
    pub ark: String,
    pub label: String,
    pub definition: String,
    pub examples: Vec<Triple>,
    pub(crate) status: Status,
    pub contributor: UserId,
    pub custodian: UserId,
    pub source: Option<SourceId>,
    /// IRI of the schema element this term was imported from.
    pub iri: Option<String>,
    pub schema: Option<SchemaId>,
    pub collection: Option<String>,
    pub rights: Rights,
    pub(crate) consensus_score: f64,
    pub(crate) stability_score: f64,
    pub(crate) applicability_score: f64,
    pub(crate) flagged: bool,
    pub created: Timestamp,
    pub modified: Timestamp,
    pub last_interaction: Timestamp,
    /// Instant up to which `stability_score` has been aged.
    pub(crate) stability_as_of: Timestamp,
    /// Instant up to which `applicability_score` has been decayed.
    pub(crate) applicability_as_of: Timestamp,
    pub current_version: u32,
}

impl Term {
    pub fn status(&self) -> Status {
        self.status
    }

    pub fn consensus_score(&self) -> f64 {
        self.consensus_score
    }

    pub fn stability_score(&self) -> f64 {
        self.stability_score
    }

    pub fn applicability_score(&self) -> f64 {
        self.applicability_score
    }

    pub fn flagged(&self) -> bool {
        self.flagged
    }

    /// Terms whose stability is governed by source audits rather than by
    /// elapsed unaltered time: imported and never edited since.
    pub fn audit_governed(&self) -> bool {
        self.source.is_some() && self.current_version == 1
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predicate {
    Term(TermId),
    Iri(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub value: String,
    pub datatype: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub language: Option<String>,
}

impl Literal {
    pub fn string(value: impl Into<String>) -> Self {
        Self {
            value: value.into(),
            datatype: XSD_STRING.to_string(),
            language: None,
        }
    }

    pub fn any_uri(value: impl Into<String>) -> Self {
        Self {
            value: value.into(),
            datatype: XSD_ANY_URI.to_string(),
            language: None,
        }
    }

    pub fn is_any_uri(&self) -> bool {
        self.datatype == XSD_ANY_URI
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Object {
    Term(TermId),
    Literal(Literal),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: TermId,
    pub predicate: Predicate,
    pub object: Object,
}

impl Triple {
    pub fn mentions(&self, term: TermId) -> bool {
        self.subject == term || self.predicate == Predicate::Term(term) || self.object == Object::Term(term)
    }

    /// Terms linked to `term` by this triple, in any position.
    pub fn neighbours(&self, term: TermId) -> impl Iterator<Item = TermId> + '_ {
        let mut out = Vec::with_capacity(2);
        if self.mentions(term) {
            out.push(self.subject);
            if let Predicate::Term(p) = &self.predicate {
                out.push(*p);
            }
            if let Object::Term(o) = &self.object {
                out.push(*o);
            }
        }
        out.into_iter().filter(move |t| *t != term)
    }
}

/// Predicate and object of an example triple whose subject is the term
/// being proposed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleTriple {
    pub predicate: Predicate,
    pub object: Object,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalLink {
    pub service: String,
    pub url: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Login,
    Propose,
    Revise,
    Vote,
    Comment,
    Follow,
    Track,
    Import,
    Survey,
    Relate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Action {
    pub kind: ActionKind,
    pub at: Timestamp,
}

/// How a user wants notifications delivered outside the app.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmailPreference {
    #[default]
    None,
    Digest,
    Immediate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct User {
    pub id: UserId,
    pub handle: String,
    pub display_name: String,
    pub location: String,
    pub external_links: Vec<ExternalLink>,
    pub followers: BTreeSet<UserId>,
    pub following: BTreeSet<UserId>,
    pub tracked: BTreeSet<TermId>,
    pub member_since: Timestamp,
    pub last_seen: Timestamp,
    pub action_log: Vec<Action>,
    pub(crate) reputation: f64,
    pub is_admin: bool,
    pub email_preference: EmailPreference,
    /// Consensus-score edges that trigger threshold-crossing notifications
    /// on tracked terms.
    pub threshold_bands: Vec<f64>,
    pub(crate) secret_hash: String,
}

impl User {
    pub fn reputation(&self) -> f64 {
        self.reputation
    }

    pub fn profile_complete(&self) -> bool {
        !self.display_name.trim().is_empty() && !self.location.trim().is_empty() && !self.external_links.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "up" => Ok(Direction::Up),
            "down" => Ok(Direction::Down),
            other => Err(Error::invalid(format!("unknown vote direction `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    pub user: UserId,
    pub term: TermId,
    pub direction: Direction,
    pub cast_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comment {
    pub id: CommentId,
    pub user: UserId,
    pub term: TermId,
    pub body: String,
    pub tags: Vec<String>,
    pub posted_at: Timestamp,
    pub is_review_request: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermVersion {
    pub term: TermId,
    pub version: u32,
    pub label: String,
    pub definition: String,
    pub change_note: String,
    pub created_at: Timestamp,
    pub replaces: Option<u32>,
    pub replaced_by: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuditOutcome {
    Unchanged,
    Changed,
    Unreachable,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditResult {
    pub source: SourceId,
    pub outcome: AuditOutcome,
    pub new_hash: Option<String>,
    pub checked_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceRecord {
    pub id: SourceId,
    pub url: String,
    pub content_hash: String,
    pub hash_algorithm: String,
    pub fetched_at: Option<Timestamp>,
    pub rights_link: Option<String>,
    pub collection_id: Option<String>,
    pub last_audit: Option<AuditResult>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub id: SchemaId,
    pub ark: String,
    pub label: String,
    pub source: SourceId,
    pub custodian: UserId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collection {
    pub id: String,
    pub ark: String,
    pub schema: SchemaId,
    pub custodian: UserId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "lowercase")]
pub enum TermGroup {
    Terms(BTreeSet<TermId>),
    Schema(SchemaId),
    Collection(String),
}

impl TermGroup {
    pub fn covers(&self, term: &Term) -> bool {
        match self {
            TermGroup::Terms(ids) => ids.contains(&term.id),
            TermGroup::Schema(s) => term.schema == Some(*s),
            TermGroup::Collection(c) => term.collection.as_deref() == Some(c.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeratorAssignment {
    pub custodian: UserId,
    pub moderator: UserId,
    pub term_group: TermGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Vote,
    Comment,
    Edit,
    Import,
    ReputationChange,
    Sweep,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Vote => "vote",
            EventKind::Comment => "comment",
            EventKind::Edit => "edit",
            EventKind::Import => "import",
            EventKind::ReputationChange => "reputation_change",
            EventKind::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RescoreEvent {
    pub kind: EventKind,
    pub term: Option<TermId>,
    pub user: Option<UserId>,
    pub enqueued_at: Timestamp,
    pub dedupe_key: String,
}

impl RescoreEvent {
    pub fn new(kind: EventKind, term: Option<TermId>, user: Option<UserId>, enqueued_at: Timestamp) -> Self {
        Self {
            kind,
            term,
            user,
            enqueued_at,
            dedupe_key: Self::dedupe_key_for(kind, term, user),
        }
    }

    pub fn dedupe_key_for(kind: EventKind, term: Option<TermId>, user: Option<UserId>) -> String {
        let term = term.map_or_else(|| "-".to_string(), |t| t.0.to_string());
        let user = user.map_or_else(|| "-".to_string(), |u| u.0.to_string());
        format!("{}/{term}/{user}", kind.as_str())
    }
}

/// True if `s` is a syntactically valid absolute IRI.
pub fn is_absolute_iri(s: &str) -> bool {
    oxiri::Iri::parse(s).is_ok()
}
