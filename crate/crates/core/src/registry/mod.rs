//! The registry: all state plus every mutating operation.
//!
//! State sits behind one `RwLock`. Writers take the lock for the whole
//! operation, so mutations on any term are serialized and version chains
//! never interleave; readers run concurrently. Every mutation enqueues its
//! rescore event before releasing the lock.

mod arks;
mod export;
mod imports;
mod rescore;
mod surveys;
mod terms;
mod views;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration as StdDuration;

use argon2::password_hash::rand_core::OsRng;
use argon2::password_hash::{PasswordHash, PasswordHasher, PasswordVerifier, SaltString};
use argon2::Argon2;
use chrono::Duration;
use parking_lot::{Mutex, RwLock};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::ark::{ArkConfig, ArkRegistry};
use crate::clock::{days_between, Clock, Timestamp};
use crate::consensus::{self, ActivitySnapshot, Thresholds};
use crate::error::{Error, Result};
use crate::ids::{CommentId, NotificationId, SchemaId, SourceId, SurveyId, TermId, UserId};
use crate::model::{
    Action, ActionKind, Collection, Comment, EmailPreference, EventKind, ExternalLink, ModeratorAssignment,
    RescoreEvent, Schema, SourceRecord, Term, TermVersion, Triple, User, Vote,
};
use crate::notify::{Channel, Notification, NotificationKind, Outbox, Subject};
use crate::queue::RescoreQueue;
use crate::text::{Stopwords, DEFAULT_STOPWORDS};

pub use arks::{Inflection, InflectionBody, Resolved};
pub use export::{write_rdf_xml, write_turtle, ExportFormat, ExportRequest};
pub use imports::{RecordImport, SchemaImport, SweepReport};
pub use rescore::RescoreOutcome;
pub use surveys::{Audience, Respondent, Survey, SurveyResponse, SurveyResults, TermSurveyResult};
pub use terms::{NewTerm, Revision};
pub use views::{BrowseFilter, BrowsePage, Page, Profile, TermDetail, TermRef, TermSummary, UserRef};

#[derive(Debug, Clone)]
pub struct AuditConfig {
    pub timeout: StdDuration,
    pub concurrency: usize,
    /// Minimum spacing between fetches started by one worker.
    pub min_interval: StdDuration,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            timeout: StdDuration::from_secs(10),
            concurrency: 4,
            min_interval: StdDuration::ZERO,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegistryConfig {
    pub thresholds: Thresholds,
    pub ark: ArkConfig,
    /// Prefix of term IRIs: a term's IRI is `{base_url}/{ark}`.
    pub base_url: String,
    pub session_ttl: Duration,
    pub stopwords: Stopwords,
    pub outbox_path: Option<PathBuf>,
    pub store_path: Option<PathBuf>,
    pub audit: AuditConfig,
    /// How long delivered notifications stay in the feed.
    pub feed_window_days: i64,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            ark: ArkConfig::default(),
            base_url: "http://localhost:8080".into(),
            session_ttl: Duration::hours(12),
            stopwords: Stopwords::parse(DEFAULT_STOPWORDS),
            outbox_path: None,
            store_path: None,
            audit: AuditConfig::default(),
            feed_window_days: 30,
        }
    }
}

impl RegistryConfig {
    pub fn validate(&self) -> Result<()> {
        self.thresholds.validate()?;
        self.ark.validate()?;
        if !crate::model::is_absolute_iri(&self.base_url) {
            return Err(Error::Config(format!(
                "base_url `{}` is not an absolute IRI",
                self.base_url
            )));
        }
        if self.audit.concurrency == 0 {
            return Err(Error::Config("audit concurrency must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub(crate) struct Sequences {
    term: u64,
    user: u64,
    comment: u64,
    source: u64,
    schema: u64,
    survey: u64,
    notification: u64,
}

#[derive(Debug, Default)]
pub(crate) struct Indexes {
    handles: HashMap<String, UserId>,
    /// (contributor, lowercase label)
    term_keys: HashMap<(UserId, String), TermId>,
    /// schema element IRI -> term
    iris: HashMap<String, TermId>,
    /// (lowercase label, element IRI) -> object term
    object_keys: HashMap<(String, String), TermId>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct State {
    seq: Sequences,
    users: BTreeMap<UserId, User>,
    terms: BTreeMap<TermId, Term>,
    triples: BTreeSet<Triple>,
    votes: BTreeMap<TermId, BTreeMap<UserId, Vote>>,
    comments: BTreeMap<CommentId, Comment>,
    versions: BTreeMap<TermId, Vec<TermVersion>>,
    sources: BTreeMap<SourceId, SourceRecord>,
    schemas: BTreeMap<SchemaId, Schema>,
    collections: BTreeMap<String, Collection>,
    moderators: Vec<ModeratorAssignment>,
    notifications: Vec<Notification>,
    surveys: BTreeMap<SurveyId, Survey>,
    arks: ArkRegistry,
    queue: RescoreQueue,
    pending_audits: BTreeSet<SourceId>,
    /// Index-keyed object terms, persisted because the key is not
    /// recoverable from the term alone.
    object_keys: Vec<(String, String, TermId)>,
    #[serde(skip)]
    idx: Indexes,
}

impl State {
    fn new(ark: ArkConfig) -> Self {
        Self {
            seq: Sequences::default(),
            users: BTreeMap::new(),
            terms: BTreeMap::new(),
            triples: BTreeSet::new(),
            votes: BTreeMap::new(),
            comments: BTreeMap::new(),
            versions: BTreeMap::new(),
            sources: BTreeMap::new(),
            schemas: BTreeMap::new(),
            collections: BTreeMap::new(),
            moderators: Vec::new(),
            notifications: Vec::new(),
            surveys: BTreeMap::new(),
            arks: ArkRegistry::new(ark),
            queue: RescoreQueue::new(),
            pending_audits: BTreeSet::new(),
            object_keys: Vec::new(),
            idx: Indexes::default(),
        }
    }

    fn rebuild_indexes(&mut self) {
        self.queue.reindex();
        let mut idx = Indexes::default();
        for u in self.users.values() {
            idx.handles.insert(u.handle.to_lowercase(), u.id);
        }
        for t in self.terms.values() {
            idx.term_keys.insert((t.contributor, t.label.to_lowercase()), t.id);
            if let Some(iri) = &t.iri {
                idx.iris.insert(iri.clone(), t.id);
            }
        }
        for (label, element, term) in &self.object_keys {
            idx.object_keys.insert((label.clone(), element.clone()), *term);
        }
        self.idx = idx;
    }

    fn user(&self, id: UserId) -> Result<&User> {
        self.users.get(&id).ok_or_else(|| Error::not_found(id))
    }

    fn user_mut(&mut self, id: UserId) -> Result<&mut User> {
        self.users.get_mut(&id).ok_or_else(|| Error::not_found(id))
    }

    fn term(&self, id: TermId) -> Result<&Term> {
        self.terms.get(&id).ok_or_else(|| Error::not_found(id))
    }

    fn term_mut(&mut self, id: TermId) -> Result<&mut Term> {
        self.terms.get_mut(&id).ok_or_else(|| Error::not_found(id))
    }

    fn log_action(&mut self, user: UserId, kind: ActionKind, now: Timestamp) {
        if let Some(u) = self.users.get_mut(&user) {
            u.action_log.push(Action { kind, at: now });
            u.last_seen = now;
        }
    }

    fn enqueue(&mut self, kind: EventKind, term: Option<TermId>, user: Option<UserId>, now: Timestamp) {
        self.queue.enqueue(RescoreEvent::new(kind, term, user, now));
    }

    fn activity_snapshot(&self, user: &User, now: Timestamp, window_days: f64) -> ActivitySnapshot {
        ActivitySnapshot {
            profile_complete: user.profile_complete(),
            followers: user.followers.len(),
            recent_actions: user
                .action_log
                .iter()
                .filter(|a| days_between(a.at, now) <= window_days)
                .count(),
        }
    }

    /// Recomputes and caches one user's reputation; returns true if it moved.
    fn refresh_reputation(&mut self, id: UserId, now: Timestamp, th: &Thresholds) -> bool {
        let Some(user) = self.users.get(&id) else {
            return false;
        };
        let snapshot = self.activity_snapshot(user, now, th.reputation.activity_window_days);
        let rep = consensus::reputation(&snapshot, &th.reputation);
        let user = self.users.get_mut(&id).expect("checked above");
        let changed = user.reputation != rep;
        user.reputation = rep;
        changed
    }

    fn trackers(&self, term: TermId) -> BTreeSet<UserId> {
        self.users
            .values()
            .filter(|u| u.tracked.contains(&term))
            .map(|u| u.id)
            .collect()
    }

    /// Terms one triple away from `term`.
    fn neighbours(&self, term: TermId) -> BTreeSet<TermId> {
        self.triples.iter().flat_map(|t| t.neighbours(term)).collect()
    }

    fn notify(
        &mut self,
        outbox: &Outbox,
        recipient: UserId,
        kind: NotificationKind,
        subject: Subject,
        now: Timestamp,
        force_channel: Option<Channel>,
    ) {
        let Some(user) = self.users.get(&recipient) else {
            return;
        };
        let channel = force_channel.unwrap_or(match user.email_preference {
            EmailPreference::None => Channel::InApp,
            EmailPreference::Digest => Channel::DigestOutbox,
            EmailPreference::Immediate => Channel::ImmediateOutbox,
        });
        self.seq.notification += 1;
        let mut n = Notification {
            id: NotificationId(self.seq.notification),
            recipient,
            kind,
            subject,
            created_at: now,
            delivered: false,
            channel,
        };
        if channel == Channel::ImmediateOutbox {
            match outbox.append(&n.outbox_line()) {
                Ok(()) => n.delivered = true,
                Err(e) => tracing::warn!(error = %e, "outbox append failed; left for digest"),
            }
        }
        self.notifications.push(n);
    }

    fn notify_all(
        &mut self,
        outbox: &Outbox,
        recipients: impl IntoIterator<Item = UserId>,
        kind: NotificationKind,
        subject: Subject,
        now: Timestamp,
    ) {
        for r in recipients {
            self.notify(outbox, r, kind, subject, now, None);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub user: UserId,
    pub expires_at: Timestamp,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NewUser {
    pub handle: String,
    /// Accounts without a secret exist (seeded or imported) but cannot log in.
    pub secret: Option<String>,
    pub display_name: String,
    pub location: String,
    pub external_links: Vec<ExternalLink>,
    pub is_admin: bool,
}

impl NewUser {
    pub fn new(handle: impl Into<String>) -> Self {
        Self {
            handle: handle.into(),
            ..Self::default()
        }
    }

    pub fn with_secret(mut self, secret: impl Into<String>) -> Self {
        self.secret = Some(secret.into());
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProfileUpdate {
    pub display_name: Option<String>,
    pub location: Option<String>,
    pub external_links: Option<Vec<ExternalLink>>,
    pub email_preference: Option<EmailPreference>,
    pub threshold_bands: Option<Vec<f64>>,
}

pub struct Registry {
    state: RwLock<State>,
    config: RegistryConfig,
    clock: Arc<dyn Clock>,
    outbox: Outbox,
    sessions: Mutex<HashMap<String, Session>>,
    /// Held while draining the rescore queue: there is one consumer.
    consumer: Mutex<()>,
}

impl Registry {
    pub fn new(config: RegistryConfig, clock: Arc<dyn Clock>) -> Result<Self> {
        config.validate()?;
        let state = State::new(config.ark.clone());
        Ok(Self::assemble(state, config, clock))
    }

    /// Opens the store at `config.store_path`, creating an empty registry
    /// if the file does not exist yet.
    pub fn open(config: RegistryConfig, clock: Arc<dyn Clock>) -> Result<Self> {
        config.validate()?;
        let state = match &config.store_path {
            Some(path) if path.exists() => {
                let bytes = std::fs::read(path)?;
                let mut state: State =
                    serde_json::from_slice(&bytes).map_err(|e| Error::Storage(format!("{}: {e}", path.display())))?;
                if state.arks.config() != &config.ark {
                    return Err(Error::Config(
                        "ARK namespace or shoulders differ from the ones the store was minted with".into(),
                    ));
                }
                state.rebuild_indexes();
                state
            }
            _ => State::new(config.ark.clone()),
        };
        Ok(Self::assemble(state, config, clock))
    }

    fn assemble(state: State, config: RegistryConfig, clock: Arc<dyn Clock>) -> Self {
        let outbox = Outbox::new(config.outbox_path.clone());
        Self {
            state: RwLock::new(state),
            config,
            clock,
            outbox,
            sessions: Mutex::new(HashMap::new()),
            consumer: Mutex::new(()),
        }
    }

    /// Writes the whole state atomically to the store path, if one is set.
    pub fn save(&self) -> Result<()> {
        let Some(path) = &self.config.store_path else {
            return Ok(());
        };
        let bytes = {
            let state = self.state.read();
            serde_json::to_vec(&*state).map_err(|e| Error::Storage(e.to_string()))?
        };
        write_atomically(path, &bytes)
    }

    pub fn config(&self) -> &RegistryConfig {
        &self.config
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.config.thresholds
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    pub fn outbox(&self) -> &Outbox {
        &self.outbox
    }

    /// `{base_url}/{ark}`
    pub fn ark_url(&self, ark: &str) -> String {
        format!("{}/{}", self.config.base_url.trim_end_matches('/'), ark)
    }

    pub fn register_user(&self, new: NewUser) -> Result<User> {
        let handle = new.handle.trim().to_string();
        if handle.is_empty() || handle.chars().any(char::is_whitespace) {
            return Err(Error::invalid("handle must be a non-empty word"));
        }
        let secret_hash = match &new.secret {
            Some(s) if s.is_empty() => return Err(Error::invalid("secret must not be empty")),
            Some(s) => hash_secret(s)?,
            None => String::new(),
        };
        let now = self.now();
        let mut st = self.state.write();
        if st.idx.handles.contains_key(&handle.to_lowercase()) {
            return Err(Error::Conflict(format!("handle `{handle}` is taken")));
        }
        st.seq.user += 1;
        let id = UserId(st.seq.user);
        let mut user = User {
            id,
            handle: handle.clone(),
            display_name: new.display_name,
            location: new.location,
            external_links: new.external_links,
            followers: BTreeSet::new(),
            following: BTreeSet::new(),
            tracked: BTreeSet::new(),
            member_since: now,
            last_seen: now,
            action_log: Vec::new(),
            reputation: 1.0,
            is_admin: new.is_admin,
            email_preference: EmailPreference::None,
            threshold_bands: vec![
                self.config.thresholds.deprecate_threshold,
                self.config.thresholds.canonical_threshold,
            ],
            secret_hash,
        };
        let snapshot = st.activity_snapshot(&user, now, self.config.thresholds.reputation.activity_window_days);
        user.reputation = consensus::reputation(&snapshot, &self.config.thresholds.reputation);
        st.idx.handles.insert(handle.to_lowercase(), id);
        st.users.insert(id, user.clone());
        Ok(user)
    }

    pub fn update_profile(&self, user: UserId, update: ProfileUpdate) -> Result<User> {
        let now = self.now();
        let mut st = self.state.write();
        let u = st.user_mut(user)?;
        if let Some(bands) = &update.threshold_bands {
            if bands.iter().any(|b| !(0.0..=1.0).contains(b)) {
                return Err(Error::invalid("threshold bands must lie in [0, 1]"));
            }
        }
        if let Some(links) = &update.external_links {
            if let Some(bad) = links.iter().find(|l| !crate::model::is_absolute_iri(&l.url)) {
                return Err(Error::invalid(format!("`{}` is not an absolute URL", bad.url)));
            }
        }
        if let Some(v) = update.display_name {
            u.display_name = v;
        }
        if let Some(v) = update.location {
            u.location = v;
        }
        if let Some(v) = update.external_links {
            u.external_links = v;
        }
        if let Some(v) = update.email_preference {
            u.email_preference = v;
        }
        if let Some(v) = update.threshold_bands {
            u.threshold_bands = v;
        }
        u.last_seen = now;
        let out = u.clone();
        st.enqueue(EventKind::ReputationChange, None, Some(user), now);
        Ok(out)
    }

    pub fn user(&self, id: UserId) -> Result<User> {
        self.state.read().user(id).cloned()
    }

    pub fn user_by_handle(&self, handle: &str) -> Result<User> {
        let st = self.state.read();
        let id = st
            .idx
            .handles
            .get(&handle.to_lowercase())
            .copied()
            .ok_or_else(|| Error::not_found(format!("user `{handle}`")))?;
        st.user(id).cloned()
    }

    pub fn user_count(&self) -> usize {
        self.state.read().users.len()
    }

    pub fn authenticate(&self, handle: &str, secret: &str) -> Result<(String, Session)> {
        let now = self.now();
        let (id, hash) = {
            let st = self.state.read();
            let id = st
                .idx
                .handles
                .get(&handle.to_lowercase())
                .copied()
                .ok_or(Error::Authentication)?;
            (id, st.user(id)?.secret_hash.clone())
        };
        if hash.is_empty() || !verify_secret(secret, &hash) {
            return Err(Error::Authentication);
        }
        self.state.write().log_action(id, ActionKind::Login, now);
        let mut raw = [0u8; 32];
        rand::thread_rng().fill_bytes(&mut raw);
        let token = hex::encode(raw);
        let session = Session {
            user: id,
            expires_at: now + self.config.session_ttl,
        };
        self.sessions.lock().insert(token.clone(), session);
        Ok((token, session))
    }

    /// Resolves a bearer token to its user. Unknown tokens and expired
    /// tokens fail with different errors.
    pub fn validate_token(&self, token: &str) -> Result<UserId> {
        let now = self.now();
        let mut sessions = self.sessions.lock();
        let session = *sessions.get(token).ok_or(Error::Authentication)?;
        if now >= session.expires_at {
            sessions.remove(token);
            return Err(Error::TokenExpired);
        }
        Ok(session.user)
    }

    pub fn follow_user(&self, follower: UserId, followee: UserId) -> Result<bool> {
        if follower == followee {
            return Err(Error::invalid("users cannot follow themselves"));
        }
        let now = self.now();
        let mut st = self.state.write();
        st.user(follower)?;
        st.user(followee)?;
        if !st.user_mut(follower)?.following.insert(followee) {
            return Ok(false);
        }
        st.user_mut(followee)?.followers.insert(follower);
        st.log_action(follower, ActionKind::Follow, now);
        st.enqueue(EventKind::ReputationChange, None, Some(followee), now);
        Ok(true)
    }

    pub fn track_term(&self, user: UserId, term: TermId) -> Result<bool> {
        let now = self.now();
        let mut st = self.state.write();
        st.term(term)?;
        if !st.user_mut(user)?.tracked.insert(term) {
            return Ok(false);
        }
        st.log_action(user, ActionKind::Track, now);
        Ok(true)
    }

    pub fn queue_len(&self) -> usize {
        self.state.read().queue.len()
    }

    pub fn pending_events(&self) -> Vec<RescoreEvent> {
        self.state.read().queue.iter().cloned().collect()
    }
}

fn argon() -> Argon2<'static> {
    let params = argon2::Params::new(8 * 1024, 2, 1, None).expect("static params are valid");
    Argon2::new(argon2::Algorithm::Argon2id, argon2::Version::V0x13, params)
}

fn hash_secret(secret: &str) -> Result<String> {
    let salt = SaltString::generate(&mut OsRng);
    argon()
        .hash_password(secret.as_bytes(), &salt)
        .map(|h| h.to_string())
        .map_err(|e| Error::Storage(format!("hashing secret: {e}")))
}

fn verify_secret(secret: &str, stored: &str) -> bool {
    PasswordHash::new(stored)
        .map(|h| argon().verify_password(secret.as_bytes(), &h).is_ok())
        .unwrap_or(false)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}
