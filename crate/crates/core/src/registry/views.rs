use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Registry, State};
use crate::ark::{self, PersistenceStatement};
use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{SchemaId, TermId, UserId};
use crate::model::{
    Action, Comment, Direction, ExternalLink, Object, Predicate, SourceRecord, Status, Term, TermVersion, Triple,
};
use crate::notify::{Digest, Notification};
use crate::text;

const EXCERPT_CHARS: usize = 160;
const RECENT_ACTIVITY: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermRef {
    pub id: TermId,
    pub ark: String,
    pub label: String,
}

impl From<&Term> for TermRef {
    fn from(t: &Term) -> Self {
        Self {
            id: t.id,
            ark: t.ark.clone(),
            label: t.label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRef {
    pub id: UserId,
    pub handle: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSummary {
    pub id: TermId,
    pub ark: String,
    pub label: String,
    pub excerpt: String,
    pub status: Status,
    pub consensus_score: f64,
    pub stability_score: f64,
    pub applicability_score: f64,
    pub flagged: bool,
    pub up_votes: u64,
    pub down_votes: u64,
    pub contributor: UserId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrowseFilter {
    #[serde(default)]
    pub collection: Option<String>,
    #[serde(default)]
    pub schema: Option<SchemaId>,
    /// Label of a term the result must be linked to by a triple.
    #[serde(default)]
    pub subject: Option<String>,
    #[serde(default)]
    pub status: Option<Status>,
    /// Comment tag, without `#`.
    #[serde(default)]
    pub tag: Option<String>,
    #[serde(default)]
    pub contributor: Option<UserId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Page {
    /// 1-based.
    pub number: usize,
    pub size: usize,
}

impl Page {
    pub const MAX_SIZE: usize = 1000;

    pub fn new(number: usize, size: usize) -> Self {
        Self { number, size }
    }

    fn validate(&self) -> Result<()> {
        if self.number == 0 {
            return Err(Error::invalid("page numbers start at 1"));
        }
        if self.size == 0 || self.size > Self::MAX_SIZE {
            return Err(Error::invalid(format!("page size must be 1..={}", Self::MAX_SIZE)));
        }
        Ok(())
    }
}

impl Default for Page {
    fn default() -> Self {
        Self { number: 1, size: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrowsePage {
    pub page: usize,
    pub size: usize,
    pub total: usize,
    pub items: Vec<TermSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDetail {
    pub term: Term,
    pub triples: Vec<Triple>,
    pub comments: Vec<Comment>,
    pub up_votes: u64,
    pub down_votes: u64,
    pub versions: Vec<TermVersion>,
    pub persistence: PersistenceStatement,
    pub source: Option<SourceRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub id: UserId,
    pub handle: String,
    pub display_name: String,
    pub location: String,
    pub external_links: Vec<ExternalLink>,
    pub profile_complete: bool,
    pub reputation: f64,
    pub member_since: Timestamp,
    pub last_seen: Timestamp,
    pub followers: Vec<UserRef>,
    pub following: Vec<UserRef>,
    pub contributed: Vec<TermRef>,
    pub tracked: Vec<TermRef>,
    /// Terms contributed by users this user follows.
    pub followed_terms: Vec<TermRef>,
    /// Contributed terms that are currently deprecated.
    pub deprecated: Vec<TermRef>,
    pub recent_activity: Vec<Action>,
}

fn excerpt(s: &str) -> String {
    if s.chars().count() <= EXCERPT_CHARS {
        return s.to_string();
    }
    let cut: String = s.chars().take(EXCERPT_CHARS - 1).collect();
    format!("{}…", cut.trim_end())
}

impl State {
    pub(crate) fn tally(&self, term: TermId) -> (u64, u64) {
        self.votes.get(&term).map_or((0, 0), |votes| {
            votes.values().fold((0, 0), |(u, d), v| match v.direction {
                Direction::Up => (u + 1, d),
                Direction::Down => (u, d + 1),
            })
        })
    }

    fn summary(&self, t: &Term) -> TermSummary {
        let (up, down) = self.tally(t.id);
        TermSummary {
            id: t.id,
            ark: t.ark.clone(),
            label: t.label.clone(),
            excerpt: excerpt(&t.definition),
            status: t.status,
            consensus_score: t.consensus_score,
            stability_score: t.stability_score,
            applicability_score: t.applicability_score,
            flagged: t.flagged,
            up_votes: up,
            down_votes: down,
            contributor: t.contributor,
        }
    }

    fn user_ref(&self, id: UserId) -> Option<UserRef> {
        self.users.get(&id).map(|u| UserRef {
            id,
            handle: u.handle.clone(),
        })
    }

    fn term_refs(&self, ids: impl IntoIterator<Item = TermId>) -> Vec<TermRef> {
        ids.into_iter()
            .filter_map(|id| self.terms.get(&id))
            .map(TermRef::from)
            .collect()
    }

    /// Terms related by a triple to a term labelled `label`.
    fn linked_to_label(&self, label: &str) -> BTreeSet<TermId> {
        let label = label.to_lowercase();
        let anchors: BTreeSet<TermId> = self
            .terms
            .values()
            .filter(|t| t.label.to_lowercase() == label)
            .map(|t| t.id)
            .collect();
        let mut out = BTreeSet::new();
        for tr in &self.triples {
            let pred = match tr.predicate {
                Predicate::Term(p) => Some(p),
                Predicate::Iri(_) => None,
            };
            let obj = match tr.object {
                Object::Term(o) => Some(o),
                Object::Literal(_) => None,
            };
            if pred.is_some_and(|p| anchors.contains(&p)) || obj.is_some_and(|o| anchors.contains(&o)) {
                out.insert(tr.subject);
            }
            if anchors.contains(&tr.subject) {
                out.extend(obj);
            }
        }
        out
    }

    pub(crate) fn filter_terms(&self, filter: &BrowseFilter) -> Vec<&Term> {
        let linked = filter.subject.as_deref().map(|s| self.linked_to_label(s));
        let tagged: Option<BTreeSet<TermId>> = filter.tag.as_deref().map(|tag| {
            let tag = tag.trim_start_matches('#').to_lowercase();
            self.comments
                .values()
                .filter(|c| c.tags.contains(&tag))
                .map(|c| c.term)
                .collect()
        });
        self.terms
            .values()
            .filter(|t| {
                filter
                    .collection
                    .as_ref()
                    .is_none_or(|c| t.collection.as_ref() == Some(c))
            })
            .filter(|t| filter.schema.is_none_or(|s| t.schema == Some(s)))
            .filter(|t| filter.status.is_none_or(|s| t.status == s))
            .filter(|t| filter.contributor.is_none_or(|c| t.contributor == c))
            .filter(|t| linked.as_ref().is_none_or(|l| l.contains(&t.id)))
            .filter(|t| tagged.as_ref().is_none_or(|g| g.contains(&t.id)))
            .collect()
    }
}

impl Registry {
    /// Terms matching every set filter field, consensus descending, then
    /// label, then id.
    pub fn browse(&self, filter: &BrowseFilter, page: Page) -> Result<BrowsePage> {
        page.validate()?;
        let st = self.state.read();
        let mut hits = st.filter_terms(filter);
        hits.sort_by(|a, b| {
            b.consensus_score
                .total_cmp(&a.consensus_score)
                .then_with(|| a.label.cmp(&b.label))
                .then_with(|| a.id.cmp(&b.id))
        });
        let total = hits.len();
        let items = hits
            .into_iter()
            .skip((page.number - 1).saturating_mul(page.size))
            .take(page.size)
            .map(|t| st.summary(t))
            .collect();
        Ok(BrowsePage {
            page: page.number,
            size: page.size,
            total,
            items,
        })
    }

    /// Full record for display. Counts as an interaction and schedules an
    /// audit of the term's source; the returned audit state is the last one
    /// recorded.
    pub fn term_detail(&self, id: TermId) -> Result<TermDetail> {
        let now = self.now();
        let mut st = self.state.write();
        st.term(id)?;
        st.interact(id, now, &self.config.thresholds);
        let term = st.term(id)?.clone();
        if let Some(src) = term.source {
            st.pending_audits.insert(src);
        }
        let (up, down) = st.tally(id);
        Ok(TermDetail {
            triples: st.triples.iter().filter(|t| t.mentions(id)).cloned().collect(),
            comments: st.comments.values().filter(|c| c.term == id).cloned().collect(),
            up_votes: up,
            down_votes: down,
            versions: st.versions.get(&id).cloned().unwrap_or_default(),
            persistence: ark::term_statement(&term),
            source: term.source.and_then(|s| st.sources.get(&s).cloned()),
            term,
        })
    }

    pub fn profile(&self, id: UserId) -> Result<Profile> {
        let st = self.state.read();
        let u = st.user(id)?;
        let contributed: Vec<TermId> = st
            .terms
            .values()
            .filter(|t| t.contributor == id)
            .map(|t| t.id)
            .collect();
        let followed_terms = st
            .terms
            .values()
            .filter(|t| u.following.contains(&t.contributor))
            .map(|t| t.id);
        let deprecated = contributed
            .iter()
            .copied()
            .filter(|t| st.terms[t].status == Status::Deprecated);
        Ok(Profile {
            id,
            handle: u.handle.clone(),
            display_name: u.display_name.clone(),
            location: u.location.clone(),
            external_links: u.external_links.clone(),
            profile_complete: u.profile_complete(),
            reputation: u.reputation,
            member_since: u.member_since,
            last_seen: u.last_seen,
            followers: u.followers.iter().filter_map(|f| st.user_ref(*f)).collect(),
            following: u.following.iter().filter_map(|f| st.user_ref(*f)).collect(),
            deprecated: st.term_refs(deprecated),
            contributed: st.term_refs(contributed.iter().copied()),
            tracked: st.term_refs(u.tracked.iter().copied()),
            followed_terms: st.term_refs(followed_terms),
            recent_activity: u.action_log.iter().rev().take(RECENT_ACTIVITY).copied().collect(),
        })
    }

    /// Distinct words over the term's definition, its comments, and the
    /// labels of related terms.
    pub fn lexemes(&self, id: TermId) -> Result<BTreeSet<String>> {
        let st = self.state.read();
        let term = st.term(id)?;
        let mut texts: Vec<&str> = vec![term.definition.as_str()];
        texts.extend(st.comments.values().filter(|c| c.term == id).map(|c| c.body.as_str()));
        texts.extend(
            st.neighbours(id)
                .into_iter()
                .filter_map(|n| st.terms.get(&n))
                .map(|t| t.label.as_str()),
        );
        Ok(text::lexemes(texts, &self.config.stopwords))
    }

    pub fn suggest_tags(&self, prefix: &str, limit: usize) -> Vec<(String, usize)> {
        let st = self.state.read();
        text::suggest(
            st.comments.values().flat_map(|c| c.tags.iter().map(String::as_str)),
            prefix,
            limit,
        )
    }

    /// Undelivered notifications plus those created within the feed window,
    /// oldest first.
    pub fn notifications_feed(&self, user: UserId) -> Result<Vec<Notification>> {
        let now = self.now();
        let st = self.state.read();
        st.user(user)?;
        let window = chrono::Duration::days(self.config.feed_window_days);
        Ok(st
            .notifications
            .iter()
            .filter(|n| n.recipient == user && (!n.delivered || now - n.created_at <= window))
            .cloned()
            .collect())
    }

    /// Bundles every undelivered notification for `user`, marks them
    /// delivered, and appends the digest to the outbox.
    pub fn generate_digest(&self, user: UserId) -> Result<Digest> {
        let now = self.now();
        let mut st = self.state.write();
        st.user(user)?;
        let digest = Digest {
            recipient: user,
            generated_at: now,
            notifications: st
                .notifications
                .iter()
                .filter(|n| n.recipient == user && !n.delivered)
                .cloned()
                .collect(),
        };
        if digest.is_empty() {
            return Ok(digest);
        }
        self.outbox.append(&digest.render())?;
        for n in st.notifications.iter_mut().filter(|n| n.recipient == user) {
            n.delivered = true;
        }
        Ok(digest)
    }

    /// Digests for every user who asked for them; empty ones are skipped.
    pub fn generate_due_digests(&self) -> Result<Vec<Digest>> {
        let recipients: Vec<UserId> = {
            let st = self.state.read();
            st.users
                .values()
                .filter(|u| u.email_preference == crate::model::EmailPreference::Digest)
                .map(|u| u.id)
                .collect()
        };
        let mut out = Vec::new();
        for r in recipients {
            let d = self.generate_digest(r)?;
            if !d.is_empty() {
                out.push(d);
            }
        }
        Ok(out)
    }
}
