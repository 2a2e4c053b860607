use serde::{Deserialize, Serialize};

use super::{Registry, State};
use crate::ark::Target;
use crate::clock::Timestamp;
use crate::consensus::{self, Thresholds};
use crate::error::{Error, Result};
use crate::ids::{CommentId, SchemaId, SourceId, TermId, UserId};
use crate::model::{
    is_absolute_iri, ActionKind, Comment, Direction, EventKind, ExampleTriple, ModeratorAssignment, Object, Predicate,
    Rights, Status, Term, TermGroup, TermVersion, Triple, Vote,
};
use crate::notify::{Channel, NotificationKind, Outbox, Subject};
use crate::text::extract_tags;

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewTerm {
    pub label: String,
    pub definition: String,
    #[serde(default)]
    pub examples: Vec<ExampleTriple>,
}

impl NewTerm {
    pub fn new(label: impl Into<String>, definition: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            definition: definition.into(),
            examples: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub definition: Option<String>,
    #[serde(default)]
    pub change_note: String,
}

/// Everything needed to create a term row; shared by manual entry and
/// imports.
pub(crate) struct TermSeed {
    pub label: String,
    pub definition: String,
    pub contributor: UserId,
    pub source: Option<SourceId>,
    pub iri: Option<String>,
    pub schema: Option<SchemaId>,
    pub collection: Option<String>,
    pub rights: Rights,
    pub stability: f64,
    pub change_note: String,
    /// Manual proposals may not reuse one of the contributor's labels.
    pub unique_label: bool,
}

impl State {
    pub(crate) fn insert_term(&mut self, seed: TermSeed, now: Timestamp) -> Result<TermId> {
        let key = (seed.contributor, seed.label.to_lowercase());
        if seed.unique_label && self.idx.term_keys.contains_key(&key) {
            return Err(Error::Conflict(format!(
                "{} already contributed a term labelled `{}`",
                seed.contributor, seed.label
            )));
        }
        self.seq.term += 1;
        let id = TermId(self.seq.term);
        let ark = self.arks.mint(Target::Term(id), now)?.ark;
        let term = Term {
            id,
            ark,
            label: seed.label.clone(),
            definition: seed.definition.clone(),
            examples: Vec::new(),
            status: Status::Vernacular,
            contributor: seed.contributor,
            custodian: seed.contributor,
            source: seed.source,
            iri: seed.iri.clone(),
            schema: seed.schema,
            collection: seed.collection,
            rights: seed.rights,
            consensus_score: 0.5,
            stability_score: seed.stability,
            applicability_score: 1.0,
            flagged: false,
            created: now,
            modified: now,
            last_interaction: now,
            stability_as_of: now,
            applicability_as_of: now,
            current_version: 1,
        };
        self.versions.insert(
            id,
            vec![TermVersion {
                term: id,
                version: 1,
                label: seed.label,
                definition: seed.definition,
                change_note: seed.change_note,
                created_at: now,
                replaces: None,
                replaced_by: None,
            }],
        );
        self.idx.term_keys.entry(key).or_insert(id);
        if let Some(iri) = seed.iri {
            self.idx.iris.insert(iri, id);
        }
        self.terms.insert(id, term);
        Ok(id)
    }

    pub(crate) fn check_triple(&self, triple: &Triple) -> Result<()> {
        self.term(triple.subject)?;
        match &triple.predicate {
            Predicate::Term(p) => {
                self.term(*p)?;
            }
            Predicate::Iri(iri) if !is_absolute_iri(iri) => {
                return Err(Error::invalid(format!("predicate `{iri}` is not an absolute IRI")));
            }
            Predicate::Iri(_) => {}
        }
        if let Object::Term(o) = &triple.object {
            self.term(*o)?;
        }
        Ok(())
    }

    /// Decays applicability up to `now`, then adds the interaction bonus.
    pub(crate) fn interact(&mut self, id: TermId, now: Timestamp, th: &Thresholds) {
        if let Some(t) = self.terms.get_mut(&id) {
            let days = crate::clock::days_between(t.applicability_as_of, now);
            let decayed = consensus::applicability_decay(t.applicability_score, days, th);
            t.applicability_score = consensus::applicability_interaction(decayed, th);
            t.applicability_as_of = t.applicability_as_of.max(now);
            t.last_interaction = now;
        }
    }

    /// The one place a term's status is written.
    pub(crate) fn apply_classification(
        &mut self,
        id: TermId,
        consensus_score: f64,
        stability: f64,
        th: &Thresholds,
        now: Timestamp,
        outbox: &Outbox,
    ) -> Result<Status> {
        for (name, x) in [("consensus", consensus_score), ("stability", stability)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::invalid(format!("{name} score {x} outside [0, 1]")));
            }
        }
        let next = consensus::classify(consensus_score, stability, th);
        let term = self.term_mut(id)?;
        term.consensus_score = consensus_score;
        term.stability_score = stability;
        let previous = term.status;
        if previous == next {
            return Ok(next);
        }
        term.status = next;
        let contributor = term.contributor;
        let mut recipients = self.trackers(id);
        recipients.insert(contributor);
        self.notify_all(
            outbox,
            recipients,
            NotificationKind::StatusChange,
            Subject::Term(id),
            now,
        );
        if next == Status::Deprecated {
            self.notify(
                outbox,
                contributor,
                NotificationKind::DeprecationNotice,
                Subject::Term(id),
                now,
                Some(Channel::ImmediateOutbox),
            );
        }
        Ok(next)
    }
}

fn non_empty(field: &str, value: &str) -> Result<String> {
    let v = value.trim();
    if v.is_empty() {
        Err(Error::invalid(format!("{field} must not be empty")))
    } else {
        Ok(v.to_string())
    }
}

impl Registry {
    pub fn propose_term(&self, contributor: UserId, new: NewTerm) -> Result<Term> {
        let label = non_empty("label", &new.label)?;
        let definition = non_empty("definition", &new.definition)?;
        let now = self.now();
        let mut st = self.state.write();
        st.user(contributor)?;
        // validate examples against a placeholder subject before creating anything
        for ex in &new.examples {
            let probe = Triple {
                subject: TermId(0),
                predicate: ex.predicate.clone(),
                object: ex.object.clone(),
            };
            if let Predicate::Term(p) = &probe.predicate {
                st.term(*p)?;
            }
            if let Predicate::Iri(iri) = &probe.predicate {
                if !is_absolute_iri(iri) {
                    return Err(Error::invalid(format!("predicate `{iri}` is not an absolute IRI")));
                }
            }
            if let Object::Term(o) = &probe.object {
                st.term(*o)?;
            }
        }
        let id = st.insert_term(
            TermSeed {
                label,
                definition,
                contributor,
                source: None,
                iri: None,
                schema: None,
                collection: None,
                rights: Rights::Cc0,
                stability: 0.0,
                change_note: "initial version".into(),
                unique_label: true,
            },
            now,
        )?;
        let examples: Vec<Triple> = new
            .examples
            .into_iter()
            .map(|ex| Triple {
                subject: id,
                predicate: ex.predicate,
                object: ex.object,
            })
            .collect();
        st.triples.extend(examples.iter().cloned());
        let term = st.term_mut(id)?;
        term.consensus_score = self.config.thresholds.no_vote_default;
        term.examples = examples;
        let term = term.clone();
        st.log_action(contributor, ActionKind::Propose, now);
        st.enqueue(EventKind::Edit, Some(id), Some(contributor), now);
        Ok(term)
    }

    pub fn revise_term(&self, editor: UserId, id: TermId, rev: Revision) -> Result<TermVersion> {
        let now = self.now();
        let mut st = self.state.write();
        let is_admin = st.user(editor)?.is_admin;
        let term = st.term(id)?;
        if editor != term.contributor && editor != term.custodian && !is_admin {
            return Err(Error::denied(
                "only the contributor, the custodian, or an administrator may edit a term",
            ));
        }
        let label = match &rev.label {
            Some(l) => non_empty("label", l)?,
            None => term.label.clone(),
        };
        let definition = match &rev.definition {
            Some(d) => non_empty("definition", d)?,
            None => term.definition.clone(),
        };
        if label == term.label && definition == term.definition {
            return Err(Error::invalid("edit changes nothing"));
        }
        let contributor = term.contributor;
        let old_key = (contributor, term.label.to_lowercase());
        let new_key = (contributor, label.to_lowercase());
        if new_key != old_key && st.idx.term_keys.contains_key(&new_key) {
            return Err(Error::Conflict(format!(
                "{contributor} already has a term labelled `{label}`"
            )));
        }
        st.idx.term_keys.remove(&old_key);
        st.idx.term_keys.insert(new_key, id);

        let chain = st.versions.get_mut(&id).expect("every term has a version chain");
        let prior = chain.len() as u32;
        chain.last_mut().expect("chain starts at 1").replaced_by = Some(prior + 1);
        let version = TermVersion {
            term: id,
            version: prior + 1,
            label: label.clone(),
            definition: definition.clone(),
            change_note: rev.change_note.trim().to_string(),
            created_at: now,
            replaces: Some(prior),
            replaced_by: None,
        };
        chain.push(version.clone());

        let term = st.term_mut(id)?;
        term.label = label;
        term.definition = definition;
        term.current_version = prior + 1;
        term.modified = now;
        term.stability_score = 0.0;
        term.stability_as_of = now;
        st.interact(id, now, &self.config.thresholds);

        let mut recipients = st.trackers(id);
        for n in st.neighbours(id) {
            recipients.extend(st.trackers(n));
        }
        recipients.remove(&editor);
        st.notify_all(
            &self.outbox,
            recipients,
            NotificationKind::TermEdit,
            Subject::Term(id),
            now,
        );
        st.log_action(editor, ActionKind::Revise, now);
        st.enqueue(EventKind::Edit, Some(id), Some(editor), now);
        Ok(version)
    }

    /// Adds a relation; returns false if the exact triple already exists.
    pub fn add_triple(&self, user: UserId, triple: Triple) -> Result<bool> {
        let now = self.now();
        let mut st = self.state.write();
        st.user(user)?;
        st.check_triple(&triple)?;
        if !st.triples.insert(triple.clone()) {
            return Ok(false);
        }
        let mut recipients = st.trackers(triple.subject);
        if let Object::Term(o) = triple.object {
            recipients.extend(st.trackers(o));
        }
        recipients.remove(&user);
        st.notify_all(
            &self.outbox,
            recipients,
            NotificationKind::RelatedTermAdded,
            Subject::Term(triple.subject),
            now,
        );
        st.interact(triple.subject, now, &self.config.thresholds);
        st.log_action(user, ActionKind::Relate, now);
        st.enqueue(EventKind::Edit, Some(triple.subject), Some(user), now);
        Ok(true)
    }

    /// Upserts a vote. Re-sending the same direction changes nothing.
    pub fn record_vote(&self, user: UserId, term: TermId, direction: Direction) -> Result<Vote> {
        let now = self.now();
        let mut st = self.state.write();
        st.user(user)?;
        if st.term(term)?.contributor == user {
            return Err(Error::denied("contributors cannot vote on their own terms"));
        }
        let slot = st.votes.entry(term).or_default();
        if let Some(existing) = slot.get(&user) {
            if existing.direction == direction {
                return Ok(*existing);
            }
        }
        let vote = Vote {
            user,
            term,
            direction,
            cast_at: now,
        };
        slot.insert(user, vote);
        st.interact(term, now, &self.config.thresholds);
        st.log_action(user, ActionKind::Vote, now);
        st.enqueue(EventKind::Vote, Some(term), Some(user), now);
        Ok(vote)
    }

    pub fn votes(&self, term: TermId) -> Vec<Vote> {
        self.state
            .read()
            .votes
            .get(&term)
            .map(|m| m.values().copied().collect())
            .unwrap_or_default()
    }

    pub fn add_comment(&self, user: UserId, term: TermId, body: &str, is_review_request: bool) -> Result<Comment> {
        let body = non_empty("comment body", body)?;
        let now = self.now();
        let mut st = self.state.write();
        st.user(user)?;
        let contributor = st.term(term)?.contributor;
        st.seq.comment += 1;
        let comment = Comment {
            id: CommentId(st.seq.comment),
            user,
            term,
            tags: extract_tags(&body),
            body,
            posted_at: now,
            is_review_request,
        };
        st.comments.insert(comment.id, comment.clone());
        let mut trackers = st.trackers(term);
        trackers.remove(&user);
        st.notify_all(
            &self.outbox,
            trackers,
            NotificationKind::CommentPosted,
            Subject::Term(term),
            now,
        );
        if is_review_request && contributor != user {
            st.notify(
                &self.outbox,
                contributor,
                NotificationKind::ReviewRequest,
                Subject::Term(term),
                now,
                None,
            );
        }
        st.interact(term, now, &self.config.thresholds);
        st.log_action(user, ActionKind::Comment, now);
        st.enqueue(EventKind::Comment, Some(term), Some(user), now);
        Ok(comment)
    }

    pub fn comments(&self, term: TermId) -> Vec<Comment> {
        self.state
            .read()
            .comments
            .values()
            .filter(|c| c.term == term)
            .cloned()
            .collect()
    }

    /// Classifies a term from the given scores, persists the scores and the
    /// resulting status, and emits status-change notifications.
    pub fn apply_classification(&self, term: TermId, consensus: f64, stability: f64) -> Result<Status> {
        let now = self.now();
        self.state
            .write()
            .apply_classification(term, consensus, stability, &self.config.thresholds, now, &self.outbox)
    }

    pub fn assign_moderator(
        &self,
        custodian: UserId,
        moderator: UserId,
        group: TermGroup,
    ) -> Result<ModeratorAssignment> {
        let now = self.now();
        let mut st = self.state.write();
        st.user(custodian)?;
        st.user(moderator)?;
        let covered: Vec<&Term> = match &group {
            TermGroup::Terms(ids) => ids.iter().map(|id| st.term(*id)).collect::<Result<_>>()?,
            _ => st.terms.values().filter(|t| group.covers(t)).collect(),
        };
        if covered.is_empty() {
            return Err(Error::invalid("moderator group covers no terms"));
        }
        if let Some(t) = covered.iter().find(|t| t.custodian != custodian) {
            return Err(Error::denied(format!("{custodian} is not the custodian of {}", t.id)));
        }
        let assignment = ModeratorAssignment {
            custodian,
            moderator,
            term_group: group,
        };
        if !st.moderators.contains(&assignment) {
            st.moderators.push(assignment.clone());
        }
        st.enqueue(EventKind::ReputationChange, None, Some(moderator), now);
        Ok(assignment)
    }

    pub fn term(&self, id: TermId) -> Result<Term> {
        self.state.read().term(id).cloned()
    }

    pub fn term_count(&self) -> usize {
        self.state.read().terms.len()
    }

    pub fn term_ids(&self) -> Vec<TermId> {
        self.state.read().terms.keys().copied().collect()
    }

    pub fn versions(&self, id: TermId) -> Result<Vec<TermVersion>> {
        let st = self.state.read();
        st.term(id)?;
        Ok(st.versions.get(&id).cloned().unwrap_or_default())
    }

    pub fn triples(&self) -> Vec<Triple> {
        self.state.read().triples.iter().cloned().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::NewUser;
    use super::*;
    use crate::model::Literal;
    use crate::notify::NotificationKind;

    #[test]
    fn proposal_defaults() {
        let (reg, _) = registry();
        let chris = users(&reg, &["chris"])[0];
        let t = reg
            .propose_term(
                chris,
                NewTerm::new("Identifier", "An unambiguous reference to the resource"),
            )
            .unwrap();
        assert_eq!(t.status(), Status::Vernacular);
        assert_eq!(t.current_version, 1);
        assert_eq!(t.custodian, chris);
        assert_eq!(t.consensus_score(), 0.5);
        assert_eq!(t.stability_score(), 0.0);
        assert_eq!(t.applicability_score(), 1.0);
        assert_eq!(t.rights, Rights::Cc0);
        assert!(t.ark.starts_with("ark:/99999/y2"));
        let events = reg.pending_events();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].dedupe_key, format!("edit/{}/{}", t.id.0, chris.0));
    }

    #[test]
    fn proposal_preconditions() {
        let (reg, _) = registry();
        let chris = users(&reg, &["chris"])[0];
        assert_eq!(
            reg.propose_term(chris, NewTerm::new("", "def")).unwrap_err().code(),
            "validation_failed"
        );
        assert_eq!(
            reg.propose_term(chris, NewTerm::new("x", "  ")).unwrap_err().code(),
            "validation_failed"
        );
        assert_eq!(
            reg.propose_term(UserId(99), NewTerm::new("x", "y")).unwrap_err().code(),
            "not_found"
        );
        reg.propose_term(chris, NewTerm::new("Title", "A name")).unwrap();
        assert_eq!(
            reg.propose_term(chris, NewTerm::new("Title", "Another"))
                .unwrap_err()
                .code(),
            "conflict"
        );
    }

    #[test]
    fn examples_become_triples() {
        let (reg, _) = registry();
        let chris = users(&reg, &["chris"])[0];
        let title = reg.propose_term(chris, NewTerm::new("Title", "A name given")).unwrap();
        let mut new = NewTerm::new("Book title", "Title of a book");
        new.examples = vec![
            ExampleTriple {
                predicate: Predicate::Iri("http://www.w3.org/2004/02/skos/core#broader".into()),
                object: Object::Term(title.id),
            },
            ExampleTriple {
                predicate: Predicate::Term(title.id),
                object: Object::Literal(Literal::string("Moby Dick")),
            },
        ];
        let t = reg.propose_term(chris, new).unwrap();
        assert_eq!(t.examples.len(), 2);
        assert_eq!(reg.triples().len(), 2);

        let mut bad = NewTerm::new("Bad", "bad");
        bad.examples = vec![ExampleTriple {
            predicate: Predicate::Iri("not an iri".into()),
            object: Object::Term(title.id),
        }];
        assert_eq!(reg.propose_term(chris, bad).unwrap_err().code(), "validation_failed");
    }

    #[test]
    fn revision_chain() {
        let (reg, clock) = registry();
        let chris = users(&reg, &["chris"])[0];
        let t = reg.propose_term(chris, NewTerm::new("Identifier", "v1")).unwrap();
        clock.advance_days(1.0);
        let v2 = reg
            .revise_term(
                chris,
                t.id,
                Revision {
                    definition: Some("v2".into()),
                    change_note: "clarify".into(),
                    ..Revision::default()
                },
            )
            .unwrap();
        assert_eq!((v2.version, v2.replaces), (2, Some(1)));
        let v3 = reg
            .revise_term(
                chris,
                t.id,
                Revision {
                    definition: Some("v3".into()),
                    ..Revision::default()
                },
            )
            .unwrap();
        assert_eq!(v3.version, 3);
        let chain = reg.versions(t.id).unwrap();
        assert_eq!(chain.iter().map(|v| v.version).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(chain[0].replaced_by, Some(2));
        assert_eq!(chain[1].replaced_by, Some(3));
        let term = reg.term(t.id).unwrap();
        assert_eq!(term.current_version, 3);
        assert!(term.modified > term.created);
        // walking replaces from the current version reaches 1 in current-1 steps
        let mut steps = 0;
        let mut at = chain.last().unwrap();
        while let Some(prev) = at.replaces {
            at = &chain[prev as usize - 1];
            steps += 1;
        }
        assert_eq!((at.version, steps), (1, 2));
    }

    #[test]
    fn noop_revision_rejected() {
        let (reg, _) = registry();
        let chris = users(&reg, &["chris"])[0];
        let t = reg.propose_term(chris, NewTerm::new("Identifier", "v1")).unwrap();
        let err = reg
            .revise_term(
                chris,
                t.id,
                Revision {
                    definition: Some("v1".into()),
                    ..Revision::default()
                },
            )
            .unwrap_err();
        assert_eq!(err.code(), "validation_failed");
    }

    #[test]
    fn revision_permission_table() {
        let (reg, _) = registry();
        let ids = users(&reg, &["contrib", "stranger", "moderator"]);
        let admin = reg
            .register_user(NewUser {
                is_admin: true,
                ..NewUser::new("admin")
            })
            .unwrap()
            .id;
        let t = reg.propose_term(ids[0], NewTerm::new("Identifier", "v1")).unwrap();
        reg.assign_moderator(ids[0], ids[2], TermGroup::Terms([t.id].into()))
            .unwrap();
        let edit = |who: UserId, def: &str| {
            reg.revise_term(
                who,
                t.id,
                Revision {
                    definition: Some(def.into()),
                    ..Revision::default()
                },
            )
        };
        // (editor, allowed)
        let table = [(ids[0], true), (ids[1], false), (ids[2], false), (admin, true)];
        for (i, (who, allowed)) in table.into_iter().enumerate() {
            let result = edit(who, &format!("def {i}"));
            assert_eq!(result.is_ok(), allowed, "editor {who}");
            if !allowed {
                assert_eq!(result.unwrap_err().code(), "permission_denied");
            }
        }
    }

    #[test]
    fn vote_upsert_and_self_vote() {
        let (reg, _) = registry();
        let ids = users(&reg, &["chris", "bob", "ann", "dan"]);
        let t = reg.propose_term(ids[0], NewTerm::new("Identifier", "v1")).unwrap();
        reg.record_vote(ids[1], t.id, Direction::Up).unwrap();
        reg.record_vote(ids[1], t.id, Direction::Down).unwrap();
        let votes = reg.votes(t.id);
        assert_eq!(votes.len(), 1);
        assert_eq!(votes[0].direction, Direction::Down);
        assert_eq!(
            reg.record_vote(ids[0], t.id, Direction::Up).unwrap_err().code(),
            "permission_denied"
        );
        reg.record_vote(ids[2], t.id, Direction::Up).unwrap();
        reg.record_vote(ids[3], t.id, Direction::Up).unwrap();
        assert_eq!(reg.votes(t.id).len(), 3);
        assert_eq!(
            reg.record_vote(ids[1], TermId(77), Direction::Up).unwrap_err().code(),
            "not_found"
        );
    }

    #[test]
    fn identical_vote_retry_changes_nothing() {
        let (reg, clock) = registry();
        let ids = users(&reg, &["chris", "bob"]);
        let t = reg.propose_term(ids[0], NewTerm::new("Identifier", "v1")).unwrap();
        let first = reg.record_vote(ids[1], t.id, Direction::Up).unwrap();
        reg.drain_queue();
        let before = reg.term(t.id).unwrap();
        clock.advance_days(0.5);
        let again = reg.record_vote(ids[1], t.id, Direction::Up).unwrap();
        assert_eq!(first, again);
        assert_eq!(reg.term(t.id).unwrap(), before);
        assert_eq!(reg.queue_len(), 0);
    }

    #[test]
    fn comment_tags_and_notifications() {
        let (reg, _) = registry();
        let ids = users(&reg, &["chris", "bob", "ann"]);
        let t = reg
            .propose_term(ids[0], NewTerm::new("Coverage", "Spatial or temporal topic"))
            .unwrap();
        reg.track_term(ids[2], t.id).unwrap();
        reg.track_term(ids[0], t.id).unwrap();
        let c = reg
            .add_comment(ids[1], t.id, "fits #geospatial datasets", false)
            .unwrap();
        assert_eq!(c.tags, vec!["geospatial"]);
        assert!(reg
            .add_comment(ids[1], t.id, "looks good", false)
            .unwrap()
            .tags
            .is_empty());
        assert_eq!(
            reg.add_comment(ids[1], t.id, " ", false).unwrap_err().code(),
            "validation_failed"
        );
        let feed = reg.notifications_feed(ids[2]).unwrap();
        assert_eq!(
            feed.iter()
                .filter(|n| n.kind == NotificationKind::CommentPosted)
                .count(),
            2
        );
        assert_eq!(reg.notifications_feed(ids[0]).unwrap().len(), 2);
    }

    #[test]
    fn review_request_notifies_contributor() {
        let (reg, _) = registry();
        let ids = users(&reg, &["chris", "bob"]);
        let t = reg.propose_term(ids[0], NewTerm::new("Coverage", "topic")).unwrap();
        reg.add_comment(ids[1], t.id, "please review the scope", true).unwrap();
        let feed = reg.notifications_feed(ids[0]).unwrap();
        assert_eq!(feed.len(), 1);
        assert_eq!(feed[0].kind, NotificationKind::ReviewRequest);
    }

    #[test]
    fn classification_examples_persist_status() {
        let (reg, _) = registry();
        let chris = users(&reg, &["chris"])[0];
        let t = reg.propose_term(chris, NewTerm::new("Identifier", "v1")).unwrap();
        assert_eq!(reg.apply_classification(t.id, 0.76, 1.0).unwrap(), Status::Canonical);
        assert_eq!(reg.term(t.id).unwrap().status(), Status::Canonical);
        assert_eq!(reg.apply_classification(t.id, 0.50, 0.0).unwrap(), Status::Vernacular);
        assert_eq!(reg.apply_classification(t.id, 0.20, 1.0).unwrap(), Status::Deprecated);
        assert!(reg.apply_classification(t.id, 1.2, 1.0).is_err());
        // deprecation: status notices plus an outbox invitation
        let feed = reg.notifications_feed(chris).unwrap();
        assert!(feed
            .iter()
            .any(|n| n.kind == NotificationKind::DeprecationNotice && n.delivered));
        assert_eq!(reg.outbox().lines().len(), 1);
        assert!(reg.outbox().lines()[0].contains("deprecation_notice"));
    }

    #[test]
    fn moderator_assignment_requires_custody() {
        let (reg, _) = registry();
        let ids = users(&reg, &["chris", "expert", "bob"]);
        let group: std::collections::BTreeSet<TermId> = (0..18)
            .map(|i| reg.propose_term(ids[0], NewTerm::new(format!("T{i}"), "d")).unwrap().id)
            .collect();
        let a = reg
            .assign_moderator(ids[0], ids[1], TermGroup::Terms(group.clone()))
            .unwrap();
        match a.term_group {
            TermGroup::Terms(s) => assert_eq!(s.len(), 18),
            _ => unreachable!(),
        }
        assert_eq!(
            reg.assign_moderator(ids[2], ids[1], TermGroup::Terms(group))
                .unwrap_err()
                .code(),
            "permission_denied"
        );
        assert_eq!(
            reg.assign_moderator(ids[0], ids[1], TermGroup::Terms(Default::default()))
                .unwrap_err()
                .code(),
            "validation_failed"
        );
    }

    #[test]
    fn status_written_in_exactly_one_place() {
        // Audit of write paths: the only assignment to a term's status field
        // is in State::apply_classification.
        fn walk(dir: &std::path::Path, out: &mut Vec<(String, String)>) {
            for entry in std::fs::read_dir(dir).unwrap() {
                let path = entry.unwrap().path();
                if path.is_dir() {
                    walk(&path, out);
                } else if path.extension().is_some_and(|e| e == "rs") {
                    out.push((path.display().to_string(), std::fs::read_to_string(&path).unwrap()));
                }
            }
        }
        let mut files = Vec::new();
        walk(
            &std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("src"),
            &mut files,
        );
        let needle = [".status", " = "].concat();
        let writes: Vec<String> = files
            .iter()
            .flat_map(|(name, src)| {
                src.lines()
                    .filter(|l| l.contains(&needle) && !l.trim_start().starts_with("//"))
                    .map(move |l| format!("{name}: {}", l.trim()))
            })
            .collect();
        assert_eq!(writes.len(), 1, "status writes: {writes:#?}");
        assert!(writes[0].ends_with(&["term", &needle, "next;"].concat()));
    }
}
