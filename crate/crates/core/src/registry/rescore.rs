use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{Registry, State};
use crate::clock::{days_between, Timestamp};
use crate::consensus::{self, Role, StabilityCheck, Thresholds, VoteSlate};
use crate::error::Result;
use crate::ids::{TermId, UserId};
use crate::model::{EventKind, RescoreEvent, Status};
use crate::notify::{NotificationKind, Outbox, Subject};

/// What one processed event did.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescoreOutcome {
    pub event: RescoreEvent,
    pub rescored: Vec<TermId>,
    pub status_changes: Vec<(TermId, Status, Status)>,
}

impl State {
    fn role_of(&self, voter: UserId, term: TermId) -> Role {
        let Ok(t) = self.term(term) else {
            return Role::Plain;
        };
        let moderates = self
            .moderators
            .iter()
            .any(|m| m.moderator == voter && m.custodian == t.custodian && m.term_group.covers(t));
        if moderates {
            return Role::Moderator;
        }
        let followed = self
            .users
            .get(&t.custodian)
            .is_some_and(|c| c.following.contains(&voter));
        if followed {
            Role::FollowedByCustodian
        } else {
            Role::Plain
        }
    }

    fn voted_terms(&self, user: UserId) -> BTreeSet<TermId> {
        self.votes
            .iter()
            .filter(|(_, by_user)| by_user.contains_key(&user))
            .map(|(t, _)| *t)
            .collect()
    }

    fn voters(&self, term: TermId) -> Vec<UserId> {
        self.votes
            .get(&term)
            .map(|m| m.keys().copied().collect())
            .unwrap_or_default()
    }

    pub(crate) fn slate(&self, term: TermId) -> VoteSlate {
        let mut slate = VoteSlate::new(self.users.len() as u64);
        if let Some(votes) = self.votes.get(&term) {
            for v in votes.values() {
                let rep = self.users.get(&v.user).map_or(0.0, |u| u.reputation);
                slate.push(v.user, rep, v.direction, self.role_of(v.user, term));
            }
        }
        slate
    }

    /// Recomputes one term's scores as of `now` and reclassifies it.
    fn rescore_term(
        &mut self,
        id: TermId,
        now: Timestamp,
        th: &Thresholds,
        outbox: &Outbox,
    ) -> Result<(Status, Status)> {
        let slate = self.slate(id);
        let score = consensus::weighted_score(&slate, th)?;
        let term = self.term_mut(id)?;
        let before = term.status;
        let old_score = term.consensus_score;
        if !term.audit_governed() {
            let days = days_between(term.stability_as_of, now);
            term.stability_score = consensus::stability_update(term.stability_score, StabilityCheck::Aged, days, th);
        }
        term.stability_as_of = term.stability_as_of.max(now);
        let days = days_between(term.applicability_as_of, now);
        term.applicability_score = consensus::applicability_decay(term.applicability_score, days, th);
        term.applicability_as_of = term.applicability_as_of.max(now);
        let stability = term.stability_score;

        let crossed: Vec<UserId> = self
            .trackers(id)
            .into_iter()
            .filter(|u| {
                self.users[u]
                    .threshold_bands
                    .iter()
                    .any(|&edge| (old_score > edge) != (score > edge))
            })
            .collect();
        self.notify_all(
            outbox,
            crossed,
            NotificationKind::ThresholdCrossing,
            Subject::Term(id),
            now,
        );
        let after = self.apply_classification(id, score, stability, th, now, outbox)?;
        Ok((before, after))
    }

    fn process(&mut self, event: &RescoreEvent, now: Timestamp, th: &Thresholds, outbox: &Outbox) -> RescoreOutcome {
        let mut affected: BTreeSet<TermId> = BTreeSet::new();
        let mut refresh: BTreeSet<UserId> = BTreeSet::new();
        match (event.kind, event.term) {
            (EventKind::Sweep, None) => {
                refresh.extend(self.users.keys().copied());
                affected.extend(self.terms.keys().copied());
            }
            (EventKind::ReputationChange, _) => {
                if let Some(u) = event.user {
                    refresh.insert(u);
                    affected.extend(self.voted_terms(u));
                }
                affected.extend(event.term);
            }
            (_, Some(term)) => {
                if self.terms.contains_key(&term) {
                    refresh.extend(self.voters(term));
                    affected.insert(term);
                }
                refresh.extend(event.user);
            }
            (_, None) => {
                refresh.extend(event.user);
            }
        }
        if event.term.is_some_and(|t| !self.terms.contains_key(&t))
            || event.user.is_some_and(|u| !self.users.contains_key(&u))
        {
            tracing::warn!(key = %event.dedupe_key, "rescore event refers to a missing record; discarded");
            affected.clear();
            refresh.clear();
        }
        for user in refresh {
            if self.refresh_reputation(user, now, th) {
                affected.extend(self.voted_terms(user));
            }
        }
        let mut outcome = RescoreOutcome {
            event: event.clone(),
            rescored: Vec::new(),
            status_changes: Vec::new(),
        };
        for term in affected {
            match self.rescore_term(term, now, th, outbox) {
                Ok((before, after)) => {
                    outcome.rescored.push(term);
                    if before != after {
                        outcome.status_changes.push((term, before, after));
                    }
                }
                Err(e) => tracing::warn!(%term, error = %e, "rescore failed"),
            }
        }
        outcome
    }
}

impl Registry {
    /// Processes the oldest queued event, if any.
    pub fn process_next(&self) -> Option<RescoreOutcome> {
        let _consumer = self.consumer.lock();
        self.process_locked()
    }

    fn process_locked(&self) -> Option<RescoreOutcome> {
        let now = self.now();
        let mut st = self.state.write();
        let event = st.queue.dequeue()?;
        Some(st.process(&event, now, &self.config.thresholds, &self.outbox))
    }

    /// Processes events until the queue is empty; returns how many ran.
    pub fn drain_queue(&self) -> usize {
        let _consumer = self.consumer.lock();
        let mut n = 0;
        while self.process_locked().is_some() {
            n += 1;
        }
        n
    }

    /// Rescores a single term immediately, outside the queue.
    pub fn rescore(&self, term: TermId) -> Result<Status> {
        let now = self.now();
        let mut st = self.state.write();
        st.term(term)?;
        for u in st.voters(term) {
            st.refresh_reputation(u, now, &self.config.thresholds);
        }
        Ok(st.rescore_term(term, now, &self.config.thresholds, &self.outbox)?.1)
    }

    pub fn enqueue_sweep(&self) {
        let now = self.now();
        self.state.write().enqueue(EventKind::Sweep, None, None, now);
    }

    pub fn slate(&self, term: TermId) -> Result<VoteSlate> {
        let st = self.state.read();
        st.term(term)?;
        Ok(st.slate(term))
    }
}
