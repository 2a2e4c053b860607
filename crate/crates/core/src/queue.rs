use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::model::RescoreEvent;

/// FIFO of pending rescore events. An event whose dedupe key is already
/// pending collapses into the queued one.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RescoreQueue {
    events: VecDeque<RescoreEvent>,
    #[serde(skip)]
    pending: HashSet<String>,
}

impl RescoreQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false if an event with the same key was already pending.
    pub fn enqueue(&mut self, event: RescoreEvent) -> bool {
        if !self.pending.insert(event.dedupe_key.clone()) {
            return false;
        }
        self.events.push_back(event);
        true
    }

    pub fn dequeue(&mut self) -> Option<RescoreEvent> {
        let event = self.events.pop_front()?;
        self.pending.remove(&event.dedupe_key);
        Some(event)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &RescoreEvent> {
        self.events.iter()
    }

    /// Rebuilds the key index after deserialization.
    pub(crate) fn reindex(&mut self) {
        self.pending = self.events.iter().map(|e| e.dedupe_key.clone()).collect();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::{TermId, UserId};
    use crate::model::EventKind;
    use chrono::Utc;

    fn ev(kind: EventKind, term: u64, user: u64) -> RescoreEvent {
        RescoreEvent::new(kind, Some(TermId(term)), Some(UserId(user)), Utc::now())
    }

    #[test]
    fn duplicates_collapse_until_dequeued() {
        let mut q = RescoreQueue::new();
        assert!(q.enqueue(ev(EventKind::Vote, 1, 2)));
        assert!(!q.enqueue(ev(EventKind::Vote, 1, 2)));
        assert!(q.enqueue(ev(EventKind::Vote, 1, 3)));
        assert_eq!(q.len(), 2);
        assert_eq!(q.dequeue().unwrap().user, Some(UserId(2)));
        assert!(q.enqueue(ev(EventKind::Vote, 1, 2)));
        assert_eq!(q.len(), 2);
    }

    #[test]
    fn fifo_order_survives_serialization() {
        let mut q = RescoreQueue::new();
        q.enqueue(ev(EventKind::Edit, 1, 1));
        q.enqueue(ev(EventKind::Comment, 2, 1));
        let json = serde_json::to_string(&q).unwrap();
        let mut back: RescoreQueue = serde_json::from_str(&json).unwrap();
        back.reindex();
        assert!(!back.enqueue(ev(EventKind::Edit, 1, 1)));
        assert_eq!(back.dequeue().unwrap().kind, EventKind::Edit);
        assert_eq!(back.dequeue().unwrap().kind, EventKind::Comment);
        assert!(back.dequeue().is_none());
    }
}
