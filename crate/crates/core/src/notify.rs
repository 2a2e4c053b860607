//! Notification records and the durable outbox that stands in for email.
//!
//! Outbox line format, one notification per line, tab separated:
//!
//! ```text
//! <RFC 3339 timestamp>\t<recipient id>\t<kind>\t<subject id>
//! ```
//!
//! A digest is written as a header line `# digest <timestamp> <recipient id> <count>`
//! followed by its notification lines.

use std::fmt;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::clock::Timestamp;
use crate::error::Result;
use crate::ids::{NotificationId, SurveyId, TermId, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NotificationKind {
    TermEdit,
    RelatedTermAdded,
    StatusChange,
    ThresholdCrossing,
    SurveyInvite,
    DeprecationNotice,
    CommentPosted,
    ReviewRequest,
}

impl NotificationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NotificationKind::TermEdit => "term_edit",
            NotificationKind::RelatedTermAdded => "related_term_added",
            NotificationKind::StatusChange => "status_change",
            NotificationKind::ThresholdCrossing => "threshold_crossing",
            NotificationKind::SurveyInvite => "survey_invite",
            NotificationKind::DeprecationNotice => "deprecation_notice",
            NotificationKind::CommentPosted => "comment_posted",
            NotificationKind::ReviewRequest => "review_request",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "lowercase")]
pub enum Subject {
    Term(TermId),
    Survey(SurveyId),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Term(t) => t.fmt(f),
            Subject::Survey(s) => s.fmt(f),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    InApp,
    DigestOutbox,
    ImmediateOutbox,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Notification {
    pub id: NotificationId,
    pub recipient: UserId,
    pub kind: NotificationKind,
    pub subject: Subject,
    pub created_at: Timestamp,
    pub delivered: bool,
    pub channel: Channel,
}

impl Notification {
    pub fn outbox_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.created_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            self.recipient,
            self.kind.as_str(),
            self.subject
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Digest {
    pub recipient: UserId,
    pub generated_at: Timestamp,
    pub notifications: Vec<Notification>,
}

impl Digest {
    pub fn is_empty(&self) -> bool {
        self.notifications.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "# digest {} {} {}\n",
            self.generated_at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            self.recipient,
            self.notifications.len()
        );
        for n in &self.notifications {
            out.push_str(&n.outbox_line());
            out.push('\n');
        }
        out
    }
}

/// Append-only outbox. Without a path, lines are only kept in memory.
#[derive(Debug, Default)]
pub struct Outbox {
    path: Option<PathBuf>,
    written: Mutex<Vec<String>>,
}

impl Outbox {
    pub fn new(path: Option<PathBuf>) -> Self {
        Self {
            path,
            written: Mutex::new(Vec::new()),
        }
    }

    pub fn append(&self, text: &str) -> Result<()> {
        let mut written = self.written.lock();
        if let Some(path) = &self.path {
            let mut file = OpenOptions::new().create(true).append(true).open(path)?;
            file.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                file.write_all(b"\n")?;
            }
            file.sync_data()?;
        }
        written.extend(text.lines().map(str::to_string));
        Ok(())
    }

    /// Lines appended during this process lifetime.
    pub fn lines(&self) -> Vec<String> {
        self.written.lock().clone()
    }
}
