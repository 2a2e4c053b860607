use std::collections::BTreeSet;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::Registry;
use crate::clock::Timestamp;
use crate::error::{Error, Result};
use crate::ids::{SurveyId, TermId, UserId};
use crate::model::ActionKind;
use crate::notify::{NotificationKind, Subject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Audience {
    Followers,
    LinkToken,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Respondent {
    User { id: UserId },
    Token { name: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub respondent: Respondent,
    pub term: TermId,
    pub rating: u8,
    pub comment: String,
    pub submitted_at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Survey {
    pub id: SurveyId,
    pub creator: UserId,
    pub terms: Vec<TermId>,
    pub questions: Vec<String>,
    pub audience: Audience,
    pub token: Option<String>,
    /// Followers at invite time.
    pub invited: BTreeSet<UserId>,
    pub created_at: Timestamp,
    pub closes_at: Option<Timestamp>,
    pub closed: bool,
    pub responses: Vec<SurveyResponse>,
}

impl Survey {
    fn is_open(&self, now: Timestamp) -> bool {
        !self.closed && self.closes_at.is_none_or(|c| now < c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSurveyResult {
    pub term: TermId,
    pub responses: usize,
    pub mean_rating: Option<f64>,
    pub comments: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyResults {
    pub survey: SurveyId,
    pub terms: Vec<TermSurveyResult>,
}

impl Registry {
    pub fn create_survey(
        &self,
        creator: UserId,
        terms: Vec<TermId>,
        questions: Vec<String>,
        audience: Audience,
        closes_at: Option<Timestamp>,
    ) -> Result<Survey> {
        let now = self.now();
        let mut st = self.state.write();
        let followers = st.user(creator)?.followers.clone();
        if terms.is_empty() {
            return Err(Error::invalid("a survey needs at least one term"));
        }
        let mut seen = BTreeSet::new();
        for t in &terms {
            let term = st.term(*t)?;
            if !seen.insert(*t) {
                return Err(Error::invalid(format!("{t} listed twice")));
            }
            let curates = term.contributor == creator
                || term.custodian == creator
                || st
                    .moderators
                    .iter()
                    .any(|m| m.moderator == creator && m.term_group.covers(term));
            if audience == Audience::Followers && !curates {
                return Err(Error::denied(format!("{creator} neither owns nor curates {t}")));
            }
        }
        let token = (audience == Audience::LinkToken).then(|| {
            let mut bytes = [0u8; 16];
            rand::thread_rng().fill_bytes(&mut bytes);
            hex::encode(bytes)
        });
        let invited = if audience == Audience::Followers {
            followers
        } else {
            BTreeSet::new()
        };
        st.seq.survey += 1;
        let survey = Survey {
            id: SurveyId(st.seq.survey),
            creator,
            terms,
            questions,
            audience,
            token,
            invited: invited.clone(),
            created_at: now,
            closes_at,
            closed: false,
            responses: Vec::new(),
        };
        st.surveys.insert(survey.id, survey.clone());
        st.notify_all(
            &self.outbox,
            invited,
            NotificationKind::SurveyInvite,
            Subject::Survey(survey.id),
            now,
        );
        st.log_action(creator, ActionKind::Survey, now);
        Ok(survey)
    }

    /// Records one rating. A second response by the same respondent for the
    /// same term replaces the first.
    pub fn respond_survey(
        &self,
        survey: SurveyId,
        respondent: Respondent,
        token: Option<&str>,
        term: TermId,
        rating: u8,
        comment: &str,
    ) -> Result<SurveyResponse> {
        let now = self.now();
        let mut st = self.state.write();
        let s = st.surveys.get(&survey).ok_or_else(|| Error::not_found(survey))?;
        if !s.is_open(now) {
            return Err(Error::invalid(format!("{survey} is closed")));
        }
        match s.audience {
            Audience::Followers => match &respondent {
                Respondent::User { id } if s.invited.contains(id) => {}
                _ => return Err(Error::denied(format!("respondent was not invited to {survey}"))),
            },
            Audience::LinkToken => {
                if token.is_none() || token != s.token.as_deref() {
                    return Err(Error::denied(format!("{survey} requires its link token")));
                }
            }
        }
        if !s.terms.contains(&term) {
            return Err(Error::invalid(format!("{term} is not part of {survey}")));
        }
        if !(1..=5).contains(&rating) {
            return Err(Error::invalid("rating must be between 1 and 5"));
        }
        if let Respondent::Token { name } = &respondent {
            if name.trim().is_empty() {
                return Err(Error::invalid("link respondents must give a name"));
            }
        }
        let response = SurveyResponse {
            respondent: respondent.clone(),
            term,
            rating,
            comment: comment.trim().to_string(),
            submitted_at: now,
        };
        let s = st.surveys.get_mut(&survey).expect("checked above");
        s.responses.retain(|r| !(r.respondent == respondent && r.term == term));
        s.responses.push(response.clone());
        if let Respondent::User { id } = respondent {
            st.log_action(id, ActionKind::Survey, now);
        }
        Ok(response)
    }

    pub fn close_survey(&self, user: UserId, survey: SurveyId) -> Result<()> {
        let mut st = self.state.write();
        let s = st.surveys.get_mut(&survey).ok_or_else(|| Error::not_found(survey))?;
        if s.creator != user {
            return Err(Error::denied("only the creator may close a survey"));
        }
        s.closed = true;
        Ok(())
    }

    /// Per-term mean rating and comments; visible to the creator only.
    pub fn survey_results(&self, user: UserId, survey: SurveyId) -> Result<SurveyResults> {
        let st = self.state.read();
        let s = st.surveys.get(&survey).ok_or_else(|| Error::not_found(survey))?;
        if s.creator != user {
            return Err(Error::denied("survey results are visible to the creator only"));
        }
        let terms = s
            .terms
            .iter()
            .map(|t| {
                let rs: Vec<&SurveyResponse> = s.responses.iter().filter(|r| r.term == *t).collect();
                let mean =
                    (!rs.is_empty()).then(|| rs.iter().map(|r| f64::from(r.rating)).sum::<f64>() / rs.len() as f64);
                TermSurveyResult {
                    term: *t,
                    responses: rs.len(),
                    mean_rating: mean,
                    comments: rs
                        .iter()
                        .filter(|r| !r.comment.is_empty())
                        .map(|r| r.comment.clone())
                        .collect(),
                }
            })
            .collect();
        Ok(SurveyResults { survey, terms })
    }

    pub fn survey(&self, id: SurveyId) -> Result<Survey> {
        self.state
            .read()
            .surveys
            .get(&id)
            .cloned()
            .ok_or_else(|| Error::not_found(id))
    }
}
