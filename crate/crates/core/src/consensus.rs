//! Consensus scoring.
//!
//! A term's raw score is the up-vote fraction `u / (u + d)`. Because most
//! users never vote on a given term, each vote is weighted by the voter's
//! share of the reputation held by everyone who voted on that term:
//!
//! ```text
//! w_i = 1 + r_i (t - v),   r_i = R_i / R
//! ```
//!
//! where `t` is the number of registered users, `v` the number of votes and
//! `R` the summed reputation of the voters. The base weights of a slate of
//! plain voters therefore always sum to `t`, and the weighted score (up
//! weight over total weight) collapses to the raw score when every user has
//! voted. Custodian-appointed moderators and users followed by the custodian
//! get a further multiplicative boost.
//!
//! Everything here is a pure function; the registry feeds it snapshots.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ids::UserId;
use crate::model::{Direction, Status};

/// How a score is compared against a classification threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    /// `score > threshold` (canonical) or `score < threshold` (deprecated).
    #[default]
    Strict,
    /// `score >= threshold` or `score <= threshold`.
    Inclusive,
}

/// Reputation coefficients: `base + profile (if complete)
/// + min(follower_cap, per_follower * followers)
/// + min(action_cap, per_action * recent_actions)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReputationWeights {
    pub base: f64,
    pub profile: f64,
    pub per_follower: f64,
    pub follower_cap: f64,
    pub per_action: f64,
    pub action_cap: f64,
    pub activity_window_days: f64,
}

impl Default for ReputationWeights {
    fn default() -> Self {
        Self {
            base: 1.0,
            profile: 1.0,
            per_follower: 0.1,
            follower_cap: 1.0,
            per_action: 0.05,
            action_cap: 1.0,
            activity_window_days: 30.0,
        }
    }
}

/// Every tunable of the scoring and classification pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    pub canonical_threshold: f64,
    pub deprecate_threshold: f64,
    pub stability_threshold: f64,
    pub mismatch_penalty: f64,
    pub unreachable_penalty: f64,
    pub applicability_half_life_days: f64,
    pub moderator_multiplier: f64,
    pub followed_multiplier: f64,
    /// Score of a term nobody has voted on.
    pub no_vote_default: f64,
    /// Unaltered days for a manually entered term to accrue from 0 to 1.
    pub stability_window_days: f64,
    pub interaction_bonus: f64,
    pub canonical_comparison: Comparison,
    pub deprecate_comparison: Comparison,
    pub reputation: ReputationWeights,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            canonical_threshold: 0.75,
            deprecate_threshold: 0.25,
            stability_threshold: 0.75,
            mismatch_penalty: 0.10,
            unreachable_penalty: 0.25,
            applicability_half_life_days: 180.0,
            moderator_multiplier: 2.0,
            followed_multiplier: 1.25,
            no_vote_default: 0.5,
            stability_window_days: 30.0,
            interaction_bonus: 0.05,
            canonical_comparison: Comparison::Strict,
            deprecate_comparison: Comparison::Strict,
            reputation: ReputationWeights::default(),
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(0.0 <= self.deprecate_threshold
            && self.deprecate_threshold < self.canonical_threshold
            && self.canonical_threshold <= 1.0)
        {
            return bad("thresholds must satisfy 0 <= deprecate < canonical <= 1");
        }
        if !unit(self.stability_threshold) {
            return bad("stability_threshold must lie in [0, 1]");
        }
        for (name, p) in [
            ("mismatch_penalty", self.mismatch_penalty),
            ("unreachable_penalty", self.unreachable_penalty),
        ] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1)")));
            }
        }
        if self.followed_multiplier < 1.0 || self.moderator_multiplier < 1.0 {
            return bad("role multipliers must be >= 1");
        }
        if self.followed_multiplier >= self.moderator_multiplier {
            return bad("followed_multiplier must be smaller than moderator_multiplier");
        }
        if !unit(self.no_vote_default) || !unit(self.interaction_bonus) {
            return bad("no_vote_default and interaction_bonus must lie in [0, 1]");
        }
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if !positive(self.applicability_half_life_days) || !positive(self.stability_window_days) {
            return bad("durations must be positive");
        }
        let r = &self.reputation;
        if [
            r.base,
            r.profile,
            r.per_follower,
            r.follower_cap,
            r.per_action,
            r.action_cap,
        ]
        .iter()
        .any(|c| !c.is_finite() || *c < 0.0)
            || r.base < 1.0
        {
            return bad("reputation coefficients must be non-negative with base >= 1");
        }
        Ok(())
    }
}

/// `u / (u + d)`, or the no-vote default when nobody has voted.
pub fn raw_score(up: u64, down: u64, thresholds: &Thresholds) -> f64 {
    let total = up + down;
    if total == 0 {
        thresholds.no_vote_default
    } else {
        up as f64 / total as f64
    }
}

/// Base weight `1 + (R_i / R)(t - v)` of one vote.
///
/// When every voter has zero reputation the share falls back to `1 / v`,
/// which keeps the weights of a slate summing to `t`.
pub fn vote_weight(reputation: f64, total_reputation: f64, total_users: u64, votes: u64) -> Result<f64> {
    if votes == 0 {
        return Err(Error::invalid("vote weight is undefined without votes"));
    }
    if votes > total_users {
        return Err(Error::invalid(format!(
            "{votes} votes cast by a community of {total_users}"
        )));
    }
    if !(reputation.is_finite() && reputation >= 0.0 && total_reputation.is_finite() && total_reputation >= 0.0) {
        return Err(Error::invalid("reputations must be finite and non-negative"));
    }
    let share = if total_reputation == 0.0 {
        1.0 / votes as f64
    } else {
        reputation / total_reputation
    };
    Ok(1.0 + share * (total_users - votes) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    Plain,
    FollowedByCustodian,
    Moderator,
}

impl Role {
    pub fn multiplier(self, thresholds: &Thresholds) -> f64 {
        match self {
            Role::Plain => 1.0,
            Role::FollowedByCustodian => thresholds.followed_multiplier,
            Role::Moderator => thresholds.moderator_multiplier,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlateVote {
    pub user: UserId,
    pub reputation: f64,
    pub direction: Direction,
    pub role: Role,
}

/// Every vote on one term, with the community size at scoring time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct VoteSlate {
    pub total_users: u64,
    pub voters: Vec<SlateVote>,
}

impl VoteSlate {
    pub fn new(total_users: u64) -> Self {
        Self {
            total_users,
            voters: Vec::new(),
        }
    }

    pub fn push(&mut self, user: UserId, reputation: f64, direction: Direction, role: Role) {
        self.voters.push(SlateVote {
            user,
            reputation,
            direction,
            role,
        });
    }

    pub fn validate(&self) -> Result<()> {
        if self.voters.len() as u64 > self.total_users {
            return Err(Error::invalid("slate has more voters than users"));
        }
        if self
            .voters
            .iter()
            .any(|v| !v.reputation.is_finite() || v.reputation < 0.0)
        {
            return Err(Error::invalid("reputations must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn up_down(&self) -> (u64, u64) {
        let up = self.voters.iter().filter(|v| v.direction == Direction::Up).count() as u64;
        (up, self.voters.len() as u64 - up)
    }

    pub fn total_reputation(&self) -> f64 {
        self.voters.iter().map(|v| v.reputation).sum()
    }

    /// Base weights before role multipliers, in voter order.
    pub fn base_weights(&self) -> Result<Vec<f64>> {
        self.validate()?;
        let total = self.total_reputation();
        let v = self.voters.len() as u64;
        self.voters
            .iter()
            .map(|voter| vote_weight(voter.reputation, total, self.total_users, v))
            .collect()
    }
}

/// Up-vote weight over total weight, after role multipliers.
pub fn weighted_score(slate: &VoteSlate, thresholds: &Thresholds) -> Result<f64> {
    if slate.voters.is_empty() {
        return Ok(thresholds.no_vote_default);
    }
    let base = slate.base_weights()?;
    let mut up = 0.0;
    let mut all = 0.0;
    for (voter, w) in slate.voters.iter().zip(base) {
        let w = w * voter.role.multiplier(thresholds);
        if voter.direction == Direction::Up {
            up += w;
        }
        all += w;
    }
    Ok((up / all).clamp(0.0, 1.0))
}

/// Inputs to [`reputation`] for one user.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ActivitySnapshot {
    pub profile_complete: bool,
    pub followers: usize,
    /// Logged actions inside the activity window.
    pub recent_actions: usize,
}

pub fn reputation(snapshot: &ActivitySnapshot, weights: &ReputationWeights) -> f64 {
    let profile = if snapshot.profile_complete {
        weights.profile
    } else {
        0.0
    };
    let followers = (weights.per_follower * snapshot.followers as f64).min(weights.follower_cap);
    let activity = (weights.per_action * snapshot.recent_actions as f64).min(weights.action_cap);
    weights.base + profile + followers + activity
}

/// What happened to a term's stability since it was last updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityCheck {
    /// Source hash matched.
    Unchanged,
    /// Source hash differed; the caller flags the term.
    Changed,
    /// Source could not be fetched.
    Unreachable,
    /// Time passed without edits.
    Aged,
}

pub fn stability_update(current: f64, check: StabilityCheck, elapsed_days: f64, thresholds: &Thresholds) -> f64 {
    let next = match check {
        StabilityCheck::Unchanged => current,
        StabilityCheck::Changed => current - thresholds.mismatch_penalty,
        StabilityCheck::Unreachable => current - thresholds.mismatch_penalty - thresholds.unreachable_penalty,
        StabilityCheck::Aged => current + elapsed_days.max(0.0) / thresholds.stability_window_days,
    };
    next.clamp(0.0, 1.0)
}

/// Exponential decay with the configured half-life.
pub fn applicability_decay(current: f64, days_since_interaction: f64, thresholds: &Thresholds) -> f64 {
    let days = days_since_interaction.max(0.0);
    if days == 0.0 {
        return current;
    }
    (current * (-days / thresholds.applicability_half_life_days).exp2()).clamp(0.0, 1.0)
}

pub fn applicability_interaction(current: f64, thresholds: &Thresholds) -> f64 {
    (current + thresholds.interaction_bonus).min(1.0)
}

fn exceeds(score: f64, threshold: f64, cmp: Comparison) -> bool {
    match cmp {
        Comparison::Strict => score > threshold,
        Comparison::Inclusive => score >= threshold,
    }
}

fn falls_below(score: f64, threshold: f64, cmp: Comparison) -> bool {
    match cmp {
        Comparison::Strict => score < threshold,
        Comparison::Inclusive => score <= threshold,
    }
}

/// Maps a (consensus, stability) pair to exactly one status.
pub fn classify(consensus: f64, stability: f64, thresholds: &Thresholds) -> Status {
    if falls_below(
        consensus,
        thresholds.deprecate_threshold,
        thresholds.deprecate_comparison,
    ) {
        Status::Deprecated
    } else if exceeds(
        consensus,
        thresholds.canonical_threshold,
        thresholds.canonical_comparison,
    ) && stability >= thresholds.stability_threshold
    {
        Status::Canonical
    } else {
        Status::Vernacular
    }
}
