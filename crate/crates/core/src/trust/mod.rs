//! Trust evaluation of a requester: policy evaluation, history, delegated
//! challenges, their combination into a trust value and the resulting
//! reputation update.
//!
//! The combination rule is
//!
//! ```text
//! Tv = EvalHist * (challenge_weight * Chal + eval_weight * (Eval + 1) / 2)
//! ```
//!
//! so a zero `EvalHist` (an outright policy conflict, or a recent violation)
//! forces `Tv = 0` whatever the challenges say.

mod challenge;
mod history;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use crate::negotiation::PeerId;

pub use challenge::{run_challenges, ChallengeExecutor, ChallengeKind, ChallengeResult, ChallengeSummary};
pub use history::{audit_history, eval_history, HistoryAudit, HistoryDirectory, HistoryRecord, HistoryScore};

#[derive(Debug, Clone, PartialEq)]
pub struct TrustConfig {
    pub refuse_threshold: f64,
    pub full_trust_threshold: f64,
    pub refuse_decrement: f64,
    pub partial_decrement: f64,
    pub initial_reputation: f64,
    /// History window, in logical ticks.
    pub history_window: u64,
    pub challenge_weight: f64,
    pub eval_weight: f64,
}

impl Default for TrustConfig {
    fn default() -> Self {
        TrustConfig {
            refuse_threshold: 0.2,
            full_trust_threshold: 0.5,
            refuse_decrement: 0.02,
            partial_decrement: 0.01,
            initial_reputation: 0.5,
            history_window: 100,
            challenge_weight: 0.75,
            eval_weight: 0.25,
        }
    }
}

impl TrustConfig {
    pub fn validate(&self) -> Result<(), TrustError> {
        let bad = |m: &str| Err(TrustError::InvalidConfig(m.to_string()));
        if !(0.0 <= self.refuse_threshold
            && self.refuse_threshold < self.full_trust_threshold
            && self.full_trust_threshold <= 1.0)
        {
            return bad("thresholds must satisfy 0 <= refuse < full <= 1");
        }
        if !(self.refuse_decrement > 0.0 && self.partial_decrement > 0.0) {
            return bad("decrements must be positive");
        }
        if !(0.0..=1.0).contains(&self.initial_reputation) {
            return bad("initial reputation must lie in [0, 1]");
        }
        if self.challenge_weight < 0.0 || self.eval_weight < 0.0 {
            return bad("weights must be non-negative");
        }
        if (self.challenge_weight + self.eval_weight - 1.0).abs() > 1e-9 {
            return bad("challenge and eval weights must sum to 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrustError {
    #[error("no delegates to run challenges")]
    NoDelegates,
    #[error("delegate {delegate} has non-positive trust {trust}")]
    InvalidTrust { delegate: String, trust: f64 },
    #[error("invalid trust configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Band {
    Refused,
    Partial,
    Full,
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Band::Refused => "refused",
            Band::Partial => "partial",
            Band::Full => "full",
        })
    }
}

/// Normalized history credit in `[0, 1]`. A violated policy (`eval == -1`)
/// earns nothing regardless of history.
pub fn eval_hist_norm(hist: HistoryScore, eval: i8) -> f64 {
    if eval < 0 {
        return 0.0;
    }
    match hist {
        HistoryScore::Clean => 1.0,
        HistoryScore::NoData => 0.5,
        HistoryScore::ViolatedBefore => 0.25,
        HistoryScore::ViolatedRecently => 0.0,
    }
}

pub fn trust_value(eval: i8, eval_hist: f64, chal: f64, config: &TrustConfig) -> f64 {
    let eval_norm = (f64::from(eval.clamp(-1, 1)) + 1.0) / 2.0;
    let tv = eval_hist * (config.challenge_weight * chal + config.eval_weight * eval_norm);
    tv.clamp(0.0, 1.0)
}

pub fn band(tv: f64, config: &TrustConfig) -> Band {
    if tv < config.refuse_threshold {
        Band::Refused
    } else if tv < config.full_trust_threshold {
        Band::Partial
    } else {
        Band::Full
    }
}

/// Everything computed for one required property.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustComputation {
    pub eval: i8,
    pub hist: HistoryScore,
    pub chal: f64,
    pub eval_hist: f64,
    pub tv: f64,
    pub band: Band,
}

impl TrustComputation {
    pub fn compute(eval: i8, hist: HistoryScore, chal: f64, config: &TrustConfig) -> Self {
        let eval_hist = eval_hist_norm(hist, eval);
        let tv = trust_value(eval, eval_hist, chal, config);
        TrustComputation { eval, hist, chal, eval_hist, tv, band: band(tv, config) }
    }
}

/// Reputation arithmetic is kept on a 1e-12 grid so repeated decrements land
/// on the same decimal values (0.5 - 0.02 - 0.01 == 0.47).
fn snap(x: f64) -> f64 {
    ((x * 1e12).round() / 1e12).clamp(0.0, 1.0)
}

/// A peer's view of others: reputations, the log it can consult, and the
/// challenge results it has collected.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrustLedger {
    reputations: BTreeMap<PeerId, f64>,
    acquaintances: Vec<PeerId>,
    pub history: Vec<HistoryRecord>,
    pub challenge_log: Vec<ChallengeResult>,
}

impl TrustLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Seeds trust in an acquaintance; acquaintances act as challenge delegates.
    pub fn knows(&mut self, peer: PeerId, trust: f64) {
        self.reputations.insert(peer.clone(), snap(trust));
        if !self.acquaintances.contains(&peer) {
            self.acquaintances.push(peer);
        }
    }

    pub fn reputation(&self, peer: &PeerId) -> Option<f64> {
        self.reputations.get(peer).copied()
    }

    pub fn reputations(&self) -> &BTreeMap<PeerId, f64> {
        &self.reputations
    }

    /// Acquaintances other than `exclude`, with their current trust, in the
    /// order they were introduced. Peers at zero trust are skipped.
    pub fn delegates(&self, exclude: &PeerId) -> Vec<(PeerId, f64)> {
        self.acquaintances
            .iter()
            .filter(|p| *p != exclude)
            .filter_map(|p| {
                let t = self.reputations.get(p).copied().unwrap_or(0.0);
                (t > 0.0).then(|| (p.clone(), t))
            })
            .collect()
    }

    /// Refused costs `refuse_decrement`, Partial `partial_decrement`, Full
    /// leaves the value alone. Unknown peers start at `initial_reputation`.
    pub fn update_reputation(&mut self, peer: &PeerId, outcome: Band, config: &TrustConfig) -> f64 {
        let current = *self.reputations.entry(peer.clone()).or_insert(snap(config.initial_reputation));
        let next = match outcome {
            Band::Refused => snap(current - config.refuse_decrement),
            Band::Partial => snap(current - config.partial_decrement),
            Band::Full => current,
        };
        self.reputations.insert(peer.clone(), next);
        next
    }

    pub fn eval_history(&self, target: &PeerId, kind: crate::policy::PropertyKind, now: u64, window: u64) -> HistoryScore {
        eval_history(&self.history, target, kind, now, window)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TrustConfig {
        TrustConfig::default()
    }

    #[test]
    fn default_config_is_valid() {
        cfg().validate().unwrap();
        let mut c = cfg();
        c.refuse_threshold = 0.6;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.eval_weight = 0.5;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.partial_decrement = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn eval_hist_table() {
        assert_eq!(eval_hist_norm(HistoryScore::NoData, -1), 0.0);
        assert_eq!(eval_hist_norm(HistoryScore::NoData, 0), 0.5);
        assert_eq!(eval_hist_norm(HistoryScore::Clean, 1), 1.0);
        assert_eq!(eval_hist_norm(HistoryScore::ViolatedRecently, 0), 0.0);
        assert_eq!(eval_hist_norm(HistoryScore::ViolatedBefore, 1), 0.25);
    }

    #[test]
    fn trust_value_examples() {
        let c = cfg();
        assert_eq!(trust_value(-1, 0.0, 0.4, &c), 0.0);
        assert_eq!(band(trust_value(-1, 0.0, 0.4, &c), &c), Band::Refused);

        // 0.5 * (0.75 * 0.726667 + 0.25 * 0.5)
        let tv = trust_value(0, 0.5, 0.726_667, &c);
        assert!((tv - 0.335_000_125).abs() < 1e-9, "{tv}");
        assert_eq!(band(tv, &c), Band::Partial);

        // 0.5 * (0.75 * 0.85 + 0.25 * 0.5)
        let tv = trust_value(0, 0.5, 0.85, &c);
        assert!((tv - 0.381_25).abs() < 1e-12, "{tv}");
        assert_eq!(band(tv, &c), Band::Partial);

        assert_eq!(trust_value(1, 1.0, 1.0, &c), 1.0);
    }

    #[test]
    fn band_examples() {
        let c = cfg();
        assert_eq!(band(0.0, &c), Band::Refused);
        assert_eq!(band(0.385, &c), Band::Partial);
        assert_eq!(band(0.442, &c), Band::Partial);
        assert_eq!(band(0.5, &c), Band::Full);
        assert_eq!(band(0.2, &c), Band::Partial);
    }

    #[test]
    fn reputation_examples() {
        let c = cfg();
        let david = PeerId::new(4, "David");
        let mut l = TrustLedger::new();
        assert_eq!(l.update_reputation(&david, Band::Refused, &c), 0.48);
        assert_eq!(l.update_reputation(&david, Band::Partial, &c), 0.47);

        let mut l = TrustLedger::new();
        assert_eq!(l.update_reputation(&david, Band::Partial, &c), 0.49);
        assert_eq!(l.update_reputation(&david, Band::Full, &c), 0.49);

        let mut l = TrustLedger::new();
        l.knows(david.clone(), 0.0);
        assert_eq!(l.update_reputation(&david, Band::Refused, &c), 0.0);
    }

    #[test]
    fn delegates_exclude_target_and_distrusted() {
        let mut l = TrustLedger::new();
        let (a, b, c) = (PeerId::new(1, "A"), PeerId::new(2, "B"), PeerId::new(3, "C"));
        l.knows(a.clone(), 0.8);
        l.knows(b.clone(), 0.9);
        l.knows(c.clone(), 0.0);
        assert_eq!(l.delegates(&b), vec![(a, 0.8)]);
    }
}
