use crate::mac::AvcRecord;
use crate::negotiation::PeerId;
use crate::policy::PropertyKind;

use super::TrustError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChallengeKind {
    /// The delegate offers a transfer whose required property conflicts with
    /// what the target claims to enforce; a fair peer refuses.
    ConflictingRequest,
    /// The delegate asks for an AVC trace of a forbidden access.
    MacChallenge,
}

impl ChallengeKind {
    pub const BOTH: [ChallengeKind; 2] = [ChallengeKind::ConflictingRequest, ChallengeKind::MacChallenge];
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChallengeResult {
    pub delegate: PeerId,
    pub target: PeerId,
    pub property_kind: PropertyKind,
    pub kind: ChallengeKind,
    /// 1.0 on pass, 0.0 on fail.
    pub score: f64,
    pub evidence: Vec<AvcRecord>,
}

/// Runs a single probe on behalf of a delegate.
pub trait ChallengeExecutor {
    fn probe(&mut self, delegate: &PeerId, target: &PeerId, kind: PropertyKind, probe: ChallengeKind) -> ChallengeResult;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChallengeSummary {
    pub chal: f64,
    pub results: Vec<ChallengeResult>,
}

/// Every delegate runs both probe families against `target`; a delegate's
/// score is the mean of its probe scores and `Chal` is the trust-weighted
/// mean over delegates.
pub fn run_challenges(
    delegates: &[(PeerId, f64)],
    target: &PeerId,
    kind: PropertyKind,
    executor: &mut impl ChallengeExecutor,
) -> Result<ChallengeSummary, TrustError> {
    if delegates.is_empty() {
        return Err(TrustError::NoDelegates);
    }
    if let Some((p, t)) = delegates.iter().find(|(_, t)| !(t.is_finite() && *t > 0.0)) {
        return Err(TrustError::InvalidTrust { delegate: p.name.clone(), trust: *t });
    }

    let mut results = Vec::with_capacity(delegates.len() * 2);
    let mut terms: Vec<(&PeerId, f64, f64)> = Vec::with_capacity(delegates.len());
    for (delegate, trust) in delegates {
        let mut sum = 0.0;
        for probe in ChallengeKind::BOTH {
            let r = executor.probe(delegate, target, kind, probe);
            sum += r.score.clamp(0.0, 1.0);
            results.push(r);
        }
        terms.push((delegate, *trust, sum / ChallengeKind::BOTH.len() as f64));
    }
    Ok(ChallengeSummary { chal: weighted_mean(terms), results })
}

/// Weighted mean folded in delegate order so the result does not depend on
/// the order delegates were listed or answered in.
fn weighted_mean(mut terms: Vec<(&PeerId, f64, f64)>) -> f64 {
    terms.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let (num, den) = terms.iter().fold((0.0, 0.0), |(n, d), (_, t, s)| (n + t * s, d + t));
    (num / den).clamp(0.0, 1.0)
}
