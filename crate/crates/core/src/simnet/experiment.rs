//! Seeded adversarial populations and the detection experiment over them.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::negotiation::Outcome;
use crate::policy::{PropertyKind, SecurityProperty};

use super::{run_scenario, Action, Behavior, PeerDecl, RunReport, Scenario, SimError};

/// Shape of a generated population.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PopulationParams {
    pub owners: usize,
    /// Trusted peers every owner knows and delegates challenges to.
    pub delegates: usize,
    pub honest: usize,
    pub blind_liars: usize,
    pub informed_liars: usize,
    pub log_forgers: usize,
    /// Run `i` uses seed `seed + i`.
    pub seed: u64,
}

impl Default for PopulationParams {
    fn default() -> Self {
        PopulationParams { owners: 2, delegates: 2, honest: 2, blind_liars: 1, informed_liars: 1, log_forgers: 1, seed: 1 }
    }
}

/// Protected-domain properties: confidentiality and/or no-share, plus
/// optional integrity and no-publication.
fn protected_kinds(rng: &mut ChaCha8Rng) -> Vec<PropertyKind> {
    use PropertyKind::*;
    let mut kinds = match rng.gen_range(0..3) {
        0 => vec![Confidentiality],
        1 => vec![NoShare],
        _ => vec![Confidentiality, NoShare],
    };
    if rng.gen_bool(0.5) {
        kinds.push(Integrity);
    }
    if rng.gen_bool(0.3) {
        kinds.push(NoPublication);
    }
    kinds.sort();
    kinds
}

/// Owners each hold one document in a protected domain. Every requester
/// asks every owner for it, naming a domain whose real properties match the
/// owner's (honest peers and log forgers) or allow spreading (liars).
pub fn generate_population(params: &PopulationParams, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sc = Scenario { seed, ..Scenario::default() };
    let peer = |name: String, behavior: Behavior, sc: &mut Scenario| {
        sc.peers.push(PeerDecl { name: name.clone(), behavior });
        name
    };

    let owners: Vec<String> = (0..params.owners).map(|i| peer(format!("owner{i}"), Behavior::Honest, &mut sc)).collect();
    let delegates: Vec<String> =
        (0..params.delegates).map(|i| peer(format!("delegate{i}"), Behavior::Honest, &mut sc)).collect();
    let mut requesters = Vec::new();
    for (count, behavior, stem) in [
        (params.honest, Behavior::Honest, "honest"),
        (params.blind_liars, Behavior::BlindLiar, "blind"),
        (params.informed_liars, Behavior::InformedLiar, "informed"),
        (params.log_forgers, Behavior::LogForger, "forger"),
    ] {
        for i in 0..count {
            requesters.push((peer(format!("{stem}{i}"), behavior, &mut sc), behavior));
        }
    }

    let mut protected = Vec::new();
    for owner in &owners {
        let kinds = protected_kinds(&mut rng);
        sc.actions.push(Action::CreateDomain { peer: owner.clone(), name: "vault".into() });
        for &k in &kinds {
            sc.actions.push(Action::AddProperty { peer: owner.clone(), domain: "vault".into(), property: k.into() });
        }
        sc.actions.push(Action::AddResource { peer: owner.clone(), path: format!("doc_{owner}"), domain: "vault".into() });
        for d in &delegates {
            let trust = f64::from(rng.gen_range(50..=100_u32)) / 100.0;
            sc.actions.push(Action::Knows { peer: owner.clone(), other: d.clone(), trust });
        }
        protected.push(kinds);
    }

    for (name, behavior) in &requesters {
        for (owner, kinds) in owners.iter().zip(&protected) {
            let domain = format!("vault_{owner}");
            sc.actions.push(Action::CreateDomain { peer: name.clone(), name: domain.clone() });
            let actual: Vec<PropertyKind> = match behavior {
                Behavior::Honest | Behavior::LogForger => kinds.clone(),
                Behavior::BlindLiar | Behavior::InformedLiar => vec![PropertyKind::Spread],
            };
            for k in actual {
                let property = SecurityProperty::new(k);
                sc.actions.push(Action::AddProperty { peer: name.clone(), domain: domain.clone(), property });
            }
        }
    }

    requesters.shuffle(&mut rng);
    for (name, _) in &requesters {
        for owner in &owners {
            sc.actions.push(Action::Ask {
                requester: name.clone(),
                owner: owner.clone(),
                resource: format!("doc_{owner}"),
                domain: format!("vault_{owner}"),
            });
        }
    }
    sc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehaviorMetrics {
    pub behavior: Behavior,
    pub negotiations: usize,
    pub accepted: usize,
    pub refused: usize,
    pub forged_records: usize,
    pub forged_flagged: usize,
}

impl BehaviorMetrics {
    /// Detection rate for liars, false-refusal rate for honest peers.
    pub fn refusal_rate(&self) -> Option<f64> {
        (self.negotiations > 0).then(|| self.refused as f64 / self.negotiations as f64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub runs: usize,
    pub per_behavior: Vec<BehaviorMetrics>,
    pub reports: Vec<RunReport>,
}

impl DetectionReport {
    pub fn behavior(&self, b: Behavior) -> &BehaviorMetrics {
        self.per_behavior.iter().find(|m| m.behavior == b).expect("every behavior is tabulated")
    }

    pub fn render(&self) -> String {
        let mut out = format!("runs={}\n", self.runs);
        out.push_str("behavior       negotiations  accepted  refused  refusal_rate  forged  flagged\n");
        for m in &self.per_behavior {
            let rate = m.refusal_rate().map_or_else(|| "n/a".to_string(), |r| format!("{r:.3}"));
            let _ = writeln!(
                out,
                "{:<14} {:>12}  {:>8}  {:>7}  {:>12}  {:>6}  {:>7}",
                m.behavior.as_str(),
                m.negotiations,
                m.accepted,
                m.refused,
                rate,
                m.forged_records,
                m.forged_flagged
            );
        }
        out
    }
}

/// Runs `runs` generated populations (in parallel; each run is independent
/// and deterministic) and tabulates outcomes per requester behavior.
pub fn detection_experiment(params: &PopulationParams, runs: usize) -> Result<DetectionReport, SimError> {
    if runs == 0 {
        return Err(SimError::NoRuns);
    }
    let reports = (0..runs as u64)
        .into_par_iter()
        .map(|i| run_scenario(&generate_population(params, params.seed.wrapping_add(i))))
        .collect::<Result<Vec<_>, _>>()?;

    let per_behavior = Behavior::ALL
        .into_iter()
        .map(|behavior| {
            let mut m = BehaviorMetrics { behavior, negotiations: 0, accepted: 0, refused: 0, forged_records: 0, forged_flagged: 0 };
            for n in reports.iter().flat_map(|r| &r.negotiations).filter(|n| n.found && n.requester_behavior == behavior) {
                m.negotiations += 1;
                match n.outcome {
                    Outcome::Accepted => m.accepted += 1,
                    Outcome::Refused => m.refused += 1,
                    Outcome::Pending => {}
                }
                m.forged_records += n.forged_records;
                m.forged_flagged += n.forged_flagged;
            }
            m
        })
        .collect();
    Ok(DetectionReport { runs, per_behavior, reports })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_scenarios_validate_and_are_seeded() {
        let p = PopulationParams::default();
        let a = generate_population(&p, 5);
        a.validate().unwrap();
        assert_eq!(a, generate_population(&p, 5));
        assert_eq!(a.peers.len(), 2 + 2 + 2 + 1 + 1 + 1);
        let asks = a.actions.iter().filter(|x| matches!(x, Action::Ask { .. })).count();
        assert_eq!(asks, 5 * 2);
    }

    #[test]
    fn zero_runs_is_an_error() {
        assert_eq!(detection_experiment(&PopulationParams::default(), 0), Err(SimError::NoRuns));
    }

    #[test]
    fn small_experiment() {
        let r = detection_experiment(&PopulationParams::default(), 4).unwrap();
        assert_eq!(r.behavior(Behavior::Honest).refused, 0);
        assert_eq!(r.behavior(Behavior::InformedLiar).accepted, 0);
        let f = r.behavior(Behavior::LogForger);
        assert!(f.forged_records > 0);
        assert_eq!(f.forged_records, f.forged_flagged);
    }
}
