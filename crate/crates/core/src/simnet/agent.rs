use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::mac::{
    check_access, compile_policy, probe_for_command, sanitize_label, AvcRecord, ChallengeRequest, CompiledPolicy,
    MacRuleSet, ObjectClass, SecurityContext,
};
use crate::negotiation::{PeerId, PolicySlice};
use crate::policy::{conflicts, PeerPolicy, PropertyKind, SecurityProperty};
use crate::trust::{HistoryRecord, TrustLedger};

use super::Behavior;

/// A simulated peer.
#[derive(Debug, Clone)]
pub struct PeerAgent {
    pub id: PeerId,
    pub behavior: Behavior,
    policy: PeerPolicy,
    pub ledger: TrustLedger,
    compiled_mac: CompiledPolicy,
    rng: ChaCha8Rng,
    ghosts: u64,
}

impl PeerAgent {
    pub fn new(id: PeerId, behavior: Behavior, seed: u64) -> Self {
        let policy = PeerPolicy::new(id.name.clone());
        let compiled_mac = compile_policy(&policy);
        // each agent gets its own stream so adding a peer does not perturb others
        let rng = ChaCha8Rng::seed_from_u64(seed ^ u64::from(id.id).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        PeerAgent { id, behavior, policy, ledger: TrustLedger::new(), compiled_mac, rng, ghosts: 0 }
    }

    pub fn policy(&self) -> &PeerPolicy {
        &self.policy
    }

    pub fn compiled_mac(&self) -> &CompiledPolicy {
        &self.compiled_mac
    }

    /// Applies a policy change and recompiles the MAC rules.
    pub fn update_policy<T, E>(&mut self, f: impl FnOnce(&mut PeerPolicy) -> Result<T, E>) -> Result<T, E> {
        let out = f(&mut self.policy);
        if out.is_ok() {
            self.compiled_mac = compile_policy(&self.policy);
        }
        out
    }

    fn actual_slice(&self, domain_name: &str) -> PolicySlice {
        PolicySlice::of(&self.policy, domain_name).unwrap_or_else(|| PolicySlice::new(domain_name, Vec::new()))
    }

    /// The slice this peer discloses for `domain_name`. `required` is what
    /// the owner is protecting; only an informed liar gets to look at it.
    pub fn answer_slice(&mut self, domain_name: &str, required: &[SecurityProperty]) -> PolicySlice {
        match self.behavior {
            Behavior::Honest | Behavior::LogForger => self.actual_slice(domain_name),
            Behavior::InformedLiar => PolicySlice::new(domain_name, required.to_vec()),
            Behavior::BlindLiar => {
                let mut kinds = PropertyKind::ALL.to_vec();
                kinds.shuffle(&mut self.rng);
                let n = self.rng.gen_range(1..=kinds.len());
                kinds.truncate(n);
                kinds.sort();
                PolicySlice::new(domain_name, kinds.into_iter().map(SecurityProperty::new).collect())
            }
        }
    }

    /// Whether this peer accepts an offer to store a resource that carries
    /// `required` in `domain_name`. A fair peer refuses if that clashes with
    /// the domain's properties; liars take anything.
    pub fn answer_conflicting_probe(&self, domain_name: &str, required: &SecurityProperty) -> bool {
        match self.behavior {
            Behavior::Honest | Behavior::LogForger => {
                !self.actual_slice(domain_name).kinds().any(|k| conflicts(k, required.kind))
            }
            Behavior::BlindLiar | Behavior::InformedLiar => true,
        }
    }

    /// Runs the challenged command against the rules for `domain_name` and
    /// reports the audit record. Liars enforce nothing.
    pub fn answer_mac_challenge(&self, request: &ChallengeRequest, domain_name: &str, tick: u64, serial: u64) -> Vec<AvcRecord> {
        let Some(probe) = probe_for_command(&request.command_stub) else {
            return Vec::new();
        };
        let compiled = self.compiled_mac.domain_by_name(domain_name);
        let label = compiled.map_or_else(|| sanitize_label(domain_name), |d| d.label.clone());
        let ruleset = match (self.behavior, compiled) {
            (Behavior::Honest | Behavior::LogForger, Some(d)) => d.ruleset,
            _ => MacRuleSet::default(),
        };
        let Ok(decision) = check_access(&ruleset, ObjectClass::File, probe.permission()) else {
            return Vec::new();
        };
        vec![AvcRecord {
            timestamp: format!("{tick}.000"),
            serial: serial.to_string(),
            decision,
            permissions: vec![probe.permission().to_string()],
            pid: 4000 + (serial % 60_000) as u32,
            comm: request.command_stub.split_whitespace().next().unwrap_or("").to_string(),
            name: request.target_name().to_string(),
            dev: "sda3".to_string(),
            ino: inode(&request.target_path),
            scontext: request.scontext.clone(),
            tcontext: SecurityContext::object(&label),
            tclass: ObjectClass::File.to_string(),
        }]
    }

    /// The log this peer shows when asked about its past. A log forger adds
    /// one clean record per kind, each naming a peer that does not exist.
    /// Returns the records and the positions of the forged ones.
    pub fn present_history(&mut self, kinds: &[PropertyKind], now: u64) -> (Vec<HistoryRecord>, Vec<usize>) {
        let mut records: Vec<HistoryRecord> =
            self.ledger.history.iter().filter(|r| r.actor == self.id).cloned().collect();
        let mut forged = Vec::new();
        if self.behavior == Behavior::LogForger {
            for &kind in kinds {
                self.ghosts += 1;
                forged.push(records.len());
                records.push(HistoryRecord {
                    txn: Some(self.rng.gen()),
                    timestamp: now.saturating_sub(1),
                    actor: self.id.clone(),
                    counterparty: Some(PeerId::new(u32::MAX - self.ghosts as u32, format!("ghost-{}", self.ghosts))),
                    property_kind: kind,
                    action: "received resource".to_string(),
                    violation: false,
                    mac_trace: None,
                });
            }
        }
        (records, forged)
    }
}

/// Stable fake inode number for a path.
fn inode(path: &str) -> u64 {
    // FNV-1a, folded into a plausible range
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in path.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    100_000 + h % 900_000
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mac::Decision;
    use crate::policy::Scope;
    use PropertyKind::*;

    fn agent(behavior: Behavior) -> PeerAgent {
        let mut a = PeerAgent::new(PeerId::new(2, "David"), behavior, 1);
        a.update_policy(|p| -> Result<_, crate::policy::PolicyError> {
            let d = p.create_domain("vault")?;
            p.add_property(Scope::Domain(d), Confidentiality.into())
        })
        .unwrap();
        a
    }

    fn request() -> ChallengeRequest {
        ChallengeRequest::parse("scontext=user_u:user_r:user_t vim /srv/vault/probe.dat").unwrap()
    }

    #[test]
    fn honest_enforces_its_rules() {
        let a = agent(Behavior::Honest);
        assert!(!a.answer_conflicting_probe("vault", &Spread.into()));
        assert!(a.answer_conflicting_probe("vault", &Integrity.into()));
        let trace = a.answer_mac_challenge(&request(), "vault", 5, 1);
        assert_eq!(trace[0].decision, Decision::Denied);
        assert_eq!(trace[0].tcontext.type_name, "vault_t");
        assert_eq!(trace[0].name, "probe.dat");
    }

    #[test]
    fn liars_accept_and_grant() {
        let mut a = agent(Behavior::InformedLiar);
        assert!(a.answer_conflicting_probe("vault", &Spread.into()));
        assert_eq!(a.answer_mac_challenge(&request(), "vault", 5, 1)[0].decision, Decision::Granted);
        let s = a.answer_slice("other", &[NoShare.into()]);
        assert_eq!(s.domain_name, "other");
        assert_eq!(s.properties, vec![NoShare.into()]);
    }

    #[test]
    fn blind_liar_claims_something() {
        let mut a = agent(Behavior::BlindLiar);
        for _ in 0..20 {
            let s = a.answer_slice("vault", &[]);
            assert!(!s.properties.is_empty());
            assert_eq!(s.domain_name, "vault");
        }
    }

    #[test]
    fn forger_pads_history() {
        let mut a = agent(Behavior::LogForger);
        let (records, forged) = a.present_history(&[Integrity, Confidentiality], 10);
        assert_eq!(forged, [0, 1]);
        assert!(records.iter().all(|r| r.counterparty.as_ref().unwrap().name.starts_with("ghost-")));
        let mut h = agent(Behavior::Honest);
        assert_eq!(h.present_history(&[Integrity], 10), (vec![], vec![]));
    }
}
