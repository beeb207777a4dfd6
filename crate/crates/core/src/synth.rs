//! Synthetic policies for benchmarks and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::policy::{PeerPolicy, PropertyKind, Scope};

/// A conflict-free policy with `domains` domains named `dom<i>`, each
/// holding `files_per_domain` resources and one or two properties drawn from
/// a compatible group. Same arguments, same policy.
pub fn synthetic_policy(domains: usize, files_per_domain: usize, seed: u64) -> PeerPolicy {
    use PropertyKind::*;
    // groups of mutually compatible kinds
    const GROUPS: [&[PropertyKind]; 4] =
        [&[Confidentiality, Integrity, NoPublication], &[NoShare, Integrity], &[Cooperation, Spread, Integrity], &[Spread, NoPublication]];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut policy = PeerPolicy::new("synthetic");
    for i in 0..domains {
        let d = policy.create_domain(&format!("dom{i}")).expect("names are unique");
        let group = GROUPS[rng.gen_range(0..GROUPS.len())];
        let first = rng.gen_range(0..group.len());
        let mut kinds = vec![group[first]];
        if rng.gen_bool(0.5) {
            kinds.push(group[(first + 1) % group.len()]);
        }
        for k in kinds {
            policy.add_property(Scope::Domain(d), k.into()).expect("group members are compatible");
        }
        for j in 0..files_per_domain {
            policy.add_resource(&format!("/srv/dom{i}/file{j}"), d).expect("paths are unique");
        }
    }
    policy
}
