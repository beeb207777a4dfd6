use proptest::prelude::*;

use p2pmac_core::mac::{parse_avc, AvcRecord, Decision, SecurityContext};
use p2pmac_core::policy::{locally_conflicting, PropertyKind};
use p2pmac_core::simnet::{generate_population, PopulationParams};
use p2pmac_core::synth::synthetic_policy;
use p2pmac_core::{conflicts, run_scenario, DomainRef, PeerPolicy, Scope, SecurityProperty};

fn kind() -> impl Strategy<Value = PropertyKind> {
    prop::sample::select(PropertyKind::ALL.to_vec())
}

fn context() -> impl Strategy<Value = SecurityContext> {
    ("[a-z]{1,6}_u", "[a-z]{1,6}_r", "[a-zA-Z]{1,8}_t").prop_map(|(u, r, t)| SecurityContext::new(&u, &r, &t).unwrap())
}

fn avc_record() -> impl Strategy<Value = AvcRecord> {
    (
        (1_000_000_000u64..2_000_000_000, 0u32..1000, 1u64..100_000),
        prop::bool::ANY,
        prop::sample::subsequence(vec!["read", "write", "create", "append", "setattr"], 1..3),
        (1u32..65_536, "[a-z]{1,8}", "[a-z0-9_]{1,8}\\.[a-z]{1,3}", 1u64..10_000_000),
        (context(), context()),
    )
        .prop_map(|((secs, millis, serial), denied, perms, (pid, comm, name, ino), (s, t))| AvcRecord {
            timestamp: format!("{secs}.{millis:03}"),
            serial: serial.to_string(),
            decision: if denied { Decision::Denied } else { Decision::Granted },
            permissions: perms.into_iter().map(String::from).collect(),
            pid,
            comm,
            name,
            dev: "sda3".into(),
            ino,
            scontext: s,
            tcontext: t,
            tclass: "file".into(),
        })
}

proptest! {
    #[test]
    fn kind_conflicts_are_symmetric(a in kind(), b in kind()) {
        prop_assert_eq!(conflicts(a, b), conflicts(b, a));
    }

    #[test]
    fn scoped_exceptions_never_conflict_locally(a in kind(), b in kind(), t in 1u32..50) {
        let scoped = |k: PropertyKind| SecurityProperty::with_targets(k, [DomainRef::External(t.to_string())]).unwrap();
        let plain = SecurityProperty::new(b);
        if a.accepts_targets() {
            let exceptional = matches!(a, PropertyKind::Confidentiality | PropertyKind::Cooperation);
            prop_assert_eq!(locally_conflicting(&scoped(a), &plain), !exceptional && conflicts(a, b));
        }
    }

    #[test]
    fn avc_render_parse(record in avc_record()) {
        let line = record.to_string();
        prop_assert_eq!(parse_avc(&line).unwrap(), record);
    }

    #[test]
    fn adding_properties_keeps_policy_conflict_free(kinds in prop::collection::vec(kind(), 0..12)) {
        let mut p = PeerPolicy::new("A");
        let d = p.create_domain("d").unwrap();
        for k in kinds {
            let _ = p.add_property(Scope::Domain(d), k.into());
        }
        prop_assert!(p.conflicts().is_empty());
    }

    #[test]
    fn synthetic_policies_are_conflict_free(n in 1usize..60, seed in any::<u64>()) {
        prop_assert!(synthetic_policy(n, 1, seed).conflicts().is_empty());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn runs_are_deterministic(seed in any::<u64>()) {
        let sc = generate_population(&PopulationParams::default(), seed);
        let a = run_scenario(&sc).unwrap();
        let b = run_scenario(&sc).unwrap();
        prop_assert_eq!(a.render(), b.render());
        prop_assert_eq!(a, b);
    }
}
