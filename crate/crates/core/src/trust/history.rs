use std::fmt;

use crate::mac::AvcRecord;
use crate::negotiation::PeerId;
use crate::policy::PropertyKind;

/// One entry of a peer's operation log.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryRecord {
    /// Shared transaction number; the counterparty's log holds the mirror entry.
    pub txn: Option<u64>,
    pub timestamp: u64,
    pub actor: PeerId,
    pub counterparty: Option<PeerId>,
    pub property_kind: PropertyKind,
    pub action: String,
    pub violation: bool,
    pub mac_trace: Option<AvcRecord>,
}

/// History code for one `(peer, kind)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HistoryScore {
    /// A violation falls inside the window.
    ViolatedRecently,
    /// The latest violation is older than the window.
    ViolatedBefore,
    /// Records exist and none is a violation.
    Clean,
    NoData,
}

impl HistoryScore {
    /// Numeric code: -1, -2, 1, and 2 for no data.
    pub fn code(self) -> i8 {
        match self {
            HistoryScore::ViolatedRecently => -1,
            HistoryScore::ViolatedBefore => -2,
            HistoryScore::Clean => 1,
            HistoryScore::NoData => 2,
        }
    }
}

impl fmt::Display for HistoryScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.code())
    }
}

/// Scores `target`'s records for `kind` against the window `[now - window, now]`.
/// Records stamped after `now` are ignored.
pub fn eval_history(
    records: &[HistoryRecord],
    target: &PeerId,
    kind: PropertyKind,
    now: u64,
    window: u64,
) -> HistoryScore {
    let relevant = records
        .iter()
        .filter(|r| &r.actor == target && r.property_kind == kind && r.timestamp <= now);
    let mut any = false;
    let mut latest_violation: Option<u64> = None;
    for r in relevant {
        any = true;
        if r.violation {
            latest_violation = Some(latest_violation.map_or(r.timestamp, |t| t.max(r.timestamp)));
        }
    }
    match latest_violation {
        Some(t) if now - t <= window => HistoryScore::ViolatedRecently,
        Some(_) => HistoryScore::ViolatedBefore,
        None if any => HistoryScore::Clean,
        None => HistoryScore::NoData,
    }
}

/// Lookups needed to cross-reference a presented log.
pub trait HistoryDirectory {
    fn peer_exists(&self, peer: &PeerId) -> bool;
    /// Whether `counterparty`'s own log holds transaction `txn` with `actor`.
    fn confirms(&self, counterparty: &PeerId, txn: u64, actor: &PeerId) -> bool;
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryAudit {
    /// The presented records, with unverifiable ones turned into violations.
    pub records: Vec<HistoryRecord>,
    /// Indices into `records` that failed cross-referencing.
    pub flagged: Vec<usize>,
}

/// Checks every record that names a counterparty against that
/// counterparty's log. Records that cannot be confirmed are flagged and
/// count as violations from then on.
pub fn audit_history(records: &[HistoryRecord], directory: &impl HistoryDirectory) -> HistoryAudit {
    let mut out = Vec::with_capacity(records.len());
    let mut flagged = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let mut r = r.clone();
        if let Some(cp) = &r.counterparty {
            let confirmed = directory.peer_exists(cp) && r.txn.is_some_and(|t| directory.confirms(cp, t, &r.actor));
            if !confirmed {
                flagged.push(i);
                r.violation = true;
                r.action = format!("unverifiable: {}", r.action);
            }
        }
        out.push(r);
    }
    HistoryAudit { records: out, flagged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PropertyKind::*;

    fn peer(id: u32) -> PeerId {
        PeerId::new(id, format!("p{id}"))
    }

    fn rec(ts: u64, kind: PropertyKind, violation: bool) -> HistoryRecord {
        HistoryRecord {
            txn: None,
            timestamp: ts,
            actor: peer(1),
            counterparty: None,
            property_kind: kind,
            action: "op".into(),
            violation,
            mac_trace: None,
        }
    }

    #[test]
    fn window_examples() {
        assert_eq!(eval_history(&[rec(99, Integrity, true)], &peer(1), Integrity, 100, 10), HistoryScore::ViolatedRecently);
        assert_eq!(eval_history(&[rec(0, Integrity, true)], &peer(1), Integrity, 100, 10), HistoryScore::ViolatedBefore);
        assert_eq!(eval_history(&[], &peer(1), Integrity, 100, 10), HistoryScore::NoData);
        assert_eq!(
            eval_history(&[rec(5, Integrity, false), rec(50, Integrity, false)], &peer(1), Integrity, 100, 10),
            HistoryScore::Clean
        );
    }

    #[test]
    fn window_boundary_is_inclusive() {
        assert_eq!(eval_history(&[rec(90, Spread, true)], &peer(1), Spread, 100, 10), HistoryScore::ViolatedRecently);
        assert_eq!(eval_history(&[rec(89, Spread, true)], &peer(1), Spread, 100, 10), HistoryScore::ViolatedBefore);
    }

    #[test]
    fn filters_by_actor_and_kind() {
        let records = [rec(99, Integrity, true)];
        assert_eq!(eval_history(&records, &peer(2), Integrity, 100, 10), HistoryScore::NoData);
        assert_eq!(eval_history(&records, &peer(1), Spread, 100, 10), HistoryScore::NoData);
    }

    #[test]
    fn codes() {
        assert_eq!(HistoryScore::ViolatedRecently.code(), -1);
        assert_eq!(HistoryScore::ViolatedBefore.code(), -2);
        assert_eq!(HistoryScore::Clean.code(), 1);
        assert_eq!(HistoryScore::NoData.to_string(), "2");
    }

    struct Dir;
    impl HistoryDirectory for Dir {
        fn peer_exists(&self, p: &PeerId) -> bool {
            p.id < 10
        }
        fn confirms(&self, _cp: &PeerId, txn: u64, _actor: &PeerId) -> bool {
            txn == 7
        }
    }

    #[test]
    fn audit_flags_unconfirmed_records() {
        let mut genuine = rec(1, Integrity, false);
        genuine.counterparty = Some(peer(2));
        genuine.txn = Some(7);
        let mut ghost = genuine.clone();
        ghost.counterparty = Some(peer(42));
        let mut wrong_txn = genuine.clone();
        wrong_txn.txn = Some(8);
        let local = rec(1, Integrity, false);
        let audit = audit_history(&[genuine, ghost, wrong_txn, local], &Dir);
        assert_eq!(audit.flagged, [1, 2]);
        assert!(!audit.records[0].violation);
        assert!(audit.records[1].violation && audit.records[2].violation);
        assert!(!audit.records[3].violation);
    }
}
