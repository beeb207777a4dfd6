//! Compatibility relation between property kinds.

use super::{PropertyKind, SecurityProperty};

/// Symmetric 6x6 conflict relation, indexed by [`PropertyKind::index`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConflictMatrix {
    cells: [[bool; 6]; 6],
}

impl ConflictMatrix {
    /// The relation used throughout the crate: confidentiality and no-share
    /// each conflict with spread and with cooperation, nothing else does.
    pub const STANDARD: ConflictMatrix = {
        use PropertyKind::*;
        let mut cells = [[false; 6]; 6];
        let pairs = [
            (Confidentiality, Spread),
            (Confidentiality, Cooperation),
            (NoShare, Spread),
            (NoShare, Cooperation),
        ];
        let mut i = 0;
        while i < pairs.len() {
            let (a, b) = pairs[i];
            cells[a as usize][b as usize] = true;
            cells[b as usize][a as usize] = true;
            i += 1;
        }
        ConflictMatrix { cells }
    };

    pub fn get(&self, a: PropertyKind, b: PropertyKind) -> bool {
        self.cells[a.index()][b.index()]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..6).all(|i| (0..6).all(|j| self.cells[i][j] == self.cells[j][i]))
    }

    /// Ordered pairs `(a, b)` for which the relation holds.
    pub fn conflicting_pairs(&self) -> Vec<(PropertyKind, PropertyKind)> {
        PropertyKind::ALL
            .iter()
            .flat_map(|&a| PropertyKind::ALL.iter().map(move |&b| (a, b)))
            .filter(|&(a, b)| self.get(a, b))
            .collect()
    }
}

/// Kind-level conflict test.
pub fn conflicts(a: PropertyKind, b: PropertyKind) -> bool {
    ConflictMatrix::STANDARD.get(a, b)
}

/// Conflict test for two properties living in the same local policy.
///
/// A confidentiality or cooperation property with explicit target domains is
/// an intentional scoped exception and never conflicts with a co-resident
/// opposite kind. Unscoped pairs fall back to the kind-level relation.
pub fn locally_conflicting(a: &SecurityProperty, b: &SecurityProperty) -> bool {
    conflicts(a.kind, b.kind) && !a.is_scoped_exception() && !b.is_scoped_exception()
}

/// Every `(required, offered)` pair that conflicts under the local rule
/// (kind-level relation plus the scoped exception). Empty means compatible.
pub fn property_set_conflicts<'a>(
    required: &'a [SecurityProperty],
    offered: &'a [SecurityProperty],
) -> Vec<(&'a SecurityProperty, &'a SecurityProperty)> {
    pairs_where(required, offered, locally_conflicting)
}

/// Every `(required, offered)` pair whose kinds conflict, ignoring target
/// scoping. Used for cross-peer checks where local exceptions do not apply.
pub fn kind_level_conflicts<'a>(
    required: &'a [SecurityProperty],
    offered: &'a [SecurityProperty],
) -> Vec<(&'a SecurityProperty, &'a SecurityProperty)> {
    pairs_where(required, offered, |r, o| conflicts(r.kind, o.kind))
}

fn pairs_where<'a>(
    left: &'a [SecurityProperty],
    right: &'a [SecurityProperty],
    pred: impl Fn(&SecurityProperty, &SecurityProperty) -> bool,
) -> Vec<(&'a SecurityProperty, &'a SecurityProperty)> {
    left.iter()
        .flat_map(|l| right.iter().map(move |r| (l, r)))
        .filter(|(l, r)| pred(l, r))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::DomainRef;
    use PropertyKind::*;

    #[test]
    fn table_examples() {
        assert!(conflicts(Confidentiality, Spread));
        assert!(!conflicts(Integrity, Integrity));
        assert!(conflicts(NoShare, Cooperation));
        assert!(!conflicts(NoPublication, Spread));
    }

    #[test]
    fn eight_ordered_pairs() {
        let m = ConflictMatrix::STANDARD;
        assert!(m.is_symmetric());
        assert_eq!(m.conflicting_pairs().len(), 8);
    }

    #[test]
    fn empty_required_never_conflicts() {
        let offered = vec![SecurityProperty::new(Spread), SecurityProperty::new(Cooperation)];
        assert!(property_set_conflicts(&[], &offered).is_empty());
    }

    #[test]
    fn confidentiality_against_spread() {
        let req = vec![SecurityProperty::new(Confidentiality)];
        let off = vec![SecurityProperty::new(Spread)];
        let pairs = property_set_conflicts(&req, &off);
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].0.kind, pairs[0].1.kind), (Confidentiality, Spread));
    }

    #[test]
    fn cooperation_and_spread_are_compatible() {
        let req = vec![SecurityProperty::new(Cooperation)];
        let off = vec![SecurityProperty::new(Spread)];
        assert!(property_set_conflicts(&req, &off).is_empty());
    }

    #[test]
    fn scoped_cooperation_is_whitelisted_locally_only() {
        let conf = SecurityProperty::new(Confidentiality);
        let coop = SecurityProperty::with_targets(
            Cooperation,
            [DomainRef::External("private_company_B".into())],
        )
        .unwrap();
        assert!(!locally_conflicting(&conf, &coop));
        let req = [conf];
        let off = [coop];
        assert!(property_set_conflicts(&req, &off).is_empty());
        assert_eq!(kind_level_conflicts(&req, &off).len(), 1);
    }
}
