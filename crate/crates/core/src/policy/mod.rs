//! The security language: domains, resources and the six property kinds.
//!
//! A [`PeerPolicy`] groups resources into named domains. Properties attach
//! either to a domain (covering every resource in it) or to a single
//! resource. Every mutation checks the conflict relation first and leaves
//! the policy untouched when it refuses.

mod conflict;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

pub use conflict::{
    conflicts, kind_level_conflicts, locally_conflicting, property_set_conflicts, ConflictMatrix,
};

/// The six property kinds. The first four are prohibitions, the last two
/// permissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PropertyKind {
    Confidentiality,
    Integrity,
    NoShare,
    NoPublication,
    Cooperation,
    Spread,
}

impl PropertyKind {
    pub const ALL: [PropertyKind; 6] = [
        PropertyKind::Confidentiality,
        PropertyKind::Integrity,
        PropertyKind::NoShare,
        PropertyKind::NoPublication,
        PropertyKind::Cooperation,
        PropertyKind::Spread,
    ];

    pub const fn index(self) -> usize {
        self as usize
    }

    pub fn is_prohibition(self) -> bool {
        !self.is_permission()
    }

    pub fn is_permission(self) -> bool {
        matches!(self, PropertyKind::Cooperation | PropertyKind::Spread)
    }

    /// Only the two-argument forms (confidentiality(d1,d2), cooperation(x,d2))
    /// carry target domains.
    pub fn accepts_targets(self) -> bool {
        matches!(self, PropertyKind::Confidentiality | PropertyKind::Cooperation)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PropertyKind::Confidentiality => "confidentiality",
            PropertyKind::Integrity => "integrity",
            PropertyKind::NoShare => "noshare",
            PropertyKind::NoPublication => "nopublication",
            PropertyKind::Cooperation => "cooperation",
            PropertyKind::Spread => "spread",
        }
    }
}

impl fmt::Display for PropertyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown property kind `{0}`")]
pub struct UnknownKind(pub String);

impl FromStr for PropertyKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PropertyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DomainId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ResourceId(pub u32);

impl fmt::Display for DomainId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ResourceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Target of a scoped property. Local references point into the same
/// policy; external ones name a domain this policy does not declare (another
/// peer's domain, or an id from an imported document).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DomainRef {
    Local(DomainId),
    External(String),
}

/// Where a property is attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    Domain(DomainId),
    Resource(ResourceId),
}

/// A property kind plus its (possibly empty) target set. Two properties are
/// the same property iff kind and targets are equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SecurityProperty {
    pub kind: PropertyKind,
    targets: BTreeSet<DomainRef>,
}

impl SecurityProperty {
    pub fn new(kind: PropertyKind) -> Self {
        SecurityProperty { kind, targets: BTreeSet::new() }
    }

    pub fn with_targets(
        kind: PropertyKind,
        targets: impl IntoIterator<Item = DomainRef>,
    ) -> Result<Self, PolicyError> {
        let targets: BTreeSet<_> = targets.into_iter().collect();
        if !targets.is_empty() && !kind.accepts_targets() {
            return Err(PolicyError::TargetsNotAllowed(kind));
        }
        Ok(SecurityProperty { kind, targets })
    }

    pub fn targets(&self) -> &BTreeSet<DomainRef> {
        &self.targets
    }

    pub fn is_scoped_exception(&self) -> bool {
        self.kind.accepts_targets() && !self.targets.is_empty()
    }
}

/// `kind` or `kind(t1,t2)`; local targets print as `#id`.
impl fmt::Display for SecurityProperty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if self.targets.is_empty() {
            return Ok(());
        }
        f.write_str("(")?;
        for (i, t) in self.targets.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            match t {
                DomainRef::Local(id) => write!(f, "#{id}")?,
                DomainRef::External(name) => f.write_str(name)?,
            }
        }
        f.write_str(")")
    }
}

impl From<PropertyKind> for SecurityProperty {
    fn from(kind: PropertyKind) -> Self {
        SecurityProperty::new(kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Domain {
    pub id: DomainId,
    pub name: String,
    pub properties: Vec<SecurityProperty>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resource {
    pub id: ResourceId,
    pub path: String,
    pub domain: DomainId,
    pub properties: Vec<SecurityProperty>,
}

/// Pairs that blocked a mutation, `(incoming, existing)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictReport {
    pub pairs: Vec<(SecurityProperty, SecurityProperty)>,
}

impl fmt::Display for ConflictReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (a, b)) in self.pairs.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{} x {}", a.kind, b.kind)?;
        }
        Ok(())
    }
}

/// A conflicting pair found while scanning a whole policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyConflict {
    pub domain: DomainId,
    /// Set when one side of the pair is a resource-level property.
    pub resource: Option<ResourceId>,
    pub first: SecurityProperty,
    pub second: SecurityProperty,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("domain name must not be empty")]
    EmptyName,
    #[error("resource path must not be empty")]
    EmptyPath,
    #[error("domain `{0}` already exists")]
    DuplicateDomain(String),
    #[error("resource `{0}` already exists")]
    DuplicateResource(String),
    #[error("id {0} is already in use")]
    DuplicateId(u32),
    #[error("unknown domain {0}")]
    UnknownDomain(DomainId),
    #[error("unknown resource {0}")]
    UnknownResource(ResourceId),
    #[error("{0} does not take target domains")]
    TargetsNotAllowed(PropertyKind),
    #[error("{0} cannot be attached to a resource")]
    InvalidScope(PropertyKind),
    #[error("domain `{0}` forbids publication")]
    PublicationForbidden(String),
    #[error("conflicting properties: {0}")]
    Conflict(ConflictReport),
}

/// Result of a successful [`PeerPolicy::add_property`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Attach {
    Attached,
    /// Already effective at that scope; nothing changed.
    AlreadyImplied,
}

/// A peer's domains and resources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerPolicy {
    peer_id: String,
    domains: Vec<Domain>,
    resources: Vec<Resource>,
    next_id: u32,
}

impl PeerPolicy {
    pub fn new(peer_id: impl Into<String>) -> Self {
        PeerPolicy { peer_id: peer_id.into(), domains: Vec::new(), resources: Vec::new(), next_id: 1 }
    }

    pub fn peer_id(&self) -> &str {
        &self.peer_id
    }

    pub fn domains(&self) -> &[Domain] {
        &self.domains
    }

    pub fn resources(&self) -> &[Resource] {
        &self.resources
    }

    pub fn is_empty(&self) -> bool {
        self.domains.is_empty() && self.resources.is_empty()
    }

    pub fn domain(&self, id: DomainId) -> Option<&Domain> {
        self.domains.iter().find(|d| d.id == id)
    }

    pub fn domain_by_name(&self, name: &str) -> Option<&Domain> {
        self.domains.iter().find(|d| d.name == name)
    }

    pub fn resource(&self, id: ResourceId) -> Option<&Resource> {
        self.resources.iter().find(|r| r.id == id)
    }

    pub fn resource_by_path(&self, path: &str) -> Option<&Resource> {
        self.resources.iter().find(|r| r.path == path)
    }

    pub fn resources_in(&self, domain: DomainId) -> impl Iterator<Item = &Resource> {
        self.resources.iter().filter(move |r| r.domain == domain)
    }

    fn domain_mut(&mut self, id: DomainId) -> Result<&mut Domain, PolicyError> {
        self.domains.iter_mut().find(|d| d.id == id).ok_or(PolicyError::UnknownDomain(id))
    }

    fn resource_mut(&mut self, id: ResourceId) -> Result<&mut Resource, PolicyError> {
        self.resources.iter_mut().find(|r| r.id == id).ok_or(PolicyError::UnknownResource(id))
    }

    fn fresh_id(&mut self) -> u32 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }

    fn id_in_use(&self, id: u32) -> bool {
        self.domains.iter().any(|d| d.id.0 == id) || self.resources.iter().any(|r| r.id.0 == id)
    }

    pub fn create_domain(&mut self, name: &str) -> Result<DomainId, PolicyError> {
        if name.is_empty() {
            return Err(PolicyError::EmptyName);
        }
        if self.domain_by_name(name).is_some() {
            return Err(PolicyError::DuplicateDomain(name.to_string()));
        }
        let id = DomainId(self.fresh_id());
        self.domains.push(Domain { id, name: name.to_string(), properties: Vec::new() });
        Ok(id)
    }

    /// Removes the domain together with every resource it owns. Scoped
    /// properties elsewhere that targeted it keep the target by name.
    pub fn delete_domain(&mut self, id: DomainId) -> Result<Domain, PolicyError> {
        let pos = self
            .domains
            .iter()
            .position(|d| d.id == id)
            .ok_or(PolicyError::UnknownDomain(id))?;
        let removed = self.domains.remove(pos);
        self.resources.retain(|r| r.domain != id);

        let local = DomainRef::Local(id);
        let renamed = DomainRef::External(removed.name.clone());
        let retarget = |props: &mut Vec<SecurityProperty>| {
            for p in props.iter_mut() {
                if p.targets.remove(&local) {
                    p.targets.insert(renamed.clone());
                }
            }
        };
        for d in &mut self.domains {
            retarget(&mut d.properties);
        }
        for r in &mut self.resources {
            retarget(&mut r.properties);
        }
        Ok(removed)
    }

    pub fn remove_resource(&mut self, id: ResourceId) -> Result<Resource, PolicyError> {
        let pos = self
            .resources
            .iter()
            .position(|r| r.id == id)
            .ok_or(PolicyError::UnknownResource(id))?;
        Ok(self.resources.remove(pos))
    }

    /// Adds a property-free resource to a domain.
    pub fn add_resource(&mut self, path: &str, domain: DomainId) -> Result<ResourceId, PolicyError> {
        self.check_new_resource(path, domain)?;
        let id = ResourceId(self.fresh_id());
        self.resources.push(Resource {
            id,
            path: path.to_string(),
            domain,
            properties: Vec::new(),
        });
        Ok(id)
    }

    fn check_new_resource(&self, path: &str, domain: DomainId) -> Result<(), PolicyError> {
        if path.is_empty() {
            return Err(PolicyError::EmptyPath);
        }
        if self.domain(domain).is_none() {
            return Err(PolicyError::UnknownDomain(domain));
        }
        if self.resource_by_path(path).is_some() {
            return Err(PolicyError::DuplicateResource(path.to_string()));
        }
        Ok(())
    }

    /// Union of the owning domain's properties and the resource's own,
    /// deduplicated, domain properties first.
    pub fn effective_properties(&self, id: ResourceId) -> Result<Vec<SecurityProperty>, PolicyError> {
        let res = self.resource(id).ok_or(PolicyError::UnknownResource(id))?;
        let domain = self.domain(res.domain).ok_or(PolicyError::UnknownDomain(res.domain))?;
        let mut out = domain.properties.clone();
        for p in &res.properties {
            if !out.contains(p) {
                out.push(p.clone());
            }
        }
        Ok(out)
    }

    /// Properties that become co-effective with anything attached at `scope`.
    fn properties_around(&self, scope: Scope) -> Result<Vec<SecurityProperty>, PolicyError> {
        match scope {
            Scope::Resource(r) => self.effective_properties(r),
            Scope::Domain(d) => {
                let domain = self.domain(d).ok_or(PolicyError::UnknownDomain(d))?;
                let mut out = domain.properties.clone();
                for r in self.resources_in(d) {
                    out.extend(r.properties.iter().cloned());
                }
                Ok(out)
            }
        }
    }

    fn is_implied(&self, scope: Scope, prop: &SecurityProperty) -> Result<bool, PolicyError> {
        Ok(match scope {
            Scope::Domain(d) => {
                self.domain(d).ok_or(PolicyError::UnknownDomain(d))?.properties.contains(prop)
            }
            Scope::Resource(r) => self.effective_properties(r)?.contains(prop),
        })
    }

    /// Attaches `prop` at `scope` unless it conflicts with a property already
    /// effective there, in which case the policy is left unchanged.
    pub fn add_property(&mut self, scope: Scope, prop: SecurityProperty) -> Result<Attach, PolicyError> {
        if let Scope::Resource(_) = scope {
            if prop.kind == PropertyKind::NoPublication {
                return Err(PolicyError::InvalidScope(prop.kind));
            }
        }
        if self.is_implied(scope, &prop)? {
            return Ok(Attach::AlreadyImplied);
        }
        let existing = self.properties_around(scope)?;
        let pairs: Vec<_> = existing
            .iter()
            .filter(|e| locally_conflicting(&prop, e))
            .map(|e| (prop.clone(), e.clone()))
            .collect();
        if !pairs.is_empty() {
            return Err(PolicyError::Conflict(ConflictReport { pairs }));
        }
        self.properties_at_mut(scope)?.push(prop);
        Ok(Attach::Attached)
    }

    /// Detaches an exact property from `scope`. Returns whether it was present.
    pub fn remove_property(&mut self, scope: Scope, prop: &SecurityProperty) -> Result<bool, PolicyError> {
        let props = self.properties_at_mut(scope)?;
        match props.iter().position(|p| p == prop) {
            Some(i) => {
                props.remove(i);
                Ok(true)
            }
            None => Ok(false),
        }
    }

    fn properties_at_mut(&mut self, scope: Scope) -> Result<&mut Vec<SecurityProperty>, PolicyError> {
        Ok(match scope {
            Scope::Domain(d) => &mut self.domain_mut(d)?.properties,
            Scope::Resource(r) => &mut self.resource_mut(r)?.properties,
        })
    }

    /// Drops a new resource into `domain`, attaching only the requested
    /// properties the domain does not already provide.
    pub fn publish(
        &mut self,
        props: &[SecurityProperty],
        path: &str,
        domain: DomainId,
    ) -> Result<ResourceId, PolicyError> {
        let target = self.domain(domain).ok_or(PolicyError::UnknownDomain(domain))?;
        if target.properties.iter().any(|p| p.kind == PropertyKind::NoPublication) {
            return Err(PolicyError::PublicationForbidden(target.name.clone()));
        }
        if let Some(p) = props.iter().find(|p| p.kind == PropertyKind::NoPublication) {
            return Err(PolicyError::InvalidScope(p.kind));
        }
        self.check_new_resource(path, domain)?;

        let mut pairs: Vec<_> = property_set_conflicts(props, &target.properties)
            .into_iter()
            .map(|(a, b)| (a.clone(), b.clone()))
            .collect();
        for (i, a) in props.iter().enumerate() {
            for b in &props[i + 1..] {
                if locally_conflicting(a, b) {
                    pairs.push((a.clone(), b.clone()));
                }
            }
        }
        if !pairs.is_empty() {
            return Err(PolicyError::Conflict(ConflictReport { pairs }));
        }

        let mut own: Vec<SecurityProperty> = Vec::new();
        for p in props {
            if !target.properties.contains(p) && !own.contains(p) {
                own.push(p.clone());
            }
        }
        let id = self.add_resource(path, domain)?;
        self.resource_mut(id)?.properties = own;
        Ok(id)
    }

    /// Every pair of co-effective properties that conflicts under the local
    /// rule: pairs inside a domain's set, then pairs involving a resource's
    /// own properties.
    pub fn conflicts(&self) -> Vec<PolicyConflict> {
        let mut out = Vec::new();
        for d in &self.domains {
            for (i, a) in d.properties.iter().enumerate() {
                for b in &d.properties[i + 1..] {
                    if locally_conflicting(a, b) {
                        out.push(PolicyConflict {
                            domain: d.id,
                            resource: None,
                            first: a.clone(),
                            second: b.clone(),
                        });
                    }
                }
            }
        }
        for r in &self.resources {
            let domain_props = self.domain(r.domain).map(|d| d.properties.as_slice()).unwrap_or(&[]);
            for (i, a) in r.properties.iter().enumerate() {
                let others = domain_props.iter().chain(&r.properties[i + 1..]);
                for b in others {
                    if locally_conflicting(a, b) {
                        out.push(PolicyConflict {
                            domain: r.domain,
                            resource: Some(r.id),
                            first: a.clone(),
                            second: b.clone(),
                        });
                    }
                }
            }
        }
        out
    }

    /// Human-readable label for a target reference.
    pub fn ref_label(&self, target: &DomainRef) -> String {
        match target {
            DomainRef::Local(id) => {
                self.domain(*id).map(|d| d.name.clone()).unwrap_or_else(|| id.to_string())
            }
            DomainRef::External(name) => name.clone(),
        }
    }

    /// Rewrites local targets as names so the property means the same thing
    /// on another peer.
    pub fn portable(&self, prop: &SecurityProperty) -> SecurityProperty {
        SecurityProperty {
            kind: prop.kind,
            targets: prop.targets.iter().map(|t| DomainRef::External(self.ref_label(t))).collect(),
        }
    }

    /// Inverse of [`portable`](Self::portable): names that match a local
    /// domain become local references.
    pub fn localize(&self, prop: &SecurityProperty) -> SecurityProperty {
        SecurityProperty {
            kind: prop.kind,
            targets: prop
                .targets
                .iter()
                .map(|t| match t {
                    DomainRef::External(name) => match self.domain_by_name(name) {
                        Some(d) => DomainRef::Local(d.id),
                        None => t.clone(),
                    },
                    local => local.clone(),
                })
                .collect(),
        }
    }

    // Import hooks. These keep ids from an external document and do not run
    // conflict checks, since a stored document may legitimately hold
    // conflicts that `conflicts()` is meant to report.

    pub fn restore_domain(&mut self, id: DomainId, name: &str) -> Result<(), PolicyError> {
        if name.is_empty() {
            return Err(PolicyError::EmptyName);
        }
        if self.id_in_use(id.0) {
            return Err(PolicyError::DuplicateId(id.0));
        }
        if self.domain_by_name(name).is_some() {
            return Err(PolicyError::DuplicateDomain(name.to_string()));
        }
        self.domains.push(Domain { id, name: name.to_string(), properties: Vec::new() });
        self.next_id = self.next_id.max(id.0.saturating_add(1));
        Ok(())
    }

    pub fn restore_resource(&mut self, id: ResourceId, path: &str, domain: DomainId) -> Result<(), PolicyError> {
        if path.is_empty() {
            return Err(PolicyError::EmptyPath);
        }
        if self.id_in_use(id.0) {
            return Err(PolicyError::DuplicateId(id.0));
        }
        if self.domain(domain).is_none() {
            return Err(PolicyError::UnknownDomain(domain));
        }
        self.resources.push(Resource { id, path: path.to_string(), domain, properties: Vec::new() });
        self.next_id = self.next_id.max(id.0.saturating_add(1));
        Ok(())
    }

    pub fn restore_property(&mut self, scope: Scope, prop: SecurityProperty) -> Result<(), PolicyError> {
        if matches!(scope, Scope::Resource(_)) && prop.kind == PropertyKind::NoPublication {
            return Err(PolicyError::InvalidScope(prop.kind));
        }
        let props = self.properties_at_mut(scope)?;
        if !props.contains(&prop) {
            props.push(prop);
        }
        Ok(())
    }

    /// Keeps fresh ids clear of numbers already used elsewhere (e.g. external
    /// target ids from an imported document).
    pub fn reserve_ids_through(&mut self, id: u32) {
        self.next_id = self.next_id.max(id.saturating_add(1));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use PropertyKind::*;

    fn kinds(props: &[SecurityProperty]) -> Vec<PropertyKind> {
        props.iter().map(|p| p.kind).collect()
    }

    #[test]
    fn kind_names_round_trip() {
        for k in PropertyKind::ALL {
            assert_eq!(k.as_str().parse::<PropertyKind>().unwrap(), k);
        }
        assert!("secrecy".parse::<PropertyKind>().is_err());
        assert_eq!(PropertyKind::ALL.iter().filter(|k| k.is_prohibition()).count(), 4);
    }

    #[test]
    fn targets_only_on_two_argument_forms() {
        let t = DomainRef::External("x".into());
        assert!(SecurityProperty::with_targets(Integrity, [t.clone()]).is_err());
        assert!(SecurityProperty::with_targets(Spread, [t.clone()]).is_err());
        assert!(SecurityProperty::with_targets(Confidentiality, [t.clone()]).is_ok());
        assert!(SecurityProperty::with_targets(Cooperation, [t]).is_ok());
    }

    #[test]
    fn create_domain_examples() {
        let mut p = PeerPolicy::new("A");
        let free = p.create_domain("free").unwrap();
        assert!(p.domain(free).unwrap().properties.is_empty());
        assert_eq!(p.resources_in(free).count(), 0);
        assert_eq!(p.create_domain("free"), Err(PolicyError::DuplicateDomain("free".into())));
        p.create_domain("ensib").unwrap();
        assert_eq!(p.domains().len(), 2);
        assert_eq!(p.create_domain(""), Err(PolicyError::EmptyName));
    }

    #[test]
    fn ids_are_shared_and_monotone() {
        let mut p = PeerPolicy::new("A");
        let d = p.create_domain("d").unwrap();
        let r = p.add_resource("f", d).unwrap();
        let e = p.create_domain("e").unwrap();
        assert_eq!((d.0, r.0, e.0), (1, 2, 3));
    }

    #[test]
    fn delete_domain_drops_resources() {
        let mut p = PeerPolicy::new("JFL");
        let ensib = p.create_domain("ensib").unwrap();
        let free = p.create_domain("free").unwrap();
        p.add_resource("contract", ensib).unwrap();
        p.add_resource("firefox", free).unwrap();
        p.add_property(Scope::Domain(ensib), Confidentiality.into()).unwrap();
        p.delete_domain(ensib).unwrap();
        assert!(p.domain_by_name("ensib").is_none());
        assert!(p.resource_by_path("contract").is_none());
        assert!(p.resource_by_path("firefox").is_some());
        assert!(p.resources().iter().all(|r| p.domain(r.domain).is_some()));
        assert_eq!(p.delete_domain(ensib), Err(PolicyError::UnknownDomain(ensib)));
    }

    #[test]
    fn delete_empty_domain_keeps_resources() {
        let mut p = PeerPolicy::new("A");
        let a = p.create_domain("a").unwrap();
        let b = p.create_domain("b").unwrap();
        p.add_resource("f", a).unwrap();
        p.delete_domain(b).unwrap();
        assert_eq!(p.resources().len(), 1);
    }

    #[test]
    fn delete_domain_renames_dangling_targets() {
        let mut p = PeerPolicy::new("A");
        let a = p.create_domain("a").unwrap();
        let b = p.create_domain("b").unwrap();
        let coop = SecurityProperty::with_targets(Cooperation, [DomainRef::Local(b)]).unwrap();
        p.add_property(Scope::Domain(a), coop).unwrap();
        p.delete_domain(b).unwrap();
        let t: Vec<_> = p.domain(a).unwrap().properties[0].targets().iter().cloned().collect();
        assert_eq!(t, vec![DomainRef::External("b".into())]);
    }

    #[test]
    fn add_property_conflict_leaves_policy_unchanged() {
        let mut p = PeerPolicy::new("A");
        let d = p.create_domain("d").unwrap();
        p.add_property(Scope::Domain(d), Confidentiality.into()).unwrap();
        let before = p.clone();
        let err = p.add_property(Scope::Domain(d), Spread.into()).unwrap_err();
        match err {
            PolicyError::Conflict(report) => {
                assert_eq!(report.pairs.len(), 1);
                assert_eq!((report.pairs[0].0.kind, report.pairs[0].1.kind), (Spread, Confidentiality));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert_eq!(p, before);
    }

    #[test]
    fn add_property_integrity_always_accepted() {
        let mut p = PeerPolicy::new("A");
        let d = p.create_domain("d").unwrap();
        for k in [Confidentiality, NoShare, NoPublication] {
            p.add_property(Scope::Domain(d), k.into()).unwrap();
        }
        assert_eq!(p.add_property(Scope::Domain(d), Integrity.into()), Ok(Attach::Attached));
    }

    #[test]
    fn add_property_is_idempotent() {
        let mut p = PeerPolicy::new("A");
        let d = p.create_domain("d").unwrap();
        p.add_property(Scope::Domain(d), Confidentiality.into()).unwrap();
        let before = p.clone();
        assert_eq!(p.add_property(Scope::Domain(d), Confidentiality.into()), Ok(Attach::AlreadyImplied));
        assert_eq!(p, before);
    }

    #[test]
    fn resource_property_checks_domain_and_scope() {
        let mut p = PeerPolicy::new("A");
        let d = p.create_domain("d").unwrap();
        let r = p.add_resource("movie", d).unwrap();
        p.add_property(Scope::Domain(d), Spread.into()).unwrap();
        assert!(matches!(p.add_property(Scope::Resource(r), NoShare.into()), Err(PolicyError::Conflict(_))));
        assert_eq!(
            p.add_property(Scope::Resource(r), NoPublication.into()),
            Err(PolicyError::InvalidScope(NoPublication))
        );
        assert_eq!(p.add_property(Scope::Resource(r), Spread.into()), Ok(Attach::AlreadyImplied));
    }

    #[test]
    fn domain_property_sees_resource_properties() {
        let mut p = PeerPolicy::new("A");
        let d = p.create_domain("d").unwrap();
        let r = p.add_resource("movie", d).unwrap();
        p.add_property(Scope::Resource(r), NoShare.into()).unwrap();
        assert!(matches!(p.add_property(Scope::Domain(d), Cooperation.into()), Err(PolicyError::Conflict(_))));
    }

    #[test]
    fn unknown_scope_errors() {
        let mut p = PeerPolicy::new("A");
        assert_eq!(
            p.add_property(Scope::Domain(DomainId(9)), Integrity.into()),
            Err(PolicyError::UnknownDomain(DomainId(9)))
        );
        assert_eq!(
            p.add_property(Scope::Resource(ResourceId(9)), Integrity.into()),
            Err(PolicyError::UnknownResource(ResourceId(9)))
        );
        assert_eq!(p.effective_properties(ResourceId(9)), Err(PolicyError::UnknownResource(ResourceId(9))));
    }

    #[test]
    fn effective_properties_examples() {
        let mut p = PeerPolicy::new("A");
        let company = p.create_domain("private_company_A").unwrap();
        p.add_property(Scope::Domain(company), Confidentiality.into()).unwrap();
        let report = p.add_resource("reportA.pdf", company).unwrap();
        p.add_property(Scope::Resource(report), Integrity.into()).unwrap();
        assert_eq!(kinds(&p.effective_properties(report).unwrap()), vec![Confidentiality, Integrity]);

        let free = p.create_domain("free").unwrap();
        let f = p.add_resource("f", free).unwrap();
        assert!(p.effective_properties(f).unwrap().is_empty());

        let ensib = p.create_domain("ensib").unwrap();
        p.add_property(Scope::Domain(ensib), Confidentiality.into()).unwrap();
        p.add_property(Scope::Domain(ensib), Integrity.into()).unwrap();
        let contract = p.add_resource("contract", ensib).unwrap();
        assert_eq!(kinds(&p.effective_properties(contract).unwrap()), vec![Confidentiality, Integrity]);
    }

    #[test]
    fn publish_attaches_only_missing_properties() {
        let mut p = PeerPolicy::new("A");
        let company = p.create_domain("private_company_A").unwrap();
        p.add_property(Scope::Domain(company), Confidentiality.into()).unwrap();
        let r = p
            .publish(&[Confidentiality.into(), Integrity.into()], "reportA.pdf", company)
            .unwrap();
        assert_eq!(kinds(&p.resource(r).unwrap().properties), vec![Integrity]);
    }

    #[test]
    fn publish_respects_nopublication() {
        let mut p = PeerPolicy::new("A");
        let d = p.create_domain("vault").unwrap();
        p.add_property(Scope::Domain(d), NoPublication.into()).unwrap();
        assert_eq!(p.publish(&[], "f", d), Err(PolicyError::PublicationForbidden("vault".into())));
        assert!(p.resources().is_empty());
    }

    #[test]
    fn publish_plain_and_conflicting() {
        let mut p = PeerPolicy::new("A");
        let free = p.create_domain("free").unwrap();
        let r = p.publish(&[], "f", free).unwrap();
        assert!(p.resource(r).unwrap().properties.is_empty());

        p.add_property(Scope::Domain(free), Spread.into()).unwrap();
        assert!(matches!(p.publish(&[Confidentiality.into()], "g", free), Err(PolicyError::Conflict(_))));
        assert!(matches!(
            p.publish(&[], "x", DomainId(77)),
            Err(PolicyError::UnknownDomain(DomainId(77)))
        ));
    }

    #[test]
    fn listing_one_policy_has_no_local_conflicts() {
        let mut p = PeerPolicy::new("A");
        p.create_domain("free").unwrap();
        let fee = p.create_domain("fee_paying").unwrap();
        let company = p.create_domain("private_company_A").unwrap();
        p.add_property(Scope::Domain(fee), Confidentiality.into()).unwrap();
        p.add_property(Scope::Domain(company), Confidentiality.into()).unwrap();
        let coop = SecurityProperty::with_targets(
            Cooperation,
            [DomainRef::External("private_company_B".into())],
        )
        .unwrap();
        assert_eq!(p.add_property(Scope::Domain(company), coop), Ok(Attach::Attached));
        p.publish(&[Confidentiality.into(), Integrity.into()], "reportA.pdf", company).unwrap();
        assert!(p.conflicts().is_empty());
    }

    #[test]
    fn portable_and_localize_are_inverse_for_known_names() {
        let mut p = PeerPolicy::new("A");
        let a = p.create_domain("a").unwrap();
        let b = p.create_domain("b").unwrap();
        let prop = SecurityProperty::with_targets(Cooperation, [DomainRef::Local(b)]).unwrap();
        p.add_property(Scope::Domain(a), prop.clone()).unwrap();
        let wire = p.portable(&prop);
        assert_eq!(wire.targets().iter().next(), Some(&DomainRef::External("b".into())));
        assert_eq!(p.localize(&wire), prop);
    }
}
