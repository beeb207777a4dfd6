//! The owner/requester exchange.
//!
//! A requester `pB` asks owner `pA` for a resource and names the domain `dB`
//! it will store it in. `pA` locates the resource (in some domain `dA`),
//! asks `pB` for the properties of `dB` only, scores each property `dA`
//! requires against that slice, runs the trust pipeline and decides.

use std::fmt;

use thiserror::Error;

use crate::policy::{
    kind_level_conflicts, ConflictReport, DomainId, PeerPolicy, PolicyError, PropertyKind, ResourceId, Scope,
    SecurityProperty,
};
use crate::trust::{Band, TrustComputation, TrustConfig};

/// Peer identity. Ordering is by numeric id, then name.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PeerId {
    pub id: u32,
    pub name: String,
}

impl PeerId {
    pub fn new(id: u32, name: impl Into<String>) -> Self {
        PeerId { id, name: name.into() }
    }
}

impl fmt::Display for PeerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NegotiationError {
    #[error("{0} must not be empty")]
    EmptyField(&'static str),
    #[error("resource `{0}` not found")]
    ResourceNotFound(String),
    #[error("cannot aggregate an empty evaluation")]
    EmptyEvaluation,
    #[error("no slice received yet")]
    MissingSlice,
    #[error("no trust value for required property {0}")]
    MissingTrust(SecurityProperty),
    #[error("unknown domain `{0}`")]
    UnknownDomain(String),
    #[error("transfer conflicts with the target domain: {0}")]
    Conflict(ConflictReport),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResourceRequest {
    pub requester: PeerId,
    pub resource_name: String,
    pub target_domain_name: String,
}

impl ResourceRequest {
    pub fn new(
        requester: PeerId,
        resource_name: impl Into<String>,
        target_domain_name: impl Into<String>,
    ) -> Result<Self, NegotiationError> {
        let resource_name = resource_name.into();
        let target_domain_name = target_domain_name.into();
        if resource_name.is_empty() {
            return Err(NegotiationError::EmptyField("resource name"));
        }
        if target_domain_name.is_empty() {
            return Err(NegotiationError::EmptyField("target domain name"));
        }
        Ok(ResourceRequest { requester, resource_name, target_domain_name })
    }
}

/// The properties of one domain, as disclosed to a negotiation partner.
/// Targets are carried by name so they mean the same thing on both sides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicySlice {
    pub domain_name: String,
    pub properties: Vec<SecurityProperty>,
}

impl PolicySlice {
    pub fn new(domain_name: impl Into<String>, properties: Vec<SecurityProperty>) -> Self {
        PolicySlice { domain_name: domain_name.into(), properties }
    }

    /// The slice for `domain_name`, or `None` if the policy has no such domain.
    pub fn of(policy: &PeerPolicy, domain_name: &str) -> Option<Self> {
        let d = policy.domain_by_name(domain_name)?;
        Some(PolicySlice::new(domain_name, d.properties.iter().map(|p| policy.portable(p)).collect()))
    }

    pub fn kinds(&self) -> impl Iterator<Item = PropertyKind> + '_ {
        self.properties.iter().map(|p| p.kind)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Accepted,
    Refused,
    Pending,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Accepted => "accepted",
            Outcome::Refused => "refused",
            Outcome::Pending => "pending",
        })
    }
}

/// How the final decision is taken.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum DecisionMode {
    /// Refuse iff some property's trust value falls in the refused band.
    #[default]
    Banded,
    /// Refuse iff the slice conflicts with some required property,
    /// whatever the trust values say.
    Strict,
}

/// Owner-side state of one exchange.
#[derive(Debug, Clone, PartialEq)]
pub struct NegotiationSession {
    pub owner: PeerId,
    pub requester: PeerId,
    pub resource: ResourceId,
    pub resource_name: String,
    pub source_domain: DomainId,
    pub source_domain_name: String,
    pub target_domain_name: String,
    /// Effective properties of the resource, in portable form.
    pub required: Vec<SecurityProperty>,
    /// The resource's own properties (not inherited from `dA`); these travel
    /// with the resource on transfer.
    pub resource_properties: Vec<SecurityProperty>,
    pub offered_slice: Option<PolicySlice>,
    pub per_property_eval: Vec<(SecurityProperty, i8)>,
    pub per_property_trust: Vec<(SecurityProperty, TrustComputation)>,
    pub outcome: Outcome,
}

/// Locates the requested resource and records what it requires.
pub fn open_session(
    owner: &PeerId,
    owner_policy: &PeerPolicy,
    request: &ResourceRequest,
) -> Result<NegotiationSession, NegotiationError> {
    let res = owner_policy
        .resource_by_path(&request.resource_name)
        .ok_or_else(|| NegotiationError::ResourceNotFound(request.resource_name.clone()))?;
    let domain = owner_policy.domain(res.domain).ok_or(PolicyError::UnknownDomain(res.domain))?;
    let required =
        owner_policy.effective_properties(res.id)?.iter().map(|p| owner_policy.portable(p)).collect();
    Ok(NegotiationSession {
        owner: owner.clone(),
        requester: request.requester.clone(),
        resource: res.id,
        resource_name: res.path.clone(),
        source_domain: domain.id,
        source_domain_name: domain.name.clone(),
        target_domain_name: request.target_domain_name.clone(),
        required,
        resource_properties: res.properties.iter().map(|p| owner_policy.portable(p)).collect(),
        offered_slice: None,
        per_property_eval: Vec::new(),
        per_property_trust: Vec::new(),
        outcome: Outcome::Pending,
    })
}

/// -1 if some offered kind conflicts with the required kind, 1 if an
/// offered property of the same kind has compatible targets, 0 otherwise.
///
/// Targets are compatible when both sets are empty or they intersect.
pub fn eval_property(required: &SecurityProperty, offered: &PolicySlice) -> i8 {
    let req = std::slice::from_ref(required);
    if !kind_level_conflicts(req, &offered.properties).is_empty() {
        return -1;
    }
    let compatible = |o: &SecurityProperty| {
        let (a, b) = (required.targets(), o.targets());
        (a.is_empty() && b.is_empty()) || a.intersection(b).next().is_some()
    };
    if offered.properties.iter().any(|o| o.kind == required.kind && compatible(o)) {
        1
    } else {
        0
    }
}

pub fn aggregate_eval(evals: &[i8]) -> Result<i32, NegotiationError> {
    if evals.is_empty() {
        return Err(NegotiationError::EmptyEvaluation);
    }
    Ok(evals.iter().map(|&e| i32::from(e)).sum())
}

/// Decision over the trust values of every required property. A resource
/// with no required properties is always accepted.
pub fn decide(
    required: &[SecurityProperty],
    trust_values: &[(SecurityProperty, f64)],
    config: &TrustConfig,
) -> Result<Outcome, NegotiationError> {
    let mut refused = false;
    for p in required {
        let tv = trust_values
            .iter()
            .find(|(q, _)| q == p)
            .map(|(_, tv)| *tv)
            .ok_or_else(|| NegotiationError::MissingTrust(p.clone()))?;
        refused |= tv < config.refuse_threshold;
    }
    Ok(if refused { Outcome::Refused } else { Outcome::Accepted })
}

impl NegotiationSession {
    /// Stores the requester's slice and scores every required property
    /// against it.
    pub fn receive_slice(&mut self, slice: PolicySlice) -> &[(SecurityProperty, i8)] {
        self.per_property_eval = self.required.iter().map(|p| (p.clone(), eval_property(p, &slice))).collect();
        self.offered_slice = Some(slice);
        &self.per_property_eval
    }

    pub fn eval_of(&self, prop: &SecurityProperty) -> Option<i8> {
        self.per_property_eval.iter().find(|(p, _)| p == prop).map(|(_, e)| *e)
    }

    pub fn aggregate(&self) -> Result<i32, NegotiationError> {
        aggregate_eval(&self.per_property_eval.iter().map(|(_, e)| *e).collect::<Vec<_>>())
    }

    pub fn record_trust(&mut self, prop: SecurityProperty, computation: TrustComputation) {
        match self.per_property_trust.iter_mut().find(|(p, _)| *p == prop) {
            Some(slot) => slot.1 = computation,
            None => self.per_property_trust.push((prop, computation)),
        }
    }

    /// Settles the outcome. Fails while the slice or a trust value is missing.
    pub fn decide(&mut self, config: &TrustConfig, mode: DecisionMode) -> Result<Outcome, NegotiationError> {
        if !self.required.is_empty() && self.offered_slice.is_none() {
            return Err(NegotiationError::MissingSlice);
        }
        let tvs: Vec<_> = self.per_property_trust.iter().map(|(p, c)| (p.clone(), c.tv)).collect();
        let banded = decide(&self.required, &tvs, config)?;
        self.outcome = match mode {
            DecisionMode::Banded => banded,
            DecisionMode::Strict if self.per_property_eval.iter().any(|(_, e)| *e < 0) => Outcome::Refused,
            DecisionMode::Strict => Outcome::Accepted,
        };
        Ok(self.outcome)
    }

    /// The worst band over all required properties, `None` when nothing was required.
    pub fn worst_band(&self) -> Option<Band> {
        let rank = |b: Band| match b {
            Band::Refused => 0,
            Band::Partial => 1,
            Band::Full => 2,
        };
        self.per_property_trust.iter().map(|(_, c)| c.band).min_by_key(|b| rank(*b))
    }
}

/// Stores an accepted resource in the requester's `target_domain_name`,
/// attaching the properties the owner asked to keep on the resource.
/// Nothing is changed if any of them conflicts with the target domain.
pub fn apply_transfer(
    requester_policy: &mut PeerPolicy,
    resource_name: &str,
    target_domain_name: &str,
    owner_resource_props: &[SecurityProperty],
) -> Result<ResourceId, NegotiationError> {
    let domain = requester_policy
        .domain_by_name(target_domain_name)
        .ok_or_else(|| NegotiationError::UnknownDomain(target_domain_name.to_string()))?;
    let domain_id = domain.id;
    let props: Vec<_> = owner_resource_props.iter().map(|p| requester_policy.localize(p)).collect();
    let pairs: Vec<_> = kind_level_conflicts(&props, &domain.properties)
        .into_iter()
        .map(|(a, b)| (a.clone(), b.clone()))
        .collect();
    if !pairs.is_empty() {
        return Err(NegotiationError::Conflict(ConflictReport { pairs }));
    }
    if let Some(p) = props.iter().find(|p| p.kind == PropertyKind::NoPublication) {
        return Err(PolicyError::InvalidScope(p.kind).into());
    }
    let id = requester_policy.add_resource(resource_name, domain_id)?;
    for p in props {
        if let Err(e) = requester_policy.add_property(Scope::Resource(id), p) {
            // add_resource succeeded, so undo it before reporting
            let _ = requester_policy.remove_resource(id);
            return Err(e.into());
        }
    }
    Ok(id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use PropertyKind::*;

    fn slice(kinds: &[PropertyKind]) -> PolicySlice {
        PolicySlice::new("free", kinds.iter().map(|&k| k.into()).collect())
    }

    fn jfl() -> PeerPolicy {
        let mut p = PeerPolicy::new("JFL");
        let ensib = p.create_domain("ensib").unwrap();
        let free = p.create_domain("free").unwrap();
        p.add_resource("firefox", free).unwrap();
        p.add_resource("contract", ensib).unwrap();
        p.add_property(Scope::Domain(ensib), Confidentiality.into()).unwrap();
        p.add_property(Scope::Domain(ensib), Integrity.into()).unwrap();
        p.add_property(Scope::Domain(free), Cooperation.into()).unwrap();
        p
    }

    fn david() -> PeerId {
        PeerId::new(2, "David")
    }

    #[test]
    fn open_session_locates_source_domain() {
        let owner = PeerId::new(1, "JFL");
        let s = open_session(&owner, &jfl(), &ResourceRequest::new(david(), "contract", "free").unwrap()).unwrap();
        assert_eq!(s.source_domain_name, "ensib");
        assert_eq!(s.required, vec![Confidentiality.into(), Integrity.into()]);
        assert_eq!(s.outcome, Outcome::Pending);

        let s = open_session(&owner, &jfl(), &ResourceRequest::new(david(), "firefox", "free").unwrap()).unwrap();
        assert_eq!(s.source_domain_name, "free");
        assert_eq!(s.required, vec![Cooperation.into()]);

        let missing = ResourceRequest::new(david(), "nothing", "free").unwrap();
        assert_eq!(open_session(&owner, &jfl(), &missing), Err(NegotiationError::ResourceNotFound("nothing".into())));
    }

    #[test]
    fn request_fields_are_required() {
        assert!(ResourceRequest::new(david(), "", "free").is_err());
        assert!(ResourceRequest::new(david(), "x", "").is_err());
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_property(&Confidentiality.into(), &slice(&[Spread])), -1);
        assert_eq!(eval_property(&Integrity.into(), &slice(&[Spread])), 0);
        assert_eq!(eval_property(&Integrity.into(), &slice(&[Integrity])), 1);
        assert_eq!(eval_property(&Cooperation.into(), &slice(&[Spread])), 0);
        assert_eq!(eval_property(&Integrity.into(), &slice(&[])), 0);
    }

    #[test]
    fn eval_target_compatibility() {
        let ext = |n: &str| crate::policy::DomainRef::External(n.into());
        let coop_b = SecurityProperty::with_targets(Cooperation, [ext("B")]).unwrap();
        let coop_bc = SecurityProperty::with_targets(Cooperation, [ext("B"), ext("C")]).unwrap();
        let coop_c = SecurityProperty::with_targets(Cooperation, [ext("C")]).unwrap();
        let s = PolicySlice::new("d", vec![coop_bc]);
        assert_eq!(eval_property(&coop_b, &s), 1);
        assert_eq!(eval_property(&coop_c, &s), 1);
        assert_eq!(eval_property(&Cooperation.into(), &s), 0);
        let s = PolicySlice::new("d", vec![coop_c]);
        assert_eq!(eval_property(&coop_b, &s), 0);
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(aggregate_eval(&[-1, 0]), Ok(-1));
        assert_eq!(aggregate_eval(&[0]), Ok(0));
        assert_eq!(aggregate_eval(&[1, 1, 1]), Ok(3));
        assert_eq!(aggregate_eval(&[]), Err(NegotiationError::EmptyEvaluation));
    }

    #[test]
    fn decide_examples() {
        let c = TrustConfig::default();
        let (conf, integ, coop): (SecurityProperty, SecurityProperty, SecurityProperty) =
            (Confidentiality.into(), Integrity.into(), Cooperation.into());
        let required = [conf.clone(), integ.clone()];
        assert_eq!(decide(&required, &[(conf.clone(), 0.0), (integ.clone(), 0.385)], &c), Ok(Outcome::Refused));
        assert_eq!(decide(std::slice::from_ref(&coop), &[(coop.clone(), 0.442)], &c), Ok(Outcome::Accepted));
        assert_eq!(decide(&[], &[], &c), Ok(Outcome::Accepted));
        assert_eq!(decide(&required, &[(conf, 0.9)], &c), Err(NegotiationError::MissingTrust(integ)));
    }

    #[test]
    fn session_decide_modes() {
        let c = TrustConfig::default();
        let owner = PeerId::new(1, "JFL");
        let req = ResourceRequest::new(david(), "contract", "free").unwrap();
        let mut s = open_session(&owner, &jfl(), &req).unwrap();
        assert_eq!(s.decide(&c, DecisionMode::Banded), Err(NegotiationError::MissingSlice));
        let evals = s.receive_slice(slice(&[Spread])).to_vec();
        assert_eq!(evals, vec![(Confidentiality.into(), -1), (Integrity.into(), 0)]);
        assert_eq!(s.aggregate(), Ok(-1));
        for (p, e) in evals {
            // generous trust everywhere: banded accepts, strict still refuses
            let hist = crate::trust::HistoryScore::Clean;
            let tc = TrustComputation { eval: e, hist, chal: 1.0, eval_hist: 1.0, tv: 0.9, band: Band::Full };
            s.record_trust(p, tc);
        }
        assert_eq!(s.decide(&c, DecisionMode::Banded), Ok(Outcome::Accepted));
        assert_eq!(s.decide(&c, DecisionMode::Strict), Ok(Outcome::Refused));
    }

    #[test]
    fn transfer_examples() {
        let mut d = PeerPolicy::new("David");
        let free = d.create_domain("free").unwrap();
        d.add_property(Scope::Domain(free), Spread.into()).unwrap();

        let id = apply_transfer(&mut d, "firefox", "free", &[]).unwrap();
        assert_eq!(d.resource(id).unwrap().domain, free);
        assert_eq!(d.effective_properties(id).unwrap(), vec![Spread.into()]);

        let err = apply_transfer(&mut d, "movie_file", "free", &[NoShare.into()]).unwrap_err();
        assert!(matches!(err, NegotiationError::Conflict(_)));
        assert!(d.resource_by_path("movie_file").is_none());

        assert!(matches!(apply_transfer(&mut d, "x", "nope", &[]), Err(NegotiationError::UnknownDomain(_))));

        let empty = d.create_domain("empty").unwrap();
        let id = apply_transfer(&mut d, "plain", "empty", &[]).unwrap();
        assert_eq!(d.resource(id).unwrap().domain, empty);

        let id = apply_transfer(&mut d, "kept", "empty", &[NoShare.into()]).unwrap();
        assert_eq!(d.resource(id).unwrap().properties, vec![NoShare.into()]);
    }

    #[test]
    fn slice_of_one_domain_only() {
        let p = jfl();
        let s = PolicySlice::of(&p, "ensib").unwrap();
        assert_eq!(s.domain_name, "ensib");
        assert_eq!(s.kinds().collect::<Vec<_>>(), [Confidentiality, Integrity]);
        assert!(PolicySlice::of(&p, "missing").is_none());
    }
}
