//! Domain-scoped security policies for peer-to-peer resource sharing.
//!
//! The crate covers the policy language and its conflict relation
//! ([`policy`]), the XML interchange format ([`xml`]), projection onto
//! SELinux-style allow/neverallow rules with AVC trace handling ([`mac`]),
//! the owner/requester exchange ([`negotiation`]), trust evaluation
//! ([`trust`]) and a deterministic multi-peer simulator ([`simnet`]).

pub mod mac;
pub mod negotiation;
pub mod policy;
pub mod simnet;
pub mod synth;
pub mod trust;
pub mod xml;

pub use policy::{
    conflicts, ConflictMatrix, DomainId, DomainRef, PeerPolicy, PolicyConflict, PolicyError, PropertyKind, ResourceId, Scope,
    SecurityProperty,
};
pub use xml::{parse_policy, serialize_policy, PolicyDocument, XmlError};
pub use negotiation::{
    apply_transfer, decide, eval_property, open_session, DecisionMode, NegotiationSession, Outcome, PeerId,
    PolicySlice, ResourceRequest,
};
pub use trust::{Band, TrustComputation, TrustConfig, TrustLedger};
pub use simnet::{parse_scenario, run_scenario, RunReport, Scenario};
