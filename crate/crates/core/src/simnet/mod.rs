//! Deterministic multi-peer simulation.
//!
//! Peers run honest or malicious behavior models, exchange typed messages
//! over an in-memory bus under a logical clock, and negotiate through the
//! full trust pipeline. Runs are reproducible from the scenario and seed.

mod agent;
mod bus;
mod experiment;
mod run;
mod scenario;

use thiserror::Error;

use crate::mac::MacError;
use crate::negotiation::NegotiationError;
use crate::policy::PolicyError;
use crate::trust::TrustError;

pub use agent::PeerAgent;
pub use bus::{Bus, Envelope, Message};
pub use experiment::{
    detection_experiment, generate_population, BehaviorMetrics, DetectionReport, PopulationParams,
};
pub use run::{fmt_real, run_scenario, Metrics, NegotiationRecord, PropertyTrace, RunReport};
pub use scenario::{parse_property, parse_scenario, Action, Behavior, PeerDecl, Scenario, ScenarioError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("message for unknown session {0}")]
    UnknownSession(u64),
    #[error("session {session} negotiates domain `{requested}` but a message carried the slice of `{carried}`")]
    PrivacyViolation { session: u64, requested: String, carried: String },
    #[error(transparent)]
    Negotiation(NegotiationError),
    #[error(transparent)]
    Trust(#[from] TrustError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Mac(#[from] MacError),
    #[error("an experiment needs at least one run")]
    NoRuns,
}
