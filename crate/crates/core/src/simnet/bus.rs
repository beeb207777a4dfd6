use std::collections::{BTreeMap, VecDeque};

use crate::mac::{AvcRecord, ChallengeRequest};
use crate::negotiation::{Outcome, PeerId, PolicySlice, ResourceRequest};
use crate::policy::{PropertyKind, SecurityProperty};
use crate::trust::{ChallengeResult, HistoryRecord};

use super::SimError;

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Request(ResourceRequest),
    SliceRequest { domain_name: String },
    Slice(PolicySlice),
    HistoryRequest,
    History(Vec<HistoryRecord>),
    /// Owner asks a trusted peer to probe the requester on its behalf.
    Delegate { target: PeerId, kind: PropertyKind, slice: PolicySlice },
    ConflictingProbe { domain_name: String, required: SecurityProperty },
    ProbeAnswer { accepted: bool },
    MacChallenge(ChallengeRequest),
    AvcTrace(Vec<AvcRecord>),
    ChallengeReport(ChallengeResult),
    Decision(Outcome),
    Transfer { resource_name: String, properties: Vec<SecurityProperty> },
}

impl Message {
    /// The slice carried by this message, if any.
    pub fn slice(&self) -> Option<&PolicySlice> {
        match self {
            Message::Slice(s) | Message::Delegate { slice: s, .. } => Some(s),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    /// Tick at which the message was delivered.
    pub tick: u64,
    pub session: u64,
    pub from: PeerId,
    pub to: PeerId,
    pub message: Message,
}

/// In-memory transport. One message is delivered per tick, in send order.
///
/// Every slice that crosses the bus must describe the target domain of its
/// session; anything else is rejected before it is queued.
#[derive(Debug, Default)]
pub struct Bus {
    tick: u64,
    queue: VecDeque<Envelope>,
    sessions: BTreeMap<u64, String>,
    log: Vec<Envelope>,
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> u64 {
        self.tick
    }

    /// Registers `session` as negotiating over `target_domain`.
    pub fn open(&mut self, session: u64, target_domain: &str) {
        self.sessions.insert(session, target_domain.to_string());
    }

    pub fn send(&mut self, session: u64, from: &PeerId, to: &PeerId, message: Message) -> Result<(), SimError> {
        let Some(allowed) = self.sessions.get(&session) else {
            return Err(SimError::UnknownSession(session));
        };
        if let Some(slice) = message.slice() {
            if &slice.domain_name != allowed {
                return Err(SimError::PrivacyViolation {
                    session,
                    requested: allowed.clone(),
                    carried: slice.domain_name.clone(),
                });
            }
        }
        self.queue.push_back(Envelope { tick: 0, session, from: from.clone(), to: to.clone(), message });
        Ok(())
    }

    pub fn deliver(&mut self) -> Option<Envelope> {
        let mut env = self.queue.pop_front()?;
        self.tick += 1;
        env.tick = self.tick;
        self.log.push(env.clone());
        Some(env)
    }

    /// Sends and immediately delivers, returning the delivered message.
    pub fn exchange(&mut self, session: u64, from: &PeerId, to: &PeerId, message: Message) -> Result<Message, SimError> {
        self.send(session, from, to, message)?;
        // the driver never leaves messages queued, so this is the one just sent
        Ok(self.deliver().expect("message was queued").message)
    }

    pub fn log(&self) -> &[Envelope] {
        &self.log
    }

    pub fn into_log(self) -> Vec<Envelope> {
        self.log
    }
}
