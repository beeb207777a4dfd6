use std::fmt::Write as _;

use crate::mac::{
    compile_policy, make_challenge_for_path, verify_challenge, AvcRecord, Challenge, SecurityContext,
};
use crate::negotiation::{
    apply_transfer, open_session, DecisionMode, NegotiationError, Outcome, PeerId, PolicySlice, ResourceRequest,
};
use crate::policy::{conflicts, PeerPolicy, PropertyKind, Scope, SecurityProperty};
use crate::trust::{
    audit_history, eval_history, run_challenges, Band, ChallengeExecutor, ChallengeKind, ChallengeResult,
    HistoryDirectory, HistoryRecord, TrustComputation, TrustConfig,
};

use super::bus::{Bus, Envelope, Message};
use super::{Action, Behavior, PeerAgent, Scenario, SimError};

/// Trust details for one required property.
#[derive(Debug, Clone, PartialEq)]
pub struct PropertyTrace {
    pub property: SecurityProperty,
    pub computation: TrustComputation,
}

/// Everything measured about one `ask`.
#[derive(Debug, Clone, PartialEq)]
pub struct NegotiationRecord {
    pub session: u64,
    pub owner: PeerId,
    pub requester: PeerId,
    pub requester_behavior: Behavior,
    pub resource: String,
    pub target_domain: String,
    /// False when the owner had no such resource; the request is then refused
    /// without a trust phase.
    pub found: bool,
    pub outcome: Outcome,
    pub delegates: usize,
    pub properties: Vec<PropertyTrace>,
    pub reputation_before: f64,
    pub reputation_after: f64,
    pub presented_records: usize,
    pub flagged_records: usize,
    /// Ground truth: how many presented records were forged, and how many of
    /// those the audit caught.
    pub forged_records: usize,
    pub forged_flagged: usize,
    pub challenges: Vec<ChallengeResult>,
    pub transferred: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Metrics {
    pub negotiations: usize,
    pub accepted: usize,
    pub refused: usize,
    pub not_found: usize,
    pub liar_negotiations: usize,
    pub liar_refused: usize,
    pub honest_negotiations: usize,
    pub honest_refused: usize,
}

fn ratio(n: usize, d: usize) -> Option<f64> {
    (d > 0).then(|| n as f64 / d as f64)
}

impl Metrics {
    fn from_records(records: &[NegotiationRecord]) -> Self {
        let mut m = Metrics::default();
        for r in records {
            m.negotiations += 1;
            if !r.found {
                m.not_found += 1;
                continue;
            }
            let refused = r.outcome == Outcome::Refused;
            if refused {
                m.refused += 1;
            } else {
                m.accepted += 1;
            }
            if r.requester_behavior.is_liar() {
                m.liar_negotiations += 1;
                m.liar_refused += usize::from(refused);
            } else {
                m.honest_negotiations += 1;
                m.honest_refused += usize::from(refused);
            }
        }
        m
    }

    /// Over negotiations that reached a decision.
    pub fn acceptance_rate(&self) -> Option<f64> {
        ratio(self.accepted, self.accepted + self.refused)
    }

    pub fn liar_detection_rate(&self) -> Option<f64> {
        ratio(self.liar_refused, self.liar_negotiations)
    }

    pub fn false_refusal_rate(&self) -> Option<f64> {
        ratio(self.honest_refused, self.honest_negotiations)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub seed: u64,
    pub transcript: Vec<String>,
    pub negotiations: Vec<NegotiationRecord>,
    /// `(holder, peer, value)` in declaration order.
    pub reputations: Vec<(String, String, f64)>,
    pub metrics: Metrics,
    pub ticks: u64,
    /// Every message that crossed the bus.
    pub messages: Vec<Envelope>,
}

/// Prints integral values with one decimal (`0.0`, `1.0`) and everything
/// else with the shortest round-tripping representation.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() && x.fract() == 0.0 {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".to_string(), fmt_real)
}

fn fmt_list(props: &[SecurityProperty]) -> String {
    let names: Vec<String> = props.iter().map(ToString::to_string).collect();
    format!("[{}]", names.join(", "))
}

fn fmt_list_or_null(props: &[SecurityProperty]) -> String {
    if props.is_empty() {
        "null".to_string()
    } else {
        fmt_list(props)
    }
}

impl RunReport {
    /// Transcript, then `key=value` metrics and reputations.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in &self.transcript {
            out.push_str(line);
            out.push('\n');
        }
        let m = &self.metrics;
        out.push_str("# metrics\n");
        let _ = writeln!(out, "seed={}", self.seed);
        let _ = writeln!(out, "ticks={}", self.ticks);
        let _ = writeln!(out, "messages={}", self.messages.len());
        let _ = writeln!(out, "negotiations={}", m.negotiations);
        let _ = writeln!(out, "accepted={}", m.accepted);
        let _ = writeln!(out, "refused={}", m.refused);
        let _ = writeln!(out, "not_found={}", m.not_found);
        let _ = writeln!(out, "acceptance_rate={}", fmt_rate(m.acceptance_rate()));
        let _ = writeln!(out, "liar_negotiations={}", m.liar_negotiations);
        let _ = writeln!(out, "liar_detection_rate={}", fmt_rate(m.liar_detection_rate()));
        let _ = writeln!(out, "honest_negotiations={}", m.honest_negotiations);
        let _ = writeln!(out, "false_refusal_rate={}", fmt_rate(m.false_refusal_rate()));
        out.push_str("# reputations\n");
        for (holder, peer, value) in &self.reputations {
            let _ = writeln!(out, "reputation.{holder}.{peer}={}", fmt_real(*value));
        }
        out
    }

    pub fn reputation(&self, holder: &str, peer: &str) -> Option<f64> {
        self.reputations.iter().find(|(h, p, _)| h == holder && p == peer).map(|(_, _, v)| *v)
    }
}

/// Executes a scenario. Identical scenarios give identical reports.
pub fn run_scenario(scenario: &Scenario) -> Result<RunReport, SimError> {
    scenario.validate()?;
    let agents = scenario
        .peers
        .iter()
        .enumerate()
        .map(|(i, p)| PeerAgent::new(PeerId::new(i as u32 + 1, p.name.clone()), p.behavior, scenario.seed))
        .collect();
    let mut sim = Sim {
        config: scenario.config.clone(),
        mode: scenario.mode,
        agents,
        bus: Bus::new(),
        transcript: Vec::new(),
        records: Vec::new(),
        next_session: 1,
        next_txn: 1,
        avc_serial: 0,
    };
    for action in &scenario.actions {
        sim.apply(action)?;
    }

    let reputations = sim
        .agents
        .iter()
        .flat_map(|a| {
            a.ledger.reputations().iter().map(move |(p, v)| (a.id.name.clone(), p.name.clone(), *v))
        })
        .collect();
    let ticks = sim.bus.now();
    Ok(RunReport {
        seed: scenario.seed,
        metrics: Metrics::from_records(&sim.records),
        transcript: sim.transcript,
        negotiations: sim.records,
        reputations,
        ticks,
        messages: sim.bus.into_log(),
    })
}

struct Sim {
    config: TrustConfig,
    mode: DecisionMode,
    agents: Vec<PeerAgent>,
    bus: Bus,
    transcript: Vec<String>,
    records: Vec<NegotiationRecord>,
    next_session: u64,
    next_txn: u64,
    avc_serial: u64,
}

struct Directory<'a>(&'a [PeerAgent]);

impl HistoryDirectory for Directory<'_> {
    fn peer_exists(&self, peer: &PeerId) -> bool {
        self.0.iter().any(|a| &a.id == peer)
    }

    fn confirms(&self, counterparty: &PeerId, txn: u64, actor: &PeerId) -> bool {
        self.0
            .iter()
            .find(|a| &a.id == counterparty)
            .is_some_and(|a| a.ledger.history.iter().any(|r| r.txn == Some(txn) && &r.actor == actor))
    }
}

impl Sim {
    fn index(&self, name: &str) -> usize {
        // names were validated against the declarations
        self.agents.iter().position(|a| a.id.name == name).expect("declared peer")
    }

    fn say(&mut self, who: &PeerId, line: impl AsRef<str>) {
        self.transcript.push(format!("{who}: {}", line.as_ref()));
    }

    fn eval_line(&mut self, line: impl AsRef<str>) {
        self.transcript.push(format!("(Eval) {}", line.as_ref()));
    }

    fn domain_named(&self, peer: usize, name: &str) -> Option<crate::policy::DomainId> {
        self.agents[peer].policy().domain_by_name(name).map(|d| d.id)
    }

    /// Runs a policy change on `peer`, reporting failures in the transcript.
    fn mutate<T, E: std::fmt::Display>(
        &mut self,
        peer: usize,
        what: String,
        f: impl FnOnce(&mut PeerPolicy) -> Result<T, E>,
    ) -> Option<T> {
        match self.agents[peer].update_policy(f) {
            Ok(v) => Some(v),
            Err(e) => {
                let id = self.agents[peer].id.clone();
                self.say(&id, format!("cannot {what}: {e}"));
                None
            }
        }
    }

    fn missing_domain(&mut self, peer: usize, what: &str, name: &str) {
        let id = self.agents[peer].id.clone();
        self.say(&id, format!("cannot {what}: no domain {name}"));
    }

    fn apply(&mut self, action: &Action) -> Result<(), SimError> {
        match action {
            Action::CreateDomain { peer, name } => {
                let p = self.index(peer);
                self.mutate(p, format!("create domain {name}"), |pol| pol.create_domain(name));
            }
            Action::DeleteDomain { peer, name } => {
                let p = self.index(peer);
                match self.domain_named(p, name) {
                    Some(d) => {
                        self.mutate(p, format!("delete domain {name}"), |pol| pol.delete_domain(d));
                    }
                    None => self.missing_domain(p, &format!("delete domain {name}"), name),
                }
            }
            Action::AddResource { peer, path, domain } => {
                let p = self.index(peer);
                let what = format!("add {path} to {domain}");
                match self.domain_named(p, domain) {
                    Some(d) => {
                        self.mutate(p, what, |pol| pol.add_resource(path, d));
                    }
                    None => self.missing_domain(p, &what, domain),
                }
            }
            Action::AddProperty { peer, domain, property } => {
                let p = self.index(peer);
                let what = format!("add {property} to {domain}");
                match self.domain_named(p, domain) {
                    Some(d) => {
                        self.mutate(p, what, |pol| {
                            let prop = pol.localize(property);
                            pol.add_property(Scope::Domain(d), prop)
                        });
                    }
                    None => self.missing_domain(p, &what, domain),
                }
            }
            Action::AddResourceProperty { peer, path, property } => {
                let p = self.index(peer);
                let what = format!("add {property} to {path}");
                match self.agents[p].policy().resource_by_path(path).map(|r| r.id) {
                    Some(r) => {
                        self.mutate(p, what, |pol| {
                            let prop = pol.localize(property);
                            pol.add_property(Scope::Resource(r), prop)
                        });
                    }
                    None => {
                        let id = self.agents[p].id.clone();
                        self.say(&id, format!("cannot {what}: no file {path}"));
                    }
                }
            }
            Action::Publish { peer, path, domain, properties } => {
                let p = self.index(peer);
                let what = format!("publish {path} in {domain}");
                match self.domain_named(p, domain) {
                    Some(d) => {
                        let published = self.mutate(p, what, |pol| {
                            let props: Vec<_> = properties.iter().map(|q| pol.localize(q)).collect();
                            pol.publish(&props, path, d)
                        });
                        if let Some(r) = published {
                            let pol = self.agents[p].policy();
                            let own: Vec<_> =
                                pol.resource(r).map(|r| r.properties.iter().map(|q| pol.portable(q)).collect()).unwrap_or_default();
                            let id = self.agents[p].id.clone();
                            self.say(&id, format!("published {path} in {domain} with own properties {}", fmt_list(&own)));
                        }
                    }
                    None => self.missing_domain(p, &what, domain),
                }
            }
            Action::Knows { peer, other, trust } => {
                let (p, o) = (self.index(peer), self.index(other));
                let other_id = self.agents[o].id.clone();
                self.agents[p].ledger.knows(other_id, *trust);
            }
            Action::History { peer, actor, kind, tick, violation } => {
                let (p, a) = (self.index(peer), self.index(actor));
                let actor = self.agents[a].id.clone();
                self.agents[p].ledger.history.push(HistoryRecord {
                    txn: None,
                    timestamp: *tick,
                    actor,
                    counterparty: None,
                    property_kind: *kind,
                    action: if *violation { "observed violation" } else { "observed operation" }.to_string(),
                    violation: *violation,
                    mac_trace: None,
                });
            }
            Action::Display { peer } => self.display(self.index(peer)),
            Action::Ask { requester, owner, resource, domain } => {
                let (r, o) = (self.index(requester), self.index(owner));
                self.ask(r, o, resource, domain)?;
            }
        }
        Ok(())
    }

    fn display(&mut self, peer: usize) {
        let agent = &self.agents[peer];
        let pol = agent.policy();
        let tag = format!("[Display {}]", agent.id);
        let mut lines = Vec::new();
        for d in pol.domains() {
            let props: Vec<_> = d.properties.iter().map(|p| pol.portable(p)).collect();
            lines.push(format!("{tag} <domain> {} secured by {}", d.name, fmt_list_or_null(&props)));
        }
        for r in pol.resources() {
            let domain = pol.domain(r.domain).map_or("?", |d| d.name.as_str());
            let props: Vec<_> =
                pol.effective_properties(r.id).unwrap_or_default().iter().map(|p| pol.portable(p)).collect();
            lines.push(format!("{tag} <file> {} in {domain} under {}", r.path, fmt_list_or_null(&props)));
        }
        self.transcript.extend(lines);
    }

    fn ask(&mut self, r: usize, o: usize, resource: &str, domain: &str) -> Result<(), SimError> {
        let session_id = self.next_session;
        self.next_session += 1;
        self.bus.open(session_id, domain);
        let rid = self.agents[r].id.clone();
        let oid = self.agents[o].id.clone();
        let reputation_before =
            self.agents[o].ledger.reputation(&rid).unwrap_or(self.config.initial_reputation);
        let mut record = NegotiationRecord {
            session: session_id,
            owner: oid.clone(),
            requester: rid.clone(),
            requester_behavior: self.agents[r].behavior,
            resource: resource.to_string(),
            target_domain: domain.to_string(),
            found: false,
            outcome: Outcome::Refused,
            delegates: 0,
            properties: Vec::new(),
            reputation_before,
            reputation_after: reputation_before,
            presented_records: 0,
            flagged_records: 0,
            forged_records: 0,
            forged_flagged: 0,
            challenges: Vec::new(),
            transferred: false,
        };

        self.say(&rid, format!("I asks to peer {oid} the file {resource} to be put in {domain}"));
        let request = ResourceRequest::new(rid.clone(), resource, domain).map_err(SimError::Negotiation)?;
        self.bus.exchange(session_id, &rid, &oid, Message::Request(request.clone()))?;
        self.say(&oid, format!("Peer {rid} asking file {resource}"));
        self.say(&oid, format!("Peer {rid} will put the file in domain {domain}"));

        let mut session = match open_session(&oid, self.agents[o].policy(), &request) {
            Ok(s) => s,
            Err(NegotiationError::ResourceNotFound(_)) => {
                self.say(&oid, format!("File {resource} not found."));
                self.bus.exchange(session_id, &oid, &rid, Message::Decision(Outcome::Refused))?;
                self.say(&rid, format!("peer {oid} has no file {resource}."));
                self.records.push(record);
                return Ok(());
            }
            Err(e) => return Err(SimError::Negotiation(e)),
        };
        record.found = true;
        self.say(&oid, format!("File {resource} found."));
        self.say(&oid, format!("File is in domain {}", session.source_domain_name));
        self.say(&oid, format!("Security properties {}", fmt_list_or_null(&session.required)));

        // slice disclosure
        self.bus.exchange(session_id, &oid, &rid, Message::SliceRequest { domain_name: domain.to_string() })?;
        self.say(&rid, format!("someone asking policy for domain {domain}"));
        let slice = self.agents[r].answer_slice(domain, &session.required);
        self.bus.exchange(session_id, &rid, &oid, Message::Slice(slice.clone()))?;
        self.say(&rid, format!("returning policy {}", fmt_list(&slice.properties)));
        session.receive_slice(slice.clone());

        // history
        let mut kinds: Vec<PropertyKind> = session.required.iter().map(|p| p.kind).collect();
        kinds.sort();
        kinds.dedup();
        self.bus.exchange(session_id, &oid, &rid, Message::HistoryRequest)?;
        let now = self.bus.now();
        let (presented, forged) = self.agents[r].present_history(&kinds, now);
        self.bus.exchange(session_id, &rid, &oid, Message::History(presented.clone()))?;
        let audit = audit_history(&presented, &Directory(&self.agents));
        record.presented_records = presented.len();
        record.flagged_records = audit.flagged.len();
        record.forged_records = forged.len();
        record.forged_flagged = forged.iter().filter(|i| audit.flagged.contains(i)).count();
        if !presented.is_empty() {
            self.say(
                &oid,
                format!("checked {} history records of {rid}: {} unverifiable", presented.len(), audit.flagged.len()),
            );
        }
        let mut known: Vec<HistoryRecord> = self.agents[o].ledger.history.clone();
        known.extend(audit.records.iter().cloned());

        // trust phase, one property at a time
        let delegates = self.agents[o].ledger.delegates(&rid);
        record.delegates = delegates.len();
        let mut challenge_results = Vec::new();
        for (prop, eval) in session.per_property_eval.clone() {
            self.eval_line(format!("{oid} Computation of Eval({rid},{prop})"));
            if slice.properties.is_empty() {
                self.eval_line(format!("{oid} Target domain has no property"));
            }
            for offered in &slice.properties {
                self.eval_line(format!("{oid} Target domain has property {offered}"));
            }
            if eval < 0 {
                self.eval_line(format!(
                    "{oid} the properties of {rid}'s {domain} domain hurts the required property {prop}"
                ));
            }
            self.eval_line(format!("Eval({rid},{prop})={eval}"));
            let now = self.bus.now();
            let hist = eval_history(&known, &rid, prop.kind, now, self.config.history_window);
            self.eval_line(format!("Hist({rid},{prop})={hist}"));

            let chal = if delegates.is_empty() {
                0.5
            } else {
                let mut prober = Prober {
                    bus: &mut self.bus,
                    transcript: &mut self.transcript,
                    serial: &mut self.avc_serial,
                    session: session_id,
                    owner: &oid,
                    target: &self.agents[r],
                    slice: &slice,
                    briefed: Vec::new(),
                    failure: None,
                };
                let summary = run_challenges(&delegates, &rid, prop.kind, &mut prober)?;
                if let Some(e) = prober.failure {
                    return Err(e);
                }
                challenge_results.extend(summary.results);
                summary.chal
            };
            self.eval_line(format!("Chal({prop},{rid})={}", fmt_real(chal)));

            let tc = TrustComputation::compute(eval, hist, chal, &self.config);
            self.eval_line(format!("EvalHist({prop},{rid})={}", fmt_real(tc.eval_hist)));
            self.eval_line(format!("Tv({prop},{rid})={}", fmt_real(tc.tv)));
            let rep = self.agents[o].ledger.update_reputation(&rid, tc.band, &self.config);
            let (tv, lo, hi, rep) = (fmt_real(tc.tv), fmt_real(self.config.refuse_threshold), fmt_real(self.config.full_trust_threshold), fmt_real(rep));
            self.eval_line(match tc.band {
                Band::Refused => format!("Peer refused ({tv}<{lo}) for {prop} trust decreased to {rep}"),
                Band::Partial => format!("Peer not fully trusted ({lo}<{tv}<{hi}) for {prop} trust decreased to {rep}"),
                Band::Full => format!("Peer fully trusted ({hi}<={tv}) for {prop} trust unchanged at {rep}"),
            });
            record.properties.push(PropertyTrace { property: prop.clone(), computation: tc.clone() });
            session.record_trust(prop, tc);
        }

        // what the owner learned goes into its own log
        let now = self.bus.now();
        let owner = &mut self.agents[o];
        for c in challenge_results.iter().filter(|c| c.score < 1.0) {
            owner.ledger.history.push(HistoryRecord {
                txn: None,
                timestamp: now,
                actor: rid.clone(),
                counterparty: None,
                property_kind: c.property_kind,
                action: format!("failed {} from {}", probe_name(c.kind), c.delegate),
                violation: true,
                mac_trace: c.evidence.first().cloned(),
            });
        }
        for &i in &audit.flagged {
            let r = &audit.records[i];
            owner.ledger.history.push(HistoryRecord {
                txn: None,
                timestamp: now,
                actor: rid.clone(),
                counterparty: None,
                property_kind: r.property_kind,
                action: "presented an unverifiable history record".to_string(),
                violation: true,
                mac_trace: None,
            });
        }
        owner.ledger.challenge_log.extend(challenge_results.iter().cloned());
        record.challenges = challenge_results;

        let outcome = session.decide(&self.config, self.mode).map_err(SimError::Negotiation)?;
        record.outcome = outcome;
        record.reputation_after =
            self.agents[o].ledger.reputation(&rid).unwrap_or(self.config.initial_reputation);
        if outcome == Outcome::Refused {
            self.say(&oid, "one of the property is refused: refusing request.");
            self.bus.exchange(session_id, &oid, &rid, Message::Decision(outcome))?;
            self.say(&rid, format!("peer {oid} REFUSED to send the file."));
            self.records.push(record);
            return Ok(());
        }

        self.say(&oid, "request accepted.");
        self.bus.exchange(session_id, &oid, &rid, Message::Decision(outcome))?;
        self.say(&rid, format!("peer {oid} accepted to send the file."));
        let props = session.resource_properties.clone();
        self.bus.exchange(
            session_id,
            &oid,
            &rid,
            Message::Transfer { resource_name: resource.to_string(), properties: props.clone() },
        )?;
        match self.agents[r].update_policy(|pol| apply_transfer(pol, resource, domain, &props)) {
            Ok(_) => {
                record.transferred = true;
                let txn = self.next_txn;
                self.next_txn += 1;
                let now = self.bus.now();
                for kind in kinds {
                    let entry = |action: String| HistoryRecord {
                        txn: Some(txn),
                        timestamp: now,
                        actor: rid.clone(),
                        counterparty: None,
                        property_kind: kind,
                        action,
                        violation: false,
                        mac_trace: None,
                    };
                    let mut mine = entry(format!("received {resource} into {domain}"));
                    mine.counterparty = Some(oid.clone());
                    let mut theirs = entry(format!("sent {resource}"));
                    theirs.counterparty = Some(rid.clone());
                    self.agents[r].ledger.history.push(mine);
                    self.agents[o].ledger.history.push(theirs);
                }
            }
            Err(e) => self.say(&rid, format!("cannot store {resource} in {domain}: {e}")),
        }
        self.records.push(record);
        Ok(())
    }
}

fn probe_name(kind: ChallengeKind) -> &'static str {
    match kind {
        ChallengeKind::ConflictingRequest => "conflicting request",
        ChallengeKind::MacChallenge => "MAC challenge",
    }
}

/// Kind whose request a fair peer enforcing `kind` must refuse. Kinds with
/// no conflicting partner borrow one from the rest of the claimed slice.
fn conflicting_probe_kind(kind: PropertyKind, slice: &PolicySlice) -> PropertyKind {
    use PropertyKind::*;
    let partner = |k: PropertyKind| match k {
        Confidentiality | NoShare => Some(Spread),
        Cooperation | Spread => Some(Confidentiality),
        Integrity | NoPublication => None,
    };
    partner(kind).or_else(|| slice.kinds().find_map(partner)).unwrap_or(Spread)
}

/// Command that exercises what `kind` forbids.
fn command_for(kind: PropertyKind) -> &'static str {
    use PropertyKind::*;
    match kind {
        Confidentiality | Cooperation | Spread => "vim",
        Integrity => "tee",
        NoShare | NoPublication => "cp",
    }
}

/// What the delegate expects: the claimed slice compiled on its own, with
/// a canary file in the claimed domain.
fn challenge_for_claim(slice: &PolicySlice, kind: PropertyKind) -> Result<Challenge, SimError> {
    let mut pol = PeerPolicy::new("probe");
    let d = pol.create_domain(&slice.domain_name)?;
    for p in &slice.properties {
        pol.restore_property(Scope::Domain(d), p.clone())?;
    }
    let path = format!("/srv/{}/probe.dat", slice.domain_name);
    pol.add_resource(&path, d)?;
    let subject = SecurityContext::new("user_u", "user_r", "user_t")?;
    Ok(make_challenge_for_path(&path, subject, command_for(kind), &compile_policy(&pol))?)
}

/// Runs delegated probes over the bus on the owner's behalf.
struct Prober<'a> {
    bus: &'a mut Bus,
    transcript: &'a mut Vec<String>,
    serial: &'a mut u64,
    session: u64,
    owner: &'a PeerId,
    target: &'a PeerAgent,
    slice: &'a PolicySlice,
    briefed: Vec<PeerId>,
    failure: Option<SimError>,
}

impl Prober<'_> {
    fn run(&mut self, delegate: &PeerId, kind: PropertyKind, probe: ChallengeKind) -> Result<(f64, Vec<AvcRecord>), SimError> {
        let target = &self.target.id;
        let domain = &self.slice.domain_name;
        if !self.briefed.contains(delegate) {
            let brief = Message::Delegate { target: target.clone(), kind, slice: self.slice.clone() };
            self.bus.exchange(self.session, self.owner, delegate, brief)?;
            self.briefed.push(delegate.clone());
        }
        match probe {
            ChallengeKind::ConflictingRequest => {
                let offered = SecurityProperty::new(conflicting_probe_kind(kind, self.slice));
                let expect_refusal = self.slice.kinds().any(|k| conflicts(k, offered.kind));
                let probe = Message::ConflictingProbe { domain_name: domain.clone(), required: offered.clone() };
                self.bus.exchange(self.session, delegate, target, probe)?;
                let accepted = self.target.answer_conflicting_probe(domain, &offered);
                self.bus.exchange(self.session, target, delegate, Message::ProbeAnswer { accepted })?;
                let pass = accepted != expect_refusal;
                let word = |refuse: bool| if refuse { "refusal" } else { "acceptance" };
                self.transcript.push(format!(
                    "(Chal) {delegate} offered {target} a {offered} resource: got {}, expected {} ({})",
                    word(!accepted),
                    word(expect_refusal),
                    if pass { "pass" } else { "fail" },
                ));
                Ok((if pass { 1.0 } else { 0.0 }, Vec::new()))
            }
            ChallengeKind::MacChallenge => {
                let challenge = challenge_for_claim(self.slice, kind)?;
                self.bus.exchange(self.session, delegate, target, Message::MacChallenge(challenge.request.clone()))?;
                *self.serial += 1;
                let trace = self.target.answer_mac_challenge(&challenge.request, domain, self.bus.now(), *self.serial);
                self.bus.exchange(self.session, target, delegate, Message::AvcTrace(trace.clone()))?;
                let verdict = verify_challenge(&challenge, &trace);
                self.transcript.push(format!(
                    "(Chal) {delegate} challenged {target} with `{}`, expecting {}: {verdict}",
                    challenge.render(),
                    challenge.expected,
                ));
                Ok((if verdict.passed() { 1.0 } else { 0.0 }, trace))
            }
        }
    }
}

impl ChallengeExecutor for Prober<'_> {
    fn probe(&mut self, delegate: &PeerId, target: &PeerId, kind: PropertyKind, probe: ChallengeKind) -> ChallengeResult {
        let (score, evidence) = match self.run(delegate, kind, probe) {
            Ok(v) => v,
            Err(e) => {
                self.failure.get_or_insert(e);
                (0.0, Vec::new())
            }
        };
        let result = ChallengeResult {
            delegate: delegate.clone(),
            target: target.clone(),
            property_kind: kind,
            kind: probe,
            score,
            evidence,
        };
        if let Err(e) = self.bus.exchange(self.session, delegate, self.owner, Message::ChallengeReport(result.clone())) {
            self.failure.get_or_insert(e);
        }
        result
    }
}
