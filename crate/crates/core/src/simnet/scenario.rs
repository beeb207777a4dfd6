//! Scenario files: one statement per line, `#` starts a comment.
//!
//! ```text
//! seed 7
//! config refuse_threshold 0.2
//! peer JFL
//! peer David honest
//! domain JFL ensib
//! resource JFL contract ensib
//! property JFL ensib confidentiality
//! property JFL free cooperation(partners)
//! rproperty JFL contract noshare
//! publish JFL report.pdf ensib confidentiality integrity
//! delete JFL free
//! knows JFL C1 0.8
//! history JFL David integrity 3 violation
//! display JFL
//! ask David JFL contract free
//! ```

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::negotiation::DecisionMode;
use crate::policy::{DomainRef, PropertyKind, SecurityProperty};
use crate::trust::TrustConfig;

/// How a simulated peer behaves when it is the requester.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Behavior {
    /// Truthful slices, refuses requests that conflict with its policy,
    /// answers MAC challenges from its own compiled rules.
    Honest,
    /// Claims an arbitrary slice without knowing what is required.
    BlindLiar,
    /// Claims exactly what the owner requires, then accepts every probe and
    /// enforces nothing.
    InformedLiar,
    /// Truthful slices, but pads its history with clean records naming
    /// peers that do not exist.
    LogForger,
}

impl Behavior {
    pub const ALL: [Behavior; 4] = [Behavior::Honest, Behavior::BlindLiar, Behavior::InformedLiar, Behavior::LogForger];

    pub fn as_str(self) -> &'static str {
        match self {
            Behavior::Honest => "honest",
            Behavior::BlindLiar => "blind-liar",
            Behavior::InformedLiar => "informed-liar",
            Behavior::LogForger => "log-forger",
        }
    }

    pub fn is_liar(self) -> bool {
        self != Behavior::Honest
    }
}

impl fmt::Display for Behavior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Behavior {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Behavior::ALL
            .into_iter()
            .find(|b| b.as_str() == s)
            .ok_or_else(|| format!("unknown behavior `{s}` (expected honest, blind-liar, informed-liar or log-forger)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeerDecl {
    pub name: String,
    pub behavior: Behavior,
}

/// One scripted step. Peers are referred to by name.
#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    CreateDomain { peer: String, name: String },
    DeleteDomain { peer: String, name: String },
    AddResource { peer: String, path: String, domain: String },
    AddProperty { peer: String, domain: String, property: SecurityProperty },
    AddResourceProperty { peer: String, path: String, property: SecurityProperty },
    Publish { peer: String, path: String, domain: String, properties: Vec<SecurityProperty> },
    Knows { peer: String, other: String, trust: f64 },
    /// An observation already in `peer`'s log about `actor`.
    History { peer: String, actor: String, kind: PropertyKind, tick: u64, violation: bool },
    Display { peer: String },
    Ask { requester: String, owner: String, resource: String, domain: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub seed: u64,
    pub peers: Vec<PeerDecl>,
    pub actions: Vec<Action>,
    pub config: TrustConfig,
    pub mode: DecisionMode,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario { seed: 0, peers: Vec::new(), actions: Vec::new(), config: TrustConfig::default(), mode: DecisionMode::Banded }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl Scenario {
    pub fn peer(&self, name: &str) -> Option<&PeerDecl> {
        self.peers.iter().find(|p| p.name == name)
    }

    /// Checks that every action names declared peers and the config is sane.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        for (i, p) in self.peers.iter().enumerate() {
            if p.name.is_empty() {
                return invalid("empty peer name".into());
            }
            if self.peers[..i].iter().any(|q| q.name == p.name) {
                return invalid(format!("peer `{}` declared twice", p.name));
            }
        }
        for a in &self.actions {
            for name in a.peers() {
                if self.peer(name).is_none() {
                    return invalid(format!("undeclared peer `{name}`"));
                }
            }
            match a {
                Action::Knows { peer, other, trust } => {
                    if peer == other {
                        return invalid(format!("`{peer}` cannot rate itself"));
                    }
                    if !(0.0..=1.0).contains(trust) {
                        return invalid(format!("trust {trust} outside [0, 1]"));
                    }
                }
                Action::Ask { requester, owner, .. } if requester == owner => {
                    return invalid(format!("`{requester}` cannot ask itself"));
                }
                Action::Ask { resource, domain, .. } if resource.is_empty() || domain.is_empty() => {
                    return invalid("ask needs a resource and a domain".into());
                }
                _ => {}
            }
        }
        self.config.validate().map_err(|e| ScenarioError::Invalid(e.to_string()))
    }
}

impl Action {
    pub fn peers(&self) -> Vec<&str> {
        match self {
            Action::CreateDomain { peer, .. }
            | Action::DeleteDomain { peer, .. }
            | Action::AddResource { peer, .. }
            | Action::AddProperty { peer, .. }
            | Action::AddResourceProperty { peer, .. }
            | Action::Publish { peer, .. }
            | Action::Display { peer } => vec![peer],
            Action::Knows { peer, other, .. } => vec![peer, other],
            Action::History { peer, actor, .. } => vec![peer, actor],
            Action::Ask { requester, owner, .. } => vec![requester, owner],
        }
    }
}

/// `kind` or `kind(target,target)`. Targets are domain names.
pub fn parse_property(token: &str) -> Result<SecurityProperty, String> {
    let (kind, targets) = match token.split_once('(') {
        None => (token, None),
        Some((k, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(|| format!("unclosed `(` in `{token}`"))?;
            (k, Some(inner))
        }
    };
    let kind: PropertyKind = kind.parse().map_err(|e: crate::policy::UnknownKind| e.to_string())?;
    let Some(inner) = targets else {
        return Ok(SecurityProperty::new(kind));
    };
    let names: Vec<&str> = inner.split(',').map(str::trim).collect();
    if names.iter().any(|n| n.is_empty()) {
        return Err(format!("empty target in `{token}`"));
    }
    SecurityProperty::with_targets(kind, names.into_iter().map(|n| DomainRef::External(n.to_string())))
        .map_err(|e| e.to_string())
}

fn config_key(config: &mut TrustConfig, mode: &mut DecisionMode, key: &str, value: &str) -> Result<(), String> {
    let real = || value.parse::<f64>().map_err(|_| format!("`{value}` is not a number"));
    match key {
        "refuse_threshold" => config.refuse_threshold = real()?,
        "full_threshold" | "full_trust_threshold" => config.full_trust_threshold = real()?,
        "refuse_decrement" => config.refuse_decrement = real()?,
        "partial_decrement" => config.partial_decrement = real()?,
        "initial_reputation" => config.initial_reputation = real()?,
        "challenge_weight" => config.challenge_weight = real()?,
        "eval_weight" => config.eval_weight = real()?,
        "history_window" => {
            config.history_window = value.parse().map_err(|_| format!("`{value}` is not a tick count"))?
        }
        "mode" => {
            *mode = match value {
                "banded" => DecisionMode::Banded,
                "strict" => DecisionMode::Strict,
                _ => return Err(format!("unknown mode `{value}`")),
            }
        }
        _ => return Err(format!("unknown config key `{key}`")),
    }
    Ok(())
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut sc = Scenario::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |message: String| ScenarioError::Syntax { line, message };
        let content = raw.split('#').next().unwrap_or("");
        let words: Vec<&str> = content.split_whitespace().collect();
        let Some((&head, args)) = words.split_first() else {
            continue;
        };
        let arity = |lo: usize, hi: usize| {
            if args.len() < lo || args.len() > hi {
                Err(err(format!("`{head}` takes {} arguments, got {}", if lo == hi { lo.to_string() } else { format!("{lo}..{hi}") }, args.len())))
            } else {
                Ok(())
            }
        };
        let s = |i: usize| args[i].to_string();
        let prop = |t: &str| parse_property(t).map_err(err);
        let action = match head {
            "seed" => {
                arity(1, 1)?;
                sc.seed = args[0].parse().map_err(|_| err(format!("bad seed `{}`", args[0])))?;
                continue;
            }
            "config" => {
                arity(2, 2)?;
                config_key(&mut sc.config, &mut sc.mode, args[0], args[1]).map_err(err)?;
                continue;
            }
            "peer" => {
                arity(1, 2)?;
                let behavior = match args.get(1) {
                    Some(b) => b.parse().map_err(err)?,
                    None => Behavior::Honest,
                };
                if sc.peer(args[0]).is_some() {
                    return Err(err(format!("peer `{}` declared twice", args[0])));
                }
                sc.peers.push(PeerDecl { name: s(0), behavior });
                continue;
            }
            "behavior" => {
                arity(2, 2)?;
                let behavior = args[1].parse().map_err(err)?;
                let decl = sc.peers.iter_mut().find(|p| p.name == args[0]);
                decl.ok_or_else(|| err(format!("undeclared peer `{}`", args[0])))?.behavior = behavior;
                continue;
            }
            "domain" => {
                arity(2, 2)?;
                Action::CreateDomain { peer: s(0), name: s(1) }
            }
            "delete" => {
                arity(2, 2)?;
                Action::DeleteDomain { peer: s(0), name: s(1) }
            }
            "resource" => {
                arity(3, 3)?;
                Action::AddResource { peer: s(0), path: s(1), domain: s(2) }
            }
            "property" => {
                arity(3, 3)?;
                Action::AddProperty { peer: s(0), domain: s(1), property: prop(args[2])? }
            }
            "rproperty" => {
                arity(3, 3)?;
                Action::AddResourceProperty { peer: s(0), path: s(1), property: prop(args[2])? }
            }
            "publish" => {
                arity(3, usize::MAX)?;
                let properties = args[3..].iter().map(|t| prop(t)).collect::<Result<_, _>>()?;
                Action::Publish { peer: s(0), path: s(1), domain: s(2), properties }
            }
            "knows" => {
                arity(3, 3)?;
                let trust = args[2].parse().map_err(|_| err(format!("bad trust `{}`", args[2])))?;
                Action::Knows { peer: s(0), other: s(1), trust }
            }
            "history" => {
                arity(5, 5)?;
                let kind = args[2].parse().map_err(|e: crate::policy::UnknownKind| err(e.to_string()))?;
                let tick = args[3].parse().map_err(|_| err(format!("bad tick `{}`", args[3])))?;
                let violation = match args[4] {
                    "violation" => true,
                    "clean" => false,
                    other => return Err(err(format!("expected `clean` or `violation`, got `{other}`"))),
                };
                Action::History { peer: s(0), actor: s(1), kind, tick, violation }
            }
            "display" => {
                arity(1, 1)?;
                Action::Display { peer: s(0) }
            }
            "ask" => {
                arity(4, 4)?;
                Action::Ask { requester: s(0), owner: s(1), resource: s(2), domain: s(3) }
            }
            other => return Err(err(format!("unknown statement `{other}`"))),
        };
        if let Some(missing) = action.peers().into_iter().find(|p| sc.peer(p).is_none()) {
            return Err(err(format!("undeclared peer `{missing}`")));
        }
        sc.actions.push(action);
    }
    sc.validate()?;
    Ok(sc)
}
