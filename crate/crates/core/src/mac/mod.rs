//! Projection of peer-to-peer properties onto SELinux-style rule sets.
//!
//! Every rule set allows the full default vocabulary for `file` and `dir`
//! and then subtracts per-kind `neverallow` sets. Deny overrides allow.

mod avc;
mod challenge;
mod compile;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::policy::{PropertyKind, ResourceId};

pub use avc::{parse_avc, AvcError, AvcRecord, SecurityContext};
pub use challenge::{
    make_challenge, make_challenge_for_path, probe_for_command, verify_challenge, Challenge, ChallengeRequest,
    Probe, Verdict,
};
pub use compile::{
    compile_policy, emit_contexts, emit_rules, parse_rules, sanitize_label, CompiledDomain, CompiledPolicy,
    CompiledResource, RuleStanza,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectClass {
    File,
    Dir,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; 2] = [ObjectClass::File, ObjectClass::Dir];

    pub fn as_str(self) -> &'static str {
        match self {
            ObjectClass::File => "file",
            ObjectClass::Dir => "dir",
        }
    }

    /// The permission vocabulary, in canonical emission order.
    pub fn vocabulary(self) -> &'static [Perm] {
        use Perm::*;
        match self {
            ObjectClass::File => {
                &[Read, Write, Unlink, Create, Append, Mounton, Rename, Lock, Execute, Getattr, Setattr]
            }
            ObjectClass::Dir => &[
                Read, Write, Unlink, Search, Create, Mounton, Getattr, Setattr, Rename, AddName, RemoveName,
                Reparent, Rmdir,
            ],
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ObjectClass {
    type Err = MacError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "file" => Ok(ObjectClass::File),
            "dir" => Ok(ObjectClass::Dir),
            other => Err(MacError::UnknownClass(other.to_string())),
        }
    }
}

/// Every permission name appearing in either class vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Perm {
    Read,
    Write,
    Unlink,
    Create,
    Append,
    Mounton,
    Rename,
    Lock,
    Execute,
    Getattr,
    Setattr,
    Search,
    AddName,
    RemoveName,
    Reparent,
    Rmdir,
}

impl Perm {
    const ALL: [Perm; 16] = [
        Perm::Read,
        Perm::Write,
        Perm::Unlink,
        Perm::Create,
        Perm::Append,
        Perm::Mounton,
        Perm::Rename,
        Perm::Lock,
        Perm::Execute,
        Perm::Getattr,
        Perm::Setattr,
        Perm::Search,
        Perm::AddName,
        Perm::RemoveName,
        Perm::Reparent,
        Perm::Rmdir,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Perm::Read => "read",
            Perm::Write => "write",
            Perm::Unlink => "unlink",
            Perm::Create => "create",
            Perm::Append => "append",
            Perm::Mounton => "mounton",
            Perm::Rename => "rename",
            Perm::Lock => "lock",
            Perm::Execute => "execute",
            Perm::Getattr => "getattr",
            Perm::Setattr => "setattr",
            Perm::Search => "search",
            Perm::AddName => "add_name",
            Perm::RemoveName => "remove_name",
            Perm::Reparent => "reparent",
            Perm::Rmdir => "rmdir",
        }
    }

    /// Parses a permission name, also accepting the misspellings `mounon`
    /// and `geattr` found in hand-written rule listings.
    pub fn parse_lenient(s: &str) -> Option<Perm> {
        match s {
            "mounon" => Some(Perm::Mounton),
            "geattr" => Some(Perm::Getattr),
            _ => Perm::ALL.into_iter().find(|p| p.as_str() == s),
        }
    }

    fn bit(self) -> u32 {
        1 << self as u32
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A permission checked against its class vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Permission {
    pub class: ObjectClass,
    pub perm: Perm,
}

impl Permission {
    pub fn new(class: ObjectClass, name: &str) -> Result<Self, MacError> {
        match Perm::parse_lenient(name) {
            Some(perm) if class.vocabulary().contains(&perm) => Ok(Permission { class, perm }),
            _ => Err(MacError::UnknownPermission { class, name: name.to_string() }),
        }
    }
}

/// Bit set of permissions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct PermSet(u32);

impl PermSet {
    pub const EMPTY: PermSet = PermSet(0);

    pub fn of(perms: &[Perm]) -> Self {
        PermSet(perms.iter().fold(0, |acc, p| acc | p.bit()))
    }

    pub fn vocabulary(class: ObjectClass) -> Self {
        PermSet::of(class.vocabulary())
    }

    pub fn insert(&mut self, p: Perm) {
        self.0 |= p.bit();
    }

    pub fn contains(self, p: Perm) -> bool {
        self.0 & p.bit() != 0
    }

    pub fn union(self, other: PermSet) -> PermSet {
        PermSet(self.0 | other.0)
    }

    pub fn is_subset(self, other: PermSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    /// Members in `class` vocabulary order. Members outside that vocabulary
    /// are skipped.
    pub fn iter_in(self, class: ObjectClass) -> impl Iterator<Item = Perm> {
        class.vocabulary().iter().copied().filter(move |p| self.contains(*p))
    }
}

/// One permission set per object class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ClassPerms {
    pub file: PermSet,
    pub dir: PermSet,
}

impl ClassPerms {
    pub fn get(&self, class: ObjectClass) -> PermSet {
        match class {
            ObjectClass::File => self.file,
            ObjectClass::Dir => self.dir,
        }
    }

    pub fn get_mut(&mut self, class: ObjectClass) -> &mut PermSet {
        match class {
            ObjectClass::File => &mut self.file,
            ObjectClass::Dir => &mut self.dir,
        }
    }

    pub fn union(self, other: ClassPerms) -> ClassPerms {
        ClassPerms { file: self.file.union(other.file), dir: self.dir.union(other.dir) }
    }

    pub fn is_empty(&self) -> bool {
        self.file.is_empty() && self.dir.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MacRuleSet {
    pub allow: ClassPerms,
    pub neverallow: ClassPerms,
}

impl Default for MacRuleSet {
    /// The default rule set: full vocabulary allowed, nothing denied.
    fn default() -> Self {
        MacRuleSet {
            allow: ClassPerms {
                file: PermSet::vocabulary(ObjectClass::File),
                dir: PermSet::vocabulary(ObjectClass::Dir),
            },
            neverallow: ClassPerms::default(),
        }
    }
}

impl MacRuleSet {
    /// Default plus the `neverallow` sets of a single kind.
    pub fn for_kind(kind: PropertyKind) -> Self {
        use Perm::*;
        let (file, dir): (&[Perm], &[Perm]) = match kind {
            PropertyKind::Confidentiality => (&[Read, Append, Setattr], &[Read, Search, Setattr]),
            PropertyKind::Integrity => (
                &[Write, Unlink, Append, Rename, Setattr],
                &[Write, Unlink, Setattr, Rename, RemoveName, Rmdir],
            ),
            PropertyKind::NoPublication | PropertyKind::NoShare => (
                &[Create, Setattr, Mounton],
                &[Create, Setattr, AddName, RemoveName, Rmdir, Mounton],
            ),
            PropertyKind::Cooperation | PropertyKind::Spread => (&[], &[]),
        };
        MacRuleSet {
            neverallow: ClassPerms { file: PermSet::of(file), dir: PermSet::of(dir) },
            ..MacRuleSet::default()
        }
    }

    pub fn union(&self, other: &MacRuleSet) -> MacRuleSet {
        MacRuleSet { allow: self.allow.union(other.allow), neverallow: self.neverallow.union(other.neverallow) }
    }

    pub fn is_default(&self) -> bool {
        *self == MacRuleSet::default()
    }
}

/// Rule set for a set of kinds: the union of each kind's rule set.
pub fn kind_ruleset(kinds: impl IntoIterator<Item = PropertyKind>) -> MacRuleSet {
    kinds
        .into_iter()
        .fold(MacRuleSet::default(), |acc, k| acc.union(&MacRuleSet::for_kind(k)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Decision {
    Granted,
    Denied,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Granted => "granted",
            Decision::Denied => "denied",
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Decision {
    type Err = MacError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "granted" => Ok(Decision::Granted),
            "denied" => Ok(Decision::Denied),
            other => Err(MacError::UnknownDecision(other.to_string())),
        }
    }
}

/// Deny-overrides access decision.
pub fn check_access(ruleset: &MacRuleSet, class: ObjectClass, permission: &str) -> Result<Decision, MacError> {
    let p = Permission::new(class, permission)?;
    let denied = ruleset.neverallow.get(class).contains(p.perm);
    let allowed = ruleset.allow.get(class).contains(p.perm);
    Ok(if denied || !allowed { Decision::Denied } else { Decision::Granted })
}

/// The per-kind mapping as a rules listing: a `Default:` stanza followed by
/// one stanza per group of kinds sharing a rule set.
pub fn emit_kind_table() -> String {
    let mut out = String::from("Default:\n");
    compile::write_lines(&mut out, &MacRuleSet::default().allow, "allow");
    let groups: [(&str, &[PropertyKind]); 4] = [
        ("Confidentiality", &[PropertyKind::Confidentiality]),
        ("Integrity", &[PropertyKind::Integrity]),
        ("No publication, NoShare", &[PropertyKind::NoPublication, PropertyKind::NoShare]),
        ("Cooperation, Spread", &[PropertyKind::Cooperation, PropertyKind::Spread]),
    ];
    for (title, kinds) in groups {
        let rules = MacRuleSet::for_kind(kinds[0]);
        if rules.neverallow.is_empty() {
            out.push_str(&format!("{title}: Default\n"));
        } else {
            out.push_str(&format!("{title}: Default +\n"));
            compile::write_lines(&mut out, &rules.neverallow, "neverallow");
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MacError {
    #[error("unknown object class `{0}`")]
    UnknownClass(String),
    #[error("`{name}` is not a {class} permission")]
    UnknownPermission { class: ObjectClass, name: String },
    #[error("unknown decision `{0}`")]
    UnknownDecision(String),
    #[error("resource {0} is not in the compiled policy")]
    UnknownResource(ResourceId),
    #[error("no compiled resource at `{0}`")]
    UnknownPath(String),
    #[error("no probe permission is known for command `{0}`")]
    UnknownCommand(String),
    #[error("invalid security context `{0}`")]
    InvalidContext(String),
    #[error("rules line {line}: {message}")]
    Rules { line: usize, message: String },
    #[error("challenge: {0}")]
    Challenge(String),
    #[error(transparent)]
    Avc(#[from] AvcError),
}
