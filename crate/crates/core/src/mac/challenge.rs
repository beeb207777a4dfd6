//! Enforcement challenges: ask a peer to run a command under a given subject
//! context against a protected file and return the resulting AVC trace.

use std::fmt;

use super::{check_access, AvcRecord, CompiledPolicy, CompiledResource, Decision, MacError, ObjectClass, SecurityContext};
use crate::policy::ResourceId;

/// The permission a command stub exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Probe {
    Read,
    Write,
    Create,
}

impl Probe {
    pub fn permission(self) -> &'static str {
        match self {
            Probe::Read => "read",
            Probe::Write => "write",
            Probe::Create => "create",
        }
    }
}

/// Viewers probe `read`, in-place writers probe `write`, and copy/publish
/// style commands probe `create`.
pub fn probe_for_command(stub: &str) -> Option<Probe> {
    let program = stub.split_whitespace().next()?;
    let program = program.rsplit('/').next().unwrap_or(program);
    match program {
        "vim" | "vi" | "view" | "cat" | "less" | "more" | "head" | "mplayer" => Some(Probe::Read),
        "tee" | "truncate" | "dd" => Some(Probe::Write),
        "cp" | "touch" | "install" | "publish" => Some(Probe::Create),
        _ => None,
    }
}

/// The single-line request: `scontext=<ctx> <command> <path>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChallengeRequest {
    pub scontext: SecurityContext,
    pub command_stub: String,
    pub target_path: String,
}

impl ChallengeRequest {
    pub fn parse(line: &str) -> Result<Self, MacError> {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(MacError::Challenge(format!("expected `scontext=<ctx> <command> <path>`, got `{line}`")));
        }
        let ctx = toks[0]
            .strip_prefix("scontext=")
            .ok_or_else(|| MacError::Challenge(format!("expected `scontext=`, got `{}`", toks[0])))?;
        Ok(ChallengeRequest {
            scontext: ctx.parse()?,
            command_stub: toks[1..toks.len() - 1].join(" "),
            target_path: toks[toks.len() - 1].to_string(),
        })
    }

    pub fn target_name(&self) -> &str {
        self.target_path.rsplit('/').next().unwrap_or(&self.target_path)
    }
}

impl fmt::Display for ChallengeRequest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "scontext={} {} {}", self.scontext, self.command_stub, self.target_path)
    }
}

/// A request plus the trace a correctly enforcing peer must return.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Challenge {
    pub request: ChallengeRequest,
    pub expected: Decision,
    pub expected_permissions: Vec<String>,
    /// Type of the compiled label on the target file.
    pub target_type: String,
}

impl Challenge {
    /// The request line sent to the challenged peer.
    pub fn render(&self) -> String {
        self.request.to_string()
    }

    /// Request line followed by `expect=` and `ttype=` lines.
    pub fn to_wire(&self) -> String {
        format!(
            "{}\nexpect={} {{ {} }}\nttype={}\n",
            self.request,
            self.expected,
            self.expected_permissions.join(" "),
            self.target_type
        )
    }

    pub fn from_wire(text: &str) -> Result<Self, MacError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let request = ChallengeRequest::parse(lines.next().ok_or_else(|| MacError::Challenge("empty challenge".into()))?)?;
        let (mut expect, mut ttype) = (None, None);
        for line in lines {
            if let Some(v) = line.strip_prefix("expect=") {
                expect = Some(parse_expectation(v)?);
            } else if let Some(v) = line.strip_prefix("ttype=") {
                ttype = Some(v.trim().to_string());
            } else {
                return Err(MacError::Challenge(format!("unexpected line `{line}`")));
            }
        }
        let (expected, expected_permissions) =
            expect.ok_or_else(|| MacError::Challenge("missing `expect=` line".into()))?;
        let target_type = ttype.ok_or_else(|| MacError::Challenge("missing `ttype=` line".into()))?;
        Ok(Challenge { request, expected, expected_permissions, target_type })
    }
}

fn parse_expectation(v: &str) -> Result<(Decision, Vec<String>), MacError> {
    let (decision, rest) = v.trim().split_once(char::is_whitespace).unwrap_or((v.trim(), ""));
    let decision: Decision = decision.parse()?;
    let rest = rest.trim();
    let perms: Vec<String> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.strip_prefix('{')
            .and_then(|r| r.strip_suffix('}'))
            .ok_or_else(|| MacError::Challenge(format!("expected `{{ perms }}`, got `{rest}`")))?
            .split_whitespace()
            .map(String::from)
            .collect()
    };
    if decision == Decision::Denied && perms.is_empty() {
        return Err(MacError::Challenge("a denied expectation needs permissions".into()));
    }
    Ok((decision, perms))
}

fn challenge_for(
    resource: &CompiledResource,
    subject: SecurityContext,
    command_stub: &str,
) -> Result<Challenge, MacError> {
    let probe = probe_for_command(command_stub).ok_or_else(|| MacError::UnknownCommand(command_stub.to_string()))?;
    let expected = check_access(&resource.ruleset, ObjectClass::File, probe.permission())?;
    Ok(Challenge {
        request: ChallengeRequest {
            scontext: subject,
            command_stub: command_stub.to_string(),
            target_path: resource.path.clone(),
        },
        expected,
        expected_permissions: vec![probe.permission().to_string()],
        target_type: resource.context.type_name.clone(),
    })
}

/// Builds a challenge whose expected outcome is what the compiled rules
/// decide for the command's probe permission.
pub fn make_challenge(
    resource: ResourceId,
    subject: SecurityContext,
    command_stub: &str,
    compiled: &CompiledPolicy,
) -> Result<Challenge, MacError> {
    let r = compiled.resource(resource).ok_or(MacError::UnknownResource(resource))?;
    challenge_for(r, subject, command_stub)
}

pub fn make_challenge_for_path(
    path: &str,
    subject: SecurityContext,
    command_stub: &str,
    compiled: &CompiledPolicy,
) -> Result<Challenge, MacError> {
    let r = compiled.resource_by_path(path).ok_or_else(|| MacError::UnknownPath(path.to_string()))?;
    challenge_for(r, subject, command_stub)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    Fail(String),
}

impl Verdict {
    pub fn passed(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Pass => f.write_str("pass"),
            Verdict::Fail(reason) => write!(f, "fail: {reason}"),
        }
    }
}

fn mismatch(challenge: &Challenge, record: &AvcRecord) -> Option<String> {
    if record.decision != challenge.expected {
        return Some(format!("expected {}, trace shows {}", challenge.expected, record.decision));
    }
    if let Some(p) = challenge.expected_permissions.iter().find(|p| !record.permissions.contains(p)) {
        return Some(format!("expected permission `{p}` missing from {{ {} }}", record.permissions.join(" ")));
    }
    if record.tcontext.type_name != challenge.target_type {
        return Some(format!(
            "target type {} does not match compiled label {}",
            record.tcontext.type_name, challenge.target_type
        ));
    }
    None
}

/// Passes iff some record for the target file carries the expected
/// decision, the expected permissions and the compiled target type.
pub fn verify_challenge(challenge: &Challenge, trace: &[AvcRecord]) -> Verdict {
    if trace.is_empty() {
        return Verdict::Fail("trace is empty".into());
    }
    let name = challenge.request.target_name();
    let mut first_reason = None;
    for record in trace.iter().filter(|r| r.name == name) {
        match mismatch(challenge, record) {
            None => return Verdict::Pass,
            Some(reason) => {
                first_reason.get_or_insert(reason);
            }
        }
    }
    Verdict::Fail(first_reason.unwrap_or_else(|| format!("no record for `{name}`")))
}
