//! AVC audit lines of the form
//!
//! ```text
//! audit(1229395253.757:369): avc: denied { read } for pid=4241 comm="vim"
//! name="secret.txt" dev=sda3 ino=179226 scontext=user_u:user_r:user_t
//! tcontext=system_u:object_r:domainA_t tclass=file
//! ```
//!
//! Line breaks inside a record are treated as ordinary whitespace.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{Decision, MacError};

/// `user:role:type` label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SecurityContext {
    pub user: String,
    pub role: String,
    pub type_name: String,
}

impl SecurityContext {
    pub fn new(user: &str, role: &str, type_name: &str) -> Result<Self, MacError> {
        let ok = |s: &str| !s.is_empty() && !s.contains(':') && !s.contains(char::is_whitespace);
        if ok(user) && ok(role) && ok(type_name) {
            Ok(SecurityContext { user: user.into(), role: role.into(), type_name: type_name.into() })
        } else {
            Err(MacError::InvalidContext(format!("{user}:{role}:{type_name}")))
        }
    }

    /// `system_u:object_r:<type>`, the context given to files.
    pub fn object(type_name: &str) -> Self {
        SecurityContext { user: "system_u".into(), role: "object_r".into(), type_name: type_name.into() }
    }
}

impl fmt::Display for SecurityContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.user, self.role, self.type_name)
    }
}

impl FromStr for SecurityContext {
    type Err = MacError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(':');
        match (parts.next(), parts.next(), parts.next(), parts.next()) {
            (Some(u), Some(r), Some(t), None) => SecurityContext::new(u, r, t),
            _ => Err(MacError::InvalidContext(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AvcRecord {
    pub timestamp: String,
    pub serial: String,
    pub decision: Decision,
    pub permissions: Vec<String>,
    pub pid: u32,
    pub comm: String,
    pub name: String,
    pub dev: String,
    pub ino: u64,
    pub scontext: SecurityContext,
    pub tcontext: SecurityContext,
    pub tclass: String,
}

impl fmt::Display for AvcRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "audit({}:{}): avc: {} {{ {} }} for pid={} comm=\"{}\" name=\"{}\" dev={} ino={} scontext={} tcontext={} tclass={}",
            self.timestamp,
            self.serial,
            self.decision,
            self.permissions.join(" "),
            self.pid,
            self.comm,
            self.name,
            self.dev,
            self.ino,
            self.scontext,
            self.tcontext,
            self.tclass,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("AVC parse error at `{token}`: {message}")]
pub struct AvcError {
    pub token: String,
    pub message: String,
}

fn fail<T>(token: &str, message: &str) -> Result<T, AvcError> {
    Err(AvcError { token: token.chars().take(40).collect(), message: message.to_string() })
}

/// Whitespace tokenizer that keeps `key="quoted value"` together.
fn tokens(s: &str) -> Result<Vec<&str>, AvcError> {
    let mut out = Vec::new();
    let bytes = s.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let mut quoted = false;
        while i < bytes.len() && (quoted || !bytes[i].is_ascii_whitespace()) {
            if bytes[i] == b'"' {
                quoted = !quoted;
            }
            i += 1;
        }
        if quoted {
            return fail(&s[start..], "unterminated quote");
        }
        out.push(&s[start..i]);
    }
    Ok(out)
}

pub fn parse_avc(line: &str) -> Result<AvcRecord, AvcError> {
    let mut line = line.trim();
    if line.is_empty() {
        return fail("", "empty record");
    }
    if let Some(rest) = line.strip_prefix("type=AVC msg=") {
        line = rest;
    }

    let Some(rest) = line.strip_prefix("audit(") else {
        return fail(line, "expected `audit(`");
    };
    let Some(close) = rest.find("):") else {
        return fail(rest, "expected `):` after the audit stamp");
    };
    let stamp = &rest[..close];
    let Some((timestamp, serial)) = stamp.split_once(':') else {
        return fail(stamp, "stamp must be `<time>:<serial>`");
    };
    if timestamp.is_empty() || serial.is_empty() {
        return fail(stamp, "stamp must be `<time>:<serial>`");
    }

    let toks = tokens(&rest[close + 2..])?;
    let mut it = toks.into_iter();
    match it.next() {
        Some("avc:") => {}
        Some(t) => return fail(t, "expected `avc:`"),
        None => return fail("", "missing `avc:`"),
    }
    let decision = match it.next() {
        Some("denied") => Decision::Denied,
        Some("granted") => Decision::Granted,
        Some(t) => return fail(t, "expected `denied` or `granted`"),
        None => return fail("", "missing decision"),
    };
    match it.next() {
        Some("{") => {}
        Some(t) => return fail(t, "expected `{`"),
        None => return fail("", "missing permission list"),
    }
    let mut permissions = Vec::new();
    loop {
        match it.next() {
            Some("}") => break,
            Some(t) if t.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') => permissions.push(t.to_string()),
            Some(t) => return fail(t, "bad permission name"),
            None => return fail("", "unterminated permission list"),
        }
    }
    if permissions.is_empty() {
        return fail("}", "empty permission list");
    }
    match it.next() {
        Some("for") => {}
        Some(t) => return fail(t, "expected `for`"),
        None => return fail("", "missing `for`"),
    }

    const KEYS: [&str; 8] = ["pid", "comm", "name", "dev", "ino", "scontext", "tcontext", "tclass"];
    let mut values: [Option<&str>; 8] = [None; 8];
    for tok in it {
        let Some((key, value)) = tok.split_once('=') else {
            return fail(tok, "expected `key=value`");
        };
        let Some(slot) = KEYS.iter().position(|k| *k == key) else {
            // other audit fields (path=, permissive=) are not part of the record
            continue;
        };
        if values[slot].is_some() {
            return fail(tok, "duplicate field");
        }
        values[slot] = Some(value);
    }
    let mut field = |i: usize| -> Result<&str, AvcError> {
        values[i].take().map_or_else(|| fail(KEYS[i], "missing field"), Ok)
    };
    let unquote = |v: &str| -> String { v.strip_prefix('"').and_then(|v| v.strip_suffix('"')).unwrap_or(v).to_string() };
    let context = |v: &str| -> Result<SecurityContext, AvcError> {
        v.parse().or_else(|_| fail(v, "invalid security context"))
    };

    let pid_s = field(0)?;
    let pid = pid_s.parse().or_else(|_| fail(pid_s, "pid must be an integer"))?;
    let comm = unquote(field(1)?);
    let name = unquote(field(2)?);
    let dev = field(3)?.to_string();
    let ino_s = field(4)?;
    let ino = ino_s.parse().or_else(|_| fail(ino_s, "ino must be an integer"))?;
    let scontext = context(field(5)?)?;
    let tcontext = context(field(6)?)?;
    let tclass = field(7)?.to_string();

    Ok(AvcRecord {
        timestamp: timestamp.to_string(),
        serial: serial.to_string(),
        decision,
        permissions,
        pid,
        comm,
        name,
        dev,
        ino,
        scontext,
        tcontext,
        tclass,
    })
}
