use std::collections::HashSet;

use super::{kind_ruleset, ClassPerms, MacError, MacRuleSet, ObjectClass, Perm, PermSet, SecurityContext};
use crate::policy::{DomainId, PeerPolicy, ResourceId};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledDomain {
    pub id: DomainId,
    pub name: String,
    /// SELinux type, e.g. `domainA_t`.
    pub label: String,
    pub ruleset: MacRuleSet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompiledResource {
    pub id: ResourceId,
    pub path: String,
    pub domain: DomainId,
    pub context: SecurityContext,
    /// Domain rules tightened by the resource's own properties.
    pub ruleset: MacRuleSet,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompiledPolicy {
    pub domains: Vec<CompiledDomain>,
    pub resources: Vec<CompiledResource>,
}

impl CompiledPolicy {
    pub fn domain(&self, id: DomainId) -> Option<&CompiledDomain> {
        self.domains.iter().find(|d| d.id == id)
    }

    pub fn domain_by_name(&self, name: &str) -> Option<&CompiledDomain> {
        self.domains.iter().find(|d| d.name == name)
    }

    pub fn resource(&self, id: ResourceId) -> Option<&CompiledResource> {
        self.resources.iter().find(|r| r.id == id)
    }

    pub fn resource_by_path(&self, path: &str) -> Option<&CompiledResource> {
        self.resources.iter().find(|r| r.path == path)
    }
}

/// Turns a domain name into an SELinux type name: characters outside
/// `[A-Za-z0-9]` become `_`, and `_t` is appended.
pub fn sanitize_label(name: &str) -> String {
    let mut s: String = name.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    s.push_str("_t");
    s
}

pub fn compile_policy(policy: &PeerPolicy) -> CompiledPolicy {
    let mut used = HashSet::new();
    let domains: Vec<CompiledDomain> = policy
        .domains()
        .iter()
        .map(|d| {
            let mut label = sanitize_label(&d.name);
            if !used.insert(label.clone()) {
                // two names sanitized to the same type
                label = format!("{}_{}_t", label.trim_end_matches("_t"), d.id);
                used.insert(label.clone());
            }
            CompiledDomain {
                id: d.id,
                name: d.name.clone(),
                label,
                ruleset: kind_ruleset(d.properties.iter().map(|p| p.kind)),
            }
        })
        .collect();

    let resources = policy
        .resources()
        .iter()
        .filter_map(|r| {
            let domain = domains.iter().find(|d| d.id == r.domain)?;
            let ruleset = domain.ruleset.union(&kind_ruleset(r.properties.iter().map(|p| p.kind)));
            Some(CompiledResource {
                id: r.id,
                path: r.path.clone(),
                domain: r.domain,
                context: SecurityContext::object(&domain.label),
                ruleset,
            })
        })
        .collect();

    CompiledPolicy { domains, resources }
}

pub(crate) fn write_lines(out: &mut String, perms: &ClassPerms, verb: &str) {
    for class in ObjectClass::ALL {
        let set = perms.get(class);
        if set.is_empty() {
            continue;
        }
        let names: Vec<&str> = set.iter_in(class).map(Perm::as_str).collect();
        out.push_str(&format!("{verb} {class} {{{}}}\n", names.join(" ")));
    }
}

fn write_stanza(out: &mut String, header: &str, rules: &MacRuleSet) {
    out.push_str(header);
    out.push_str(":\n");
    write_lines(out, &rules.allow, "allow");
    write_lines(out, &rules.neverallow, "neverallow");
}

/// Renders compiled rules: a `Default:` stanza, one stanza per domain type,
/// and one `file <path>:` stanza for each resource whose own properties
/// tighten its domain's rules. Stanzas are separated by blank lines.
pub fn emit_rules(compiled: &CompiledPolicy) -> String {
    let mut out = String::new();
    write_stanza(&mut out, "Default", &MacRuleSet::default());
    for d in &compiled.domains {
        out.push('\n');
        write_stanza(&mut out, &d.label, &d.ruleset);
    }
    for r in &compiled.resources {
        let domain_rules = compiled.domain(r.domain).map(|d| d.ruleset);
        if domain_rules != Some(r.ruleset) {
            out.push('\n');
            write_stanza(&mut out, &format!("file {}", r.path), &r.ruleset);
        }
    }
    out
}

/// Context map, one `<path> <context>` line per resource.
pub fn emit_contexts(compiled: &CompiledPolicy) -> String {
    compiled.resources.iter().map(|r| format!("{} {}\n", r.path, r.context)).collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleStanza {
    pub header: String,
    pub ruleset: MacRuleSet,
}

/// Reads rules text back into stanzas. Accepts both the output of
/// [`emit_rules`] and the compact `Name: Default +` form, where the default
/// allow set is implied.
pub fn parse_rules(text: &str) -> Result<Vec<RuleStanza>, MacError> {
    let mut stanzas: Vec<RuleStanza> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| MacError::Rules { line: line_no, message };
        let verb = line.split_whitespace().next().unwrap_or_default();
        if verb == "allow" || verb == "neverallow" {
            let stanza = stanzas.last_mut().ok_or_else(|| err("rule outside a stanza".into()))?;
            let rest = line[verb.len()..].trim_start();
            let (class, body) = rest.split_once(char::is_whitespace).ok_or_else(|| err("missing class".into()))?;
            let class: ObjectClass = class.parse().map_err(|e: MacError| err(e.to_string()))?;
            let body = body.trim();
            let inner = body
                .strip_prefix('{')
                .and_then(|b| b.strip_suffix('}'))
                .ok_or_else(|| err(format!("expected `{{...}}`, got `{body}`")))?;
            let mut set = PermSet::EMPTY;
            for name in inner.split_whitespace() {
                let p = super::Permission::new(class, name).map_err(|e| err(e.to_string()))?;
                set.insert(p.perm);
            }
            let target = if verb == "allow" { &mut stanza.ruleset.allow } else { &mut stanza.ruleset.neverallow };
            let slot = target.get_mut(class);
            *slot = slot.union(set);
            continue;
        }
        let (header, suffix) = line.split_once(':').ok_or_else(|| err(format!("unrecognised line `{line}`")))?;
        let suffix = suffix.trim();
        let allow = match suffix {
            "" => ClassPerms::default(),
            "Default" | "Default +" => MacRuleSet::default().allow,
            other => return Err(err(format!("unexpected stanza suffix `{other}`"))),
        };
        stanzas.push(RuleStanza {
            header: header.trim().to_string(),
            ruleset: MacRuleSet { allow, neverallow: ClassPerms::default() },
        });
    }
    Ok(stanzas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{PropertyKind::*, Scope};
    use crate::xml::{parse_policy, to_peer_policy};

    const SAMPLE_POLICY: &str = r#"<policy>
<domain id="1" name="domainA">
  <property type="confidentiality"><target domainid="3"/></property>
  <property type="integrity"/>
  <property type="cooperation"><target domainid="4"/></property>
</domain>
<file id="2" path="/root/secret.txt" domainid="1">
  <property type="cooperation"><target domainid="2"/></property>
</file>
</policy>"#;

    fn sample_policy() -> PeerPolicy {
        to_peer_policy(&parse_policy(SAMPLE_POLICY.as_bytes()).unwrap(), "A").unwrap()
    }

    #[test]
    fn compiles_domain_union() {
        let compiled = compile_policy(&sample_policy());
        assert_eq!(compiled.domains.len(), 1);
        assert_eq!(compiled.domains[0].ruleset, kind_ruleset([Confidentiality, Integrity]));
        let file = compiled.resource_by_path("/root/secret.txt").unwrap();
        assert_eq!(file.context.to_string(), "system_u:object_r:domainA_t");
        assert_eq!(file.ruleset, compiled.domains[0].ruleset);
    }

    #[test]
    fn empty_policy_compiles_to_nothing() {
        let compiled = compile_policy(&PeerPolicy::new("A"));
        assert!(compiled.domains.is_empty() && compiled.resources.is_empty());
        assert_eq!(emit_rules(&compiled), "Default:\nallow file {read write unlink create append mounton rename lock execute getattr setattr}\nallow dir {read write unlink search create mounton getattr setattr rename add_name remove_name reparent rmdir}\n");
    }

    #[test]
    fn labels() {
        assert_eq!(sanitize_label("domainA"), "domainA_t");
        assert_eq!(sanitize_label("fee paying"), "fee_paying_t");
        assert_eq!(sanitize_label("a-b.c"), "a_b_c_t");
    }

    #[test]
    fn colliding_labels_are_disambiguated() {
        let mut p = PeerPolicy::new("A");
        p.create_domain("a b").unwrap();
        p.create_domain("a_b").unwrap();
        let c = compile_policy(&p);
        assert_ne!(c.domains[0].label, c.domains[1].label);
    }

    #[test]
    fn default_domain_stanza_has_only_allow_lines() {
        let mut p = PeerPolicy::new("A");
        p.create_domain("free").unwrap();
        let text = emit_rules(&compile_policy(&p));
        let stanza = text.split("\n\n").nth(1).unwrap();
        assert_eq!(stanza.lines().filter(|l| l.starts_with("allow")).count(), 2);
        assert!(!stanza.contains("neverallow"));
    }

    #[test]
    fn confidentiality_stanza() {
        let mut p = PeerPolicy::new("A");
        let d = p.create_domain("secret").unwrap();
        p.add_property(Scope::Domain(d), Confidentiality.into()).unwrap();
        let text = emit_rules(&compile_policy(&p));
        assert!(text.contains("secret_t:\n"));
        assert!(text.contains("neverallow file {read append setattr}\n"));
        assert!(text.contains("neverallow dir {read search setattr}\n"));
    }

    #[test]
    fn resource_properties_tighten_and_get_a_stanza() {
        let mut p = PeerPolicy::new("A");
        let d = p.create_domain("d").unwrap();
        let r = p.add_resource("/srv/movie", d).unwrap();
        p.add_property(Scope::Resource(r), NoShare.into()).unwrap();
        let c = compile_policy(&p);
        assert!(c.domains[0].ruleset.is_default());
        assert_eq!(c.resource(r).unwrap().ruleset, kind_ruleset([NoShare]));
        let stanzas = parse_rules(&emit_rules(&c)).unwrap();
        assert_eq!(stanzas.last().unwrap().header, "file /srv/movie");
        assert_eq!(stanzas.last().unwrap().ruleset, kind_ruleset([NoShare]));
    }

    #[test]
    fn emitted_rules_parse_back() {
        let compiled = compile_policy(&sample_policy());
        let stanzas = parse_rules(&emit_rules(&compiled)).unwrap();
        assert_eq!(stanzas[0].header, "Default");
        assert!(stanzas[0].ruleset.is_default());
        assert_eq!(stanzas[1].header, "domainA_t");
        assert_eq!(stanzas[1].ruleset, compiled.domains[0].ruleset);
    }

    #[test]
    fn parse_rules_errors() {
        assert!(parse_rules("allow file {read}").is_err());
        assert!(parse_rules("x:\nallow sock {read}").is_err());
        assert!(parse_rules("x:\nallow file {fly}").is_err());
        assert!(parse_rules("x:\nallow file read").is_err());
        assert!(parse_rules("x: Maybe").is_err());
        assert!(parse_rules("just words").is_err());
    }

    #[test]
    fn contexts_map() {
        let compiled = compile_policy(&sample_policy());
        assert_eq!(emit_contexts(&compiled), "/root/secret.txt system_u:object_r:domainA_t\n");
    }
}
