//! The XML policy dialect: `<policy>` holding `<domain>` and `<file>`
//! elements, each with nested `<property type="..">` and `<target domainid=".."/>`.
//!
//! ```xml
//! <policy>
//!   <domain id="1" name="domainA">
//!     <property type="integrity"/>
//!   </domain>
//!   <file id="2" path="/root/secret.txt" domainid="1"/>
//! </policy>
//! ```

use std::collections::{BTreeSet, HashSet};

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use thiserror::Error;

use crate::policy::{DomainId, DomainRef, PeerPolicy, PropertyKind, ResourceId, Scope, SecurityProperty};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PolicyDocument {
    pub domains: Vec<DomainEntry>,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DomainEntry {
    pub id: u32,
    pub name: String,
    pub properties: Vec<PropertyEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FileEntry {
    pub id: u32,
    pub path: String,
    pub domainid: u32,
    pub properties: Vec<PropertyEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertyEntry {
    pub kind: PropertyKind,
    /// Target domain ids; they may name domains not declared in the document.
    pub targets: Vec<u32>,
}

impl PropertyEntry {
    pub fn new(kind: PropertyKind) -> Self {
        PropertyEntry { kind, targets: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum XmlError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { offset: usize, line: usize, column: usize, message: String },
    #[error("invalid <{element}>: {message}")]
    Validation { element: String, message: String },
}

impl XmlError {
    fn syntax(text: &str, offset: usize, message: impl Into<String>) -> Self {
        let offset = offset.min(text.len());
        let before = &text.as_bytes()[..offset];
        let line = before.iter().filter(|&&b| b == b'\n').count() + 1;
        let line_start = before.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
        XmlError::Syntax { offset, line, column: offset - line_start + 1, message: message.into() }
    }

    fn invalid(element: &str, message: impl Into<String>) -> Self {
        XmlError::Validation { element: element.to_string(), message: message.into() }
    }
}

#[derive(Clone, Copy)]
enum Owner {
    Domain,
    File,
}

#[derive(Clone, Copy)]
enum Frame {
    Policy,
    Domain,
    File,
    Property(Owner),
    Target,
}

/// Parses and validates a policy document.
pub fn parse_policy(bytes: &[u8]) -> Result<PolicyDocument, XmlError> {
    let text = std::str::from_utf8(bytes)
        .map_err(|e| XmlError::syntax("", 0, format!("invalid UTF-8 at byte {}", e.valid_up_to())))?;
    let doc = parse_str(text)?;
    doc.validate()?;
    Ok(doc)
}

fn parse_str(text: &str) -> Result<PolicyDocument, XmlError> {
    let mut reader = Reader::from_str(text);
    let mut doc = PolicyDocument::default();
    let mut stack: Vec<Frame> = Vec::new();
    let mut seen_root = false;

    loop {
        let pos = reader.buffer_position() as usize;
        let event = reader
            .read_event()
            .map_err(|e| XmlError::syntax(text, reader.error_position() as usize, e.to_string()))?;
        match event {
            Event::Start(e) => {
                let frame = open_element(&mut doc, &stack, &e, seen_root)?;
                seen_root = true;
                stack.push(frame);
            }
            Event::Empty(e) => {
                open_element(&mut doc, &stack, &e, seen_root)?;
                seen_root = true;
            }
            Event::End(_) => {
                stack.pop();
            }
            Event::Text(t) => {
                if !t.chars().all(char::is_whitespace) {
                    let at = stack.last().map_or("document", |f| frame_name(*f));
                    return Err(XmlError::invalid(at, "unexpected text content"));
                }
            }
            Event::Decl(_) | Event::Comment(_) => {}
            Event::Eof => {
                if !seen_root {
                    return Err(XmlError::syntax(text, pos, "missing <policy> root element"));
                }
                if !stack.is_empty() {
                    return Err(XmlError::syntax(text, pos, "unexpected end of input"));
                }
                return Ok(doc);
            }
            _ => {
                let at = stack.last().map_or("document", |f| frame_name(*f));
                return Err(XmlError::invalid(at, "unsupported markup"));
            }
        }
    }
}

fn frame_name(f: Frame) -> &'static str {
    match f {
        Frame::Policy => "policy",
        Frame::Domain => "domain",
        Frame::File => "file",
        Frame::Property(_) => "property",
        Frame::Target => "target",
    }
}

fn open_element(
    doc: &mut PolicyDocument,
    stack: &[Frame],
    e: &BytesStart<'_>,
    seen_root: bool,
) -> Result<Frame, XmlError> {
    let qname = e.name();
    let name: String = AsRef::<str>::as_ref(&qname).to_string();
    let parent = stack.last().copied();
    match (parent, name.as_str()) {
        (None, "policy") if !seen_root => {
            attributes(e, &name, &[])?;
            Ok(Frame::Policy)
        }
        (Some(Frame::Policy), "domain") => {
            let a = attributes(e, &name, &["id", "name"])?;
            doc.domains.push(DomainEntry {
                id: parse_id(&name, "id", &a[0])?,
                name: a[1].clone(),
                properties: Vec::new(),
            });
            Ok(Frame::Domain)
        }
        (Some(Frame::Policy), "file") => {
            let a = attributes(e, &name, &["id", "path", "domainid"])?;
            doc.files.push(FileEntry {
                id: parse_id(&name, "id", &a[0])?,
                path: a[1].clone(),
                domainid: parse_id(&name, "domainid", &a[2])?,
                properties: Vec::new(),
            });
            Ok(Frame::File)
        }
        (Some(Frame::Domain), "property") | (Some(Frame::File), "property") => {
            let a = attributes(e, &name, &["type"])?;
            let kind: PropertyKind = a[0]
                .parse()
                .map_err(|_| XmlError::invalid(&name, format!("unknown property type `{}`", a[0])))?;
            let (owner, props) = match parent {
                Some(Frame::Domain) => (Owner::Domain, &mut doc.domains.last_mut().expect("open domain").properties),
                _ => (Owner::File, &mut doc.files.last_mut().expect("open file").properties),
            };
            props.push(PropertyEntry::new(kind));
            Ok(Frame::Property(owner))
        }
        (Some(Frame::Property(owner)), "target") => {
            let a = attributes(e, &name, &["domainid"])?;
            let id = parse_id(&name, "domainid", &a[0])?;
            let props = match owner {
                Owner::Domain => &mut doc.domains.last_mut().expect("open domain").properties,
                Owner::File => &mut doc.files.last_mut().expect("open file").properties,
            };
            props.last_mut().expect("open property").targets.push(id);
            Ok(Frame::Target)
        }
        (None, _) => Err(XmlError::invalid(&name, "unexpected element outside <policy>")),
        (Some(p), _) => Err(XmlError::invalid(&name, format!("not allowed inside <{}>", frame_name(p)))),
    }
}

/// Collects exactly the `expected` attributes, in that order. Missing,
/// repeated and unknown attributes are all rejected.
fn attributes(e: &BytesStart<'_>, element: &str, expected: &[&str]) -> Result<Vec<String>, XmlError> {
    let mut values: Vec<Option<String>> = vec![None; expected.len()];
    for attr in e.attributes() {
        let attr = attr.map_err(|err| XmlError::invalid(element, err.to_string()))?;
        let key: String = AsRef::<str>::as_ref(&attr.key).to_string();
        let slot = expected
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| XmlError::invalid(element, format!("unknown attribute `{key}`")))?;
        if values[slot].is_some() {
            return Err(XmlError::invalid(element, format!("duplicate attribute `{key}`")));
        }
        let value = quick_xml::escape::unescape(&attr.value)
            .map_err(|err| XmlError::invalid(element, err.to_string()))?;
        values[slot] = Some(value.into_owned());
    }
    values
        .into_iter()
        .zip(expected)
        .map(|(v, k)| v.ok_or_else(|| XmlError::invalid(element, format!("missing attribute `{k}`"))))
        .collect()
}

fn parse_id(element: &str, attr: &str, value: &str) -> Result<u32, XmlError> {
    value
        .parse()
        .map_err(|_| XmlError::invalid(element, format!("`{attr}` must be a non-negative integer, got `{value}`")))
}

impl PolicyDocument {
    pub fn validate(&self) -> Result<(), XmlError> {
        let mut ids = HashSet::new();
        let mut names = HashSet::new();
        for d in &self.domains {
            if !ids.insert(d.id) {
                return Err(XmlError::invalid("domain", format!("duplicate id {}", d.id)));
            }
            if d.name.is_empty() {
                return Err(XmlError::invalid("domain", format!("domain {} has an empty name", d.id)));
            }
            if !names.insert(d.name.as_str()) {
                return Err(XmlError::invalid("domain", format!("duplicate name `{}`", d.name)));
            }
            check_properties("domain", &d.properties, false)?;
        }
        let domain_ids: HashSet<u32> = self.domains.iter().map(|d| d.id).collect();
        for f in &self.files {
            if !ids.insert(f.id) {
                return Err(XmlError::invalid("file", format!("duplicate id {}", f.id)));
            }
            if f.path.is_empty() {
                return Err(XmlError::invalid("file", format!("file {} has an empty path", f.id)));
            }
            if !domain_ids.contains(&f.domainid) {
                return Err(XmlError::invalid(
                    "file",
                    format!("file {} references undeclared domain {}", f.id, f.domainid),
                ));
            }
            check_properties("file", &f.properties, true)?;
        }
        Ok(())
    }
}

fn check_properties(owner: &str, props: &[PropertyEntry], on_file: bool) -> Result<(), XmlError> {
    for p in props {
        if !p.targets.is_empty() && !p.kind.accepts_targets() {
            return Err(XmlError::invalid("property", format!("{} on a {owner} cannot have targets", p.kind)));
        }
        if on_file && p.kind == PropertyKind::NoPublication {
            return Err(XmlError::invalid("property", "nopublication applies to domains only"));
        }
    }
    Ok(())
}

/// Canonical rendering: two-space indentation, attributes in declaration
/// order, domains before files, trailing newline.
pub fn serialize_policy(doc: &PolicyDocument) -> Result<String, XmlError> {
    doc.validate()?;
    if doc.domains.is_empty() && doc.files.is_empty() {
        return Ok("<policy></policy>\n".to_string());
    }
    let mut out = String::from("<policy>\n");
    for d in &doc.domains {
        let open = format!("<domain id=\"{}\" name=\"{}\"", d.id, escape(&d.name));
        write_element(&mut out, &open, "domain", &d.properties);
    }
    for f in &doc.files {
        let open = format!("<file id=\"{}\" path=\"{}\" domainid=\"{}\"", f.id, escape(&f.path), f.domainid);
        write_element(&mut out, &open, "file", &f.properties);
    }
    out.push_str("</policy>\n");
    Ok(out)
}

fn escape(s: &str) -> std::borrow::Cow<'_, str> {
    quick_xml::escape::escape(s)
}

fn write_element(out: &mut String, open: &str, tag: &str, props: &[PropertyEntry]) {
    out.push_str("  ");
    out.push_str(open);
    if props.is_empty() {
        out.push_str("/>\n");
        return;
    }
    out.push_str(">\n");
    for p in props {
        if p.targets.is_empty() {
            out.push_str(&format!("    <property type=\"{}\"/>\n", p.kind));
        } else {
            out.push_str(&format!("    <property type=\"{}\">\n", p.kind));
            for t in &p.targets {
                out.push_str(&format!("      <target domainid=\"{t}\"/>\n"));
            }
            out.push_str("    </property>\n");
        }
    }
    out.push_str(&format!("  </{tag}>\n"));
}

/// Builds a policy for `peer_id`. Target ids that are not declared domains
/// become external references labelled with the decimal id.
pub fn to_peer_policy(doc: &PolicyDocument, peer_id: &str) -> Result<PeerPolicy, XmlError> {
    doc.validate()?;
    let declared: HashSet<u32> = doc.domains.iter().map(|d| d.id).collect();
    let convert = |entry: &PropertyEntry| -> Result<SecurityProperty, XmlError> {
        let targets = entry.targets.iter().map(|&t| {
            if declared.contains(&t) {
                DomainRef::Local(DomainId(t))
            } else {
                DomainRef::External(t.to_string())
            }
        });
        SecurityProperty::with_targets(entry.kind, targets)
            .map_err(|e| XmlError::invalid("property", e.to_string()))
    };

    let mut policy = PeerPolicy::new(peer_id);
    for d in &doc.domains {
        policy.restore_domain(DomainId(d.id), &d.name).map_err(policy_err("domain"))?;
    }
    for f in &doc.files {
        policy
            .restore_resource(ResourceId(f.id), &f.path, DomainId(f.domainid))
            .map_err(policy_err("file"))?;
    }
    let mut max_target = 0;
    for d in &doc.domains {
        for p in &d.properties {
            max_target = p.targets.iter().copied().fold(max_target, u32::max);
            policy
                .restore_property(Scope::Domain(DomainId(d.id)), convert(p)?)
                .map_err(policy_err("property"))?;
        }
    }
    for f in &doc.files {
        for p in &f.properties {
            max_target = p.targets.iter().copied().fold(max_target, u32::max);
            policy
                .restore_property(Scope::Resource(ResourceId(f.id)), convert(p)?)
                .map_err(policy_err("property"))?;
        }
    }
    policy.reserve_ids_through(max_target);
    Ok(policy)
}

fn policy_err(element: &'static str) -> impl Fn(crate::policy::PolicyError) -> XmlError {
    move |e| XmlError::invalid(element, e.to_string())
}

/// Inverse of [`to_peer_policy`]. External targets must carry a numeric
/// label that does not shadow a local domain id.
pub fn from_peer_policy(policy: &PeerPolicy) -> Result<PolicyDocument, XmlError> {
    let local: BTreeSet<u32> = policy.domains().iter().map(|d| d.id.0).collect();
    let convert = |p: &SecurityProperty| -> Result<PropertyEntry, XmlError> {
        let targets = p
            .targets()
            .iter()
            .map(|t| match t {
                DomainRef::Local(id) => Ok(id.0),
                DomainRef::External(label) => match label.parse::<u32>() {
                    Ok(n) if !local.contains(&n) => Ok(n),
                    Ok(n) => Err(XmlError::invalid("target", format!("external id {n} shadows a local domain"))),
                    Err(_) => Err(XmlError::invalid(
                        "target",
                        format!("external domain `{label}` has no numeric id"),
                    )),
                },
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(PropertyEntry { kind: p.kind, targets })
    };
    let doc = PolicyDocument {
        domains: policy
            .domains()
            .iter()
            .map(|d| {
                Ok(DomainEntry {
                    id: d.id.0,
                    name: d.name.clone(),
                    properties: d.properties.iter().map(convert).collect::<Result<_, _>>()?,
                })
            })
            .collect::<Result<_, XmlError>>()?,
        files: policy
            .resources()
            .iter()
            .map(|r| {
                Ok(FileEntry {
                    id: r.id.0,
                    path: r.path.clone(),
                    domainid: r.domain.0,
                    properties: r.properties.iter().map(convert).collect::<Result<_, _>>()?,
                })
            })
            .collect::<Result<_, XmlError>>()?,
    };
    doc.validate()?;
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use PropertyKind::*;

    pub(crate) const SAMPLE_POLICY: &str = r#"
<policy>
<domain id="1" name="domainA">
  <property type="confidentiality">
    <target domainid="3"/>
  </property>
  <property type="integrity"/>
  <property type="cooperation">
    <target domainid="4"/>
  </property>
</domain>
<file id="2" path="/root/secret.txt" domainid="1">
  <property type="cooperation">
    <target domainid="2"/>
  </property>
</file>
</policy>
"#;

    #[test]
    fn parses_reference_document() {
        let doc = parse_policy(SAMPLE_POLICY.as_bytes()).unwrap();
        assert_eq!(
            doc.domains,
            vec![DomainEntry {
                id: 1,
                name: "domainA".into(),
                properties: vec![
                    PropertyEntry { kind: Confidentiality, targets: vec![3] },
                    PropertyEntry::new(Integrity),
                    PropertyEntry { kind: Cooperation, targets: vec![4] },
                ],
            }]
        );
        assert_eq!(
            doc.files,
            vec![FileEntry {
                id: 2,
                path: "/root/secret.txt".into(),
                domainid: 1,
                properties: vec![PropertyEntry { kind: Cooperation, targets: vec![2] }],
            }]
        );
    }

    #[test]
    fn empty_policy() {
        assert_eq!(parse_policy(b"<policy></policy>").unwrap(), PolicyDocument::default());
        assert_eq!(parse_policy(b"<policy/>").unwrap(), PolicyDocument::default());
        assert_eq!(serialize_policy(&PolicyDocument::default()).unwrap(), "<policy></policy>\n");
    }

    #[test]
    fn undeclared_file_domain_is_rejected() {
        let err = parse_policy(br#"<policy><file id="2" path="x" domainid="99"/></policy>"#).unwrap_err();
        assert!(matches!(err, XmlError::Validation { ref element, .. } if element == "file"), "{err}");
    }

    #[test]
    fn rejects_bad_input() {
        let cases: &[&[u8]] = &[
            b"",
            b"<policy>",
            b"<policy><domain id=\"1\" name=\"a\"></policy>",
            b"<policy><domain id=\"1\" name=\"a\" color=\"red\"/></policy>",
            b"<policy><domain id=\"x\" name=\"a\"/></policy>",
            b"<policy><domain id=\"1\"/></policy>",
            b"<policy><domain id=\"1\" name=\"a\"><property type=\"secrecy\"/></domain></policy>",
            b"<policy><domain id=\"1\" name=\"a\"/><domain id=\"1\" name=\"b\"/></policy>",
            b"<policy><domain id=\"1\" name=\"a\"><property type=\"integrity\"><target domainid=\"2\"/></property></domain></policy>",
            b"<policy>hello</policy>",
            b"<policies/>",
            b"<policy/><policy/>",
            b"\xff\xfe",
        ];
        for case in cases {
            assert!(parse_policy(case).is_err(), "accepted {:?}", String::from_utf8_lossy(case));
        }
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_policy(b"<policy>\n  <domain id=\"1\" name=\"a\">\n</policy>").unwrap_err();
        match err {
            XmlError::Syntax { line, .. } => assert!(line >= 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn canonical_output() {
        let doc = parse_policy(SAMPLE_POLICY.as_bytes()).unwrap();
        let expected = "\
<policy>
  <domain id=\"1\" name=\"domainA\">
    <property type=\"confidentiality\">
      <target domainid=\"3\"/>
    </property>
    <property type=\"integrity\"/>
    <property type=\"cooperation\">
      <target domainid=\"4\"/>
    </property>
  </domain>
  <file id=\"2\" path=\"/root/secret.txt\" domainid=\"1\">
    <property type=\"cooperation\">
      <target domainid=\"2\"/>
    </property>
  </file>
</policy>
";
        let text = serialize_policy(&doc).unwrap();
        assert_eq!(text, expected);
        assert_eq!(parse_policy(text.as_bytes()).unwrap(), doc);
    }

    #[test]
    fn property_free_domain_is_an_empty_element() {
        let doc = PolicyDocument {
            domains: vec![DomainEntry { id: 1, name: "free".into(), properties: vec![] }],
            files: vec![],
        };
        assert_eq!(serialize_policy(&doc).unwrap(), "<policy>\n  <domain id=\"1\" name=\"free\"/>\n</policy>\n");
    }

    #[test]
    fn attribute_values_are_escaped() {
        let doc = PolicyDocument {
            domains: vec![DomainEntry { id: 1, name: "a&b \"q\"".into(), properties: vec![] }],
            files: vec![FileEntry { id: 2, path: "/tmp/<x>".into(), domainid: 1, properties: vec![] }],
        };
        let text = serialize_policy(&doc).unwrap();
        assert_eq!(parse_policy(text.as_bytes()).unwrap(), doc);
    }

    #[test]
    fn maps_to_peer_policy() {
        let doc = parse_policy(SAMPLE_POLICY.as_bytes()).unwrap();
        let policy = to_peer_policy(&doc, "A").unwrap();
        let d = policy.domain_by_name("domainA").unwrap();
        assert_eq!(d.properties.len(), 3);
        assert!(d.properties[0].targets().contains(&DomainRef::External("3".into())));
        let file = policy.resource_by_path("/root/secret.txt").unwrap();
        assert_eq!(file.domain, d.id);
        assert_eq!(from_peer_policy(&policy).unwrap(), doc);

        let empty = to_peer_policy(&PolicyDocument::default(), "A").unwrap();
        assert!(empty.is_empty());
    }

    #[test]
    fn fresh_ids_skip_imported_targets() {
        let doc = parse_policy(SAMPLE_POLICY.as_bytes()).unwrap();
        let mut policy = to_peer_policy(&doc, "A").unwrap();
        let id = policy.create_domain("other").unwrap();
        assert_eq!(id.0, 5);
    }

    #[test]
    fn non_numeric_external_targets_cannot_be_exported() {
        let mut policy = PeerPolicy::new("A");
        let d = policy.create_domain("d").unwrap();
        let coop = SecurityProperty::with_targets(Cooperation, [DomainRef::External("elsewhere".into())]).unwrap();
        policy.add_property(Scope::Domain(d), coop).unwrap();
        assert!(from_peer_policy(&policy).is_err());
    }
}
