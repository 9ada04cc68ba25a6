//! Common Platform Enumeration names.
//!
//! Two bindings are supported:
//!
//! * the CPE 2.2 URI binding used throughout the NVD XML feeds
//!   (`cpe:/h:moxa:edr-g903:-`), including the `~`-packed edition field that
//!   carries the five extended attributes, and
//! * the CPE 2.3 formatted-string binding used by the JSON feeds
//!   (`cpe:2.3:h:d-link:dap-1320:-:*:*:*:*:*:*:*`).
//!
//! Both parse into the same [`CpeName`], so a name read from either feed
//! flavour compares equal. Name matching is plain equality; the set-theoretic
//! matching rules of the CPE specification are not implemented.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CpeError {
    #[error("malformed CPE name {input:?}: {reason}")]
    MalformedCpe { input: String, reason: String },
}

impl CpeError {
    fn malformed(input: &str, reason: impl Into<String>) -> Self {
        CpeError::MalformedCpe {
            input: input.to_string(),
            reason: reason.into(),
        }
    }
}

/// The `part` attribute: application, hardware or operating system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Part {
    Application,
    Hardware,
    OperatingSystem,
}

impl Part {
    pub fn letter(self) -> char {
        match self {
            Part::Application => 'a',
            Part::Hardware => 'h',
            Part::OperatingSystem => 'o',
        }
    }

    pub fn from_letter(letter: &str) -> Option<Part> {
        match letter {
            "a" => Some(Part::Application),
            "h" => Some(Part::Hardware),
            "o" => Some(Part::OperatingSystem),
            _ => None,
        }
    }
}

/// A single WFN attribute value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub enum AttrValue {
    /// Unspecified (`*`, or an omitted/empty URI component).
    #[default]
    Any,
    /// Not applicable (`-`).
    Na,
    /// A concrete lowercase value with all escapes decoded. Never empty.
    Literal(String),
}

impl AttrValue {
    pub fn literal(value: impl Into<String>) -> AttrValue {
        AttrValue::Literal(value.into())
    }

    pub fn as_literal(&self) -> Option<&str> {
        match self {
            AttrValue::Literal(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_any(&self) -> bool {
        matches!(self, AttrValue::Any)
    }
}

/// A well-formed CPE name with its eleven attributes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CpeName {
    pub part: Part,
    pub vendor: AttrValue,
    pub product: AttrValue,
    pub version: AttrValue,
    pub update: AttrValue,
    pub edition: AttrValue,
    pub language: AttrValue,
    pub sw_edition: AttrValue,
    pub target_sw: AttrValue,
    pub target_hw: AttrValue,
    pub other: AttrValue,
}

impl CpeName {
    /// A name with the given part and every other attribute ANY.
    pub fn new(part: Part) -> CpeName {
        CpeName {
            part,
            vendor: AttrValue::Any,
            product: AttrValue::Any,
            version: AttrValue::Any,
            update: AttrValue::Any,
            edition: AttrValue::Any,
            language: AttrValue::Any,
            sw_edition: AttrValue::Any,
            target_sw: AttrValue::Any,
            target_hw: AttrValue::Any,
            other: AttrValue::Any,
        }
    }

    /// The ten non-part attributes in WFN order.
    pub fn attributes(&self) -> [&AttrValue; 10] {
        [
            &self.vendor,
            &self.product,
            &self.version,
            &self.update,
            &self.edition,
            &self.language,
            &self.sw_edition,
            &self.target_sw,
            &self.target_hw,
            &self.other,
        ]
    }

    pub fn attributes_mut(&mut self) -> [&mut AttrValue; 10] {
        [
            &mut self.vendor,
            &mut self.product,
            &mut self.version,
            &mut self.update,
            &mut self.edition,
            &mut self.language,
            &mut self.sw_edition,
            &mut self.target_sw,
            &mut self.target_hw,
            &mut self.other,
        ]
    }

    fn has_extended_attributes(&self) -> bool {
        !(self.sw_edition.is_any()
            && self.target_sw.is_any()
            && self.target_hw.is_any()
            && self.other.is_any())
    }

    pub fn is_hardware(&self) -> bool {
        self.part == Part::Hardware
    }

    /// Parses either binding, dispatching on the prefix.
    pub fn parse(text: &str) -> Result<CpeName, CpeError> {
        let trimmed = trim_surrounding(text);
        if starts_with_ignore_case(trimmed, "cpe:2.3:") {
            parse_cpe_formatted(trimmed)
        } else {
            parse_cpe_uri(trimmed)
        }
    }

    pub fn to_uri(&self) -> String {
        format_cpe_uri(self)
    }

    pub fn to_formatted_string(&self) -> String {
        format_cpe_formatted(self)
    }
}

impl fmt::Display for CpeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format_cpe_uri(self))
    }
}

impl FromStr for CpeName {
    type Err = CpeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CpeName::parse(s)
    }
}

// Stored as its URI binding, which is lossless thanks to edition packing.
impl Serialize for CpeName {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format_cpe_uri(self))
    }
}

impl<'de> Deserialize<'de> for CpeName {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        CpeName::parse(&text).map_err(serde::de::Error::custom)
    }
}

fn starts_with_ignore_case(text: &str, prefix: &str) -> bool {
    text.len() >= prefix.len()
        && text.as_bytes()[..prefix.len()].eq_ignore_ascii_case(prefix.as_bytes())
}

fn parse_part(input: &str, letter: &str) -> Result<Part, CpeError> {
    Part::from_letter(&letter.to_lowercase())
        .ok_or_else(|| CpeError::malformed(input, format!("invalid part {letter:?}")))
}

/// Parses a CPE 2.2 URI.
///
/// Components bind positionally to part, vendor, product, version, update,
/// edition and language. Missing trailing components and empty components
/// bind to ANY, a lone `-` binds to NA. An edition component starting with
/// `~` is unpacked into edition, sw_edition, target_sw, target_hw and other.
pub fn parse_cpe_uri(text: &str) -> Result<CpeName, CpeError> {
    if !starts_with_ignore_case(text, "cpe:/") {
        return Err(CpeError::malformed(text, "missing \"cpe:/\" prefix"));
    }
    let body = &text[5..];
    let components: Vec<&str> = body.split(':').collect();
    if components.len() > 7 {
        return Err(CpeError::malformed(
            text,
            format!("{} components, at most 7 allowed", components.len()),
        ));
    }

    let mut name = CpeName::new(parse_part(text, components[0])?);
    let decode = |raw: &str| uri_component_value(text, raw);
    let mut rest = components[1..].iter();
    if let Some(raw) = rest.next() {
        name.vendor = decode(raw)?;
    }
    if let Some(raw) = rest.next() {
        name.product = decode(raw)?;
    }
    if let Some(raw) = rest.next() {
        name.version = decode(raw)?;
    }
    if let Some(raw) = rest.next() {
        name.update = decode(raw)?;
    }
    if let Some(raw) = rest.next() {
        if let Some(packed) = raw.strip_prefix('~') {
            let fields: Vec<&str> = packed.split('~').collect();
            if fields.len() != 5 {
                return Err(CpeError::malformed(
                    text,
                    "packed edition must hold exactly five '~'-separated fields",
                ));
            }
            name.edition = decode(fields[0])?;
            name.sw_edition = decode(fields[1])?;
            name.target_sw = decode(fields[2])?;
            name.target_hw = decode(fields[3])?;
            name.other = decode(fields[4])?;
        } else {
            name.edition = decode(raw)?;
        }
    }
    if let Some(raw) = rest.next() {
        name.language = decode(raw)?;
    }
    Ok(name)
}

fn uri_component_value(input: &str, raw: &str) -> Result<AttrValue, CpeError> {
    match raw {
        "" => Ok(AttrValue::Any),
        "-" => Ok(AttrValue::Na),
        _ => {
            let decoded = percent_decode(input, raw)?;
            Ok(AttrValue::Literal(decoded.to_lowercase()))
        }
    }
}

fn percent_decode(input: &str, raw: &str) -> Result<String, CpeError> {
    let bytes = raw.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = bytes
                .get(i + 1..i + 3)
                .and_then(|h| std::str::from_utf8(h).ok())
                .and_then(|h| u8::from_str_radix(h, 16).ok())
                .ok_or_else(|| CpeError::malformed(input, "invalid percent-escape"))?;
            out.push(hex);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out)
        .map_err(|_| CpeError::malformed(input, "percent-escapes do not decode to UTF-8"))
}

/// Parses a CPE 2.3 formatted string (`cpe:2.3:` followed by eleven
/// colon-separated attributes, backslash escapes honoured).
pub fn parse_cpe_formatted(text: &str) -> Result<CpeName, CpeError> {
    if !starts_with_ignore_case(text, "cpe:2.3:") {
        return Err(CpeError::malformed(text, "missing \"cpe:2.3:\" prefix"));
    }
    let components = split_formatted(&text[8..]);
    if components.len() != 11 {
        return Err(CpeError::malformed(
            text,
            format!("{} components, exactly 11 required", components.len()),
        ));
    }
    let mut name = CpeName::new(parse_part(text, &components[0])?);
    for (slot, raw) in name.attributes_mut().into_iter().zip(&components[1..]) {
        *slot = formatted_component_value(text, raw)?;
    }
    Ok(name)
}

/// Trims surrounding whitespace, keeping a trailing escaped space (`\\ `).
fn trim_surrounding(text: &str) -> &str {
    let start = text.trim_start();
    let end = start.trim_end();
    let backslashes = end.bytes().rev().take_while(|&b| b == b'\\').count();
    if backslashes % 2 == 1 && end.len() < start.len() {
        let extra = start[end.len()..].chars().next().map_or(0, char::len_utf8);
        &start[..end.len() + extra]
    } else {
        end
    }
}

/// Splits on unescaped ':' keeping the escapes in place.
fn split_formatted(body: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut current = String::new();
    let mut chars = body.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                current.push(c);
                if let Some(next) = chars.next() {
                    current.push(next);
                }
            }
            ':' => parts.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    parts.push(current);
    parts
}

fn formatted_component_value(input: &str, raw: &str) -> Result<AttrValue, CpeError> {
    match raw {
        "*" => return Ok(AttrValue::Any),
        "-" => return Ok(AttrValue::Na),
        "" => return Err(CpeError::malformed(input, "empty attribute")),
        _ => {}
    }
    let mut value = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c == '\\' {
            match chars.next() {
                Some(escaped) => value.push(escaped),
                None => return Err(CpeError::malformed(input, "dangling backslash")),
            }
        } else {
            value.push(c);
        }
    }
    Ok(AttrValue::Literal(value.to_lowercase()))
}

fn uri_unreserved(b: u8) -> bool {
    b.is_ascii_lowercase() || b.is_ascii_digit() || matches!(b, b'.' | b'_' | b'-')
}

fn uri_encode_value(value: &AttrValue) -> String {
    match value {
        AttrValue::Any => String::new(),
        AttrValue::Na => "-".to_string(),
        AttrValue::Literal(s) if s == "-" => "%2d".to_string(),
        AttrValue::Literal(s) => {
            let mut out = String::with_capacity(s.len());
            for &b in s.as_bytes() {
                if uri_unreserved(b) {
                    out.push(b as char);
                } else {
                    out.push_str(&format!("%{b:02x}"));
                }
            }
            out
        }
    }
}

/// Formats the canonical URI binding: trailing ANY components are omitted and
/// the extended attributes are packed into the edition component when set.
pub fn format_cpe_uri(name: &CpeName) -> String {
    let edition = if name.has_extended_attributes() {
        format!(
            "~{}~{}~{}~{}~{}",
            uri_encode_value(&name.edition),
            uri_encode_value(&name.sw_edition),
            uri_encode_value(&name.target_sw),
            uri_encode_value(&name.target_hw),
            uri_encode_value(&name.other),
        )
    } else {
        uri_encode_value(&name.edition)
    };
    let mut components = vec![
        name.part.letter().to_string(),
        uri_encode_value(&name.vendor),
        uri_encode_value(&name.product),
        uri_encode_value(&name.version),
        uri_encode_value(&name.update),
        edition,
        uri_encode_value(&name.language),
    ];
    while components.len() > 1 && components.last().is_some_and(|c| c.is_empty()) {
        components.pop();
    }
    format!("cpe:/{}", components.join(":"))
}

fn formatted_encode_value(value: &AttrValue) -> String {
    match value {
        AttrValue::Any => "*".to_string(),
        AttrValue::Na => "-".to_string(),
        AttrValue::Literal(s) if s == "-" => "\\-".to_string(),
        AttrValue::Literal(s) => {
            let mut out = String::with_capacity(s.len());
            for c in s.chars() {
                if !(c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')) {
                    out.push('\\');
                }
                out.push(c);
            }
            out
        }
    }
}

/// Formats the CPE 2.3 formatted-string binding.
pub fn format_cpe_formatted(name: &CpeName) -> String {
    let mut out = format!("cpe:2.3:{}", name.part.letter());
    for attr in name.attributes() {
        out.push(':');
        out.push_str(&formatted_encode_value(attr));
    }
    out
}

/// Logical operator of a configuration test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LogicalOp {
    And,
    Or,
}

impl FromStr for LogicalOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "AND" => Ok(LogicalOp::And),
            "OR" => Ok(LogicalOp::Or),
            other => Err(format!("unknown logical operator {other:?}")),
        }
    }
}

/// A vulnerable-configuration expression: an AND/OR tree over CPE names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfigExpr {
    Leaf {
        cpe: CpeName,
    },
    Test {
        operator: LogicalOp,
        negate: bool,
        children: Vec<ConfigExpr>,
    },
}

impl ConfigExpr {
    pub fn leaf(cpe: CpeName) -> ConfigExpr {
        ConfigExpr::Leaf { cpe }
    }

    pub fn test(operator: LogicalOp, negate: bool, children: Vec<ConfigExpr>) -> ConfigExpr {
        ConfigExpr::Test {
            operator,
            negate,
            children,
        }
    }

    /// Every leaf in document (pre-)order, duplicates preserved.
    pub fn collect_cpes(&self) -> Vec<&CpeName> {
        let mut out = Vec::new();
        self.visit_leaves(&mut |cpe| out.push(cpe));
        out
    }

    fn visit_leaves<'a>(&'a self, f: &mut impl FnMut(&'a CpeName)) {
        match self {
            ConfigExpr::Leaf { cpe } => f(cpe),
            ConfigExpr::Test { children, .. } => {
                for child in children {
                    child.visit_leaves(f);
                }
            }
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            ConfigExpr::Leaf { .. } => 1,
            ConfigExpr::Test { children, .. } => children.iter().map(ConfigExpr::leaf_count).sum(),
        }
    }
}

/// Free-function form of [`ConfigExpr::collect_cpes`].
pub fn collect_cpes(expr: &ConfigExpr) -> Vec<&CpeName> {
    expr.collect_cpes()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_escaped_space_survives_trim() {
        let name = CpeName::parse("cpe:2.3:a:*:*:*:*:*:*:*:*:*:\\ \n").unwrap();
        assert_eq!(name.other, AttrValue::literal(" "));
        assert_eq!(trim_surrounding("  cpe:/a:v  "), "cpe:/a:v");
    }

    fn lit(s: &str) -> AttrValue {
        AttrValue::literal(s)
    }

    #[test]
    fn uri_hardware_with_na_version() {
        let name = parse_cpe_uri("cpe:/h:moxa:edr-g903:-").unwrap();
        assert_eq!(name.part, Part::Hardware);
        assert_eq!(name.vendor, lit("moxa"));
        assert_eq!(name.product, lit("edr-g903"));
        assert_eq!(name.version, AttrValue::Na);
        assert!(name.update.is_any() && name.edition.is_any() && name.language.is_any());
        assert_eq!(format_cpe_uri(&name), "cpe:/h:moxa:edr-g903:-");
    }

    #[test]
    fn uri_application_and_os() {
        let app = parse_cpe_uri("cpe:/a:lenovo:power_management:1.67.12.19").unwrap();
        assert_eq!(app.part, Part::Application);
        assert_eq!(app.product, lit("power_management"));
        assert_eq!(app.version, lit("1.67.12.19"));

        let os = parse_cpe_uri("cpe:/o:d-link:dgs-1100_firmware:1.01.018").unwrap();
        assert_eq!(os.part, Part::OperatingSystem);
        assert_eq!(os.vendor, lit("d-link"));
        assert_eq!(os.product, lit("dgs-1100_firmware"));
        assert_eq!(os.version, lit("1.01.018"));
    }

    #[test]
    fn uri_rejects_bad_input() {
        for bad in [
            "cpe:/x:v:p",
            "cpe:/:v:p",
            "cpe:2.2:a:v:p",
            "a:v:p",
            "cpe:/a:v:p:1:2:3:4:5",
            "cpe:/a:v%zz:p",
            "cpe:/a:v%4:p",
            "cpe:/a:v:p:1::~a~b",
        ] {
            assert!(parse_cpe_uri(bad).is_err(), "{bad} should fail");
        }
    }

    #[test]
    fn uri_empty_component_is_any_and_percent_decodes() {
        let name = parse_cpe_uri("cpe:/a::p%21x:1.0").unwrap();
        assert_eq!(name.vendor, AttrValue::Any);
        assert_eq!(name.product, lit("p!x"));
        assert_eq!(format_cpe_uri(&name), "cpe:/a::p%21x:1.0");
    }

    #[test]
    fn uri_uppercase_normalises() {
        let upper = parse_cpe_uri("CPE:/H:MOXA:EDR-G903:-").unwrap();
        let lower = parse_cpe_uri("cpe:/h:moxa:edr-g903:-").unwrap();
        assert_eq!(upper, lower);
        assert_eq!(parse_cpe_uri("cpe:/a:v:%41B").unwrap().product, lit("ab"));
    }

    #[test]
    fn uri_packed_edition() {
        let name = parse_cpe_uri("cpe:/a:vendor:app:1.0::~~~android~~").unwrap();
        assert_eq!(name.edition, AttrValue::Any);
        assert_eq!(name.target_sw, lit("android"));
        assert_eq!(format_cpe_uri(&name), "cpe:/a:vendor:app:1.0::~~~android~~");
    }

    #[test]
    fn uri_trailing_any_elision() {
        let mut name = CpeName::new(Part::Application);
        name.vendor = lit("v");
        name.product = lit("p");
        assert_eq!(format_cpe_uri(&name), "cpe:/a:v:p");
        assert_eq!(format_cpe_uri(&CpeName::new(Part::Hardware)), "cpe:/h");
    }

    #[test]
    fn formatted_string_parses() {
        let name = parse_cpe_formatted("cpe:2.3:h:d-link:dap-1320:-:*:*:*:*:*:*:*").unwrap();
        assert_eq!(name.part, Part::Hardware);
        assert_eq!(name.vendor, lit("d-link"));
        assert_eq!(name.product, lit("dap-1320"));
        assert_eq!(name.version, AttrValue::Na);
        assert!(name.attributes()[3..].iter().all(|a| a.is_any()));

        let any = parse_cpe_formatted("cpe:2.3:a:v:p:*:*:*:*:*:*:*:*").unwrap();
        assert!(any.attributes()[2..].iter().all(|a| a.is_any()));
    }

    #[test]
    fn formatted_string_escapes_and_arity() {
        let name = parse_cpe_formatted(r"cpe:2.3:a:v:p\:q:1\.0:*:*:*:*:*:*:*").unwrap();
        assert_eq!(name.product, lit("p:q"));
        assert_eq!(name.version, lit("1.0"));
        assert!(parse_cpe_formatted("cpe:2.3:a:v:p").is_err());
        assert!(parse_cpe_formatted("cpe:2.3:q:v:p:*:*:*:*:*:*:*:*").is_err());
        assert!(parse_cpe_formatted("cpe:2.3:a:v:p:*:*:*:*:*:*:*:*:*").is_err());
    }

    #[test]
    fn bindings_agree() {
        let uri = parse_cpe_uri("cpe:/a:lenovo:power_management:1.67.12.19").unwrap();
        let fs = parse_cpe_formatted("cpe:2.3:a:lenovo:power_management:1.67.12.19:*:*:*:*:*:*:*")
            .unwrap();
        assert_eq!(uri, fs);
        assert_eq!(CpeName::parse(&uri.to_formatted_string()).unwrap(), uri);
    }

    #[test]
    fn literal_dash_is_escaped() {
        let mut name = CpeName::new(Part::Hardware);
        name.vendor = lit("-");
        name.product = AttrValue::Na;
        assert_eq!(parse_cpe_uri(&format_cpe_uri(&name)).unwrap(), name);
        assert_eq!(
            parse_cpe_formatted(&format_cpe_formatted(&name)).unwrap(),
            name
        );
    }

    #[test]
    fn collect_in_preorder() {
        let a = parse_cpe_uri("cpe:/a:x:a").unwrap();
        let b = parse_cpe_uri("cpe:/a:x:b").unwrap();
        let c = parse_cpe_uri("cpe:/h:x:c").unwrap();
        let expr = ConfigExpr::test(
            LogicalOp::And,
            false,
            vec![
                ConfigExpr::test(
                    LogicalOp::Or,
                    false,
                    vec![ConfigExpr::leaf(a.clone()), ConfigExpr::leaf(b.clone())],
                ),
                ConfigExpr::test(LogicalOp::Or, false, vec![ConfigExpr::leaf(c.clone())]),
            ],
        );
        assert_eq!(collect_cpes(&expr), vec![&a, &b, &c]);
        assert_eq!(expr.leaf_count(), 3);
        let single = ConfigExpr::leaf(a.clone());
        assert_eq!(single.collect_cpes(), vec![&a]);
    }

    #[test]
    fn config_serde_shape() {
        let expr = ConfigExpr::test(
            LogicalOp::Or,
            false,
            vec![ConfigExpr::leaf(
                parse_cpe_uri("cpe:/h:moxa:edr-g903:-").unwrap(),
            )],
        );
        let json = serde_json::to_string(&expr).unwrap();
        assert_eq!(
            json,
            r#"{"operator":"OR","negate":false,"children":[{"cpe":"cpe:/h:moxa:edr-g903:-"}]}"#
        );
        let back: ConfigExpr = serde_json::from_str(&json).unwrap();
        assert_eq!(back, expr);
    }
}
