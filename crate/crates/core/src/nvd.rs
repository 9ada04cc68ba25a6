//! NVD feed ingestion.
//!
//! Both the 2.0 XML feed (`<nvd><entry>…`) and the 1.1 JSON feed
//! (`{"CVE_Items": […]}`) are normalised into [`VulnerabilityRecord`]s.
//! Entries are parsed leniently: a defective entry is counted in
//! [`IngestStats`] and skipped, it never aborts the feed. Only a document
//! that cannot be read at all yields [`IngestError::FeedUnreadable`].

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::{DateTime, Datelike, FixedOffset};
use flate2::read::GzDecoder;
use quick_xml::events::{BytesStart, Event};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::cpe::{ConfigExpr, CpeName, LogicalOp};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("feed unreadable: {0}")]
    FeedUnreadable(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("record store line {line}: {message}")]
    MalformedStore { line: usize, message: String },
}

/// CVSS v2 impact level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ImpactLevel {
    None,
    Partial,
    Complete,
}

impl ImpactLevel {
    fn parse(text: &str) -> Option<ImpactLevel> {
        match text.trim().to_ascii_uppercase().as_str() {
            "NONE" => Some(ImpactLevel::None),
            "PARTIAL" => Some(ImpactLevel::Partial),
            "COMPLETE" => Some(ImpactLevel::Complete),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Impact {
    pub confidentiality: ImpactLevel,
    pub integrity: ImpactLevel,
    pub availability: ImpactLevel,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Reference {
    pub source: String,
    pub url: String,
}

/// A normalised NVD entry. Optional fields are `None` exactly when the
/// source did not carry a usable value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VulnerabilityRecord {
    pub cve_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published: Option<DateTime<FixedOffset>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modified: Option<DateTime<FixedOffset>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cvss_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub impact: Option<Impact>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cwe_id: Option<String>,
    #[serde(default)]
    pub references: Vec<Reference>,
    #[serde(default)]
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ConfigExpr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub software_list: Option<Vec<CpeName>>,
}

impl VulnerabilityRecord {
    /// A bare record with only an id; used by fixtures and generators.
    pub fn new(cve_id: impl Into<String>) -> VulnerabilityRecord {
        VulnerabilityRecord {
            cve_id: cve_id.into(),
            published: None,
            modified: None,
            cvss_score: None,
            impact: None,
            cwe_id: None,
            references: Vec::new(),
            summary: String::new(),
            config: None,
            software_list: None,
        }
    }

    /// Year taken from the CVE id (`CVE-2017-3741` → 2017).
    pub fn year(&self) -> i32 {
        record_year(self)
    }

    /// Year and quarter (1–4) of the published timestamp, when present.
    pub fn published_quarter(&self) -> Option<(i32, u32)> {
        self.published.map(|p| (p.year(), (p.month() - 1) / 3 + 1))
    }

    /// CPE names describing the affected products: the configuration leaves,
    /// or the vulnerable-software list when there is no configuration.
    pub fn cpes(&self) -> Vec<&CpeName> {
        match (&self.config, &self.software_list) {
            (Some(config), _) => config.collect_cpes(),
            (None, Some(list)) => list.iter().collect(),
            (None, None) => Vec::new(),
        }
    }
}

/// Extracts the year from a record's CVE id.
pub fn record_year(rec: &VulnerabilityRecord) -> i32 {
    cve_id_year(&rec.cve_id).expect("record ids are validated at construction")
}

/// Validates `CVE-<4-digit year>-<digits>` and returns the year.
pub fn cve_id_year(id: &str) -> Option<i32> {
    let rest = id.strip_prefix("CVE-")?;
    let (year, seq) = rest.split_once('-')?;
    if year.len() != 4
        || !year.bytes().all(|b| b.is_ascii_digit())
        || seq.is_empty()
        || !seq.bytes().all(|b| b.is_ascii_digit())
    {
        return None;
    }
    year.parse().ok()
}

pub fn is_valid_cve_id(id: &str) -> bool {
    cve_id_year(id).is_some()
}

fn is_valid_cwe_id(id: &str) -> bool {
    id.strip_prefix("CWE-")
        .is_some_and(|n| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
}

/// Why an entry was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SkipReason {
    /// Nothing usable left after every CPE failed to parse.
    BadCpe,
    /// Missing or malformed CVE id.
    NoId,
    /// No configuration, software list or summary.
    EmptyEntry,
}

/// Non-fatal defects in entries that were kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Warning {
    BadCpe,
    BadCvss,
    BadDate,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestStats {
    pub records_ok: usize,
    pub records_skipped: usize,
    pub skip_reasons: BTreeMap<SkipReason, usize>,
    pub warnings: BTreeMap<Warning, usize>,
}

impl IngestStats {
    pub fn entries(&self) -> usize {
        self.records_ok + self.records_skipped
    }

    pub fn merge(&mut self, other: &IngestStats) {
        self.records_ok += other.records_ok;
        self.records_skipped += other.records_skipped;
        for (k, v) in &other.skip_reasons {
            *self.skip_reasons.entry(*k).or_default() += v;
        }
        for (k, v) in &other.warnings {
            *self.warnings.entry(*k).or_default() += v;
        }
    }

    fn skip(&mut self, reason: SkipReason) {
        self.records_skipped += 1;
        *self.skip_reasons.entry(reason).or_default() += 1;
    }

    fn warn(&mut self, warning: Warning) {
        *self.warnings.entry(warning).or_default() += 1;
    }
}

pub type ParsedFeed = (Vec<VulnerabilityRecord>, IngestStats);

fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_timestamp(text: &str) -> Option<DateTime<FixedOffset>> {
    // Wrapped feed lines can split a timestamp; it never contains spaces.
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let normalized = match compact.strip_suffix('Z') {
        Some(stripped) => format!("{stripped}+00:00"),
        None => compact,
    };
    DateTime::parse_from_rfc3339(&normalized)
        .or_else(|_| DateTime::parse_from_str(&normalized, "%Y-%m-%dT%H:%M%:z"))
        .ok()
}

/// Raw field values gathered for one entry before validation.
#[derive(Default)]
struct EntryDraft {
    id: Option<String>,
    published: Option<String>,
    modified: Option<String>,
    score: Option<String>,
    confidentiality: Option<String>,
    integrity: Option<String>,
    availability: Option<String>,
    cwe: Option<String>,
    references: Vec<Reference>,
    summary: String,
    config_roots: Vec<ConfigExpr>,
    config_bad: bool,
    software: Vec<CpeName>,
    software_bad: bool,
}

impl EntryDraft {
    fn finish(self, stats: &mut IngestStats) -> Option<VulnerabilityRecord> {
        let cve_id = match self.id.map(|s| s.trim().to_string()) {
            Some(id) if is_valid_cve_id(&id) => id,
            _ => {
                stats.skip(SkipReason::NoId);
                return None;
            }
        };

        let config = if self.config_bad {
            None
        } else {
            match self.config_roots.len() {
                0 => None,
                1 => self.config_roots.into_iter().next(),
                _ => Some(ConfigExpr::test(LogicalOp::Or, false, self.config_roots)),
            }
        };
        let software_list =
            (!self.software_bad && !self.software.is_empty()).then_some(self.software);
        let summary = normalize_whitespace(&self.summary);

        if config.is_none() && software_list.is_none() && summary.is_empty() {
            stats.skip(if self.config_bad || self.software_bad {
                SkipReason::BadCpe
            } else {
                SkipReason::EmptyEntry
            });
            return None;
        }
        for _ in 0..usize::from(self.config_bad) + usize::from(self.software_bad) {
            stats.warn(Warning::BadCpe);
        }

        let mut timestamp = |raw: Option<String>| {
            let raw = raw?;
            let parsed = parse_timestamp(&raw);
            if parsed.is_none() {
                stats.warn(Warning::BadDate);
            }
            parsed
        };
        let published = timestamp(self.published);
        let modified = timestamp(self.modified);

        let cvss_score = match self.score {
            None => None,
            Some(raw) => match raw.trim().parse::<f64>() {
                Ok(v) if (0.0..=10.0).contains(&v) => Some(v),
                _ => {
                    stats.warn(Warning::BadCvss);
                    None
                }
            },
        };
        let impact = match (&self.confidentiality, &self.integrity, &self.availability) {
            (None, None, None) => None,
            (c, i, a) => {
                let level = |v: &Option<String>| v.as_deref().and_then(ImpactLevel::parse);
                match (level(c), level(i), level(a)) {
                    (Some(confidentiality), Some(integrity), Some(availability)) => Some(Impact {
                        confidentiality,
                        integrity,
                        availability,
                    }),
                    _ => {
                        stats.warn(Warning::BadCvss);
                        None
                    }
                }
            }
        };
        let cwe_id = self
            .cwe
            .map(|c| c.trim().to_string())
            .filter(|c| is_valid_cwe_id(c));

        stats.records_ok += 1;
        Some(VulnerabilityRecord {
            cve_id,
            published,
            modified,
            cvss_score,
            impact,
            cwe_id,
            references: self.references,
            summary,
            config,
            software_list,
        })
    }
}

struct TestFrame {
    operator: LogicalOp,
    negate: bool,
    children: Vec<ConfigExpr>,
}

fn xml_error(err: impl std::fmt::Display) -> IngestError {
    IngestError::FeedUnreadable(err.to_string())
}

fn attribute(element: &BytesStart<'_>, local: &[u8]) -> Result<Option<String>, IngestError> {
    for attr in element.attributes() {
        let attr = attr.map_err(xml_error)?;
        if attr.key.local_name().as_ref() == local {
            return Ok(Some(attr.unescape_value().map_err(xml_error)?.into_owned()));
        }
    }
    Ok(None)
}

/// Parses an NVD 2.0 XML feed.
pub fn parse_feed_xml<R: BufRead>(input: R) -> Result<ParsedFeed, IngestError> {
    let mut reader = quick_xml::Reader::from_reader(input);
    let mut buf = Vec::new();
    let mut records = Vec::new();
    let mut stats = IngestStats::default();

    let mut path: Vec<Vec<u8>> = Vec::new();
    let mut saw_root = false;
    let mut text = String::new();
    let mut entry: Option<EntryDraft> = None;
    let mut frames: Vec<TestFrame> = Vec::new();
    let mut pending_source: Option<String> = None;
    let mut pending_href: Option<String> = None;

    loop {
        let event = reader.read_event_into(&mut buf).map_err(xml_error)?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                let local = e.local_name().as_ref().to_vec();
                if !saw_root {
                    if local != b"nvd" {
                        return Err(IngestError::FeedUnreadable(format!(
                            "root element is <{}>, expected <nvd>",
                            String::from_utf8_lossy(&local)
                        )));
                    }
                    saw_root = true;
                }
                text.clear();
                match local.as_slice() {
                    b"entry" => {
                        entry = Some(EntryDraft {
                            id: attribute(e, b"id")?,
                            ..EntryDraft::default()
                        });
                        frames.clear();
                    }
                    b"logical-test" if !is_empty => {
                        let operator = attribute(e, b"operator")?
                            .and_then(|op| op.parse().ok())
                            .unwrap_or(LogicalOp::Or);
                        let negate = attribute(e, b"negate")?
                            .is_some_and(|n| n.trim().eq_ignore_ascii_case("true"));
                        frames.push(TestFrame {
                            operator,
                            negate,
                            children: Vec::new(),
                        });
                    }
                    b"fact-ref" => {
                        if let Some(draft) = entry.as_mut() {
                            match attribute(e, b"name")?.map(|n| CpeName::parse(&n)) {
                                Some(Ok(cpe)) => {
                                    let leaf = ConfigExpr::leaf(cpe);
                                    match frames.last_mut() {
                                        Some(frame) => frame.children.push(leaf),
                                        None => draft.config_roots.push(leaf),
                                    }
                                }
                                _ => draft.config_bad = true,
                            }
                        }
                    }
                    b"cwe" => {
                        if let Some(draft) = entry.as_mut() {
                            if draft.cwe.is_none() {
                                draft.cwe = attribute(e, b"id")?;
                            }
                        }
                    }
                    b"references" => pending_source = None,
                    b"reference" => {
                        pending_href = attribute(e, b"href")?;
                        if is_empty {
                            if let (Some(draft), Some(href)) = (entry.as_mut(), pending_href.take())
                            {
                                draft.references.push(Reference {
                                    source: pending_source.clone().unwrap_or_default(),
                                    url: normalize_url(&href),
                                });
                            }
                        }
                    }
                    _ => {}
                }
                if !is_empty {
                    path.push(local);
                }
            }
            Event::Text(ref t) => {
                text.push_str(&t.unescape().map_err(xml_error)?);
            }
            Event::CData(ref t) => {
                text.push_str(&String::from_utf8_lossy(t.as_ref()));
            }
            Event::End(ref e) => {
                let local = e.local_name().as_ref().to_vec();
                path.pop();
                let in_cvss = path.iter().any(|p| p == b"cvss");
                let value = std::mem::take(&mut text);
                match local.as_slice() {
                    b"entry" => {
                        if let Some(draft) = entry.take() {
                            if let Some(record) = draft.finish(&mut stats) {
                                records.push(record);
                            }
                        }
                    }
                    b"logical-test" => {
                        if let Some(frame) = frames.pop() {
                            if !frame.children.is_empty() {
                                let test =
                                    ConfigExpr::test(frame.operator, frame.negate, frame.children);
                                match (frames.last_mut(), entry.as_mut()) {
                                    (Some(parent), _) => parent.children.push(test),
                                    (None, Some(draft)) => draft.config_roots.push(test),
                                    (None, None) => {}
                                }
                            }
                        }
                    }
                    _ => {
                        if let Some(draft) = entry.as_mut() {
                            store_text(
                                draft,
                                &local,
                                value,
                                in_cvss,
                                &mut pending_source,
                                &mut pending_href,
                            );
                        }
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
        buf.clear();
    }

    if !saw_root {
        return Err(IngestError::FeedUnreadable("no root element".into()));
    }
    Ok((records, stats))
}

fn normalize_url(raw: &str) -> String {
    raw.chars().filter(|c| !c.is_whitespace()).collect()
}

fn store_text(
    draft: &mut EntryDraft,
    local: &[u8],
    value: String,
    in_cvss: bool,
    pending_source: &mut Option<String>,
    pending_href: &mut Option<String>,
) {
    let trimmed = value.trim();
    match local {
        b"cve-id" if !trimmed.is_empty() => draft.id = Some(trimmed.to_string()),
        b"published-datetime" => draft.published = Some(value),
        b"last-modified-datetime" => draft.modified = Some(value),
        b"score" if in_cvss => draft.score = Some(value),
        b"confidentiality-impact" if in_cvss => draft.confidentiality = Some(value),
        b"integrity-impact" if in_cvss => draft.integrity = Some(value),
        b"availability-impact" if in_cvss => draft.availability = Some(value),
        b"product" => match CpeName::parse(trimmed) {
            Ok(cpe) => draft.software.push(cpe),
            Err(_) => draft.software_bad = true,
        },
        b"source" => *pending_source = Some(trimmed.to_string()),
        b"reference" => {
            let url = pending_href.take().unwrap_or_else(|| trimmed.to_string());
            draft.references.push(Reference {
                source: pending_source.clone().unwrap_or_default(),
                url: normalize_url(&url),
            });
        }
        b"summary" => draft.summary = value,
        _ => {}
    }
}

fn str_at<'a>(value: &'a Value, path: &[&str]) -> Option<&'a str> {
    path.iter()
        .try_fold(value, |v, key| v.get(key))
        .and_then(Value::as_str)
}

fn array_at<'a>(value: &'a Value, path: &[&str]) -> &'a [Value] {
    path.iter()
        .try_fold(value, |v, key| v.get(key))
        .and_then(Value::as_array)
        .map(Vec::as_slice)
        .unwrap_or(&[])
}

/// Converts a JSON configuration node. Returns `Err(())` when a CPE fails to
/// parse, `Ok(None)` for an empty node.
fn json_node(node: &Value, software: &mut Vec<CpeName>) -> Result<Option<ConfigExpr>, ()> {
    let operator = node
        .get("operator")
        .and_then(Value::as_str)
        .and_then(|op| op.parse().ok())
        .unwrap_or(LogicalOp::Or);
    let negate = node.get("negate").and_then(Value::as_bool).unwrap_or(false);
    let mut children = Vec::new();
    for m in array_at(node, &["cpe_match"]) {
        let uri = m
            .get("cpe23Uri")
            .or_else(|| m.get("cpe22Uri"))
            .and_then(Value::as_str)
            .ok_or(())?;
        let cpe = CpeName::parse(uri).map_err(|_| ())?;
        if m.get("vulnerable")
            .and_then(Value::as_bool)
            .unwrap_or(false)
            && !software.contains(&cpe)
        {
            software.push(cpe.clone());
        }
        children.push(ConfigExpr::leaf(cpe));
    }
    for child in array_at(node, &["children"]) {
        if let Some(expr) = json_node(child, software)? {
            children.push(expr);
        }
    }
    Ok((!children.is_empty()).then(|| ConfigExpr::test(operator, negate, children)))
}

fn json_entry(item: &Value) -> EntryDraft {
    let mut draft = EntryDraft {
        id: str_at(item, &["cve", "CVE_data_meta", "ID"]).map(str::to_string),
        published: str_at(item, &["publishedDate"]).map(str::to_string),
        modified: str_at(item, &["lastModifiedDate"]).map(str::to_string),
        ..EntryDraft::default()
    };

    draft.cwe = array_at(item, &["cve", "problemtype", "problemtype_data"])
        .iter()
        .flat_map(|p| array_at(p, &["description"]))
        .filter_map(|d| d.get("value").and_then(Value::as_str))
        .find(|v| is_valid_cwe_id(v))
        .map(str::to_string);

    draft.references = array_at(item, &["cve", "references", "reference_data"])
        .iter()
        .filter_map(|r| {
            Some(Reference {
                source: r
                    .get("refsource")
                    .and_then(Value::as_str)
                    .unwrap_or_default()
                    .to_string(),
                url: normalize_url(r.get("url")?.as_str()?),
            })
        })
        .collect();

    let descriptions = array_at(item, &["cve", "description", "description_data"]);
    draft.summary = descriptions
        .iter()
        .find(|d| d.get("lang").and_then(Value::as_str) == Some("en"))
        .or_else(|| descriptions.first())
        .and_then(|d| d.get("value"))
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();

    if let Some(cvss) = item
        .get("impact")
        .and_then(|i| i.get("baseMetricV2"))
        .and_then(|m| m.get("cvssV2"))
    {
        draft.score = cvss.get("baseScore").map(|s| match s {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        });
        let level = |key: &str| cvss.get(key).and_then(Value::as_str).map(str::to_string);
        draft.confidentiality = level("confidentialityImpact");
        draft.integrity = level("integrityImpact");
        draft.availability = level("availabilityImpact");
    }

    let mut software = Vec::new();
    for node in array_at(item, &["configurations", "nodes"]) {
        match json_node(node, &mut software) {
            Ok(Some(expr)) => draft.config_roots.push(expr),
            Ok(None) => {}
            Err(()) => draft.config_bad = true,
        }
    }
    if draft.config_bad {
        draft.config_roots.clear();
        // The software list is derived from the same nodes.
        draft.software_bad = !software.is_empty();
    } else {
        draft.software = software;
    }
    draft
}

/// Parses an NVD 1.1 JSON feed. The vulnerable-software list is derived from
/// the `cpe_match` entries flagged `vulnerable`, in document order.
pub fn parse_feed_json<R: Read>(input: R) -> Result<ParsedFeed, IngestError> {
    let doc: Value = serde_json::from_reader(input).map_err(xml_error)?;
    let object = doc
        .as_object()
        .ok_or_else(|| IngestError::FeedUnreadable("top level is not a JSON object".into()))?;
    let items = match object.get("CVE_Items") {
        None => &[][..],
        Some(Value::Array(items)) => items.as_slice(),
        Some(_) => {
            return Err(IngestError::FeedUnreadable(
                "CVE_Items is not an array".into(),
            ))
        }
    };
    let mut stats = IngestStats::default();
    let records = items
        .iter()
        .filter_map(|item| json_entry(item).finish(&mut stats))
        .collect();
    Ok((records, stats))
}

/// Wraps a reader, transparently decompressing gzip (detected by magic bytes).
pub fn open_maybe_gzip<R: Read + 'static>(input: R) -> std::io::Result<Box<dyn BufRead>> {
    let mut reader = BufReader::new(input);
    let magic = reader.fill_buf()?;
    if magic.starts_with(&[0x1f, 0x8b]) {
        Ok(Box::new(BufReader::new(GzDecoder::new(reader))))
    } else {
        Ok(Box::new(reader))
    }
}

/// Parses a feed of either format, sniffing the first significant byte.
pub fn parse_feed<R: BufRead>(mut input: R) -> Result<ParsedFeed, IngestError> {
    let first = loop {
        let buf = input.fill_buf()?;
        if buf.is_empty() {
            return Err(IngestError::FeedUnreadable("empty input".into()));
        }
        let skip = buf
            .iter()
            .position(|b| !b.is_ascii_whitespace() && !matches!(b, 0xEF | 0xBB | 0xBF))
            .unwrap_or(buf.len());
        if skip < buf.len() {
            break buf[skip];
        }
        let len = buf.len();
        input.consume(len);
    };
    match first {
        b'<' => parse_feed_xml(input),
        b'{' => parse_feed_json(input),
        other => Err(IngestError::FeedUnreadable(format!(
            "unrecognised feed format (first byte {:?})",
            other as char
        ))),
    }
}

/// Reads a feed file, plain or gzip-compressed, XML or JSON.
pub fn read_feed_file(path: &Path) -> Result<ParsedFeed, IngestError> {
    let file = File::open(path)?;
    parse_feed(open_maybe_gzip(file)?)
}

/// Writes records as newline-delimited JSON.
pub fn write_store<W: Write>(records: &[VulnerabilityRecord], mut out: W) -> std::io::Result<()> {
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Reads a newline-delimited JSON record store. Blank lines are ignored.
pub fn read_store<R: BufRead>(input: R) -> Result<Vec<VulnerabilityRecord>, IngestError> {
    let mut records = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: VulnerabilityRecord =
            serde_json::from_str(&line).map_err(|e| IngestError::MalformedStore {
                line: idx + 1,
                message: e.to_string(),
            })?;
        if !is_valid_cve_id(&rec.cve_id) {
            return Err(IngestError::MalformedStore {
                line: idx + 1,
                message: format!("invalid CVE id {:?}", rec.cve_id),
            });
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn read_store_file(path: &Path) -> Result<Vec<VulnerabilityRecord>, IngestError> {
    read_store(BufReader::new(File::open(path)?))
}
