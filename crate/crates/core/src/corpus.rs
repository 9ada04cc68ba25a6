//! Hardware record selection, analyst labels and labelled datasets.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpe::AttrValue;
use crate::nvd::{is_valid_cve_id, VulnerabilityRecord};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("bad year range: start {start} > end {end}")]
    BadRange { start: i32, end: i32 },
    #[error("line {line}: duplicate CVE id {cve_id} (first seen on line {first_line})")]
    DuplicateCveId {
        line: u64,
        cve_id: String,
        first_line: u64,
    },
    #[error("line {line}: unknown class code {code:?}")]
    UnknownClassCode { line: u64, code: String },
    #[error("line {line}: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClassLabel {
    pub code: String,
    pub description: String,
}

impl ClassLabel {
    pub fn new(code: impl Into<String>, description: impl Into<String>) -> ClassLabel {
        ClassLabel {
            code: code.into(),
            description: description.into(),
        }
    }
}

/// The active set of device classes. Codes are unique; iteration order is
/// lexicographic by code.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ClassLabel>", into = "Vec<ClassLabel>")]
pub struct Taxonomy {
    classes: BTreeMap<String, ClassLabel>,
}

impl Taxonomy {
    pub fn new(classes: Vec<ClassLabel>) -> Result<Taxonomy, CorpusError> {
        let mut map = BTreeMap::new();
        for class in classes {
            let code_ok = !class.code.is_empty()
                && class
                    .code
                    .bytes()
                    .all(|b| b.is_ascii_alphanumeric() || b == b'_');
            if !code_ok {
                return Err(CorpusError::InvalidTaxonomy(format!(
                    "class code {:?} must be non-empty ASCII alphanumeric",
                    class.code
                )));
            }
            if map.contains_key(&class.code) {
                return Err(CorpusError::InvalidTaxonomy(format!(
                    "duplicate class code {:?}",
                    class.code
                )));
            }
            map.insert(class.code.clone(), class);
        }
        if map.is_empty() {
            return Err(CorpusError::InvalidTaxonomy("no classes".into()));
        }
        Ok(Taxonomy { classes: map })
    }

    /// The six device classes H, S, E, M, P, A.
    pub fn iot_default() -> Taxonomy {
        Taxonomy::new(vec![
            ClassLabel::new(
                "H",
                "Home and SOHO devices: routers, on-line cameras and monitoring, customer-grade appliances",
            ),
            ClassLabel::new(
                "S",
                "SCADA and industrial systems, automation, sensors, vehicle subsystems, medical devices",
            ),
            ClassLabel::new(
                "E",
                "Enterprise and service-provider hardware: routers, switches, enterprise Wi-Fi and networking",
            ),
            ClassLabel::new(
                "M",
                "Mobile phones, tablets, smart watches and portable devices",
            ),
            ClassLabel::new(
                "P",
                "PCs, laptops, PC-like computing appliances and PC servers",
            ),
            ClassLabel::new(
                "A",
                "Other non-home appliances: enterprise printers, copiers, storage and multimedia appliances",
            ),
        ])
        .expect("default taxonomy is valid")
    }

    /// Adds the opt-in extension class `C`, which has no published definition.
    pub fn with_extension_c(mut self) -> Taxonomy {
        self.classes
            .entry("C".into())
            .or_insert_with(|| ClassLabel::new("C", "Extension class (user-defined)"));
        self
    }

    pub fn contains(&self, code: &str) -> bool {
        self.classes.contains_key(code)
    }

    pub fn get(&self, code: &str) -> Option<&ClassLabel> {
        self.classes.get(code)
    }

    /// Class codes in lexicographic order.
    pub fn codes(&self) -> Vec<String> {
        self.classes.keys().cloned().collect()
    }

    pub fn labels(&self) -> impl Iterator<Item = &ClassLabel> {
        self.classes.values()
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// A copy without the given codes. Fails if nothing would remain.
    pub fn without(&self, excluded: &BTreeSet<String>) -> Result<Taxonomy, CorpusError> {
        Taxonomy::new(
            self.classes
                .values()
                .filter(|c| !excluded.contains(&c.code))
                .cloned()
                .collect(),
        )
    }
}

impl Default for Taxonomy {
    fn default() -> Self {
        Taxonomy::iot_default()
    }
}

impl TryFrom<Vec<ClassLabel>> for Taxonomy {
    type Error = CorpusError;

    fn try_from(value: Vec<ClassLabel>) -> Result<Self, Self::Error> {
        Taxonomy::new(value)
    }
}

impl From<Taxonomy> for Vec<ClassLabel> {
    fn from(value: Taxonomy) -> Self {
        value.classes.into_values().collect()
    }
}

/// Which date decides a record's year.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum YearBasis {
    /// The year embedded in the CVE id.
    #[default]
    CveId,
    /// The year of the published timestamp; records without one never match.
    Published,
}

impl YearBasis {
    pub fn year_of(self, rec: &VulnerabilityRecord) -> Option<i32> {
        match self {
            YearBasis::CveId => Some(rec.year()),
            YearBasis::Published => rec.published_quarter().map(|(y, _)| y),
        }
    }
}

/// True iff any affected CPE names a hardware device.
pub fn is_hardware(rec: &VulnerabilityRecord) -> bool {
    rec.cpes().iter().any(|c| c.is_hardware())
}

/// Records whose year lies in `[start, end]`, order preserved.
pub fn filter_years<'a, I>(
    records: I,
    start: i32,
    end: i32,
) -> Result<Vec<&'a VulnerabilityRecord>, CorpusError>
where
    I: IntoIterator<Item = &'a VulnerabilityRecord>,
{
    filter_years_by(records, start, end, YearBasis::CveId)
}

pub fn filter_years_by<'a, I>(
    records: I,
    start: i32,
    end: i32,
    basis: YearBasis,
) -> Result<Vec<&'a VulnerabilityRecord>, CorpusError>
where
    I: IntoIterator<Item = &'a VulnerabilityRecord>,
{
    if start > end {
        return Err(CorpusError::BadRange { start, end });
    }
    Ok(records
        .into_iter()
        .filter(|r| basis.year_of(r).is_some_and(|y| (start..=end).contains(&y)))
        .collect())
}

/// Records published in the given calendar quarter (1–4).
pub fn filter_quarter<'a, I>(records: I, year: i32, quarter: u32) -> Vec<&'a VulnerabilityRecord>
where
    I: IntoIterator<Item = &'a VulnerabilityRecord>,
{
    records
        .into_iter()
        .filter(|r| r.published_quarter() == Some((year, quarter)))
        .collect()
}

/// Reads a `cve_id,class` label file. Line numbers in errors are 1-based.
pub fn load_labels<R: Read>(
    input: R,
    taxonomy: &Taxonomy,
) -> Result<BTreeMap<String, String>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut labels = BTreeMap::new();
    let mut first_seen: BTreeMap<String, u64> = BTreeMap::new();
    let mut saw_header = false;

    for row in reader.records() {
        let row = row.map_err(|e| CorpusError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        if !saw_header {
            if row.len() != 2 || &row[0] != "cve_id" || &row[1] != "class" {
                return Err(CorpusError::MalformedRow {
                    line,
                    message: "expected header \"cve_id,class\"".into(),
                });
            }
            saw_header = true;
            continue;
        }
        if row.len() != 2 {
            return Err(CorpusError::MalformedRow {
                line,
                message: format!("expected 2 fields, found {}", row.len()),
            });
        }
        let (cve_id, code) = (&row[0], &row[1]);
        if !is_valid_cve_id(cve_id) {
            return Err(CorpusError::MalformedRow {
                line,
                message: format!("invalid CVE id {cve_id:?}"),
            });
        }
        if !taxonomy.contains(code) {
            return Err(CorpusError::UnknownClassCode {
                line,
                code: code.to_string(),
            });
        }
        if let Some(&first_line) = first_seen.get(cve_id) {
            return Err(CorpusError::DuplicateCveId {
                line,
                cve_id: cve_id.to_string(),
                first_line,
            });
        }
        first_seen.insert(cve_id.to_string(), line);
        labels.insert(cve_id.to_string(), code.to_string());
    }
    if !saw_header {
        return Err(CorpusError::MalformedRow {
            line: 1,
            message: "missing header \"cve_id,class\"".into(),
        });
    }
    Ok(labels)
}

/// Text-bearing fields of a record, as fed to the preprocessor.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordText {
    /// Distinct CPE vendors, in document order.
    pub vendors: Vec<String>,
    /// Distinct CPE product names, in document order.
    pub products: Vec<String>,
    /// Distinct CPE versions, in document order.
    pub versions: Vec<String>,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cwe_id: Option<String>,
}

impl RecordText {
    pub fn from_record(rec: &VulnerabilityRecord) -> RecordText {
        fn push_distinct(out: &mut Vec<String>, value: &AttrValue) {
            if let Some(v) = value.as_literal() {
                if !out.iter().any(|x| x == v) {
                    out.push(v.to_string());
                }
            }
        }
        let mut text = RecordText {
            summary: rec.summary.clone(),
            cwe_id: rec.cwe_id.clone(),
            ..RecordText::default()
        };
        for cpe in rec.cpes() {
            push_distinct(&mut text.vendors, &cpe.vendor);
            push_distinct(&mut text.products, &cpe.product);
            push_distinct(&mut text.versions, &cpe.version);
        }
        text
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub cve_id: String,
    pub year: i32,
    pub label: String,
    pub text: RecordText,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub examples: Vec<LabeledExample>,
    pub taxonomy: Taxonomy,
    /// Inclusive span of example years; `None` for an empty dataset.
    pub year_range: Option<(i32, i32)>,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// Number of examples per class code (classes without examples omitted).
    pub fn supports(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for ex in &self.examples {
            *out.entry(ex.label.clone()).or_default() += 1;
        }
        out
    }

    pub fn cve_ids(&self) -> BTreeSet<String> {
        self.examples.iter().map(|e| e.cve_id.clone()).collect()
    }

    /// Writes the examples as newline-delimited JSON.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for ex in &self.examples {
            serde_json::to_writer(&mut out, ex)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}

/// A dataset plus the bookkeeping of what did not make it in.
#[derive(Debug, Clone)]
pub struct DatasetBuild {
    pub dataset: LabeledDataset,
    /// Hardware records with no label, in input order.
    pub unlabeled: Vec<String>,
    /// Labelled hardware records whose class is outside the taxonomy.
    pub excluded: usize,
}

/// Pairs labelled hardware records with their class. Non-hardware records are
/// ignored; unlabelled hardware records are reported, not dropped silently.
/// A CVE id occurring more than once keeps its first occurrence.
pub fn build_dataset<'a, I>(
    records: I,
    labels: &BTreeMap<String, String>,
    taxonomy: &Taxonomy,
) -> DatasetBuild
where
    I: IntoIterator<Item = &'a VulnerabilityRecord>,
{
    let mut seen = HashSet::new();
    let mut examples = Vec::new();
    let mut unlabeled = Vec::new();
    let mut excluded = 0;
    for rec in records {
        if !is_hardware(rec) || !seen.insert(rec.cve_id.as_str()) {
            continue;
        }
        match labels.get(&rec.cve_id) {
            None => unlabeled.push(rec.cve_id.clone()),
            Some(code) if !taxonomy.contains(code) => excluded += 1,
            Some(code) => examples.push(LabeledExample {
                cve_id: rec.cve_id.clone(),
                year: rec.year(),
                label: code.clone(),
                text: RecordText::from_record(rec),
            }),
        }
    }
    let year_range = examples
        .iter()
        .map(|e| e.year)
        .fold(None, |acc: Option<(i32, i32)>, y| {
            Some(acc.map_or((y, y), |(lo, hi)| (lo.min(y), hi.max(y))))
        });
    DatasetBuild {
        dataset: LabeledDataset {
            examples,
            taxonomy: taxonomy.clone(),
            year_range,
        },
        unlabeled,
        excluded,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct YearCounts {
    pub per_class: BTreeMap<String, usize>,
    pub total: usize,
}

/// Example counts per year and class.
pub fn count_by_year_and_class(dataset: &LabeledDataset) -> BTreeMap<i32, YearCounts> {
    let mut table: BTreeMap<i32, YearCounts> = BTreeMap::new();
    for ex in &dataset.examples {
        let row = table.entry(ex.year).or_default();
        *row.per_class.entry(ex.label.clone()).or_default() += 1;
        row.total += 1;
    }
    table
}

/// Renders the year × class table as CSV with one column per taxonomy class.
pub fn render_counts_csv(table: &BTreeMap<i32, YearCounts>, taxonomy: &Taxonomy) -> String {
    let codes = taxonomy.codes();
    let mut out = format!("year,{},total\n", codes.join(","));
    for (year, row) in table {
        let cells: Vec<String> = codes
            .iter()
            .map(|c| row.per_class.get(c).copied().unwrap_or(0).to_string())
            .collect();
        out.push_str(&format!("{year},{},{}\n", cells.join(","), row.total));
    }
    out
}
