//! Confusion matrices, per-class precision / recall / F1 and the
//! support-weighted F1.
//!
//! Matrices are oriented rows = true class, columns = predicted class.
//! A zero denominator yields 0.0 and an explicit flag, never NaN.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Taxonomy;

pub const REPORT_SCHEMA_VERSION: u64 = 1;
pub const ORIENTATION: &str = "rows=true,columns=predicted";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("label {0} is not in the taxonomy")]
    UnknownLabel(String),
    #[error("class {0} is not in the matrix")]
    UnknownClass(String),
    #[error("nothing to evaluate")]
    EmptyEvaluation,
    #[error("unsupported report format {0} (expected csv, json or text)")]
    UnsupportedFormat(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_order: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    /// An all-zero matrix over the given classes (sorted, deduplicated).
    pub fn zeros<I, S>(classes: I) -> ConfusionMatrix
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let class_order: Vec<String> = classes
            .into_iter()
            .map(Into::into)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let k = class_order.len();
        ConfusionMatrix {
            class_order,
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn index_of(&self, class: &str) -> Option<usize> {
        self.class_order
            .binary_search_by(|c| c.as_str().cmp(class))
            .ok()
    }

    pub fn get(&self, truth: &str, predicted: &str) -> u64 {
        match (self.index_of(truth), self.index_of(predicted)) {
            (Some(i), Some(j)) => self.counts[i][j],
            _ => 0,
        }
    }

    /// Adds `n` to the (truth, predicted) cell; both must be in the matrix.
    pub fn add(&mut self, truth: &str, predicted: &str, n: u64) -> Result<(), EvalError> {
        let i = self
            .index_of(truth)
            .ok_or_else(|| EvalError::UnknownClass(truth.into()))?;
        let j = self
            .index_of(predicted)
            .ok_or_else(|| EvalError::UnknownClass(predicted.into()))?;
        self.counts[i][j] += n;
        Ok(())
    }

    pub fn row_sum(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn column_sum(&self, j: usize) -> u64 {
        self.counts.iter().map(|row| row[j]).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.class_order.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Builds the matrix over the classes occurring in `truth` or `predicted`.
pub fn confusion<S: AsRef<str>>(
    truth: &[S],
    predicted: &[S],
    taxonomy: &Taxonomy,
) -> Result<ConfusionMatrix, EvalError> {
    if truth.len() != predicted.len() {
        return Err(EvalError::LengthMismatch {
            truth: truth.len(),
            predicted: predicted.len(),
        });
    }
    let labels = truth.iter().chain(predicted).map(AsRef::as_ref);
    if let Some(bad) = labels.clone().find(|l| !taxonomy.contains(l)) {
        return Err(EvalError::UnknownLabel(bad.to_string()));
    }
    let mut matrix = ConfusionMatrix::zeros(labels);
    for (t, p) in truth.iter().zip(predicted) {
        matrix.add(t.as_ref(), p.as_ref(), 1)?;
    }
    Ok(matrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Undefined {
    Precision,
    Recall,
    F1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub undefined: BTreeSet<Undefined>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

/// F1 from precision and recall; 0.0 when both are zero.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// Metrics from raw counts.
pub fn metrics_from_counts(tp: u64, fp: u64, fn_: u64) -> ClassMetrics {
    let mut undefined = BTreeSet::new();
    let precision = ratio(tp, tp + fp).unwrap_or_else(|| {
        undefined.insert(Undefined::Precision);
        0.0
    });
    let recall = ratio(tp, tp + fn_).unwrap_or_else(|| {
        undefined.insert(Undefined::Recall);
        0.0
    });
    if precision + recall == 0.0 {
        undefined.insert(Undefined::F1);
    }
    ClassMetrics {
        precision,
        recall,
        f1: f1_score(precision, recall),
        support: tp + fn_,
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_,
        undefined,
    }
}

pub fn class_metrics(matrix: &ConfusionMatrix, class: &str) -> Result<ClassMetrics, EvalError> {
    let i = matrix
        .index_of(class)
        .ok_or_else(|| EvalError::UnknownClass(class.into()))?;
    let tp = matrix.counts[i][i];
    Ok(metrics_from_counts(
        tp,
        matrix.column_sum(i) - tp,
        matrix.row_sum(i) - tp,
    ))
}

/// Support-weighted mean F1 over classes not in `excluded`.
pub fn weighted_f1(
    per_class: &BTreeMap<String, ClassMetrics>,
    excluded: &BTreeSet<String>,
) -> Result<f64, EvalError> {
    let (num, den) = per_class
        .iter()
        .filter(|(code, _)| !excluded.contains(*code))
        .fold((0.0, 0u64), |(num, den), (_, m)| {
            (num + m.support as f64 * m.f1, den + m.support)
        });
    if den == 0 {
        return Err(EvalError::EmptyEvaluation);
    }
    Ok(num / den as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u64,
    pub orientation: String,
    pub matrix: ConfusionMatrix,
    /// Metrics for every matrix class that is not excluded.
    pub per_class: BTreeMap<String, ClassMetrics>,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub total: u64,
    pub excluded_classes: BTreeSet<String>,
}

/// Full report. Excluded classes stay in the matrix (and in accuracy) but
/// get no metric row and do not enter the weighted F1.
pub fn evaluate<S: AsRef<str>>(
    truth: &[S],
    predicted: &[S],
    taxonomy: &Taxonomy,
    excluded: &BTreeSet<String>,
) -> Result<EvalReport, EvalError> {
    let matrix = confusion(truth, predicted, taxonomy)?;
    report_from_matrix(matrix, excluded)
}

pub fn report_from_matrix(
    matrix: ConfusionMatrix,
    excluded: &BTreeSet<String>,
) -> Result<EvalReport, EvalError> {
    let total = matrix.total();
    if total == 0 {
        return Err(EvalError::EmptyEvaluation);
    }
    let per_class = matrix
        .class_order
        .iter()
        .filter(|c| !excluded.contains(*c))
        .map(|c| Ok((c.clone(), class_metrics(&matrix, c)?)))
        .collect::<Result<BTreeMap<_, _>, EvalError>>()?;
    let weighted_f1 = weighted_f1(&per_class, excluded)?;
    Ok(EvalReport {
        schema_version: REPORT_SCHEMA_VERSION,
        orientation: ORIENTATION.into(),
        accuracy: matrix.trace() as f64 / total as f64,
        total,
        matrix,
        per_class,
        weighted_f1,
        excluded_classes: excluded.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Text,
}

impl FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "text" | "txt" => Ok(ReportFormat::Text),
            _ => Err(EvalError::UnsupportedFormat(s.into())),
        }
    }
}

/// Parses `format` then renders; see [`render`].
pub fn render_report(report: &EvalReport, format: &str) -> Result<Vec<u8>, EvalError> {
    Ok(render(report, format.parse()?))
}

pub fn render(report: &EvalReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Csv => render_csv(report).into_bytes(),
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report values are finite");
            out.push(b'\n');
            out
        }
        ReportFormat::Text => render_text(report).into_bytes(),
    }
}

fn render_csv(report: &EvalReport) -> String {
    let mut out = String::from("class,precision,recall,f1,support\n");
    for (code, m) in &report.per_class {
        let _ = writeln!(
            out,
            "{code},{},{},{},{}",
            m.precision, m.recall, m.f1, m.support
        );
    }
    out
}

/// Confusion matrix as CSV; the corner cell states the orientation.
pub fn render_matrix_csv(matrix: &ConfusionMatrix) -> String {
    let mut out = String::from("true\\predicted");
    for c in &matrix.class_order {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for (code, row) in matrix.class_order.iter().zip(&matrix.counts) {
        out.push_str(code);
        for n in row {
            let _ = write!(out, ",{n}");
        }
        out.push('\n');
    }
    out
}

fn render_text(report: &EvalReport) -> String {
    let m = &report.matrix;
    let width = m
        .counts
        .iter()
        .flatten()
        .map(|n| n.to_string().len())
        .chain(m.class_order.iter().map(String::len))
        .max()
        .unwrap_or(1)
        .max(4);
    let mut out = String::from("confusion matrix (rows = true class, columns = predicted class)\n");
    let _ = write!(out, "{:>width$}", "");
    for c in &m.class_order {
        let _ = write!(out, " {c:>width$}");
    }
    out.push('\n');
    for (code, row) in m.class_order.iter().zip(&m.counts) {
        let _ = write!(out, "{code:>width$}");
        for n in row {
            let _ = write!(out, " {n:>width$}");
        }
        out.push('\n');
    }
    out.push('\n');
    let _ = writeln!(out, "class  precision  recall      f1  support");
    for (code, cm) in &report.per_class {
        let _ = writeln!(
            out,
            "{code:<5}  {:>9.4}  {:>6.4}  {:>6.4}  {:>7}",
            cm.precision, cm.recall, cm.f1, cm.support
        );
    }
    if !report.excluded_classes.is_empty() {
        let excluded: Vec<&str> = report.excluded_classes.iter().map(String::as_str).collect();
        let _ = writeln!(out, "excluded: {}", excluded.join(","));
    }
    let _ = writeln!(out, "accuracy: {:.4}", report.accuracy);
    let _ = writeln!(out, "weighted f1: {:.4}", report.weighted_f1);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tax() -> Taxonomy {
        Taxonomy::iot_default()
    }

    #[test]
    fn small_confusion() {
        let m = confusion(&["H", "H"], &["H", "E"], &tax()).unwrap();
        assert_eq!(m.class_order, vec!["E", "H"]);
        assert_eq!(m.get("H", "H"), 1);
        assert_eq!(m.get("H", "E"), 1);
        assert_eq!(m.total(), 2);
    }

    #[test]
    fn perfect_is_diagonal() {
        let labels = ["H", "S", "E", "S"];
        let m = confusion(&labels, &labels, &tax()).unwrap();
        for (i, row) in m.counts.iter().enumerate() {
            for (j, &n) in row.iter().enumerate() {
                assert_eq!(n == 0, i != j);
            }
        }
    }

    #[test]
    fn confusion_errors() {
        assert_eq!(
            confusion(&["H"], &["H", "E"], &tax()),
            Err(EvalError::LengthMismatch {
                truth: 1,
                predicted: 2
            })
        );
        assert_eq!(
            confusion(&["H"], &["Z"], &tax()),
            Err(EvalError::UnknownLabel("Z".into()))
        );
        assert_eq!(
            confusion(&["C"], &["C"], &tax()),
            Err(EvalError::UnknownLabel("C".into()))
        );
        assert!(confusion(&["C"], &["C"], &tax().with_extension_c()).is_ok());
    }

    #[test]
    fn zero_denominators_flagged() {
        let m = metrics_from_counts(0, 0, 3);
        assert_eq!(m.precision, 0.0);
        assert_eq!(m.f1, 0.0);
        assert!(m.undefined.contains(&Undefined::Precision));
        assert!(m.undefined.contains(&Undefined::F1));
        assert!(!m.undefined.contains(&Undefined::Recall));
        let none = metrics_from_counts(0, 2, 0);
        assert!(none.undefined.contains(&Undefined::Recall));
    }

    #[test]
    fn equal_precision_recall() {
        assert!((f1_score(0.62, 0.62) - 0.62).abs() < 1e-15);
    }

    #[test]
    fn weighted_mean() {
        let mut per_class = BTreeMap::new();
        let mut a = metrics_from_counts(1, 0, 0);
        a.f1 = 1.0;
        let mut b = metrics_from_counts(1, 0, 2);
        b.f1 = 0.5;
        per_class.insert("H".to_string(), a);
        per_class.insert("S".to_string(), b);
        assert_eq!(weighted_f1(&per_class, &BTreeSet::new()).unwrap(), 0.625);
        let only_h: BTreeSet<String> = ["S".to_string()].into();
        assert_eq!(weighted_f1(&per_class, &only_h).unwrap(), 1.0);
        assert_eq!(
            weighted_f1(&BTreeMap::new(), &BTreeSet::new()),
            Err(EvalError::EmptyEvaluation)
        );
    }

    #[test]
    fn excluded_class_absent_from_rows() {
        let truth = ["A", "H", "H", "S"];
        let pred = ["H", "H", "A", "S"];
        let excluded: BTreeSet<String> = ["A".to_string()].into();
        let report = evaluate(&truth, &pred, &tax(), &excluded).unwrap();
        assert!(report.matrix.class_order.contains(&"A".to_string()));
        assert!(!report.per_class.contains_key("A"));
        let csv = String::from_utf8(render_report(&report, "csv").unwrap()).unwrap();
        assert!(csv.starts_with("class,precision,recall,f1,support\n"));
        assert!(!csv.contains("\nA,"));
        assert_eq!(report.accuracy, 0.5);
    }

    #[test]
    fn rendering() {
        let report =
            evaluate(&["H", "S", "S"], &["H", "S", "H"], &tax(), &BTreeSet::new()).unwrap();
        assert_eq!(
            render_report(&report, "json").unwrap(),
            render_report(&report, "json").unwrap()
        );
        let csv = String::from_utf8(render_report(&report, "csv").unwrap()).unwrap();
        assert_eq!(csv.lines().count(), 3);
        let text = String::from_utf8(render_report(&report, "text").unwrap()).unwrap();
        assert!(text.contains("rows = true class"));
        assert_eq!(
            render_report(&report, "xml"),
            Err(EvalError::UnsupportedFormat("xml".into()))
        );
        assert_eq!(
            render_matrix_csv(&report.matrix),
            "true\\predicted,H,S\nH,1,0\nS,1,1\n"
        );
        let json: EvalReport =
            serde_json::from_slice(&render(&report, ReportFormat::Json)).unwrap();
        assert_eq!(json, report);
    }
}
