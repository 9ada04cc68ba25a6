//! Temporal experiments: train on labelled hardware records from a range of
//! years, evaluate on a later year (or quarter).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    build_dataset, filter_quarter, filter_years_by, CorpusError, Taxonomy, YearBasis,
};
use crate::eval::{evaluate, EvalError, EvalReport};
use crate::nvd::VulnerabilityRecord;
use crate::svm::{train_ovr, MulticlassModel, OvrParams, Prediction, SvmError};
use crate::textprep::{Preprocessor, StopWords};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("bad year range {start}..={end}")]
    BadRange { start: i32, end: i32 },
    #[error("invalid experiment: {0}")]
    InvalidSpec(String),
    #[error("no labelled hardware records in the training range {start}..={end}")]
    EmptyTrainSet { start: i32, end: i32 },
    #[error("no labelled hardware records in the test period {0}")]
    EmptyTestSet(String),
    #[error("no experiments given")]
    NoSpecs,
    #[error(transparent)]
    Svm(#[from] SvmError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// Where excluded classes are dropped.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionStage {
    /// Train on everything; leave the classes out of metric rows and the
    /// weighted F1.
    #[default]
    Report,
    /// Also drop records of the classes from the training and test sets.
    Training,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub min_df: u64,
    pub balance: bool,
    pub excluded_classes: BTreeSet<String>,
    pub exclusion_stage: ExclusionStage,
    pub include_versions: bool,
    pub year_basis: YearBasis,
}

impl Default for ExperimentParams {
    fn default() -> Self {
        let o = OvrParams::default();
        ExperimentParams {
            c: o.c,
            tol: o.tol,
            max_iter: o.max_iter,
            seed: o.seed,
            min_df: o.min_df,
            balance: o.balanced,
            excluded_classes: BTreeSet::new(),
            exclusion_stage: ExclusionStage::default(),
            include_versions: false,
            year_basis: YearBasis::default(),
        }
    }
}

impl ExperimentParams {
    pub fn ovr_params(&self) -> OvrParams {
        OvrParams {
            c: self.c,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            min_df: self.min_df,
            balanced: self.balance,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidSpec(m));
        if !(self.c.is_finite() && self.c > 0.0) {
            return bad(format!("C must be positive, got {}", self.c));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub train_start: i32,
    pub train_end: i32,
    pub test_year: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_quarter: Option<u32>,
    #[serde(default)]
    pub params: ExperimentParams,
}

impl ExperimentSpec {
    pub fn new(train_start: i32, train_end: i32, test_year: i32) -> ExperimentSpec {
        ExperimentSpec {
            train_start,
            train_end,
            test_year,
            test_quarter: None,
            params: ExperimentParams::default(),
        }
    }

    pub fn with_quarter(mut self, quarter: u32) -> ExperimentSpec {
        self.test_quarter = Some(quarter);
        self
    }

    pub fn with_params(mut self, params: ExperimentParams) -> ExperimentSpec {
        self.params = params;
        self
    }

    /// `2015-2017`, or a single year.
    pub fn train_label(&self) -> String {
        if self.train_start == self.train_end {
            self.train_start.to_string()
        } else {
            format!("{}-{}", self.train_start, self.train_end)
        }
    }

    /// `2018` or `2019Q1`.
    pub fn test_label(&self) -> String {
        match self.test_quarter {
            Some(q) => format!("{}Q{q}", self.test_year),
            None => self.test_year.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.train_start > self.train_end {
            return Err(ExperimentError::BadRange {
                start: self.train_start,
                end: self.train_end,
            });
        }
        if self.train_end >= self.test_year {
            return Err(ExperimentError::InvalidSpec(format!(
                "training must end before the test year ({} >= {})",
                self.train_end, self.test_year
            )));
        }
        if let Some(q) = self.test_quarter {
            if !(1..=4).contains(&q) {
                return Err(ExperimentError::InvalidSpec(format!(
                    "quarter {q} is not 1-4"
                )));
            }
        }
        self.params.validate()
    }
}

/// The four windows ending the year before `test_year`: four, three, two and
/// one training years.
pub fn temporal_windows(test_year: i32, params: &ExperimentParams) -> Vec<ExperimentSpec> {
    (1..=4)
        .rev()
        .map(|span| {
            ExperimentSpec::new(test_year - span, test_year - 1, test_year)
                .with_params(params.clone())
        })
        .collect()
}

/// Shared inputs of every experiment in a run.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentInputs<'a> {
    pub records: &'a [VulnerabilityRecord],
    pub labels: &'a BTreeMap<String, String>,
    pub taxonomy: &'a Taxonomy,
    pub stopwords: &'a StopWords,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestPrediction {
    pub cve_id: String,
    pub true_class: String,
    #[serde(flatten)]
    pub prediction: Prediction,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub spec: ExperimentSpec,
    pub report: EvalReport,
    pub model: MulticlassModel,
    /// Training CVE ids, in record order.
    pub train_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub predictions: Vec<TestPrediction>,
    /// Labelled records in the test period that were also in the training
    /// range and were removed from training.
    pub overlap_removed: usize,
}

pub fn run_experiment(
    spec: &ExperimentSpec,
    inputs: ExperimentInputs<'_>,
) -> Result<ExperimentOutcome, ExperimentError> {
    spec.validate()?;
    let params = &spec.params;
    let taxonomy = match params.exclusion_stage {
        ExclusionStage::Report => inputs.taxonomy.clone(),
        ExclusionStage::Training => inputs.taxonomy.without(&params.excluded_classes)?,
    };

    let test_records = match spec.test_quarter {
        Some(q) => filter_quarter(inputs.records, spec.test_year, q),
        None => filter_years_by(
            inputs.records,
            spec.test_year,
            spec.test_year,
            params.year_basis,
        )?,
    };
    let test = build_dataset(test_records, inputs.labels, &taxonomy).dataset;
    if test.is_empty() {
        return Err(ExperimentError::EmptyTestSet(spec.test_label()));
    }

    let train_records = filter_years_by(
        inputs.records,
        spec.train_start,
        spec.train_end,
        params.year_basis,
    )?;
    let mut train = build_dataset(train_records, inputs.labels, &taxonomy).dataset;
    // A record can fall in both periods when the year basis and the quarter
    // filter disagree; the test side keeps it.
    let test_ids = test.cve_ids();
    let before = train.len();
    train.examples.retain(|e| !test_ids.contains(&e.cve_id));
    let overlap_removed = before - train.len();
    if train.is_empty() {
        return Err(ExperimentError::EmptyTrainSet {
            start: spec.train_start,
            end: spec.train_end,
        });
    }

    let pre = Preprocessor::new(inputs.stopwords.clone(), params.include_versions);
    let model = train_ovr(&train, &params.ovr_params(), &pre)?;
    let predictions: Vec<TestPrediction> = test
        .examples
        .par_iter()
        .map(|ex| TestPrediction {
            cve_id: ex.cve_id.clone(),
            true_class: ex.label.clone(),
            prediction: model.predict(&pre, &ex.text),
        })
        .collect();
    let truth: Vec<&str> = predictions.iter().map(|p| p.true_class.as_str()).collect();
    let predicted: Vec<&str> = predictions
        .iter()
        .map(|p| p.prediction.class.as_str())
        .collect();
    let report = evaluate(
        &truth,
        &predicted,
        inputs.taxonomy,
        &params.excluded_classes,
    )?;

    Ok(ExperimentOutcome {
        spec: spec.clone(),
        report,
        model,
        train_ids: train.examples.iter().map(|e| e.cve_id.clone()).collect(),
        test_ids: test.examples.iter().map(|e| e.cve_id.clone()).collect(),
        predictions,
        overlap_removed,
    })
}

/// One line of the sweep summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub train_range: String,
    pub test_period: String,
    pub n_train: usize,
    pub n_test: usize,
    pub weighted_f1: f64,
    pub accuracy: f64,
}

impl SweepRow {
    pub fn from_outcome(outcome: &ExperimentOutcome) -> SweepRow {
        SweepRow {
            train_range: outcome.spec.train_label(),
            test_period: outcome.spec.test_label(),
            n_train: outcome.train_ids.len(),
            n_test: outcome.test_ids.len(),
            weighted_f1: outcome.report.weighted_f1,
            accuracy: outcome.report.accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepFailure {
    pub index: usize,
    pub train_range: String,
    pub test_period: String,
    pub error: String,
}

#[derive(Debug)]
pub struct SweepResult {
    /// Per spec, in input order.
    pub outcomes: Vec<Result<ExperimentOutcome, ExperimentError>>,
}

impl SweepResult {
    pub fn rows(&self) -> Vec<SweepRow> {
        self.outcomes
            .iter()
            .filter_map(|o| o.as_ref().ok())
            .map(SweepRow::from_outcome)
            .collect()
    }

    pub fn failures(&self, specs: &[ExperimentSpec]) -> Vec<SweepFailure> {
        self.outcomes
            .iter()
            .zip(specs)
            .enumerate()
            .filter_map(|(index, (o, spec))| {
                o.as_ref().err().map(|e| SweepFailure {
                    index,
                    train_range: spec.train_label(),
                    test_period: spec.test_label(),
                    error: e.to_string(),
                })
            })
            .collect()
    }
}

/// Runs every spec; a failing spec is recorded and the rest still run.
pub fn run_sweep(
    specs: &[ExperimentSpec],
    inputs: ExperimentInputs<'_>,
) -> Result<SweepResult, ExperimentError> {
    if specs.is_empty() {
        return Err(ExperimentError::NoSpecs);
    }
    let outcomes = specs
        .par_iter()
        .map(|spec| run_experiment(spec, inputs))
        .collect();
    Ok(SweepResult { outcomes })
}

pub const SWEEP_CSV_HEADER: &str = "train_range,test_period,n_train,n_test,weighted_f1,accuracy";

pub fn render_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.train_range, r.test_period, r.n_train, r.n_test, r.weighted_f1, r.accuracy
        );
    }
    out
}
