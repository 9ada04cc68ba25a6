//! Command-line front end for the hardware vulnerability classifier.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vulnclass::corpus::CorpusError;
use vulnclass::experiment::ExperimentError;
use vulnclass::svm::SvmError;

use config::{ParamArgs, ResourceArgs};

#[derive(Debug, Parser)]
#[command(
    name = "vulnclass",
    version,
    about = "Classify hardware CVE records into device classes"
)]
struct Cli {
    /// JSON file with parameter defaults; flags take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse NVD feeds (XML or JSON, optionally gzipped) into a record store
    Ingest {
        #[arg(required = true)]
        feeds: Vec<PathBuf>,
        /// Output record store (NDJSON)
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep hardware records, optionally restricted to a year range or quarter
    Select {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        from: Option<i32>,
        #[arg(long)]
        to: Option<i32>,
        /// Calendar quarter of the published date (needs --from = --to)
        #[arg(long)]
        quarter: Option<u32>,
    },
    /// Join hardware records with their labels into a dataset (NDJSON)
    Dataset {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the year by class count table as CSV
        #[arg(long)]
        counts: Option<PathBuf>,
        #[command(flatten)]
        resources: ResourceArgs,
    },
    /// Train a model on labelled hardware records
    Train {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Output model file (JSON)
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        from: Option<i32>,
        #[arg(long)]
        to: Option<i32>,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        resources: ResourceArgs,
    },
    /// Predict device classes, one JSON line per record
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, required_unless_present = "record", conflicts_with = "record")]
        store: Option<PathBuf>,
        /// A single record as a JSON object
        #[arg(long)]
        record: Option<PathBuf>,
        /// Skip records without a hardware CPE
        #[arg(long)]
        hardware_only: bool,
        #[arg(long)]
        stopwords: Option<PathBuf>,
        /// Write predictions here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a model against labelled records
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        year: Option<i32>,
        #[arg(long, requires = "year")]
        quarter: Option<u32>,
        #[arg(long, default_value = "text")]
        format: String,
        /// Class codes left out of the metrics (repeat or comma-separate)
        #[arg(long = "exclude", value_delimiter = ',')]
        exclude: Vec<String>,
        #[arg(long)]
        stopwords: Option<PathBuf>,
    },
    /// Train on a year range, test on a later year or quarter
    Experiment {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        train_start: i32,
        #[arg(long)]
        train_end: i32,
        #[arg(long)]
        test_year: i32,
        #[arg(long)]
        test_quarter: Option<u32>,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        resources: ResourceArgs,
    },
    /// Run several experiments and summarise them
    Sweep {
        #[arg(long)]
        store: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// JSON array of {train_start, train_end, test_year, test_quarter?}
        #[arg(
            long,
            required_unless_present = "test_year",
            conflicts_with = "test_year"
        )]
        specs: Option<PathBuf>,
        /// Shorthand for the four growing windows ending the year before
        #[arg(long)]
        test_year: Option<i32>,
        #[arg(long)]
        out_dir: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        resources: ResourceArgs,
    },
    /// Write a seeded synthetic record store and label file
    Synth {
        #[arg(long)]
        out_store: PathBuf,
        #[arg(long)]
        out_labels: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// An argument combination clap cannot express.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

/// A broken internal guarantee, such as overlapping train and test sets.
#[derive(Debug, thiserror::Error)]
#[error("invariant violated: {0}")]
pub struct InvariantError(pub String);

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if cause.is::<InvariantError>() {
            return 3;
        }
        if let Some(e) = cause.downcast_ref::<ExperimentError>() {
            match e {
                ExperimentError::BadRange { .. }
                | ExperimentError::InvalidSpec(_)
                | ExperimentError::NoSpecs => return 1,
                ExperimentError::Svm(SvmError::NonFinite { .. }) => return 3,
                ExperimentError::Corpus(CorpusError::BadRange { .. }) => return 1,
                _ => {}
            }
        }
        if let Some(SvmError::NonFinite { .. }) = cause.downcast_ref::<SvmError>() {
            return 3;
        }
        if let Some(CorpusError::BadRange { .. }) = cause.downcast_ref::<CorpusError>() {
            return 1;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
