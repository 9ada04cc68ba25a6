//! Defaults from an optional JSON config file, overridden by flags.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::Deserialize;

use vulnclass::corpus::{Taxonomy, YearBasis};
use vulnclass::experiment::{ExclusionStage, ExperimentParams};
use vulnclass::textprep::StopWords;

/// Every key is optional; unknown keys are rejected.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub min_df: Option<u64>,
    pub balance: Option<bool>,
    pub excluded_classes: Option<BTreeSet<String>>,
    pub exclusion_stage: Option<ExclusionStage>,
    pub include_versions: Option<bool>,
    pub year_basis: Option<YearBasis>,
    pub stopwords: Option<PathBuf>,
    pub with_class_c: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<FileConfig> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StageArg {
    Report,
    Training,
}

impl From<StageArg> for ExclusionStage {
    fn from(s: StageArg) -> Self {
        match s {
            StageArg::Report => ExclusionStage::Report,
            StageArg::Training => ExclusionStage::Training,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BasisArg {
    CveId,
    Published,
}

impl From<BasisArg> for YearBasis {
    fn from(b: BasisArg) -> Self {
        match b {
            BasisArg::CveId => YearBasis::CveId,
            BasisArg::Published => YearBasis::Published,
        }
    }
}

/// Training and evaluation parameters.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// SVM cost C [default: 1.0]
    #[arg(short = 'C', long = "c")]
    pub c: Option<f64>,
    /// Stop when the largest KKT violation drops below this [default: 1e-4]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Maximum training epochs [default: 1000]
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Seed for the coordinate shuffle [default: 42]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Drop tokens seen in fewer training documents [default: 1]
    #[arg(long)]
    pub min_df: Option<u64>,
    /// Rescale C per class by n / (k * n_c)
    #[arg(long)]
    pub balance: bool,
    /// Class codes to exclude (repeat or comma-separate)
    #[arg(long = "exclude", value_delimiter = ',')]
    pub exclude: Vec<String>,
    /// Where excluded classes are dropped [default: report]
    #[arg(long, value_enum)]
    pub exclusion_stage: Option<StageArg>,
    /// Add CPE version tokens to the features
    #[arg(long)]
    pub include_versions: bool,
    /// Which date decides a record's year [default: cve-id]
    #[arg(long, value_enum)]
    pub year_basis: Option<BasisArg>,
}

impl ParamArgs {
    pub fn resolve(&self, cfg: &FileConfig) -> ExperimentParams {
        let d = ExperimentParams::default();
        ExperimentParams {
            c: self.c.or(cfg.c).unwrap_or(d.c),
            tol: self.tol.or(cfg.tol).unwrap_or(d.tol),
            max_iter: self.max_iter.or(cfg.max_iter).unwrap_or(d.max_iter),
            seed: self.seed.or(cfg.seed).unwrap_or(d.seed),
            min_df: self.min_df.or(cfg.min_df).unwrap_or(d.min_df),
            balance: self.balance || cfg.balance.unwrap_or(d.balance),
            excluded_classes: if self.exclude.is_empty() {
                cfg.excluded_classes.clone().unwrap_or_default()
            } else {
                self.exclude.iter().map(|c| c.trim().to_string()).collect()
            },
            exclusion_stage: self
                .exclusion_stage
                .map(Into::into)
                .or(cfg.exclusion_stage)
                .unwrap_or(d.exclusion_stage),
            include_versions: self.include_versions || cfg.include_versions.unwrap_or(false),
            year_basis: self
                .year_basis
                .map(Into::into)
                .or(cfg.year_basis)
                .unwrap_or(d.year_basis),
        }
    }
}

/// Stop-word list and taxonomy selection.
#[derive(Debug, Clone, Default, Args)]
pub struct ResourceArgs {
    /// Stop-word file, one word per line [default: bundled list]
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Add the optional class C to the taxonomy
    #[arg(long)]
    pub with_class_c: bool,
}

impl ResourceArgs {
    pub fn stopwords(&self, cfg: &FileConfig) -> anyhow::Result<StopWords> {
        match self.stopwords.as_ref().or(cfg.stopwords.as_ref()) {
            Some(path) => StopWords::from_file(path)
                .with_context(|| format!("reading stop-words {}", path.display())),
            None => Ok(StopWords::bundled()),
        }
    }

    pub fn taxonomy(&self, cfg: &FileConfig) -> Taxonomy {
        if self.with_class_c || cfg.with_class_c.unwrap_or(false) {
            Taxonomy::iot_default().with_extension_c()
        } else {
            Taxonomy::iot_default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_config() {
        let cfg: FileConfig = serde_json::from_str(
            r#"{"C": 0.5, "seed": 7, "excluded_classes": ["A"], "balance": true}"#,
        )
        .unwrap();
        let args = ParamArgs {
            seed: Some(9),
            ..ParamArgs::default()
        };
        let p = args.resolve(&cfg);
        assert_eq!(p.c, 0.5);
        assert_eq!(p.seed, 9);
        assert!(p.balance);
        assert!(p.excluded_classes.contains("A"));
        assert_eq!(p.tol, 1e-4);
    }

    #[test]
    fn unknown_config_keys_rejected() {
        assert!(serde_json::from_str::<FileConfig>(r#"{"gamma": 1}"#).is_err());
    }
}
