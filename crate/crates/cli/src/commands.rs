//! Subcommand implementations.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use vulnclass::corpus::{
    build_dataset, count_by_year_and_class, filter_quarter, filter_years_by, is_hardware,
    load_labels, render_counts_csv, RecordText, Taxonomy,
};
use vulnclass::eval::{evaluate, render, render_matrix_csv, ReportFormat};
use vulnclass::experiment::{
    render_sweep_csv, run_experiment, run_sweep, temporal_windows, ExclusionStage,
    ExperimentInputs, ExperimentOutcome, ExperimentParams, ExperimentSpec, SweepRow,
};
use vulnclass::nvd::{
    read_feed_file, read_store_file, write_store, IngestStats, VulnerabilityRecord,
};
use vulnclass::svm::{train_ovr, MulticlassModel};
use vulnclass::synth::{generate, SynthConfig};
use vulnclass::textprep::{Preprocessor, StopWords};

use crate::config::FileConfig;
use crate::{Cli, Command, InvariantError, UsageError};

pub fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Ingest { feeds, out } => ingest(&feeds, &out),
        Command::Select {
            store,
            out,
            from,
            to,
            quarter,
        } => select(&store, &out, from, to, quarter),
        Command::Dataset {
            store,
            labels,
            out,
            counts,
            resources,
        } => {
            let taxonomy = resources.taxonomy(&cfg);
            dataset(&store, &labels, &out, counts.as_deref(), &taxonomy)
        }
        Command::Train {
            store,
            labels,
            out,
            from,
            to,
            params,
            resources,
        } => {
            let params = params.resolve(&cfg);
            let stopwords = resources.stopwords(&cfg)?;
            let taxonomy = resources.taxonomy(&cfg);
            train(
                &store, &labels, &out, from, to, &params, &taxonomy, stopwords,
            )
        }
        Command::Predict {
            model,
            store,
            record,
            hardware_only,
            stopwords,
            out,
        } => {
            let stopwords = load_stopwords(stopwords.as_deref().or(cfg.stopwords.as_deref()))?;
            predict(
                &model,
                store.as_deref(),
                record.as_deref(),
                hardware_only,
                stopwords,
                out.as_deref(),
            )
        }
        Command::Evaluate {
            model,
            store,
            labels,
            year,
            quarter,
            format,
            exclude,
            stopwords,
        } => {
            let excluded: BTreeSet<String> = if exclude.is_empty() {
                cfg.excluded_classes.clone().unwrap_or_default()
            } else {
                exclude.iter().map(|c| c.trim().to_string()).collect()
            };
            let stopwords = load_stopwords(stopwords.as_deref().or(cfg.stopwords.as_deref()))?;
            let format: ReportFormat = format.parse().map_err(|e| UsageError(format!("{e}")))?;
            evaluate_cmd(
                &model, &store, &labels, year, quarter, format, &excluded, stopwords,
            )
        }
        Command::Experiment {
            store,
            labels,
            train_start,
            train_end,
            test_year,
            test_quarter,
            out_dir,
            params,
            resources,
        } => {
            let mut spec = ExperimentSpec::new(train_start, train_end, test_year)
                .with_params(params.resolve(&cfg));
            spec.test_quarter = test_quarter;
            let stopwords = resources.stopwords(&cfg)?;
            let taxonomy = resources.taxonomy(&cfg);
            experiment(&store, &labels, &spec, &taxonomy, &stopwords, &out_dir)
        }
        Command::Sweep {
            store,
            labels,
            specs,
            test_year,
            out_dir,
            params,
            resources,
        } => {
            let params = params.resolve(&cfg);
            let specs = match (specs, test_year) {
                (Some(path), _) => read_specs(&path, &params)?,
                (None, Some(year)) => temporal_windows(year, &params),
                (None, None) => return Err(UsageError("need --specs or --test-year".into()).into()),
            };
            let stopwords = resources.stopwords(&cfg)?;
            let taxonomy = resources.taxonomy(&cfg);
            sweep(&store, &labels, &specs, &taxonomy, &stopwords, &out_dir)
        }
        Command::Synth {
            out_store,
            out_labels,
            seed,
        } => synth(&out_store, &out_labels, seed),
    }
}

fn load_stopwords(path: Option<&Path>) -> anyhow::Result<StopWords> {
    match path {
        Some(p) => {
            StopWords::from_file(p).with_context(|| format!("reading stop-words {}", p.display()))
        }
        None => Ok(StopWords::bundled()),
    }
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_file(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let mut out = create(path)?;
    out.write_all(bytes)?;
    out.flush()?;
    Ok(())
}

fn read_store(path: &Path) -> anyhow::Result<Vec<VulnerabilityRecord>> {
    read_store_file(path).with_context(|| format!("reading store {}", path.display()))
}

fn read_labels(path: &Path, taxonomy: &Taxonomy) -> anyhow::Result<BTreeMap<String, String>> {
    let file = File::open(path).with_context(|| format!("opening labels {}", path.display()))?;
    load_labels(file, taxonomy).with_context(|| format!("reading labels {}", path.display()))
}

fn load_model(path: &Path) -> anyhow::Result<MulticlassModel> {
    let file = File::open(path).with_context(|| format!("opening model {}", path.display()))?;
    MulticlassModel::load(std::io::BufReader::new(file))
        .with_context(|| format!("loading model {}", path.display()))
}

#[derive(Serialize)]
struct IngestSummary<'a> {
    feeds_ok: usize,
    feeds_failed: usize,
    #[serde(flatten)]
    stats: &'a IngestStats,
}

fn ingest(feeds: &[std::path::PathBuf], out: &Path) -> anyhow::Result<()> {
    let mut records = Vec::new();
    let mut stats = IngestStats::default();
    let mut failed = 0;
    let mut last_error = None;
    for feed in feeds {
        match read_feed_file(feed) {
            Ok((recs, s)) => {
                records.extend(recs);
                stats.merge(&s);
            }
            Err(e) => {
                eprintln!("warning: skipping feed {}: {e}", feed.display());
                failed += 1;
                last_error = Some(e);
            }
        }
    }
    if failed == feeds.len() {
        if let Some(e) = last_error {
            return Err(e).context("no feed could be read");
        }
    }
    write_store(&records, create(out)?)?;
    let summary = IngestSummary {
        feeds_ok: feeds.len() - failed,
        feeds_failed: failed,
        stats: &stats,
    };
    println!("{}", serde_json::to_string(&summary)?);
    Ok(())
}

fn select(
    store: &Path,
    out: &Path,
    from: Option<i32>,
    to: Option<i32>,
    quarter: Option<u32>,
) -> anyhow::Result<()> {
    let records = read_store(store)?;
    let hardware: Vec<&VulnerabilityRecord> = records.iter().filter(|r| is_hardware(r)).collect();
    let chosen = match (from, to, quarter) {
        (_, _, Some(q)) => {
            let year = match (from, to) {
                (Some(a), Some(b)) if a == b => a,
                _ => {
                    return Err(UsageError(
                        "--quarter needs --from and --to naming one year".into(),
                    )
                    .into())
                }
            };
            if !(1..=4).contains(&q) {
                return Err(UsageError(format!("quarter must be 1-4, got {q}")).into());
            }
            filter_quarter(hardware, year, q)
        }
        (None, None, None) => hardware,
        (a, b, None) => filter_years_by(
            hardware,
            a.unwrap_or(i32::MIN),
            b.unwrap_or(i32::MAX),
            Default::default(),
        )?,
    };
    let owned: Vec<VulnerabilityRecord> = chosen.into_iter().cloned().collect();
    write_store(&owned, create(out)?)?;
    eprintln!("selected {} of {} records", owned.len(), records.len());
    Ok(())
}

fn dataset(
    store: &Path,
    labels: &Path,
    out: &Path,
    counts: Option<&Path>,
    taxonomy: &Taxonomy,
) -> anyhow::Result<()> {
    let records = read_store(store)?;
    let labels = read_labels(labels, taxonomy)?;
    let build = build_dataset(&records, &labels, taxonomy);
    build.dataset.write_ndjson(create(out)?)?;
    if let Some(path) = counts {
        let table = count_by_year_and_class(&build.dataset);
        write_file(path, render_counts_csv(&table, taxonomy).as_bytes())?;
    }
    eprintln!(
        "{} examples, {} unlabelled hardware records, {} outside the taxonomy",
        build.dataset.len(),
        build.unlabeled.len(),
        build.excluded
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    store: &Path,
    labels: &Path,
    out: &Path,
    from: Option<i32>,
    to: Option<i32>,
    params: &ExperimentParams,
    taxonomy: &Taxonomy,
    stopwords: StopWords,
) -> anyhow::Result<()> {
    params.validate()?;
    let records = read_store(store)?;
    let labels = read_labels(labels, taxonomy)?;
    let taxonomy = match params.exclusion_stage {
        ExclusionStage::Training => taxonomy.without(&params.excluded_classes)?,
        ExclusionStage::Report => taxonomy.clone(),
    };
    let window = filter_years_by(
        &records,
        from.unwrap_or(i32::MIN),
        to.unwrap_or(i32::MAX),
        params.year_basis,
    )?;
    let build = build_dataset(window, &labels, &taxonomy);
    if build.dataset.is_empty() {
        bail!("no labelled hardware records to train on");
    }
    let pre = Preprocessor::new(stopwords, params.include_versions);
    let model = train_ovr(&build.dataset, &params.ovr_params(), &pre)?;
    write_file(out, &model.to_json())?;
    eprintln!(
        "trained {} classes on {} examples",
        model.classes.len(),
        build.dataset.len()
    );
    Ok(())
}

#[derive(Serialize)]
struct PredictionLine<'a> {
    cve_id: &'a str,
    predicted_class: &'a str,
    decisions: &'a BTreeMap<String, f64>,
    low_confidence: bool,
}

fn predict(
    model_path: &Path,
    store: Option<&Path>,
    record: Option<&Path>,
    hardware_only: bool,
    stopwords: StopWords,
    out: Option<&Path>,
) -> anyhow::Result<()> {
    let model = load_model(model_path)?;
    let pre = model.preprocessor(stopwords)?;
    let records = match (store, record) {
        (Some(path), _) => read_store(path)?,
        (None, Some(path)) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let rec: VulnerabilityRecord = serde_json::from_str(&text)
                .with_context(|| format!("parsing record {}", path.display()))?;
            vec![rec]
        }
        (None, None) => return Err(UsageError("need --store or --record".into()).into()),
    };
    let mut sink: Box<dyn Write> = match out {
        Some(path) => Box::new(create(path)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut skipped = 0;
    for rec in &records {
        if hardware_only && !is_hardware(rec) {
            skipped += 1;
            continue;
        }
        let p = model.predict(&pre, &RecordText::from_record(rec));
        let line = PredictionLine {
            cve_id: &rec.cve_id,
            predicted_class: &p.class,
            decisions: &p.decisions,
            low_confidence: p.low_confidence,
        };
        serde_json::to_writer(&mut sink, &line)?;
        sink.write_all(b"\n")?;
    }
    sink.flush()?;
    if skipped > 0 {
        eprintln!("skipped {skipped} non-hardware records");
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn evaluate_cmd(
    model_path: &Path,
    store: &Path,
    labels: &Path,
    year: Option<i32>,
    quarter: Option<u32>,
    format: ReportFormat,
    excluded: &BTreeSet<String>,
    stopwords: StopWords,
) -> anyhow::Result<()> {
    let model = load_model(model_path)?;
    let pre = model.preprocessor(stopwords)?;
    let records = read_store(store)?;
    let labels = read_labels(labels, &model.taxonomy)?;
    let chosen: Vec<&VulnerabilityRecord> = match (year, quarter) {
        (Some(y), Some(q)) => filter_quarter(&records, y, q),
        (Some(y), None) => filter_years_by(&records, y, y, Default::default())?,
        (None, _) => records.iter().collect(),
    };
    let build = build_dataset(chosen, &labels, &model.taxonomy);
    let truth: Vec<&str> = build
        .dataset
        .examples
        .iter()
        .map(|e| e.label.as_str())
        .collect();
    let predicted: Vec<String> = build
        .dataset
        .examples
        .iter()
        .map(|e| model.predict(&pre, &e.text).class)
        .collect();
    let report = evaluate(
        &truth,
        &predicted.iter().map(String::as_str).collect::<Vec<_>>(),
        &model.taxonomy,
        excluded,
    )?;
    std::io::stdout().write_all(&render(&report, format))?;
    Ok(())
}

fn check_disjoint(outcome: &ExperimentOutcome) -> anyhow::Result<()> {
    let train: BTreeSet<&String> = outcome.train_ids.iter().collect();
    if let Some(id) = outcome.test_ids.iter().find(|id| train.contains(id)) {
        return Err(
            InvariantError(format!("{id} is in both the training and the test set")).into(),
        );
    }
    Ok(())
}

fn write_outcome(outcome: &ExperimentOutcome, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_file(&dir.join("model.json"), &outcome.model.to_json())?;
    write_file(
        &dir.join("report.json"),
        &render(&outcome.report, ReportFormat::Json),
    )?;
    write_file(
        &dir.join("report.csv"),
        &render(&outcome.report, ReportFormat::Csv),
    )?;
    write_file(
        &dir.join("report.txt"),
        &render(&outcome.report, ReportFormat::Text),
    )?;
    write_file(
        &dir.join("confusion.csv"),
        render_matrix_csv(&outcome.report.matrix).as_bytes(),
    )?;
    let mut preds = create(&dir.join("predictions.ndjson"))?;
    for p in &outcome.predictions {
        serde_json::to_writer(&mut preds, p)?;
        preds.write_all(b"\n")?;
    }
    preds.flush()?;
    Ok(())
}

fn experiment(
    store: &Path,
    labels: &Path,
    spec: &ExperimentSpec,
    taxonomy: &Taxonomy,
    stopwords: &StopWords,
    out_dir: &Path,
) -> anyhow::Result<()> {
    spec.validate()?;
    let records = read_store(store)?;
    let labels = read_labels(labels, taxonomy)?;
    let inputs = ExperimentInputs {
        records: &records,
        labels: &labels,
        taxonomy,
        stopwords,
    };
    let outcome = run_experiment(spec, inputs)?;
    check_disjoint(&outcome)?;
    write_outcome(&outcome, out_dir)?;
    if outcome.overlap_removed > 0 {
        eprintln!(
            "removed {} training records that also fall in the test period",
            outcome.overlap_removed
        );
    }
    println!(
        "{}",
        serde_json::to_string(&SweepRow::from_outcome(&outcome))?
    );
    Ok(())
}

/// One entry of a sweep spec file; parameters come from flags and config.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PeriodSpec {
    train_start: i32,
    train_end: i32,
    test_year: i32,
    #[serde(default)]
    test_quarter: Option<u32>,
}

fn read_specs(path: &Path, params: &ExperimentParams) -> anyhow::Result<Vec<ExperimentSpec>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let periods: Vec<PeriodSpec> = serde_json::from_str(&text)
        .map_err(|e| UsageError(format!("parsing spec file {}: {e}", path.display())))?;
    Ok(periods
        .into_iter()
        .map(|p| {
            let mut spec = ExperimentSpec::new(p.train_start, p.train_end, p.test_year)
                .with_params(params.clone());
            spec.test_quarter = p.test_quarter;
            spec
        })
        .collect())
}

fn sweep(
    store: &Path,
    labels: &Path,
    specs: &[ExperimentSpec],
    taxonomy: &Taxonomy,
    stopwords: &StopWords,
    out_dir: &Path,
) -> anyhow::Result<()> {
    let records = read_store(store)?;
    let labels = read_labels(labels, taxonomy)?;
    let inputs = ExperimentInputs {
        records: &records,
        labels: &labels,
        taxonomy,
        stopwords,
    };
    let result = run_sweep(specs, inputs)?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    for (i, outcome) in result.outcomes.iter().enumerate() {
        if let Ok(outcome) = outcome {
            check_disjoint(outcome)?;
            let name = format!(
                "{:02}_{}_{}",
                i,
                outcome.spec.train_label(),
                outcome.spec.test_label()
            );
            write_outcome(outcome, &out_dir.join(name))?;
        }
    }
    write_file(
        &out_dir.join("summary.csv"),
        render_sweep_csv(&result.rows()).as_bytes(),
    )?;
    let failures = result.failures(specs);
    let mut json = serde_json::to_vec_pretty(&failures)?;
    json.push(b'\n');
    write_file(&out_dir.join("failures.json"), &json)?;
    for f in &failures {
        eprintln!(
            "experiment {} ({} -> {}) failed: {}",
            f.index, f.train_range, f.test_period, f.error
        );
    }
    eprintln!(
        "{} of {} experiments succeeded",
        specs.len() - failures.len(),
        specs.len()
    );
    Ok(())
}

fn synth(out_store: &Path, out_labels: &Path, seed: Option<u64>) -> anyhow::Result<()> {
    let mut config = SynthConfig::default();
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let corpus = generate(&config);
    write_store(&corpus.records, create(out_store)?)?;
    write_file(out_labels, corpus.labels_csv().as_bytes())?;
    eprintln!("wrote {} records", corpus.records.len());
    Ok(())
}
