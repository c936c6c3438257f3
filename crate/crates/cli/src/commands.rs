use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use qembed::analysis::{aggregate_runs, comparison_table, t_test, RunSummary, TTestVariant};
use qembed::data::{write_csv, SynthConfig};
use qembed::experiment::{read_metrics_csv, write_metrics_csv, Checkpoint, Experiment, RunMetrics};
use qembed::layout::{ring_genotype, ring_seeded_genotype, Genotype, GenotypeRecord, Ring};
use qembed::model::{Classifier, FeatureStage};
use qembed::search::{k_sweep, smbo_search, History, SearchOptions, SearchSpace};

use crate::config::{ConfigArgs, RunConfig};
use crate::{log_to_file, ConfigError, DataError};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Creates the run directory, starts its log and records the effective config.
fn open_run(c: &RunConfig, command: &str) -> Result<()> {
    std::fs::create_dir_all(&c.output_dir)
        .with_context(|| format!("creating {}", c.output_dir.display()))?;
    log_to_file(&c.output_dir.join(format!("{command}.log")))?;
    c.write(&c.output_dir)
}

/// Summary of a finished search; also readable as a genotype file.
#[derive(Debug, Serialize, Deserialize)]
struct BestReport {
    n_qubits: usize,
    k: usize,
    genotype: Vec<usize>,
    objective: f64,
    trial: usize,
    sampler: String,
    n_trials: usize,
    completed: usize,
    pruned: usize,
}

fn write_running_minimum(history: &History, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["trial", "objective", "running_min"])?;
    for (t, best) in history.trials.iter().zip(history.running_minimum()) {
        let objective = t.objective.map(|o| o.to_string()).unwrap_or_default();
        w.write_record([t.index.to_string(), objective, best.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn search(args: &ConfigArgs, resume: bool, record_seconds: bool) -> Result<()> {
    let c = RunConfig::resolve(args)?;
    open_run(&c, "search")?;
    let exp = Experiment::prepare(c.experiment.clone())?;
    let n = c.experiment.n_qubits;
    let space = SearchSpace::new(n, c.k)?;
    let history_path = c.output_dir.join("history.jsonl");
    let options = SearchOptions {
        history_path: Some(&history_path),
        resume,
        record_seconds,
        initial_genotypes: if c.search.ring_init {
            vec![ring_seeded_genotype(n, c.k)?]
        } else {
            Vec::new()
        },
    };
    log::info!(
        "{} search on {} (n_qubits={n}, k={}, {} trials)",
        c.search.sampler.name(),
        exp.data.name,
        c.k,
        c.search.tpe.n_trials
    );
    let history = smbo_search(
        space,
        |g, s| exp.objective(g, s),
        c.search.sampler,
        &c.search.tpe,
        &options,
    )?;
    write_running_minimum(&history, &c.output_dir.join("running_minimum.csv"))?;
    let best = history
        .best()
        .ok_or_else(|| anyhow::anyhow!("every trial was pruned"))?;
    let completed = history.completed().count();
    let report = BestReport {
        n_qubits: n,
        k: c.k,
        genotype: best.genotype.clone(),
        objective: best.loss(),
        trial: best.index,
        sampler: c.search.sampler.name().into(),
        n_trials: history.len(),
        completed,
        pruned: history.len() - completed,
    };
    write_json(&c.output_dir.join("best.json"), &report)?;
    log::info!(
        "best genotype {} loss {:.6} at trial {}",
        best.genotype(),
        best.loss(),
        best.index
    );
    println!("{}", serde_json::to_string(&report)?);
    Ok(())
}

fn read_genotype(path: &Path, n_qubits: usize) -> Result<Genotype> {
    let text =
        std::fs::read_to_string(path).map_err(|e| DataError(format!("{}: {e}", path.display())))?;
    let record: GenotypeRecord = serde_json::from_str(&text)
        .map_err(|e| DataError(format!("{}: not a genotype file: {e}", path.display())))?;
    if record.n_qubits != n_qubits {
        return Err(ConfigError(format!(
            "{} is for {} qubits but the config uses {n_qubits}",
            path.display(),
            record.n_qubits
        ))
        .into());
    }
    Ok(record.into_genotype()?)
}

#[derive(Serialize)]
struct EvalReport<'a> {
    genotype: GenotypeRecord,
    n_runs: usize,
    seed: u64,
    summaries: &'a [RunSummary],
}

pub fn evaluate(args: &ConfigArgs, genotype: Option<&Path>, baseline: Option<&str>) -> Result<()> {
    let c = RunConfig::resolve(args)?;
    let n = c.experiment.n_qubits;
    let genotype = match (genotype, baseline, &c.genotype) {
        (Some(path), ..) => read_genotype(path, n)?,
        (None, Some(ring), _) => ring_genotype(n, ring.parse::<Ring>()?)?,
        (None, None, Some(g)) => Genotype::new(g.clone(), n * (n - 1))?,
        _ => {
            return Err(ConfigError(
                "evaluate needs --genotype, --baseline or a `genotype` config field".into(),
            )
            .into())
        }
    };
    open_run(&c, "evaluate")?;
    let exp = Experiment::prepare(c.experiment.clone())?;
    log::info!(
        "evaluating {genotype} on {} over {} runs",
        exp.data.name,
        c.evaluate.n_runs
    );
    let runs = exp.evaluate_runs(&genotype, c.evaluate.n_runs, c.evaluate.seed)?;
    write_metrics_csv(c.output_dir.join("metrics.csv"), &runs)?;
    let summaries = metric_summaries(&runs)?;
    let record = GenotypeRecord::new(&genotype, n);
    write_json(&c.output_dir.join("genotype.json"), &record)?;
    write_json(
        &c.output_dir.join("summary.json"),
        &EvalReport {
            genotype: record,
            n_runs: runs.len(),
            seed: c.evaluate.seed,
            summaries: &summaries,
        },
    )?;

    let (model, result) = exp.train_genotype(&genotype, runs[0].seed)?;
    exp.checkpoint(&model)
        .save(c.output_dir.join("checkpoint.json"))?;
    let curve = c.output_dir.join("curve.csv");
    result
        .write_curve_csv(
            std::fs::File::create(&curve)
                .with_context(|| format!("writing {}", curve.display()))?,
        )
        .with_context(|| format!("writing {}", curve.display()))?;

    for s in &summaries {
        log::info!(
            "{} {:.4} ± {:.4} over {} runs",
            s.metric,
            s.mean,
            s.std,
            s.n_runs
        );
        println!("{}\t{:.6}\t{:.6}\t{}", s.metric, s.mean, s.std, s.n_runs);
    }
    Ok(())
}

const METRICS: [&str; 4] = ["val_loss", "val_acc", "test_loss", "test_acc"];

fn metric_column(runs: &[RunMetrics], metric: &str) -> Vec<f64> {
    runs.iter()
        .map(|r| match metric {
            "val_loss" => r.val_loss,
            "val_acc" => r.val_acc,
            "test_loss" => r.test_loss,
            _ => r.test_acc,
        })
        .collect()
}

fn metric_summaries(runs: &[RunMetrics]) -> Result<Vec<RunSummary>> {
    METRICS
        .iter()
        .map(|m| Ok(aggregate_runs(&metric_column(runs, m), *m)?))
        .collect()
}

pub fn baseline(n_qubits: usize, variant: &str, out: Option<&Path>) -> Result<()> {
    let g = ring_genotype(n_qubits, variant.parse::<Ring>()?)?;
    let text = serde_json::to_string_pretty(&GenotypeRecord::new(&g, n_qubits))?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct SweepRow {
    k: usize,
    best_trial: usize,
    best_objective: f64,
    genotype: String,
    repeats_mean: f64,
    repeats_std: f64,
    n_repeats: usize,
}

pub fn sweep(
    args: &ConfigArgs,
    k_values: Option<Vec<usize>>,
    repeats: Option<usize>,
) -> Result<()> {
    let mut c = RunConfig::resolve(args)?;
    if let Some(k) = k_values {
        c.sweep.k_values = k;
    }
    if let Some(r) = repeats {
        c.sweep.n_repeats = r;
    }
    c.validate()?;
    open_run(&c, "sweep")?;
    let exp = Experiment::prepare(c.experiment.clone())?;
    let entries = k_sweep(
        c.experiment.n_qubits,
        &c.sweep.k_values,
        |g, s| exp.objective(g, s),
        c.search.sampler,
        &c.search.tpe,
        c.sweep.n_repeats,
        Some(&c.output_dir),
    )?;
    let mut w = csv::Writer::from_path(c.output_dir.join("sweep.csv"))?;
    for e in &entries {
        let row = SweepRow {
            k: e.k,
            best_trial: e.best.index,
            best_objective: e.best.loss(),
            genotype: e.best.genotype().to_string(),
            repeats_mean: e.repeats.mean,
            repeats_std: e.repeats.std,
            n_repeats: e.repeats.n_runs,
        };
        println!(
            "k={}\tbest {:.6}\trepeats {:.6} ± {:.6}",
            row.k, row.best_objective, row.repeats_mean, row.repeats_std
        );
        w.serialize(row)?;
    }
    w.flush()?;
    write_json(&c.output_dir.join("sweep.json"), &entries)?;
    if let Some(best) = entries
        .iter()
        .min_by(|a, b| a.repeats.mean.total_cmp(&b.repeats.mean))
    {
        log::info!("lowest mean validation loss at k={}", best.k);
    }
    Ok(())
}

pub fn synth_data(config: &SynthConfig, seed: u64, out: &Path) -> Result<()> {
    let data = qembed::data::generate_synthetic(config, seed)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let schema = write_csv(&data, out)?;
    let schema_path = out.with_extension("schema.json");
    write_json(&schema_path, &schema)?;
    log::info!(
        "wrote {} rows to {} and schema {}",
        data.len(),
        out.display(),
        schema_path.display()
    );
    Ok(())
}

pub fn export_features(
    args: &ConfigArgs,
    checkpoint: &Path,
    stage: &str,
    out: Option<&Path>,
) -> Result<()> {
    let c = RunConfig::resolve(args)?;
    let stage: FeatureStage = stage.parse()?;
    std::fs::create_dir_all(&c.output_dir)
        .with_context(|| format!("creating {}", c.output_dir.display()))?;
    log_to_file(&c.output_dir.join("export-features.log"))?;
    let ck = Checkpoint::load(checkpoint)?;
    let model = ck.model()?;
    let raw = c.experiment.dataset.load()?;
    let mismatch = |what: String| {
        DataError(format!(
            "checkpoint {} does not fit the dataset: {what}",
            checkpoint.display()
        ))
    };
    if model.n_inputs() != raw.n_features() {
        return Err(mismatch(format!(
            "model takes {} features, dataset has {}",
            model.n_inputs(),
            raw.n_features()
        ))
        .into());
    }
    if model.n_classes() != raw.n_classes() {
        return Err(mismatch(format!(
            "model has {} classes, dataset has {}",
            model.n_classes(),
            raw.n_classes()
        ))
        .into());
    }
    let x = match &ck.standardization {
        Some(s) if s.mean.len() != raw.n_features() => {
            return Err(
                mismatch(format!("standardisation covers {} features", s.mean.len())).into(),
            )
        }
        Some(s) => s.transform(&raw.x),
        None => raw.x.clone(),
    };
    let path: PathBuf = out.map_or_else(
        || {
            c.output_dir
                .join(format!("features_{}.csv", stage_name(stage)))
        },
        Path::to_path_buf,
    );
    let mut w =
        csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
    let mut header: Vec<String> = (0..ck.spec.n_qubits).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    for (row, &label) in x.iter().zip(&raw.y) {
        let mut rec: Vec<String> = model
            .features(row, stage)?
            .iter()
            .map(f64::to_string)
            .collect();
        rec.push(label.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    log::info!(
        "wrote {} {} feature rows to {}",
        raw.len(),
        stage_name(stage),
        path.display()
    );
    Ok(())
}

fn stage_name(stage: FeatureStage) -> &'static str {
    match stage {
        FeatureStage::Pre => "pre",
        FeatureStage::Post => "post",
    }
}

fn labelled(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_owned(), PathBuf::from(path)),
        _ => (spec.to_owned(), PathBuf::from(spec)),
    }
}

#[derive(Serialize)]
struct TTestRow<'a> {
    a: &'a str,
    b: &'a str,
    metric: &'a str,
    variant: TTestVariant,
    t: f64,
    df: f64,
    p: f64,
}

pub fn analyze(
    metrics: &[String],
    baselines: &[String],
    histories: &[PathBuf],
    metric: &str,
    variant: &str,
    out: &Path,
) -> Result<()> {
    if metrics.is_empty() && baselines.is_empty() && histories.is_empty() {
        return Err(
            ConfigError("analyze needs --metrics, --baseline-metrics or --history".into()).into(),
        );
    }
    let variant: TTestVariant = variant.parse()?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let load = |specs: &[String]| -> Result<Vec<(String, RunSummary)>> {
        specs
            .iter()
            .map(|s| {
                let (name, path) = labelled(s);
                let runs = read_metrics_csv(&path)
                    .with_context(|| format!("reading {}", path.display()))?;
                Ok((name, aggregate_runs(&metric_column(&runs, metric), metric)?))
            })
            .collect()
    };
    let models = load(metrics)?;
    let bases = load(baselines)?;

    if !models.is_empty() || !bases.is_empty() {
        let table = comparison_table(&models, &bases, metric.ends_with("acc"));
        std::fs::write(out.join("comparison.csv"), table.to_csv()?)?;
        let text = table.to_text();
        std::fs::write(out.join("comparison.txt"), &text)?;
        print!("{text}");
    }
    let all: Vec<&(String, RunSummary)> = models.iter().chain(&bases).collect();
    if all.len() >= 2 {
        let mut w = csv::Writer::from_path(out.join("ttests.csv"))?;
        for i in 0..all.len() {
            for j in i + 1..all.len() {
                let r = t_test(&all[i].1.values, &all[j].1.values, variant)?;
                println!(
                    "{} vs {}: t = {:.4}, df = {:.2}, p = {:.4}",
                    all[i].0, all[j].0, r.t, r.df, r.p
                );
                w.serialize(TTestRow {
                    a: &all[i].0,
                    b: &all[j].0,
                    metric,
                    variant,
                    t: r.t,
                    df: r.df,
                    p: r.p,
                })?;
            }
        }
        w.flush()?;
    }
    for path in histories {
        let history = History::load(path).with_context(|| format!("reading {}", path.display()))?;
        let stem = path
            .file_stem()
            .map_or("history".into(), |s| s.to_string_lossy());
        write_running_minimum(&history, &out.join(format!("running_minimum_{stem}.csv")))?;
        if let Some(best) = history.best() {
            println!(
                "{}: best {:.6} at trial {} of {}",
                path.display(),
                best.loss(),
                best.index,
                history.len()
            );
        }
    }
    Ok(())
}
