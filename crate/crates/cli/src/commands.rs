//! Stage implementations behind each subcommand.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use physreg_core::config::ExperimentConfig;
use physreg_core::data::{self, Dataset, PhysicsLabel, Split, WindowRecord};
use physreg_core::encoder::{
    history_csv, resume, train, Checkpoint, EpochRecord, TrainingData, Variant,
};
use physreg_core::eval::{full_report, neighborhood_csv, projections_csv, write_metrics_json, MetricsReport};
use physreg_core::experiment::{median, run_row, window_labels, AblationRow};
use physreg_core::labeling::{label_dataset, summarize, ClassCounts};
use physreg_core::relations::{build_relations, pool_from_windows, shuffled_batches, stratified_batches};
use physreg_core::rng::substream;
use physreg_core::synth::{generate, write_planted, PLANTED_FILE};
use serde::{Deserialize, Serialize};

use crate::config::load_config;
use crate::error::{CliError, CliResult};
use crate::manifest::ManifestBuilder;
use crate::{Cli, Command, GraphArgs};

pub const LABELED_WINDOWS_FILE: &str = "windows.labeled.jsonl";
pub const LABELED_MANIFEST_FILE: &str = "manifest.labeled.json";
pub const LABEL_SUMMARY_FILE: &str = "label_summary.json";
pub const BEST_CHECKPOINT_FILE: &str = "checkpoint_best.json";
pub const FINAL_CHECKPOINT_FILE: &str = "checkpoint_final.json";
pub const HISTORY_FILE: &str = "loss_history.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const PROJECTIONS_FILE: &str = "projections.csv";
pub const NEIGHBORHOOD_FILE: &str = "neighborhood.csv";
pub const ABLATION_JSON_FILE: &str = "ablation.json";
pub const ABLATION_CSV_FILE: &str = "ablation.csv";

pub fn dispatch(cli: &Cli) -> CliResult<()> {
    let cfg = load_config(cli.config.as_deref(), &cli.overrides)?;
    match &cli.command {
        Command::Synth { out } => synth_cmd(&cfg, out),
        Command::Label { manifest, out } => label_cmd(&cfg, manifest, out.as_deref()),
        Command::Graph(args) => graph_cmd(&cfg, args),
        Command::Train { manifest, out, resume } => train_cmd(&cfg, manifest, out, resume.as_deref()),
        Command::Eval { manifest, checkpoint, out, assert_ok } => eval_cmd(&cfg, manifest, checkpoint, out, *assert_ok),
        Command::Report { input } => report_cmd(input),
        Command::Ablate { manifest, out, seeds, jobs } => ablate_cmd(&cfg, manifest.as_deref(), out, seeds, *jobs),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value).map(|s| s + "\n").map_err(|e| CliError::Runtime(e.to_string()))
}

/// The manifest and every file it references.
fn dataset_files(manifest_path: &Path) -> CliResult<Vec<PathBuf>> {
    let m = data::read_manifest(manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    Ok(vec![
        manifest_path.to_path_buf(),
        base.join(&m.trajectories),
        base.join(&m.windows),
        base.join(&m.contacts),
    ])
}

fn dataset_outputs(dir: &Path, windows_file: &str, manifest_file: &str) -> Vec<PathBuf> {
    vec![
        dir.join(manifest_file),
        dir.join(data::TRAJECTORIES_FILE),
        dir.join(windows_file),
        dir.join(data::CONTACTS_FILE),
    ]
}

/// Labels carried by the windows, or computed with the configured labeling
/// when the dataset is unlabeled.
fn labels_or_compute(ds: &Dataset, cfg: &ExperimentConfig) -> CliResult<Vec<PhysicsLabel>> {
    if ds.windows.iter().all(|w| w.phys_label.is_some()) {
        Ok(ds.labels()?)
    } else {
        Ok(window_labels(ds, &cfg.labeling)?)
    }
}

fn synth_cmd(cfg: &ExperimentConfig, out: &Path) -> CliResult<()> {
    let run = ManifestBuilder::start("synth", cfg.synth.seed, cfg);
    let synth = generate(&cfg.synth)?;
    create_dir(out)?;
    data::write_dataset(&synth.dataset, out)?;
    write_planted(&out.join(PLANTED_FILE), &synth.planted)?;
    let mut outputs = dataset_outputs(out, data::WINDOWS_FILE, data::MANIFEST_FILE);
    outputs.push(out.join(PLANTED_FILE));
    run.finish(out, &[], &outputs)?;
    println!(
        "wrote {} trajectories, {} windows, {} descriptors to {}",
        synth.dataset.trajectories.len(),
        synth.dataset.windows.len(),
        synth.dataset.contacts.len(),
        out.display()
    );
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct LabelSummary {
    train: ClassCounts,
    val: ClassCounts,
    test: ClassCounts,
}

fn label_cmd(cfg: &ExperimentConfig, manifest: &Path, out: Option<&Path>) -> CliResult<()> {
    let run = ManifestBuilder::start("label", cfg.synth.seed, cfg);
    let inputs = dataset_files(manifest)?;
    let mut ds = data::load_dataset(manifest)?;
    ds.windows = label_dataset(&ds.windows, &ds.contacts, &cfg.labeling)?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => manifest.parent().unwrap_or(Path::new(".")).to_path_buf(),
    };
    create_dir(&dir)?;
    data::write_dataset_as(&ds, &dir, LABELED_WINDOWS_FILE, LABELED_MANIFEST_FILE)?;
    let mut counts = summarize(&ds)?;
    let mut take = |s: Split| counts.remove(&s).unwrap_or_default();
    let summary = LabelSummary { train: take(Split::Train), val: take(Split::Val), test: take(Split::Test) };
    write_file(&dir.join(LABEL_SUMMARY_FILE), &to_json(&summary)?)?;

    let mut outputs = dataset_outputs(&dir, LABELED_WINDOWS_FILE, LABELED_MANIFEST_FILE);
    outputs.push(dir.join(LABEL_SUMMARY_FILE));
    run.finish(&dir, &inputs, &outputs)?;
    println!("{:<6} {:>9} {:>7} {:>6}", "split", "Supported", "Trunk", "Head");
    for (name, c) in [("train", &summary.train), ("val", &summary.val), ("test", &summary.test)] {
        println!("{name:<6} {:>9} {:>7} {:>6}", c.supported, c.trunk, c.head);
    }
    Ok(())
}

/// One line of `graph` output; indices are replaced by window ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationRecord {
    pub anchor: String,
    pub label: PhysicsLabel,
    pub traj_positives: Vec<String>,
    pub candidates: Vec<String>,
    pub mask: Vec<String>,
    pub phys_positives: Vec<String>,
    pub cross_traj_candidates: Vec<String>,
}

fn graph_batch<'a>(cfg: &ExperimentConfig, ds: &'a Dataset, args: &GraphArgs) -> CliResult<Vec<&'a WindowRecord>> {
    if !args.windows.is_empty() {
        let by_id: HashMap<&str, &WindowRecord> = ds.windows.iter().map(|w| (w.window_id.as_str(), w)).collect();
        return args
            .windows
            .iter()
            .map(|id| by_id.get(id.as_str()).copied().ok_or_else(|| CliError::Validation(format!("unknown window id `{id}`"))))
            .collect();
    }
    let Some(b) = args.batch else {
        return Err(CliError::Validation("graph needs --windows or --batch".into()));
    };
    // Same sampling as the trainer's epoch loop.
    let epoch = args.epoch.unwrap_or(0);
    let train_idx = ds.window_indices(Split::Train);
    let labels: Vec<PhysicsLabel> = train_idx.iter().map(|&i| ds.windows[i].phys_label.unwrap_or(PhysicsLabel::Supported)).collect();
    let mut rng = substream(cfg.train.seed, "batches", epoch as u64);
    let batches = match cfg.train.variant {
        Variant::Regularized => stratified_batches(&labels, cfg.train.batch_size, cfg.train.quota, &mut rng)?,
        Variant::Vanilla => shuffled_batches(labels.len(), cfg.train.batch_size, &mut rng)?,
    };
    let batch = batches
        .get(b)
        .ok_or_else(|| CliError::Validation(format!("batch {b} out of range (epoch has {})", batches.len())))?;
    Ok(batch.iter().map(|&r| &ds.windows[train_idx[r]]).collect())
}

pub fn graph_records(cfg: &ExperimentConfig, batch: &[&WindowRecord]) -> CliResult<Vec<RelationRecord>> {
    let pool = pool_from_windows(batch)?;
    let opts = physreg_core::relations::RelationOptions {
        masking: cfg.train.variant == Variant::Regularized,
        grouping: cfg.train.grouping,
    };
    let ids = |v: &[usize]| v.iter().map(|&i| batch[i].window_id.clone()).collect::<Vec<_>>();
    Ok(build_relations(&pool, pool.len(), opts)
        .into_iter()
        .map(|r| RelationRecord {
            anchor: batch[r.anchor].window_id.clone(),
            label: pool[r.anchor].label,
            traj_positives: ids(&r.traj_positives),
            candidates: ids(&r.candidates),
            mask: ids(&r.mask),
            phys_positives: ids(&r.phys_positives),
            cross_traj_candidates: ids(&r.cross_traj_candidates),
        })
        .collect())
}

fn graph_cmd(cfg: &ExperimentConfig, args: &GraphArgs) -> CliResult<()> {
    let ds = data::load_dataset(&args.manifest)?;
    let batch = graph_batch(cfg, &ds, args)?;
    let records = graph_records(cfg, &batch)?;
    let mut text = String::new();
    for r in &records {
        text.push_str(&serde_json::to_string(r).map_err(|e| CliError::Runtime(e.to_string()))?);
        text.push('\n');
    }
    match &args.out {
        Some(path) => {
            write_file(path, &text)?;
            let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
            let run = ManifestBuilder::start("graph", cfg.train.seed, cfg);
            run.finish(dir, &dataset_files(&args.manifest)?, std::slice::from_ref(path))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

/// Parses a loss history written by [`history_csv`].
pub fn parse_history(path: &Path, text: &str) -> CliResult<Vec<EpochRecord>> {
    let malformed = |line: usize, message: String| {
        CliError::Core(physreg_core::Error::Malformed { file: path.to_path_buf(), line, message })
    };
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 7 {
            return Err(malformed(n + 1, format!("expected 7 fields, got {}", f.len())));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|e| malformed(n + 1, format!("field {}: {e}", i + 1)));
        out.push(EpochRecord {
            epoch: f[0].parse().map_err(|e| malformed(n + 1, format!("epoch: {e}")))?,
            train_motion: num(1)?,
            train_physics: num(2)?,
            train_var: num(3)?,
            train_total: num(4)?,
            val_total: num(5)?,
            effective_lambda_phys: num(6)?,
        });
    }
    Ok(out)
}

fn train_cmd(cfg: &ExperimentConfig, manifest: &Path, out: &Path, resume_from: Option<&Path>) -> CliResult<()> {
    let run = ManifestBuilder::start("train", cfg.train.seed, cfg);
    let mut inputs = dataset_files(manifest)?;
    let ds = data::load_dataset(manifest)?;
    let labels = ds.labels()?;
    let data = TrainingData::from_dataset(&ds, &labels)?;
    create_dir(out)?;
    let best_path = out.join(BEST_CHECKPOINT_FILE);
    let final_path = out.join(FINAL_CHECKPOINT_FILE);
    let history_path = out.join(HISTORY_FILE);

    let (best, final_ck, history) = match resume_from {
        None => {
            let o = train(&data, &cfg.train)?;
            (o.best, o.final_checkpoint, o.history)
        }
        Some(ck_path) => {
            inputs.push(ck_path.to_path_buf());
            let ck = Checkpoint::load(ck_path)?;
            // Earlier epochs and the earlier best checkpoint come from the
            // output directory of the interrupted run.
            let mut history = match fs::read_to_string(&history_path) {
                Ok(text) => parse_history(&history_path, &text)?,
                Err(_) => Vec::new(),
            };
            history.retain(|r| r.epoch <= ck.epoch);
            let previous_best = Checkpoint::load(&best_path).ok();
            let o = resume(&data, &cfg.train, &ck)?;
            history.extend(o.history);
            let improved = o.best.val_loss < ck.best_val_loss;
            let best = match previous_best {
                Some(p) if !improved => p,
                _ => o.best,
            };
            (best, o.final_checkpoint, history)
        }
    };
    best.save(&best_path)?;
    final_ck.save(&final_path)?;
    write_file(&history_path, &history_csv(&history))?;
    run.finish(out, &inputs, &[best_path, final_path, history_path])?;
    if let Some(last) = history.last() {
        println!(
            "epoch {} train_total {:.6} val_total {:.6}; best epoch {} (val {:.6})",
            last.epoch, last.train_total, last.val_total, best.epoch, best.val_loss
        );
    }
    Ok(())
}

/// Failed `--assert` checks, empty when everything holds.
pub fn assert_failures(m: &MetricsReport) -> Vec<String> {
    let mut failures = Vec::new();
    if let Err(e) = m.check_ranges() {
        failures.push(e.to_string());
    }
    let p = &m.category_mean_projection;
    if !(p.head > p.trunk && p.trunk > p.supported) {
        failures.push(format!(
            "category means not ordered Head > Trunk > Supported ({:.4}, {:.4}, {:.4})",
            p.head, p.trunk, p.supported
        ));
    }
    failures
}

fn eval_cmd(cfg: &ExperimentConfig, manifest: &Path, checkpoint: &Path, out: &Path, assert_ok: bool) -> CliResult<()> {
    let run = ManifestBuilder::start("eval", cfg.eval.seed, cfg);
    let mut inputs = dataset_files(manifest)?;
    inputs.push(checkpoint.to_path_buf());
    let ds = data::load_dataset(manifest)?;
    let labels = labels_or_compute(&ds, cfg)?;
    let ck = Checkpoint::load(checkpoint)?;
    let report = full_report(&ck.params, &ds, &labels, &cfg.eval)?;
    create_dir(out)?;
    let metrics_path = out.join(METRICS_FILE);
    let projections_path = out.join(PROJECTIONS_FILE);
    let neighborhood_path = out.join(NEIGHBORHOOD_FILE);
    write_metrics_json(&metrics_path, &report.metrics)?;
    write_file(&projections_path, &projections_csv(&report.projections))?;
    write_file(&neighborhood_path, &neighborhood_csv(&report.metrics.neighborhood_diagonal, &report.skipped_queries))?;
    run.finish(out, &inputs, &[metrics_path, projections_path, neighborhood_path])?;
    print!("{}", report.metrics.render_table());
    if assert_ok {
        let failures = assert_failures(&report.metrics);
        if !failures.is_empty() {
            return Err(CliError::Assertion(failures.join("; ")));
        }
    }
    Ok(())
}

/// Per-row summary in `ablation.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSummary {
    pub row: AblationRow,
    /// Denoising, multi-class, window source, continuation source; absent
    /// for the vanilla control.
    pub components: Option<Components>,
    pub seeds: Vec<u64>,
    /// Best-checkpoint metrics, one per seed.
    pub runs: Vec<MetricsReport>,
    /// Final-checkpoint metrics, one per seed.
    pub final_runs: Vec<MetricsReport>,
    /// Medians of `runs`.
    pub median: MedianMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Components {
    pub denoising: bool,
    pub multi_class: bool,
    pub window: bool,
    pub continuation: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianMetrics {
    pub spearman_rho: f64,
    pub poa_macro: f64,
    pub contact_ap: f64,
    pub contact_auc: f64,
    pub fall_auc: f64,
    pub pcr: f64,
    pub kendall_tau: f64,
}

impl MedianMetrics {
    fn of(runs: &[MetricsReport]) -> Self {
        let m = |f: fn(&MetricsReport) -> f64| median(&runs.iter().map(f).collect::<Vec<_>>());
        MedianMetrics {
            spearman_rho: m(|r| r.spearman_rho),
            poa_macro: m(|r| r.poa_macro),
            contact_ap: m(|r| r.contact_ap),
            contact_auc: m(|r| r.contact_auc),
            fall_auc: m(|r| r.fall_auc),
            pcr: m(|r| r.pcr),
            kendall_tau: m(|r| r.kendall_tau),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub rows: Vec<AblationSummary>,
}

impl AblationReport {
    pub fn csv(&self) -> String {
        let mut out = String::from(
            "row,denoising,multi_class,window,continuation,spearman_rho,poa_macro,contact_ap,contact_auc,fall_auc,pcr,kendall_tau\n",
        );
        for r in &self.rows {
            let flag = |f: fn(&Components) -> bool| r.components.as_ref().map_or("-".to_string(), |c| f(c).to_string());
            let m = &r.median;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.row.as_str(),
                flag(|c| c.denoising),
                flag(|c| c.multi_class),
                flag(|c| c.window),
                flag(|c| c.continuation),
                m.spearman_rho,
                m.poa_macro,
                m.contact_ap,
                m.contact_auc,
                m.fall_auc,
                m.pcr,
                m.kendall_tau
            );
        }
        out
    }

    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<18} {:>4} {:>4} {:>4} {:>4} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "row", "den", "mc", "win", "cont", "rho", "POA", "AP", "AUC", "fallAUC", "PCR", "tau"
        );
        for r in &self.rows {
            let mark = |f: fn(&Components) -> bool| match &r.components {
                Some(c) if f(c) => "y",
                Some(_) => "n",
                None => "-",
            };
            let m = &r.median;
            let _ = writeln!(
                out,
                "{:<18} {:>4} {:>4} {:>4} {:>4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                r.row.as_str(),
                mark(|c| c.denoising),
                mark(|c| c.multi_class),
                mark(|c| c.window),
                mark(|c| c.continuation),
                m.spearman_rho,
                m.poa_macro,
                m.contact_ap,
                m.contact_auc,
                m.fall_auc,
                m.pcr,
                m.kendall_tau
            );
        }
        out
    }
}

/// Trains every grid row for every seed. Runs are independent, so `jobs`
/// workers may share them; results do not depend on `jobs`.
pub fn run_ablation(ds: &Dataset, cfg: &ExperimentConfig, seeds: &[u64], jobs: usize) -> CliResult<AblationReport> {
    if seeds.is_empty() {
        return Err(CliError::Validation("ablate needs at least one seed".into()));
    }
    let tasks: Vec<(AblationRow, u64)> =
        AblationRow::ALL.iter().flat_map(|&row| seeds.iter().map(move |&s| (row, s))).collect();
    let jobs = jobs.clamp(1, tasks.len());
    let mut results: Vec<Option<physreg_core::Result<(MetricsReport, MetricsReport)>>> = (0..tasks.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunks: Vec<Vec<usize>> = (0..jobs).map(|j| (j..tasks.len()).step_by(jobs).collect()).collect();
        let handles: Vec<_> = chunks
            .into_iter()
            .map(|idx| {
                let tasks = &tasks;
                scope.spawn(move || {
                    idx.into_iter()
                        .map(|i| (i, run_row(ds, cfg, tasks[i].0, tasks[i].1).map(|r| (r.best, r.final_metrics))))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, r) in h.join().expect("ablation worker panicked") {
                results[i] = Some(r);
            }
        }
    });
    let mut metrics = Vec::with_capacity(tasks.len());
    for r in results {
        metrics.push(r.expect("every task ran")?);
    }
    let rows = AblationRow::ALL
        .iter()
        .enumerate()
        .map(|(ri, &row)| {
            let slice = &metrics[ri * seeds.len()..(ri + 1) * seeds.len()];
            let runs: Vec<MetricsReport> = slice.iter().map(|m| m.0.clone()).collect();
            AblationSummary {
                row,
                components: row.components().map(|c| Components {
                    denoising: c[0],
                    multi_class: c[1],
                    window: c[2],
                    continuation: c[3],
                }),
                seeds: seeds.to_vec(),
                median: MedianMetrics::of(&runs),
                final_runs: slice.iter().map(|m| m.1.clone()).collect(),
                runs,
            }
        })
        .collect();
    Ok(AblationReport { rows })
}

fn ablate_cmd(cfg: &ExperimentConfig, manifest: Option<&Path>, out: &Path, seeds: &[u64], jobs: usize) -> CliResult<()> {
    let run = ManifestBuilder::start("ablate", cfg.synth.seed, cfg);
    let (ds, inputs) = match manifest {
        Some(m) => (data::load_dataset(m)?, dataset_files(m)?),
        None => (generate(&cfg.synth)?.dataset, Vec::new()),
    };
    let report = run_ablation(&ds, cfg, seeds, jobs)?;
    create_dir(out)?;
    let json_path = out.join(ABLATION_JSON_FILE);
    let csv_path = out.join(ABLATION_CSV_FILE);
    write_file(&json_path, &to_json(&report)?)?;
    write_file(&csv_path, &report.csv())?;
    run.finish(out, &inputs, &[json_path, csv_path])?;
    print!("{}", report.render_table());
    Ok(())
}

fn report_cmd(input: &Path) -> CliResult<()> {
    let text = fs::read_to_string(input).map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", input.display())))?;
    let malformed = |e: serde_json::Error| {
        CliError::Core(physreg_core::Error::Malformed { file: input.to_path_buf(), line: e.line(), message: e.to_string() })
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(malformed)?;
    if value.get("rows").is_some() {
        let report: AblationReport = serde_json::from_value(value).map_err(malformed)?;
        print!("{}", report.render_table());
    } else {
        let m: MetricsReport = serde_json::from_value(value).map_err(malformed)?;
        print!("{}", m.render_table());
    }
    Ok(())
}
