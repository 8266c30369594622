//! Command-line front end: generate traces, train the shift predictor,
//! evaluate it, inject spoofing attacks, run detection, and aggregate
//! reports. `pipeline` chains the whole flow end to end.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use spoofsense::attacks::{self, AttackKind, AttackRecord, AttackScenario};
use spoofsense::detector::{self, DetectionConfig, Strategy};
use spoofsense::dtw;
use spoofsense::ingest;
use spoofsense::lstm::{self, NetworkDims, TrainingConfig};
use spoofsense::simgen::{self, RouteScript, TemplateCorpusSpec};
use spoofsense::suite;

#[derive(Parser)]
#[command(
    name = "spoofsense",
    version,
    about = "GNSS spoofing detection toolkit: synthetic traces, LSTM shift prediction, DTW/k-NN turn checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sensor trace from a route script.
    Generate {
        /// Route script JSON.
        #[arg(long)]
        script: PathBuf,
        /// Output trace directory.
        #[arg(long)]
        out: PathBuf,
        /// Override the script's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the location-shift predictor on attack-free traces.
    Train {
        /// Trace manifests (trace.json) to train on, in order.
        #[arg(long, num_args = 1.., required = true)]
        traces: Vec<PathBuf>,
        /// Training spec JSON (dims + hyperparameters); defaults match the
        /// reference setup (128/64 units, 500 epochs, batch 50, lr 0.01).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override the spec's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output model file.
        #[arg(long)]
        out: PathBuf,
        /// Per-epoch loss CSV (defaults next to the model).
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Evaluate a trained model on a trace.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        trace: PathBuf,
        /// Metrics JSON output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Inject a spoofing attack into a clean trace.
    Inject {
        /// Clean trace manifest.
        #[arg(long)]
        trace: PathBuf,
        /// Attack scenario JSON.
        #[arg(long)]
        scenario: PathBuf,
        /// Output spoofed-trace directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run both detection strategies over a trace.
    Detect {
        /// Trace manifest (clean or spoofed; attack.json sidecar supplies
        /// the ground-truth onset when present).
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Template corpus manifest (templates.json).
        #[arg(long)]
        templates: PathBuf,
        /// Detector config JSON; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output run directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate detection runs into a scenario table and plot-ready CSVs.
    Report {
        /// Directory of detection run directories.
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Chain generate, train, inject, detect, and report end to end.
    Pipeline(PipelineArgs),
}

#[derive(Args, Clone, Serialize)]
struct PipelineArgs {
    /// Output directory for every artifact of the run.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Attack scenarios generated per kind.
    #[arg(long, default_value_t = 10)]
    scenarios_per_kind: usize,
    /// Clean traces checked for false alarms.
    #[arg(long, default_value_t = 10)]
    clean_traces: usize,
    /// Training epochs for the compact pipeline model.
    #[arg(long, default_value_t = 60)]
    epochs: usize,
}

/// FNV-1a over a config's JSON rendering: a short deterministic
/// fingerprint embedded in every artifact.
fn config_hash<T: Serialize>(value: &T) -> String {
    let text = serde_json::to_string(value).unwrap_or_default();
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

/// Removes this invocation's outputs unless committed, so failures never
/// leave partial artifacts behind.
struct OutputTracker {
    created: Vec<PathBuf>,
    committed: bool,
}

impl OutputTracker {
    fn new() -> Self {
        OutputTracker {
            created: Vec::new(),
            committed: false,
        }
    }

    fn track(&mut self, path: &Path) {
        self.created.push(path.to_path_buf());
    }

    /// Create a directory (and parents), tracking the outermost directory
    /// this call actually created.
    fn create_dir(&mut self, path: &Path) -> Result<()> {
        let mut highest_new: Option<PathBuf> = None;
        let mut probe = path.to_path_buf();
        while !probe.exists() {
            highest_new = Some(probe.clone());
            match probe.parent() {
                Some(p) if !p.as_os_str().is_empty() => probe = p.to_path_buf(),
                _ => break,
            }
        }
        std::fs::create_dir_all(path)?;
        if let Some(p) = highest_new {
            self.track(&p);
        }
        Ok(())
    }

    fn commit(mut self) {
        self.committed = true;
    }
}

impl Drop for OutputTracker {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for path in self.created.iter().rev() {
            if path.is_dir() {
                let _ = std::fs::remove_dir_all(path);
            } else {
                let _ = std::fs::remove_file(path);
            }
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct TrainSpec {
    dims: NetworkDims,
    training: TrainingConfig,
}

/// Sidecar written by `detect` tying a run to its inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct RunRecord {
    trace: String,
    kind: Option<AttackKind>,
    onset_s: Option<f64>,
    config_hash: String,
    seed: Option<u64>,
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("{what}: cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{what}: bad JSON in {}", path.display()))
}

fn cmd_generate(script_path: &Path, out: &Path, seed: Option<u64>) -> Result<()> {
    let mut script = RouteScript::load(script_path)?;
    if let Some(seed) = seed {
        script.seed = seed;
    }
    let hash = config_hash(&script);
    let trace = simgen::generate_trace(&script)?;
    let mut tracker = OutputTracker::new();
    tracker.create_dir(out)?;
    let manifest = simgen::write_trace(out, &trace, script.seed, Some(hash))?;
    println!("wrote {}", manifest.display());
    tracker.commit();
    Ok(())
}

fn cmd_train(
    traces: &[PathBuf],
    config: Option<&Path>,
    seed: Option<u64>,
    out: &Path,
    loss_csv: Option<&Path>,
) -> Result<()> {
    let mut spec: TrainSpec = match config {
        Some(path) => load_json(path, "training spec")?,
        None => TrainSpec::default(),
    };
    if let Some(seed) = seed {
        spec.training.seed = seed;
    }
    let hash = config_hash(&spec);

    let mut windows = Vec::new();
    for manifest in traces {
        let trace = simgen::load_trace(manifest)?;
        let frames = trace.aligned()?;
        windows.extend(lstm::build_windows(&frames, spec.training.window_len)?);
    }
    println!(
        "training on {} windows ({} traces), {}x{} units, {} epochs",
        windows.len(),
        traces.len(),
        spec.dims.hidden1,
        spec.dims.hidden2,
        spec.training.epochs
    );
    let (mut net, history) = lstm::train(&windows, spec.dims, &spec.training)?;
    net.metadata.config_hash = Some(hash.clone());

    let mut tracker = OutputTracker::new();
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        tracker.create_dir(parent)?;
    }
    lstm::save_model(&net, out)?;
    tracker.track(out);

    let loss_path = loss_csv
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out.with_extension("loss.csv"));
    let mut text = format!("# seed={} config={hash}\n", spec.training.seed);
    text.push_str("epoch,train_mae,val_mae\n");
    for e in &history {
        writeln!(text, "{},{},{}", e.epoch, e.train_mae_m, e.val_mae_m)?;
    }
    std::fs::write(&loss_path, text)?;
    tracker.track(&loss_path);

    println!(
        "validation: rmse {:.6} m, max abs error {:.6} m, mae {:.6} m",
        net.metadata.validation_rmse_m,
        net.metadata.validation_max_abs_error_m,
        net.metadata.validation_mae_m
    );
    println!("wrote {} and {}", out.display(), loss_path.display());
    tracker.commit();
    Ok(())
}

fn cmd_eval(model_path: &Path, trace_path: &Path, out: &Path) -> Result<()> {
    let net = lstm::load_model(model_path)?;
    let trace = simgen::load_trace(trace_path)?;
    let frames = trace.aligned()?;
    let windows = lstm::build_windows(&frames, net.metadata.window_len)?;
    let metrics = lstm::evaluate(&net, &windows)?;
    let mut tracker = OutputTracker::new();
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        tracker.create_dir(parent)?;
    }
    let text = serde_json::to_string_pretty(&metrics)?;
    std::fs::write(out, text + "\n")?;
    tracker.track(out);
    println!(
        "rmse {:.6} m, max abs error {:.6} m, mae {:.6} m over {} windows",
        metrics.rmse_m,
        metrics.max_abs_error_m,
        metrics.mae_m,
        windows.len()
    );
    tracker.commit();
    Ok(())
}

fn cmd_inject(trace_path: &Path, scenario_path: &Path, out: &Path, seed: u64) -> Result<()> {
    let trace = simgen::load_trace(trace_path)?;
    let scenario = AttackScenario::load(scenario_path)?;
    let hash = config_hash(&scenario);
    let spoofed = attacks::inject(&trace, &scenario)?;
    let mut tracker = OutputTracker::new();
    tracker.create_dir(out)?;
    let manifest = attacks::write_spoofed_trace(out, &spoofed, seed, Some(hash))?;
    println!(
        "injected {} at onset {:.3} s; wrote {}",
        scenario.kind_name(),
        spoofed.onset_s,
        manifest.display()
    );
    tracker.commit();
    Ok(())
}

/// Shared by `detect` and `pipeline`: run detection for one trace
/// directory and write verdicts.csv, summary.json, run.json.
fn run_one_detection(
    trace_manifest: &Path,
    model: &lstm::LstmNetwork,
    templates: &[dtw::LabeledTemplate],
    config: &DetectionConfig,
    out: &Path,
) -> Result<detector::DetectionSummary> {
    let trace = simgen::load_trace(trace_manifest)?;
    let attack_path = trace_manifest
        .parent()
        .unwrap_or(Path::new("."))
        .join("attack.json");
    let attack = if attack_path.exists() {
        Some(AttackRecord::load(&attack_path)?)
    } else {
        None
    };
    let onset = attack.as_ref().map(|a| a.onset_s);
    let mut run = detector::run_detection(&trace, onset, model, templates, config)?;

    let trace_meta = ingest::TraceManifest::load(trace_manifest)?;
    let hash = config_hash(config);
    let meta = format!(
        "seed={} config={hash}",
        trace_meta.seed.unwrap_or_default()
    );
    run.summary.seed = trace_meta.seed;
    run.summary.config_hash = Some(hash.clone());
    let mut tracker = OutputTracker::new();
    tracker.create_dir(out)?;
    detector::write_verdicts_csv(&out.join("verdicts.csv"), &run.verdicts, Some(&meta))?;
    run.summary.save(&out.join("summary.json"))?;
    let record = RunRecord {
        trace: trace_manifest.display().to_string(),
        kind: attack.as_ref().map(|a| a.scenario.kind()),
        onset_s: onset,
        config_hash: hash,
        seed: trace_meta.seed,
    };
    std::fs::write(
        out.join("run.json"),
        serde_json::to_string_pretty(&record)? + "\n",
    )?;
    tracker.commit();
    Ok(run.summary)
}

fn cmd_detect(
    trace: &Path,
    model_path: &Path,
    templates_path: &Path,
    config: Option<&Path>,
    out: &Path,
) -> Result<()> {
    let model = lstm::load_model(model_path)?;
    let templates = dtw::load_template_corpus(templates_path)?;
    let config: DetectionConfig = match config {
        Some(path) => load_json(path, "detector config")?,
        None => DetectionConfig::default(),
    };
    let summary = run_one_detection(trace, &model, &templates, &config, out)?;
    match summary.first_alarm_t {
        Some(t) => println!(
            "first alarm at {:.3} s ({}), {} alarms, {} false",
            t,
            summary
                .first_alarm_strategy
                .map(|s| s.to_string())
                .unwrap_or_default(),
            summary.alarm_count,
            summary.false_alarm_count
        ),
        None => println!("no alarms"),
    }
    println!("wrote {}", out.join("summary.json").display());
    Ok(())
}

fn strategies_cell(strategies: &[Strategy]) -> String {
    if strategies.is_empty() {
        return "none".into();
    }
    strategies
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join("+")
}

fn cmd_report(runs: &Path, out: &Path) -> Result<()> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(runs)
        .with_context(|| format!("cannot read runs directory {}", runs.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("summary.json").exists())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("no detection runs (summary.json) under {}", runs.display());
    }

    let mut tracker = OutputTracker::new();
    tracker.create_dir(out)?;
    let mut table = String::from(
        "scenario,kind,onset_s,first_alarm_s,detection_latency_s,detected,strategies,\
         false_alarms,s1_mean_latency_s,s2_mean_latency_s\n",
    );
    // per-kind rollup: scenarios, detected, s1 fired, s2 fired, false alarms
    let mut per_kind: std::collections::BTreeMap<String, [usize; 5]> = Default::default();
    let mut run_hashes = Vec::new();
    for dir in &dirs {
        let summary = detector::DetectionSummary::load(&dir.join("summary.json"))?;
        let record: RunRecord = load_json(&dir.join("run.json"), "run record")?;
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let kind = record
            .kind
            .map(|k| k.name().to_string())
            .unwrap_or_else(|| "clean".into());
        run_hashes.push((name.clone(), record.config_hash.clone()));
        let entry = per_kind.entry(kind.clone()).or_default();
        entry[0] += 1;
        entry[1] += usize::from(summary.first_alarm_t.is_some());
        entry[2] += usize::from(
            summary.strategies_fired.contains(&Strategy::S1Shift)
                || summary.strategies_fired.contains(&Strategy::S1Motion),
        );
        entry[3] += usize::from(summary.strategies_fired.contains(&Strategy::S2Turn));
        entry[4] += summary.false_alarm_count;
        writeln!(
            table,
            "{name},{kind},{},{},{},{},{},{},{:.9},{:.9}",
            summary.onset_s.map(|v| v.to_string()).unwrap_or_default(),
            summary
                .first_alarm_t
                .map(|v| v.to_string())
                .unwrap_or_default(),
            summary
                .detection_latency_s
                .map(|v| v.to_string())
                .unwrap_or_default(),
            summary.first_alarm_t.is_some(),
            strategies_cell(&summary.strategies_fired),
            summary.false_alarm_count,
            summary.s1.mean_s,
            summary.s2.mean_s,
        )?;

        // plot-ready |perceived - predicted| series per run
        let verdicts = std::fs::read_to_string(dir.join("verdicts.csv"))?;
        let mut diff = String::from("t,diff_m\n");
        for line in verdicts.lines().skip_while(|l| l.starts_with('#')).skip(1) {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() == 7 && cells[2] == "s1_shift" {
                writeln!(diff, "{},{}", cells[0], cells[5])?;
            }
        }
        let diff_path = out.join(format!("shift_diff_{name}.csv"));
        std::fs::write(&diff_path, diff)?;
        tracker.track(&diff_path);
    }
    let batch_hash = config_hash(&run_hashes);
    let table_path = out.join("report.csv");
    std::fs::write(&table_path, format!("# config={batch_hash}\n{table}"))?;
    tracker.track(&table_path);

    let mut kinds = format!("# config={batch_hash}\nkind,scenarios,detected,s1_fired,s2_fired,false_alarms\n");
    for (kind, counts) in &per_kind {
        writeln!(
            kinds,
            "{kind},{},{},{},{},{}",
            counts[0], counts[1], counts[2], counts[3], counts[4]
        )?;
    }
    let kinds_path = out.join("kind_summary.csv");
    std::fs::write(&kinds_path, &kinds)?;
    tracker.track(&kinds_path);

    print!("{table}");
    print!("{kinds}");
    println!("wrote {} and {}", table_path.display(), kinds_path.display());
    tracker.commit();
    Ok(())
}

fn cmd_pipeline(args: &PipelineArgs) -> Result<()> {
    let hash = config_hash(args);
    let out = &args.out;
    let seed = args.seed;
    let mut tracker = OutputTracker::new();
    tracker.create_dir(out)?;
    std::fs::write(
        out.join("pipeline.json"),
        serde_json::to_string_pretty(&serde_json::json!({
            "seed": seed,
            "scenarios_per_kind": args.scenarios_per_kind,
            "clean_traces": args.clean_traces,
            "epochs": args.epochs,
            "config_hash": hash,
        }))? + "\n",
    )?;

    // 1. attack-free corpus and model
    let routes = suite::training_routes(seed);
    for (i, route) in routes.iter().enumerate() {
        let trace = simgen::generate_trace(route)?;
        simgen::write_trace(
            &out.join("traces").join(format!("train_{i}")),
            &trace,
            route.seed,
            Some(hash.clone()),
        )?;
    }
    let (dims, mut training) = suite::compact_profile(seed);
    training.epochs = args.epochs;
    let windows = suite::build_training_windows(&routes, training.window_len)?;
    println!(
        "pipeline: training {}x{} model on {} windows for {} epochs",
        dims.hidden1,
        dims.hidden2,
        windows.len(),
        training.epochs
    );
    let (mut model, history) = lstm::train(&windows, dims, &training)?;
    model.metadata.config_hash = Some(hash.clone());
    lstm::save_model(&model, &out.join("model.bin"))?;
    let mut loss = format!("# seed={seed} config={hash}\nepoch,train_mae,val_mae\n");
    for e in &history {
        writeln!(loss, "{},{},{}", e.epoch, e.train_mae_m, e.val_mae_m)?;
    }
    std::fs::write(out.join("loss.csv"), loss)?;
    println!(
        "pipeline: validation mae {:.6} m, max abs error {:.6} m",
        model.metadata.validation_mae_m, model.metadata.validation_max_abs_error_m
    );

    // 2. turn-template corpus
    let corpus_spec = TemplateCorpusSpec {
        noise_deg: 2.0,
        seed: seed.wrapping_add(500),
        ..Default::default()
    };
    let templates = simgen::generate_turn_templates(&corpus_spec)?;
    dtw::write_template_corpus(&out.join("templates"), &templates, Some(seed), Some(hash.clone()))?;

    // 3. attack scenarios and clean traces
    let config = DetectionConfig::default();
    let mut run_specs: Vec<(String, PathBuf)> = Vec::new();
    for kind in AttackKind::ALL {
        for i in 0..args.scenarios_per_kind {
            let route = suite::detection_route(seed, i);
            let trace = simgen::generate_trace(&route)?;
            let scenario = suite::scenario_for(kind, &route, &trace, i)?;
            let spoofed = attacks::inject(&trace, &scenario)?;
            let dir = out.join("scenarios").join(format!("{}_{i:02}", kind.name()));
            let manifest = attacks::write_spoofed_trace(&dir, &spoofed, route.seed, Some(hash.clone()))?;
            run_specs.push((format!("{}_{i:02}", kind.name()), manifest));
        }
    }
    for i in 0..args.clean_traces {
        let route = suite::detection_route(seed, 20 + i);
        let trace = simgen::generate_trace(&route)?;
        let dir = out.join("clean").join(format!("clean_{i:02}"));
        let manifest = simgen::write_trace(&dir, &trace, route.seed, Some(hash.clone()))?;
        run_specs.push((format!("clean_{i:02}"), manifest));
    }

    // 4. detection over every trace
    for (name, manifest) in &run_specs {
        let summary = run_one_detection(
            manifest,
            &model,
            &templates,
            &config,
            &out.join("runs").join(name),
        )?;
        println!(
            "pipeline: {name}: {}",
            match summary.first_alarm_t {
                Some(t) => format!(
                    "first alarm {:.3} s ({})",
                    t,
                    strategies_cell(&summary.strategies_fired)
                ),
                None => "no alarms".into(),
            }
        );
    }

    // 5. report
    cmd_report(&out.join("runs"), out)?;
    tracker.commit();
    Ok(())
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Generate { script, out, seed } => cmd_generate(script, out, *seed),
        Command::Train {
            traces,
            config,
            seed,
            out,
            loss_csv,
        } => cmd_train(traces, config.as_deref(), *seed, out, loss_csv.as_deref()),
        Command::Eval { model, trace, out } => cmd_eval(model, trace, out),
        Command::Inject {
            trace,
            scenario,
            out,
            seed,
        } => cmd_inject(trace, scenario, out, *seed),
        Command::Detect {
            trace,
            model,
            templates,
            config,
            out,
        } => cmd_detect(trace, model, templates, config.as_deref(), out),
        Command::Report { runs, out } => cmd_report(runs, out),
        Command::Pipeline(args) => cmd_pipeline(args),
    }
}

fn main() {
    if let Err(err) = run() {
        let chain = err
            .chain()
            .map(|c| c.to_string())
            .collect::<Vec<_>>()
            .join(": ");
        eprintln!("error: {chain}");
        std::process::exit(1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = config_hash(&serde_json::json!({"seed": 1}));
        let b = config_hash(&serde_json::json!({"seed": 1}));
        let c = config_hash(&serde_json::json!({"seed": 2}));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 16);
    }

    #[test]
    fn tracker_removes_on_drop_keeps_on_commit() {
        let dir = tempfile::tempdir().unwrap();
        let kept = dir.path().join("kept");
        let dropped = dir.path().join("dropped");
        {
            let mut t = OutputTracker::new();
            t.create_dir(&kept).unwrap();
            t.commit();
        }
        {
            let mut t = OutputTracker::new();
            t.create_dir(&dropped).unwrap();
        }
        assert!(kept.exists());
        assert!(!dropped.exists());
    }
}
