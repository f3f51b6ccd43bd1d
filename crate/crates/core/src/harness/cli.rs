use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use super::config::{DatasetKind, EvalMode, RunConfig};
use super::dataset::{generate_synthetic, load_dataset, write_csv};
use super::report::{write_json, LoadedModel, ModelArtifact, ReportFile};
use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::evaluator::{
    axis_levels, evaluate_exact, monte_carlo_accuracy, sweep, AblationAxis, AblationGrid, EvaluationReport, McEstimate,
    SweepSpec,
};
use crate::netsim::{
    bandwidth_table, run_sim_traced, topology_bandwidth, write_trace, BandwidthRow, SimConfig, SimReport,
};
use crate::nn::{Real, SeededRng, Stream};
use crate::resilinet::{
    assign_hyperconnection_weights, inference_scaling_mode, predict, train, AliveMask, MaskOrigin, Scheme, TrainHistory,
};
use crate::topology::{build_model, node_label, DistributedModel, FailureSetting, PartitionPlan};

#[derive(Debug, Parser)]
#[command(
    name = "failout",
    version,
    about = "Train, evaluate and simulate failure-resilient distributed networks"
)]
pub struct Cli {
    /// Run configuration (TOML, or a JSON report whose config is reused).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Threads for scenario evaluation and sweep cells. 1 is bit-reproducible.
    #[arg(long, global = true, default_value_t = 1)]
    pub workers: usize,
    #[arg(long, global = true, value_enum, default_value = "32")]
    pub precision: Precision,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    #[value(name = "32")]
    F32,
    #[value(name = "64")]
    F64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Mc,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model and write `model.json`.
    Train,
    /// Expected accuracy of a trained model under a failure setting.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        setting: Option<String>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        draws: Option<usize>,
    },
    /// Ablation over failout rate, hyperconnection weights or skip subsets.
    Sweep {
        /// failout-rate, weights or skip-config
        #[arg(long)]
        axis: Option<String>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Crash/repair simulation with heartbeat detection.
    Simulate {
        #[arg(long)]
        model: PathBuf,
        /// Simulation config file, or a bundled preset name.
        #[arg(long, default_value = "normal")]
        sim: String,
        #[arg(long)]
        horizon: Option<f64>,
        /// Also write every event to `trace.csv`.
        #[arg(long)]
        trace: bool,
    },
    /// Per-scheme activation traffic of a plan.
    Bandwidth {
        #[arg(long)]
        plan: Option<String>,
    },
    /// Write the configured synthetic dataset to `data.csv`.
    GenData,
}

/// 2 for configuration and usage errors, 3 for corrupt artifacts or data.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Data(_) | Error::Numeric(_) => 3,
        _ => 2,
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match &cli.command {
        Command::Train => {
            let cfg = load_config(&cli)?;
            cfg.validate_settings(false)?;
            match cli.precision {
                Precision::F32 => train_cmd::<f32>(&cfg),
                Precision::F64 => train_cmd::<f64>(&cfg),
            }
        }
        Command::Evaluate {
            model,
            setting,
            mode,
            draws,
        } => match LoadedModel::load(model)? {
            LoadedModel::F32(a) => evaluate_cmd(&cli, a, setting.as_deref(), *mode, *draws),
            LoadedModel::F64(a) => evaluate_cmd(&cli, a, setting.as_deref(), *mode, *draws),
        },
        Command::Sweep { axis, repeats } => {
            let mut cfg = load_config(&cli)?;
            if let Some(a) = axis {
                cfg.sweep.axis = a.parse()?;
            }
            if let Some(r) = repeats {
                cfg.sweep.repeats = *r;
            }
            cfg.validate_settings(true)?;
            match cli.precision {
                Precision::F32 => sweep_cmd::<f32>(&cfg, cli.workers),
                Precision::F64 => sweep_cmd::<f64>(&cfg, cli.workers),
            }
        }
        Command::Simulate {
            model,
            sim,
            horizon,
            trace,
        } => {
            let mut sim_cfg = if Path::new(sim).is_file() {
                SimConfig::from_toml(&std::fs::read_to_string(sim)?)?
            } else {
                SimConfig::preset(sim)?
            };
            if let Some(s) = cli.seed {
                sim_cfg.seed = s;
            }
            if let Some(h) = horizon {
                sim_cfg.horizon_hours = *h;
            }
            sim_cfg.validate()?;
            match LoadedModel::load(model)? {
                LoadedModel::F32(a) => simulate_cmd(&cli, a, &sim_cfg, *trace),
                LoadedModel::F64(a) => simulate_cmd(&cli, a, &sim_cfg, *trace),
            }
        }
        Command::Bandwidth { plan } => {
            let mut cfg = resolve_config(&cli)?;
            if let Some(p) = plan {
                cfg.plan = super::config::PlanRef::Preset(p.clone());
            }
            bandwidth_cmd(&cfg)
        }
        Command::GenData => gen_data_cmd(&resolve_config(&cli)?),
    }
}

fn resolve_config(cli: &Cli) -> Result<RunConfig> {
    let cfg = load_config(cli)?;
    cfg.validate()?;
    Ok(cfg)
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    Ok(cfg)
}

fn out_dir(dir: &Path) -> Result<&Path> {
    std::fs::create_dir_all(dir)?;
    Ok(dir)
}

fn check_data(split: &Split, plan: &PartitionPlan) -> Result<()> {
    let d = &split.train;
    if d.feature_count() != plan.input_dim || d.classes != plan.classes {
        return Err(Error::config(format!(
            "dataset: {} features / {} classes do not match the plan's {} / {}",
            d.feature_count(),
            d.classes,
            plan.input_dim,
            plan.classes
        )));
    }
    if d.is_empty() {
        return Err(Error::config("dataset: training split is empty"));
    }
    Ok(())
}

fn clean_accuracy<T: Real>(model: &DistributedModel<T>, scheme: Scheme, data: &Dataset) -> Result<Option<f64>> {
    if data.is_empty() {
        return Ok(None);
    }
    let mask = AliveMask::all_alive(&model.topology);
    let preds = predict(model, &mask, scheme, data.features_as::<T>().view())?;
    Ok(preds.map(|p| p.iter().zip(&data.labels).filter(|(a, b)| a == b).count() as f64 / data.len() as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainResults {
    pub history: TrainHistory,
    pub params: usize,
    pub val_accuracy: Option<f64>,
    pub test_accuracy: Option<f64>,
}

/// Builds, weights and trains a model exactly as `failout train` does.
pub fn train_model<T: Real>(cfg: &RunConfig, split: &Split) -> Result<(DistributedModel<T>, TrainHistory)> {
    let plan = cfg.plan()?;
    check_data(split, &plan)?;
    let setting = cfg.failure_setting(plan.node_count())?;
    let mut model = build_model::<T, _>(&plan, &mut SeededRng::new(cfg.seed, Stream::Init))?;
    assign_hyperconnection_weights(
        &mut model,
        cfg.weights,
        &setting,
        &mut SeededRng::new(cfg.seed, Stream::Weights),
    )?;
    inference_scaling_mode(&mut model, &setting, cfg.inference_scaling)?;
    let history = train(
        &mut model,
        &split.train,
        cfg.scheme,
        &cfg.train_config(&setting),
        cfg.seed,
    )?;
    Ok((model, history))
}

fn train_cmd<T: Real>(cfg: &RunConfig) -> Result<()> {
    let split = load_dataset(&cfg.dataset, cfg.seed)?;
    let (model, history) = train_model::<T>(cfg, &split)?;
    let results = TrainResults {
        params: model.param_count(),
        val_accuracy: clean_accuracy(&model, cfg.scheme, &split.val)?,
        test_accuracy: clean_accuracy(&model, cfg.scheme, &split.test)?,
        history: history.clone(),
    };
    let dir = out_dir(&cfg.out)?;
    ModelArtifact::new(cfg, history, model).save(&dir.join("model.json"))?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    write_json(
        &dir.join("train_report.json"),
        &ReportFile::new("train", cfg, cfg.seed, &results),
    )?;
    for e in &results.history.epochs {
        println!(
            "epoch {:>3}  loss {:.4}  train acc {:.4}{}",
            e.epoch,
            e.loss,
            e.accuracy,
            if e.skipped_batches > 0 {
                format!("  ({} batches skipped)", e.skipped_batches)
            } else {
                String::new()
            }
        );
    }
    if let Some(a) = results.test_accuracy {
        println!("test accuracy (no failures): {:.2}%", a * 100.0);
    }
    println!("wrote {}", dir.join("model.json").display());
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluateResults {
    pub setting: FailureSetting,
    pub mode: EvalMode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<EvaluationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<McEstimate>,
}

fn evaluate_cmd<T: Real>(
    cli: &Cli,
    art: ModelArtifact<T>,
    setting: Option<&str>,
    mode: Option<ModeArg>,
    draws: Option<usize>,
) -> Result<()> {
    let mut cfg = art.config.clone();
    let nodes = art.model.node_count();
    let setting = match setting {
        Some(name) => FailureSetting::named(name, nodes)?,
        None => cfg.failure_setting(nodes)?,
    };
    setting.check(&art.model.topology)?;
    cfg.setting = setting.name.clone();
    if let Some(m) = mode {
        cfg.eval_mode = match m {
            ModeArg::Exact => EvalMode::Exact,
            ModeArg::Mc => EvalMode::Mc,
        };
    }
    if let Some(d) = draws {
        cfg.mc_draws = d;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    let seed = cli.seed.unwrap_or(cfg.seed);
    let split = load_dataset(&cfg.dataset, cfg.seed)?;
    let test = &split.test;

    let results = match cfg.eval_mode {
        EvalMode::Exact => {
            let mut r = evaluate_exact(&art.model, &setting, art.scheme, test, cli.workers)?;
            r.seed = Some(cfg.seed);
            println!("{:<12} {:>12} {:>10}", "failed", "probability", "accuracy");
            for s in &r.scenarios {
                println!(
                    "{:<12} {:>11.4}% {:>9.2}%",
                    s.label,
                    s.probability * 100.0,
                    s.accuracy * 100.0
                );
            }
            println!("{:<12} {:>12} {:>9.2}%", "average", "", r.expected_accuracy * 100.0);
            EvaluateResults {
                setting,
                mode: EvalMode::Exact,
                exact: Some(r),
                monte_carlo: None,
            }
        }
        EvalMode::Mc => {
            let est = monte_carlo_accuracy(&art.model, &setting, art.scheme, test, cfg.mc_draws, seed)?;
            println!(
                "expected accuracy {:.2}% ± {:.2}% ({} draws)",
                est.mean * 100.0,
                est.stderr * 100.0,
                est.draws
            );
            EvaluateResults {
                setting,
                mode: EvalMode::Mc,
                exact: None,
                monte_carlo: Some(est),
            }
        }
    };
    let dir = out_dir(&cfg.out)?;
    write_json(
        &dir.join("evaluate_report.json"),
        &ReportFile::new("evaluate", &cfg, seed, &results),
    )?;
    Ok(())
}

fn sweep_cmd<T: Real>(cfg: &RunConfig, workers: usize) -> Result<()> {
    let plan = cfg.plan()?;
    let split = load_dataset(&cfg.dataset, cfg.seed)?;
    check_data(&split, &plan)?;
    let settings = cfg
        .sweep
        .settings
        .iter()
        .map(|s| FailureSetting::named(s, plan.node_count()))
        .collect::<Result<Vec<_>>>()?;
    let spec = SweepSpec {
        plan: plan.clone(),
        scheme: cfg.scheme,
        train: cfg.train_config(&settings[0]),
        weights: cfg.weights,
        settings,
        repeats: cfg.sweep.repeats,
        seed: cfg.seed,
        workers,
    };
    let levels = axis_levels(cfg.sweep.axis, &plan);
    let grid = sweep::<T>(cfg.sweep.axis, levels, &spec, &split)?;
    let dir = out_dir(&cfg.out)?;
    write_sweep_csv(&grid, &spec.settings, &dir.join("sweep.csv"))?;
    write_json(
        &dir.join("sweep_report.json"),
        &ReportFile::new("sweep", cfg, cfg.seed, &grid),
    )?;
    print_grid(&grid, &spec.settings);
    Ok(())
}

/// One row per cell with scenario accuracies in enumeration order; the
/// weight axis adds a `std` row per setting.
pub fn write_sweep_csv(grid: &AblationGrid, settings: &[FailureSetting], path: &Path) -> Result<()> {
    let io = |e: csv::Error| Error::Io(e.into());
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    let scenario_labels: Vec<String> = grid
        .cells
        .first()
        .map(|c| {
            c.report
                .scenarios
                .iter()
                .map(|s| (s.failed.clone(), s.label.clone()))
                .collect::<Vec<_>>()
        })
        .map(|mut v| {
            v.sort_by_key(|(f, _)| (f.len(), f.clone()));
            v.into_iter().map(|(_, l)| l).collect()
        })
        .unwrap_or_default();
    let mut header: Vec<String> = [
        "axis_level",
        "detail",
        "repeat",
        "seed",
        "setting",
        "expected_accuracy",
        "clean_accuracy",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    header.extend(scenario_labels.iter().map(|l| format!("acc[{l}]")));
    w.write_record(&header).map_err(io)?;
    for c in &grid.cells {
        let detail = grid
            .levels
            .iter()
            .find(|l| l.label == c.level)
            .map(|l| l.detail.clone())
            .unwrap_or_default();
        let mut rec = vec![
            c.level.clone(),
            detail,
            c.repeat.to_string(),
            c.seed.to_string(),
            c.setting.clone(),
            c.report.expected_accuracy.to_string(),
            c.report.clean_accuracy.to_string(),
        ];
        for l in &scenario_labels {
            rec.push(c.report.scenario(l).map(|s| s.accuracy.to_string()).unwrap_or_default());
        }
        w.write_record(&rec).map_err(io)?;
    }
    if grid.axis == AblationAxis::WeightScheme {
        for s in settings {
            if let Some(sd) = grid.std_across_levels(&s.name) {
                let mut rec = vec![
                    "std".into(),
                    "std across weight schemes".into(),
                    String::new(),
                    String::new(),
                ];
                rec.push(s.name.clone());
                rec.push(sd.to_string());
                rec.push(String::new());
                rec.extend(scenario_labels.iter().map(|_| String::new()));
                w.write_record(&rec).map_err(io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn print_grid(grid: &AblationGrid, settings: &[FailureSetting]) {
    print!("{:<12}", "setting");
    for l in &grid.levels {
        print!(" {:>10}", l.label);
    }
    println!();
    for s in settings {
        print!("{:<12}", s.name);
        for l in &grid.levels {
            match grid.mean_expected(&l.label, &s.name) {
                Some(m) => print!(" {:>9.2}%", m * 100.0),
                None => print!(" {:>10}", "-"),
            }
        }
        println!();
    }
    if grid.axis == AblationAxis::WeightScheme {
        for s in settings {
            if let Some(sd) = grid.std_across_levels(&s.name) {
                println!("std across weight schemes ({}): {:.4} pp", s.name, sd * 100.0);
            }
        }
    }
    if grid.axis == AblationAxis::SkipConfig {
        for l in &grid.levels {
            println!("{}: {}", l.label, l.detail);
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimResults {
    pub sim_config: SimConfig,
    pub report: SimReport,
}

fn simulate_cmd<T: Real>(cli: &Cli, art: ModelArtifact<T>, sim: &SimConfig, trace: bool) -> Result<()> {
    let mut cfg = art.config.clone();
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    let split = load_dataset(&cfg.dataset, cfg.seed)?;
    let (report, events) = run_sim_traced(sim, &art.model, art.scheme, &split.test)?;
    let dir = out_dir(&cfg.out)?;
    if trace {
        write_trace(
            &events,
            std::io::BufWriter::new(std::fs::File::create(dir.join("trace.csv"))?),
        )?;
    }
    for (i, (a, e)) in report
        .availability
        .iter()
        .zip(&report.analytic_availability)
        .enumerate()
    {
        println!("{}: availability {:.5} (analytic {:.5})", node_label(i), a, e);
    }
    if let Some(l) = report.mean_detection_latency_s {
        println!("mean detection latency: {l:.3} s");
    }
    if let Some(a) = report.accuracy {
        println!("stream accuracy: {:.2}% over {} requests", a * 100.0, report.requests);
    }
    println!(
        "{} requests during undetected failures, {} lost",
        report.undetected_window_requests, report.lost_requests
    );
    let results = SimResults {
        sim_config: sim.clone(),
        report,
    };
    write_json(
        &dir.join("sim_report.json"),
        &ReportFile::new("simulate", &cfg, sim.seed, &results),
    )?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandwidthResults {
    pub plan: String,
    pub all_alive: Vec<BandwidthRow>,
    /// ResiliNet traffic with one compute node down, by failed node.
    pub resilinet_single_failure: Vec<(String, usize)>,
}

fn bandwidth_cmd(cfg: &RunConfig) -> Result<()> {
    let plan = cfg.plan()?;
    let topo = plan.topology()?;
    let rows = bandwidth_table(&topo);
    let single = topo
        .compute_nodes()
        .map(|n| {
            let mask = AliveMask::with_failed(&topo, &[n], MaskOrigin::ScenarioEnum);
            (node_label(n), topology_bandwidth(&topo, Scheme::ResiliNet, &mask))
        })
        .collect();
    println!("{:<15} {:>10} {:>14}", "scheme", "scalars", "savings vs DFG");
    for r in &rows {
        println!(
            "{:<15} {:>10} {:>13.2}%",
            r.scheme.name(),
            r.scalars,
            r.savings_vs_dfg * 100.0
        );
    }
    let results = BandwidthResults {
        plan: plan.name.clone(),
        all_alive: rows,
        resilinet_single_failure: single,
    };
    let dir = out_dir(&cfg.out)?;
    write_json(
        &dir.join("bandwidth_report.json"),
        &ReportFile::new("bandwidth", cfg, cfg.seed, &results),
    )?;
    Ok(())
}

fn gen_data_cmd(cfg: &RunConfig) -> Result<()> {
    if cfg.dataset.kind != DatasetKind::Synthetic {
        return Err(Error::config("dataset.kind: gen-data needs a synthetic dataset"));
    }
    let seed = cfg.dataset.seed.unwrap_or(cfg.seed);
    let data = generate_synthetic(&cfg.dataset, &mut SeededRng::new(seed, Stream::Data))?;
    let dir = out_dir(&cfg.out)?;
    write_csv(&data, &dir.join("data.csv"))?;
    println!(
        "wrote {} rows ({} features, {} classes) to {}",
        data.len(),
        data.feature_count(),
        data.classes,
        dir.join("data.csv").display()
    );
    Ok(())
}
