//! Command-line driver: simulate, fit, eval, anomaly.
//!
//! Every command reads an optional JSON config and applies flag overrides on
//! top. Outputs are plain files under `--out`. Exit codes: 0 success, 2
//! usage error, 3 data error, 4 numeric error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use anie::anomaly::{ScoreSource, multiscale_score, write_profile_csv};
use anie::baselines::{BaselineConfig, hist_subspace};
use anie::error::{Error, ErrorClass};
use anie::events::{LoadOptions, load_events, save_events};
use anie::model::{mise, subspace_error};
use anie::pipeline::{
    FitConfig, fit_stream, load_model, read_manifest, write_atomic, write_fit_bundle,
};
use anie::subspace::SubspaceEstimate;
use anie::synth::{GeneratorConfig, generate_network};

#[derive(Parser)]
#[command(
    name = "anie",
    version,
    about = "Adaptive network intensity estimation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic event stream with known ground truth.
    Simulate {
        /// Generator config JSON ({"model": ..., "n_nodes": ..., ...}).
        #[arg(long)]
        config: PathBuf,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (events.csv, events.json, truth.json).
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the multiresolution intensity model to an event stream.
    Fit {
        /// Fit config JSON; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Input events CSV (header u,v,t). Required here or in the config.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Haar detail levels J.
        #[arg(long)]
        levels: Option<u32>,
        /// Subspace rank D.
        #[arg(long)]
        rank: Option<usize>,
        /// FDR significance level.
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output bundle directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a fitted model (and optional baselines) against ground truth.
    Eval {
        /// Eval config JSON; flags below override its fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Ground-truth JSON written by `simulate`.
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Fitted bundle directory from `fit`.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Events CSV; required when baselines are evaluated.
        #[arg(long)]
        events: Option<PathBuf>,
        /// Add or override a histogram baseline with this bin count.
        #[arg(long)]
        bins: Option<usize>,
        /// Add or override a kernel baseline with this bandwidth.
        #[arg(long)]
        bandwidth: Option<f64>,
        #[arg(long)]
        quad_points: Option<usize>,
        #[arg(long)]
        patch_nodes: Option<usize>,
        /// Also write the reconstructed intensities of the patch on a
        /// uniform grid as CSV (u,v,t,lambda_hat).
        #[arg(long)]
        grid_out: Option<PathBuf>,
        #[arg(long)]
        grid_points: Option<usize>,
        /// Output metrics JSON path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Export the per-scale anomaly score of a fitted model.
    Anomaly {
        /// Fitted bundle directory from `fit`.
        #[arg(long)]
        model: PathBuf,
        #[arg(long, value_enum, default_value_t = SourceArg::Thresholded)]
        source: SourceArg,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceArg {
    Raw,
    Thresholded,
}

impl From<SourceArg> for ScoreSource {
    fn from(s: SourceArg) -> Self {
        match s {
            SourceArg::Raw => ScoreSource::Raw,
            SourceArg::Thresholded => ScoreSource::Thresholded,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            match err.class() {
                ErrorClass::Usage => ExitCode::from(2),
                ErrorClass::Data => ExitCode::from(3),
                ErrorClass::Numeric => ExitCode::from(4),
            }
        }
    }
}

fn parse_json_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Simulate { config, seed, out } => cmd_simulate(&config, seed, &out),
        Command::Fit {
            config,
            input,
            levels,
            rank,
            alpha,
            seed,
            out,
        } => cmd_fit(config.as_deref(), input, levels, rank, alpha, seed, &out),
        Command::Eval {
            config,
            truth,
            model,
            events,
            bins,
            bandwidth,
            quad_points,
            patch_nodes,
            grid_out,
            grid_points,
            out,
        } => cmd_eval(EvalArgs {
            config,
            truth,
            model,
            events,
            bins,
            bandwidth,
            quad_points,
            patch_nodes,
            grid_out,
            grid_points,
            out,
        }),
        Command::Anomaly { model, source, out } => cmd_anomaly(&model, source.into(), &out),
    }
}

fn cmd_simulate(config: &Path, seed: Option<u64>, out: &Path) -> Result<(), Error> {
    let mut generator: GeneratorConfig = parse_json_file(config)?;
    if let Some(s) = seed {
        generator = generator.with_seed(s);
    }
    let truth = generator.ground_truth()?;
    let stream = generate_network(&truth, generator.seed())?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out.display().to_string(), e))?;
    save_events(&stream, &out.join("events.csv"))?;
    write_atomic(
        &out.join("truth.json"),
        serde_json::to_string_pretty(&generator)
            .expect("generator serializes")
            .as_bytes(),
    )?;
    println!(
        "simulated {} events on {} nodes -> {}",
        stream.len(),
        stream.n_nodes(),
        out.display()
    );
    Ok(())
}

/// File form of the fit configuration: everything optional, flags win.
#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitFileConfig {
    input: Option<PathBuf>,
    levels: Option<u32>,
    rank: Option<usize>,
    alpha: Option<f64>,
    seed: Option<u64>,
    basis: Option<anie::basis::BasisDescriptor>,
    include_self_loops: Option<bool>,
}

#[allow(clippy::too_many_arguments)]
fn cmd_fit(
    config: Option<&Path>,
    input: Option<PathBuf>,
    levels: Option<u32>,
    rank: Option<usize>,
    alpha: Option<f64>,
    seed: Option<u64>,
    out: &Path,
) -> Result<(), Error> {
    let file: FitFileConfig = match config {
        Some(p) => parse_json_file(p)?,
        None => FitFileConfig::default(),
    };
    let defaults = FitConfig::default();
    let fit_config = FitConfig {
        levels: levels.or(file.levels).unwrap_or(defaults.levels),
        rank: rank.or(file.rank).unwrap_or(defaults.rank),
        alpha: alpha.or(file.alpha).unwrap_or(defaults.alpha),
        seed: seed.or(file.seed).unwrap_or(defaults.seed),
        basis: file.basis,
        include_self_loops: file.include_self_loops.unwrap_or(false),
    };
    let input = input
        .or(file.input)
        .ok_or_else(|| Error::Parameter("no input events file given".into()))?;
    let stream = load_events(&input, &LoadOptions::default())?;
    let output = fit_stream(&stream, &fit_config)?;
    write_fit_bundle(out, &output, &fit_config)?;
    let kept: usize = output
        .affinity
        .mask
        .iter()
        .map(|m| m.iter().filter(|&&x| x == 1).count())
        .sum();
    println!(
        "fitted {} events, rank {}, {} of {} coefficients kept -> {}",
        output.n_events,
        fit_config.rank,
        kept,
        output.affinity.n_functions() * fit_config.rank * fit_config.rank,
        out.display()
    );
    Ok(())
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalFileConfig {
    truth: Option<PathBuf>,
    model_dir: Option<PathBuf>,
    events: Option<PathBuf>,
    #[serde(default)]
    baselines: Vec<BaselineConfig>,
    quad_points: Option<usize>,
    patch_nodes: Option<usize>,
    grid_out: Option<PathBuf>,
    grid_points: Option<usize>,
    /// Estimate each baseline's subspace from its own histogram matrices
    /// instead of sharing the fitted one.
    baseline_own_subspace: Option<bool>,
}

struct EvalArgs {
    config: Option<PathBuf>,
    truth: Option<PathBuf>,
    model: Option<PathBuf>,
    events: Option<PathBuf>,
    bins: Option<usize>,
    bandwidth: Option<f64>,
    quad_points: Option<usize>,
    patch_nodes: Option<usize>,
    grid_out: Option<PathBuf>,
    grid_points: Option<usize>,
    out: PathBuf,
}

#[derive(Serialize)]
struct Metrics {
    mise: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    subspace_error: Option<f64>,
    #[serde(skip_serializing_if = "std::collections::BTreeMap::is_empty")]
    baselines: std::collections::BTreeMap<String, f64>,
}

fn cmd_eval(args: EvalArgs) -> Result<(), Error> {
    let file: EvalFileConfig = match &args.config {
        Some(p) => parse_json_file(p)?,
        None => EvalFileConfig::default(),
    };
    let truth_path = args
        .truth
        .or(file.truth)
        .ok_or_else(|| Error::Parameter("no ground-truth file given".into()))?;
    let model_dir = args
        .model
        .or(file.model_dir)
        .ok_or_else(|| Error::Parameter("no model bundle directory given".into()))?;
    let generator: GeneratorConfig = parse_json_file(&truth_path)?;
    let truth = generator.ground_truth()?;
    let model = load_model(&model_dir)?;
    if model.n_nodes() != truth.n_nodes() {
        return Err(Error::Shape(format!(
            "model covers {} nodes, truth {}",
            model.n_nodes(),
            truth.n_nodes()
        )));
    }

    let quad_points = args.quad_points.or(file.quad_points).unwrap_or(1024);
    let patch_nodes = args
        .patch_nodes
        .or(file.patch_nodes)
        .unwrap_or(100)
        .min(truth.n_nodes());
    let pairs: Vec<(u32, u32)> = (0..patch_nodes as u32)
        .flat_map(|u| (0..patch_nodes as u32).map(move |v| (u, v)))
        .collect();

    let mise_value = mise(&truth, &model, &pairs, quad_points)?;
    let sub_err = subspace_error(model.subspace().u_hat(), &truth.u_true()).ok();

    // Assemble the baseline list: config entries plus flag overrides.
    let mut baselines = file.baselines;
    if let Some(bins) = args.bins {
        baselines.retain(|b| !matches!(b, BaselineConfig::Hist { .. }));
        baselines.push(BaselineConfig::Hist { bins });
    }
    if let Some(bandwidth) = args.bandwidth {
        baselines.retain(|b| !matches!(b, BaselineConfig::Kde { .. }));
        baselines.push(BaselineConfig::Kde { bandwidth });
    }

    let mut baseline_scores = std::collections::BTreeMap::new();
    if !baselines.is_empty() {
        let events_path = args
            .events
            .or(file.events)
            .ok_or_else(|| Error::Parameter("baselines need --events".into()))?;
        let stream = anie::events::rescale(&load_events(&events_path, &LoadOptions::default())?)?;
        let own_subspace = file.baseline_own_subspace.unwrap_or(false);
        let manifest = read_manifest(&model_dir)?;
        for cfg in &baselines {
            let sub: SubspaceEstimate = if own_subspace {
                let bins = match cfg {
                    BaselineConfig::Hist { bins } => *bins,
                    BaselineConfig::Kde { .. } => 64,
                };
                hist_subspace(&stream, bins, model.subspace().rank(), manifest.config.seed)?
            } else {
                model.subspace().clone()
            };
            let baseline = cfg.build(&stream, sub)?;
            let score = mise(&truth, &baseline, &pairs, quad_points)?;
            let name = match cfg {
                BaselineConfig::Hist { .. } => "ipp_hist",
                BaselineConfig::Kde { .. } => "ipp_kde",
            };
            baseline_scores.insert(name.to_string(), score);
        }
    }

    if let Some(grid_path) = args.grid_out.as_ref().or(file.grid_out.as_ref()) {
        let points = args.grid_points.or(file.grid_points).unwrap_or(256);
        let grid: Vec<f64> = (0..points)
            .map(|i| (i as f64 + 0.5) / points as f64)
            .collect();
        let values = model.evaluate_grid(&pairs, &grid)?;
        let mut csv = String::from("u,v,t,lambda_hat\n");
        for (pi, &(u, v)) in pairs.iter().enumerate() {
            for (ti, &t) in grid.iter().enumerate() {
                use std::fmt::Write as _;
                writeln!(csv, "{u},{v},{t},{}", values[pi][ti]).expect("write to string");
            }
        }
        write_atomic(grid_path, csv.as_bytes())?;
    }

    let metrics = Metrics {
        mise: mise_value,
        subspace_error: sub_err,
        baselines: baseline_scores,
    };
    write_atomic(
        &args.out,
        serde_json::to_string_pretty(&metrics)
            .expect("metrics serialize")
            .as_bytes(),
    )?;
    println!("mise {} -> {}", metrics.mise, args.out.display());
    Ok(())
}

fn cmd_anomaly(model_dir: &Path, source: ScoreSource, out: &Path) -> Result<(), Error> {
    let model = load_model(model_dir)?;
    let profile = multiscale_score(model.affinity(), model.basis(), source)?;
    let mut buf = Vec::new();
    write_profile_csv(&profile, &mut buf).map_err(|e| Error::io(out.display().to_string(), e))?;
    write_atomic(out, &buf)?;
    println!("wrote {} scales -> {}", profile.scales.len(), out.display());
    Ok(())
}
