//! `dtof`: simulate sparse depth, detect outliers, complete and evaluate
//! dense depth, one frame per invocation.
//!
//! Exit status: 0 on success, 1 on usage errors, 2 on data errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dtof_core::io::{self, Report};
use dtof_core::{
    complete, complete_with_residuals, detect, evaluate, evaluate_complement, fit_affine,
    mask_points, pair_points, simulate, FitDomain, Orientation, RunConfig,
};

#[derive(Parser)]
#[command(name = "dtof", version, about = "Sparse depth simulation, outlier detection and completion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a ground-truth map into labeled sparse points.
    Simulate(SimulateArgs),
    /// Score sparse points against a relative map and keep the inliers.
    Detect(DetectArgs),
    /// Align a relative map to sparse points and write dense depth.
    Complete(CompleteArgs),
    /// Compare a dense prediction with ground truth.
    Evaluate(EvaluateArgs),
    /// Render a depth map as a color PNG.
    Colorize(ColorizeArgs),
    /// Write a procedural ground-truth and relative map pair.
    Scene(SceneArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_points: Option<PathBuf>,
    #[arg(long)]
    out_labels: Option<PathBuf>,
    /// Overrides DTOF_SEED and the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long)]
    rel: Option<PathBuf>,
    /// The relative map grows with inverse depth.
    #[arg(long)]
    rel_inverse: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct CompleteArgs {
    #[arg(long)]
    points: Option<PathBuf>,
    #[arg(long)]
    rel: Option<PathBuf>,
    #[arg(long)]
    rel_inverse: bool,
    /// Drop flagged points before fitting.
    #[arg(long)]
    detect: bool,
    /// Huber reweighted fit.
    #[arg(long)]
    robust: bool,
    /// Interpolate point residuals over the global fit.
    #[arg(long)]
    residuals: bool,
    #[arg(long, value_parser = parse_domain)]
    domain: Option<FitDomain>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Map whose valid (non-zero) pixels select the evaluated region.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ColorizeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    min: f64,
    #[arg(long)]
    max: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SceneArgs {
    #[arg(long, default_value_t = 480)]
    height: usize,
    #[arg(long, default_value_t = 640)]
    width: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Smooth distortion amplitude of the relative map.
    #[arg(long, default_value_t = 0.02)]
    warp: f64,
    #[arg(long)]
    out_gt: PathBuf,
    /// Written as an inverse-oriented PFM.
    #[arg(long)]
    out_rel: PathBuf,
}

fn parse_domain(s: &str) -> Result<FitDomain, String> {
    match s {
        "depth" => Ok(FitDomain::Depth),
        "inverse_depth" | "inverse" => Ok(FitDomain::InverseDepth),
        _ => Err(format!("unknown domain {s:?}; expected depth or inverse_depth")),
    }
}

enum Failure {
    Usage(String),
    Data(dtof_core::Error),
}

impl From<dtof_core::Error> for Failure {
    fn from(e: dtof_core::Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> CliResult {
    match command {
        Command::Simulate(a) => run_simulate(a),
        Command::Detect(a) => run_detect(a),
        Command::Complete(a) => run_complete(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::Colorize(a) => {
            let map = io::read_dense_depth(&a.input)?;
            io::write_colorized(&a.out, &map, a.min, a.max)?;
            Ok(())
        }
        Command::Scene(a) => {
            let seed = resolve_seed(a.seed, 0)?;
            let scene =
                dtof_core::scene::synthetic_scene_with_warp(a.height, a.width, seed, a.warp)?;
            io::write_dense_depth(&a.out_gt, &scene.gt)?;
            io::write_relative_depth(&a.out_rel, &scene.rel)?;
            Ok(())
        }
    }
}

fn load_config(path: Option<&Path>) -> CliResult<RunConfig> {
    Ok(match path {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    })
}

/// A path from the command line, else from the config file.
fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> CliResult<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| Failure::Usage(format!("missing --{name}")))
}

fn resolve_seed(flag: Option<u64>, config_seed: u64) -> CliResult<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var("DTOF_SEED") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Failure::Usage(format!("DTOF_SEED={v:?} is not an unsigned integer"))),
        Err(_) => Ok(config_seed),
    }
}

fn run_simulate(a: SimulateArgs) -> CliResult {
    let cfg = load_config(a.config.as_deref())?;
    let gt_path = required(a.gt, &cfg.paths.gt, "gt")?;
    let out_points = required(a.out_points, &cfg.paths.points, "out-points")?;
    let out_labels = required(a.out_labels, &cfg.paths.labels, "out-labels")?;
    let seed = resolve_seed(a.seed, cfg.seed)?;

    let gt = io::read_dense_depth(&gt_path)?;
    let sim = simulate(&gt, &cfg.sim_config(seed))?;
    let pts = sim.points();
    io::write_points(&out_points, &pts, None)?;
    io::write_points(&out_labels, &pts, Some(&sim.labels()))?;
    Ok(())
}

fn read_inputs(
    points: Option<PathBuf>,
    rel: Option<PathBuf>,
    rel_inverse: bool,
    cfg: &RunConfig,
) -> CliResult<(dtof_core::SparsePointSet, dtof_core::RelativeDepthMap)> {
    let points = required(points, &cfg.paths.points, "points")?;
    let rel = required(rel, &cfg.paths.rel, "rel")?;
    let orientation = if rel_inverse {
        Orientation::Inverse
    } else {
        Orientation::DepthLike
    };
    let rel = io::read_relative_depth(&rel, orientation)?;
    let file = io::read_points(&points, rel.height(), rel.width())?;
    let pts = pair_points(&file.points, &rel)?;
    Ok((pts, rel))
}

fn run_detect(a: DetectArgs) -> CliResult {
    let cfg = load_config(a.config.as_deref())?;
    let out = required(a.out, &cfg.paths.out, "out")?;
    let report = a.report.or_else(|| cfg.paths.report.clone());
    let (pts, _) = read_inputs(a.points, a.rel, a.rel_inverse, &cfg)?;

    let res = detect(&pts, &cfg.detector)?;
    io::write_points(&out, &mask_points(&pts, &res)?, None)?;
    if let Some(path) = report {
        Report::new().add_anomaly("detect", &res).write(&path)?;
    }
    Ok(())
}

fn run_complete(a: CompleteArgs) -> CliResult {
    let cfg = load_config(a.config.as_deref())?;
    let out = required(a.out, &cfg.paths.out, "out")?;
    let report_path = a.report.or_else(|| cfg.paths.report.clone());
    let (mut pts, rel) = read_inputs(a.points, a.rel, a.rel_inverse, &cfg)?;
    let opts = &cfg.completion;
    let domain = a.domain.unwrap_or(opts.domain);

    let mut report = Report::new();
    if a.detect || opts.detect {
        let res = detect(&pts, &cfg.detector)?;
        report.add_anomaly("detect", &res);
        pts = mask_points(&pts, &res)?;
    }
    let fit = fit_affine(&pts, &rel, domain, a.robust || opts.robust)?;
    let dense = if a.residuals || opts.residuals {
        complete_with_residuals(&rel, &fit, &pts, &cfg.sensor)?
    } else {
        complete(&rel, &fit, &cfg.sensor)
    };
    io::write_dense_depth(&out, &dense)?;
    if let Some(path) = report_path {
        report
            .push("fit.domain", domain.as_str())
            .push("fit.a", fit.a)
            .push("fit.b", fit.b)
            .push("fit.rmse", fit.rmse_fit)
            .push("fit.support", fit.support)
            .write(&path)?;
    }
    Ok(())
}

fn run_evaluate(a: EvaluateArgs) -> CliResult {
    let cfg = load_config(a.config.as_deref())?;
    let pred_path = required(a.pred, &cfg.paths.out, "pred")?;
    let gt_path = required(a.gt, &cfg.paths.gt, "gt")?;
    let report_path = required(a.report, &cfg.paths.report, "report")?;

    let pred = io::read_dense_depth(&pred_path)?;
    let gt = io::read_dense_depth(&gt_path)?;
    let mut report = Report::new();
    match a.mask {
        Some(mask_path) => {
            let mask = io::read_dense_depth(&mask_path)?;
            if (mask.height(), mask.width()) != (gt.height(), gt.width()) {
                return Err(Failure::Data(dtof_core::Error::InvalidInput(format!(
                    "mask is {}x{} but ground truth is {}x{}",
                    mask.height(),
                    mask.width(),
                    gt.height(),
                    gt.width()
                ))));
            }
            report.add_eval("eval", &evaluate(&pred, &gt, Some(mask.valid()))?);
            if let Ok(rest) = evaluate_complement(&pred, &gt, mask.valid()) {
                report.add_eval("complement", &rest);
            }
        }
        None => {
            report.add_eval("eval", &evaluate(&pred, &gt, None)?);
        }
    }
    report.write(&report_path)?;
    Ok(())
}
