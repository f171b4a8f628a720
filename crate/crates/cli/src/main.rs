//! `locmap`: batch front end for map enhancement and evaluation.
//!
//! Exit codes: 0 success, 1 invalid input or arguments, 2 I/O failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use locmap_core::Error;

#[derive(Debug, Parser)]
#[command(name = "locmap", version, about = "Localization-map enhancement and evaluation")]
struct Cli {
    /// Worker threads (0 = one per core). Never changes numeric output.
    #[arg(long, global = true, env = "LOCMAP_JOBS", default_value_t = 0)]
    jobs: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write self-enhanced maps plus a manifest pointing at them.
    Enhance(EnhanceArgs),
    /// IoU-threshold / precision-recall evaluation of maps against masks.
    EvalMaps(EvalMapsArgs),
    /// Box localization accuracy.
    EvalBoxes(EvalBoxesArgs),
    /// Pseudo-boundaries from enhanced maps and image edges.
    GenEdges(GenEdgesArgs),
    /// Fit the toy linear boundary predictor.
    FitEdges(FitEdgesArgs),
    /// Edge benchmark (ODS / OIS / AP) over two directories of PNGs.
    EvalEdges(EvalEdgesArgs),
    /// Generate a synthetic dataset.
    Fixtures(FixturesArgs),
    /// Seed-count sweep: box accuracy and Peak-IoU for each K.
    SweepK(SweepKArgs),
    /// Regenerate CSV and SVG output from report JSON files.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Source {
    Cam,
    Sem,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AveragingArg {
    Macro,
    Micro,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Vanilla,
    Hns,
}

#[derive(Debug, Args)]
pub struct EnhanceArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = locmap_core::sem::DEFAULT_K)]
    k: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalMapsArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "cam")]
    source: Source,
    #[arg(long, default_value_t = locmap_core::sem::DEFAULT_K)]
    k: usize,
    #[arg(long, value_enum, default_value = "macro")]
    averaging: AveragingArg,
    /// Report JSON; the CSV and SVG are written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalBoxesArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "cam")]
    source: Source,
    #[arg(long, default_value_t = locmap_core::sem::DEFAULT_K)]
    k: usize,
    #[arg(long, default_value_t = 0.2)]
    box_threshold: f64,
    /// 4 or 8.
    #[arg(long, default_value_t = 8)]
    connectivity: u8,
    /// Also report accuracy over box thresholds 0.05..0.95.
    #[arg(long)]
    sweep: bool,
    /// Result JSON; printed to stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenEdgesArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = locmap_core::sem::DEFAULT_K)]
    k: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitEdgesArgs {
    /// Manifest with `features` and `edges` for each record used.
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_enum, default_value = "hns")]
    mode: ModeArg,
    #[arg(long, default_value_t = locmap_core::hns::DEFAULT_LAMBDA)]
    lambda: f64,
    #[arg(long, default_value_t = 500)]
    steps: usize,
    #[arg(long, default_value_t = 1.0)]
    lr: f64,
    /// Predictor weights as a 1 x (C+1) array (bias last).
    #[arg(long)]
    out: PathBuf,
    /// Metrics JSON; always printed to stdout as well.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Directory for per-image predicted edge maps (8-bit PNG).
    #[arg(long)]
    pred_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalEdgesArgs {
    /// Grayscale PNG edge scores; 255 = certain edge.
    #[arg(long)]
    pred_dir: PathBuf,
    /// Binary PNGs with the same file names.
    #[arg(long)]
    gt_dir: PathBuf,
    #[arg(long, default_value_t = locmap_core::edge_eval::DEFAULT_TOLERANCE)]
    tol: f64,
    #[arg(long, default_value_t = locmap_core::edge_eval::DEFAULT_THRESHOLDS)]
    thresholds: usize,
    /// GT files are object masks; use their boundary pixels.
    #[arg(long)]
    gt_from_masks: bool,
    /// Report JSON; the PR plot is written next to it as SVG.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 80)]
    size: usize,
    #[arg(long, default_value_t = 8)]
    channels: usize,
}

#[derive(Debug, Args)]
pub struct SweepKArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "1,20,40,60,80,100")]
    ks: Vec<usize>,
    #[arg(long, default_value_t = 0.2)]
    box_threshold: f64,
    /// CSV; printed to stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report JSON files (from eval-maps); each is plotted as one curve.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn exit_code(err: &Error) -> u8 {
    if err.is_io() {
        2
    } else {
        1
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Enhance(a) => commands::enhance(a),
        Command::EvalMaps(a) => commands::eval_maps(a),
        Command::EvalBoxes(a) => commands::eval_boxes(a),
        Command::GenEdges(a) => commands::gen_edges(a),
        Command::FitEdges(a) => commands::fit_edges(a),
        Command::EvalEdges(a) => commands::eval_edges(a),
        Command::Fixtures(a) => commands::fixtures(a),
        Command::SweepK(a) => commands::sweep_k(a),
        Command::Report(a) => commands::report(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
