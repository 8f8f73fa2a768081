use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use sphereqc::metrics::QualityRow;
use sphereqc_cli::commands::{self, SynthCase};
use sphereqc_cli::config::{Mode, Overrides, RunConfig};
use sphereqc_cli::register;

/// Exit status when the run finished but the map still folds.
const EXIT_FOLDED: u8 = 2;

/// Progress is printed every this many iterations.
const PROGRESS_EVERY: usize = 50;

#[derive(Parser)]
#[command(name = "sphereqc", version, about = "Bijective sphere self-map registration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a sphere self-map and write the deformed mesh and a report.
    Register(RegisterArgs),
    /// Write a synthetic test case (mesh, landmarks or fields, config).
    Synth {
        #[arg(value_enum)]
        case: SynthCase,
        /// Twist pairs per hemisphere.
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute fold count, distortion and landmark error of a result.
    Verify {
        /// Report written by `register`.
        #[arg(long, conflicts_with_all = ["reference", "deformed"])]
        report: Option<PathBuf>,
        #[arg(long, requires = "deformed")]
        reference: Option<PathBuf>,
        #[arg(long, requires = "reference")]
        deformed: Option<PathBuf>,
        #[arg(long, requires = "reference")]
        landmarks: Option<PathBuf>,
    },
    /// Resample landmark curves by arc length and rigidly pre-align them.
    Resample {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, default_value_t = 60)]
        points: usize,
        /// Moving sphere mesh, needed when curves are given as vertex indices.
        #[arg(long)]
        moving: Option<PathBuf>,
        /// Output spec; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RegisterArgs {
    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long)]
    moving: Option<PathBuf>,
    #[arg(long)]
    fixed: Option<PathBuf>,
    #[arg(long)]
    landmarks: Option<PathBuf>,
    /// Scalar field as name=path; names are moving, fixed, moving_labels, fixed_labels.
    #[arg(long = "field")]
    fields: Vec<String>,
    /// Weight overrides such as "task=2,folding=50".
    #[arg(long)]
    weights: Option<String>,
    #[arg(long)]
    rings: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    quiet: bool,
}

fn register(a: RegisterArgs) -> Result<u8> {
    let overrides = Overrides {
        mode: a.mode,
        moving: a.moving,
        fixed: a.fixed,
        landmarks: a.landmarks,
        fields: a.fields,
        weights: a.weights,
        rings: a.rings,
        max_iters: a.max_iters,
        lr: a.lr,
        seed: a.seed,
        out: a.out,
    };
    let cfg = RunConfig::resolve(a.config.as_deref(), overrides)?;
    let quiet = a.quiet;
    let outcome = register::run(&cfg, |it, b| {
        if !quiet && it % PROGRESS_EVERY == 0 {
            eprintln!("iter {it:5}  total {:.6e}  task {:.6e}  folds {}", b.total, b.task, b.folds);
        }
    })?;
    let r = &outcome.report;
    println!(
        "iterations {}  converged {}  folds {}  total {:.6e}  seconds {:.2}",
        r.iterations, r.converged, r.metrics.quality.folds, r.breakdown.total, r.seconds
    );
    println!("{}", QualityRow::header());
    println!("{}", r.metrics.quality.format_row());
    if let (Some(after), Some(before)) = (r.metrics.ncc, r.metrics.ncc_identity) {
        println!("ncc {before:.6} -> {after:.6}");
    }
    if let (Some(after), Some(before)) = (r.metrics.dice, r.metrics.dice_identity) {
        println!("dice {before:.6} -> {after:.6}");
    }
    println!("report {}", outcome.report_path.display());
    Ok(if r.failed || r.metrics.quality.folds > 0 { EXIT_FOLDED } else { 0 })
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Register(a) => register(a),
        Command::Synth { case, n, seed, out } => {
            let files = commands::synth(case, n, seed, &out)?;
            println!("{}", files.config.display());
            Ok(0)
        }
        Command::Verify {
            report,
            reference,
            deformed,
            landmarks,
        } => {
            let v = match (report, reference, deformed) {
                (Some(p), _, _) => commands::verify_report(&p)?,
                (None, Some(r), Some(d)) => {
                    let reference = register::load_sphere_mesh(&r)?;
                    let deformed = register::load_sphere_mesh(&d)?;
                    let spec = landmarks.as_deref().map(register::load_spec).transpose()?;
                    commands::Verification {
                        row: commands::verify_meshes(&reference, &deformed, spec.as_ref())?,
                        report_deviation: None,
                    }
                }
                _ => bail!("give --report, or --reference with --deformed"),
            };
            println!("{}", QualityRow::header());
            println!("{}", v.row.format_row());
            if let Some(d) = v.report_deviation {
                println!("max deviation from report {d:.3e}");
            }
            Ok(if v.passed() { 0 } else { EXIT_FOLDED })
        }
        Command::Resample {
            spec,
            points,
            moving,
            out,
        } => {
            let r = commands::resample(&spec, moving.as_deref(), points)?;
            let text = r.spec.to_json()?;
            match out {
                Some(p) => {
                    std::fs::write(&p, text)?;
                    eprintln!("rotation {:?}", r.rotation);
                }
                // a closed pipe (e.g. `| head`) is not an error
                None => drop(writeln!(std::io::stdout(), "{text}")),
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
