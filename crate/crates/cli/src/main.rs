//! `bpnp`: Poisson deblurring experiments from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 solver abort,
//! 3 I/O error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use bregman_pnp::experiment::{self, ExperimentSpec, MethodSpec};
use bregman_pnp::geometry::{ReferenceKind, RegularizerKind};
use bregman_pnp::signal::io::{load_counts, load_normalized, save_counts, save_normalized};
use bregman_pnp::signal::KernelSpec;
use bregman_pnp::solver::{theorem_gate, Algorithm};
use bregman_pnp::Error;

#[derive(Parser)]
#[command(name = "bpnp", version, about = "Bregman plug-and-play restoration of Poisson-blurred images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Blur a clean image and draw Poisson counts.
    Degrade(DegradeArgs),
    /// Restore a count image.
    Restore(RestoreArgs),
    /// PSNR of an image against a ground truth.
    Eval(EvalArgs),
    /// Run a batch experiment and print a PSNR table as CSV.
    Bench(BenchArgs),
    /// Check the step-size and Lipschitz conditions for PnP-BPGM convergence.
    CheckTheorem(TheoremArgs),
}

#[derive(Args)]
struct DegradeArgs {
    /// Clean image (PNG/PGM) or `phantom:NAME[:SIZE]`.
    #[arg(long)]
    input: String,
    /// Output count image (PGM or PNG).
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value = "uniform9")]
    kernel: KernelSpec,
    #[arg(long)]
    peak: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RestoreArgs {
    /// Count image produced by `degrade`.
    #[arg(long)]
    input: PathBuf,
    /// Restored image, written on [0, 1].
    #[arg(long)]
    output: PathBuf,
    /// JSON file with `kernel`, `peak`, `seed` and a `method` object; flags
    /// take precedence.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<KernelSpec>,
    #[arg(long)]
    peak: Option<f64>,
    /// Seed of the initial-point perturbation.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    href: Option<ReferenceKind>,
    #[arg(long)]
    denoiser: Option<String>,
    #[arg(long)]
    reg: Option<RegularizerKind>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Disable step halving for Burg steps.
    #[arg(long)]
    no_safeguard: bool,
    /// Clean image used to record a PSNR trace.
    #[arg(long)]
    ground_truth: Option<PathBuf>,
    /// Where to write the JSON run report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Image under test.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    ground_truth: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    peak: f64,
}

#[derive(Args)]
struct BenchArgs {
    /// JSON experiment description.
    #[arg(long)]
    spec: PathBuf,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    kernel: Option<KernelSpec>,
    #[arg(long)]
    peak: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for per-run JSON reports.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TheoremArgs {
    #[arg(long)]
    mu_h: f64,
    #[arg(long)]
    l_h: f64,
    #[arg(long)]
    mu_f: f64,
    #[arg(long)]
    l_f: f64,
    /// Lipschitz constant of the denoiser.
    #[arg(long)]
    m: f64,
    /// Step size to test against the admissible interval.
    #[arg(long)]
    gamma: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RestoreFile {
    kernel: Option<KernelSpec>,
    peak: Option<f64>,
    seed: Option<u64>,
    method: MethodSpec,
}

enum Failure {
    Usage(String),
    Io(String),
    Lib(Error),
}

/// Attaches the offending path to file errors.
fn at<T>(path: impl AsRef<Path>, r: Result<T, Error>) -> Result<T, Failure> {
    r.map_err(|e| {
        if e.is_io() {
            Failure::Io(format!("{}: {e}", path.as_ref().display()))
        } else {
            Failure::Lib(e)
        }
    })
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type Outcome = Result<(), Failure>;

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = at(path, fs::read_to_string(path).map_err(Error::from))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn degrade(args: DegradeArgs) -> Outcome {
    let clean = at(&args.input, experiment::load_source(&args.input))?;
    let kernel = args.kernel.build()?;
    let y = experiment::degrade(&clean, &kernel, args.peak, args.seed)?;
    at(&args.output, save_counts(&y, &args.output))?;
    Ok(())
}

fn restore(args: RestoreArgs) -> Outcome {
    let file: RestoreFile = match &args.spec {
        Some(p) => read_json(p)?,
        None => RestoreFile::default(),
    };
    let mut method = file.method;
    if let Some(a) = args.algo {
        method.algo = a;
    }
    if args.href.is_some() {
        method.href = args.href;
    }
    if args.denoiser.is_some() {
        method.denoiser = args.denoiser;
    }
    if let Some(g) = args.reg {
        method.reg = g;
    }
    if let Some(g) = args.gamma {
        method.gamma = g;
    }
    if let Some(t) = args.tau {
        method.tau = t;
    }
    if let Some(k) = args.iters {
        method.iters = k;
    }
    if let Some(t) = args.tol {
        method.tol = t;
    }
    if args.no_safeguard {
        method.safeguard = false;
    }
    let kernel = args.kernel.or(file.kernel).unwrap_or(KernelSpec::Uniform9).build()?;
    let peak = args
        .peak
        .or(file.peak)
        .ok_or_else(|| Failure::Usage("--peak is required (flag or spec file)".into()))?;
    let seed = args.seed.or(file.seed).unwrap_or(0);

    let y = at(&args.input, load_counts(&args.input))?;
    let gt = match &args.ground_truth {
        Some(p) => Some(at(p, load_normalized(p))?),
        None => None,
    };
    let (x, report) = experiment::restore(&y, &kernel, peak, &method, seed, gt.as_ref())?;
    at(&args.output, save_normalized(&x.scale(1.0 / peak), &args.output))?;
    if let Some(path) = &args.report {
        at(path, fs::write(path, report.to_json()?).map_err(Error::from))?;
    }
    if let Some(gt) = &gt {
        let score = experiment::evaluate(gt, &x.scale(1.0 / peak), peak)?;
        println!("{score:.4}");
    }
    Ok(())
}

fn eval(args: EvalArgs) -> Outcome {
    let test = at(&args.input, load_normalized(&args.input))?;
    let gt = at(&args.ground_truth, load_normalized(&args.ground_truth))?;
    println!("{:.4}", experiment::evaluate(&gt, &test, args.peak)?);
    Ok(())
}

fn bench(args: BenchArgs) -> Outcome {
    let mut spec: ExperimentSpec = read_json(&args.spec)?;
    if let Some(k) = args.kernel {
        spec.kernel = k;
    }
    if let Some(p) = args.peak {
        spec.peak = p;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if args.report.is_some() {
        spec.report_dir = args.report;
    }
    let csv = experiment::bench(&spec)?.to_csv()?;
    match &args.output {
        Some(path) => at(path, fs::write(path, csv).map_err(Error::from))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn check_theorem(args: TheoremArgs) -> Outcome {
    let cert = theorem_gate(args.mu_h, args.l_h, args.mu_f, args.l_f, args.m)?;
    let mut json = serde_json::to_value(cert).map_err(Error::from)?;
    if let Some(g) = args.gamma {
        json["gamma"] = g.into();
        json["gamma_admissible"] = cert.admits(g).into();
    }
    println!("{}", serde_json::to_string_pretty(&json).map_err(Error::from)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Degrade(a) => degrade(a),
        Command::Restore(a) => restore(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::CheckTheorem(a) => check_theorem(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_solver_abort() {
                2
            } else if e.is_io() {
                3
            } else {
                1
            })
        }
    }
}
