//! The `zonobs` command-line tool.
//!
//! Exit codes: `0` success, `2` invalid config/arguments/input, `3` infeasible
//! synthesis or rejected certificate, `4` I/O failure, `5` other runtime
//! failure. Log verbosity is read from `ZONOBS_LOG` (e.g. `ZONOBS_LOG=debug`).

pub mod config;
pub mod plot;
pub mod trace_csv;

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::simkit::{self, SimulationTrace};
use crate::synthesis::synthesize;
use config::{Overrides, Prepared, RunConfig};
use plot::PlotStyle;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_IO: i32 = 4;
pub const EXIT_RUNTIME: i32 = 5;

pub const LOG_ENV: &str = "ZONOBS_LOG";

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Dimension { .. }
        | Error::InvalidArgument(_)
        | Error::ReductionOrder { .. }
        | Error::VertexExplosion { .. }
        | Error::Config(_)
        | Error::Parse { .. } => EXIT_INVALID,
        Error::Infeasible(_) | Error::CertificateRejected(_) => EXIT_INFEASIBLE,
        Error::Io(_) => EXIT_IO,
        Error::Solver(_) | Error::Jacobian(_) | Error::NonFinite { .. } | Error::Runtime(_) | Error::Json(_) => {
            EXIT_RUNTIME
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "zonobs", version, about = "Guaranteed interval estimation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct CommonArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Reduction order of the error zonotope.
    #[arg(long)]
    pub q: Option<usize>,
    /// Decay rate in (0, 1).
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<f64>,
}

impl CommonArgs {
    fn overrides(&self, runs: Option<usize>) -> Overrides {
        Overrides {
            out_dir: self.out_dir.clone(),
            seed: self.seed,
            runs,
            horizon: self.horizon,
            q: self.q,
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the observer design program and write `synthesis.json`.
    Synthesize(CommonArgs),
    /// Run one closed-loop experiment and write `trace.csv` and `summary.json`.
    Run(CommonArgs),
    /// Run seeds `seed .. seed + runs` and write one CSV per run plus `montecarlo.json`.
    Montecarlo {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Render SVG plots from a trace CSV.
    Plot {
        /// Trace CSV written by `run` or `montecarlo`.
        trace: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = PlotStyle::Bounds)]
        style: PlotStyle,
    },
    /// Compare steady-state widths of the peak-to-peak, zonotope and fused boxes.
    Compare(CommonArgs),
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let _ = env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).try_init();
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn prepare(common: &CommonArgs, runs: Option<usize>) -> Result<Prepared> {
    let mut cfg = RunConfig::load(&common.config)?;
    cfg.apply(&common.overrides(runs));
    cfg.prepare()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn write_csv(path: &Path, trace: &SimulationTrace) -> Result<()> {
    let file = BufWriter::new(File::create(path)?);
    trace_csv::write_trace(file, trace)
}

#[derive(Serialize)]
struct RunSummaryFile<'a> {
    metadata: &'a simkit::TraceMetadata,
    steps: usize,
    containment_rate: f64,
    all_contained: bool,
    contract_violations: Vec<simkit::ContractViolation>,
    min_phi_margin: f64,
    steady_state_from: usize,
    mean_width_p: Vec<f64>,
    mean_width_z: Vec<f64>,
    mean_width_fused: Vec<f64>,
}

fn steady_state_start(horizon: usize) -> usize {
    100.min(horizon / 2)
}

fn summarize(trace: &SimulationTrace, from: usize) -> RunSummaryFile<'_> {
    let widths = trace.mean_widths(from).expect("trace has the initial record");
    let v = |d: &nalgebra::DVector<f64>| d.iter().copied().collect();
    RunSummaryFile {
        metadata: &trace.metadata,
        steps: trace.records.len(),
        containment_rate: trace.containment_rate(),
        all_contained: trace.all_contained(),
        contract_violations: trace.violations(),
        min_phi_margin: trace.min_phi_margin(),
        steady_state_from: from,
        mean_width_p: v(&widths.p),
        mean_width_z: v(&widths.z),
        mean_width_fused: v(&widths.fused),
    }
}

fn execute(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Synthesize(common) => {
            let p = prepare(common, None)?;
            let result = synthesize(&p.model, &p.bounds, &p.experiment.synthesis)?;
            std::fs::create_dir_all(&p.out_dir)?;
            let path = p.out_dir.join("synthesis.json");
            write_json(&path, &result.report())?;
            println!("mu_w = {:.6}  mu_v = {:.6}  mu = {:.6}", result.mu_w(), result.mu_v(), result.mu);
            println!("L = {:?}", result.gain.iter().collect::<Vec<_>>());
            println!("wrote {}", path.display());
        }
        Command::Run(common) => {
            let p = prepare(common, None)?;
            let trace = simkit::run_experiment(&p.model, &p.bounds, &p.experiment, p.model_id)?;
            std::fs::create_dir_all(&p.out_dir)?;
            write_csv(&p.out_dir.join("trace.csv"), &trace)?;
            let summary = summarize(&trace, steady_state_start(p.experiment.horizon));
            write_json(&p.out_dir.join("summary.json"), &summary)?;
            println!(
                "{} steps, containment rate {:.4}, min phi margin {:.4e}",
                summary.steps, summary.containment_rate, summary.min_phi_margin
            );
            println!("wrote {}", p.out_dir.join("trace.csv").display());
        }
        Command::Montecarlo { common, runs } => {
            let p = prepare(common, *runs)?;
            let synthesis = synthesize(&p.model, &p.bounds, &p.experiment.synthesis)?;
            let (report, traces) = simkit::monte_carlo(
                &p.model,
                &p.bounds,
                &synthesis,
                &p.experiment,
                p.model_id,
                p.runs,
                p.experiment.noise.seed,
            )?;
            std::fs::create_dir_all(&p.out_dir)?;
            for t in &traces {
                write_csv(&p.out_dir.join(format!("run_{}.csv", t.metadata.seed)), t)?;
            }
            write_json(&p.out_dir.join("montecarlo.json"), &report)?;
            println!(
                "{} runs ({} failed), containment rate {:.4}, min phi margin {:.4e}",
                report.runs.len() + report.failures.len(),
                report.failures.len(),
                report.containment_rate,
                report.min_phi_margin
            );
            if !report.failures.is_empty() {
                return Err(Error::Runtime(format!("{} Monte Carlo runs failed", report.failures.len())));
            }
        }
        Command::Plot { trace, out_dir, style } => {
            let table = trace_csv::read_trace(File::open(trace)?)?;
            let dir =
                out_dir.clone().unwrap_or_else(|| trace.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf));
            let stem = trace.file_stem().and_then(|s| s.to_str()).unwrap_or("trace");
            for path in plot::write_plots(&table, &dir, stem, *style)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Compare(common) => {
            let p = prepare(common, None)?;
            let trace = simkit::run_experiment(&p.model, &p.bounds, &p.experiment, p.model_id)?;
            let from = steady_state_start(p.experiment.horizon);
            let summary = summarize(&trace, from);
            std::fs::create_dir_all(&p.out_dir)?;
            write_json(&p.out_dir.join("compare.json"), &summary)?;
            println!("mean widths over k >= {from}:");
            println!("{:>10} {:>14} {:>14} {:>14}", "component", "peak-to-peak", "zonotope", "fused");
            for i in 0..summary.mean_width_p.len() {
                println!(
                    "{:>10} {:>14.6} {:>14.6} {:>14.6}",
                    format!("x{}", i + 1),
                    summary.mean_width_p[i],
                    summary.mean_width_z[i],
                    summary.mean_width_fused[i]
                );
            }
        }
    }
    Ok(())
}
