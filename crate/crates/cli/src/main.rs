//! `sfqsim`: batch runner for SFQ qubit-control experiments.

mod commands;
mod config;
mod failure;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde_json::json;

use commands::{Ctx, Report};
use config::RunFile;
use failure::{Failure, Outcome};
use output::Artifact;

/// Environment variable naming the default output directory.
const OUT_ENV: &str = "SFQSIM_OUT";
const DEFAULT_OUT: &str = "sfqsim-out";

#[derive(Parser)]
#[command(name = "sfqsim", version, about = "Simulate and benchmark SFQ-controlled transmon qubits")]
struct Cli {
    /// JSON run configuration (device, out, seed, params).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Device parameter file (TOML); the bundled five-qubit device if omitted.
    #[arg(long, global = true)]
    device: Option<PathBuf>,
    /// Output directory [default: $SFQSIM_OUT, else ./sfqsim-out].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// X/2 error and leakage against gate time (coupling sweep).
    Fig2b,
    /// X/2 error against the number of pulses.
    Fig4d,
    /// Standard randomized benchmarking.
    Rb,
    /// Interleaved RB of the X/2 gate.
    Irb,
    /// RB with Cliffords built from two X/2 gates and virtual Z.
    U3rb,
    /// Purity RB.
    Prb,
    /// ORBIT calibration sweep.
    Orbit,
    /// Time-multiplexed drive through the demultiplexer.
    Tdm,
    /// Crosstalk matrix and bias margin.
    Xtalk,
    /// Quasiparticle double-exponential fit.
    Qpfit,
    /// Decoherence-limited fidelity for each device qubit.
    Limits,
    /// Heat-load budget table.
    Budget,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Fig2b => "fig2b",
            Command::Fig4d => "fig4d",
            Command::Rb => "rb",
            Command::Irb => "irb",
            Command::U3rb => "u3rb",
            Command::Prb => "prb",
            Command::Orbit => "orbit",
            Command::Tdm => "tdm",
            Command::Xtalk => "xtalk",
            Command::Qpfit => "qpfit",
            Command::Limits => "limits",
            Command::Budget => "budget",
        }
    }

    fn run(self, ctx: &Ctx) -> Outcome<Report> {
        match self {
            Command::Fig2b => commands::fig2b(ctx),
            Command::Fig4d => commands::fig4d(ctx),
            Command::Rb => commands::rb(ctx),
            Command::Irb => commands::irb(ctx),
            Command::U3rb => commands::u3rb(ctx),
            Command::Prb => commands::prb(ctx),
            Command::Orbit => commands::orbit(ctx),
            Command::Tdm => commands::tdm(ctx),
            Command::Xtalk => commands::xtalk(ctx),
            Command::Qpfit => commands::qpfit(ctx),
            Command::Limits => commands::limits(ctx),
            Command::Budget => commands::budget(ctx),
        }
    }
}

/// Run manifest: inputs, seed, version and wall time.
fn manifest_name(command: &str) -> String {
    format!("{command}_manifest.json")
}

fn run(cli: Cli) -> Outcome<Vec<PathBuf>> {
    let started = Instant::now();
    let file = match &cli.config {
        Some(p) => RunFile::load(p)?,
        None => RunFile::default(),
    };
    let name = cli.command.name();
    if let Some(c) = &file.command {
        if c != name {
            return Err(Failure::config(format!("config is for command {c:?}, not {name:?}")));
        }
    }
    let out = cli
        .out
        .clone()
        .or_else(|| file.out.clone())
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut planned: Vec<String> = commands::planned_outputs(name).iter().map(|s| s.to_string()).collect();
    planned.push(manifest_name(name));
    output::check_free(&out, &planned, cli.force)?;
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::config("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::config(e.to_string()))?;
    }
    let ctx = Ctx {
        device_path: cli.device.clone().or_else(|| file.device.clone()),
        seed: cli.seed.or(file.seed),
        file,
    };
    let report = cli.command.run(&ctx)?;
    let mut artifacts = report.artifacts;
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "command": name,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": ctx.seed,
        "config": cli.config.as_ref().map(|p| p.display().to_string()),
        "device": report.device,
        "params": report.params,
        "outputs": artifacts.iter().map(|a| a.name.clone()).collect::<Vec<_>>(),
        "threads": rayon::current_num_threads(),
        "finished_unix": started_unix,
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    artifacts.push(Artifact::json(&manifest_name(name), &manifest)?);
    output::write_all(&out, &artifacts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("sfqsim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
