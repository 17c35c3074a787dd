//! Batch experiment runner: sweeps over noise grids, single protocol runs,
//! correction-table optimization, and config validation.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 when some sweep
//! rows errored but the run completed.

mod config;
mod runner;
mod single;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{load_config, EngineChoice, Scenario};
use runner::manifest_path;
use sqem_core::corrector::{optimize_corrections, OptimizerConfig};
use sqem_core::protocol::{Auxiliary, InputMode, ProtocolSpec, Variant};

#[derive(Parser)]
#[command(name = "sqem", version, about = "Superposed error-mitigation sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep config and write a CSV result table plus a manifest.
    Sweep {
        config: PathBuf,
        /// Output CSV path.
        #[arg(short, long)]
        output: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run one protocol instance and print every outcome.
    Single {
        /// cnot | t | identity | layered:<N> | circuit:<path>
        #[arg(long, default_value = "cnot")]
        gate: String,
        /// dephasing | depolarizing | bit_flip | amplitude_damping | custom:<path>
        #[arg(long, default_value = "dephasing")]
        channel: String,
        /// Per-branch no-error probability (per-qubit decay for amplitude
        /// damping).
        #[arg(long, default_value_t = 0.9)]
        p_ne: f64,
        /// Branch count.
        #[arg(long, default_value_t = 2)]
        d: usize,
        /// choi, or one of 0/1/+/- per qubit.
        #[arg(long, default_value = "choi")]
        aux: String,
        /// cj (entangled-pair input) or an explicit state string.
        #[arg(long, default_value = "cj")]
        input: String,
        /// auto | bruteforce | closed_form
        #[arg(long, default_value = "auto")]
        engine: String,
    },
    /// Optimize per-outcome corrections for a single-point
    /// quasi-deterministic config and write the table as JSON.
    Optimize {
        config: PathBuf,
        /// Output JSON path.
        #[arg(short, long)]
        output: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a sweep config against the schema and report the grid size.
    Validate { config: PathBuf },
}

fn init_worker_pool() {
    if let Ok(text) = std::env::var("SQEM_WORKERS") {
        if let Ok(workers) = text.parse::<usize>() {
            if workers >= 1 {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build_global();
            }
        }
    }
}

fn parse_engine(text: &str) -> Result<EngineChoice, String> {
    match text {
        "auto" => Ok(EngineChoice::Auto),
        "bruteforce" => Ok(EngineChoice::BruteForce),
        "closed_form" => Ok(EngineChoice::ClosedForm),
        other => Err(format!("engine `{other}` is not auto | bruteforce | closed_form")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_worker_pool();
    match cli.command {
        Command::Sweep { config, output, seed } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(text) => text,
                Err(e) => {
                    eprintln!("config error: cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let parsed = match config::parse_config(&text) {
                Ok(parsed) => parsed,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(2);
                }
            };
            match runner::run_sweep(&parsed, &text, &output, seed) {
                Ok(summary) => {
                    println!(
                        "wrote {} rows to {} ({} errored); manifest: {}",
                        summary.rows,
                        output.display(),
                        summary.errors,
                        manifest_path(&output).display()
                    );
                    if summary.errors > 0 {
                        ExitCode::from(3)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("output error: {e}");
                    ExitCode::FAILURE
                }
            }
        }
        Command::Single { gate, channel, p_ne, d, aux, input, engine } => {
            let engine = match parse_engine(&engine) {
                Ok(engine) => engine,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(2);
                }
            };
            let args = single::SingleArgs { gate, channel, p_ne, d, aux, input, engine };
            match single::run_single(&args) {
                Ok(()) => ExitCode::SUCCESS,
                Err(e) => {
                    eprintln!("config error: {e}");
                    ExitCode::from(2)
                }
            }
        }
        Command::Optimize { config, output, seed } => match run_optimize(&config, &output, seed) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("{e}");
                ExitCode::from(2)
            }
        },
        Command::Validate { config } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(text) => text,
                Err(e) => {
                    eprintln!("config error: cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            match config::parse_config(&text) {
                Ok(parsed) => {
                    println!(
                        "ok: scenario {} over {} grid points (gate {})",
                        parsed.scenario.name(),
                        parsed.grid_points().len(),
                        parsed.gate.label(),
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::from(2)
                }
            }
        }
    }
}

fn run_optimize(
    config_path: &std::path::Path,
    output: &std::path::Path,
    seed: Option<u64>,
) -> Result<(), String> {
    let parsed = load_config(config_path).map_err(|e| e.to_string())?;
    if parsed.scenario != Scenario::QuasiDeterministic {
        return Err("config error: optimize requires the quasi_deterministic scenario".into());
    }
    let points = parsed.grid_points();
    if points.len() != 1 {
        return Err(format!(
            "config error: optimize requires a single grid point, found {}",
            points.len()
        ));
    }
    let point = &points[0];
    let unitary = parsed.gate.matrix().map_err(|e| format!("config error: {e}"))?;
    let m = unitary.rows().trailing_zeros() as usize;
    let channel = point
        .family
        .per_branch(point.p_ne, m)
        .map_err(|e| format!("config error: {e}"))?;
    let auxiliary = match point.aux.as_ref() {
        Some(config::AuxSpec::Choi) | None => Auxiliary::Choi,
        Some(spec @ config::AuxSpec::Named(_)) => {
            Auxiliary::State(spec.to_state(m).map_err(|e| e.to_string())?)
        }
    };
    let spec = ProtocolSpec::new(
        unitary,
        channel,
        point.d,
        auxiliary,
        InputMode::ChoiPairs,
        Variant::QuasiDeterministic,
    )
    .map_err(|e| format!("config error: {e}"))?;
    let cfg = OptimizerConfig {
        threshold: parsed.threshold,
        parameterization: parsed.parameterization,
        seed: seed.unwrap_or(parsed.seed),
        ..OptimizerConfig::default()
    };
    let table = optimize_corrections(&spec, &cfg).map_err(|e| format!("config error: {e}"))?;
    std::fs::write(output, table.to_json_string()).map_err(|e| format!("output error: {e}"))?;
    println!(
        "wrote correction table to {} (P={:.6}, F_CJ={:.6})",
        output.display(),
        table.achieved_probability,
        table.achieved_f_cj
    );
    Ok(())
}
