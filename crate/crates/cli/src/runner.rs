//! Sweep execution: dispatch grid points to a worker pool, gather rows in
//! grid order, and write the CSV plus a run manifest.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use sqem_core::compiler::{layered_circuit, run_noisy_protocol, GateCircuit, GateKind, GateOp};
use sqem_core::corrector::{fmt_g17, optimize_corrections, OptimizerConfig};
use sqem_core::protocol::{
    assemble_figures, figures_of_merit, spec_omega_metrics, Auxiliary, Engine, FiguresOfMerit,
    InputMode, ProtocolSpec, RatioKind, Variant,
};
use sqem_core::qstate::PureState;
use sqem_core::{gates, Error};

use crate::config::{
    AuxSpec, ChannelFamily, EngineChoice, GateSpec, GridPoint, Scenario, SweepConfig,
};

/// Exactly the published column set, in order.
pub const CSV_HEADER: &str = "scenario,gate,channel,p_ne,d,aux,omega1,omega2,P,R,F_CJ,F0_CJ,engine,ms";

/// One CSV line worth of results.
#[derive(Debug, Clone)]
pub struct ResultRow {
    pub scenario: &'static str,
    pub gate: String,
    pub channel: &'static str,
    pub p_ne: f64,
    pub d: usize,
    pub aux: String,
    pub omega1: Option<f64>,
    pub omega2: Option<f64>,
    pub figures: Option<FiguresOfMerit>,
    pub engine: String,
    pub ms: u128,
    pub error: Option<String>,
}

impl ResultRow {
    fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(fmt_g17).unwrap_or_else(|| "nan".into());
        let (p, r, f, f0) = match &self.figures {
            Some(fom) => (
                fmt_g17(fom.p),
                match fom.r_kind {
                    // Bare `1` marks the 0/0 noiseless convention; `inf`
                    // marks a perfect mitigated fidelity over a noisy
                    // baseline. Everything else is a plain 17-digit value.
                    RatioKind::NoiselessUnit => "1".to_string(),
                    RatioKind::Infinite => "inf".to_string(),
                    RatioKind::Finite => fmt_g17(fom.r),
                },
                fmt_g17(fom.f_cj),
                fmt_g17(fom.f0_cj),
            ),
            None => ("nan".into(), "nan".into(), "nan".into(), "nan".into()),
        };
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scenario,
            self.gate,
            self.channel,
            fmt_g17(self.p_ne),
            self.d,
            self.aux,
            opt(self.omega1),
            opt(self.omega2),
            p,
            r,
            f,
            f0,
            self.engine,
            self.ms
        )
    }
}

pub struct SweepSummary {
    pub rows: usize,
    pub errors: usize,
}

/// The auxiliary state scanned by `omega_scan`: `Ry(theta)|1>` per qubit,
/// interpolating from the noise-insensitive `|1...1>` at `theta = 0` to a
/// fully sensitive product state at `theta = pi/2`.
fn scan_state(theta: f64, m: usize) -> PureState {
    let single = PureState::basis_state(1, 1)
        .apply_unitary(&gates::ry(theta), &[0])
        .expect("rotation is unitary");
    let mut state = single.clone();
    for _ in 1..m {
        state = state.tensor(&single);
    }
    state
}

fn auxiliary_for(point: &GridPoint, m: usize) -> Result<Auxiliary, Error> {
    match (&point.aux, point.theta) {
        (_, Some(theta)) => Ok(Auxiliary::State(scan_state(theta, m))),
        (Some(AuxSpec::Choi), None) => Ok(Auxiliary::Choi),
        (Some(spec @ AuxSpec::Named(_)), None) => Ok(Auxiliary::State(
            spec.to_state(m)
                .map_err(|e| Error::InvalidParameter(e.0))?,
        )),
        (None, None) => Ok(Auxiliary::Choi),
    }
}

fn aux_label(point: &GridPoint) -> String {
    match (&point.aux, point.theta) {
        (_, Some(theta)) => format!("ry:{}", fmt_g17(theta)),
        (Some(spec), None) => spec.label(),
        (None, None) => "choi".into(),
    }
}

/// The noisy target circuit of a `noisy_cswap` row: every gate of the ideal
/// target followed by the family channel on each touched qubit.
fn noisy_target(
    gate: &GateSpec,
    family: ChannelFamily,
    value: f64,
) -> Result<GateCircuit, Error> {
    let single = family.single_qubit(value)?;
    let ideal = match gate {
        GateSpec::Identity => {
            let mut c = GateCircuit::new(1);
            c.push(GateOp::new(GateKind::Id, vec![0]))?;
            c
        }
        GateSpec::T => {
            let mut c = GateCircuit::new(1);
            c.push(GateOp::new(GateKind::T, vec![0]))?;
            c
        }
        GateSpec::Cnot => {
            let mut c = GateCircuit::new(2);
            c.push(GateOp::new(GateKind::Cnot, vec![0, 1]))?;
            c
        }
        GateSpec::Layered(n) => layered_circuit(*n),
        GateSpec::Circuit(path) => {
            let loaded = GateCircuit::from_json_file(path)?;
            if loaded.ops().iter().any(|op| op.noise.is_some()) {
                return Err(Error::InvalidParameter(
                    "noisy_cswap attaches the swept channel; the circuit must be noise-free"
                        .into(),
                ));
            }
            loaded
        }
    };
    ideal.with_per_gate_noise(&single)
}

/// Compute one grid point. Never panics on protocol errors: they become
/// error rows so the sweep can continue.
pub fn compute_row(config: &SweepConfig, point: &GridPoint, row_index: usize) -> ResultRow {
    let started = Instant::now();
    let mut row = ResultRow {
        scenario: config.scenario.name(),
        gate: config.gate.label(),
        channel: point.family.name(),
        p_ne: point.p_ne,
        d: point.d,
        aux: aux_label(point),
        omega1: None,
        omega2: None,
        figures: None,
        engine: "error".into(),
        ms: 0,
        error: None,
    };
    match compute_row_inner(config, point, row_index, &mut row) {
        Ok(()) => {}
        Err(e) => {
            row.engine = "error".into();
            row.figures = None;
            row.error = Some(e.to_string());
        }
    }
    row.ms = started.elapsed().as_millis();
    row
}

fn compute_row_inner(
    config: &SweepConfig,
    point: &GridPoint,
    row_index: usize,
    row: &mut ResultRow,
) -> Result<(), Error> {
    let unitary = config.gate.matrix()?;
    let m = unitary.rows().trailing_zeros() as usize;
    let channel = point.family.per_branch(point.p_ne, m)?;
    let auxiliary = auxiliary_for(point, m)?;
    let variant = match config.scenario {
        Scenario::QuasiDeterministic => Variant::QuasiDeterministic,
        _ => Variant::Probabilistic,
    };
    let spec = ProtocolSpec::new(
        unitary,
        channel.clone(),
        point.d,
        auxiliary,
        InputMode::ChoiPairs,
        variant,
    )?;

    match spec_omega_metrics(&spec) {
        Ok((w1, w2)) => {
            row.omega1 = Some(w1);
            row.omega2 = Some(w2);
        }
        Err(Error::NoiselessOmega { omega2 }) => {
            row.omega1 = None;
            row.omega2 = Some(omega2);
        }
        Err(other) => return Err(other),
    }

    match config.scenario {
        Scenario::Probabilistic | Scenario::OmegaScan => {
            let engine = match config.engine {
                EngineChoice::BruteForce => Engine::BruteForce,
                EngineChoice::ClosedForm => Engine::ClosedForm,
                EngineChoice::Auto => Engine::Auto,
            };
            let fom = figures_of_merit(&spec, &spec.default_selection(), engine)?;
            row.figures = Some(fom);
            row.engine = match config.engine {
                EngineChoice::BruteForce => "bruteforce".into(),
                // The default selection is homogeneous, so auto resolves to
                // the closed form.
                _ => "closed_form".into(),
            };
        }
        Scenario::QuasiDeterministic => {
            let cfg = OptimizerConfig {
                threshold: config.threshold,
                parameterization: config.parameterization,
                seed: config
                    .seed
                    .wrapping_add((row_index as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
                ..OptimizerConfig::default()
            };
            let table = optimize_corrections(&spec, &cfg)?;
            let f0 = channel.no_error_probability();
            row.figures = Some(assemble_figures(
                table.achieved_probability,
                table.achieved_f_cj,
                f0,
            ));
            row.engine = "bruteforce".into();
        }
        Scenario::NoisyCswap => {
            let target = noisy_target(&config.gate, point.family, point.p_ne)?;
            let fom = run_noisy_protocol(&spec, &target, config.epsilon)?;
            row.figures = Some(fom);
            row.engine = "bruteforce".into();
        }
    }
    Ok(())
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Run a full sweep: compute every grid point (in parallel), write the CSV
/// in grid order, and write `<output stem>.manifest.json` next to it.
pub fn run_sweep(
    config: &SweepConfig,
    config_text: &str,
    output: &Path,
    seed_override: Option<u64>,
) -> std::io::Result<SweepSummary> {
    let started = Instant::now();
    let mut config = config.clone();
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    let points = config.grid_points();
    let rows: Vec<ResultRow> = points
        .par_iter()
        .enumerate()
        .map(|(i, point)| compute_row(&config, point, i))
        .collect();

    let mut csv = String::with_capacity(rows.len() * 160 + CSV_HEADER.len() + 1);
    csv.push_str(CSV_HEADER);
    csv.push('\n');
    for row in &rows {
        csv.push_str(&row.to_csv());
        csv.push('\n');
    }
    std::fs::write(output, csv)?;

    let errors: Vec<serde_json::Value> = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            r.error
                .as_ref()
                .map(|e| serde_json::json!({"row": i, "error": e}))
        })
        .collect();
    let manifest = serde_json::json!({
        "tool": "sqem-cli",
        "version": env!("CARGO_PKG_VERSION"),
        "config_hash": format!("{:016x}", fnv1a64(config_text.as_bytes())),
        "scenario": config.scenario.name(),
        "seed": config.seed,
        "rows": rows.len(),
        "errors": errors.len(),
        "row_errors": errors,
        "elapsed_ms": started.elapsed().as_millis() as u64,
    });
    std::fs::write(
        manifest_path(output),
        serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n",
    )?;

    Ok(SweepSummary {
        rows: rows.len(),
        errors: rows.iter().filter(|r| r.error.is_some()).count(),
    })
}

pub fn manifest_path(output: &Path) -> std::path::PathBuf {
    output.with_extension("manifest.json")
}
