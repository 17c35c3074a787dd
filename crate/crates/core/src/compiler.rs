//! Gate-level circuits with per-gate noise: the controlled-SWAP
//! decomposition, the layered benchmark unitary, and protocol runs where
//! the routing itself is noisy.
//!
//! The robustness studies model hardware the way two-qubit-gate dominated
//! devices behave: every cNOT (including the cNOT constituents of a
//! Toffoli) is a perfect operation followed by a two-qubit depolarizing
//! channel, while single-qubit gates stay noiseless.

use serde::{Deserialize, Serialize};

use crate::channels::{ChannelDocument, KrausChannel};
use crate::gates;
use crate::linalg::CMatrix;
use crate::protocol::{
    self, assemble_figures, FiguresOfMerit, InputMode, ProtocolSpec,
};
use crate::qstate::{bell_pairs, embed_operator, state_fidelity, DensityMatrix};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Gates and circuits
// ---------------------------------------------------------------------------

/// Gate vocabulary of the circuit layer. `T` follows the protocol
/// convention `exp(i pi/8 Z)`; `Phase(theta)` is `diag(1, e^{i theta})`,
/// which at `theta = +/- pi/4` is the usual T / T-dagger of the Toffoli
/// decomposition up to global phase.
#[derive(Debug, Clone, PartialEq)]
pub enum GateKind {
    Id,
    H,
    X,
    Z,
    T,
    Tdg,
    Phase(f64),
    Cnot,
    Toffoli,
    Fredkin,
}

impl GateKind {
    pub fn arity(&self) -> usize {
        match self {
            GateKind::Id
            | GateKind::H
            | GateKind::X
            | GateKind::Z
            | GateKind::T
            | GateKind::Tdg
            | GateKind::Phase(_) => 1,
            GateKind::Cnot => 2,
            GateKind::Toffoli | GateKind::Fredkin => 3,
        }
    }

    pub fn matrix(&self) -> CMatrix {
        match self {
            GateKind::Id => gates::identity(1),
            GateKind::H => gates::hadamard(),
            GateKind::X => gates::pauli_x(),
            GateKind::Z => gates::pauli_z(),
            GateKind::T => gates::t(),
            GateKind::Tdg => gates::t_dagger(),
            GateKind::Phase(theta) => gates::phase(*theta),
            GateKind::Cnot => gates::cnot(),
            GateKind::Toffoli => gates::toffoli(),
            GateKind::Fredkin => gates::fredkin(),
        }
    }

    fn name(&self) -> &'static str {
        match self {
            GateKind::Id => "id",
            GateKind::H => "h",
            GateKind::X => "x",
            GateKind::Z => "z",
            GateKind::T => "t",
            GateKind::Tdg => "tdg",
            GateKind::Phase(_) => "phase",
            GateKind::Cnot => "cnot",
            GateKind::Toffoli => "toffoli",
            GateKind::Fredkin => "fredkin",
        }
    }
}

/// One gate application with an optional noise channel applied after it.
#[derive(Debug, Clone)]
pub struct GateOp {
    pub kind: GateKind,
    pub targets: Vec<usize>,
    pub noise: Option<KrausChannel>,
}

impl GateOp {
    pub fn new(kind: GateKind, targets: Vec<usize>) -> Self {
        Self { kind, targets, noise: None }
    }

    pub fn with_noise(kind: GateKind, targets: Vec<usize>, noise: KrausChannel) -> Self {
        Self { kind, targets, noise: Some(noise) }
    }
}

/// An ordered gate list over a fixed-width register.
#[derive(Debug, Clone)]
pub struct GateCircuit {
    n_qubits: usize,
    ops: Vec<GateOp>,
}

impl GateCircuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, ops: Vec::new() }
    }

    pub fn push(&mut self, op: GateOp) -> Result<()> {
        if op.targets.len() != op.kind.arity() {
            return Err(Error::InvalidParameter(format!(
                "{} takes {} targets, got {}",
                op.kind.name(),
                op.kind.arity(),
                op.targets.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for &q in &op.targets {
            if q >= self.n_qubits {
                return Err(Error::DimensionMismatch(format!(
                    "target {q} outside a {}-qubit circuit",
                    self.n_qubits
                )));
            }
            if !seen.insert(q) {
                return Err(Error::InvalidParameter("duplicate gate target".into()));
            }
        }
        if let Some(noise) = &op.noise {
            if noise.n_qubits() != op.targets.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{}-qubit noise attached to a {}-target gate",
                    noise.n_qubits(),
                    op.targets.len()
                )));
            }
        }
        self.ops.push(op);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn ops(&self) -> &[GateOp] {
        &self.ops
    }

    pub fn two_qubit_gate_count(&self) -> usize {
        self.ops.iter().filter(|op| op.kind.arity() == 2).count()
    }

    /// The unitary implemented by the gate list, ignoring attached noise.
    pub fn unitary(&self) -> Result<CMatrix> {
        let mut total = CMatrix::identity(1 << self.n_qubits);
        for op in &self.ops {
            let embedded = embed_operator(&op.kind.matrix(), self.n_qubits, &op.targets)?;
            total = embedded.mul(&total);
        }
        Ok(total)
    }

    /// Apply the circuit (gates plus attached noise) to a state living on
    /// this circuit's register.
    pub fn apply(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        let register: Vec<usize> = (0..self.n_qubits).collect();
        self.apply_embedded(rho, &register)
    }

    /// Apply the circuit with local qubit `q` mapped to `register[q]` of a
    /// larger state.
    pub fn apply_embedded(&self, rho: &DensityMatrix, register: &[usize]) -> Result<DensityMatrix> {
        if register.len() != self.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "register of {} qubits for a {}-qubit circuit",
                register.len(),
                self.n_qubits
            )));
        }
        let mut state = rho.clone();
        for op in &self.ops {
            let targets: Vec<usize> = op.targets.iter().map(|&q| register[q]).collect();
            state = state.apply_unitary(&op.kind.matrix(), &targets)?;
            if let Some(noise) = &op.noise {
                state = noise.apply(&state, &targets)?;
            }
        }
        Ok(state)
    }

    /// Attach `single^(x arity)` after every gate, modelling noise that
    /// hits each touched qubit independently.
    pub fn with_per_gate_noise(&self, single: &KrausChannel) -> Result<GateCircuit> {
        if single.n_qubits() != 1 {
            return Err(Error::InvalidParameter(
                "per-gate noise takes a single-qubit channel".into(),
            ));
        }
        let mut out = GateCircuit::new(self.n_qubits);
        for op in &self.ops {
            let noise = single.tensor_power(op.targets.len())?;
            out.push(GateOp::with_noise(op.kind.clone(), op.targets.clone(), noise))?;
        }
        Ok(out)
    }

    /// Serialize as a bare JSON gate list.
    pub fn to_json_string(&self) -> String {
        let docs: Vec<GateOpDoc> = self.ops.iter().map(GateOpDoc::from_op).collect();
        serde_json::to_string_pretty(&docs).expect("gate list serializes")
    }

    /// Load from a bare JSON gate list; the register width is the highest
    /// target plus one.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let docs: Vec<GateOpDoc> = serde_json::from_str(text)?;
        let n_qubits = docs
            .iter()
            .flat_map(|d| d.targets.iter())
            .max()
            .map(|&q| q + 1)
            .unwrap_or(1);
        let mut circuit = GateCircuit::new(n_qubits);
        for doc in docs {
            circuit.push(doc.into_op()?)?;
        }
        Ok(circuit)
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct GateOpDoc {
    gate: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    targets: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise: Option<ChannelDocument>,
}

impl GateOpDoc {
    fn from_op(op: &GateOp) -> Self {
        Self {
            gate: op.kind.name().to_string(),
            theta: match op.kind {
                GateKind::Phase(theta) => Some(theta),
                _ => None,
            },
            targets: op.targets.clone(),
            noise: op.noise.as_ref().map(ChannelDocument::from_channel),
        }
    }

    fn into_op(self) -> Result<GateOp> {
        let kind = match self.gate.as_str() {
            "id" => GateKind::Id,
            "h" => GateKind::H,
            "x" => GateKind::X,
            "z" => GateKind::Z,
            "t" => GateKind::T,
            "tdg" => GateKind::Tdg,
            "phase" => GateKind::Phase(self.theta.ok_or_else(|| {
                Error::Parse("phase gate without a theta field".into())
            })?),
            "cnot" => GateKind::Cnot,
            "toffoli" => GateKind::Toffoli,
            "fredkin" => GateKind::Fredkin,
            other => return Err(Error::Parse(format!("unknown gate `{other}`"))),
        };
        let noise = self.noise.map(|doc| doc.into_channel()).transpose()?;
        Ok(GateOp { kind, targets: self.targets, noise })
    }
}

// ---------------------------------------------------------------------------
// Controlled-SWAP decomposition
// ---------------------------------------------------------------------------

use std::f64::consts::FRAC_PI_4;

/// The standard 6-cNOT Toffoli decomposition; the pi/4 phase gates are the
/// usual T and T-dagger.
fn toffoli_ops(c1: usize, c2: usize, t: usize) -> Vec<GateOp> {
    vec![
        GateOp::new(GateKind::H, vec![t]),
        GateOp::new(GateKind::Cnot, vec![c2, t]),
        GateOp::new(GateKind::Phase(-FRAC_PI_4), vec![t]),
        GateOp::new(GateKind::Cnot, vec![c1, t]),
        GateOp::new(GateKind::Phase(FRAC_PI_4), vec![t]),
        GateOp::new(GateKind::Cnot, vec![c2, t]),
        GateOp::new(GateKind::Phase(-FRAC_PI_4), vec![t]),
        GateOp::new(GateKind::Cnot, vec![c1, t]),
        GateOp::new(GateKind::Phase(FRAC_PI_4), vec![t]),
        GateOp::new(GateKind::Phase(FRAC_PI_4), vec![c2]),
        GateOp::new(GateKind::H, vec![t]),
        GateOp::new(GateKind::Cnot, vec![c1, c2]),
        GateOp::new(GateKind::Phase(FRAC_PI_4), vec![c1]),
        GateOp::new(GateKind::Phase(-FRAC_PI_4), vec![c2]),
        GateOp::new(GateKind::Cnot, vec![c1, c2]),
    ]
}

/// Fredkin as cNOT - Toffoli - cNOT.
fn fredkin_ops(control: usize, a: usize, b: usize) -> Vec<GateOp> {
    let mut ops = vec![GateOp::new(GateKind::Cnot, vec![b, a])];
    ops.extend(toffoli_ops(control, a, b));
    ops.push(GateOp::new(GateKind::Cnot, vec![b, a]));
    ops
}

/// Gate-level controlled-SWAP of two m-qubit registers: control on qubit 0,
/// register `a` on qubits `1..=m`, register `b` on `m+1..=2m`. One Fredkin
/// per qubit pair, each expanded to 8 two-qubit gates (2 outer cNOTs plus
/// the 6-cNOT Toffoli core).
pub fn cswap_decomposition(m: usize) -> GateCircuit {
    assert!(m >= 1, "controlled-SWAP needs at least one qubit pair");
    let mut circuit = GateCircuit::new(1 + 2 * m);
    for k in 0..m {
        for op in fredkin_ops(0, 1 + k, 1 + m + k) {
            circuit.push(op).expect("decomposition targets are in range");
        }
    }
    circuit
}

/// [`cswap_decomposition`] with a two-qubit depolarizing channel of error
/// strength `epsilon` attached after every cNOT.
pub fn noisy_cswap_circuit(m: usize, epsilon: f64) -> Result<GateCircuit> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::InvalidParameter(format!(
            "epsilon = {epsilon} outside [0, 1]"
        )));
    }
    let ideal = cswap_decomposition(m);
    if epsilon == 0.0 {
        return Ok(ideal);
    }
    let noise = KrausChannel::two_qubit_depolarizing(1.0 - epsilon)?;
    let mut out = GateCircuit::new(ideal.n_qubits());
    for op in ideal.ops() {
        let op = if op.kind == GateKind::Cnot {
            GateOp::with_noise(op.kind.clone(), op.targets.clone(), noise.clone())
        } else {
            op.clone()
        };
        out.push(op)?;
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Layered benchmark unitary
// ---------------------------------------------------------------------------

/// `[cNOT (T (x) T)]^{N_L}` on two qubits.
pub fn layered_unitary(layers: usize) -> CMatrix {
    assert!(layers >= 1, "at least one layer");
    let single = gates::cnot().mul(&gates::t().kron(&gates::t()));
    let mut total = CMatrix::identity(4);
    for _ in 0..layers {
        total = single.mul(&total);
    }
    total
}

/// The layered unitary as a gate list with noise slots: per layer, T on each
/// qubit then a cNOT.
pub fn layered_circuit(layers: usize) -> GateCircuit {
    assert!(layers >= 1, "at least one layer");
    let mut circuit = GateCircuit::new(2);
    for _ in 0..layers {
        circuit.push(GateOp::new(GateKind::T, vec![0])).unwrap();
        circuit.push(GateOp::new(GateKind::T, vec![1])).unwrap();
        circuit.push(GateOp::new(GateKind::Cnot, vec![0, 1])).unwrap();
    }
    circuit
}

// ---------------------------------------------------------------------------
// Noisy-routing protocol runs
// ---------------------------------------------------------------------------

/// Run the two-branch protocol with both controlled-SWAP layers replaced by
/// their noisy gate-level decompositions and the target computation
/// replaced by `target` (a gate list with attached noise). Figures of merit
/// are taken against the incoherent baseline: the same noisy target applied
/// once, with no protocol overhead.
pub fn run_noisy_protocol(
    spec: &ProtocolSpec,
    target: &GateCircuit,
    cswap_epsilon: f64,
) -> Result<FiguresOfMerit> {
    if spec.branches() != 2 {
        return Err(Error::InvalidParameter(
            "the gate-level run supports two branches".into(),
        ));
    }
    let m = spec.target_qubits();
    if m > 2 {
        return Err(Error::InvalidParameter(
            "the gate-level run supports gates on at most two qubits".into(),
        ));
    }
    if target.n_qubits() != m {
        return Err(Error::DimensionMismatch(format!(
            "{}-qubit target circuit for an {m}-qubit protocol",
            target.n_qubits()
        )));
    }
    if !matches!(spec.input(), InputMode::ChoiPairs) {
        return Err(Error::InvalidParameter(
            "figures of merit require the pair-input mode".into(),
        ));
    }
    // The circuit must implement the spec's gate; the spec unitary defines
    // the reference output and the auxiliary basis.
    let deviation = target.unitary()?.max_abs_diff(spec.unitary());
    if deviation > 1e-8 {
        return Err(Error::InvalidParameter(format!(
            "target circuit deviates from the spec gate by {deviation:.3e}"
        )));
    }
    protocol::check_register_size(spec)?;

    // Incoherent baseline: the noisy target applied once to the pair input.
    let reference = spec.reference_output()?;
    let pair_register: Vec<usize> = (m..2 * m).collect();
    let baseline = target.apply_embedded(&bell_pairs(m).to_density(), &pair_register)?;
    let f0_cj = state_fidelity(&reference, &baseline).clamp(0.0, 1.0);

    // Protocol run with noisy routing.
    let layout = spec.layout();
    let mut rho = protocol::prepare_initial(spec).to_density();
    let cswap = noisy_cswap_circuit(m, cswap_epsilon)?;
    let mut cswap_register: Vec<usize> = vec![layout.control().start];
    cswap_register.extend(layout.input_active(m));
    cswap_register.extend(layout.aux_active(0, m));

    rho = cswap.apply_embedded(&rho, &cswap_register)?;
    rho = target.apply_embedded(&rho, &layout.input_active(m))?;
    rho = target.apply_embedded(&rho, &layout.aux_active(0, m))?;
    rho = cswap.apply_embedded(&rho, &cswap_register)?;

    let records = protocol::measure_all(spec, &rho)?;
    let selection = spec.default_selection();
    let record = protocol::outcome_by_key(&records, &selection[0]).ok_or_else(|| {
        Error::UnsupportedOutcome("constructive outcome missing from the record list".into())
    })?;
    Ok(assemble_figures(record.probability, record.fidelity, f0_cj))
}
