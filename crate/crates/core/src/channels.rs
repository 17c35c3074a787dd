//! Kraus channels: construction, validation, composition, application, and
//! the no-error weight.
//!
//! Channels follow the convention that the first operator is the
//! identity-proportional "no error" component `sqrt(p_ne) I` whenever one
//! exists; the standard constructors record that weight in
//! `declared_p_ne`. For channels without an identity-proportional operator
//! (amplitude damping, arbitrary JSON-loaded channels) the no-error weight
//! falls back to the Kraus-gauge-invariant value `sum_j |Tr K_j|^2 / dim^2`,
//! the channel's entanglement fidelity with the identity.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{c, CMatrix};
use crate::qstate::DensityMatrix;
use crate::{gates, Error, Result};

/// Operators smaller than this (elementwise) are dropped at construction.
const ZERO_OP_TOLERANCE: f64 = 1e-15;

/// Guard against exponential operator growth in [`KrausChannel::tensor_power`].
const TENSOR_POWER_GUARD: usize = 1_000_000;

/// A completely positive trace-preserving map in Kraus form.
#[derive(Debug, Clone)]
pub struct KrausChannel {
    ops: Vec<CMatrix>,
    n_qubits: usize,
    declared_p_ne: Option<f64>,
}

/// Validation summary produced by [`KrausChannel::validate`].
#[derive(Debug, Clone, Copy)]
pub struct ChannelValidation {
    /// Max elementwise deviation of `sum_j K_j^dagger K_j` from the identity.
    pub completeness_deviation: f64,
    /// Deviation of `operators[0]` from `sqrt(declared_p_ne) I`, when a
    /// no-error weight is declared.
    pub convention_deviation: Option<f64>,
}

impl ChannelValidation {
    pub fn is_ok(&self) -> bool {
        self.completeness_deviation <= 1e-10
            && self.convention_deviation.is_none_or(|d| d <= 1e-12)
    }
}

impl KrausChannel {
    /// Wrap a Kraus operator list. Zero operators are dropped, completeness
    /// is enforced within 1e-10, and no no-error weight is declared.
    pub fn new(ops: Vec<CMatrix>) -> Result<Self> {
        Self::assemble(ops, None)
    }

    fn assemble(ops: Vec<CMatrix>, declared_p_ne: Option<f64>) -> Result<Self> {
        let kept: Vec<CMatrix> = ops
            .into_iter()
            .filter(|op| op.max_abs() > ZERO_OP_TOLERANCE)
            .collect();
        let first = kept
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty Kraus operator list".into()))?;
        if first.rows() != first.cols() || !first.rows().is_power_of_two() {
            return Err(Error::DimensionMismatch(
                "Kraus operators must be square with power-of-two dimension".into(),
            ));
        }
        let dim = first.rows();
        if kept.iter().any(|op| op.rows() != dim || op.cols() != dim) {
            return Err(Error::DimensionMismatch("mixed Kraus operator dimensions".into()));
        }
        let channel = Self {
            ops: kept,
            n_qubits: dim.trailing_zeros() as usize,
            declared_p_ne,
        };
        let report = channel.validate();
        if report.completeness_deviation > 1e-10 {
            return Err(Error::IncompleteKraus {
                deviation: report.completeness_deviation,
            });
        }
        Ok(channel)
    }

    /// The identity channel on `n_qubits`.
    pub fn identity(n_qubits: usize) -> Self {
        Self {
            ops: vec![CMatrix::identity(1 << n_qubits)],
            n_qubits,
            declared_p_ne: Some(1.0),
        }
    }

    /// Single-qubit dephasing: `{sqrt(p_ne) I, sqrt(1 - p_ne) Z}`.
    pub fn dephasing(p_ne: f64) -> Result<Self> {
        check_probability("p_ne", p_ne)?;
        Self::assemble(
            vec![
                gates::identity(1).scale_real(p_ne.sqrt()),
                gates::pauli_z().scale_real((1.0 - p_ne).sqrt()),
            ],
            Some(p_ne),
        )
    }

    /// Single-qubit bit flip: `{sqrt(p_ne) I, sqrt(1 - p_ne) X}`.
    pub fn bit_flip(p_ne: f64) -> Result<Self> {
        check_probability("p_ne", p_ne)?;
        Self::assemble(
            vec![
                gates::identity(1).scale_real(p_ne.sqrt()),
                gates::pauli_x().scale_real((1.0 - p_ne).sqrt()),
            ],
            Some(p_ne),
        )
    }

    /// Single-qubit depolarizing with the error weight split evenly over
    /// X, Y, Z.
    pub fn depolarizing(p_ne: f64) -> Result<Self> {
        check_probability("p_ne", p_ne)?;
        let s = ((1.0 - p_ne) / 3.0).sqrt();
        Self::assemble(
            vec![
                gates::identity(1).scale_real(p_ne.sqrt()),
                gates::pauli_x().scale_real(s),
                gates::pauli_y().scale_real(s),
                gates::pauli_z().scale_real(s),
            ],
            Some(p_ne),
        )
    }

    /// Two-qubit depolarizing: weight `(1 - p_ne)/15` on each of the 15
    /// non-identity two-qubit Pauli strings.
    pub fn two_qubit_depolarizing(p_ne: f64) -> Result<Self> {
        check_probability("p_ne", p_ne)?;
        let mut weights = vec![(1.0 - p_ne) / 15.0; 16];
        weights[0] = p_ne;
        Self::pauli_channel(2, &weights)
    }

    /// Amplitude damping with decay probability `gamma`. No no-error weight
    /// is declared; [`KrausChannel::no_error_probability`] falls back to the
    /// gauge-invariant formula.
    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        check_probability("gamma", gamma)?;
        let k0 = CMatrix::from_rows(&[
            vec![c(1.0), c(0.0)],
            vec![c(0.0), c((1.0 - gamma).sqrt())],
        ]);
        let k1 = CMatrix::from_rows(&[vec![c(0.0), c(gamma.sqrt())], vec![c(0.0), c(0.0)]]);
        Self::assemble(vec![k0, k1], None)
    }

    /// Pauli channel from weights over the 4^n Pauli strings (identity
    /// first, [`gates::pauli_strings`] order). Weights must sum to 1.
    pub fn pauli_channel(n_qubits: usize, weights: &[f64]) -> Result<Self> {
        let count = 1usize << (2 * n_qubits);
        if weights.len() != count {
            return Err(Error::InvalidParameter(format!(
                "expected {count} Pauli weights, got {}",
                weights.len()
            )));
        }
        if weights.iter().any(|w| *w < -1e-12) {
            return Err(Error::InvalidParameter("negative Pauli weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "Pauli weights sum to {total}, expected 1"
            )));
        }
        let strings = gates::pauli_strings(n_qubits);
        let ops: Vec<CMatrix> = strings
            .iter()
            .zip(weights.iter())
            .map(|(p, w)| p.scale_real(w.max(0.0).sqrt()))
            .collect();
        let declared = if weights[0] > ZERO_OP_TOLERANCE {
            Some(weights[0])
        } else {
            None
        };
        Self::assemble(ops, declared)
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.ops
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn declared_p_ne(&self) -> Option<f64> {
        self.declared_p_ne
    }

    /// Completeness and convention report; never fails.
    pub fn validate(&self) -> ChannelValidation {
        let dim = self.dim();
        let mut sum = CMatrix::zeros(dim, dim);
        for op in &self.ops {
            sum = sum.add(&op.dagger().mul(op));
        }
        let completeness_deviation = sum.max_abs_diff(&CMatrix::identity(dim));
        let convention_deviation = self.declared_p_ne.map(|p| {
            let expected = CMatrix::identity(dim).scale_real(p.sqrt());
            self.ops[0].max_abs_diff(&expected)
        });
        ChannelValidation {
            completeness_deviation,
            convention_deviation,
        }
    }

    /// The m-fold independent product: all `|ops|^m` tensor combinations in
    /// lexicographic order, so operator 0 stays the all-first combination.
    pub fn tensor_power(&self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("tensor power of zero copies".into()));
        }
        let count = self.ops.len().checked_pow(m as u32).unwrap_or(usize::MAX);
        if count > TENSOR_POWER_GUARD {
            return Err(Error::OperatorOverflow {
                count,
                limit: TENSOR_POWER_GUARD,
            });
        }
        let mut ops: Vec<CMatrix> = vec![CMatrix::identity(1)];
        for _ in 0..m {
            let mut next = Vec::with_capacity(ops.len() * self.ops.len());
            for acc in &ops {
                for op in &self.ops {
                    next.push(acc.kron(op));
                }
            }
            ops = next;
        }
        let declared = self.declared_p_ne.map(|p| p.powi(m as i32));
        Self::assemble(ops, declared)
    }

    /// Pad the channel with identity action on `pad_qubits` high-order
    /// qubits: `{I_pad (x) K_j}`.
    pub fn extend_identity(&self, pad_qubits: usize) -> Self {
        if pad_qubits == 0 {
            return self.clone();
        }
        let pad = CMatrix::identity(1 << pad_qubits);
        let ops = self.ops.iter().map(|op| pad.kron(op)).collect();
        Self {
            ops,
            n_qubits: self.n_qubits + pad_qubits,
            declared_p_ne: self.declared_p_ne,
        }
    }

    /// Apply the channel to the target qubits: `sum_j K~_j rho K~_j^dagger`.
    pub fn apply(&self, rho: &DensityMatrix, targets: &[usize]) -> Result<DensityMatrix> {
        if targets.len() != self.n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "{}-qubit channel on {} targets",
                self.n_qubits,
                targets.len()
            )));
        }
        let mut acc: Option<CMatrix> = None;
        for op in &self.ops {
            let term = rho.conjugate_by(op, targets)?;
            acc = Some(match acc {
                None => term.matrix().clone(),
                Some(m) => m.add(term.matrix()),
            });
        }
        DensityMatrix::new(acc.expect("channel has operators"), rho.convention())
    }

    /// No-error probability: the declared weight when set, otherwise the
    /// gauge-invariant `sum_j |Tr K_j|^2 / dim^2`. The two coincide whenever
    /// every non-identity operator is traceless.
    pub fn no_error_probability(&self) -> f64 {
        if let Some(p) = self.declared_p_ne {
            return p;
        }
        let dim = self.dim() as f64;
        self.ops
            .iter()
            .map(|op| op.trace().norm_sqr())
            .sum::<f64>()
            / (dim * dim)
    }

    /// Unitarily remix the operator list: `K'_i = sum_j V[i][j] K_j`. The
    /// declared no-error weight is dropped since operator 0 no longer obeys
    /// the convention.
    pub fn remix(&self, v: &CMatrix) -> Result<Self> {
        if v.rows() != self.ops.len() || v.cols() != self.ops.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} remix matrix for {} operators",
                v.rows(),
                v.cols(),
                self.ops.len()
            )));
        }
        if !v.is_unitary(1e-10) {
            return Err(Error::NotUnitary {
                deviation: v.unitarity_deviation(),
            });
        }
        let dim = self.dim();
        let mut ops = Vec::with_capacity(self.ops.len());
        for i in 0..self.ops.len() {
            let mut acc = CMatrix::zeros(dim, dim);
            for (j, op) in self.ops.iter().enumerate() {
                acc = acc.add(&op.scale(v.get(i, j)));
            }
            ops.push(acc);
        }
        Self::assemble(ops, None)
    }

    /// Fix the Kraus gauge so that operator 0 carries the full trace
    /// component (it equals `sqrt(p_ne) I` whenever the channel admits an
    /// identity-proportional operator) and every other operator is
    /// traceless.
    pub fn canonicalized(&self) -> Self {
        let traces: Vec<Complex64> = self.ops.iter().map(|op| op.trace()).collect();
        let norm = traces.iter().map(|t| t.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 || self.ops.len() == 1 {
            return self.clone();
        }
        // Unitary with first row proportional to conj(traces); remaining
        // rows completed by Gram-Schmidt over the standard basis.
        let l = self.ops.len();
        let first: Vec<Complex64> = traces.iter().map(|t| t.conj() / norm).collect();
        let mut rows: Vec<Vec<Complex64>> = vec![first];
        for candidate in 0..l {
            if rows.len() == l {
                break;
            }
            let mut v: Vec<Complex64> = (0..l)
                .map(|i| if i == candidate { c(1.0) } else { c(0.0) })
                .collect();
            for row in &rows {
                let overlap: Complex64 =
                    row.iter().zip(v.iter()).map(|(r, x)| r.conj() * x).sum();
                for (x, r) in v.iter_mut().zip(row.iter()) {
                    *x -= overlap * r;
                }
            }
            let vnorm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            if vnorm > 1e-8 {
                for x in v.iter_mut() {
                    *x /= vnorm;
                }
                rows.push(v);
            }
        }
        let v = CMatrix::from_rows(&rows);
        let mut remixed = self.remix(&v).expect("gauge remix is unitary");
        // If the leading operator is identity-proportional, the declared
        // convention holds again.
        let dim = self.dim() as f64;
        let p = remixed.ops[0].trace().norm_sqr() / (dim * dim);
        let expected = CMatrix::identity(self.dim()).scale_real(p.sqrt());
        // Absorb a global phase before comparing.
        let lead_trace = remixed.ops[0].trace();
        if lead_trace.norm() > 1e-12 {
            let phase = lead_trace / c(lead_trace.norm());
            remixed.ops[0] = remixed.ops[0].scale(phase.conj());
            // Keep the map unchanged: a phase on a single Kraus operator is
            // immaterial, no compensation needed elsewhere.
        }
        if remixed.ops[0].max_abs_diff(&expected) <= 1e-12 {
            remixed.declared_p_ne = Some(p);
        }
        remixed
    }

    /// Load a channel from the JSON document
    /// `{"n_qubits": k, "operators": [[[[re, im], ...], ...], ...]}`,
    /// validating completeness.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let doc: ChannelDocument = serde_json::from_str(text)?;
        doc.into_channel()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let doc = ChannelDocument::from_channel(self);
        serde_json::to_string_pretty(&doc).expect("channel document serializes")
    }
}

fn check_probability(name: &str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) || !value.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "{name} = {value} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Perfect unitary followed by a noise channel: the incoherent reference
/// map.
#[derive(Debug, Clone)]
pub struct NoisyGate {
    unitary: CMatrix,
    channel: KrausChannel,
}

impl NoisyGate {
    pub fn new(unitary: CMatrix, channel: KrausChannel) -> Result<Self> {
        if unitary.rows() != channel.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} unitary with a {}-qubit channel",
                unitary.rows(),
                unitary.cols(),
                channel.n_qubits()
            )));
        }
        if !unitary.is_unitary(1e-10) {
            return Err(Error::NotUnitary {
                deviation: unitary.unitarity_deviation(),
            });
        }
        Ok(Self { unitary, channel })
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub fn channel(&self) -> &KrausChannel {
        &self.channel
    }

    /// `rho -> channel(U rho U^dagger)` on the target qubits.
    pub fn apply(&self, rho: &DensityMatrix, targets: &[usize]) -> Result<DensityMatrix> {
        let rotated = rho.apply_unitary(&self.unitary, targets)?;
        self.channel.apply(&rotated, targets)
    }
}

// ---------------------------------------------------------------------------
// JSON document
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct ChannelDocument {
    n_qubits: usize,
    operators: Vec<Vec<Vec<[f64; 2]>>>,
}

impl ChannelDocument {
    pub(crate) fn into_channel(self) -> Result<KrausChannel> {
        let dim = 1usize << self.n_qubits;
        let mut ops = Vec::with_capacity(self.operators.len());
        for (idx, rows) in self.operators.iter().enumerate() {
            if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                return Err(Error::Parse(format!(
                    "operator {idx} is not {dim}x{dim}"
                )));
            }
            let converted: Vec<Vec<Complex64>> = rows
                .iter()
                .map(|row| row.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
                .collect();
            ops.push(CMatrix::from_rows(&converted));
        }
        KrausChannel::new(ops)
    }

    pub(crate) fn from_channel(channel: &KrausChannel) -> Self {
        let dim = channel.dim();
        let operators = channel
            .operators()
            .iter()
            .map(|op| {
                (0..dim)
                    .map(|i| {
                        (0..dim)
                            .map(|j| {
                                let v = op.get(i, j);
                                [v.re, v.im]
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            n_qubits: channel.n_qubits(),
            operators,
        }
    }
}
