//! States over labelled multi-qubit registers: pure states, density
//! matrices, register layouts, and projective measurement.
//!
//! Conventions, shared by every module in the crate:
//!
//! - Qubit ordering is big-endian: qubit 0 is the most significant bit of a
//!   basis-state index.
//! - Density matrices carry a trace convention. `Subnormalized` matrices are
//!   first-class: their trace is the probability of the branch they came
//!   from.
//! - Operations are pure functions; values are immutable after construction.

use num_complex::Complex64;

use crate::linalg::{c, CMatrix};
use crate::{Error, Result};

/// Maximum register size for dense density matrices.
pub const QUBIT_CEILING: usize = 13;

// ---------------------------------------------------------------------------
// Target-qubit index bookkeeping
// ---------------------------------------------------------------------------

/// Precomputed index decomposition for a set of target qubits: every basis
/// index of the full register splits into a "base" (non-target bits) plus an
/// "offset" (target bits). Operators embedded on the targets act within each
/// base group.
struct TargetMap {
    k: usize,
    offsets: Vec<usize>,
    bases: Vec<usize>,
}

impl TargetMap {
    fn new(n_qubits: usize, targets: &[usize]) -> Result<Self> {
        let k = targets.len();
        let mut seen = vec![false; n_qubits];
        for &q in targets {
            if q >= n_qubits {
                return Err(Error::DimensionMismatch(format!(
                    "target qubit {q} outside a {n_qubits}-qubit register"
                )));
            }
            if seen[q] {
                return Err(Error::InvalidParameter(format!("duplicate target qubit {q}")));
            }
            seen[q] = true;
        }
        // Bit position of qubit q in a big-endian index.
        let pos: Vec<usize> = targets.iter().map(|&q| n_qubits - 1 - q).collect();
        let mut offsets = Vec::with_capacity(1 << k);
        for a in 0..(1usize << k) {
            let mut off = 0usize;
            for (t, &p) in pos.iter().enumerate() {
                if (a >> (k - 1 - t)) & 1 == 1 {
                    off |= 1 << p;
                }
            }
            offsets.push(off);
        }
        let remaining: Vec<usize> = (0..n_qubits).filter(|q| !seen[*q]).collect();
        let r = remaining.len();
        let mut bases = Vec::with_capacity(1 << r);
        for pattern in 0..(1usize << r) {
            let mut base = 0usize;
            for (u, &q) in remaining.iter().enumerate() {
                if (pattern >> (r - 1 - u)) & 1 == 1 {
                    base |= 1 << (n_qubits - 1 - q);
                }
            }
            bases.push(base);
        }
        Ok(Self { k, offsets, bases })
    }

    fn sub_dim(&self) -> usize {
        1 << self.k
    }
}

// ---------------------------------------------------------------------------
// Pure states
// ---------------------------------------------------------------------------

/// Normalized state vector over `2^n` amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vec<Complex64>,
    n_qubits: usize,
}

impl PureState {
    /// Wrap an amplitude vector; the length must be a power of two and the
    /// Euclidean norm must already be 1 within 1e-12.
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        let n_qubits = qubit_count(amps.len())?;
        let norm = vec_norm(&amps);
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "state vector norm {norm} is not 1"
            )));
        }
        Ok(Self { amps, n_qubits })
    }

    /// Normalize and wrap an amplitude vector.
    pub fn normalized(amps: Vec<Complex64>) -> Result<Self> {
        let n_qubits = qubit_count(amps.len())?;
        let norm = vec_norm(&amps);
        if norm < 1e-12 {
            return Err(Error::InvalidParameter("cannot normalize the zero vector".into()));
        }
        let amps = amps.into_iter().map(|a| a / norm).collect();
        Ok(Self { amps, n_qubits })
    }

    /// Computational basis state `|index>` on `n_qubits`.
    pub fn basis_state(n_qubits: usize, index: usize) -> Self {
        let dim = 1usize << n_qubits;
        assert!(index < dim, "basis index out of range");
        let mut amps = vec![c(0.0); dim];
        amps[index] = c(1.0);
        Self { amps, n_qubits }
    }

    /// `|+>^(x n)`.
    pub fn plus_state(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        let a = c(1.0 / (dim as f64).sqrt());
        Self { amps: vec![a; dim], n_qubits }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitude(&self, index: usize) -> Complex64 {
        self.amps[index]
    }

    pub fn norm(&self) -> f64 {
        vec_norm(&self.amps)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &PureState) -> Complex64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        self.amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Kronecker composition with `self` on the high-order indices.
    pub fn tensor(&self, other: &PureState) -> PureState {
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        PureState {
            amps,
            n_qubits: self.n_qubits + other.n_qubits,
        }
    }

    /// Apply a full-dimension matrix to the state vector.
    pub fn apply_matrix(&self, m: &CMatrix) -> Result<PureState> {
        if m.rows() != self.dim() || m.cols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on a dim-{} state",
                m.rows(),
                m.cols(),
                self.dim()
            )));
        }
        let mut amps = vec![c(0.0); self.dim()];
        for (i, out) in amps.iter_mut().enumerate() {
            for j in 0..self.dim() {
                *out += m.get(i, j) * self.amps[j];
            }
        }
        Ok(PureState { amps, n_qubits: self.n_qubits })
    }

    /// Apply a unitary on the given target qubits, identity elsewhere.
    pub fn apply_unitary(&self, u: &CMatrix, targets: &[usize]) -> Result<PureState> {
        check_embedded_unitary(u, targets)?;
        let tm = TargetMap::new(self.n_qubits, targets)?;
        let mut amps = self.amps.clone();
        let sub = tm.sub_dim();
        let mut x = vec![c(0.0); sub];
        for &base in &tm.bases {
            for (a, slot) in x.iter_mut().enumerate() {
                *slot = amps[base | tm.offsets[a]];
            }
            for b in 0..sub {
                let mut acc = c(0.0);
                for (a, xa) in x.iter().enumerate() {
                    acc += u.get(b, a) * xa;
                }
                amps[base | tm.offsets[b]] = acc;
            }
        }
        Ok(PureState { amps, n_qubits: self.n_qubits })
    }

    /// Outer product `|self><self|` as a normalized density matrix.
    pub fn to_density(&self) -> DensityMatrix {
        let dim = self.dim();
        let mat = CMatrix::from_fn(dim, dim, |i, j| self.amps[i] * self.amps[j].conj());
        DensityMatrix {
            mat,
            n_qubits: self.n_qubits,
            convention: TraceConvention::Normalized,
        }
    }
}

fn qubit_count(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!(
            "dimension {dim} is not a power of two"
        )));
    }
    Ok(dim.trailing_zeros() as usize)
}

fn vec_norm(amps: &[Complex64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn check_embedded_unitary(u: &CMatrix, targets: &[usize]) -> Result<()> {
    let dim = 1usize << targets.len();
    if u.rows() != dim || u.cols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} operator on {} target qubits",
            u.rows(),
            u.cols(),
            targets.len()
        )));
    }
    let deviation = u.unitarity_deviation();
    if deviation > 1e-10 {
        return Err(Error::NotUnitary { deviation });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Density matrices
// ---------------------------------------------------------------------------

/// Trace convention of a [`DensityMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceConvention {
    /// Trace 1: a bona fide state.
    Normalized,
    /// Trace equal to the probability of the branch that produced it.
    Subnormalized,
}

/// Dense density matrix over a multi-qubit register.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: CMatrix,
    n_qubits: usize,
    convention: TraceConvention,
}

/// Validation summary produced by [`DensityMatrix::validate`].
#[derive(Debug, Clone, Copy)]
pub struct StateValidation {
    pub hermiticity_deviation: f64,
    pub min_eigenvalue: f64,
    pub trace: f64,
}

impl StateValidation {
    pub fn is_ok(&self, convention: TraceConvention) -> bool {
        let trace_ok = match convention {
            TraceConvention::Normalized => (self.trace - 1.0).abs() <= 1e-10,
            TraceConvention::Subnormalized => {
                self.trace >= -1e-10 && self.trace <= 1.0 + 1e-10
            }
        };
        self.hermiticity_deviation <= 1e-10 && self.min_eigenvalue >= -1e-10 && trace_ok
    }
}

impl DensityMatrix {
    /// Wrap a square matrix of dimension `2^n`. Structural checks only; use
    /// [`DensityMatrix::validate`] for the (opt-in) physical checks.
    pub fn new(mat: CMatrix, convention: TraceConvention) -> Result<Self> {
        if mat.rows() != mat.cols() {
            return Err(Error::DimensionMismatch("density matrix must be square".into()));
        }
        let n_qubits = qubit_count(mat.rows())?;
        Ok(Self { mat, n_qubits, convention })
    }

    /// The maximally mixed state `I / 2^n`.
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let dim = 1usize << n_qubits;
        Self {
            mat: CMatrix::identity(dim).scale_real(1.0 / dim as f64),
            n_qubits,
            convention: TraceConvention::Normalized,
        }
    }

    /// The zero matrix, used for zero-probability branches.
    pub fn zero(n_qubits: usize) -> Self {
        Self {
            mat: CMatrix::zeros(1 << n_qubits, 1 << n_qubits),
            n_qubits,
            convention: TraceConvention::Subnormalized,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn convention(&self) -> TraceConvention {
        self.convention
    }

    pub fn trace(&self) -> f64 {
        self.mat.trace().re
    }

    /// Kronecker composition with `self` on the high-order indices. The
    /// result is normalized only if both factors are.
    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        let convention = if self.convention == TraceConvention::Normalized
            && other.convention == TraceConvention::Normalized
        {
            TraceConvention::Normalized
        } else {
            TraceConvention::Subnormalized
        };
        DensityMatrix {
            mat: self.mat.kron(&other.mat),
            n_qubits: self.n_qubits + other.n_qubits,
            convention,
        }
    }

    /// `A rho A^dagger` with `A` embedded on the target qubits. No unitarity
    /// requirement; this is the primitive behind both unitary conjugation
    /// and Kraus terms.
    pub fn conjugate_by(&self, op: &CMatrix, targets: &[usize]) -> Result<DensityMatrix> {
        let dim = 1usize << targets.len();
        if op.rows() != dim || op.cols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} operator on {} target qubits",
                op.rows(),
                op.cols(),
                targets.len()
            )));
        }
        let tm = TargetMap::new(self.n_qubits, targets)?;
        let full = self.dim();
        let sub = tm.sub_dim();
        // Left pass: rho1 = A~ rho.
        let mut rho1 = CMatrix::zeros(full, full);
        let mut x = vec![c(0.0); sub];
        for &base in &tm.bases {
            for j in 0..full {
                for (a, slot) in x.iter_mut().enumerate() {
                    *slot = self.mat.get(base | tm.offsets[a], j);
                }
                for b in 0..sub {
                    let mut acc = c(0.0);
                    for (a, xa) in x.iter().enumerate() {
                        acc += op.get(b, a) * xa;
                    }
                    rho1.set(base | tm.offsets[b], j, acc);
                }
            }
        }
        // Right pass: rho2 = rho1 A~^dagger.
        let mut rho2 = CMatrix::zeros(full, full);
        for i in 0..full {
            for &base in &tm.bases {
                for (a, slot) in x.iter_mut().enumerate() {
                    *slot = rho1.get(i, base | tm.offsets[a]);
                }
                for b in 0..sub {
                    let mut acc = c(0.0);
                    for (a, xa) in x.iter().enumerate() {
                        acc += xa * op.get(b, a).conj();
                    }
                    rho2.set(i, base | tm.offsets[b], acc);
                }
            }
        }
        Ok(DensityMatrix {
            mat: rho2,
            n_qubits: self.n_qubits,
            convention: self.convention,
        })
    }

    /// `U rho U^dagger` with `U` embedded on the target qubits; `U` must be
    /// unitary within 1e-10.
    pub fn apply_unitary(&self, u: &CMatrix, targets: &[usize]) -> Result<DensityMatrix> {
        check_embedded_unitary(u, targets)?;
        self.conjugate_by(u, targets)
    }

    /// Conjugate by a basis permutation: returns `P rho P^dagger` where
    /// `P |x> = |perm[x]>`.
    pub fn permute_basis(&self, perm: &[usize]) -> DensityMatrix {
        assert_eq!(perm.len(), self.dim(), "permutation length mismatch");
        let dim = self.dim();
        let mut mat = CMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                mat.set(perm[i], perm[j], self.mat.get(i, j));
            }
        }
        DensityMatrix {
            mat,
            n_qubits: self.n_qubits,
            convention: self.convention,
        }
    }

    /// Trace out every qubit not listed in `keep`. The kept qubits appear in
    /// ascending original order; the trace is preserved.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityMatrix> {
        let mut keep_sorted = keep.to_vec();
        keep_sorted.sort_unstable();
        keep_sorted.dedup();
        if keep_sorted.len() != keep.len() {
            return Err(Error::InvalidParameter("duplicate qubit in keep list".into()));
        }
        if keep_sorted.iter().any(|&q| q >= self.n_qubits) {
            return Err(Error::DimensionMismatch("keep qubit out of range".into()));
        }
        let traced: Vec<usize> =
            (0..self.n_qubits).filter(|q| !keep_sorted.contains(q)).collect();
        let tm = TargetMap::new(self.n_qubits, &traced)?;
        let kept_dim = tm.bases.len();
        let mut mat = CMatrix::zeros(kept_dim, kept_dim);
        for (r, &br) in tm.bases.iter().enumerate() {
            for (s, &bs) in tm.bases.iter().enumerate() {
                let mut acc = c(0.0);
                for &off in &tm.offsets {
                    acc += self.mat.get(br | off, bs | off);
                }
                mat.set(r, s, acc);
            }
        }
        Ok(DensityMatrix {
            mat,
            n_qubits: keep_sorted.len(),
            convention: self.convention,
        })
    }

    /// Project the target qubits onto `onto`. Returns the outcome
    /// probability and the subnormalized conditional state on the remaining
    /// qubits (trace equal to the probability). A zero-probability outcome
    /// yields the zero matrix.
    pub fn project(&self, onto: &PureState, targets: &[usize]) -> Result<(f64, DensityMatrix)> {
        if onto.n_qubits() != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "projector on {} qubits against {} targets",
                onto.n_qubits(),
                targets.len()
            )));
        }
        let tm = TargetMap::new(self.n_qubits, targets)?;
        let rem_dim = tm.bases.len();
        let sub = tm.sub_dim();
        let mut mat = CMatrix::zeros(rem_dim, rem_dim);
        for (r, &br) in tm.bases.iter().enumerate() {
            for (s, &bs) in tm.bases.iter().enumerate() {
                let mut acc = c(0.0);
                for a in 0..sub {
                    let pa = onto.amplitude(a).conj();
                    if pa.norm_sqr() == 0.0 {
                        continue;
                    }
                    for b in 0..sub {
                        let pb = onto.amplitude(b);
                        if pb.norm_sqr() == 0.0 {
                            continue;
                        }
                        acc += pa * self.mat.get(br | tm.offsets[a], bs | tm.offsets[b]) * pb;
                    }
                }
                mat.set(r, s, acc);
            }
        }
        let conditional = DensityMatrix {
            mat,
            n_qubits: self.n_qubits - targets.len(),
            convention: TraceConvention::Subnormalized,
        };
        let probability = conditional.trace().max(0.0);
        Ok((probability, conditional))
    }

    /// Rescale to trace 1. Returns the zero-trace matrix unchanged.
    pub fn into_normalized(self) -> DensityMatrix {
        let t = self.trace();
        if t <= 1e-300 {
            return self;
        }
        DensityMatrix {
            mat: self.mat.scale_real(1.0 / t),
            n_qubits: self.n_qubits,
            convention: TraceConvention::Normalized,
        }
    }

    pub fn scale(&self, factor: f64) -> DensityMatrix {
        DensityMatrix {
            mat: self.mat.scale_real(factor),
            n_qubits: self.n_qubits,
            convention: TraceConvention::Subnormalized,
        }
    }

    pub fn add(&self, other: &DensityMatrix) -> DensityMatrix {
        assert_eq!(self.n_qubits, other.n_qubits);
        DensityMatrix {
            mat: self.mat.add(&other.mat),
            n_qubits: self.n_qubits,
            convention: TraceConvention::Subnormalized,
        }
    }

    /// Opt-in physical validation (Hermiticity, positivity, trace). The
    /// eigenvalue check runs the Jacobi solver, so keep it out of sweeps.
    pub fn validate(&self) -> StateValidation {
        StateValidation {
            hermiticity_deviation: self.mat.hermiticity_deviation(),
            min_eigenvalue: self.mat.min_eigenvalue(),
            trace: self.trace(),
        }
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.mat.max_abs_diff(other.matrix())
    }
}

// ---------------------------------------------------------------------------
// Free functions
// ---------------------------------------------------------------------------

/// Embed an operator on the target qubits of an `n_qubits` register,
/// identity elsewhere, as a full `2^n x 2^n` matrix. Intended for small
/// registers; large registers should go through
/// [`DensityMatrix::conjugate_by`] instead.
pub fn embed_operator(op: &CMatrix, n_qubits: usize, targets: &[usize]) -> Result<CMatrix> {
    let dim = 1usize << targets.len();
    if op.rows() != dim || op.cols() != dim {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} operator on {} target qubits",
            op.rows(),
            op.cols(),
            targets.len()
        )));
    }
    let tm = TargetMap::new(n_qubits, targets)?;
    let mut full = CMatrix::zeros(1 << n_qubits, 1 << n_qubits);
    for &base in &tm.bases {
        for a in 0..tm.sub_dim() {
            for b in 0..tm.sub_dim() {
                full.set(base | tm.offsets[a], base | tm.offsets[b], op.get(a, b));
            }
        }
    }
    Ok(full)
}

/// `m` maximally entangled qubit pairs, with pair `k` on qubits `(k, m+k)`:
/// the first half is the reference register and the second half forms a
/// contiguous input register.
pub fn bell_pairs(m: usize) -> PureState {
    assert!(m >= 1, "bell_pairs needs at least one pair");
    let half = 1usize << m;
    let amp = c(1.0 / (half as f64).sqrt());
    let mut amps = vec![c(0.0); half * half];
    for x in 0..half {
        amps[x * half + x] = amp;
    }
    PureState { amps, n_qubits: 2 * m }
}

/// `<psi| rho |psi>`.
pub fn state_fidelity(psi: &PureState, rho: &DensityMatrix) -> f64 {
    assert_eq!(psi.dim(), rho.dim(), "state fidelity dimension mismatch");
    let mut acc = c(0.0);
    for i in 0..psi.dim() {
        let a = psi.amplitude(i).conj();
        if a.norm_sqr() == 0.0 {
            continue;
        }
        for j in 0..psi.dim() {
            acc += a * rho.matrix().get(i, j) * psi.amplitude(j);
        }
    }
    acc.re
}

// ---------------------------------------------------------------------------
// Register layout
// ---------------------------------------------------------------------------

/// Contiguous qubit ranges for the protocol registers: control, input "a",
/// then the auxiliary registers in branch order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegisterLayout {
    control_qubits: usize,
    input_qubits: usize,
    aux_qubits: usize,
    aux_count: usize,
}

impl RegisterLayout {
    pub fn new(
        control_qubits: usize,
        input_qubits: usize,
        aux_count: usize,
        aux_qubits: usize,
    ) -> Self {
        Self {
            control_qubits,
            input_qubits,
            aux_qubits,
            aux_count,
        }
    }

    pub fn total_qubits(&self) -> usize {
        self.control_qubits + self.input_qubits + self.aux_count * self.aux_qubits
    }

    pub fn control(&self) -> std::ops::Range<usize> {
        0..self.control_qubits
    }

    pub fn input(&self) -> std::ops::Range<usize> {
        self.control_qubits..self.control_qubits + self.input_qubits
    }

    pub fn auxiliary(&self, k: usize) -> std::ops::Range<usize> {
        assert!(k < self.aux_count, "auxiliary index out of range");
        let start = self.control_qubits + self.input_qubits + k * self.aux_qubits;
        start..start + self.aux_qubits
    }

    pub fn aux_count(&self) -> usize {
        self.aux_count
    }

    /// Last `m` qubits of the input register (the half the protocol acts on
    /// when the input is doubled).
    pub fn input_active(&self, m: usize) -> Vec<usize> {
        let r = self.input();
        (r.end - m..r.end).collect()
    }

    /// Last `m` qubits of auxiliary register `k`.
    pub fn aux_active(&self, k: usize, m: usize) -> Vec<usize> {
        let r = self.auxiliary(k);
        (r.end - m..r.end).collect()
    }

    /// Ranges are disjoint and cover the register by construction; this
    /// re-derives the cover as a defence against future edits.
    pub fn check_cover(&self) -> bool {
        let mut covered = vec![false; self.total_qubits()];
        let mut mark = |range: std::ops::Range<usize>| {
            for q in range {
                if covered[q] {
                    return false;
                }
                covered[q] = true;
            }
            true
        };
        if !mark(self.control()) || !mark(self.input()) {
            return false;
        }
        for k in 0..self.aux_count {
            if !mark(self.auxiliary(k)) {
                return false;
            }
        }
        covered.into_iter().all(|b| b)
    }
}

// ---------------------------------------------------------------------------
// Measurement bases
// ---------------------------------------------------------------------------

/// Ordered orthonormal (possibly partial) measurement basis on a register.
#[derive(Debug, Clone)]
pub struct MeasurementBasis {
    elements: Vec<PureState>,
    n_qubits: usize,
    complete: bool,
}

impl MeasurementBasis {
    /// Validate orthonormality (inner products within 1e-10) and wrap. The
    /// basis is flagged complete when it has `2^n` elements.
    pub fn new(elements: Vec<PureState>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty measurement basis".into()))?;
        let n_qubits = first.n_qubits();
        let dim = first.dim();
        for e in &elements {
            if e.dim() != dim {
                return Err(Error::DimensionMismatch("mixed basis dimensions".into()));
            }
            if (e.norm() - 1.0).abs() > 1e-10 {
                return Err(Error::InvalidParameter("basis element is not normalized".into()));
            }
        }
        for i in 0..elements.len() {
            for j in (i + 1)..elements.len() {
                if elements[i].inner(&elements[j]).norm() > 1e-10 {
                    return Err(Error::InvalidParameter(format!(
                        "basis elements {i} and {j} are not orthogonal"
                    )));
                }
            }
        }
        if elements.len() > dim {
            return Err(Error::InvalidParameter("more basis elements than the dimension".into()));
        }
        let complete = elements.len() == dim;
        Ok(Self { elements, n_qubits, complete })
    }

    /// Complete `first` to an orthonormal basis by Gram-Schmidt over the
    /// computational basis, deterministically.
    pub fn complete_from(first: PureState) -> Result<Self> {
        let dim = first.dim();
        let n_qubits = first.n_qubits();
        let mut collected: Vec<Vec<Complex64>> = vec![first.amplitudes().to_vec()];
        for candidate in 0..dim {
            if collected.len() == dim {
                break;
            }
            let mut v: Vec<Complex64> = (0..dim)
                .map(|i| if i == candidate { c(1.0) } else { c(0.0) })
                .collect();
            for basis_vec in &collected {
                let overlap: Complex64 = basis_vec
                    .iter()
                    .zip(v.iter())
                    .map(|(b, x)| b.conj() * x)
                    .sum();
                for (x, b) in v.iter_mut().zip(basis_vec.iter()) {
                    *x -= overlap * b;
                }
            }
            let norm = vec_norm(&v);
            if norm > 1e-8 {
                for x in v.iter_mut() {
                    *x /= norm;
                }
                collected.push(v);
            }
        }
        debug_assert_eq!(collected.len(), dim);
        let elements = collected
            .into_iter()
            .map(|amps| PureState { amps, n_qubits })
            .collect();
        Self::new(elements)
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn element(&self, i: usize) -> &PureState {
        &self.elements[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PureState> {
        self.elements.iter()
    }
}
