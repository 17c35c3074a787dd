//! The superposed-application protocol: registers, both execution engines,
//! overlap metrics, and figures of merit.
//!
//! One run applies a noisy gate `U` coherently across the input register and
//! `d - 1` auxiliary registers. A control register prepared in the uniform
//! superposition routes the input through one of `d` branches via
//! controlled-SWAPs before and after the gate layer; measuring the control
//! in the Fourier-conjugate basis and each auxiliary in a chosen basis makes
//! the branch noise interfere. The module provides:
//!
//! - [`run_bruteforce`]: exact dense simulation of the full register.
//! - [`closed_form_d2`] / [`closed_form_general`]: per-outcome conditional
//!   states assembled from branch overlaps, certified against the
//!   brute-force engine by the test suite.
//! - [`omega_metrics`], [`choi_auxiliary`]: auxiliary-sensitivity metrics
//!   and the Bell-pair auxiliary that maximizes them.
//! - [`cj_fidelity`], [`figures_of_merit`], [`analytic_figures`]: the
//!   process-fidelity bookkeeping used by sweeps.

use num_complex::Complex64;

use crate::channels::{KrausChannel, NoisyGate};
use crate::linalg::{c, CMatrix};
use crate::qstate::{
    bell_pairs, embed_operator, state_fidelity, DensityMatrix, MeasurementBasis, PureState,
    RegisterLayout, QUBIT_CEILING,
};
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Protocol description
// ---------------------------------------------------------------------------

/// Auxiliary register preparation.
#[derive(Debug, Clone)]
pub enum Auxiliary {
    /// A fixed pure state on `m` qubits; the default measurement basis is
    /// the orthonormal completion of `U |phi_0>` so the first element gives
    /// `omega_2 = 1` whenever that projection is available.
    State(PureState),
    /// Half of a maximally entangled pair per auxiliary (2m qubits), with a
    /// Bell-type final measurement. Forces `omega_1 = 1` for Pauli noise.
    Choi,
}

/// Input register preparation.
#[derive(Debug, Clone)]
pub enum InputMode {
    /// An explicit pure input on `m` qubits.
    Explicit(PureState),
    /// Entangled-pair input: the register doubles to `2m` qubits and the
    /// protocol acts on the second half, leaving the first half as a
    /// reference for process-fidelity estimates.
    ChoiPairs,
}

/// Post-selection policy of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Keep the constructive control/auxiliary outcome only.
    Probabilistic,
    /// Keep outcomes up to a probability threshold and correct each one.
    QuasiDeterministic,
}

/// Full description of one protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolSpec {
    unitary: CMatrix,
    channel: KrausChannel,
    branches: usize,
    auxiliary: Auxiliary,
    input: InputMode,
    variant: Variant,
    aux_basis: MeasurementBasis,
    m: usize,
}

impl ProtocolSpec {
    pub fn new(
        unitary: CMatrix,
        channel: KrausChannel,
        branches: usize,
        auxiliary: Auxiliary,
        input: InputMode,
        variant: Variant,
    ) -> Result<Self> {
        if branches == 0 {
            return Err(Error::InvalidParameter("branch count must be at least 1".into()));
        }
        if unitary.rows() != unitary.cols() || !unitary.rows().is_power_of_two() {
            return Err(Error::DimensionMismatch(
                "gate must be square with power-of-two dimension".into(),
            ));
        }
        if !unitary.is_unitary(1e-10) {
            return Err(Error::NotUnitary {
                deviation: unitary.unitarity_deviation(),
            });
        }
        let m = unitary.rows().trailing_zeros() as usize;
        if m == 0 {
            return Err(Error::InvalidParameter("gate must act on at least one qubit".into()));
        }
        if channel.n_qubits() != m {
            return Err(Error::DimensionMismatch(format!(
                "{}-qubit channel with an {m}-qubit gate",
                channel.n_qubits()
            )));
        }
        if let InputMode::Explicit(psi) = &input {
            if psi.n_qubits() != m {
                return Err(Error::DimensionMismatch(format!(
                    "{}-qubit input for an {m}-qubit gate",
                    psi.n_qubits()
                )));
            }
        }
        let aux_basis = match &auxiliary {
            Auxiliary::State(phi0) => {
                if phi0.n_qubits() != m {
                    return Err(Error::DimensionMismatch(format!(
                        "{}-qubit auxiliary for an {m}-qubit gate",
                        phi0.n_qubits()
                    )));
                }
                let phi_f = phi0.apply_matrix(&unitary)?;
                MeasurementBasis::complete_from(phi_f)?
            }
            Auxiliary::Choi => choi_auxiliary(&unitary, m)?.1,
        };
        Ok(Self {
            unitary,
            channel,
            branches,
            auxiliary,
            input,
            variant,
            aux_basis,
            m,
        })
    }

    /// Replace the auxiliary measurement basis. The first element is the
    /// post-selected projection.
    pub fn with_aux_basis(mut self, basis: MeasurementBasis) -> Result<Self> {
        if basis.n_qubits() != self.aux_qubits() {
            return Err(Error::DimensionMismatch(format!(
                "{}-qubit basis for a {}-qubit auxiliary register",
                basis.n_qubits(),
                self.aux_qubits()
            )));
        }
        if !basis.is_complete() {
            return Err(Error::InvalidParameter(
                "auxiliary measurement basis must be complete".into(),
            ));
        }
        self.aux_basis = basis;
        Ok(self)
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub fn channel(&self) -> &KrausChannel {
        &self.channel
    }

    pub fn branches(&self) -> usize {
        self.branches
    }

    pub fn auxiliary(&self) -> &Auxiliary {
        &self.auxiliary
    }

    pub fn input(&self) -> &InputMode {
        &self.input
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn aux_basis(&self) -> &MeasurementBasis {
        &self.aux_basis
    }

    /// Gate width in qubits.
    pub fn target_qubits(&self) -> usize {
        self.m
    }

    pub fn control_qubits(&self) -> usize {
        if self.branches == 1 {
            0
        } else {
            (usize::BITS - (self.branches - 1).leading_zeros()) as usize
        }
    }

    pub fn input_qubits(&self) -> usize {
        match self.input {
            InputMode::Explicit(_) => self.m,
            InputMode::ChoiPairs => 2 * self.m,
        }
    }

    pub fn aux_qubits(&self) -> usize {
        match self.auxiliary {
            Auxiliary::State(_) => self.m,
            Auxiliary::Choi => 2 * self.m,
        }
    }

    pub fn layout(&self) -> RegisterLayout {
        RegisterLayout::new(
            self.control_qubits(),
            self.input_qubits(),
            self.branches - 1,
            self.aux_qubits(),
        )
    }

    pub fn input_state(&self) -> PureState {
        match &self.input {
            InputMode::Explicit(psi) => psi.clone(),
            InputMode::ChoiPairs => bell_pairs(self.m),
        }
    }

    pub fn aux_state(&self) -> PureState {
        match &self.auxiliary {
            Auxiliary::State(phi0) => phi0.clone(),
            Auxiliary::Choi => bell_pairs(self.m),
        }
    }

    /// Target qubits of the gate within the input register (the second half
    /// when the input is doubled), in register-local coordinates.
    fn input_active_local(&self) -> Vec<usize> {
        (self.input_qubits() - self.m..self.input_qubits()).collect()
    }

    /// The reference state against which record fidelities are measured:
    /// `U |psi>` for explicit inputs, `(I (x) U) |Phi>` for pair inputs.
    pub fn reference_output(&self) -> Result<PureState> {
        self.input_state()
            .apply_unitary(&self.unitary, &self.input_active_local())
    }

    /// The default post-selection: uniform-phase control outcome, every
    /// auxiliary on the first basis element.
    pub fn default_selection(&self) -> Vec<OutcomeKey> {
        vec![OutcomeKey {
            control: 0,
            aux: vec![0; self.branches - 1],
        }]
    }
}

// ---------------------------------------------------------------------------
// Outcomes
// ---------------------------------------------------------------------------

/// One measurement outcome: Fourier index of the control register plus a
/// basis index per auxiliary register.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OutcomeKey {
    pub control: usize,
    pub aux: Vec<usize>,
}

impl OutcomeKey {
    pub fn new(control: usize, aux: Vec<usize>) -> Self {
        Self { control, aux }
    }

    /// `+`/`-` for two branches, `f<k>` (Fourier index) otherwise.
    pub fn control_label(&self, branches: usize) -> String {
        if branches <= 2 {
            if self.control == 0 { "+".into() } else { "-".into() }
        } else {
            format!("f{}", self.control)
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        self.aux.windows(2).all(|w| w[0] == w[1])
    }
}

/// One outcome with its probability, normalized conditional state on the
/// input register, and fidelity against the ideal output.
#[derive(Debug, Clone)]
pub struct OutcomeRecord {
    pub key: OutcomeKey,
    pub probability: f64,
    pub state: DensityMatrix,
    pub fidelity: f64,
}

/// Find a record by key.
pub fn outcome_by_key<'a>(
    records: &'a [OutcomeRecord],
    key: &OutcomeKey,
) -> Option<&'a OutcomeRecord> {
    records.iter().find(|r| &r.key == key)
}

// ---------------------------------------------------------------------------
// Branch overlaps
// ---------------------------------------------------------------------------

/// Overlap amplitudes `beta_j = <e_r| K_j U |phi_0>` of the propagated
/// auxiliary with a measurement-basis element, and their total weight
/// `A = sum_j |beta_j|^2` (the normalization constant of the conditional
/// state).
#[derive(Debug, Clone)]
pub struct BranchOverlaps {
    pub beta: Vec<Complex64>,
    pub weight: f64,
}

impl BranchOverlaps {
    /// Compute the overlaps for basis element `basis_index` of the spec's
    /// auxiliary basis. For pair-type auxiliaries the gate and Kraus
    /// operators act on the second half of the register.
    pub fn compute(spec: &ProtocolSpec, basis_index: usize) -> Result<Self> {
        let aux_n = spec.aux_qubits();
        let active: Vec<usize> = (aux_n - spec.target_qubits()..aux_n).collect();
        let phi0 = spec.aux_state();
        let propagated = phi0.apply_unitary(spec.unitary(), &active)?;
        let element = spec.aux_basis().element(basis_index);
        let mut beta = Vec::with_capacity(spec.channel().operators().len());
        for op in spec.channel().operators() {
            let embedded = embed_operator(op, aux_n, &active)?;
            let evolved = embedded.matvec(propagated.amplitudes());
            let overlap: Complex64 = element
                .amplitudes()
                .iter()
                .zip(evolved.iter())
                .map(|(e, v)| e.conj() * v)
                .sum();
            beta.push(overlap);
        }
        let weight = beta.iter().map(|b| b.norm_sqr()).sum();
        Ok(Self { beta, weight })
    }

    /// The interference operator `B = sum_j conj(beta_j) K_j U` on the gate
    /// qubits.
    pub fn interference_operator(&self, spec: &ProtocolSpec) -> CMatrix {
        let dim = spec.unitary().rows();
        let mut b = CMatrix::zeros(dim, dim);
        for (beta_j, op) in self.beta.iter().zip(spec.channel().operators()) {
            if beta_j.norm_sqr() == 0.0 {
                continue;
            }
            b = b.add(&op.mul(spec.unitary()).scale(beta_j.conj()));
        }
        b
    }
}

// ---------------------------------------------------------------------------
// Sensitivity metrics
// ---------------------------------------------------------------------------

/// The pair `(omega_1, omega_2)`:
///
/// - `omega_1` measures how strongly the non-identity Kraus operators move
///   the propagated auxiliary `U |phi_0>` (1 = fully sensitive, the best
///   case for mitigation). The Kraus list is first gauge-fixed so operator 0
///   is the identity-proportional component.
/// - `omega_2 = |<phi_f| U |phi_0>|^2` is the overlap of the post-selected
///   projection with the ideally propagated auxiliary.
///
/// Fails with [`Error::NoiselessOmega`] when the channel is noiseless, since
/// `omega_1` divides by `1 - p_ne`; the error carries `omega_2`.
pub fn omega_metrics(
    unitary: &CMatrix,
    channel: &KrausChannel,
    phi0: &PureState,
    phi_f: &PureState,
) -> Result<(f64, f64)> {
    if unitary.rows() != phi0.dim() || channel.dim() != phi0.dim() || phi_f.dim() != phi0.dim() {
        return Err(Error::DimensionMismatch(
            "omega metrics require matching gate, channel, and state dimensions".into(),
        ));
    }
    let propagated = phi0.apply_matrix(unitary)?;
    let omega2 = phi_f.inner(&propagated).norm_sqr();

    let canonical = channel.canonicalized();
    let p_ne = canonical.no_error_probability();
    if p_ne >= 1.0 - 1e-12 {
        return Err(Error::NoiselessOmega { omega2 });
    }
    // Exclude the leading (no-error) component unless the channel has no
    // trace component at all, in which case every operator is an error term.
    let trace_norm: f64 = channel
        .operators()
        .iter()
        .map(|op| op.trace().norm_sqr())
        .sum::<f64>()
        .sqrt();
    let error_ops: &[CMatrix] = if trace_norm < 1e-12 {
        canonical.operators()
    } else {
        &canonical.operators()[1..]
    };
    let mut numerator = 0.0;
    for op in error_ops {
        let moved = op.matvec(propagated.amplitudes());
        let overlap: Complex64 = propagated
            .amplitudes()
            .iter()
            .zip(moved.iter())
            .map(|(p, v)| p.conj() * v)
            .sum();
        numerator += overlap.norm_sqr();
    }
    let omega1 = (1.0 - numerator / (1.0 - p_ne)).clamp(0.0, 1.0);
    Ok((omega1, omega2))
}

/// Convenience: the omega metrics of a spec, computed on the auxiliary
/// register (doubled for pair-type auxiliaries) with the first basis element
/// as the post-selected projection.
pub fn spec_omega_metrics(spec: &ProtocolSpec) -> Result<(f64, f64)> {
    let pad = spec.aux_qubits() - spec.target_qubits();
    let u = embed_operator(
        spec.unitary(),
        spec.aux_qubits(),
        &(pad..spec.aux_qubits()).collect::<Vec<_>>(),
    )?;
    let channel = spec.channel().extend_identity(pad);
    omega_metrics(&u, &channel, &spec.aux_state(), spec.aux_basis().element(0))
}

/// The pair-type auxiliary for gate `U` on `m` qubits: the preparation is
/// `m` Bell pairs, and the measurement basis is `{(P_i (x) U)|Phi_m^+>}`
/// over the 4^m Pauli strings (identity first, so the first element is the
/// ideally propagated auxiliary). For Pauli noise this pins
/// `beta_j = sqrt(p_ne) delta_{j,0}` and hence `omega_1 = 1`.
pub fn choi_auxiliary(unitary: &CMatrix, m: usize) -> Result<(PureState, MeasurementBasis)> {
    if unitary.rows() != (1 << m) {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} gate for m = {m}",
            unitary.rows(),
            unitary.cols()
        )));
    }
    let phi = bell_pairs(m);
    let first_half: Vec<usize> = (0..m).collect();
    let second_half: Vec<usize> = (m..2 * m).collect();
    let propagated = phi.apply_unitary(unitary, &second_half)?;
    let mut elements = Vec::with_capacity(1 << (2 * m));
    for pauli in crate::gates::pauli_strings(m) {
        elements.push(propagated.apply_unitary(&pauli, &first_half)?);
    }
    Ok((phi, MeasurementBasis::new(elements)?))
}

// ---------------------------------------------------------------------------
// Brute-force engine
// ---------------------------------------------------------------------------

/// Basis permutation of the generalized controlled-SWAP
/// `sum_k |k><k| (x) SWAP(input, aux_k)`; control values at or above the
/// branch count act as identity (they never occur).
fn cswap_permutation(layout: &RegisterLayout, branches: usize, m: usize) -> Vec<usize> {
    let n = layout.total_qubits();
    let control_bits = layout.control().len();
    let dim = 1usize << n;
    let input_positions: Vec<usize> = layout
        .input_active(m)
        .iter()
        .map(|&q| n - 1 - q)
        .collect();
    let aux_positions: Vec<Vec<usize>> = (0..branches - 1)
        .map(|k| layout.aux_active(k, m).iter().map(|&q| n - 1 - q).collect())
        .collect();
    let mut perm = Vec::with_capacity(dim);
    for i in 0..dim {
        let k = if control_bits == 0 { 0 } else { i >> (n - control_bits) };
        let mut j = i;
        if k >= 1 && k < branches {
            for (pa, pb) in input_positions.iter().zip(aux_positions[k - 1].iter()) {
                let (ba, bb) = ((j >> pa) & 1, (j >> pb) & 1);
                if ba != bb {
                    j ^= (1 << pa) | (1 << pb);
                }
            }
        }
        perm.push(j);
    }
    perm
}

/// Fourier-conjugate measurement basis of the d-level control embedded in
/// `control_qubits` qubits; element `s` has amplitudes `omega^{ks}/sqrt(d)`
/// on the first `d` levels. For two branches this is the X basis.
fn control_fourier_basis(control_qubits: usize, branches: usize) -> Vec<PureState> {
    let dim = 1usize << control_qubits;
    let norm = 1.0 / (branches as f64).sqrt();
    (0..branches)
        .map(|s| {
            let mut amps = vec![c(0.0); dim];
            for (k, amp) in amps.iter_mut().enumerate().take(branches) {
                let angle = 2.0 * std::f64::consts::PI * (k * s) as f64 / branches as f64;
                *amp = Complex64::from_polar(norm, angle);
            }
            PureState::new(amps).expect("fourier element is normalized")
        })
        .collect()
}

/// The state after step 1: control in the uniform superposition over the
/// branch levels, input and auxiliaries in their prepared states.
pub(crate) fn prepare_initial(spec: &ProtocolSpec) -> PureState {
    let d = spec.branches();
    let control0 = control_fourier_basis(spec.control_qubits(), d)
        .into_iter()
        .next()
        .expect("at least one fourier element");
    let mut init = control0.tensor(&spec.input_state());
    let aux0 = spec.aux_state();
    for _ in 0..d - 1 {
        init = init.tensor(&aux0);
    }
    init
}

/// The controlled-SWAP layer of steps 2 and 4 as a basis permutation.
pub(crate) fn cswap_layer(spec: &ProtocolSpec) -> Vec<usize> {
    cswap_permutation(&spec.layout(), spec.branches(), spec.target_qubits())
}

/// Steps 5-6: measure the control in the Fourier-conjugate basis and every
/// auxiliary in the spec basis, collecting all conditional states.
pub(crate) fn measure_all(spec: &ProtocolSpec, rho: &DensityMatrix) -> Result<Vec<OutcomeRecord>> {
    let d = spec.branches();
    let reference = spec.reference_output()?;
    let fourier = control_fourier_basis(spec.control_qubits(), d);
    let control_targets: Vec<usize> = spec.layout().control().collect();
    let mut records = Vec::new();
    for (s, chi) in fourier.iter().enumerate() {
        let (_, cond) = rho.project(chi, &control_targets)?;
        let mut stack: Vec<(Vec<usize>, DensityMatrix)> = vec![(Vec::new(), cond)];
        for _ in 0..d - 1 {
            // After the control and k auxiliaries are projected out, the
            // next auxiliary always sits right after the input register.
            let mut next = Vec::new();
            for (prefix, state) in stack {
                let targets: Vec<usize> = (spec.input_qubits()
                    ..spec.input_qubits() + spec.aux_qubits())
                    .collect();
                for r in 0..spec.aux_basis().len() {
                    let mut key = prefix.clone();
                    key.push(r);
                    if state.trace() < 1e-18 {
                        next.push((key, DensityMatrix::zero(state.n_qubits() - spec.aux_qubits())));
                        continue;
                    }
                    let (_, reduced) = state.project(spec.aux_basis().element(r), &targets)?;
                    next.push((key, reduced));
                }
            }
            stack = next;
        }
        for (aux_key, state) in stack {
            let probability = state.trace().max(0.0);
            let (state, fidelity) = if probability > 1e-15 {
                let normalized = state.into_normalized();
                let fidelity = state_fidelity(&reference, &normalized);
                (normalized, fidelity.clamp(0.0, 1.0))
            } else {
                (DensityMatrix::zero(spec.input_qubits()), 0.0)
            };
            records.push(OutcomeRecord {
                key: OutcomeKey::new(s, aux_key),
                probability,
                state,
                fidelity,
            });
        }
    }
    Ok(records)
}

/// Guard the dense-simulation ceiling for a full-register run.
pub(crate) fn check_register_size(spec: &ProtocolSpec) -> Result<()> {
    let n = spec.layout().total_qubits();
    if n > QUBIT_CEILING {
        return Err(Error::RegisterTooLarge {
            qubits: n,
            ceiling: QUBIT_CEILING,
        });
    }
    Ok(())
}

/// Execute the protocol exactly on the full register and return every
/// outcome record, ordered by control index then lexicographic auxiliary
/// indices.
pub fn run_bruteforce(spec: &ProtocolSpec) -> Result<Vec<OutcomeRecord>> {
    let d = spec.branches();
    let m = spec.target_qubits();

    if d == 1 {
        // No control, no auxiliaries: the incoherent map.
        let reference = spec.reference_output()?;
        let rho = spec.input_state().to_density();
        let gate = NoisyGate::new(spec.unitary().clone(), spec.channel().clone())?;
        let active = (spec.input_qubits() - m..spec.input_qubits()).collect::<Vec<_>>();
        let out = gate.apply(&rho, &active)?;
        let fidelity = state_fidelity(&reference, &out);
        return Ok(vec![OutcomeRecord {
            key: OutcomeKey::new(0, Vec::new()),
            probability: 1.0,
            state: out,
            fidelity,
        }]);
    }

    check_register_size(spec)?;
    let layout = spec.layout();
    let mut rho = prepare_initial(spec).to_density();

    // Step 2: first controlled-SWAP layer.
    let perm = cswap_layer(spec);
    rho = rho.permute_basis(&perm);

    // Step 3: the noisy gate acts independently on the active qubits of the
    // input register and of every auxiliary register.
    let gate = NoisyGate::new(spec.unitary().clone(), spec.channel().clone())?;
    rho = gate.apply(&rho, &layout.input_active(m))?;
    for k in 0..d - 1 {
        rho = gate.apply(&rho, &layout.aux_active(k, m))?;
    }

    // Step 4: second controlled-SWAP layer.
    rho = rho.permute_basis(&perm);

    // Steps 5-6.
    measure_all(spec, &rho)
}

// ---------------------------------------------------------------------------
// Closed-form engines
// ---------------------------------------------------------------------------

/// Closed-form conditional state for a two-branch outcome: the normalized
/// output is proportional to
/// `E_U(psi) +/- (1/A) B psi B^dagger`
/// with the sign set by the control outcome and `A`, `B` taken from the
/// measured auxiliary basis element.
pub fn closed_form_d2(spec: &ProtocolSpec, key: &OutcomeKey) -> Result<OutcomeRecord> {
    if spec.branches() != 2 {
        return Err(Error::InvalidParameter(format!(
            "closed_form_d2 called with {} branches",
            spec.branches()
        )));
    }
    closed_form_general(spec, key)
}

/// Closed-form conditional state for a homogeneous outcome at any branch
/// count: for auxiliary element `r` on every register,
/// `rho_out = (1/d) [A_r^{d-1} E_U(psi) + c_s A_r^{d-2} B_r psi B_r^dagger]`
/// with `c_s = d - 1` for the uniform-phase control outcome and `-1`
/// otherwise. Non-homogeneous outcomes fall back to the brute-force engine.
pub fn closed_form_general(spec: &ProtocolSpec, key: &OutcomeKey) -> Result<OutcomeRecord> {
    let d = spec.branches();
    if key.aux.len() != d - 1 {
        return Err(Error::InvalidParameter(format!(
            "outcome key has {} auxiliary indices for {} branches",
            key.aux.len(),
            d
        )));
    }
    if key.control >= d {
        return Err(Error::UnsupportedOutcome(format!(
            "control index {} out of range for {} branches",
            key.control, d
        )));
    }
    if key.aux.iter().any(|&r| r >= spec.aux_basis().len()) {
        return Err(Error::UnsupportedOutcome("auxiliary index out of range".into()));
    }
    let reference = spec.reference_output()?;

    if d == 1 {
        let rho = spec.input_state().to_density();
        let gate = NoisyGate::new(spec.unitary().clone(), spec.channel().clone())?;
        let active: Vec<usize> = (spec.input_qubits() - spec.target_qubits()
            ..spec.input_qubits())
            .collect();
        let out = gate.apply(&rho, &active)?;
        let fidelity = state_fidelity(&reference, &out);
        return Ok(OutcomeRecord {
            key: key.clone(),
            probability: 1.0,
            state: out,
            fidelity,
        });
    }

    if !key.is_homogeneous() {
        // Mixed auxiliary outcomes carry Gram cross-factors between branch
        // overlaps; delegate to the exact engine.
        let records = run_bruteforce(spec).map_err(|e| match e {
            Error::RegisterTooLarge { .. } => Error::UnsupportedOutcome(
                "non-homogeneous outcome above the brute-force ceiling".into(),
            ),
            other => other,
        })?;
        return outcome_by_key(&records, key)
            .cloned()
            .ok_or_else(|| Error::UnsupportedOutcome(format!("{key:?} not produced")));
    }

    let r = key.aux.first().copied().unwrap_or(0);
    let overlaps = BranchOverlaps::compute(spec, r)?;
    let weight = overlaps.weight;
    let b_op = overlaps.interference_operator(spec);

    // Incoherent term and interference term on the input register.
    let active = {
        let iq = spec.input_qubits();
        (iq - spec.target_qubits()..iq).collect::<Vec<usize>>()
    };
    let psi = spec.input_state().to_density();
    let gate = NoisyGate::new(spec.unitary().clone(), spec.channel().clone())?;
    let incoherent = gate.apply(&psi, &active)?;
    let interference = psi.conjugate_by(&b_op, &active)?;

    let df = d as f64;
    let c_s = if key.control == 0 { df - 1.0 } else { -1.0 };
    let pow = |e: i32| -> f64 {
        if e <= 0 && weight == 0.0 {
            1.0
        } else {
            weight.powi(e)
        }
    };
    let raw = incoherent
        .scale(pow(d as i32 - 1) / df)
        .add(&interference.scale(c_s * pow(d as i32 - 2) / df));

    let probability = raw.trace().max(0.0);
    let (state, fidelity) = if probability > 1e-15 {
        let normalized = raw.into_normalized();
        let f = state_fidelity(&reference, &normalized).clamp(0.0, 1.0);
        (normalized, f)
    } else {
        (DensityMatrix::zero(spec.input_qubits()), 0.0)
    };
    Ok(OutcomeRecord {
        key: key.clone(),
        probability,
        state,
        fidelity,
    })
}

/// All outcomes of a two-branch (or single-branch) run through the
/// closed-form engine, in the brute-force record order.
pub fn run_closed_form(spec: &ProtocolSpec) -> Result<Vec<OutcomeRecord>> {
    let d = spec.branches();
    if d > 2 {
        return Err(Error::UnsupportedOutcome(
            "full closed-form enumeration is limited to two branches".into(),
        ));
    }
    if d == 1 {
        return closed_form_general(spec, &OutcomeKey::new(0, Vec::new())).map(|r| vec![r]);
    }
    let mut records = Vec::new();
    for s in 0..2 {
        for r in 0..spec.aux_basis().len() {
            records.push(closed_form_d2(spec, &OutcomeKey::new(s, vec![r]))?);
        }
    }
    Ok(records)
}

// ---------------------------------------------------------------------------
// Figures of merit
// ---------------------------------------------------------------------------

/// Which engine produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    BruteForce,
    ClosedForm,
    /// Closed form whenever the requested outcomes allow it, brute force
    /// otherwise.
    Auto,
}

/// How the infidelity ratio should be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RatioKind {
    Finite,
    /// Both fidelities are 1; the 0/0 ratio is pinned to 1 by convention.
    NoiselessUnit,
    /// Perfect mitigated fidelity over a noisy baseline.
    Infinite,
}

/// Post-selection probability and infidelity ratio for one selection.
#[derive(Debug, Clone, Copy)]
pub struct FiguresOfMerit {
    /// Post-selection probability of the kept outcomes.
    pub p: f64,
    /// Infidelity ratio `(1 - F0) / (1 - F)`; above 1 certifies advantage.
    pub r: f64,
    pub r_kind: RatioKind,
    /// Process fidelity of the kept, probability-weighted output.
    pub f_cj: f64,
    /// Incoherent process fidelity (the channel's no-error weight).
    pub f0_cj: f64,
}

/// Process fidelity of the probability-weighted mixture of the selected
/// outcomes. The spec must run in pair-input mode.
pub fn cj_fidelity(
    spec: &ProtocolSpec,
    records: &[OutcomeRecord],
    selection: &[OutcomeKey],
) -> Result<f64> {
    if !matches!(spec.input(), InputMode::ChoiPairs) {
        return Err(Error::InvalidParameter(
            "process fidelity requires the pair-input mode".into(),
        ));
    }
    if selection.is_empty() {
        return Err(Error::EmptySelection);
    }
    let mut total = 0.0;
    let mut weighted = 0.0;
    for key in selection {
        let record = outcome_by_key(records, key).ok_or_else(|| {
            Error::UnsupportedOutcome(format!("selected outcome {key:?} not in the record list"))
        })?;
        total += record.probability;
        weighted += record.probability * record.fidelity;
    }
    if total <= 1e-300 {
        return Err(Error::InvalidParameter(
            "selected outcomes have zero probability".into(),
        ));
    }
    Ok(weighted / total)
}

/// Compute the records needed for `selection` with the requested engine.
fn records_for_selection(
    spec: &ProtocolSpec,
    selection: &[OutcomeKey],
    engine: Engine,
) -> Result<(Vec<OutcomeRecord>, Engine)> {
    match engine {
        Engine::BruteForce => Ok((run_bruteforce(spec)?, Engine::BruteForce)),
        Engine::ClosedForm => {
            let records = selection
                .iter()
                .map(|key| closed_form_general(spec, key))
                .collect::<Result<Vec<_>>>()?;
            Ok((records, Engine::ClosedForm))
        }
        Engine::Auto => {
            if selection.iter().all(|k| k.is_homogeneous()) {
                let records = selection
                    .iter()
                    .map(|key| closed_form_general(spec, key))
                    .collect::<Result<Vec<_>>>()?;
                Ok((records, Engine::ClosedForm))
            } else {
                Ok((run_bruteforce(spec)?, Engine::BruteForce))
            }
        }
    }
}

/// Post-selection probability `P` and infidelity ratio `R` of a selection,
/// evaluated with the requested engine. Requires pair-input mode, since `R`
/// compares process fidelities.
pub fn figures_of_merit(
    spec: &ProtocolSpec,
    selection: &[OutcomeKey],
    engine: Engine,
) -> Result<FiguresOfMerit> {
    if selection.is_empty() {
        return Err(Error::EmptySelection);
    }
    let (records, _) = records_for_selection(spec, selection, engine)?;
    let f_cj = cj_fidelity(spec, &records, selection)?;
    let p: f64 = selection
        .iter()
        .map(|key| outcome_by_key(&records, key).map(|r| r.probability).unwrap_or(0.0))
        .sum();
    let f0_cj = spec.channel().no_error_probability();
    Ok(assemble_figures(p, f_cj, f0_cj))
}

/// Build the `(P, R)` pair from raw fidelities, applying the sentinel
/// conventions at the noiseless boundary.
pub fn assemble_figures(p: f64, f_cj: f64, f0_cj: f64) -> FiguresOfMerit {
    const EPS: f64 = 1e-12;
    let (r, r_kind) = if f_cj >= 1.0 - EPS {
        if f0_cj >= 1.0 - EPS {
            (1.0, RatioKind::NoiselessUnit)
        } else {
            (f64::INFINITY, RatioKind::Infinite)
        }
    } else {
        ((1.0 - f0_cj) / (1.0 - f_cj), RatioKind::Finite)
    };
    FiguresOfMerit { p, r, r_kind, f_cj, f0_cj }
}

/// Closed forms for the fully sensitive case (`omega_1 = omega_2 = 1`):
/// `P = p_ne^d [1 + (p_ne^{-1} - 1)/d]` and `R = 1 + (d - 1) p_ne`.
pub fn analytic_figures(p_ne: f64, branches: usize) -> Result<(f64, f64)> {
    if !(p_ne > 0.0 && p_ne <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "p_ne = {p_ne} outside (0, 1]"
        )));
    }
    if branches == 0 {
        return Err(Error::InvalidParameter("branch count must be at least 1".into()));
    }
    let d = branches as f64;
    let p = p_ne.powi(branches as i32) * (1.0 + (1.0 / p_ne - 1.0) / d);
    let r = 1.0 + (d - 1.0) * p_ne;
    Ok((p, r))
}

/// Fully sensitive process fidelity `d p_ne / [1 + (d - 1) p_ne]`.
pub fn analytic_f_cj(p_ne: f64, branches: usize) -> f64 {
    let d = branches as f64;
    d * p_ne / (1.0 + (d - 1.0) * p_ne)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gates;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ket(bits: &str) -> PureState {
        let mut idx = 0usize;
        for ch in bits.chars() {
            idx = (idx << 1) | (ch == '1') as usize;
        }
        PureState::basis_state(bits.len(), idx)
    }

    fn product_plus(n: usize) -> PureState {
        PureState::plus_state(n)
    }

    fn cnot_dephasing_spec(
        q: f64,
        branches: usize,
        aux: Auxiliary,
        input: InputMode,
    ) -> ProtocolSpec {
        let channel = KrausChannel::dephasing(q).unwrap().tensor_power(2).unwrap();
        ProtocolSpec::new(
            gates::cnot(),
            channel,
            branches,
            aux,
            input,
            Variant::Probabilistic,
        )
        .unwrap()
    }

    #[test]
    fn omega_metrics_for_cnot_dephasing_aux_states() {
        let channel = KrausChannel::dephasing(0.9).unwrap().tensor_power(2).unwrap();
        // |11> is insensitive to dephasing: omega_1 = 0.
        let phi0 = ket("11");
        let phi_f = phi0.apply_matrix(&gates::cnot()).unwrap();
        let (w1, w2) = omega_metrics(&gates::cnot(), &channel, &phi0, &phi_f).unwrap();
        assert!(w1.abs() < 1e-12, "omega1 = {w1}");
        assert!((w2 - 1.0).abs() < 1e-12);

        // |++> is fully sensitive: omega_1 = 1.
        let plus2 = product_plus(2);
        let (w1, w2) = omega_metrics(&gates::cnot(), &channel, &plus2, &plus2).unwrap();
        assert!((w1 - 1.0).abs() < 1e-12, "omega1 = {w1}");
        assert!((w2 - 1.0).abs() < 1e-12);

        // Orthogonal projection: omega_2 = 0.
        let ortho = ket("00");
        let (_, w2) = omega_metrics(&gates::cnot(), &channel, &ket("11"), &ortho).unwrap();
        assert!(w2.abs() < 1e-14);
    }

    #[test]
    fn omega_metrics_reject_noiseless_channel() {
        let channel = KrausChannel::identity(1);
        let phi = ket("0");
        match omega_metrics(&gates::identity(1), &channel, &phi, &phi) {
            Err(Error::NoiselessOmega { omega2 }) => assert!((omega2 - 1.0).abs() < 1e-14),
            other => panic!("expected NoiselessOmega, got {other:?}"),
        }
    }

    #[test]
    fn choi_auxiliary_pins_overlaps() {
        // Dephasing: beta_j = sqrt(p_ne) delta_{j,0}.
        let spec = ProtocolSpec::new(
            gates::t(),
            KrausChannel::dephasing(0.9).unwrap(),
            2,
            Auxiliary::Choi,
            InputMode::ChoiPairs,
            Variant::Probabilistic,
        )
        .unwrap();
        let overlaps = BranchOverlaps::compute(&spec, 0).unwrap();
        assert!((overlaps.beta[0] - c(0.9f64.sqrt())).norm() < 1e-12);
        for b in &overlaps.beta[1..] {
            assert!(b.norm() < 1e-12);
        }
        assert!((overlaps.weight - 0.9).abs() < 1e-12);

        // U = I gives the plain Bell basis.
        let (phi, basis) = choi_auxiliary(&gates::identity(1), 1).unwrap();
        assert_eq!(phi.n_qubits(), 2);
        assert_eq!(basis.len(), 4);
        assert!(basis.element(0).inner(&bell_pairs(1)).norm() > 1.0 - 1e-12);

        // Depolarizing with U = T on the doubled space: omega_1 = 1.
        let spec = ProtocolSpec::new(
            gates::t(),
            KrausChannel::depolarizing(0.9).unwrap(),
            2,
            Auxiliary::Choi,
            InputMode::ChoiPairs,
            Variant::Probabilistic,
        )
        .unwrap();
        let (w1, w2) = spec_omega_metrics(&spec).unwrap();
        assert!((w1 - 1.0).abs() < 1e-12);
        assert!((w2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn choi_auxiliary_saturates_omega1_for_random_pauli_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        for _ in 0..20 {
            let u = crate::random::random_unitary(1, &mut rng);
            let channel = crate::random::random_pauli_channel(1, 0.2, 0.999, &mut rng);
            let spec = ProtocolSpec::new(
                u,
                channel,
                2,
                Auxiliary::Choi,
                InputMode::ChoiPairs,
                Variant::Probabilistic,
            )
            .unwrap();
            let (w1, w2) = spec_omega_metrics(&spec).unwrap();
            assert!((w1 - 1.0).abs() < 1e-12, "omega1 = {w1}");
            assert!((w2 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bruteforce_single_branch_is_incoherent() {
        let psi = product_plus(1);
        let spec = ProtocolSpec::new(
            gates::identity(1),
            KrausChannel::dephasing(0.8).unwrap(),
            1,
            Auxiliary::State(ket("0")),
            InputMode::Explicit(psi.clone()),
            Variant::Probabilistic,
        )
        .unwrap();
        let records = run_bruteforce(&spec).unwrap();
        assert_eq!(records.len(), 1);
        assert!((records[0].probability - 1.0).abs() < 1e-12);
        let expected = KrausChannel::dephasing(0.8)
            .unwrap()
            .apply(&psi.to_density(), &[0])
            .unwrap();
        assert!(records[0].state.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn bruteforce_noiseless_concentrates_on_plus_phif() {
        let psi = ket("0");
        let spec = ProtocolSpec::new(
            gates::hadamard(),
            KrausChannel::identity(1),
            2,
            Auxiliary::State(ket("1")),
            InputMode::Explicit(psi.clone()),
            Variant::Probabilistic,
        )
        .unwrap();
        let records = run_bruteforce(&spec).unwrap();
        let total: f64 = records.iter().map(|r| r.probability).sum();
        assert!((total - 1.0).abs() < 1e-10);
        let top = outcome_by_key(&records, &OutcomeKey::new(0, vec![0])).unwrap();
        assert!((top.probability - 1.0).abs() < 1e-12);
        let expected = psi.apply_matrix(&gates::hadamard()).unwrap().to_density();
        assert!(top.state.max_abs_diff(&expected) < 1e-12);
        assert!((top.fidelity - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_matches_paper_reduction_for_full_sensitivity() {
        // With pinned overlaps the constructive outcome is proportional to
        // E_U(psi) + (d-1) p_ne U psi U^dagger.
        let p_ne = 0.9;
        let psi = product_plus(1);
        let spec = ProtocolSpec::new(
            gates::t(),
            KrausChannel::dephasing(p_ne).unwrap(),
            2,
            Auxiliary::Choi,
            InputMode::Explicit(psi.clone()),
            Variant::Probabilistic,
        )
        .unwrap();
        let record = closed_form_d2(&spec, &OutcomeKey::new(0, vec![0])).unwrap();
        let incoherent = KrausChannel::dephasing(p_ne)
            .unwrap()
            .apply(
                &psi.to_density().apply_unitary(&gates::t(), &[0]).unwrap(),
                &[0],
            )
            .unwrap();
        let rotated = psi.to_density().apply_unitary(&gates::t(), &[0]).unwrap();
        let expected = incoherent
            .matrix()
            .add(&rotated.matrix().scale_real(p_ne))
            .scale_real(1.0 / (1.0 + p_ne));
        assert!(record.state.matrix().max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn closed_form_d2_equals_bruteforce_on_every_outcome() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for trial in 0..30 {
            let u = crate::random::random_unitary(1, &mut rng);
            let channel = crate::random::random_pauli_channel(1, 0.2, 1.0, &mut rng);
            let phi0 = crate::random::random_pure_state(1, &mut rng);
            let psi = crate::random::random_pure_state(1, &mut rng);
            let spec = ProtocolSpec::new(
                u,
                channel,
                2,
                Auxiliary::State(phi0),
                InputMode::Explicit(psi),
                Variant::Probabilistic,
            )
            .unwrap();
            let brute = run_bruteforce(&spec).unwrap();
            for record in &brute {
                let cf = closed_form_d2(&spec, &record.key).unwrap();
                assert!(
                    (cf.probability - record.probability).abs() < 1e-10,
                    "trial {trial}: probability mismatch on {:?}",
                    record.key
                );
                let weighted_dev = cf
                    .state
                    .matrix()
                    .scale_real(cf.probability)
                    .max_abs_diff(&record.state.matrix().scale_real(record.probability));
                assert!(weighted_dev < 1e-10, "trial {trial}: state mismatch");
            }
        }
    }

    #[test]
    fn closed_form_general_equals_bruteforce_at_three_branches() {
        let spec = ProtocolSpec::new(
            gates::t(),
            KrausChannel::dephasing(0.85).unwrap(),
            3,
            Auxiliary::State(product_plus(1)),
            InputMode::Explicit(product_plus(1)),
            Variant::Probabilistic,
        )
        .unwrap();
        // 2 control qubits + 1 input + 2 auxiliaries = 5 qubits.
        assert_eq!(spec.layout().total_qubits(), 5);
        let brute = run_bruteforce(&spec).unwrap();
        let total: f64 = brute.iter().map(|r| r.probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
        for record in brute.iter().filter(|r| r.key.is_homogeneous()) {
            let cf = closed_form_general(&spec, &record.key).unwrap();
            assert!((cf.probability - record.probability).abs() < 1e-10);
            let weighted_dev = cf
                .state
                .matrix()
                .scale_real(cf.probability)
                .max_abs_diff(&record.state.matrix().scale_real(record.probability));
            assert!(weighted_dev < 1e-10);
        }
        // Non-homogeneous keys route through the brute-force fallback.
        let mixed = brute.iter().find(|r| !r.key.is_homogeneous()).unwrap();
        let cf = closed_form_general(&spec, &mixed.key).unwrap();
        assert!((cf.probability - mixed.probability).abs() < 1e-12);
    }

    #[test]
    fn process_fidelity_examples() {
        // Noiseless: all outcomes give fidelity 1.
        let spec = ProtocolSpec::new(
            gates::hadamard(),
            KrausChannel::identity(1),
            2,
            Auxiliary::State(ket("0")),
            InputMode::ChoiPairs,
            Variant::Probabilistic,
        )
        .unwrap();
        let records = run_bruteforce(&spec).unwrap();
        let keys: Vec<OutcomeKey> = records
            .iter()
            .filter(|r| r.probability > 1e-12)
            .map(|r| r.key.clone())
            .collect();
        assert!((cj_fidelity(&spec, &records, &keys).unwrap() - 1.0).abs() < 1e-10);

        // Single branch: the incoherent fidelity equals the no-error weight.
        let spec = cnot_dephasing_spec(0.9, 1, Auxiliary::State(ket("11")), InputMode::ChoiPairs);
        let records = run_bruteforce(&spec).unwrap();
        let f = cj_fidelity(&spec, &records, &[OutcomeKey::new(0, Vec::new())]).unwrap();
        assert!((f - 0.81).abs() < 1e-10);

        // Fully sensitive two-branch run: 2 p / (1 + p).
        let spec = ProtocolSpec::new(
            gates::t(),
            KrausChannel::dephasing(0.9).unwrap(),
            2,
            Auxiliary::Choi,
            InputMode::ChoiPairs,
            Variant::Probabilistic,
        )
        .unwrap();
        let records = run_bruteforce(&spec).unwrap();
        let f = cj_fidelity(&spec, &records, &spec.default_selection()).unwrap();
        assert!((f - 2.0 * 0.9 / 1.9).abs() < 1e-10);

        let empty: Vec<OutcomeKey> = Vec::new();
        assert!(matches!(
            cj_fidelity(&spec, &records, &empty),
            Err(Error::EmptySelection)
        ));
    }

    #[test]
    fn figures_of_merit_examples() {
        // Single branch: P = 1, R = 1.
        let spec = cnot_dephasing_spec(0.9, 1, Auxiliary::State(ket("11")), InputMode::ChoiPairs);
        let fom =
            figures_of_merit(&spec, &[OutcomeKey::new(0, Vec::new())], Engine::BruteForce)
                .unwrap();
        assert!((fom.p - 1.0).abs() < 1e-10);
        assert!((fom.r - 1.0).abs() < 1e-9);

        // Fully sensitive two-branch run at p_ne = 0.9: P = 0.855, R = 1.9.
        let spec = ProtocolSpec::new(
            gates::t(),
            KrausChannel::dephasing(0.9).unwrap(),
            2,
            Auxiliary::Choi,
            InputMode::ChoiPairs,
            Variant::Probabilistic,
        )
        .unwrap();
        let fom =
            figures_of_merit(&spec, &spec.default_selection(), Engine::BruteForce).unwrap();
        assert!((fom.p - 0.855).abs() < 1e-10, "P = {}", fom.p);
        assert!((fom.r - 1.9).abs() < 1e-9, "R = {}", fom.r);
        assert_eq!(fom.r_kind, RatioKind::Finite);

        // Noiseless: the ratio takes the unit sentinel.
        let spec = ProtocolSpec::new(
            gates::t(),
            KrausChannel::identity(1),
            2,
            Auxiliary::State(ket("0")),
            InputMode::ChoiPairs,
            Variant::Probabilistic,
        )
        .unwrap();
        let fom =
            figures_of_merit(&spec, &spec.default_selection(), Engine::BruteForce).unwrap();
        assert!((fom.p - 1.0).abs() < 1e-10);
        assert_eq!(fom.r_kind, RatioKind::NoiselessUnit);
        assert!((fom.r - 1.0).abs() < 1e-12);
    }

    #[test]
    fn analytic_figures_match_hand_arithmetic() {
        let (p, r) = analytic_figures(0.9, 2).unwrap();
        assert!((p - 0.855).abs() < 1e-15);
        assert!((r - 1.9).abs() < 1e-15);

        let (p, r) = analytic_figures(1.0, 5).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!((r - 5.0).abs() < 1e-15);
        assert!((analytic_f_cj(1.0, 5) - 1.0).abs() < 1e-15);

        // 0.9^4 (1 + (1/0.9 - 1)/4) = 0.6561 * 37/36 = 0.674325 exactly.
        let (p, r) = analytic_figures(0.9, 4).unwrap();
        assert!((p - 0.674325).abs() < 1e-12, "P = {p}");
        assert!((r - 3.7).abs() < 1e-15);

        assert!(analytic_figures(0.0, 2).is_err());
    }

    #[test]
    fn probability_completeness_across_specs() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        for _ in 0..10 {
            let u = crate::random::random_unitary(1, &mut rng);
            let channel = crate::random::random_pauli_channel(1, 0.3, 1.0, &mut rng);
            let aux = if rng.gen_bool(0.5) {
                Auxiliary::Choi
            } else {
                Auxiliary::State(crate::random::random_pure_state(1, &mut rng))
            };
            let input = if rng.gen_bool(0.5) {
                InputMode::ChoiPairs
            } else {
                InputMode::Explicit(crate::random::random_pure_state(1, &mut rng))
            };
            let d = rng.gen_range(1..=3);
            let spec =
                ProtocolSpec::new(u, channel, d, aux, input, Variant::Probabilistic).unwrap();
            let records = run_bruteforce(&spec).unwrap();
            let total: f64 = records.iter().map(|r| r.probability).sum();
            assert!((total - 1.0).abs() < 1e-9, "total = {total}");
        }
    }

    #[test]
    fn fidelity_grows_with_branches_when_fully_sensitive() {
        for p_ne in [0.5, 0.7, 0.9] {
            let mut last = 0.0;
            for d in 1..=4usize {
                let spec = ProtocolSpec::new(
                    gates::t(),
                    KrausChannel::dephasing(p_ne).unwrap(),
                    d,
                    Auxiliary::Choi,
                    InputMode::ChoiPairs,
                    Variant::Probabilistic,
                )
                .unwrap();
                let record =
                    closed_form_general(&spec, &spec.default_selection()[0]).unwrap();
                assert!(
                    record.fidelity > last + 1e-6,
                    "p_ne = {p_ne}, d = {d}: {last} !< {}",
                    record.fidelity
                );
                assert!((record.fidelity - analytic_f_cj(p_ne, d)).abs() < 1e-10);
                last = record.fidelity;
            }
        }
        // Large branch counts approach a perfect implementation.
        let spec = ProtocolSpec::new(
            gates::t(),
            KrausChannel::dephasing(0.9).unwrap(),
            64,
            Auxiliary::Choi,
            InputMode::ChoiPairs,
            Variant::Probabilistic,
        )
        .unwrap();
        let record = closed_form_general(&spec, &spec.default_selection()[0]).unwrap();
        assert!(record.fidelity > 0.998);
    }

    #[test]
    fn control_fourier_basis_is_x_basis_for_two_branches() {
        let basis = control_fourier_basis(1, 2);
        assert!((basis[0].amplitude(0) - c(1.0 / 2f64.sqrt())).norm() < 1e-14);
        assert!((basis[0].amplitude(1) - c(1.0 / 2f64.sqrt())).norm() < 1e-14);
        assert!((basis[1].amplitude(0) - c(1.0 / 2f64.sqrt())).norm() < 1e-14);
        assert!((basis[1].amplitude(1) + c(1.0 / 2f64.sqrt())).norm() < 1e-14);
    }
}
