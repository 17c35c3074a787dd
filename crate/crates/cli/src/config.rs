//! Sweep configuration: a versioned JSON schema describing one batch of
//! protocol runs, validated up front so every grid point is well-formed
//! before any work starts.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sqem_core::channels::KrausChannel;
use sqem_core::compiler::{layered_unitary, GateCircuit};
use sqem_core::corrector::Parameterization;
use sqem_core::linalg::CMatrix;
use sqem_core::qstate::PureState;
use sqem_core::{gates, Error};

/// Schema version this binary understands.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

// ---------------------------------------------------------------------------
// Validated configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Probabilistic,
    QuasiDeterministic,
    NoisyCswap,
    OmegaScan,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Probabilistic => "probabilistic",
            Scenario::QuasiDeterministic => "quasi_deterministic",
            Scenario::NoisyCswap => "noisy_cswap",
            Scenario::OmegaScan => "omega_scan",
        }
    }
}

#[derive(Debug, Clone)]
pub enum GateSpec {
    Cnot,
    T,
    Identity,
    Layered(usize),
    Circuit(PathBuf),
}

impl GateSpec {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if let Some(layers) = text.strip_prefix("layered:") {
            let layers: usize = layers
                .parse()
                .map_err(|_| bad(format!("gate: bad layer count in `{text}`")))?;
            if layers == 0 {
                return Err(bad("gate: layered needs at least one layer"));
            }
            return Ok(GateSpec::Layered(layers));
        }
        if let Some(path) = text.strip_prefix("circuit:") {
            return Ok(GateSpec::Circuit(PathBuf::from(path)));
        }
        match text {
            "cnot" => Ok(GateSpec::Cnot),
            "t" => Ok(GateSpec::T),
            "identity" => Ok(GateSpec::Identity),
            other => Err(bad(format!(
                "gate: `{other}` is not cnot | t | identity | layered:<N> | circuit:<path>"
            ))),
        }
    }

    pub fn label(&self) -> String {
        match self {
            GateSpec::Cnot => "cnot".into(),
            GateSpec::T => "t".into(),
            GateSpec::Identity => "identity".into(),
            GateSpec::Layered(n) => format!("layered:{n}"),
            GateSpec::Circuit(path) => format!("circuit:{}", path.display()),
        }
    }

    pub fn matrix(&self) -> Result<CMatrix, Error> {
        Ok(match self {
            GateSpec::Cnot => gates::cnot(),
            GateSpec::T => gates::t(),
            GateSpec::Identity => gates::identity(1),
            GateSpec::Layered(n) => layered_unitary(*n),
            GateSpec::Circuit(path) => GateCircuit::from_json_file(path)?.unitary()?,
        })
    }

    pub fn qubits(&self) -> Result<usize, Error> {
        Ok(match self {
            GateSpec::Cnot | GateSpec::Layered(_) => 2,
            GateSpec::T | GateSpec::Identity => 1,
            GateSpec::Circuit(path) => GateCircuit::from_json_file(path)?.n_qubits(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelFamily {
    Dephasing,
    Depolarizing,
    BitFlip,
    AmplitudeDamping,
}

impl ChannelFamily {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        match text {
            "dephasing" => Ok(Self::Dephasing),
            "depolarizing" => Ok(Self::Depolarizing),
            "bit_flip" => Ok(Self::BitFlip),
            "amplitude_damping" => Ok(Self::AmplitudeDamping),
            other => Err(bad(format!(
                "channel family `{other}` is not dephasing | depolarizing | bit_flip | amplitude_damping"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Dephasing => "dephasing",
            Self::Depolarizing => "depolarizing",
            Self::BitFlip => "bit_flip",
            Self::AmplitudeDamping => "amplitude_damping",
        }
    }

    /// Single-qubit factor at the given parameter (no-error probability for
    /// the Pauli families, decay probability for amplitude damping).
    pub fn single_qubit(&self, value: f64) -> Result<KrausChannel, Error> {
        match self {
            Self::Dephasing => KrausChannel::dephasing(value),
            Self::Depolarizing => KrausChannel::depolarizing(value),
            Self::BitFlip => KrausChannel::bit_flip(value),
            Self::AmplitudeDamping => KrausChannel::amplitude_damping(value),
        }
    }

    /// Per-branch channel on `m` qubits. For the Pauli families `value` is
    /// the total no-error probability of the branch (so the per-qubit
    /// factor is its m-th root and F0_CJ equals the grid value); for
    /// amplitude damping it is the per-qubit decay probability.
    pub fn per_branch(&self, value: f64, m: usize) -> Result<KrausChannel, Error> {
        let per_qubit = match self {
            Self::AmplitudeDamping => value,
            _ => value.powf(1.0 / m as f64),
        };
        self.single_qubit(per_qubit)?.tensor_power(m)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuxSpec {
    Choi,
    /// Product state described by one `0`, `1`, `+`, or `-` per qubit.
    Named(String),
}

impl AuxSpec {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text == "choi" {
            return Ok(Self::Choi);
        }
        if text.is_empty() || !text.chars().all(|ch| matches!(ch, '0' | '1' | '+' | '-')) {
            return Err(bad(format!(
                "aux `{text}` is not `choi` or a string over 0, 1, +, -"
            )));
        }
        Ok(Self::Named(text.to_string()))
    }

    pub fn label(&self) -> String {
        match self {
            Self::Choi => "choi".into(),
            Self::Named(s) => s.clone(),
        }
    }

    pub fn to_state(&self, m: usize) -> Result<PureState, ConfigError> {
        let Self::Named(text) = self else {
            return Err(bad("pair-type auxiliary has no explicit state"));
        };
        if text.len() != m {
            return Err(bad(format!(
                "aux `{text}` describes {} qubits but the gate acts on {m}",
                text.len()
            )));
        }
        let mut state = PureState::basis_state(0, 0);
        for ch in text.chars() {
            let factor = match ch {
                '0' => PureState::basis_state(1, 0),
                '1' => PureState::basis_state(1, 1),
                '+' => PureState::plus_state(1),
                '-' => PureState::basis_state(1, 1)
                    .apply_unitary(&gates::hadamard(), &[0])
                    .expect("hadamard is unitary"),
                _ => unreachable!(),
            };
            state = state.tensor(&factor);
        }
        Ok(state)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineChoice {
    Auto,
    BruteForce,
    ClosedForm,
}

impl EngineChoice {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        match text {
            "auto" => Ok(Self::Auto),
            "bruteforce" => Ok(Self::BruteForce),
            "closed_form" => Ok(Self::ClosedForm),
            other => Err(bad(format!(
                "engine `{other}` is not auto | bruteforce | closed_form"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ChannelGrid {
    pub family: ChannelFamily,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub scenario: Scenario,
    pub gate: GateSpec,
    pub channels: Vec<ChannelGrid>,
    pub d: Vec<usize>,
    pub aux: Vec<AuxSpec>,
    pub threshold: f64,
    pub epsilon: f64,
    pub theta: Vec<f64>,
    pub seed: u64,
    pub engine: EngineChoice,
    pub parameterization: Parameterization,
}

/// One row of the sweep grid, in deterministic enumeration order.
#[derive(Debug, Clone)]
pub struct GridPoint {
    pub family: ChannelFamily,
    pub p_ne: f64,
    pub d: usize,
    pub aux: Option<AuxSpec>,
    pub theta: Option<f64>,
}

impl SweepConfig {
    pub fn grid_points(&self) -> Vec<GridPoint> {
        let mut points = Vec::new();
        for grid in &self.channels {
            for &value in &grid.values {
                for &d in &self.d {
                    match self.scenario {
                        Scenario::OmegaScan => {
                            for &theta in &self.theta {
                                points.push(GridPoint {
                                    family: grid.family,
                                    p_ne: value,
                                    d,
                                    aux: None,
                                    theta: Some(theta),
                                });
                            }
                        }
                        _ => {
                            for aux in &self.aux {
                                points.push(GridPoint {
                                    family: grid.family,
                                    p_ne: value,
                                    d,
                                    aux: Some(aux.clone()),
                                    theta: None,
                                });
                            }
                        }
                    }
                }
            }
        }
        points
    }
}

// ---------------------------------------------------------------------------
// Raw JSON layer
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    version: u32,
    scenario: String,
    gate: String,
    channels: Vec<RawChannel>,
    d: Vec<usize>,
    #[serde(default)]
    aux: Vec<String>,
    #[serde(default)]
    threshold: Option<f64>,
    #[serde(default)]
    epsilon: Option<f64>,
    #[serde(default)]
    theta: Option<RawGrid>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    engine: Option<String>,
    #[serde(default)]
    parameterization: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    family: String,
    p_ne: RawGrid,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawGrid {
    List(Vec<f64>),
    Range { from: f64, to: f64, steps: usize },
}

impl RawGrid {
    fn expand(&self, field: &str) -> Result<Vec<f64>, ConfigError> {
        let values = match self {
            RawGrid::List(values) => values.clone(),
            RawGrid::Range { from, to, steps } => {
                if *steps == 0 {
                    return Err(bad(format!("{field}: a range needs at least one step")));
                }
                if *steps == 1 {
                    vec![*from]
                } else {
                    (0..*steps)
                        .map(|i| from + (to - from) * i as f64 / (*steps - 1) as f64)
                        .collect()
                }
            }
        };
        if values.is_empty() {
            return Err(bad(format!("{field}: empty grid")));
        }
        Ok(values)
    }
}

pub fn load_config(path: &Path) -> Result<SweepConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<SweepConfig, ConfigError> {
    let raw: RawConfig = serde_json::from_str(text)
        .map_err(|e| bad(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    if raw.version != SCHEMA_VERSION {
        return Err(bad(format!(
            "version {} is not supported (expected {SCHEMA_VERSION})",
            raw.version
        )));
    }
    let scenario = match raw.scenario.as_str() {
        "probabilistic" => Scenario::Probabilistic,
        "quasi_deterministic" => Scenario::QuasiDeterministic,
        "noisy_cswap" => Scenario::NoisyCswap,
        "omega_scan" => Scenario::OmegaScan,
        other => {
            return Err(bad(format!(
                "scenario `{other}` is not probabilistic | quasi_deterministic | noisy_cswap | omega_scan"
            )))
        }
    };
    let gate = GateSpec::parse(&raw.gate)?;
    let m = gate
        .qubits()
        .map_err(|e| bad(format!("gate: {e}")))?;

    if raw.channels.is_empty() {
        return Err(bad("channels: empty grid"));
    }
    let mut channels = Vec::new();
    for (i, ch) in raw.channels.iter().enumerate() {
        let family = ChannelFamily::parse(&ch.family)?;
        let values = ch.p_ne.expand(&format!("channels[{i}].p_ne"))?;
        for &v in &values {
            if !(0.0..=1.0).contains(&v) {
                return Err(bad(format!("channels[{i}].p_ne: value {v} outside [0, 1]")));
            }
            if v == 0.0 && family != ChannelFamily::AmplitudeDamping {
                return Err(bad(format!(
                    "channels[{i}].p_ne: 0 leaves the infidelity ratio undefined"
                )));
            }
        }
        channels.push(ChannelGrid { family, values });
    }

    if raw.d.is_empty() {
        return Err(bad("d: empty grid"));
    }
    if raw.d.contains(&0) {
        return Err(bad("d: branch counts start at 1"));
    }

    let aux: Vec<AuxSpec> = if scenario == Scenario::OmegaScan {
        Vec::new()
    } else {
        let texts = if raw.aux.is_empty() {
            vec!["choi".to_string()]
        } else {
            raw.aux.clone()
        };
        let parsed = texts
            .iter()
            .map(|t| AuxSpec::parse(t))
            .collect::<Result<Vec<_>, _>>()?;
        for spec in &parsed {
            if let AuxSpec::Named(text) = spec {
                if text.len() != m {
                    return Err(bad(format!(
                        "aux `{text}` describes {} qubits but the gate acts on {m}",
                        text.len()
                    )));
                }
            }
        }
        parsed
    };

    let threshold = raw.threshold.unwrap_or(1.0);
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(bad(format!("threshold {threshold} outside (0, 1]")));
    }
    let epsilon = raw.epsilon.unwrap_or(0.0);
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(bad(format!("epsilon {epsilon} outside [0, 1]")));
    }

    let theta = match (&raw.theta, scenario) {
        (Some(grid), Scenario::OmegaScan) => grid.expand("theta")?,
        (None, Scenario::OmegaScan) => {
            return Err(bad("omega_scan needs a theta grid"));
        }
        (Some(_), _) => {
            return Err(bad("theta is only meaningful for the omega_scan scenario"));
        }
        (None, _) => Vec::new(),
    };

    let engine = raw
        .engine
        .as_deref()
        .map(EngineChoice::parse)
        .transpose()?
        .unwrap_or(EngineChoice::Auto);

    match scenario {
        Scenario::NoisyCswap => {
            if raw.epsilon.is_none() {
                return Err(bad("noisy_cswap needs an epsilon (per-cNOT error strength)"));
            }
            if raw.d.iter().any(|&d| d != 2) {
                return Err(bad("noisy_cswap supports d = 2 only"));
            }
            if engine == EngineChoice::ClosedForm {
                return Err(bad("noisy_cswap has no closed-form engine"));
            }
            if m > 2 {
                return Err(bad("noisy_cswap supports gates on at most two qubits"));
            }
        }
        Scenario::QuasiDeterministic
            if engine == EngineChoice::ClosedForm => {
                return Err(bad(
                    "quasi_deterministic needs per-outcome states; use auto or bruteforce",
                ));
            }
        _ => {}
    }

    let parameterization = match raw.parameterization.as_deref() {
        None | Some("single_qubit_products") => Parameterization::SingleQubitProducts,
        Some("pauli_set") => Parameterization::PauliSet,
        Some(other) => {
            return Err(bad(format!(
                "parameterization `{other}` is not single_qubit_products | pauli_set"
            )))
        }
    };

    Ok(SweepConfig {
        scenario,
        gate,
        channels,
        d: raw.d,
        aux,
        threshold,
        epsilon,
        theta,
        seed: raw.seed.unwrap_or(0),
        engine,
        parameterization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_probabilistic_config() {
        let text = r#"{
            "version": 1,
            "scenario": "probabilistic",
            "gate": "cnot",
            "channels": [{"family": "dephasing", "p_ne": {"from": 0.5, "to": 1.0, "steps": 6}}],
            "d": [1, 2],
            "aux": ["11", "choi"],
            "seed": 7
        }"#;
        let config = parse_config(text).unwrap();
        assert_eq!(config.channels[0].values.len(), 6);
        assert!((config.channels[0].values[1] - 0.6).abs() < 1e-12);
        assert_eq!(config.grid_points().len(), 6 * 2 * 2);
        assert_eq!(config.seed, 7);
    }

    #[test]
    fn rejects_empty_grids_and_bad_fields() {
        let empty = r#"{
            "version": 1, "scenario": "probabilistic", "gate": "t",
            "channels": [{"family": "dephasing", "p_ne": []}], "d": [2]
        }"#;
        assert!(parse_config(empty).is_err());

        let bad_aux = r#"{
            "version": 1, "scenario": "probabilistic", "gate": "t",
            "channels": [{"family": "dephasing", "p_ne": [0.9]}], "d": [2],
            "aux": ["01"]
        }"#;
        assert!(parse_config(bad_aux).unwrap_err().0.contains("aux"));

        let unknown = r#"{
            "version": 1, "scenario": "probabilistic", "gate": "t",
            "channels": [{"family": "dephasing", "p_ne": [0.9]}], "d": [2],
            "typo_field": true
        }"#;
        assert!(parse_config(unknown).is_err());
    }

    #[test]
    fn noisy_cswap_requirements() {
        let missing_eps = r#"{
            "version": 1, "scenario": "noisy_cswap", "gate": "identity",
            "channels": [{"family": "dephasing", "p_ne": [0.9]}], "d": [2]
        }"#;
        assert!(parse_config(missing_eps).unwrap_err().0.contains("epsilon"));

        let bad_d = r#"{
            "version": 1, "scenario": "noisy_cswap", "gate": "identity", "epsilon": 0.01,
            "channels": [{"family": "dephasing", "p_ne": [0.9]}], "d": [3]
        }"#;
        assert!(parse_config(bad_d).unwrap_err().0.contains("d = 2"));
    }

    #[test]
    fn named_aux_states() {
        let plus_minus = AuxSpec::parse("+-").unwrap().to_state(2).unwrap();
        assert!((plus_minus.amplitude(0).re - 0.5).abs() < 1e-12);
        assert!((plus_minus.amplitude(1).re + 0.5).abs() < 1e-12);
        assert!(AuxSpec::parse("choi").unwrap() == AuxSpec::Choi);
        assert!(AuxSpec::parse("2x").is_err());
    }
}
