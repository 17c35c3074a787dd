//! One protocol run printed as an outcome table.

use sqem_core::channels::KrausChannel;
use sqem_core::corrector::fmt_g17;
use sqem_core::protocol::{
    figures_of_merit, run_bruteforce, run_closed_form, spec_omega_metrics, Auxiliary, Engine,
    InputMode, OutcomeRecord, ProtocolSpec, RatioKind, Variant,
};
use sqem_core::Error;

use crate::config::{AuxSpec, ChannelFamily, EngineChoice, GateSpec};

pub struct SingleArgs {
    pub gate: String,
    pub channel: String,
    pub p_ne: f64,
    pub d: usize,
    pub aux: String,
    pub input: String,
    pub engine: EngineChoice,
}

fn build_channel(text: &str, p_ne: f64, m: usize) -> Result<KrausChannel, Error> {
    if let Some(path) = text.strip_prefix("custom:") {
        let channel = KrausChannel::from_json_file(path)?;
        if channel.n_qubits() != m {
            return Err(Error::DimensionMismatch(format!(
                "{}-qubit custom channel for an {m}-qubit gate",
                channel.n_qubits()
            )));
        }
        return Ok(channel);
    }
    let family = ChannelFamily::parse(text).map_err(|e| Error::InvalidParameter(e.0))?;
    family.per_branch(p_ne, m)
}

pub fn run_single(args: &SingleArgs) -> Result<(), Error> {
    let gate = GateSpec::parse(&args.gate).map_err(|e| Error::InvalidParameter(e.0))?;
    let unitary = gate.matrix()?;
    let m = unitary.rows().trailing_zeros() as usize;
    let channel = build_channel(&args.channel, args.p_ne, m)?;

    let aux_spec = AuxSpec::parse(&args.aux).map_err(|e| Error::InvalidParameter(e.0))?;
    let auxiliary = match &aux_spec {
        AuxSpec::Choi => Auxiliary::Choi,
        AuxSpec::Named(_) => Auxiliary::State(
            aux_spec
                .to_state(m)
                .map_err(|e| Error::InvalidParameter(e.0))?,
        ),
    };
    let input = if args.input == "cj" {
        InputMode::ChoiPairs
    } else {
        let spec = AuxSpec::parse(&args.input).map_err(|e| Error::InvalidParameter(e.0))?;
        InputMode::Explicit(
            spec.to_state(m)
                .map_err(|e| Error::InvalidParameter(e.0))?,
        )
    };
    let is_pair_input = matches!(input, InputMode::ChoiPairs);

    let spec = ProtocolSpec::new(
        unitary,
        channel,
        args.d,
        auxiliary,
        input,
        Variant::Probabilistic,
    )?;

    let (records, engine_used): (Vec<OutcomeRecord>, &str) = match args.engine {
        EngineChoice::ClosedForm => (run_closed_form(&spec)?, "closed_form"),
        EngineChoice::BruteForce => (run_bruteforce(&spec)?, "bruteforce"),
        EngineChoice::Auto => {
            if args.d <= 2 {
                (run_closed_form(&spec)?, "closed_form")
            } else {
                (run_bruteforce(&spec)?, "bruteforce")
            }
        }
    };

    println!(
        "gate={} channel={} p_ne={} d={} aux={} input={} engine={engine_used}",
        args.gate, args.channel, args.p_ne, args.d, args.aux, args.input
    );
    match spec_omega_metrics(&spec) {
        Ok((w1, w2)) => println!("omega1={} omega2={}", fmt_g17(w1), fmt_g17(w2)),
        Err(Error::NoiselessOmega { omega2 }) => {
            println!("omega1=nan (noiseless channel) omega2={}", fmt_g17(omega2))
        }
        Err(other) => return Err(other),
    }
    println!();
    println!("{:<9} {:<12} {:<24} {:<24}", "control", "aux", "probability", "fidelity");

    let mut sorted: Vec<&OutcomeRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        b.probability
            .partial_cmp(&a.probability)
            .unwrap()
            .then_with(|| a.key.cmp(&b.key))
    });
    for record in sorted.iter().filter(|r| r.probability > 1e-15) {
        let aux: Vec<String> = record.key.aux.iter().map(|a| a.to_string()).collect();
        println!(
            "{:<9} {:<12} {:<24} {:<24}",
            record.key.control_label(args.d),
            aux.join(","),
            fmt_g17(record.probability),
            fmt_g17(record.fidelity),
        );
    }
    println!();

    let selection = spec.default_selection();
    if is_pair_input {
        let fom = figures_of_merit(&spec, &selection, Engine::BruteForce)?;
        let r = match fom.r_kind {
            RatioKind::NoiselessUnit => "1 (noiseless convention)".to_string(),
            RatioKind::Infinite => "inf".to_string(),
            RatioKind::Finite => fmt_g17(fom.r),
        };
        println!(
            "post-selected: P={} R={} F_CJ={} F0_CJ={}",
            fmt_g17(fom.p),
            r,
            fmt_g17(fom.f_cj),
            fmt_g17(fom.f0_cj),
        );
    } else {
        let kept = records
            .iter()
            .find(|r| r.key == selection[0])
            .expect("constructive outcome exists");
        println!(
            "post-selected: P={} fidelity={}",
            fmt_g17(kept.probability),
            fmt_g17(kept.fidelity),
        );
    }
    Ok(())
}
