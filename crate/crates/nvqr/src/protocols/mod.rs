//! End-to-end repeater pipelines: elementary-link generation, encoding via
//! the remote CNOT, mediated entanglement swapping, decoherence insertion,
//! decoding and post-selection — runnable on the dense engine or compiled
//! into a Monte Carlo trajectory specification.
//!
//! All numeric model constants (Werner fidelities, waiting times, flip
//! probabilities) are derived once into a [`ChainModel`] that both engines
//! consume, so the two paths cannot drift apart on parameters.

mod dense;
mod trajectory;

pub use dense::{
    decode_dense, elementary_link_state, end_teleport_instrument, mediated_bsm_instrument,
    remote_cnot_encode, run_chain_dense, DenseFinal, MediatorKind,
};
pub use trajectory::build_trajectory;

use crate::error::{Result, SimError};
use crate::noise::{self, DecoherenceParams};
use crate::pauli::{self, QberEstimates};
use crate::qstate::DensityMatrix;
use crate::scalar::Scalar;
use crate::timing::{self, AttemptsPolicy, LinkParams, Protocol, WaitTime};

/// All physical parameters of the system.
#[derive(Clone, Copy, Debug)]
pub struct SystemParams<T: Scalar> {
    /// Two-qubit gate depolarization probability.
    pub beta: T,
    /// Electron-spin measurement flip probability.
    pub delta: T,
    pub decoherence: DecoherenceParams<T>,
    pub link: LinkParams<T>,
}

impl<T: Scalar> SystemParams<T> {
    /// Nominal operating point: β=1e-3, δ=1e-4, τ_e=10 ms, τ_n=1 s,
    /// η_d=0.9, T_s=1 μs, c=2e5 km/s, L_att=22 km.
    pub fn nominal(l_tot: T, eta_c: T) -> Self {
        SystemParams {
            beta: T::of(1e-3),
            delta: T::of(1e-4),
            decoherence: DecoherenceParams { tau_e: T::of(1e-2), tau_n: T::one() },
            link: LinkParams {
                l_tot,
                eta_c,
                eta_d: T::of(0.9),
                l_att: T::of(22.0),
                c: T::of(2e5),
                t_s: T::of(1e-6),
            },
        }
    }

    /// All error sources off (for circuit-pinning checks).
    pub fn noiseless(l_tot: T, eta_c: T) -> Self {
        let mut p = Self::nominal(l_tot, eta_c);
        p.beta = T::zero();
        p.delta = T::zero();
        p.decoherence = DecoherenceParams { tau_e: T::of(1e30), tau_n: T::of(1e30) };
        p
    }

    pub fn validate(&self) -> Result<()> {
        if self.beta < T::zero() || self.beta > T::one() {
            return Err(SimError::out_of_range("beta", self.beta, 0.0, 1.0));
        }
        if self.delta < T::zero() || self.delta > T::of(0.5) {
            return Err(SimError::out_of_range("delta", self.delta, 0.0, 0.5));
        }
        DecoherenceParams::new(self.decoherence.tau_e, self.decoherence.tau_n)?;
        self.link.validate()
    }
}

/// Which simulation engine evaluates the chain.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Engine {
    /// Exact dense density-matrix composition (pairwise doubling).
    Dense,
    /// Monte Carlo Pauli-frame sampling.
    Pauli,
    /// Dense composition with a Werner/isotropic projection after every
    /// pipeline stage (the fully averaged approximation).
    ApproxAnalytic,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Dense => "dense",
            Engine::Pauli => "pauli",
            Engine::ApproxAnalytic => "approx-analytic",
        }
    }

    pub fn parse(s: &str) -> Option<Engine> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dense" => Some(Engine::Dense),
            "pauli" => Some(Engine::Pauli),
            "approx-analytic" | "analytic" => Some(Engine::ApproxAnalytic),
            _ => None,
        }
    }
}

/// Raw-key decoding strategy at the end users.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Decoder {
    /// Logical Z from a majority vote, logical X from the three-bit parity;
    /// post-selection on swap-stage checks only.
    Majority,
    /// Additionally discards Z rounds whose within-bank outcomes disagree.
    ErrorDetect,
    /// Evaluates both and keeps the one with the larger secret fraction.
    BestOfBoth,
}

impl Decoder {
    pub fn name(self) -> &'static str {
        match self {
            Decoder::Majority => "majority",
            Decoder::ErrorDetect => "error-detect",
            Decoder::BestOfBoth => "best-of-both",
        }
    }

    pub fn parse(s: &str) -> Option<Decoder> {
        match s.trim().to_ascii_lowercase().as_str() {
            "majority" => Some(Decoder::Majority),
            "error-detect" | "errordetect" | "ed" => Some(Decoder::ErrorDetect),
            "best-of-both" | "best" => Some(Decoder::BestOfBoth),
            _ => None,
        }
    }
}

/// Full run configuration for one chain evaluation.
#[derive(Clone, Copy, Debug)]
pub struct RepeaterConfig {
    pub protocol: Protocol,
    pub n: u32,
    pub engine: Engine,
    pub decoder: Decoder,
    pub samples: u64,
    pub seed: u64,
    pub attempts: AttemptsPolicy,
}

impl RepeaterConfig {
    pub fn new(protocol: Protocol, n: u32, engine: Engine) -> Self {
        RepeaterConfig {
            protocol,
            n,
            engine,
            decoder: Decoder::BestOfBoth,
            samples: 10_000,
            seed: 0,
            attempts: AttemptsPolicy::default(),
        }
    }
}

/// A pair of memory banks holding one chain segment: `code_size` physical
/// qubits per side (1 uncoded, 3 repetition-coded).
#[derive(Clone, Debug)]
pub struct BankState<T: Scalar> {
    pub code_size: usize,
    pub state: DensityMatrix<T>,
}

/// Model constants shared by both engines, derived once per configuration.
#[derive(Clone, Copy, Debug)]
pub struct ChainModel<T: Scalar> {
    pub protocol: Protocol,
    pub n: u32,
    pub code_size: usize,
    pub beta: T,
    pub delta: T,
    /// Electron readout flip probability (δ).
    pub electron_flip: T,
    /// Effective nuclear readout flip probability (β+δ).
    pub nuclear_flip: T,
    /// λ₂ᵉ(T₀): per-qubit survival of a heralded electron pair.
    pub lam2_e_t0: T,
    /// λ₄ᵉ(T₀): Werner fidelity of the heralded pair (and remote mediators).
    pub f0: T,
    /// λ₄ⁿ(T₁): pair decoherence while waiting for all links.
    pub lam4_t1: T,
    /// Pre-swap decoherence: λ₆₄ⁿ(T₂) for encoded banks, λ₄ⁿ(T₂) otherwise.
    pub pre_swap_fidelity: T,
    /// Segments entering the swap stage: 2ⁿ (P1/P3) or 2^{n−1} (P2/P4).
    pub num_segments: u64,
    /// The last mediator link teleports onto the end bank (P2/P4).
    pub has_end_teleport: bool,
    pub t1: WaitTime<T>,
    pub t2: WaitTime<T>,
}

impl<T: Scalar> ChainModel<T> {
    pub fn build(config: &RepeaterConfig, params: &SystemParams<T>) -> Result<Self> {
        params.validate()?;
        if config.n == 0 {
            return Err(SimError::InvalidNesting { n: 0 });
        }
        // Nuclear readouts carry an effective flip probability of beta+delta.
        let nuclear_flip = params.beta + params.delta;
        if nuclear_flip > T::of(0.5) {
            return Err(SimError::out_of_range("beta + delta", nuclear_flip, 0.0, 0.5));
        }
        let protocol = config.protocol;
        let n = config.n;
        let link = &params.link;
        let l0 = link.l0(n);
        let t0 = timing::heralding_period(l0, link.c)?;
        let lam2_e_t0 = noise::single_qubit_fidelity(t0, params.decoherence.tau_e)?;
        let f0 = noise::bell_pair_fidelity(lam2_e_t0)?;

        let t1 = timing::link_wait_time(protocol, n, link, config.attempts)?;
        let t2 = timing::swap_wait_time(protocol, n, link, config.attempts)?;
        let lam2_n_t1 = noise::single_qubit_fidelity(t1.seconds, params.decoherence.tau_n)?;
        let lam4_t1 = noise::bell_pair_fidelity(lam2_n_t1)?;
        let lam2_n_t2 = noise::single_qubit_fidelity(t2.seconds, params.decoherence.tau_n)?;
        let pre_swap_fidelity = if protocol.encoded() {
            noise::encoded_pair_fidelity(lam2_n_t2)?
        } else {
            noise::bell_pair_fidelity(lam2_n_t2)?
        };

        let num_segments = if protocol.remote_mediator() { 1u64 << (n - 1) } else { 1u64 << n };
        Ok(ChainModel {
            protocol,
            n,
            code_size: if protocol.encoded() { 3 } else { 1 },
            beta: params.beta,
            delta: params.delta,
            electron_flip: params.delta,
            nuclear_flip: params.beta + params.delta,
            lam2_e_t0,
            f0,
            lam4_t1,
            pre_swap_fidelity,
            num_segments,
            has_end_teleport: protocol.remote_mediator(),
            t1,
            t2,
        })
    }
}

/// Result of a chain run: an exact end-to-end state or sampled statistics.
#[derive(Clone, Debug)]
pub enum FinalState<T: Scalar> {
    Dense(DenseFinal<T>),
    Sampled(QberEstimates<T>),
}

/// Run the configured chain on the configured engine.
pub fn run_chain<T: Scalar>(
    config: &RepeaterConfig,
    params: &SystemParams<T>,
) -> Result<FinalState<T>> {
    let model = ChainModel::build(config, params)?;
    match config.engine {
        Engine::Dense => Ok(FinalState::Dense(run_chain_dense(&model, false)?)),
        Engine::ApproxAnalytic => Ok(FinalState::Dense(run_chain_dense(&model, true)?)),
        Engine::Pauli => {
            let spec = build_trajectory(&model)?;
            Ok(FinalState::Sampled(pauli::estimate_qber(
                &spec,
                model.code_size,
                config.samples,
                config.seed,
            )?))
        }
    }
}

/// Decoded QBERs and acceptance for one decoder choice.
#[derive(Clone, Copy, Debug)]
pub struct DecodeOutcome<T: Scalar> {
    pub q_z: T,
    pub q_x: T,
    /// Key-round acceptance (swap post-selection, plus Z-unanimity for the
    /// error-detecting decoder).
    pub acceptance: T,
    pub stderr_qz: T,
    pub stderr_qx: T,
    pub decoder_used: &'static str,
    /// No rounds survived post-selection: QBERs are NaN, no key.
    pub zero_acceptance: bool,
}

impl<T: Scalar> DecodeOutcome<T> {
    fn dead(decoder_used: &'static str) -> Self {
        DecodeOutcome {
            q_z: T::nan(),
            q_x: T::nan(),
            acceptance: T::zero(),
            stderr_qz: T::nan(),
            stderr_qx: T::nan(),
            decoder_used,
            zero_acceptance: true,
        }
    }

    /// Secret fraction of this outcome (0 when dead).
    pub fn secret_fraction(&self) -> T {
        if self.zero_acceptance {
            return T::zero();
        }
        crate::qkd::secret_fraction(
            clamp_half(self.q_z),
            clamp_half(self.q_x),
        )
        .unwrap_or(T::zero())
    }
}

fn clamp_half<T: Scalar>(q: T) -> T {
    if q > T::of(0.5) {
        T::of(0.5)
    } else if q < T::zero() {
        T::zero()
    } else {
        q
    }
}

fn pick_best<T: Scalar>(maj: DecodeOutcome<T>, ed: DecodeOutcome<T>) -> DecodeOutcome<T> {
    // Ties (including both dead) go to the majority decoder, which discards less.
    if ed.secret_fraction() > maj.secret_fraction() {
        ed
    } else {
        maj
    }
}

/// Decode a final state with the chosen strategy.
pub fn decode<T: Scalar>(final_state: &FinalState<T>, decoder: Decoder) -> Result<DecodeOutcome<T>> {
    match final_state {
        FinalState::Dense(dense) => {
            let measures = decode_dense(dense)?;
            let maj = measures.majority_outcome();
            let ed = measures.error_detect_outcome();
            Ok(match decoder {
                Decoder::Majority => maj,
                Decoder::ErrorDetect => ed,
                Decoder::BestOfBoth => pick_best(maj, ed),
            })
        }
        FinalState::Sampled(est) => {
            let to_outcome = |qz: Option<pauli::Estimate<T>>,
                              qx: Option<pauli::Estimate<T>>,
                              acc: pauli::Estimate<T>,
                              name: &'static str| {
                match (qz, qx) {
                    (Some(z), Some(x)) => DecodeOutcome {
                        q_z: z.value,
                        q_x: x.value,
                        acceptance: acc.value,
                        stderr_qz: z.stderr,
                        stderr_qx: x.stderr,
                        decoder_used: name,
                        zero_acceptance: false,
                    },
                    _ => DecodeOutcome::dead(name),
                }
            };
            let (qz, qx, acc) = est.majority();
            let maj = to_outcome(qz, qx, acc, "majority");
            let (qz, qx, acc) = est.error_detect();
            let ed = to_outcome(qz, qx, acc, "error-detect");
            Ok(match decoder {
                Decoder::Majority => maj,
                Decoder::ErrorDetect => ed,
                Decoder::BestOfBoth => pick_best(maj, ed),
            })
        }
    }
}
