//! Monte Carlo Pauli-frame engine.
//!
//! Every circuit in the pipeline is Clifford, every noise source is a Pauli
//! mixture and every measurement is Pauli-basis with a classical flip, so the
//! full density-matrix evolution is reproduced exactly in distribution by
//! tracking per-qubit X/Z flip bits through one sampled trajectory at a time.
//!
//! Ideal measurement outcomes never need to be drawn: the pipeline's ideal
//! outcomes are maximally correlated random bits, and because every
//! outcome-conditioned correction follows the ideal rule, the ideal bits
//! cancel in every reported statistic (detection parities, logical
//! agreement). Measurement events therefore record the *difference* from the
//! ideal outcome — frame flip XOR a Bernoulli flip — and corrections XOR
//! recorded differences back into the frames. Cross-engine agreement with the
//! dense engine is enforced by tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::noise::PauliWeights;
use crate::qstate::Basis;
use crate::scalar::Scalar;

/// Per-qubit X/Z flip record over the live slots of one trajectory.
#[derive(Clone, Debug)]
pub struct PauliFrame {
    x: Vec<bool>,
    z: Vec<bool>,
    live: Vec<bool>,
}

impl PauliFrame {
    pub fn new(slots: usize) -> Self {
        PauliFrame { x: vec![false; slots], z: vec![false; slots], live: vec![true; slots] }
    }

    pub fn reset(&mut self) {
        self.x.iter_mut().for_each(|b| *b = false);
        self.z.iter_mut().for_each(|b| *b = false);
        self.live.iter_mut().for_each(|b| *b = true);
    }

    pub fn x_flip(&self, slot: usize) -> bool {
        self.x[slot]
    }

    pub fn z_flip(&self, slot: usize) -> bool {
        self.z[slot]
    }

    pub fn is_live(&self, slot: usize) -> bool {
        self.live[slot]
    }

    pub fn flip_x(&mut self, slot: usize) {
        self.x[slot] = !self.x[slot];
    }

    pub fn flip_z(&mut self, slot: usize) {
        self.z[slot] = !self.z[slot];
    }

    fn retire(&mut self, slot: usize) {
        self.live[slot] = false;
    }
}

/// Clifford gates the frame tracker understands. Pauli gates are listed for
/// completeness; they commute with frames up to phase and act as no-ops.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum CliffordGate {
    H,
    X,
    Y,
    Z,
    Cnot,
}

/// Conjugate the frame by a gate: H swaps X↔Z flips; CNOT copies the control's
/// X flip onto the target and the target's Z flip onto the control.
pub fn propagate(frame: &mut PauliFrame, gate: CliffordGate, targets: &[usize]) {
    match gate {
        CliffordGate::H => {
            let q = targets[0];
            let x = frame.x[q];
            let z = frame.z[q];
            frame.x[q] = z;
            frame.z[q] = x;
        }
        CliffordGate::X | CliffordGate::Y | CliffordGate::Z => {}
        CliffordGate::Cnot => {
            let (c, t) = (targets[0], targets[1]);
            if frame.x[c] {
                frame.x[t] = !frame.x[t];
            }
            if frame.z[t] {
                frame.z[c] = !frame.z[c];
            }
        }
    }
}

/// Measurement sampling per the error model: Z-basis outcomes are flipped by
/// X-type frame errors (and vice versa), plus a classical Bernoulli flip.
/// The qubit is retired. `ideal_outcome` is the noiseless circuit's outcome
/// under the precomputed outcome rule; trajectory interpretation passes
/// `false` (the difference convention described in the module docs).
pub fn sample_measurement<T: Scalar>(
    frame: &mut PauliFrame,
    slot: usize,
    basis: Basis,
    flip_prob: T,
    ideal_outcome: bool,
    rng: &mut impl Rng,
) -> Result<bool> {
    if !frame.is_live(slot) {
        return Err(SimError::InvalidParameter {
            name: "slot",
            reason: format!("measuring retired qubit slot {slot}"),
        });
    }
    let frame_flip = match basis {
        Basis::Z => frame.x[slot],
        Basis::X => frame.z[slot],
    };
    frame.retire(slot);
    Ok(ideal_outcome ^ frame_flip ^ bernoulli(rng, flip_prob))
}

fn bernoulli<T: Scalar>(rng: &mut impl Rng, p: T) -> bool {
    if p <= T::zero() {
        return false;
    }
    rng.random::<f64>() < p.as_f64()
}

// ----- compiled noise -----

/// Noise channels of the pipeline, in sampling form.
#[derive(Clone, Debug)]
pub enum CompiledNoise<T: Scalar> {
    /// Single-qubit Pauli channel.
    Single(PauliWeights<T>),
    /// Gate depolarization: after the ideal gate, a uniformly random two-qubit
    /// Pauli (identity included) with probability `p`. Equivalent to keeping
    /// the pair with probability 1−p+p/16 and each of the 15 non-identity
    /// Paulis with probability p/16.
    CnotDepol { p: T },
    /// Group depolarization: with probability 1−keep, a uniformly random
    /// Pauli on every listed qubit (the isotropic pair/encoded forms).
    Group { keep: T },
}

/// Descriptions of channels accepted by [`compile_noise`].
#[derive(Clone, Copy, Debug)]
pub enum NoiseChannel<T: Scalar> {
    /// The two-qubit gate error model with depolarization probability β.
    GateDepolarization { beta: T },
    /// Single-qubit decoherence at fidelity λ₂.
    QubitDecay { lam2: T },
    /// Isotropic pair decoherence at fidelity λ₄.
    PairIsotropic { lam4: T },
    /// Isotropic six-qubit decoherence at fidelity λ₆₄.
    EncodedIsotropic { lam64: T },
}

/// Compile a channel into its Pauli sampling table.
pub fn compile_noise<T: Scalar>(channel: NoiseChannel<T>) -> Result<CompiledNoise<T>> {
    match channel {
        NoiseChannel::GateDepolarization { beta } => {
            if beta < T::zero() || beta > T::one() {
                return Err(SimError::out_of_range("beta", beta, 0.0, 1.0));
            }
            Ok(CompiledNoise::CnotDepol { p: beta })
        }
        NoiseChannel::QubitDecay { lam2 } => {
            Ok(CompiledNoise::Single(crate::noise::pauli_weights(lam2)?))
        }
        NoiseChannel::PairIsotropic { lam4 } => {
            Ok(CompiledNoise::Group { keep: crate::noise::pair_keep_prob(lam4)? })
        }
        NoiseChannel::EncodedIsotropic { lam64 } => {
            Ok(CompiledNoise::Group { keep: crate::noise::encoded_keep_prob(lam64)? })
        }
    }
}

fn draw_single<T: Scalar>(
    frame: &mut PauliFrame,
    slot: usize,
    w: &PauliWeights<T>,
    rng: &mut impl Rng,
) {
    let u = T::of(rng.random::<f64>());
    if u < w.w_i {
        return;
    }
    if u < w.w_i + w.w_x {
        frame.flip_x(slot);
    } else if u < w.w_i + w.w_x + w.w_y {
        frame.flip_x(slot);
        frame.flip_z(slot);
    } else {
        frame.flip_z(slot);
    }
}

fn draw_uniform_pauli(frame: &mut PauliFrame, slot: usize, rng: &mut impl Rng) {
    match rng.random_range(0..4u8) {
        0 => {}
        1 => frame.flip_x(slot),
        2 => {
            frame.flip_x(slot);
            frame.flip_z(slot);
        }
        _ => frame.flip_z(slot),
    }
}

// ----- trajectory specification -----

/// One step of a trajectory. Slots refer to the frame; records to the
/// classical outcome-difference store.
#[derive(Clone, Debug)]
pub enum Event<T: Scalar> {
    Gate { gate: CliffordGate, targets: [u32; 2] },
    /// Single-qubit Pauli draw.
    Draw1 { slot: u32, weights: PauliWeights<T> },
    /// Two-qubit gate depolarization draw (after the ideal gate).
    DrawCnot { slots: [u32; 2], p: T },
    /// Uniform Pauli on every listed slot with probability 1−keep.
    DrawGroup { slots: Vec<u32>, keep: T },
    /// Measure and retire; stores the outcome difference into `record`.
    Measure { slot: u32, basis: Basis, flip: T, record: u32 },
    /// record ← XOR of the listed records.
    DeriveXor { record: u32, sources: Vec<u32> },
    /// Frame correction conditioned on recorded bits (XOR of sources).
    FrameXor { slot: u32, axis: FrameAxis, sources: Vec<u32> },
    /// Post-selection: all listed records must agree.
    CheckAgree { sources: Vec<u32> },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum FrameAxis {
    X,
    Z,
}

/// Final readout description: the two end banks and the readout flip
/// probability (nuclear measurement).
#[derive(Clone, Debug)]
pub struct ReadoutSpec<T: Scalar> {
    pub bank_a: Vec<u32>,
    pub bank_b: Vec<u32>,
    pub flip: T,
}

/// A compiled chain: slot count, ordered events, classical record count and
/// the final readout.
#[derive(Clone, Debug)]
pub struct TrajectorySpec<T: Scalar> {
    pub num_slots: usize,
    pub num_records: usize,
    pub events: Vec<Event<T>>,
    pub readout: ReadoutSpec<T>,
}

/// Raw per-trajectory functionals: bank error masks for both bases plus the
/// swap-stage acceptance flag.
#[derive(Clone, Copy, Debug)]
pub struct TrajectoryOutcome {
    pub swap_accept: bool,
    pub z_err_a: u8,
    pub z_err_b: u8,
    pub x_err_a: u8,
    pub x_err_b: u8,
}

/// Run one trajectory with the given RNG.
pub fn run_one<T: Scalar>(
    spec: &TrajectorySpec<T>,
    frame: &mut PauliFrame,
    records: &mut [bool],
    rng: &mut impl Rng,
) -> TrajectoryOutcome {
    frame.reset();
    records.iter_mut().for_each(|r| *r = false);
    let mut accept = true;

    for ev in &spec.events {
        match ev {
            Event::Gate { gate, targets } => {
                propagate(frame, *gate, &[targets[0] as usize, targets[1] as usize]);
            }
            Event::Draw1 { slot, weights } => draw_single(frame, *slot as usize, weights, rng),
            Event::DrawCnot { slots, p } => {
                if bernoulli(rng, *p) {
                    draw_uniform_pauli(frame, slots[0] as usize, rng);
                    draw_uniform_pauli(frame, slots[1] as usize, rng);
                }
            }
            Event::DrawGroup { slots, keep } => {
                if bernoulli(rng, T::one() - *keep) {
                    for &s in slots {
                        draw_uniform_pauli(frame, s as usize, rng);
                    }
                }
            }
            Event::Measure { slot, basis, flip, record } => {
                let bit = sample_measurement(frame, *slot as usize, *basis, *flip, false, rng)
                    .expect("retired slot in spec");
                records[*record as usize] = bit;
            }
            Event::DeriveXor { record, sources } => {
                let mut bit = false;
                for &s in sources {
                    bit ^= records[s as usize];
                }
                records[*record as usize] = bit;
            }
            Event::FrameXor { slot, axis, sources } => {
                let mut bit = false;
                for &s in sources {
                    bit ^= records[s as usize];
                }
                if bit {
                    match axis {
                        FrameAxis::X => frame.flip_x(*slot as usize),
                        FrameAxis::Z => frame.flip_z(*slot as usize),
                    }
                }
            }
            Event::CheckAgree { sources } => {
                let first = records[sources[0] as usize];
                if sources.iter().any(|&s| records[s as usize] != first) {
                    accept = false;
                }
            }
        }
    }

    let mut out = TrajectoryOutcome {
        swap_accept: accept,
        z_err_a: 0,
        z_err_b: 0,
        x_err_a: 0,
        x_err_b: 0,
    };
    for (i, &s) in spec.readout.bank_a.iter().enumerate() {
        let s = s as usize;
        if frame.x_flip(s) ^ bernoulli(rng, spec.readout.flip) {
            out.z_err_a |= 1 << i;
        }
        if frame.z_flip(s) ^ bernoulli(rng, spec.readout.flip) {
            out.x_err_a |= 1 << i;
        }
    }
    for (i, &s) in spec.readout.bank_b.iter().enumerate() {
        let s = s as usize;
        if frame.x_flip(s) ^ bernoulli(rng, spec.readout.flip) {
            out.z_err_b |= 1 << i;
        }
        if frame.z_flip(s) ^ bernoulli(rng, spec.readout.flip) {
            out.x_err_b |= 1 << i;
        }
    }
    out
}

// ----- aggregation -----

/// Sufficient statistics over a batch of trajectories for every decoder.
#[derive(Clone, Copy, Default, Debug, PartialEq, Eq)]
pub struct TrajectoryCounts {
    pub samples: u64,
    pub swap_accepted: u64,
    /// Among swap-accepted: majority-decoded logical Z mismatch.
    pub maj_z_err: u64,
    /// Swap-accepted rounds in which both banks were unanimous in Z.
    pub ed_z_accepted: u64,
    /// Among `ed_z_accepted`: logical Z mismatch.
    pub ed_z_err: u64,
    /// Among swap-accepted: parity-decoded logical X mismatch.
    pub x_err: u64,
}

impl TrajectoryCounts {
    fn add(&mut self, other: &TrajectoryCounts) {
        self.samples += other.samples;
        self.swap_accepted += other.swap_accepted;
        self.maj_z_err += other.maj_z_err;
        self.ed_z_accepted += other.ed_z_accepted;
        self.ed_z_err += other.ed_z_err;
        self.x_err += other.x_err;
    }

    pub fn record(&mut self, m: usize, out: &TrajectoryOutcome) {
        self.samples += 1;
        if !out.swap_accept {
            return;
        }
        self.swap_accepted += 1;
        let maj_a = majority_mask(out.z_err_a, m);
        let maj_b = majority_mask(out.z_err_b, m);
        if maj_a != maj_b {
            self.maj_z_err += 1;
        }
        if unanimous_mask(out.z_err_a, m) && unanimous_mask(out.z_err_b, m) {
            self.ed_z_accepted += 1;
            if (out.z_err_a != 0) != (out.z_err_b != 0) {
                self.ed_z_err += 1;
            }
        }
        if parity_mask(out.x_err_a, m) != parity_mask(out.x_err_b, m) {
            self.x_err += 1;
        }
    }
}

/// Majority vote over the low `m` bits of an error mask.
pub fn majority_mask(mask: u8, m: usize) -> bool {
    (mask & ((1 << m) - 1)).count_ones() as usize * 2 > m
}

/// All of the low `m` bits equal.
pub fn unanimous_mask(mask: u8, m: usize) -> bool {
    let lim = mask & ((1 << m) - 1);
    lim == 0 || lim == (1 << m) - 1
}

/// XOR over the low `m` bits.
pub fn parity_mask(mask: u8, m: usize) -> bool {
    (mask & ((1 << m) - 1)).count_ones() % 2 == 1
}

/// An estimated ratio with its binomial standard error.
#[derive(Clone, Copy, Debug)]
pub struct Estimate<T: Scalar> {
    pub value: T,
    pub stderr: T,
}

impl<T: Scalar> Estimate<T> {
    pub fn ratio(hits: u64, trials: u64) -> Option<Self> {
        if trials == 0 {
            return None;
        }
        let n = T::of(trials as f64);
        let p = T::of(hits as f64) / n;
        let stderr = (p * (T::one() - p) / n).sqrt();
        Some(Estimate { value: p, stderr })
    }
}

/// QBER and acceptance estimates produced by the sampler.
#[derive(Clone, Copy, Debug)]
pub struct QberEstimates<T: Scalar> {
    pub counts: TrajectoryCounts,
    pub m: usize,
    _marker: std::marker::PhantomData<T>,
}

impl<T: Scalar> QberEstimates<T> {
    /// Swap-stage acceptance (common to both decoders).
    pub fn swap_acceptance(&self) -> Estimate<T> {
        Estimate::ratio(self.counts.swap_accepted, self.counts.samples)
            .expect("samples >= 1 enforced at entry")
    }

    /// Majority decoder: (Q_z, Q_x, acceptance).
    pub fn majority(&self) -> (Option<Estimate<T>>, Option<Estimate<T>>, Estimate<T>) {
        (
            Estimate::ratio(self.counts.maj_z_err, self.counts.swap_accepted),
            Estimate::ratio(self.counts.x_err, self.counts.swap_accepted),
            self.swap_acceptance(),
        )
    }

    /// Error-detecting decoder: (Q_z, Q_x, acceptance). The acceptance is the
    /// Z-round (key-round) acceptance; Q_x is conditioned on the swap stage
    /// only since X rounds carry no repetition-code check.
    pub fn error_detect(&self) -> (Option<Estimate<T>>, Option<Estimate<T>>, Estimate<T>) {
        (
            Estimate::ratio(self.counts.ed_z_err, self.counts.ed_z_accepted),
            Estimate::ratio(self.counts.x_err, self.counts.swap_accepted),
            Estimate::ratio(self.counts.ed_z_accepted, self.counts.samples)
                .expect("samples >= 1 enforced at entry"),
        )
    }
}

/// Run `samples` independent trajectories and aggregate. Deterministic for a
/// fixed (spec, samples, seed) regardless of worker count: each trajectory
/// draws from its own counter-derived ChaCha stream and the integer counters
/// are summed order-independently.
pub fn estimate_qber<T: Scalar>(
    spec: &TrajectorySpec<T>,
    m: usize,
    samples: u64,
    seed: u64,
) -> Result<QberEstimates<T>> {
    if samples == 0 {
        return Err(SimError::InvalidParameter {
            name: "samples",
            reason: "need at least one sample".into(),
        });
    }
    const CHUNK: u64 = 4096;
    let chunks: Vec<u64> = (0..samples.div_ceil(CHUNK)).collect();
    let counts = chunks
        .par_iter()
        .map(|&chunk| {
            let mut frame = PauliFrame::new(spec.num_slots);
            let mut records = vec![false; spec.num_records];
            let mut local = TrajectoryCounts::default();
            let lo = chunk * CHUNK;
            let hi = (lo + CHUNK).min(samples);
            for traj in lo..hi {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(traj);
                let out = run_one(spec, &mut frame, &mut records, &mut rng);
                local.record(m, &out);
            }
            local
        })
        .reduce(TrajectoryCounts::default, |mut a, b| {
            a.add(&b);
            a
        });
    Ok(QberEstimates { counts, m, _marker: std::marker::PhantomData })
}
