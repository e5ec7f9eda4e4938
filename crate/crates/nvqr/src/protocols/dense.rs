//! Dense-engine realization of the pipeline stages.
//!
//! The chain is composed by pairwise doubling over identically prepared
//! segments: swap instruments are compiled once into two-qubit POVMs on a
//! four-qubit register (two code qubits plus the mediator pair), so the
//! largest live register during composition is 12 qubits and only for the
//! first transversal instrument of a merge, which is applied fused with the
//! tensor product.

use num_complex::Complex;

use crate::error::{Result, SimError};
use crate::noise::{
    bell_pair_fidelity, depolarize_encoded_approx, depolarize_pair_approx, single_qubit_fidelity,
};
use crate::qstate::gates::Pauli;
use crate::qstate::{
    Basis, DensityMatrix, InstrumentOutcome, MeasurementInstrument, OutcomeOp, QubitLabel,
    SmallMat, StateVector, SwapOutcome,
};
use crate::scalar::Scalar;
use crate::timing::heralding_period;

use super::{BankState, ChainModel, DecodeOutcome, SystemParams};

fn nuc(node: u32, i: usize) -> QubitLabel {
    QubitLabel::nuclear(node, i as u8)
}

fn ele(node: u32, i: usize) -> QubitLabel {
    QubitLabel::electron(node, i as u8)
}

/// Probability-weighted average over measurement branches, applying an
/// outcome-conditioned correction to each branch.
fn measure_average<T: Scalar>(
    rho: DensityMatrix<T>,
    target: QubitLabel,
    basis: Basis,
    err: T,
    mut correct: impl FnMut(u8, DensityMatrix<T>) -> Result<DensityMatrix<T>>,
) -> Result<DensityMatrix<T>> {
    let branches = rho.measure_noisy(target, basis, err)?;
    let mut acc: Option<DensityMatrix<T>> = None;
    for br in branches {
        if br.probability <= T::of(1e-300) {
            continue;
        }
        let corrected = correct(br.outcome, br.post_state)?;
        match &mut acc {
            None => {
                let mut st = corrected;
                for v in st.data_mut() {
                    *v *= br.probability;
                }
                acc = Some(st);
            }
            Some(st) => {
                for (a, b) in st.data_mut().iter_mut().zip(corrected.data().iter()) {
                    *a += *b * br.probability;
                }
            }
        }
    }
    acc.ok_or(SimError::ZeroAcceptance)
}

/// Outcome bits, joint probability and post-state of one measurement branch.
type Branch<T> = (Vec<u8>, T, DensityMatrix<T>);

/// Expand joint measurement branches over several qubits (kept separate so
/// corrections may depend on outcome combinations).
fn measure_branches<T: Scalar>(
    rho: DensityMatrix<T>,
    targets: &[(QubitLabel, Basis, T)],
) -> Result<Vec<Branch<T>>> {
    let mut branches = vec![(Vec::new(), T::one(), rho)];
    for &(label, basis, err) in targets {
        let mut next = Vec::with_capacity(branches.len() * 2);
        for (outs, p, st) in branches {
            for br in st.measure_noisy(label, basis, err)? {
                let joint = p * br.probability;
                if joint <= T::of(1e-300) {
                    continue;
                }
                let mut outs = outs.clone();
                outs.push(br.outcome);
                next.push((outs, joint, br.post_state));
            }
        }
        branches = next;
    }
    Ok(branches)
}

fn weighted_sum<T: Scalar>(parts: Vec<(T, DensityMatrix<T>)>) -> Result<DensityMatrix<T>> {
    let mut acc: Option<DensityMatrix<T>> = None;
    for (w, st) in parts {
        match &mut acc {
            None => {
                let mut st = st;
                for v in st.data_mut() {
                    *v *= w;
                }
                acc = Some(st);
            }
            Some(a) => {
                for (x, y) in a.data_mut().iter_mut().zip(st.data().iter()) {
                    *x += *y * w;
                }
            }
        }
    }
    acc.ok_or(SimError::ZeroAcceptance)
}

// ----- elementary link -----

/// Heralded nuclear-nuclear pair over one elementary link of length `l0`:
/// a Werner electron pair at fidelity λ₄ᵉ(T₀) stored into the nuclear spins
/// with noisy CNOTs and noisy X-basis electron readouts.
pub fn elementary_link_state<T: Scalar>(
    params: &SystemParams<T>,
    l0: T,
) -> Result<DensityMatrix<T>> {
    params.validate()?;
    let t0 = heralding_period(l0, params.link.c)?;
    let lam2 = single_qubit_fidelity(t0, params.decoherence.tau_e)?;
    let f0 = bell_pair_fidelity(lam2)?;
    link_state_from_f0(f0, params.beta, params.delta)
}

pub(crate) fn link_state_from_f0<T: Scalar>(
    f0: T,
    beta: T,
    delta: T,
) -> Result<DensityMatrix<T>> {
    let (e_l, e_r) = (ele(0, 0), ele(1, 0));
    let (n_l, n_r) = (nuc(0, 0), nuc(1, 0));
    let rho = DensityMatrix::werner(e_l, e_r, f0)?
        .tensor(&DensityMatrix::basis_state(vec![n_l], 0)?)?
        .tensor(&DensityMatrix::basis_state(vec![n_r], 0)?)?;
    let rho = rho.apply_cnot_noisy(e_l, n_l, beta)?;
    let rho = rho.apply_cnot_noisy(e_r, n_r, beta)?;
    let rho = measure_average(rho, e_l, Basis::X, delta, |o, st| {
        if o == 1 {
            st.apply_pauli(Pauli::Z, n_l)
        } else {
            Ok(st)
        }
    })?;
    let rho = measure_average(rho, e_r, Basis::X, delta, |o, st| {
        if o == 1 {
            st.apply_pauli(Pauli::Z, n_r)
        } else {
            Ok(st)
        }
    })?;
    rho.permuted(&[n_l, n_r])
}

// ----- remote CNOT encode -----

/// Fuse three nuclear Bell pairs into the six-qubit encoded pair, measuring
/// only electron spins.
///
/// The pairs first decohere for `t_wait` (pair-isotropic form). The A-side
/// electron bank is prepared error-free in the logical plus state (a GHZ),
/// each nuclear A qubit is CNOT-copied onto its electron, and the electrons
/// are read in Z: outcome differences drive X corrections on the pairs. The
/// B-side electron bank starts in |000⟩; each nuclear B qubit is CNOT-copied
/// onto its electron, which is read in X, kicking a known Z back onto the
/// nuclear spin. Output register order: [A₁ A₂ A₃ B₁ B₂ B₃].
pub fn remote_cnot_encode<T: Scalar>(
    pairs: &[DensityMatrix<T>; 3],
    params: &SystemParams<T>,
    t_wait: T,
) -> Result<DensityMatrix<T>> {
    params.validate()?;
    let lam2 = single_qubit_fidelity(t_wait, params.decoherence.tau_n)?;
    let lam4 = bell_pair_fidelity(lam2)?;
    encode_banks(pairs, lam4, params.beta, params.delta)
}

pub(crate) fn encode_banks<T: Scalar>(
    pairs: &[DensityMatrix<T>; 3],
    lam4_t1: T,
    beta: T,
    delta: T,
) -> Result<DensityMatrix<T>> {
    let mut seg: Option<DensityMatrix<T>> = None;
    for (i, pair) in pairs.iter().enumerate() {
        if pair.num_qubits() != 2 {
            return Err(SimError::DimensionMismatch { expected: 2, got: pair.num_qubits() });
        }
        let relabeled =
            DensityMatrix::from_raw(vec![nuc(0, i), nuc(1, i)], pair.data().to_vec());
        let decohered =
            depolarize_pair_approx(&relabeled, &[nuc(0, i), nuc(1, i)], lam4_t1)?;
        seg = Some(match seg {
            None => decohered,
            Some(s) => s.tensor(&decohered)?,
        });
    }
    let seg = seg.expect("three pairs");

    // A side: error-free GHZ electron bank, CNOT(nuclear -> electron), Z reads.
    let a_bank: Vec<QubitLabel> = (0..3).map(|i| ele(0, i)).collect();
    let ghz = DensityMatrix::pure(&StateVector::ghz(a_bank.clone()))?;
    let mut reg = seg.tensor(&ghz)?;
    for i in 0..3 {
        reg = reg.apply_cnot_noisy(nuc(0, i), ele(0, i), beta)?;
    }
    let meas: Vec<(QubitLabel, Basis, T)> =
        a_bank.iter().map(|&l| (l, Basis::Z, delta)).collect();
    let branches = measure_branches(reg, &meas)?;
    let mut parts = Vec::with_capacity(branches.len());
    for (outs, p, st) in branches {
        let mut st = st;
        for i in 1..3 {
            if outs[i] != outs[0] {
                st = st.apply_pauli(Pauli::X, nuc(0, i))?.apply_pauli(Pauli::X, nuc(1, i))?;
            }
        }
        parts.push((p, st));
    }
    let mut reg = weighted_sum(parts)?;

    // B side: |0⟩ electrons, CNOT(nuclear -> electron), X reads with Z kickback.
    for i in 0..3 {
        let fresh = DensityMatrix::basis_state(vec![ele(1, i)], 0)?;
        reg = reg.tensor(&fresh)?;
        reg = reg.apply_cnot_noisy(nuc(1, i), ele(1, i), beta)?;
        reg = measure_average(reg, ele(1, i), Basis::X, delta, |o, st| {
            if o == 1 {
                st.apply_pauli(Pauli::Z, nuc(1, i))
            } else {
                Ok(st)
            }
        })?;
    }
    reg.permuted(&[nuc(0, 0), nuc(0, 1), nuc(0, 2), nuc(1, 0), nuc(1, 1), nuc(1, 2)])
}

// ----- measurement effects -----

fn z_effect<T: Scalar>(outcome: u8, flip: T) -> [[Complex<T>; 2]; 2] {
    let keep = Complex::from(T::one() - flip);
    let err = Complex::from(flip);
    let z = Complex::<T>::default();
    if outcome == 0 {
        [[keep, z], [z, err]]
    } else {
        [[err, z], [z, keep]]
    }
}

fn x_effect<T: Scalar>(outcome: u8, flip: T) -> [[Complex<T>; 2]; 2] {
    let half = T::of(0.5);
    // (1-f)·P_o + f·P_{1-o}; P_± = (I ± X)/2.
    let diag = Complex::from(half);
    let sign = if outcome == 0 { T::one() } else { -T::one() };
    let off = Complex::from(half * sign * (T::one() - flip - flip));
    [[diag, off], [off, diag]]
}

/// Contract `rho` against a product of single-qubit effects; the optional
/// `keep` qubit survives as a 2x2 operator, otherwise the result is 1x1
/// (the outcome probability functional).
fn effect_contract<T: Scalar>(
    rho: &DensityMatrix<T>,
    effects: &[(QubitLabel, [[Complex<T>; 2]; 2])],
    keep: Option<QubitLabel>,
) -> Result<SmallMat<T>> {
    let k = rho.num_qubits();
    let dim = rho.dim();
    let mut eff_by_pos: Vec<Option<&[[Complex<T>; 2]; 2]>> = vec![None; k];
    for (label, eff) in effects {
        let pos = rho
            .labels()
            .iter()
            .position(|l| l == label)
            .ok_or(SimError::LabelNotFound(*label))?;
        eff_by_pos[pos] = Some(eff);
    }
    let keep_pos = match keep {
        Some(label) => Some(
            rho.labels()
                .iter()
                .position(|l| l == &label)
                .ok_or(SimError::LabelNotFound(label))?,
        ),
        None => None,
    };
    let out_dim = if keep_pos.is_some() { 2 } else { 1 };
    let mut out = SmallMat::zeros(out_dim);
    for r in 0..dim {
        for c in 0..dim {
            let v = rho.entry(r, c);
            if v.re == T::zero() && v.im == T::zero() {
                continue;
            }
            let mut w: Complex<T> = Complex::new(T::one(), T::zero());
            let mut skip = false;
            for pos in 0..k {
                let rb = (r >> (k - 1 - pos)) & 1;
                let cb = (c >> (k - 1 - pos)) & 1;
                if Some(pos) == keep_pos {
                    continue;
                }
                match eff_by_pos[pos] {
                    Some(eff) => w *= eff[cb][rb],
                    None => {
                        if rb != cb {
                            skip = true;
                            break;
                        }
                    }
                }
            }
            if skip {
                continue;
            }
            let (p, q) = match keep_pos {
                Some(pos) => ((r >> (k - 1 - pos)) & 1, (c >> (k - 1 - pos)) & 1),
                None => (0, 0),
            };
            let cur = out.get(p, q);
            out.set(p, q, cur + w * v);
        }
    }
    Ok(out)
}

// ----- swap instrument -----

/// Quality of the electron-electron pair mediating a swap.
#[derive(Clone, Copy, Debug)]
pub enum MediatorKind<T: Scalar> {
    /// Same-node NV pair: used immediately, treated as ideal.
    CoLocated,
    /// Link-spanning pair: Werner at the heralded-pair fidelity.
    Remote { fidelity: T },
}

/// Compile the mediated Bell-state measurement into a four-outcome POVM on
/// two nuclear qubits. Per NV: noisy CNOT(electron → nuclear), noisy X read
/// of the electron first (δ, yielding the phase bit), then the effective
/// noisy Z read of the nuclear spin (β+δ, yielding the parity bit via the
/// remapping CNOT absorbed into the flip probability). This ordering puts
/// the expensive nuclear readout on the repetition-code-protected parity
/// channel and the cheap electron readout on the unprotected phase channel.
pub fn mediated_bsm_instrument<T: Scalar>(
    params: &SystemParams<T>,
    mediator: MediatorKind<T>,
) -> Result<MeasurementInstrument<T>> {
    params.validate()?;
    let fid = match mediator {
        MediatorKind::CoLocated => None,
        MediatorKind::Remote { fidelity } => Some(fidelity),
    };
    compile_swap_instrument(params.beta, params.delta, fid)
}

pub(crate) fn compile_swap_instrument<T: Scalar>(
    beta: T,
    delta: T,
    mediator_fidelity: Option<T>,
) -> Result<MeasurementInstrument<T>> {
    let (n1, n2) = (nuc(0, 0), nuc(1, 0));
    let (e1, e2) = (ele(0, 0), ele(1, 0));
    let med = match mediator_fidelity {
        None => DensityMatrix::bell_phi_plus(e1, e2)?,
        Some(f) => DensityMatrix::werner(e1, e2, f)?,
    };
    let nuclear_flip = beta + delta;
    let mut elements = vec![SmallMat::<T>::zeros(4); 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut unit = vec![Complex::<T>::default(); 16];
            unit[i * 4 + j] = Complex::from(T::one());
            let rho = DensityMatrix::from_raw(vec![n1, n2], unit)
                .tensor(&med)?
                .apply_cnot_noisy(e1, n1, beta)?
                .apply_cnot_noisy(e2, n2, beta)?;
            for z1 in 0..2u8 {
                for z2 in 0..2u8 {
                    for x1 in 0..2u8 {
                        for x2 in 0..2u8 {
                            let effects = [
                                (n1, z_effect(z1, nuclear_flip)),
                                (n2, z_effect(z2, nuclear_flip)),
                                (e1, x_effect(x1, delta)),
                                (e2, x_effect(x2, delta)),
                            ];
                            let p = effect_contract(&rho, &effects, None)?.get(0, 0);
                            let class = SwapOutcome {
                                parity: (z1 ^ z2) == 1,
                                phase: (x1 ^ x2) == 1,
                            };
                            let e = &mut elements[class.index()];
                            let cur = e.get(j, i);
                            e.set(j, i, cur + p);
                        }
                    }
                }
            }
        }
    }
    let outcomes = SwapOutcome::ALL
        .iter()
        .map(|&value| InstrumentOutcome {
            value,
            op: OutcomeOp::Povm(elements[value.index()].clone()),
        })
        .collect();
    MeasurementInstrument::new(2, outcomes)
}

// ----- end teleport (P2/P4 final mediator link) -----

fn conj_pauli<T: Scalar>(m: &SmallMat<T>, x: bool, z: bool) -> SmallMat<T> {
    let mut out = m.clone();
    if x {
        let a = out.get(0, 0);
        let b = out.get(0, 1);
        let c = out.get(1, 0);
        let d = out.get(1, 1);
        out.set(0, 0, d);
        out.set(0, 1, c);
        out.set(1, 0, b);
        out.set(1, 1, a);
    }
    if z {
        out.set(0, 1, -out.get(0, 1));
        out.set(1, 0, -out.get(1, 0));
    }
    out
}

/// A one-qubit channel by basis images: images[i][j] = Λ(|i⟩⟨j|).
pub type QubitChannelImages<T> = [[SmallMat<T>; 2]; 2];

/// Compile the end-of-chain teleport: the left NV performs its half of the
/// mediated BSM on the last code qubit, the right NV stores the surviving
/// mediator half into a fresh nuclear spin. Returns the four-outcome
/// instrument plus the correction-folded single-qubit channel used when the
/// outcome classes are not needed downstream.
pub fn end_teleport_instrument<T: Scalar>(
    params: &SystemParams<T>,
    mediator_fidelity: T,
) -> Result<(MeasurementInstrument<T>, QubitChannelImages<T>)> {
    params.validate()?;
    compile_teleport(params.beta, params.delta, mediator_fidelity)
}

pub(crate) fn compile_teleport<T: Scalar>(
    beta: T,
    delta: T,
    mediator_fidelity: T,
) -> Result<(MeasurementInstrument<T>, QubitChannelImages<T>)> {
    let n_in = nuc(0, 0);
    let (e, ep) = (ele(0, 0), ele(1, 0));
    let n_out = nuc(1, 0);
    let med = DensityMatrix::werner(e, ep, mediator_fidelity)?;
    let fresh = DensityMatrix::basis_state(vec![n_out], 0)?;
    let nuclear_flip = beta + delta;

    let zero = || SmallMat::<T>::zeros(2);
    let mut images: Vec<[[SmallMat<T>; 2]; 2]> = (0..4)
        .map(|_| [[zero(), zero()], [zero(), zero()]])
        .collect();
    for i in 0..2 {
        for j in 0..2 {
            let mut unit = vec![Complex::<T>::default(); 4];
            unit[i * 2 + j] = Complex::from(T::one());
            // Left NV: its BSM half with CNOT(electron -> nuclear), X read of
            // the electron (δ, phase half), effective Z read of the nuclear
            // spin (β+δ, parity half). Right NV: storage transfer.
            let rho = DensityMatrix::from_raw(vec![n_in], unit)
                .tensor(&med)?
                .tensor(&fresh)?
                .apply_cnot_noisy(e, n_in, beta)?
                .apply_cnot_noisy(ep, n_out, beta)?;
            for z in 0..2u8 {
                for x in 0..2u8 {
                    for xp in 0..2u8 {
                        let effects = [
                            (n_in, z_effect(z, nuclear_flip)),
                            (e, x_effect(x, delta)),
                            (ep, x_effect(xp, delta)),
                        ];
                        let chi = effect_contract(&rho, &effects, Some(n_out))?;
                        let class =
                            SwapOutcome { parity: z == 1, phase: (x ^ xp) == 1 };
                        images[class.index()][i][j].add_assign(&chi);
                    }
                }
            }
        }
    }

    // Correction-folded channel: conjugate each class by X^p Z^q and sum.
    let mut folded = [[zero(), zero()], [zero(), zero()]];
    for class in SwapOutcome::ALL {
        for i in 0..2 {
            for j in 0..2 {
                let corrected =
                    conj_pauli(&images[class.index()][i][j], class.parity, class.phase);
                folded[i][j].add_assign(&corrected);
            }
        }
    }

    let outcomes = SwapOutcome::ALL
        .iter()
        .map(|&value| InstrumentOutcome {
            value,
            op: OutcomeOp::QubitMap(Box::new(images[value.index()].clone())),
        })
        .collect();
    Ok((MeasurementInstrument::new(1, outcomes)?, folded))
}

// ----- chain composition -----

/// Exact end-to-end dense state plus the accumulated swap acceptance.
#[derive(Clone, Debug)]
pub struct DenseFinal<T: Scalar> {
    /// Post-selected, normalized end-to-end bank pair ([left bank, right bank]).
    pub banks: BankState<T>,
    /// Probability that every swap-stage check passed.
    pub swap_acceptance: T,
    pub readout_flip: T,
}

fn bank_labels(m: usize) -> Vec<QubitLabel> {
    let mut v: Vec<QubitLabel> = (0..m).map(|i| nuc(0, i)).collect();
    v.extend((0..m).map(|i| nuc(1, i)));
    v
}

fn project_isotropic<T: Scalar>(seg: &DensityMatrix<T>, m: usize) -> Result<DensityMatrix<T>> {
    let labels = seg.labels().to_vec();
    let ideal = StateVector::ghz(labels.clone());
    let f = seg.fidelity(&ideal)?;
    let pure = DensityMatrix::pure(&ideal)?;
    if m == 3 {
        let six: [QubitLabel; 6] = labels.try_into().expect("encoded segment");
        depolarize_encoded_approx(&pure, &six, f)
    } else {
        let two: [QubitLabel; 2] = labels.try_into().expect("pair segment");
        depolarize_pair_approx(&pure, &two, f)
    }
}

/// Merge two copies of a segment through transversal swap instruments.
/// Returns the post-selected normalized merged segment and its acceptance.
fn merge_segments<T: Scalar>(
    seg: &DensityMatrix<T>,
    instrument: &MeasurementInstrument<T>,
    m: usize,
) -> Result<(DensityMatrix<T>, T)> {
    let right = seg.relabel(|l| QubitLabel { node: l.node + 2, ..l })?;
    let elements: Vec<SmallMat<T>> = instrument
        .outcomes()
        .iter()
        .map(|o| match &o.op {
            OutcomeOp::Povm(e) => Ok(e.clone()),
            _ => Err(SimError::InvalidParameter {
                name: "instrument",
                reason: "swap instrument must be POVM-form".into(),
            }),
        })
        .collect::<Result<_>>()?;
    let classes: Vec<SwapOutcome> = instrument.outcomes().iter().map(|o| o.value).collect();

    // First transversal instrument fused with the tensor product.
    let stage1 = DensityMatrix::tensor_then_povm(seg, &right, nuc(1, 0), nuc(2, 0), &elements)?;
    let mut branches: Vec<(Vec<SwapOutcome>, DensityMatrix<T>)> = stage1
        .into_iter()
        .zip(classes.iter())
        .map(|((_, st), &c)| (vec![c], st))
        .collect();
    for i in 1..m {
        let mut next = Vec::with_capacity(branches.len() * 4);
        for (outs, st) in branches {
            for ((_, sub), &c) in
                st.apply_povm(&[nuc(1, i), nuc(2, i)], &elements)?.into_iter().zip(classes.iter())
            {
                let mut outs = outs.clone();
                outs.push(c);
                next.push((outs, sub));
            }
        }
        branches = next;
    }

    let mut acc: Option<DensityMatrix<T>> = None;
    let mut acceptance = T::zero();
    for (outs, st) in branches {
        if m == 3 && !(outs[0].parity == outs[1].parity && outs[1].parity == outs[2].parity) {
            continue; // detected error: round discarded
        }
        let parity = outs[0].parity;
        let phase = outs.iter().fold(false, |acc, o| acc ^ o.phase);
        let mut st = st;
        if parity {
            for i in 0..m {
                st = st.apply_pauli(Pauli::X, nuc(3, i))?;
            }
        }
        if phase {
            st = st.apply_pauli(Pauli::Z, nuc(3, 0))?;
        }
        acceptance += st.trace();
        match &mut acc {
            None => acc = Some(st),
            Some(a) => {
                for (x, y) in a.data_mut().iter_mut().zip(st.data().iter()) {
                    *x += *y;
                }
            }
        }
    }
    let mut merged = acc.ok_or(SimError::ZeroAcceptance)?;
    if acceptance <= T::of(1e-300) {
        return Err(SimError::ZeroAcceptance);
    }
    let inv = T::one() / acceptance;
    for v in merged.data_mut() {
        *v *= inv;
    }
    let merged = merged.relabel(|l| {
        if l.node == 3 {
            QubitLabel { node: 1, ..l }
        } else {
            l
        }
    })?;
    // Keep the canonical [left bank, right bank] order.
    let merged = merged.permuted(&bank_labels(m))?;
    Ok((merged, acceptance))
}

/// Run the whole chain on the dense engine. With `project` set, every stage
/// output is replaced by its Werner/isotropic projection (the fully averaged
/// approximation used by the approx-analytic engine).
pub fn run_chain_dense<T: Scalar>(
    model: &ChainModel<T>,
    project: bool,
) -> Result<DenseFinal<T>> {
    let m = model.code_size;
    let link = link_state_from_f0(model.f0, model.beta, model.delta)?;

    let mut seg = if m == 3 {
        encode_banks(
            &[link.clone(), link.clone(), link],
            model.lam4_t1,
            model.beta,
            model.delta,
        )?
    } else {
        depolarize_pair_approx(&link, &[nuc(0, 0), nuc(1, 0)], model.lam4_t1)?
    };

    // Pre-swap decoherence while mediators are established.
    seg = if m == 3 {
        let labels: [QubitLabel; 6] = bank_labels(3).try_into().expect("six labels");
        depolarize_encoded_approx(&seg, &labels, model.pre_swap_fidelity)?
    } else {
        depolarize_pair_approx(&seg, &[nuc(0, 0), nuc(1, 0)], model.pre_swap_fidelity)?
    };
    if project {
        seg = project_isotropic(&seg, m)?;
    }

    let mediator = if model.protocol.remote_mediator() { Some(model.f0) } else { None };
    let instrument = compile_swap_instrument(model.beta, model.delta, mediator)?;

    let mut acceptance = T::one();
    let mut segments = model.num_segments;
    while segments > 1 {
        let (merged, acc) = merge_segments(&seg, &instrument, m)?;
        let swaps_at_level = (segments / 2) as i32;
        acceptance *= acc.powi(swaps_at_level);
        seg = if project { project_isotropic(&merged, m)? } else { merged };
        segments /= 2;
    }

    if model.has_end_teleport {
        let (_, channel) = compile_teleport(model.beta, model.delta, model.f0)?;
        for i in 0..m {
            seg = seg.apply_qubit_map(nuc(1, i), &channel, nuc(1, i))?;
        }
        if project {
            seg = project_isotropic(&seg, m)?;
        }
    }

    seg.debug_validate();
    Ok(DenseFinal {
        banks: BankState { code_size: m, state: seg },
        swap_acceptance: acceptance,
        readout_flip: model.nuclear_flip,
    })
}

// ----- decoding -----

/// Exact decode functionals of a dense final state, all conditional on the
/// swap-stage post-selection already baked into the state.
#[derive(Clone, Copy, Debug)]
pub struct DenseMeasures<T: Scalar> {
    pub swap_acceptance: T,
    /// P(majority-decoded logical Z mismatch).
    pub maj_z_err: T,
    /// P(both banks unanimous in Z).
    pub ed_unanimous: T,
    /// P(logical Z mismatch ∧ unanimous).
    pub ed_z_err: T,
    /// P(parity-decoded logical X mismatch).
    pub x_err: T,
}

fn popcount_majority(bits: usize, m: usize) -> bool {
    (bits & ((1 << m) - 1)).count_ones() as usize * 2 > m
}

fn popcount_unanimous(bits: usize, m: usize) -> bool {
    let v = bits & ((1 << m) - 1);
    v == 0 || v == (1 << m) - 1
}

fn popcount_parity(bits: usize, m: usize) -> bool {
    (bits & ((1 << m) - 1)).count_ones() % 2 == 1
}

/// Enumerate readout distributions of the final state in both bases.
pub fn decode_dense<T: Scalar>(final_state: &DenseFinal<T>) -> Result<DenseMeasures<T>> {
    let m = final_state.banks.code_size;
    let k = 2 * m;
    let dim = 1usize << k;
    let f = final_state.readout_flip;

    // P(observed | true) factorizes over qubits: f^h (1-f)^(k-h).
    let mut flip_pow = vec![T::one(); k + 1];
    for h in 1..=k {
        flip_pow[h] = flip_pow[h - 1] * f;
    }
    let mut keep_pow = vec![T::one(); k + 1];
    for h in 1..=k {
        keep_pow[h] = keep_pow[h - 1] * (T::one() - f);
    }

    let mut maj_z_err = T::zero();
    let mut ed_unanimous = T::zero();
    let mut ed_z_err = T::zero();
    let diag_z = final_state.banks.state.diagonal();
    for (t, &pt) in diag_z.iter().enumerate() {
        if pt <= T::of(1e-300) {
            continue;
        }
        for o in 0..dim {
            let h = (o ^ t).count_ones() as usize;
            let po = pt * flip_pow[h] * keep_pow[k - h];
            let a = o >> m;
            let b = o & ((1 << m) - 1);
            if popcount_majority(a, m) != popcount_majority(b, m) {
                maj_z_err += po;
            }
            if popcount_unanimous(a, m) && popcount_unanimous(b, m) {
                ed_unanimous += po;
                if (a != 0) != (b != 0) {
                    ed_z_err += po;
                }
            }
        }
    }

    let mut rho_x = final_state.banks.state.clone();
    for &l in final_state.banks.state.labels() {
        rho_x = rho_x.apply_unitary(&crate::qstate::gates::h(), &[l])?;
    }
    let diag_x = rho_x.diagonal();
    let mut x_err = T::zero();
    for (t, &pt) in diag_x.iter().enumerate() {
        if pt <= T::of(1e-300) {
            continue;
        }
        for o in 0..dim {
            let h = (o ^ t).count_ones() as usize;
            let po = pt * flip_pow[h] * keep_pow[k - h];
            let a = o >> m;
            let b = o & ((1 << m) - 1);
            if popcount_parity(a, m) != popcount_parity(b, m) {
                x_err += po;
            }
        }
    }

    Ok(DenseMeasures {
        swap_acceptance: final_state.swap_acceptance,
        maj_z_err,
        ed_unanimous,
        ed_z_err,
        x_err,
    })
}

impl<T: Scalar> DenseMeasures<T> {
    pub fn majority_outcome(&self) -> DecodeOutcome<T> {
        if self.swap_acceptance <= T::of(1e-300) {
            return DecodeOutcome::dead("majority");
        }
        DecodeOutcome {
            q_z: self.maj_z_err,
            q_x: self.x_err,
            acceptance: self.swap_acceptance,
            stderr_qz: T::zero(),
            stderr_qx: T::zero(),
            decoder_used: "majority",
            zero_acceptance: false,
        }
    }

    pub fn error_detect_outcome(&self) -> DecodeOutcome<T> {
        let acc = self.swap_acceptance * self.ed_unanimous;
        if acc <= T::of(1e-300) {
            return DecodeOutcome::dead("error-detect");
        }
        DecodeOutcome {
            q_z: self.ed_z_err / self.ed_unanimous,
            q_x: self.x_err,
            acceptance: acc,
            stderr_qz: T::zero(),
            stderr_qx: T::zero(),
            decoder_used: "error-detect",
            zero_acceptance: false,
        }
    }
}
