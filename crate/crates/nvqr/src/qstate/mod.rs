//! Exact dense density-matrix engine over labeled multi-qubit registers.
//!
//! States are immutable: every operation returns a new value, so instances can
//! be shared freely across parallel workers. The register is hard-capped at
//! [`MAX_QUBITS`] qubits; pipelines are arranged so routine work stays well
//! below the cap. Label order is significant: `labels[0]` is the most
//! significant bit of the computational-basis index.

mod apply;
mod eigen;
pub mod gates;
mod instrument;

use std::fmt;

use num_complex::Complex;

use crate::error::{Result, SimError};
use crate::scalar::Scalar;

pub use gates::Unitary;
pub use instrument::{InstrumentOutcome, MeasurementInstrument, OutcomeOp, SmallMat, SwapOutcome};

/// Hard cap on dense register size (a 14-qubit matrix is ~4 GB in f64).
pub const MAX_QUBITS: usize = 14;

/// Electron spins are the optical interface, nuclear spins the long-lived store.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Spin {
    Electron,
    Nuclear,
}

/// Address of one physical qubit: bank position along the chain, NV index
/// within the bank, and which spin of that NV.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct QubitLabel {
    pub node: u32,
    pub nv_index: u8,
    pub spin: Spin,
}

impl QubitLabel {
    pub fn electron(node: u32, nv_index: u8) -> Self {
        QubitLabel { node, nv_index, spin: Spin::Electron }
    }

    pub fn nuclear(node: u32, nv_index: u8) -> Self {
        QubitLabel { node, nv_index, spin: Spin::Nuclear }
    }
}

impl fmt::Display for QubitLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.spin {
            Spin::Electron => 'e',
            Spin::Nuclear => 'n',
        };
        write!(f, "{}.{}{}", self.node, self.nv_index, s)
    }
}

/// Measurement basis for single-qubit readout.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Basis {
    Z,
    X,
}

/// A pure state over a labeled register, used as a fidelity target.
#[derive(Clone, Debug)]
pub struct StateVector<T: Scalar> {
    pub labels: Vec<QubitLabel>,
    pub amplitudes: Vec<Complex<T>>,
}

impl<T: Scalar> StateVector<T> {
    pub fn new(labels: Vec<QubitLabel>, amplitudes: Vec<Complex<T>>) -> Result<Self> {
        check_labels(&labels)?;
        if amplitudes.len() != 1 << labels.len() {
            return Err(SimError::DimensionMismatch {
                expected: 1 << labels.len(),
                got: amplitudes.len(),
            });
        }
        Ok(StateVector { labels, amplitudes })
    }

    /// |Φ⁺⟩ = (|00⟩+|11⟩)/√2 on two labels.
    pub fn bell_phi_plus(a: QubitLabel, b: QubitLabel) -> Self {
        let r = Complex::from(T::one() / T::of(2.0).sqrt());
        StateVector {
            labels: vec![a, b],
            amplitudes: vec![r, Complex::default(), Complex::default(), r],
        }
    }

    /// (|0…0⟩+|1…1⟩)/√2 on the given labels.
    pub fn ghz(labels: Vec<QubitLabel>) -> Self {
        let dim = 1usize << labels.len();
        let mut amplitudes = vec![Complex::default(); dim];
        let r: Complex<T> = Complex::from(T::one() / T::of(2.0).sqrt());
        amplitudes[0] = r;
        amplitudes[dim - 1] = r;
        StateVector { labels, amplitudes }
    }

    /// Any of the four Bell states: `parity` picks |01⟩/|10⟩ support over
    /// |00⟩/|11⟩, `phase` the − sign.
    pub fn bell(a: QubitLabel, b: QubitLabel, parity: bool, phase: bool) -> Self {
        let r = T::one() / T::of(2.0).sqrt();
        let s = if phase { -r } else { r };
        let (i0, i1) = if parity { (1, 2) } else { (0, 3) };
        let mut amplitudes = vec![Complex::<T>::default(); 4];
        amplitudes[i0] = Complex::from(r);
        amplitudes[i1] = Complex::from(s);
        StateVector { labels: vec![a, b], amplitudes }
    }
}

/// One branch of a noisy measurement: reported outcome, its probability and
/// the normalized post-state with the measured qubit removed.
#[derive(Clone, Debug)]
pub struct MeasurementBranch<T: Scalar> {
    pub outcome: u8,
    pub probability: T,
    pub post_state: DensityMatrix<T>,
}

/// Hermitian, unit-trace operator over a labeled register.
#[derive(Clone, Debug)]
pub struct DensityMatrix<T: Scalar> {
    labels: Vec<QubitLabel>,
    dim: usize,
    data: Vec<Complex<T>>,
}

pub(crate) fn check_labels(labels: &[QubitLabel]) -> Result<()> {
    if labels.len() > MAX_QUBITS {
        return Err(SimError::RegisterTooLarge { requested: labels.len(), cap: MAX_QUBITS });
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(SimError::DuplicateLabel(*l));
        }
    }
    Ok(())
}

/// Numerical tolerance for trace/Hermiticity checks, scaled to the precision.
pub(crate) fn check_tol<T: Scalar>() -> T {
    let floor = T::of(1e-10);
    let eps_based = T::epsilon() * T::of(256.0);
    if eps_based > floor { eps_based } else { floor }
}

impl<T: Scalar> DensityMatrix<T> {
    // ----- construction -----

    /// Computational basis state |bits⟩⟨bits| (bit i of `bits` counted from
    /// the most significant label).
    pub fn basis_state(labels: Vec<QubitLabel>, bits: usize) -> Result<Self> {
        check_labels(&labels)?;
        let dim = 1usize << labels.len();
        assert!(bits < dim, "basis state index out of range");
        let mut data = vec![Complex::default(); dim * dim];
        data[bits * dim + bits] = Complex::from(T::one());
        Ok(DensityMatrix { labels, dim, data })
    }

    /// |ψ⟩⟨ψ| for a pure state.
    pub fn pure(state: &StateVector<T>) -> Result<Self> {
        check_labels(&state.labels)?;
        let dim = state.amplitudes.len();
        let mut data = vec![Complex::default(); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                data[r * dim + c] = state.amplitudes[r] * state.amplitudes[c].conj();
            }
        }
        Ok(DensityMatrix { labels: state.labels.clone(), dim, data })
    }

    /// Ideal Bell pair |Φ⁺⟩⟨Φ⁺|.
    pub fn bell_phi_plus(a: QubitLabel, b: QubitLabel) -> Result<Self> {
        Self::pure(&StateVector::bell_phi_plus(a, b))
    }

    /// Werner state: F·|Φ⁺⟩⟨Φ⁺| + (1−F)/3·(I−|Φ⁺⟩⟨Φ⁺|).
    pub fn werner(a: QubitLabel, b: QubitLabel, fidelity: T) -> Result<Self> {
        if fidelity < T::zero() || fidelity > T::one() {
            return Err(SimError::out_of_range("fidelity", fidelity, 0.0, 1.0));
        }
        let mut bell = Self::bell_phi_plus(a, b)?;
        let rest = (T::one() - fidelity) / T::of(3.0);
        for r in 0..4 {
            for c in 0..4 {
                let b_entry = bell.data[r * 4 + c];
                let id = if r == c { Complex::from(T::one()) } else { Complex::default() };
                bell.data[r * 4 + c] = b_entry * fidelity + (id - b_entry) * rest;
            }
        }
        Ok(bell)
    }

    /// Maximally mixed state I/2ᵏ.
    pub fn maximally_mixed(labels: Vec<QubitLabel>) -> Result<Self> {
        check_labels(&labels)?;
        let dim = 1usize << labels.len();
        let mut data = vec![Complex::default(); dim * dim];
        let w = T::one() / T::of_usize(dim);
        for r in 0..dim {
            data[r * dim + r] = Complex::from(w);
        }
        Ok(DensityMatrix { labels, dim, data })
    }

    /// Build from explicit entries (row-major), validating trace and
    /// Hermiticity (positivity too in debug builds).
    pub fn try_new(labels: Vec<QubitLabel>, data: Vec<Complex<T>>) -> Result<Self> {
        check_labels(&labels)?;
        let dim = 1usize << labels.len();
        if data.len() != dim * dim {
            return Err(SimError::DimensionMismatch { expected: dim * dim, got: data.len() });
        }
        let dm = DensityMatrix { labels, dim, data };
        dm.validate()?;
        Ok(dm)
    }

    /// Convex mixture of states over identical registers.
    pub fn mixture(parts: &[(T, &DensityMatrix<T>)]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or(SimError::InvalidParameter { name: "parts", reason: "empty mixture".into() })?
            .1;
        let mut data = vec![Complex::<T>::default(); first.dim * first.dim];
        let mut total = T::zero();
        for (w, st) in parts {
            if *w < T::zero() {
                return Err(SimError::out_of_range("weight", *w, 0.0, 1.0));
            }
            if st.labels != first.labels {
                return Err(SimError::InvalidParameter {
                    name: "labels",
                    reason: "mixture requires identical registers".into(),
                });
            }
            total += *w;
            for (a, b) in data.iter_mut().zip(st.data.iter()) {
                *a += *b * *w;
            }
        }
        if (total - T::one()).abs() > check_tol::<T>() {
            return Err(SimError::InvalidParameter {
                name: "weights",
                reason: format!("mixture weights sum to {total}"),
            });
        }
        Ok(DensityMatrix { labels: first.labels.clone(), dim: first.dim, data })
    }

    /// Build from raw parts without physicality checks (internal compilation
    /// paths feed non-Hermitian basis elements through the channel machinery).
    pub(crate) fn from_raw(labels: Vec<QubitLabel>, data: Vec<Complex<T>>) -> Self {
        let dim = 1usize << labels.len();
        debug_assert_eq!(data.len(), dim * dim);
        DensityMatrix { labels, dim, data }
    }

    // ----- accessors -----

    pub fn labels(&self) -> &[QubitLabel] {
        &self.labels
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex<T> {
        self.data[row * self.dim + col]
    }

    pub(crate) fn data(&self) -> &[Complex<T>] {
        &self.data
    }

    pub(crate) fn data_mut(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn trace(&self) -> T {
        let mut t = T::zero();
        for r in 0..self.dim {
            t += self.data[r * self.dim + r].re;
        }
        t
    }

    /// Diagonal in the computational basis (outcome probabilities).
    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|r| self.data[r * self.dim + r].re).collect()
    }

    pub(crate) fn position_of(&self, label: QubitLabel) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| *l == label)
            .ok_or(SimError::LabelNotFound(label))
    }

    // ----- validation -----

    /// Trace and Hermiticity check; positivity is additionally verified in
    /// debug builds for registers small enough to eigendecompose quickly.
    pub fn validate(&self) -> Result<()> {
        let tol = check_tol::<T>();
        let tr = self.trace();
        if (tr - T::one()).abs() > tol {
            return Err(SimError::InvalidParameter {
                name: "trace",
                reason: format!("trace = {tr}, expected 1"),
            });
        }
        for r in 0..self.dim {
            for c in r..self.dim {
                let a = self.data[r * self.dim + c];
                let b = self.data[c * self.dim + r];
                if (a.re - b.re).abs() > tol || (a.im + b.im).abs() > tol {
                    return Err(SimError::InvalidParameter {
                        name: "hermiticity",
                        reason: format!("entry ({r},{c}) breaks Hermiticity"),
                    });
                }
            }
        }
        #[cfg(debug_assertions)]
        if self.dim <= 64 {
            let eigs = eigen::hermitian_eigenvalues(&self.data, self.dim);
            let floor = T::of(-1e-9);
            for e in eigs {
                if e < floor {
                    return Err(SimError::InvalidParameter {
                        name: "positivity",
                        reason: format!("eigenvalue {e} below -1e-9"),
                    });
                }
            }
        }
        Ok(())
    }

    pub(crate) fn debug_validate(&self) {
        debug_assert!(self.validate().is_ok(), "state failed validation: {:?}", self.validate());
    }

    /// Eigenvalues of the (Hermitian) state, ascending. Test and debug use.
    pub fn eigenvalues(&self) -> Vec<T> {
        eigen::hermitian_eigenvalues(&self.data, self.dim)
    }

    // ----- core operations -----

    /// Kronecker product; `self`'s labels come first.
    pub fn tensor(&self, other: &Self) -> Result<Self> {
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        check_labels(&labels)?;
        let dim = self.dim * other.dim;
        let mut data = vec![Complex::default(); dim * dim];
        for ra in 0..self.dim {
            for ca in 0..self.dim {
                let f = self.data[ra * self.dim + ca];
                if f.re == T::zero() && f.im == T::zero() {
                    continue;
                }
                for rb in 0..other.dim {
                    let row = (ra * other.dim + rb) * dim + ca * other.dim;
                    let brow = rb * other.dim;
                    for cb in 0..other.dim {
                        data[row + cb] = f * other.data[brow + cb];
                    }
                }
            }
        }
        Ok(DensityMatrix { labels, dim, data })
    }

    /// ρ → UρU† for a 1- or 2-qubit unitary, applied via index contraction.
    pub fn apply_unitary(&self, u: &Unitary<T>, targets: &[QubitLabel]) -> Result<Self> {
        let positions = self.resolve_targets(targets, u.arity())?;
        let mut out = self.clone();
        apply::conjugate_in_place(&mut out.data, self.dim, &positions, self.labels.len(), u);
        Ok(out)
    }

    /// Noisy CNOT per the uniform-depolarization gate model:
    /// (1−β)·UρU† + (β/4)·Tr_{c,t}(ρ) ⊗ I on the pair, original label order.
    pub fn apply_cnot_noisy(
        &self,
        control: QubitLabel,
        target: QubitLabel,
        beta: T,
    ) -> Result<Self> {
        if beta < T::zero() || beta > T::one() {
            return Err(SimError::out_of_range("beta", beta, 0.0, 1.0));
        }
        if control == target {
            return Err(SimError::InvalidParameter {
                name: "targets",
                reason: "control and target coincide".into(),
            });
        }
        let mut out = self.apply_unitary(&gates::cnot(), &[control, target])?;
        if beta > T::zero() {
            let pos = self.resolve_targets(&[control, target], 2)?;
            let depol = apply::uniform_embed(&self.data, self.dim, &pos, self.labels.len());
            let keep = T::one() - beta;
            for (o, d) in out.data.iter_mut().zip(depol.iter()) {
                *o = *o * keep + *d * beta;
            }
        }
        Ok(out)
    }

    /// Noisy single-qubit readout: projective measurement whose reported
    /// outcome flips with probability `err`. The measured qubit is removed
    /// from the register; post-states are normalized.
    pub fn measure_noisy(
        &self,
        target: QubitLabel,
        basis: Basis,
        err: T,
    ) -> Result<Vec<MeasurementBranch<T>>> {
        if err < T::zero() || err > T::of(0.5) {
            return Err(SimError::out_of_range("err", err, 0.0, 0.5));
        }
        let pos = self.position_of(target)?;
        let sqrt_half = T::one() / T::of(2.0).sqrt();
        let bras: [[Complex<T>; 2]; 2] = match basis {
            Basis::Z => [
                [Complex::from(T::one()), Complex::default()],
                [Complex::default(), Complex::from(T::one())],
            ],
            Basis::X => [
                [Complex::from(sqrt_half), Complex::from(sqrt_half)],
                [Complex::from(sqrt_half), Complex::from(-sqrt_half)],
            ],
        };
        let proj0 = apply::project_out(&self.data, self.dim, pos, self.labels.len(), &bras[0]);
        let proj1 = apply::project_out(&self.data, self.dim, pos, self.labels.len(), &bras[1]);
        let mut labels = self.labels.clone();
        labels.remove(pos);
        let sub = self.dim / 2;

        let keep = T::one() - err;
        let mut branches = Vec::with_capacity(2);
        for outcome in 0..2u8 {
            let (a, b) = if outcome == 0 { (&proj0, &proj1) } else { (&proj1, &proj0) };
            let mut data: Vec<Complex<T>> = a
                .iter()
                .zip(b.iter())
                .map(|(x, y)| *x * keep + *y * err)
                .collect();
            let mut p = T::zero();
            for r in 0..sub {
                p += data[r * sub + r].re;
            }
            if p > T::of(1e-300) {
                let inv = T::one() / p;
                for v in data.iter_mut() {
                    *v *= inv;
                }
            }
            branches.push(MeasurementBranch {
                outcome,
                probability: p,
                post_state: DensityMatrix { labels: labels.clone(), dim: sub, data },
            });
        }
        Ok(branches)
    }

    /// Trace out a subset of qubits; remaining label order is preserved.
    pub fn partial_trace(&self, drop: &[QubitLabel]) -> Result<Self> {
        let mut drop_pos: Vec<usize> = Vec::with_capacity(drop.len());
        for l in drop {
            let p = self.position_of(*l)?;
            if drop_pos.contains(&p) {
                return Err(SimError::DuplicateLabel(*l));
            }
            drop_pos.push(p);
        }
        drop_pos.sort_unstable();
        if drop_pos.is_empty() {
            return Ok(self.clone());
        }
        let k = self.labels.len();
        let keep_pos: Vec<usize> = (0..k).filter(|p| !drop_pos.contains(p)).collect();
        let labels: Vec<QubitLabel> = keep_pos.iter().map(|&p| self.labels[p]).collect();
        let data = apply::trace_out(&self.data, self.dim, k, &keep_pos, &drop_pos);
        Ok(DensityMatrix { labels, dim: 1 << keep_pos.len(), data })
    }

    /// ⟨ψ|ρ|ψ⟩ for a pure target state with matching register.
    pub fn fidelity(&self, pure: &StateVector<T>) -> Result<T> {
        if pure.amplitudes.len() != self.dim {
            return Err(SimError::DimensionMismatch {
                expected: self.dim,
                got: pure.amplitudes.len(),
            });
        }
        // Align the target's label order with ours if it differs.
        let perm: Vec<usize> = pure
            .labels
            .iter()
            .map(|l| self.position_of(*l))
            .collect::<Result<_>>()?;
        let same_order = perm.iter().enumerate().all(|(i, &p)| i == p);
        let amps: Vec<Complex<T>> = if same_order {
            pure.amplitudes.clone()
        } else {
            let k = self.labels.len();
            let mut v = vec![Complex::default(); self.dim];
            for (idx, a) in pure.amplitudes.iter().enumerate() {
                let mut out = 0usize;
                for (i, &p) in perm.iter().enumerate() {
                    let bit = (idx >> (k - 1 - i)) & 1;
                    out |= bit << (k - 1 - p);
                }
                v[out] = *a;
            }
            v
        };
        let mut acc = Complex::<T>::default();
        for r in 0..self.dim {
            let row = r * self.dim;
            let cr = amps[r].conj();
            for c in 0..self.dim {
                acc += cr * self.data[row + c] * amps[c];
            }
        }
        Ok(acc.re)
    }

    // ----- auxiliary operations used by the pipelines -----

    /// Apply a single-qubit Pauli (perfect, per the error model).
    pub fn apply_pauli(&self, pauli: gates::Pauli, target: QubitLabel) -> Result<Self> {
        match pauli {
            gates::Pauli::I => Ok(self.clone()),
            gates::Pauli::X => self.apply_unitary(&gates::x(), &[target]),
            gates::Pauli::Y => self.apply_unitary(&gates::y(), &[target]),
            gates::Pauli::Z => self.apply_unitary(&gates::z(), &[target]),
        }
    }

    /// Tr_tgt(ρ) ⊗ I/2ᵐ re-embedded at the targets' positions (the fully
    /// depolarized component of the gate and decoherence channels).
    pub(crate) fn depolarized_embed(&self, targets: &[QubitLabel]) -> Result<Self> {
        let positions = self.resolve_targets(targets, targets.len())?;
        let data = apply::uniform_embed(&self.data, self.dim, &positions, self.labels.len());
        Ok(DensityMatrix { labels: self.labels.clone(), dim: self.dim, data })
    }

    /// Rename register labels (no data movement).
    pub fn relabel(&self, map: impl Fn(QubitLabel) -> QubitLabel) -> Result<Self> {
        let labels: Vec<QubitLabel> = self.labels.iter().map(|&l| map(l)).collect();
        check_labels(&labels)?;
        Ok(DensityMatrix { labels, dim: self.dim, data: self.data.clone() })
    }

    /// Reorder the register into the given label order (data is permuted).
    pub fn permuted(&self, order: &[QubitLabel]) -> Result<Self> {
        if order.len() != self.labels.len() {
            return Err(SimError::DimensionMismatch {
                expected: self.labels.len(),
                got: order.len(),
            });
        }
        let perm: Vec<usize> = order
            .iter()
            .map(|l| self.position_of(*l))
            .collect::<Result<_>>()?;
        {
            let mut seen = vec![false; perm.len()];
            for &p in &perm {
                if seen[p] {
                    return Err(SimError::DuplicateLabel(order[p]));
                }
                seen[p] = true;
            }
        }
        let k = self.labels.len();
        let mut index_map = vec![0usize; self.dim];
        for idx in 0..self.dim {
            let mut out = 0usize;
            for (new_pos, &old_pos) in perm.iter().enumerate() {
                let bit = (idx >> (k - 1 - old_pos)) & 1;
                out |= bit << (k - 1 - new_pos);
            }
            index_map[idx] = out;
        }
        let mut data = vec![Complex::default(); self.dim * self.dim];
        for r in 0..self.dim {
            let nr = index_map[r];
            for c in 0..self.dim {
                data[nr * self.dim + index_map[c]] = self.data[r * self.dim + c];
            }
        }
        Ok(DensityMatrix { labels: order.to_vec(), dim: self.dim, data })
    }

    /// Convex mixture in place: self ← w·self + (1−w)·other (labels must match).
    pub fn mix_with(&self, other: &Self, weight_self: T) -> Result<Self> {
        if self.labels != other.labels {
            return Err(SimError::InvalidParameter {
                name: "labels",
                reason: "mixture requires identical registers".into(),
            });
        }
        let wo = T::one() - weight_self;
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| *a * weight_self + *b * wo)
            .collect();
        Ok(DensityMatrix { labels: self.labels.clone(), dim: self.dim, data })
    }

    pub(crate) fn resolve_targets(
        &self,
        targets: &[QubitLabel],
        expect: usize,
    ) -> Result<Vec<usize>> {
        if targets.len() != expect {
            return Err(SimError::DimensionMismatch { expected: expect, got: targets.len() });
        }
        let mut positions = Vec::with_capacity(targets.len());
        for t in targets {
            let p = self.position_of(*t)?;
            if positions.contains(&p) {
                return Err(SimError::DuplicateLabel(*t));
            }
            positions.push(p);
        }
        Ok(positions)
    }
}
