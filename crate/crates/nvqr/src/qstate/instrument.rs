//! Compiled measurement instruments.
//!
//! A swap or teleport step is compiled once on a small register into either a
//! set of POVM elements (all inputs measured away) or a set of one-qubit maps
//! given by their basis images. Each outcome carries the Bell-index
//! classification the chain logic keys on.

use num_complex::Complex;

use super::apply::{complement_positions, spread_table};
use super::{check_tol, DensityMatrix, QubitLabel};
use crate::error::{Result, SimError};
use crate::scalar::Scalar;

/// Small dense complex matrix (POVM elements, channel images).
#[derive(Clone, Debug)]
pub struct SmallMat<T: Scalar> {
    pub dim: usize,
    pub data: Vec<Complex<T>>,
}

impl<T: Scalar> SmallMat<T> {
    pub fn zeros(dim: usize) -> Self {
        SmallMat { dim, data: vec![Complex::default(); dim * dim] }
    }

    pub fn get(&self, r: usize, c: usize) -> Complex<T> {
        self.data[r * self.dim + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex<T>) {
        self.data[r * self.dim + c] = v;
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += *b;
        }
    }

    pub fn trace(&self) -> Complex<T> {
        (0..self.dim).map(|i| self.get(i, i)).fold(Complex::default(), |a, b| a + b)
    }
}

/// Bell-index classification of a swap outcome: `parity` selects Φ-type vs
/// Ψ-type (an X-frame correction downstream), `phase` selects + vs − (a
/// Z-frame correction).
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct SwapOutcome {
    pub parity: bool,
    pub phase: bool,
}

impl SwapOutcome {
    pub const ALL: [SwapOutcome; 4] = [
        SwapOutcome { parity: false, phase: false },
        SwapOutcome { parity: false, phase: true },
        SwapOutcome { parity: true, phase: false },
        SwapOutcome { parity: true, phase: true },
    ];

    pub fn index(self) -> usize {
        (self.parity as usize) << 1 | self.phase as usize
    }
}

/// The completely positive map attached to one outcome.
#[derive(Clone, Debug)]
pub enum OutcomeOp<T: Scalar> {
    /// Total measurement of the targets: σ ↦ Tr[E σ] with E a POVM element.
    Povm(SmallMat<T>),
    /// One-qubit map by basis images: images[i][j] = Λ(|i⟩⟨j|), each 2×2.
    QubitMap(Box<[[SmallMat<T>; 2]; 2]>),
}

#[derive(Clone, Debug)]
pub struct InstrumentOutcome<T: Scalar> {
    pub value: SwapOutcome,
    pub op: OutcomeOp<T>,
}

/// A compiled multi-outcome instrument on a fixed number of input qubits.
#[derive(Clone, Debug)]
pub struct MeasurementInstrument<T: Scalar> {
    arity: usize,
    outcomes: Vec<InstrumentOutcome<T>>,
}

impl<T: Scalar> MeasurementInstrument<T> {
    pub fn new(arity: usize, outcomes: Vec<InstrumentOutcome<T>>) -> Result<Self> {
        let inst = MeasurementInstrument { arity, outcomes };
        inst.validate()?;
        Ok(inst)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn outcomes(&self) -> &[InstrumentOutcome<T>] {
        &self.outcomes
    }

    /// The summed trace-decrease maps must be trace-preserving.
    pub fn validate(&self) -> Result<()> {
        let tol = check_tol::<T>();
        match &self.outcomes.first().map(|o| &o.op) {
            Some(OutcomeOp::Povm(first)) => {
                let dim = first.dim;
                let mut total = SmallMat::<T>::zeros(dim);
                for o in &self.outcomes {
                    match &o.op {
                        OutcomeOp::Povm(e) => total.add_assign(e),
                        _ => {
                            return Err(SimError::InvalidParameter {
                                name: "instrument",
                                reason: "mixed outcome representations".into(),
                            })
                        }
                    }
                }
                for r in 0..dim {
                    for c in 0..dim {
                        let expect = if r == c { T::one() } else { T::zero() };
                        let v = total.get(r, c);
                        if (v.re - expect).abs() > tol || v.im.abs() > tol {
                            return Err(SimError::InvalidParameter {
                                name: "instrument",
                                reason: "POVM elements do not sum to identity".into(),
                            });
                        }
                    }
                }
            }
            Some(OutcomeOp::QubitMap(_)) => {
                // Trace preservation: Σ_outcomes Tr[Λ_c(|i⟩⟨j|)] = δ_ij.
                for i in 0..2 {
                    for j in 0..2 {
                        let mut acc = Complex::<T>::default();
                        for o in &self.outcomes {
                            if let OutcomeOp::QubitMap(images) = &o.op {
                                acc += images[i][j].trace();
                            }
                        }
                        let expect = if i == j { T::one() } else { T::zero() };
                        if (acc.re - expect).abs() > tol || acc.im.abs() > tol {
                            return Err(SimError::InvalidParameter {
                                name: "instrument",
                                reason: "qubit maps are not trace-preserving in sum".into(),
                            });
                        }
                    }
                }
            }
            None => {
                return Err(SimError::InvalidParameter {
                    name: "instrument",
                    reason: "no outcomes".into(),
                })
            }
        }
        Ok(())
    }
}

impl<T: Scalar> DensityMatrix<T> {
    /// Apply a total-measurement POVM on `targets`; returns one unnormalized
    /// reduced state per element (its trace is the outcome probability).
    pub fn apply_povm(
        &self,
        targets: &[QubitLabel],
        elements: &[SmallMat<T>],
    ) -> Result<Vec<(T, DensityMatrix<T>)>> {
        let positions = self.resolve_targets(targets, targets.len())?;
        let k = self.num_qubits();
        let dim = self.dim();
        let du = 1usize << positions.len();
        let tgt = spread_table(k, &positions);
        let rest_pos = complement_positions(k, &positions);
        let rest = spread_table(k, &rest_pos);
        let sub = 1usize << rest_pos.len();
        let labels: Vec<QubitLabel> = rest_pos.iter().map(|&p| self.labels()[p]).collect();

        let mut outs: Vec<Vec<Complex<T>>> =
            (0..elements.len()).map(|_| vec![Complex::default(); sub * sub]).collect();
        for (rr, &r0) in rest.iter().enumerate() {
            for (cc, &c0) in rest.iter().enumerate() {
                for s in 0..du {
                    let row = (r0 | tgt[s]) * dim + c0;
                    for t in 0..du {
                        let v = self.data()[row + tgt[t]];
                        if v.re == T::zero() && v.im == T::zero() {
                            continue;
                        }
                        for (e, out) in elements.iter().zip(outs.iter_mut()) {
                            out[rr * sub + cc] += v * e.get(t, s);
                        }
                    }
                }
            }
        }
        Ok(outs
            .into_iter()
            .map(|data| {
                let dm = DensityMatrix::from_raw(labels.clone(), data);
                (dm.trace(), dm)
            })
            .collect())
    }

    /// Fused `a ⊗ b` followed by a two-qubit POVM on `(qa from a, qb from b)`;
    /// avoids materializing the tensor product. Output labels are a's
    /// remaining labels followed by b's.
    pub fn tensor_then_povm(
        a: &DensityMatrix<T>,
        b: &DensityMatrix<T>,
        qa: QubitLabel,
        qb: QubitLabel,
        elements: &[SmallMat<T>],
    ) -> Result<Vec<(T, DensityMatrix<T>)>> {
        let pa = a.position_of(qa)?;
        let pb = b.position_of(qb)?;
        let ka = a.num_qubits();
        let kb = b.num_qubits();
        let mut labels: Vec<QubitLabel> = Vec::with_capacity(ka + kb - 2);
        labels.extend(a.labels().iter().enumerate().filter(|(i, _)| *i != pa).map(|(_, l)| *l));
        labels.extend(b.labels().iter().enumerate().filter(|(i, _)| *i != pb).map(|(_, l)| *l));
        super::check_labels(&labels)?;

        let tga = spread_table(ka, &[pa]);
        let resta = spread_table(ka, &complement_positions(ka, &[pa]));
        let tgb = spread_table(kb, &[pb]);
        let restb = spread_table(kb, &complement_positions(kb, &[pb]));
        let suba = a.dim() / 2;
        let subb = b.dim() / 2;
        let sub = suba * subb;

        let mut outs: Vec<Vec<Complex<T>>> =
            (0..elements.len()).map(|_| vec![Complex::default(); sub * sub]).collect();
        for (rra, &r0a) in resta.iter().enumerate() {
            for (cca, &c0a) in resta.iter().enumerate() {
                // 2x2 block of `a` on the measured qubit.
                let mut blk_a = [[Complex::<T>::default(); 2]; 2];
                for sa in 0..2 {
                    for ta in 0..2 {
                        blk_a[sa][ta] = a.data()[(r0a | tga[sa]) * a.dim() + (c0a | tga[ta])];
                    }
                }
                for (rrb, &r0b) in restb.iter().enumerate() {
                    let out_row = (rra * subb + rrb) * sub + cca * subb;
                    for (ccb, &c0b) in restb.iter().enumerate() {
                        let mut blk = [[Complex::<T>::default(); 4]; 4];
                        for sb in 0..2 {
                            for tb in 0..2 {
                                let vb = b.data()[(r0b | tgb[sb]) * b.dim() + (c0b | tgb[tb])];
                                for sa in 0..2 {
                                    for ta in 0..2 {
                                        blk[sa * 2 + sb][ta * 2 + tb] = blk_a[sa][ta] * vb;
                                    }
                                }
                            }
                        }
                        for (e, out) in elements.iter().zip(outs.iter_mut()) {
                            let mut acc = Complex::<T>::default();
                            for s in 0..4 {
                                for t in 0..4 {
                                    acc += blk[s][t] * e.get(t, s);
                                }
                            }
                            out[out_row + ccb] += acc;
                        }
                    }
                }
            }
        }
        Ok(outs
            .into_iter()
            .map(|data| {
                let dm = DensityMatrix::from_raw(labels.clone(), data);
                (dm.trace(), dm)
            })
            .collect())
    }

    /// Apply a one-qubit map given by basis images to `target`, renaming the
    /// surviving qubit to `new_label`. Returns the unnormalized result.
    pub fn apply_qubit_map(
        &self,
        target: QubitLabel,
        images: &[[SmallMat<T>; 2]; 2],
        new_label: QubitLabel,
    ) -> Result<DensityMatrix<T>> {
        let pos = self.position_of(target)?;
        let k = self.num_qubits();
        let dim = self.dim();
        let tgt = spread_table(k, &[pos]);
        let rest_pos = complement_positions(k, &[pos]);
        let rest = spread_table(k, &rest_pos);
        let mut labels = self.labels().to_vec();
        labels[pos] = new_label;
        super::check_labels(&labels)?;

        let mut data = vec![Complex::<T>::default(); dim * dim];
        for &r0 in rest.iter() {
            for &c0 in rest.iter() {
                for i in 0..2 {
                    let row = (r0 | tgt[i]) * dim + c0;
                    for j in 0..2 {
                        let v = self.data()[row + tgt[j]];
                        if v.re == T::zero() && v.im == T::zero() {
                            continue;
                        }
                        for p in 0..2 {
                            let orow = (r0 | tgt[p]) * dim + c0;
                            for q in 0..2 {
                                data[orow + tgt[q]] += v * images[i][j].get(p, q);
                            }
                        }
                    }
                }
            }
        }
        Ok(DensityMatrix::from_raw(labels, data))
    }
}
