//! Index-contraction kernels. Gates and channels act on 1–2 qubit subsets of
//! a register without ever forming the full 2ᵏ×2ᵏ operator.

use num_complex::Complex;

use super::gates::Unitary;
use crate::scalar::Scalar;

/// Table mapping compact sub-indices to their bit pattern inside a full index.
/// `positions[i]` owns bit (m-1-i) of the compact index, MSB-first.
pub(crate) fn spread_table(k: usize, positions: &[usize]) -> Vec<usize> {
    let m = positions.len();
    let size = 1usize << m;
    let mut table = vec![0usize; size];
    for (j, slot) in table.iter_mut().enumerate() {
        let mut full = 0usize;
        for (i, &p) in positions.iter().enumerate() {
            let bit = (j >> (m - 1 - i)) & 1;
            full |= bit << (k - 1 - p);
        }
        *slot = full;
    }
    table
}

pub(crate) fn complement_positions(k: usize, positions: &[usize]) -> Vec<usize> {
    (0..k).filter(|p| !positions.contains(p)).collect()
}

/// ρ ← UρU† on the targets at `positions`.
pub(crate) fn conjugate_in_place<T: Scalar>(
    data: &mut [Complex<T>],
    dim: usize,
    positions: &[usize],
    k: usize,
    u: &Unitary<T>,
) {
    let du = u.dim();
    let tgt = spread_table(k, positions);
    let rest = spread_table(k, &complement_positions(k, positions));
    let mut block = vec![Complex::<T>::default(); du * du];
    for &r0 in &rest {
        for &c0 in &rest {
            for s in 0..du {
                let row = (r0 | tgt[s]) * dim + c0;
                for t in 0..du {
                    block[s * du + t] = data[row + tgt[t]];
                }
            }
            for p in 0..du {
                let out_row = (r0 | tgt[p]) * dim + c0;
                for q in 0..du {
                    let mut acc = Complex::<T>::default();
                    for s in 0..du {
                        let ups = u.entry(p, s);
                        if ups.re == T::zero() && ups.im == T::zero() {
                            continue;
                        }
                        let mut inner = Complex::<T>::default();
                        for t in 0..du {
                            inner += block[s * du + t] * u.entry(q, t).conj();
                        }
                        acc += ups * inner;
                    }
                    data[out_row + tgt[q]] = acc;
                }
            }
        }
    }
}

/// Tr_tgt(ρ) ⊗ I/2ᵐ re-embedded at the targets' original positions.
pub(crate) fn uniform_embed<T: Scalar>(
    data: &[Complex<T>],
    dim: usize,
    positions: &[usize],
    k: usize,
) -> Vec<Complex<T>> {
    let tgt = spread_table(k, positions);
    let rest = spread_table(k, &complement_positions(k, positions));
    let frac = T::one() / T::of_usize(tgt.len());
    let mut out = vec![Complex::<T>::default(); dim * dim];
    for &r0 in &rest {
        for &c0 in &rest {
            let mut tr = Complex::<T>::default();
            for &t in &tgt {
                tr += data[(r0 | t) * dim + (c0 | t)];
            }
            tr *= frac;
            for &t in &tgt {
                out[(r0 | t) * dim + (c0 | t)] = tr;
            }
        }
    }
    out
}

/// ⟨φ|ρ|φ⟩ on one qubit: unnormalized reduced matrix over the rest.
pub(crate) fn project_out<T: Scalar>(
    data: &[Complex<T>],
    dim: usize,
    position: usize,
    k: usize,
    bra: &[Complex<T>; 2],
) -> Vec<Complex<T>> {
    let tgt = spread_table(k, &[position]);
    let rest = spread_table(k, &complement_positions(k, &[position]));
    let sub = dim / 2;
    let mut out = vec![Complex::<T>::default(); sub * sub];
    for (rr, &r0) in rest.iter().enumerate() {
        for (cc, &c0) in rest.iter().enumerate() {
            let mut acc = Complex::<T>::default();
            for s in 0..2 {
                let row = (r0 | tgt[s]) * dim + c0;
                let cs = bra[s].conj();
                for t in 0..2 {
                    acc += cs * data[row + tgt[t]] * bra[t];
                }
            }
            out[rr * sub + cc] = acc;
        }
    }
    out
}

/// Partial trace over `drop_pos`, keeping `keep_pos` in order.
pub(crate) fn trace_out<T: Scalar>(
    data: &[Complex<T>],
    dim: usize,
    k: usize,
    keep_pos: &[usize],
    drop_pos: &[usize],
) -> Vec<Complex<T>> {
    let keep = spread_table(k, keep_pos);
    let drop = spread_table(k, drop_pos);
    let sub = 1usize << keep_pos.len();
    let mut out = vec![Complex::<T>::default(); sub * sub];
    for (rr, &r0) in keep.iter().enumerate() {
        for (cc, &c0) in keep.iter().enumerate() {
            let mut acc = Complex::<T>::default();
            for &d in &drop {
                acc += data[(r0 | d) * dim + (c0 | d)];
            }
            out[rr * sub + cc] = acc;
        }
    }
    out
}
