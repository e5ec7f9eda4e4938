//! Cyclic Jacobi eigensolver for small complex Hermitian matrices.
//!
//! Only used for positivity checks and tests; registers above a few qubits
//! never go through here.

use num_complex::Complex;

use crate::scalar::Scalar;

pub(crate) fn hermitian_eigenvalues<T: Scalar>(data: &[Complex<T>], dim: usize) -> Vec<T> {
    let mut a: Vec<Complex<T>> = data.to_vec();
    let idx = |r: usize, c: usize| r * dim + c;

    let norm: T = a.iter().map(|v| v.norm_sqr()).sum::<T>().sqrt();
    let tol = T::epsilon() * norm * T::of_usize(dim.max(1));

    for _sweep in 0..64 {
        let mut off = T::zero();
        for p in 0..dim {
            for q in (p + 1)..dim {
                off += a[idx(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..dim {
            for q in (p + 1)..dim {
                let apq = a[idx(p, q)];
                let mag = apq.norm();
                if mag <= T::epsilon() * norm {
                    continue;
                }
                let phase = apq / Complex::from(mag);
                let app = a[idx(p, p)].re;
                let aqq = a[idx(q, q)].re;
                let tau = (aqq - app) / (T::of(2.0) * mag);
                let t = if tau == T::zero() {
                    T::one()
                } else {
                    let s = if tau > T::zero() { T::one() } else { -T::one() };
                    s / (tau.abs() + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = t * c;

                // U = D·J with D = diag(1, conj(phase)); columns then rows.
                let cm = Complex::from(c);
                let sm = Complex::from(s);
                let eip = phase;
                let eim = phase.conj();
                for i in 0..dim {
                    let aip = a[idx(i, p)];
                    let aiq = a[idx(i, q)];
                    a[idx(i, p)] = aip * cm - aiq * sm * eim;
                    a[idx(i, q)] = aip * sm + aiq * cm * eim;
                }
                for j in 0..dim {
                    let apj = a[idx(p, j)];
                    let aqj = a[idx(q, j)];
                    a[idx(p, j)] = apj * cm - aqj * sm * eip;
                    a[idx(q, j)] = apj * sm + aqj * cm * eip;
                }
            }
        }
    }

    let mut eigs: Vec<T> = (0..dim).map(|i| a[idx(i, i)].re).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).expect("non-NaN eigenvalues"));
    eigs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal() {
        let d = [3.0, -1.0, 2.0];
        let mut m = vec![Complex::new(0.0f64, 0.0); 9];
        for i in 0..3 {
            m[i * 3 + i] = Complex::new(d[i], 0.0);
        }
        let e = hermitian_eigenvalues(&m, 3);
        assert!((e[0] + 1.0).abs() < 1e-12);
        assert!((e[1] - 2.0).abs() < 1e-12);
        assert!((e[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_of_pauli_y() {
        let m = vec![
            Complex::new(0.0f64, 0.0),
            Complex::new(0.0, -1.0),
            Complex::new(0.0, 1.0),
            Complex::new(0.0, 0.0),
        ];
        let e = hermitian_eigenvalues(&m, 2);
        assert!((e[0] + 1.0).abs() < 1e-12);
        assert!((e[1] - 1.0).abs() < 1e-12);
    }
}
