//! Decoherence and error channels: single-qubit depolarizing decay with the
//! waiting-time fidelities λ₂/λ₄/λ₆₄, the exact qubit-wise Pauli form, and the
//! isotropic pair/encoded approximations used across the pipeline.

use crate::error::{Result, SimError};
use crate::qstate::gates::Pauli;
use crate::qstate::{DensityMatrix, QubitLabel};
use crate::scalar::Scalar;

/// Memory coherence times (seconds) for the two spin species.
#[derive(Clone, Copy, Debug)]
pub struct DecoherenceParams<T: Scalar> {
    pub tau_e: T,
    pub tau_n: T,
}

impl<T: Scalar> DecoherenceParams<T> {
    pub fn new(tau_e: T, tau_n: T) -> Result<Self> {
        if tau_e <= T::zero() {
            return Err(SimError::out_of_range("tau_e", tau_e, 0.0, f64::INFINITY));
        }
        if tau_n <= T::zero() {
            return Err(SimError::out_of_range("tau_n", tau_n, 0.0, f64::INFINITY));
        }
        Ok(DecoherenceParams { tau_e, tau_n })
    }
}

/// Probabilities of I/X/Y/Z in a single-qubit Pauli channel.
#[derive(Clone, Copy, Debug)]
pub struct PauliWeights<T: Scalar> {
    pub w_i: T,
    pub w_x: T,
    pub w_y: T,
    pub w_z: T,
}

impl<T: Scalar> PauliWeights<T> {
    pub fn validate(&self) -> Result<()> {
        let sum = self.w_i + self.w_x + self.w_y + self.w_z;
        if (sum - T::one()).abs() > T::of(1e-12).max(T::epsilon() * T::of(16.0)) {
            return Err(SimError::InvalidParameter {
                name: "pauli_weights",
                reason: format!("weights sum to {sum}"),
            });
        }
        for w in [self.w_i, self.w_x, self.w_y, self.w_z] {
            if w < T::zero() {
                return Err(SimError::out_of_range("pauli weight", w, 0.0, 1.0));
            }
        }
        Ok(())
    }

    pub fn as_array(&self) -> [T; 4] {
        [self.w_i, self.w_x, self.w_y, self.w_z]
    }
}

fn check_lambda2<T: Scalar>(lam2: T) -> Result<()> {
    if lam2 < T::of(0.5) || lam2 > T::one() {
        return Err(SimError::out_of_range("lambda2", lam2, 0.5, 1.0));
    }
    Ok(())
}

/// Single-qubit fidelity after waiting `t_w` with coherence time `tau`:
/// λ₂ = 1/2 + e^{−t_w/τ}/2.
pub fn single_qubit_fidelity<T: Scalar>(t_w: T, tau: T) -> Result<T> {
    if t_w < T::zero() {
        return Err(SimError::out_of_range("t_w", t_w, 0.0, f64::INFINITY));
    }
    if tau <= T::zero() {
        return Err(SimError::out_of_range("tau", tau, 0.0, f64::INFINITY));
    }
    Ok(T::of(0.5) + (-t_w / tau).exp() * T::of(0.5))
}

/// Bell-pair fidelity when both qubits decohere independently:
/// λ₄ = ¼(3λ₂−1)² + ¾(1−λ₂)².
pub fn bell_pair_fidelity<T: Scalar>(lam2: T) -> Result<T> {
    check_lambda2(lam2)?;
    let a = T::of(3.0) * lam2 - T::one();
    let b = T::one() - lam2;
    Ok(T::of(0.25) * a * a + T::of(0.75) * b * b)
}

/// Encoded-pair fidelity for the six-qubit encoded Bell state:
/// λ₆₄ = (1/64)[(3λ₂−1)⁶ + 33(1−λ₂)⁶ + 15(3λ₂−1)²(1−λ₂)⁴ + 15(3λ₂−1)⁴(1−λ₂)²].
pub fn encoded_pair_fidelity<T: Scalar>(lam2: T) -> Result<T> {
    check_lambda2(lam2)?;
    let a = T::of(3.0) * lam2 - T::one();
    let b = T::one() - lam2;
    let (a2, b2) = (a * a, b * b);
    let sum = a2 * a2 * a2
        + T::of(33.0) * b2 * b2 * b2
        + T::of(15.0) * a2 * b2 * b2
        + T::of(15.0) * a2 * a2 * b2;
    Ok(sum / T::of(64.0))
}

/// Pauli mixture equivalent to the single-qubit decoherence channel:
/// w_I = (3λ₂−1)/2, w_X = w_Y = w_Z = (1−λ₂)/2.
pub fn pauli_weights<T: Scalar>(lam2: T) -> Result<PauliWeights<T>> {
    check_lambda2(lam2)?;
    let w = (T::one() - lam2) * T::of(0.5);
    Ok(PauliWeights { w_i: (T::of(3.0) * lam2 - T::one()) * T::of(0.5), w_x: w, w_y: w, w_z: w })
}

/// Global-depolarizing keep probability equivalent to the isotropic pair form
/// λ₄ρ + (1−λ₄)(I−ρ)/3 (identity with probability c, uniform two-qubit Pauli
/// otherwise). Requires λ₄ ≥ 1/4.
pub fn pair_keep_prob<T: Scalar>(lam4: T) -> Result<T> {
    if lam4 < T::of(0.25) || lam4 > T::one() {
        return Err(SimError::out_of_range("lambda4", lam4, 0.25, 1.0));
    }
    Ok((T::of(4.0) * lam4 - T::one()) / T::of(3.0))
}

/// Keep probability for the six-qubit isotropic form. Requires λ₆₄ ≥ 1/64.
pub fn encoded_keep_prob<T: Scalar>(lam64: T) -> Result<T> {
    let floor = T::one() / T::of(64.0);
    if lam64 < floor || lam64 > T::one() {
        return Err(SimError::out_of_range("lambda64", lam64, 1.0 / 64.0, 1.0));
    }
    Ok((T::of(64.0) * lam64 - T::one()) / T::of(63.0))
}

/// Apply the exact single-qubit Pauli channel independently to each target,
/// with a per-target λ₂.
pub fn depolarize_qubitwise_exact<T: Scalar>(
    rho: &DensityMatrix<T>,
    targets: &[QubitLabel],
    lam2: &[T],
) -> Result<DensityMatrix<T>> {
    if targets.len() != lam2.len() {
        return Err(SimError::DimensionMismatch { expected: targets.len(), got: lam2.len() });
    }
    let mut out = rho.clone();
    for (&t, &l) in targets.iter().zip(lam2.iter()) {
        let w = pauli_weights(l)?;
        let mut acc = out.clone();
        for v in acc.data_mut() {
            *v *= w.w_i;
        }
        for (p, wp) in [(Pauli::X, w.w_x), (Pauli::Y, w.w_y), (Pauli::Z, w.w_z)] {
            let term = out.apply_pauli(p, t)?;
            for (a, b) in acc.data_mut().iter_mut().zip(term.data().iter()) {
                *a += *b * wp;
            }
        }
        out = acc;
    }
    Ok(out)
}

fn isotropic_mix<T: Scalar>(
    rho: &DensityMatrix<T>,
    targets: &[QubitLabel],
    lam: T,
    dim_minus_one: T,
) -> Result<DensityMatrix<T>> {
    if lam < T::zero() || lam > T::one() {
        return Err(SimError::out_of_range("lambda", lam, 0.0, 1.0));
    }
    // λρ + (1−λ)(I−ρ)/(d−1) on the target subspace, extended by identity:
    //   [λ − (1−λ)/(d−1)]·ρ + (1−λ)·d/(d−1)·Tr_tgt(ρ)⊗I/d
    let d = dim_minus_one + T::one();
    let c_rho = lam - (T::one() - lam) / dim_minus_one;
    let c_mix = (T::one() - lam) * d / dim_minus_one;
    let embed = rho.depolarized_embed(targets)?;
    let mut out = rho.clone();
    for (o, e) in out.data_mut().iter_mut().zip(embed.data().iter()) {
        *o = *o * c_rho + *e * c_mix;
    }
    Ok(out)
}

/// Isotropic two-qubit decoherence: λ₄ρ + (1−λ₄)(I−ρ)/3 on `pair`.
pub fn depolarize_pair_approx<T: Scalar>(
    rho: &DensityMatrix<T>,
    pair: &[QubitLabel; 2],
    lam4: T,
) -> Result<DensityMatrix<T>> {
    isotropic_mix(rho, pair, lam4, T::of(3.0))
}

/// Isotropic six-qubit decoherence: λ₆₄ρ + (1−λ₆₄)(I−ρ)/63 on `six_qubits`.
pub fn depolarize_encoded_approx<T: Scalar>(
    rho: &DensityMatrix<T>,
    six_qubits: &[QubitLabel; 6],
    lam64: T,
) -> Result<DensityMatrix<T>> {
    isotropic_mix(rho, six_qubits, lam64, T::of(63.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::StateVector;

    fn q(node: u32) -> QubitLabel {
        QubitLabel::nuclear(node, 0)
    }

    #[test]
    fn lambda2_limits_and_value() {
        assert!((single_qubit_fidelity(0.0f64, 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((single_qubit_fidelity(1e9f64, 1.0).unwrap() - 0.5).abs() < 1e-15);
        let v = single_qubit_fidelity(1.0f64, 1.0).unwrap();
        assert!((v - (0.5 + (-1.0f64).exp() / 2.0)).abs() < 1e-15);
        assert!((v - 0.6839397205857212).abs() < 1e-12);
        assert!(single_qubit_fidelity(-1.0f64, 1.0).is_err());
        assert!(single_qubit_fidelity(1.0f64, 0.0).is_err());
    }

    #[test]
    fn lambda4_values() {
        assert!((bell_pair_fidelity(1.0f64).unwrap() - 1.0).abs() < 1e-15);
        assert!((bell_pair_fidelity(0.5f64).unwrap() - 0.25).abs() < 1e-15);
        assert!((bell_pair_fidelity(0.9f64).unwrap() - 0.73).abs() < 1e-15);
        assert!(bell_pair_fidelity(0.4f64).is_err());
        assert!(bell_pair_fidelity(1.1f64).is_err());
    }

    #[test]
    fn lambda64_values() {
        assert!((encoded_pair_fidelity(1.0f64).unwrap() - 1.0).abs() < 1e-15);
        assert!((encoded_pair_fidelity(0.5f64).unwrap() - 1.0 / 64.0).abs() < 1e-15);
        assert!((encoded_pair_fidelity(0.9f64).unwrap() - 0.396793).abs() < 1e-9);
    }

    #[test]
    fn weights_values() {
        let w = pauli_weights(1.0f64).unwrap();
        assert!((w.w_i - 1.0).abs() < 1e-15 && w.w_x.abs() < 1e-15);
        let w = pauli_weights(0.5f64).unwrap();
        for v in w.as_array() {
            assert!((v - 0.25).abs() < 1e-15);
        }
        let w = pauli_weights(0.9f64).unwrap();
        assert!((w.w_i - 0.85).abs() < 1e-15);
        assert!((w.w_x - 0.05).abs() < 1e-15);
        w.validate().unwrap();
    }

    #[test]
    fn monotonicity() {
        let mut prev = single_qubit_fidelity(0.0f64, 1.0).unwrap();
        for i in 1..20 {
            let v = single_qubit_fidelity(0.2 * i as f64, 1.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
        let mut prev4 = bell_pair_fidelity(0.5f64 + 1e-9).unwrap();
        let mut prev64 = encoded_pair_fidelity(0.5f64 + 1e-9).unwrap();
        for i in 1..=20 {
            let l = 0.5 + 0.5 * i as f64 / 20.0;
            let v4 = bell_pair_fidelity(l).unwrap();
            let v64 = encoded_pair_fidelity(l).unwrap();
            assert!(v4 > prev4 && v64 > prev64);
            prev4 = v4;
            prev64 = v64;
        }
    }

    #[test]
    fn qubitwise_identity_at_lambda_one() {
        let bell = DensityMatrix::<f64>::bell_phi_plus(q(0), q(1)).unwrap();
        let out = depolarize_qubitwise_exact(&bell, &[q(0), q(1)], &[1.0, 1.0]).unwrap();
        let diff: f64 = bell
            .data()
            .iter()
            .zip(out.data().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-15);
    }

    #[test]
    fn pair_approx_trivials() {
        let bell = DensityMatrix::<f64>::bell_phi_plus(q(0), q(1)).unwrap();
        let ident = depolarize_pair_approx(&bell, &[q(0), q(1)], 1.0).unwrap();
        assert!((ident.fidelity(&StateVector::bell_phi_plus(q(0), q(1))).unwrap() - 1.0).abs() < 1e-12);

        let mixed = depolarize_pair_approx(&bell, &[q(0), q(1)], 0.25).unwrap();
        let target = DensityMatrix::<f64>::maximally_mixed(vec![q(0), q(1)]).unwrap();
        let diff: f64 = mixed
            .data()
            .iter()
            .zip(target.data().iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(diff < 1e-13);
        assert!(depolarize_pair_approx(&bell, &[q(0), q(1)], 1.2).is_err());
    }

    #[test]
    fn encoded_approx_fidelity_reads_off() {
        let labels: Vec<QubitLabel> = (0..6).map(q).collect();
        let ghz = DensityMatrix::<f64>::pure(&StateVector::ghz(labels.clone())).unwrap();
        let six: [QubitLabel; 6] = labels.clone().try_into().unwrap();
        for lam in [1.0, 0.9, 1.0 / 64.0] {
            let out = depolarize_encoded_approx(&ghz, &six, lam).unwrap();
            let f = out.fidelity(&StateVector::ghz(labels.clone())).unwrap();
            assert!((f - lam).abs() < 1e-12, "lam={lam} f={f}");
        }
    }

    #[test]
    fn channels_preserve_trace() {
        let labels: Vec<QubitLabel> = (0..2).map(q).collect();
        let w = DensityMatrix::<f64>::werner(q(0), q(1), 0.8).unwrap();
        for lam in [0.6, 0.9, 1.0] {
            let a = depolarize_qubitwise_exact(&w, &labels, &[lam, lam]).unwrap();
            assert!((a.trace() - 1.0).abs() < 1e-10);
            let b = depolarize_pair_approx(&w, &[q(0), q(1)], bell_pair_fidelity(lam).unwrap()).unwrap();
            assert!((b.trace() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn keep_probs() {
        assert!((pair_keep_prob(1.0f64).unwrap() - 1.0).abs() < 1e-15);
        assert!(pair_keep_prob(0.25f64).unwrap().abs() < 1e-15);
        assert!((encoded_keep_prob(1.0f64).unwrap() - 1.0).abs() < 1e-15);
        assert!(encoded_keep_prob(1.0f64 / 64.0).unwrap().abs() < 1e-15);
    }
}
