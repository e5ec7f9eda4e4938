//! Channel-level oracles: the exact qubit-wise Pauli channel against the
//! isotropic pair form on Bell-diagonal states, the encoded-state fidelity
//! law, the stabilizing operators of the encoded Bell state, and the
//! compiled noise tables against the dense channels.

use num_complex::Complex;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nvqr::noise::{
    bell_pair_fidelity, depolarize_pair_approx, depolarize_qubitwise_exact, encoded_pair_fidelity,
    pauli_weights,
};
use nvqr::pauli::{compile_noise, CompiledNoise, NoiseChannel};
use nvqr::qstate::gates::{pauli_pair, Pauli};
use nvqr::qstate::{DensityMatrix, QubitLabel, StateVector};

fn q(node: u32) -> QubitLabel {
    QubitLabel::nuclear(node, 0)
}

fn max_entry_diff(a: &DensityMatrix<f64>, b: &DensityMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for r in 0..a.dim() {
        for c in 0..a.dim() {
            worst = worst.max((a.entry(r, c) - b.entry(r, c)).norm());
        }
    }
    worst
}

/// Random mixture of the four Bell states.
fn random_bell_diagonal(rng: &mut StdRng) -> DensityMatrix<f64> {
    let mut weights = [0.0f64; 4];
    let mut total = 0.0;
    for w in weights.iter_mut() {
        *w = rng.random::<f64>();
        total += *w;
    }
    let kinds = [(false, false), (false, true), (true, false), (true, true)];
    let bells: Vec<DensityMatrix<f64>> = kinds
        .iter()
        .map(|&(parity, phase)| {
            DensityMatrix::pure(&StateVector::bell(q(0), q(1), parity, phase)).unwrap()
        })
        .collect();
    let parts: Vec<(f64, &DensityMatrix<f64>)> =
        weights.iter().zip(bells.iter()).map(|(w, b)| (w / total, b)).collect();
    DensityMatrix::mixture(&parts).unwrap()
}

#[test]
fn qubitwise_exact_equals_pair_form_on_bell_diagonal_states() {
    let mut rng = StdRng::seed_from_u64(2024);
    for &lam2 in &[0.5f64, 0.7, 0.9, 0.99] {
        let lam4 = bell_pair_fidelity(lam2).unwrap();
        for _ in 0..4 {
            let rho = random_bell_diagonal(&mut rng);
            let exact =
                depolarize_qubitwise_exact(&rho, &[q(0), q(1)], &[lam2, lam2]).unwrap();
            let approx = depolarize_pair_approx(&rho, &[q(0), q(1)], lam4).unwrap();
            let diff = max_entry_diff(&exact, &approx);
            assert!(diff <= 1e-12, "lam2={lam2}: entrywise diff {diff}");
        }
    }
}

#[test]
fn qubitwise_exact_on_bell_state_gives_lambda4_fidelity() {
    for &lam2 in &[0.5f64, 0.7, 0.9, 0.99] {
        let bell = DensityMatrix::bell_phi_plus(q(0), q(1)).unwrap();
        let out = depolarize_qubitwise_exact(&bell, &[q(0), q(1)], &[lam2, lam2]).unwrap();
        let f = out.fidelity(&StateVector::bell_phi_plus(q(0), q(1))).unwrap();
        assert!((f - bell_pair_fidelity(lam2).unwrap()).abs() < 1e-12);
    }
    // spot value used elsewhere: lambda4(0.9) = 0.73 exactly
    let bell = DensityMatrix::bell_phi_plus(q(0), q(1)).unwrap();
    let out = depolarize_qubitwise_exact(&bell, &[q(0), q(1)], &[0.9, 0.9]).unwrap();
    let f = out.fidelity(&StateVector::bell_phi_plus(q(0), q(1))).unwrap();
    assert!((f - 0.73f64).abs() < 1e-12);
}

fn ghz6() -> (Vec<QubitLabel>, DensityMatrix<f64>) {
    let labels: Vec<QubitLabel> = (0..6).map(q).collect();
    let state = DensityMatrix::pure(&StateVector::ghz(labels.clone())).unwrap();
    (labels, state)
}

#[test]
fn qubitwise_exact_on_encoded_bell_gives_lambda64_fidelity() {
    for &lam2 in &[0.5f64, 0.7, 0.9, 0.99] {
        let (labels, ghz) = ghz6();
        let lams = vec![lam2; 6];
        let out = depolarize_qubitwise_exact(&ghz, &labels, &lams).unwrap();
        let f = out.fidelity(&StateVector::ghz(labels.clone())).unwrap();
        let expect = encoded_pair_fidelity(lam2).unwrap();
        assert!((f - expect).abs() < 1e-12, "lam2={lam2}: {f} vs {expect}");
    }
    // spot value: lambda64(0.9) = 25.394752/64
    let (labels, ghz) = ghz6();
    let out = depolarize_qubitwise_exact(&ghz, &labels, &[0.9; 6]).unwrap();
    let f = out.fidelity(&StateVector::ghz(labels)).unwrap();
    assert!((f - 0.396793).abs() < 1e-9);
}

#[test]
fn encoded_bell_invariance_operators() {
    // The operator types I⁶, X⁶, Y⁶, Z⁶, X²Y⁴, X⁴Y², Z⁴I², Z²I⁴ (pairwise
    // transversal placements) map the encoded Bell state to itself up to a
    // global phase.
    let (labels, ghz) = ghz6();
    let target = StateVector::ghz(labels.clone());
    let mut ops: Vec<[Pauli; 6]> = vec![
        [Pauli::I; 6],
        [Pauli::X; 6],
        [Pauli::Y; 6],
        [Pauli::Z; 6],
    ];
    // X on one transversal pair, Y on the other two — and its mirror.
    for special in 0..3 {
        let mut xy = [Pauli::Y; 6];
        xy[special] = Pauli::X;
        xy[special + 3] = Pauli::X;
        ops.push(xy);
        let mut yx = [Pauli::X; 6];
        yx[special] = Pauli::Y;
        yx[special + 3] = Pauli::Y;
        ops.push(yx);
    }
    // Z on two transversal pairs / one transversal pair.
    for special in 0..3 {
        let mut z4 = [Pauli::Z; 6];
        z4[special] = Pauli::I;
        z4[special + 3] = Pauli::I;
        ops.push(z4);
        let mut z2 = [Pauli::I; 6];
        z2[special] = Pauli::Z;
        z2[special + 3] = Pauli::Z;
        ops.push(z2);
    }
    assert_eq!(ops.len(), 16);
    for op in ops {
        let mut st = ghz.clone();
        for (i, &p) in op.iter().enumerate() {
            st = st.apply_pauli(p, labels[i]).unwrap();
        }
        let f = st.fidelity(&target).unwrap();
        assert!((f - 1.0).abs() < 1e-12, "operator {op:?} moved the state: fidelity {f}");
    }
}

// ----- compiled noise vs dense channels -----

/// Pauli-transfer comparison against the dense channel on all 16 two-qubit
/// Pauli inputs: through the state (I + P)/4, the coefficient of P in the
/// output must be (1−β) for traceless P (the β/4·Tr term only feeds the
/// identity component), and 1 for P = I.
#[test]
fn gate_depolarization_table_matches_dense_channel() {
    let beta = 0.37f64;
    let (a, b) = (q(0), q(1));
    let table = compile_noise(NoiseChannel::GateDepolarization { beta }).unwrap();
    let p_uniform = match table {
        CompiledNoise::CnotDepol { p } => p,
        _ => panic!("wrong table"),
    };
    assert!((p_uniform - beta).abs() < 1e-15);

    let pauli_matrix = |pa: Pauli, pb: Pauli| -> Vec<Complex<f64>> {
        let m = pauli_pair::<f64>(pa, pb);
        let mut data = vec![Complex::new(0.0f64, 0.0); 16];
        for r in 0..4 {
            for c in 0..4 {
                data[r * 4 + c] = m.entry(r, c);
            }
        }
        data
    };
    // coefficient of P' in rho: Tr[P'·rho]/4 (Paulis are an orthogonal basis)
    let coeff = |rho: &DensityMatrix<f64>, p_mat: &[Complex<f64>]| -> f64 {
        let mut acc = Complex::new(0.0f64, 0.0);
        for r in 0..4 {
            for c in 0..4 {
                acc += p_mat[r * 4 + c] * rho.entry(c, r);
            }
        }
        acc.re / 4.0
    };

    for pa in Pauli::ALL {
        for pb in Pauli::ALL {
            let p_mat = pauli_matrix(pa, pb);
            let is_identity = pa == Pauli::I && pb == Pauli::I;
            // physical probe state (I + P)/4 (just I/4 for the identity)
            let mut data = vec![Complex::new(0.0f64, 0.0); 16];
            for r in 0..4 {
                for c in 0..4 {
                    let ident = if r == c { 1.0 } else { 0.0 };
                    let p_part =
                        if is_identity { Complex::new(0.0, 0.0) } else { p_mat[r * 4 + c] };
                    data[r * 4 + c] = (Complex::new(ident, 0.0) + p_part) / 4.0;
                }
            }
            let probe = DensityMatrix::try_new(vec![a, b], data).unwrap();
            let out = probe.apply_cnot_noisy(a, b, beta).unwrap();
            // CNOT conjugation permutes Paulis: the output coefficient lives on
            // P'' = U P U†, computed via the clean channel.
            let clean = probe.apply_cnot_noisy(a, b, 0.0).unwrap();
            for qa in Pauli::ALL {
                for qb in Pauli::ALL {
                    if qa == Pauli::I && qb == Pauli::I {
                        continue;
                    }
                    let q_mat = pauli_matrix(qa, qb);
                    let c_clean = coeff(&clean, &q_mat);
                    let c_noisy = coeff(&out, &q_mat);
                    let scale = if is_identity { 1.0 } else { 1.0 - beta };
                    assert!(
                        (c_noisy - c_clean * scale).abs() < 1e-12,
                        "P={pa:?}{pb:?} probe, Q={qa:?}{qb:?}: {c_noisy} vs {}",
                        c_clean * scale
                    );
                }
            }
        }
    }
}

/// Sampling faithfulness: the empirical commutation sign of drawn Paulis
/// reproduces the dense channel's Pauli-transfer coefficient within 5 se.
#[test]
fn sampled_tables_match_transfer_coefficients() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let samples = 1_000_000u64;

    // Single-qubit decay at lambda2: coefficients of X/Y/Z are all 2λ₂−1.
    let lam2 = 0.83f64;
    let w = pauli_weights(lam2).unwrap();
    for target in [Pauli::X, Pauli::Y, Pauli::Z] {
        let mut sum = 0i64;
        for _ in 0..samples {
            let u: f64 = rng.random();
            let drawn = if u < w.w_i {
                Pauli::I
            } else if u < w.w_i + w.w_x {
                Pauli::X
            } else if u < w.w_i + w.w_x + w.w_y {
                Pauli::Y
            } else {
                Pauli::Z
            };
            let anticommute = drawn != Pauli::I && drawn != target;
            sum += if anticommute { -1 } else { 1 };
        }
        let mean = sum as f64 / samples as f64;
        let expect = 2.0 * lam2 - 1.0;
        let se = ((1.0 - expect * expect) / samples as f64).sqrt();
        assert!(
            (mean - expect).abs() < 5.0 * se,
            "{target:?}: mean {mean}, expect {expect}, se {se}"
        );
    }

    // Group depolarization at keep probability c: every non-identity Pauli on
    // the group keeps coefficient c (uniform draws average to zero).
    {
        let lam4 = 0.82f64;
        let keep = match compile_noise(NoiseChannel::PairIsotropic { lam4 }).unwrap() {
            CompiledNoise::Group { keep } => keep,
            _ => panic!("wrong table"),
        };
        // reference operator Z⊗I: a group event draws uniform Paulis on both
        // qubits; the first anticommutes with Z when it lands on X or Y.
        let mut sum = 0i64;
        for _ in 0..samples {
            let sign = if rng.random::<f64>() < 1.0 - keep {
                let first: u8 = rng.random_range(0..4);
                let _second: u8 = rng.random_range(0..4);
                if first == 1 || first == 2 {
                    -1
                } else {
                    1
                }
            } else {
                1
            };
            sum += sign;
        }
        let mean = sum as f64 / samples as f64;
        let se = ((1.0 - keep * keep) / samples as f64).sqrt();
        assert!((mean - keep).abs() < 5.0 * se, "group: mean {mean}, keep {keep}");
    }

    // Gate depolarization at beta: every non-identity two-qubit Pauli keeps
    // coefficient (1−β); uniform draws anticommute half the time.
    let beta = 0.2f64;
    let mut sum = 0i64;
    for _ in 0..samples {
        let hit = rng.random::<f64>() < beta;
        let sign = if hit {
            // drawn uniform Pauli on each qubit; reference operator X⊗I:
            // anticommutes when the first drawn Pauli is Y or Z.
            let first: u8 = rng.random_range(0..4);
            let _second: u8 = rng.random_range(0..4);
            if first == 2 || first == 3 {
                -1
            } else {
                1
            }
        } else {
            1
        };
        sum += sign;
    }
    let mean = sum as f64 / samples as f64;
    let expect = 1.0 - beta;
    let se = ((1.0 - expect * expect) / samples as f64).sqrt();
    assert!((mean - expect).abs() < 5.0 * se, "mean {mean}, expect {expect}");
}
