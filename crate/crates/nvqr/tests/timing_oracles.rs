//! Independent oracles for the waiting-time combinatorics: exact rational
//! evaluation of the alternating sum and a Monte Carlo estimate of the
//! expected all-success attempt count.

use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nvqr::timing::mean_attempts_exact;

fn rational_reference(m: u64, q: f64) -> f64 {
    let q = Ratio::<BigInt>::from_float(q).expect("finite q");
    let one = Ratio::<BigInt>::one();
    let one_minus_q = &one - &q;
    let mut pow = one.clone();
    let mut binom = Ratio::<BigInt>::one();
    let mut sum = Ratio::<BigInt>::zero();
    for k in 1..=m {
        // C(m,k) built incrementally (exact in rational arithmetic).
        binom = binom * Ratio::from_integer(BigInt::from(m - k + 1))
            / Ratio::from_integer(BigInt::from(k));
        pow *= &one_minus_q;
        let term = &binom / (&one - &pow);
        if k % 2 == 1 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    sum.to_f64().expect("representable result")
}

#[test]
fn exact_sum_matches_rational_evaluation() {
    for &m in &[1u64, 2, 3, 6, 8, 16, 32, 48, 64] {
        for &q in &[1e-3f64, 0.01, 0.1, 0.5, 0.9] {
            let fast = mean_attempts_exact(m, q).unwrap();
            let slow = rational_reference(m, q);
            let rel = ((fast - slow) / slow).abs();
            assert!(rel < 1e-9, "M={m} q={q}: fast {fast} vs rational {slow} (rel {rel:.2e})");
        }
    }
}

#[test]
fn exact_sum_matches_monte_carlo() {
    // Expected number of attempts until M independent Bernoulli(q) processes
    // have all succeeded = E[max of M geometrics].
    let mut rng = ChaCha8Rng::seed_from_u64(4040);
    let trials = 1_000_000u64;
    for &m in &[1usize, 2, 3, 6, 8] {
        for &q in &[0.01f64, 0.1, 0.5] {
            let log1mq = (1.0 - q).ln();
            let mut sum = 0.0f64;
            let mut sum_sq = 0.0f64;
            for _ in 0..trials {
                let mut worst = 0.0f64;
                for _ in 0..m {
                    let u: f64 = rng.random();
                    // inverse-CDF geometric draw (1-based attempt count)
                    let draws = (u.ln() / log1mq).floor() + 1.0;
                    worst = worst.max(draws);
                }
                sum += worst;
                sum_sq += worst * worst;
            }
            let mean = sum / trials as f64;
            let var = (sum_sq / trials as f64 - mean * mean).max(0.0);
            let se = (var / trials as f64).sqrt();
            let exact = mean_attempts_exact(m as u64, q).unwrap();
            assert!(
                (mean - exact).abs() < 3.0 * se,
                "M={m} q={q}: MC {mean} ± {se} vs exact {exact}"
            );
        }
    }
}

#[test]
fn single_process_is_reciprocal() {
    for &q in &[1e-4f64, 0.01, 0.3, 1.0] {
        let v = mean_attempts_exact(1, q).unwrap();
        assert!((v - 1.0 / q).abs() < 1e-9 / q, "q={q}: {v}");
    }
}
