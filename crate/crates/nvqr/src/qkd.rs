//! Secret-key metrics: secret fraction, entanglement generation rate,
//! NV-normalized key rate, the repeaterless benchmark, nesting-level
//! optimization and optimal-protocol region classification.

use rayon::prelude::*;

use crate::error::{Result, SimError};
use crate::protocols::{
    decode, decode_dense, elementary_link_state, BankState, ChainModel, DecodeOutcome, DenseFinal,
    Engine, RepeaterConfig, SystemParams,
};
use crate::scalar::Scalar;
use crate::timing::{self, AttemptsPolicy, LinkParams, Protocol};

/// Shannon binary entropy h(p) = −p·log₂p − (1−p)·log₂(1−p), h(0)=h(1)=0.
pub fn binary_entropy<T: Scalar>(p: T) -> Result<T> {
    if p < T::zero() || p > T::one() {
        return Err(SimError::out_of_range("p", p, 0.0, 1.0));
    }
    if p == T::zero() || p == T::one() {
        return Ok(T::zero());
    }
    let q = T::one() - p;
    Ok(-(p * p.log2() + q * q.log2()))
}

/// Asymptotic secret fraction r∞ = max{0, 1 − h(Q_z) − h(Q_x)}.
pub fn secret_fraction<T: Scalar>(q_z: T, q_x: T) -> Result<T> {
    for (name, q) in [("Q_z", q_z), ("Q_x", q_x)] {
        if q < T::zero() || q > T::of(0.5) {
            return Err(SimError::out_of_range(name, q, 0.0, 0.5));
        }
    }
    let r = T::one() - binary_entropy(q_z)? - binary_entropy(q_x)?;
    Ok(if r > T::zero() { r } else { T::zero() })
}

/// Entangled-pair generation rate R = 1/(T₁+T₂).
pub fn repetition_rate<T: Scalar>(
    protocol: Protocol,
    n: u32,
    link: &LinkParams<T>,
    policy: AttemptsPolicy,
) -> Result<T> {
    let t1 = timing::link_wait_time(protocol, n, link, policy)?;
    let t2 = timing::swap_wait_time(protocol, n, link, policy)?;
    Ok(T::one() / (t1.seconds + t2.seconds))
}

/// One fully evaluated parameter point.
#[derive(Clone, Debug)]
pub struct KeyRateRecord<T: Scalar> {
    pub protocol: Protocol,
    pub n: u32,
    pub q_z: T,
    pub q_x: T,
    pub r_inf: T,
    /// Entangled-pair rate R = 1/(T₁+T₂) in pairs/s.
    pub rate_hz: T,
    /// Key-round acceptance probability.
    pub acceptance: T,
    /// R·r∞·acceptance normalized by the NV count.
    pub norm_key_rate: T,
    pub engine: Engine,
    pub decoder_used: &'static str,
    pub samples: u64,
    pub seed: u64,
    pub stderr_qz: T,
    pub stderr_qx: T,
    /// Post-selection killed every round (QBERs are NaN).
    pub zero_acceptance: bool,
    /// The scaled N(M,q) branch was used for a waiting time.
    pub used_scaled_attempts: bool,
}

impl<T: Scalar> KeyRateRecord<T> {
    fn from_outcome(
        config: &RepeaterConfig,
        outcome: DecodeOutcome<T>,
        rate_hz: T,
        used_scaled: bool,
    ) -> Self {
        let r_inf = outcome.secret_fraction();
        let nv = T::of(config.protocol.nv_count(config.n) as f64);
        let norm = if outcome.zero_acceptance {
            T::zero()
        } else {
            rate_hz * r_inf * outcome.acceptance / nv
        };
        KeyRateRecord {
            protocol: config.protocol,
            n: config.n,
            q_z: outcome.q_z,
            q_x: outcome.q_x,
            r_inf,
            rate_hz,
            acceptance: outcome.acceptance,
            norm_key_rate: norm,
            engine: config.engine,
            decoder_used: outcome.decoder_used,
            samples: match config.engine {
                Engine::Pauli => config.samples,
                _ => 0,
            },
            seed: config.seed,
            stderr_qz: outcome.stderr_qz,
            stderr_qx: outcome.stderr_qx,
            zero_acceptance: outcome.zero_acceptance,
            used_scaled_attempts: used_scaled,
        }
    }

    /// Rate interval from 1σ shifts of both QBERs (degenerate for exact engines).
    pub fn rate_interval(&self) -> (T, T) {
        if self.zero_acceptance || self.stderr_qz.is_nan() {
            return (self.norm_key_rate, self.norm_key_rate);
        }
        let clamp = |q: T| {
            if q < T::zero() {
                T::zero()
            } else if q > T::of(0.5) {
                T::of(0.5)
            } else {
                q
            }
        };
        let nv = T::of(self.protocol.nv_count(self.n) as f64);
        let at = |qz: T, qx: T| {
            let r = secret_fraction(clamp(qz), clamp(qx)).unwrap_or(T::zero());
            self.rate_hz * r * self.acceptance / nv
        };
        let hi = at(self.q_z - self.stderr_qz, self.q_x - self.stderr_qx);
        let lo = at(self.q_z + self.stderr_qz, self.q_x + self.stderr_qx);
        (lo, hi)
    }
}

/// Normalized key rate for a decoded chain outcome: R·r∞·acceptance divided
/// by the protocol's NV count.
pub fn normalized_key_rate<T: Scalar>(
    protocol: Protocol,
    n: u32,
    rate_hz: T,
    r_inf: T,
    acceptance: T,
) -> T {
    rate_hz * r_inf * acceptance / T::of(protocol.nv_count(n) as f64)
}

/// Evaluate one (protocol, n) point end to end.
pub fn evaluate_point<T: Scalar>(
    config: &RepeaterConfig,
    params: &SystemParams<T>,
) -> Result<KeyRateRecord<T>> {
    let model = ChainModel::build(config, params)?;
    let used_scaled = model.t1.used_scaled || model.t2.used_scaled;
    let rate_hz = T::one() / (model.t1.seconds + model.t2.seconds);
    let final_state = match crate::protocols::run_chain(config, params) {
        Ok(f) => f,
        Err(SimError::ZeroAcceptance) => {
            let dead = DecodeOutcome::<T> {
                q_z: T::nan(),
                q_x: T::nan(),
                acceptance: T::zero(),
                stderr_qz: T::nan(),
                stderr_qx: T::nan(),
                decoder_used: "majority",
                zero_acceptance: true,
            };
            return Ok(KeyRateRecord::from_outcome(config, dead, rate_hz, used_scaled));
        }
        Err(e) => return Err(e),
    };
    let outcome = decode(&final_state, config.decoder)?;
    Ok(KeyRateRecord::from_outcome(config, outcome, rate_hz, used_scaled))
}

/// The repeaterless benchmark R₀ = P₀(L_tot)·r∞/(2T₀): direct transmission
/// over the full distance with the end-to-end pair stored in nuclear spins.
/// The 1/2 is the two-NV normalization, so the value is comparable with the
/// per-NV rates of the repeater protocols.
pub fn repeaterless_rate<T: Scalar>(params: &SystemParams<T>) -> Result<(T, DecodeOutcome<T>)> {
    params.validate()?;
    let l = params.link.l_tot;
    let state = elementary_link_state(params, l)?;
    let final_state = DenseFinal {
        banks: BankState { code_size: 1, state },
        swap_acceptance: T::one(),
        readout_flip: params.beta + params.delta,
    };
    let outcome = decode_dense(&final_state)?.majority_outcome();
    let r_inf = outcome.secret_fraction();
    let p0 = timing::entangling_success_prob(l, &params.link)?;
    let t0 = timing::heralding_period(l, params.link.c)?;
    Ok((p0 * r_inf / (T::of(2.0) * t0), outcome))
}

/// Evaluate all nesting levels in the range and keep the best normalized key
/// rate; ties break toward smaller n.
pub fn optimize_nesting<T: Scalar>(
    base: &RepeaterConfig,
    params: &SystemParams<T>,
    n_range: std::ops::RangeInclusive<u32>,
) -> Result<KeyRateRecord<T>> {
    let mut best: Option<KeyRateRecord<T>> = None;
    for n in n_range {
        let config = RepeaterConfig { n, ..*base };
        let record = evaluate_point(&config, params)?;
        let better = match &best {
            None => true,
            Some(b) => record.norm_key_rate > b.norm_key_rate,
        };
        if better {
            best = Some(record);
        }
    }
    best.ok_or(SimError::InvalidParameter {
        name: "n_range",
        reason: "empty nesting range".into(),
    })
}

/// Classification of one parameter point: which strategy yields the highest
/// normalized key rate.
#[derive(Clone, Debug)]
pub struct RegionPoint<T: Scalar> {
    pub beta: T,
    pub eta_c: T,
    pub l_tot: T,
    /// "P1".."P4", "repeaterless", or "none".
    pub best: String,
    pub best_rate: T,
    pub best_n: u32,
    pub runner_up: String,
    /// The 1σ rate intervals of the top two candidates overlap.
    pub overlap_flag: bool,
}

/// Classify every grid point by its best protocol after nesting optimization,
/// including the repeaterless benchmark as a candidate.
pub fn classify_region<T: Scalar>(
    points: &[(T, T, T)],
    base_params: &SystemParams<T>,
    base_config: &RepeaterConfig,
    protocols: &[Protocol],
    n_range: std::ops::RangeInclusive<u32>,
) -> Result<Vec<RegionPoint<T>>> {
    points
        .par_iter()
        .map(|&(beta, eta_c, l_tot)| {
            let mut params = *base_params;
            params.beta = beta;
            params.link.eta_c = eta_c;
            params.link.l_tot = l_tot;
            // candidates: (label, rate, n, interval)
            let mut candidates: Vec<(String, T, u32, (T, T))> = Vec::new();
            for &proto in protocols {
                let config = RepeaterConfig { protocol: proto, ..*base_config };
                let rec = optimize_nesting(&config, &params, n_range.clone())?;
                candidates.push((
                    proto.name().to_string(),
                    rec.norm_key_rate,
                    rec.n,
                    rec.rate_interval(),
                ));
            }
            let (r0, _) = repeaterless_rate(&params)?;
            candidates.push(("repeaterless".into(), r0, 0, (r0, r0)));
            candidates.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("non-NaN rates"));
            let top = &candidates[0];
            let second = &candidates[1];
            let (best, best_rate, best_n) = if top.1 > T::zero() {
                (top.0.clone(), top.1, top.2)
            } else {
                ("none".to_string(), T::zero(), 0)
            };
            let overlap = best != "none" && second.1 > T::zero() && second.3 .1 >= top.3 .0;
            Ok(RegionPoint {
                beta,
                eta_c,
                l_tot,
                best,
                best_rate,
                best_n,
                runner_up: second.0.clone(),
                overlap_flag: overlap,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_values() {
        assert_eq!(binary_entropy(0.0f64).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0f64).unwrap(), 0.0);
        assert!((binary_entropy(0.5f64).unwrap() - 1.0).abs() < 1e-15);
        // independently computed via log tables: h(0.05) = 0.05·log2(20) + 0.95·log2(1/0.95)
        assert!((binary_entropy(0.05f64).unwrap() - 0.286396957).abs() < 1e-9);
        assert!(binary_entropy(-0.1f64).is_err());
        assert!(binary_entropy(1.1f64).is_err());
    }

    #[test]
    fn secret_fraction_values() {
        assert!((secret_fraction(0.0f64, 0.0).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(secret_fraction(0.5f64, 0.5).unwrap(), 0.0);
        assert!((secret_fraction(0.05f64, 0.05).unwrap() - 0.427206086).abs() < 1e-8);
        assert!(secret_fraction(0.6f64, 0.1).is_err());
    }

    #[test]
    fn secret_fraction_monotone_and_cutoff() {
        let mut prev = secret_fraction(0.0f64, 0.02).unwrap();
        for i in 1..=10 {
            let q = 0.05 * i as f64 / 10.0;
            let v = secret_fraction(q, 0.02).unwrap();
            assert!(v < prev);
            prev = v;
        }
        // r = 0 exactly when h(qz)+h(qx) >= 1 (e.g. both at 0.11: 2h(0.11) ≈ 1.0)
        let r = secret_fraction(0.5f64, 0.0).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn repetition_rate_basics() {
        let link = LinkParams {
            l_tot: 100.0f64,
            eta_c: 0.3,
            eta_d: 0.9,
            l_att: 22.0,
            c: 2e5,
            t_s: 1e-6,
        };
        let policy = AttemptsPolicy::default();
        let r = repetition_rate(Protocol::P3, 1, &link, policy).unwrap();
        let t1 = timing::link_wait_time(Protocol::P3, 1, &link, policy).unwrap().seconds;
        let t2 = timing::swap_wait_time(Protocol::P3, 1, &link, policy).unwrap().seconds;
        assert!((r - 1.0 / (t1 + t2)).abs() < 1e-9 * r);

        // strictly decreasing in L_tot at fixed n
        let mut prev = f64::INFINITY;
        for l in [50.0, 100.0, 200.0, 400.0] {
            let mut lk = link;
            lk.l_tot = l;
            let r = repetition_rate(Protocol::P1, 2, &lk, policy).unwrap();
            assert!(r < prev);
            prev = r;
        }
    }

    #[test]
    fn repeaterless_short_noiseless_closed_form() {
        let params = SystemParams::noiseless(10.0f64, 1.0);
        let (r0, out) = repeaterless_rate(&params).unwrap();
        assert!(out.q_z.abs() < 1e-12 && out.q_x.abs() < 1e-12);
        assert!((out.secret_fraction() - 1.0).abs() < 1e-10);
        let p0 = timing::entangling_success_prob(10.0, &params.link).unwrap();
        let t0 = timing::heralding_period(10.0f64, params.link.c).unwrap();
        assert!((r0 - p0 / (2.0 * t0)).abs() < 1e-9 * r0);
    }

    #[test]
    fn region_classification_single_point() {
        let config = RepeaterConfig {
            protocol: Protocol::P3,
            n: 1,
            engine: Engine::Dense,
            decoder: crate::protocols::Decoder::BestOfBoth,
            samples: 0,
            seed: 0,
            attempts: AttemptsPolicy::default(),
        };
        let base = SystemParams::nominal(100.0f64, 0.3);

        // Very short noiseless link: direct transmission beats the repeater
        // overhead.
        let noiseless = SystemParams::noiseless(10.0, 1.0);
        let region = classify_region(
            &[(0.0, 1.0, 10.0)],
            &noiseless,
            &config,
            &[Protocol::P3, Protocol::P4],
            1..=2,
        )
        .unwrap();
        assert_eq!(region[0].best, "repeaterless");
        assert!(region[0].best_rate > 0.0);

        // Gate error above every cutoff: nothing makes key.
        let region = classify_region(
            &[(0.3, 0.3, 300.0)],
            &base,
            &config,
            &Protocol::ALL,
            1..=3,
        )
        .unwrap();
        assert_eq!(region[0].best, "none");
        assert_eq!(region[0].best_rate, 0.0);

        // One grid point reduces to an optimize_nesting comparison.
        let region = classify_region(
            &[(1e-3, 0.3, 100.0)],
            &base,
            &config,
            &[Protocol::P4],
            1..=3,
        )
        .unwrap();
        let mut params = base;
        params.beta = 1e-3;
        let direct = optimize_nesting(
            &RepeaterConfig { protocol: Protocol::P4, ..config },
            &params,
            1..=3,
        )
        .unwrap();
        if direct.norm_key_rate > 0.0 {
            assert_eq!(region[0].best, "P4");
            assert!((region[0].best_rate - direct.norm_key_rate).abs() < 1e-15);
            assert_eq!(region[0].best_n, direct.n);
        }
    }

    #[test]
    fn cutoff_distance_exists() {
        // For fixed noise the normalized key rate hits zero beyond some
        // total distance and stays there.
        let config = RepeaterConfig {
            protocol: Protocol::P4,
            n: 1,
            engine: Engine::Dense,
            decoder: crate::protocols::Decoder::BestOfBoth,
            samples: 0,
            seed: 0,
            attempts: AttemptsPolicy::default(),
        };
        let mut last_positive = None;
        let mut first_zero = None;
        for (i, l_tot) in [50.0f64, 100.0, 150.0, 200.0, 300.0, 450.0, 650.0].iter().enumerate() {
            let params = SystemParams::nominal(*l_tot, 0.3);
            let rec = optimize_nesting(&config, &params, 1..=4).unwrap();
            if rec.norm_key_rate > 0.0 {
                last_positive = Some(i);
                assert!(first_zero.is_none(), "rate revived after dying at {l_tot} km");
            } else if first_zero.is_none() {
                first_zero = Some(i);
            }
        }
        assert!(last_positive.is_some(), "no distance produced key at all");
        assert!(first_zero.is_some(), "rate never hit the cutoff on the grid");
    }

    #[test]
    fn normalized_rate_divisors_and_scaling() {
        // divisors straight from the protocol table
        assert_eq!(Protocol::P1.nv_count(2), 24);
        assert_eq!(Protocol::P4.nv_count(3), 9);
        let r: f64 = normalized_key_rate(Protocol::P1, 2, 240.0, 0.5, 1.0);
        assert!((r - 5.0).abs() < 1e-12);
        // r_inf = 0 kills the rate
        let r: f64 = normalized_key_rate(Protocol::P2, 3, 100.0, 0.0, 1.0);
        assert_eq!(r, 0.0);
        // common positive scaling leaves the argmax unchanged
        let rates = [3.0f64, 5.0, 4.0];
        let argmax = |v: &[f64]| {
            v.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0
        };
        let scaled: Vec<f64> = rates.iter().map(|r| r * 7.5).collect();
        assert_eq!(argmax(&rates), argmax(&scaled));
    }
}
