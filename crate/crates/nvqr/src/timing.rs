//! Link-level success probabilities and waiting-time quantities: the
//! heralding period T₀, the all-links wait T₁, the mediator wait T₂, and the
//! expected number of attempts N(M,q) for M parallel Bernoulli processes to
//! all succeed.

use crate::error::{Result, SimError};
use crate::scalar::Scalar;

/// The four repeater protocols.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum Protocol {
    /// Encoded links everywhere, co-located swap mediators.
    P1,
    /// Encoded links on every other segment, remote mediators.
    P2,
    /// Uncoded version of P1.
    P3,
    /// Uncoded version of P2.
    P4,
}

impl Protocol {
    pub const ALL: [Protocol; 4] = [Protocol::P1, Protocol::P2, Protocol::P3, Protocol::P4];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::P1 => "P1",
            Protocol::P2 => "P2",
            Protocol::P3 => "P3",
            Protocol::P4 => "P4",
        }
    }

    pub fn parse(s: &str) -> Option<Protocol> {
        match s.trim().to_ascii_uppercase().as_str() {
            "P1" | "1" => Some(Protocol::P1),
            "P2" | "2" => Some(Protocol::P2),
            "P3" | "3" => Some(Protocol::P3),
            "P4" | "4" => Some(Protocol::P4),
            _ => None,
        }
    }

    /// True for the repetition-coded pipelines.
    pub fn encoded(self) -> bool {
        matches!(self, Protocol::P1 | Protocol::P2)
    }

    /// True when swap mediators span a full elementary link.
    pub fn remote_mediator(self) -> bool {
        matches!(self, Protocol::P2 | Protocol::P4)
    }

    /// NV centers consumed by the whole chain at nesting level n.
    pub fn nv_count(self, n: u32) -> u64 {
        let two_n = 1u64 << n;
        match self {
            Protocol::P1 => 6 * two_n,
            Protocol::P2 => 3 * (two_n + 1),
            Protocol::P3 => 2 * two_n,
            Protocol::P4 => two_n + 1,
        }
    }
}

/// Physical link parameters. Lengths in km, times in seconds, speeds in km/s.
#[derive(Clone, Copy, Debug)]
pub struct LinkParams<T: Scalar> {
    /// Total end-to-end distance.
    pub l_tot: T,
    /// Photon coupling/collection/conversion efficiency.
    pub eta_c: T,
    /// Single-photon detector efficiency.
    pub eta_d: T,
    /// Fiber attenuation length.
    pub l_att: T,
    /// Speed of light in fiber.
    pub c: T,
    /// Attempt period for co-located electron-electron entanglement.
    pub t_s: T,
}

impl<T: Scalar> LinkParams<T> {
    pub fn validate(&self) -> Result<()> {
        if self.l_tot <= T::zero() {
            return Err(SimError::out_of_range("L_tot", self.l_tot, 0.0, f64::INFINITY));
        }
        for (name, v) in [("eta_c", self.eta_c), ("eta_d", self.eta_d)] {
            if v < T::zero() || v > T::one() {
                return Err(SimError::out_of_range(name, v, 0.0, 1.0));
            }
        }
        for (name, v) in [("L_att", self.l_att), ("c", self.c), ("T_s", self.t_s)] {
            if v <= T::zero() {
                return Err(SimError::out_of_range(name, v, 0.0, f64::INFINITY));
            }
        }
        Ok(())
    }

    /// Elementary link length L₀ = L_tot / 2ⁿ.
    pub fn l0(&self, n: u32) -> T {
        self.l_tot / T::of_usize(1usize << n)
    }
}

/// Photon transmissivity through half an elementary link: exp[−L₀/(2·L_att)].
pub fn transmissivity<T: Scalar>(l0: T, l_att: T) -> Result<T> {
    if l0 < T::zero() {
        return Err(SimError::out_of_range("L0", l0, 0.0, f64::INFINITY));
    }
    if l_att <= T::zero() {
        return Err(SimError::out_of_range("L_att", l_att, 0.0, f64::INFINITY));
    }
    Ok((-l0 / (T::of(2.0) * l_att)).exp())
}

/// Success probability of one entangling attempt over a length-L₀ link:
/// ½·η_c²·η_t²·η_d².
pub fn entangling_success_prob<T: Scalar>(l0: T, params: &LinkParams<T>) -> Result<T> {
    params.validate()?;
    let eta_t = transmissivity(l0, params.l_att)?;
    Ok(T::of(0.5) * params.eta_c * params.eta_c * eta_t * eta_t * params.eta_d * params.eta_d)
}

/// Heralding/repetition period for entanglement distribution: T₀ = L₀/c.
pub fn heralding_period<T: Scalar>(l0: T, c: T) -> Result<T> {
    if l0 < T::zero() {
        return Err(SimError::out_of_range("L0", l0, 0.0, f64::INFINITY));
    }
    if c <= T::zero() {
        return Err(SimError::out_of_range("c", c, 0.0, f64::INFINITY));
    }
    Ok(l0 / c)
}

// ----- double-double arithmetic -----
//
// The alternating sum for N(M,q) cancels roughly like 2^M/M², i.e. ~16
// decimal digits at M = 64, so plain f64 terms lose everything. Terms and the
// accumulator are carried in unevaluated hi+lo pairs (~2x the mantissa).

#[derive(Clone, Copy, Debug)]
struct Dd<T: Scalar> {
    hi: T,
    lo: T,
}

impl<T: Scalar> Dd<T> {
    fn from(x: T) -> Self {
        Dd { hi: x, lo: T::zero() }
    }

    fn from_u128(mut c: u128) -> Self {
        // Accumulate 32-bit chunks exactly: dd = dd·2³² + chunk.
        let mut chunks = [0u32; 4];
        for slot in chunks.iter_mut() {
            *slot = (c & 0xffff_ffff) as u32;
            c >>= 32;
        }
        let shift = T::of(4294967296.0);
        let mut dd = Dd::from(T::zero());
        for &chunk in chunks.iter().rev() {
            dd = dd.mul(Dd::from(shift)).add(Dd::from(T::of(chunk as f64)));
        }
        dd
    }

    fn quick_two_sum(a: T, b: T) -> Self {
        let s = a + b;
        let err = b - (s - a);
        Dd { hi: s, lo: err }
    }

    fn two_sum(a: T, b: T) -> (T, T) {
        let s = a + b;
        let bb = s - a;
        let err = (a - (s - bb)) + (b - bb);
        (s, err)
    }

    fn two_prod(a: T, b: T) -> (T, T) {
        let p = a * b;
        let err = a.mul_add(b, -p);
        (p, err)
    }

    fn add(self, other: Self) -> Self {
        let (s, e) = Self::two_sum(self.hi, other.hi);
        Dd::quick_two_sum(s, e + self.lo + other.lo)
    }

    fn neg(self) -> Self {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    fn sub(self, other: Self) -> Self {
        self.add(other.neg())
    }

    fn mul(self, other: Self) -> Self {
        let (p, e) = Self::two_prod(self.hi, other.hi);
        Dd::quick_two_sum(p, e + self.hi * other.lo + self.lo * other.hi)
    }

    fn div(self, other: Self) -> Self {
        let q1 = self.hi / other.hi;
        let r = self.sub(other.mul(Dd::from(q1)));
        let q2 = r.hi / other.hi;
        let r2 = r.sub(other.mul(Dd::from(q2)));
        let q3 = r2.hi / other.hi;
        Dd::quick_two_sum(q1, q2).add(Dd::from(q3))
    }

    fn value(self) -> T {
        self.hi + self.lo
    }
}

fn binomial_u128(m: u64, k: u64) -> Result<u128> {
    let mut c: u128 = 1;
    for i in 0..k {
        c = c
            .checked_mul((m - i) as u128)
            .ok_or(SimError::NonConformingAttempts { m, max: 128 })?;
        c /= (i + 1) as u128;
    }
    Ok(c)
}

/// Expected number of attempts for M independent Bernoulli(q) processes to
/// all succeed: N(M,q) = Σ_{k=1..M} C(M,k)·(−1)^{k+1}/(1−(1−q)^k).
pub fn mean_attempts_exact<T: Scalar>(m: u64, q: T) -> Result<T> {
    if m == 0 {
        return Err(SimError::InvalidParameter {
            name: "M",
            reason: "need at least one Bernoulli process".into(),
        });
    }
    if q <= T::zero() || q > T::one() {
        return Err(SimError::out_of_range("q", q, 0.0, 1.0));
    }
    let one = Dd::from(T::one());
    let one_minus_q = one.sub(Dd::from(q));
    let mut pow = one; // (1-q)^k
    let mut sum = Dd::from(T::zero());
    for k in 1..=m {
        pow = pow.mul(one_minus_q);
        let denom = one.sub(pow);
        let coeff = Dd::<T>::from_u128(binomial_u128(m, k)?);
        let term = coeff.div(denom);
        sum = if k % 2 == 1 { sum.add(term) } else { sum.sub(term) };
    }
    Ok(sum.value())
}

/// Exact series evaluation through the survival function: N(M,q) =
/// E[max of M geometrics] = Σ_{t≥0} [1 − (1−(1−q)^t)^M]. Every term is
/// positive, so unlike the alternating sum this form has no cancellation and
/// works at any M; the term count grows like 1/q, so it is reserved for
/// moderate q.
pub fn mean_attempts_series<T: Scalar>(m: u64, q: T) -> Result<T> {
    if m == 0 {
        return Err(SimError::InvalidParameter {
            name: "M",
            reason: "need at least one Bernoulli process".into(),
        });
    }
    if q <= T::zero() || q > T::one() {
        return Err(SimError::out_of_range("q", q, 0.0, 1.0));
    }
    if q == T::one() {
        return Ok(T::one());
    }
    let log1mq = (-q).ln_1p(); // ln(1-q)
    let m_t = T::of(m as f64);
    let cutoff = T::of(1e-16);
    let mut total = T::one(); // t = 0 term: 1 − 0^M = 1
    let mut comp = T::zero();
    let mut t: u64 = 1;
    loop {
        let s = (T::of(t as f64) * log1mq).exp(); // (1−q)^t
        // 1 − (1−s)^M, stable for small s
        let term = -(m_t * (-s).ln_1p()).exp_m1();
        // compensated accumulation
        let y = term - comp;
        let sum = total + y;
        comp = (sum - total) - y;
        total = sum;
        if term < cutoff {
            break;
        }
        t += 1;
    }
    Ok(total)
}

/// Scaled evaluation for M = 2ˢ·M′: (3/2)ˢ·N(M′, q), an upper bound in the
/// small-q limit. `max_exact` bounds the M′ the exact sum is trusted at;
/// the call degenerates to the exact sum when M ≤ max_exact.
pub fn mean_attempts_scaled<T: Scalar>(m: u64, q: T, max_exact: u64) -> Result<(T, u32)> {
    let mut reduced = m;
    let mut reductions = 0u32;
    while reduced > max_exact {
        if !reduced.is_multiple_of(2) {
            return Err(SimError::NonConformingAttempts { m, max: max_exact });
        }
        reduced /= 2;
        reductions += 1;
    }
    let base = mean_attempts_exact(reduced, q)?;
    let factor = T::of(1.5).powi(reductions as i32);
    Ok((base * factor, reductions))
}

/// Evaluation policy for N(M,q): exact up to `max_exact_m`, scaled beyond it;
/// small q is routed through the scaled path as well (where it degenerates to
/// the exact sum unless M also exceeds the cap).
#[derive(Clone, Copy, Debug)]
pub struct AttemptsPolicy {
    pub max_exact_m: u64,
    pub min_exact_q: f64,
}

impl Default for AttemptsPolicy {
    fn default() -> Self {
        AttemptsPolicy { max_exact_m: 64, min_exact_q: 1e-3 }
    }
}

/// N(M,q) under a policy. Returns the value and whether an approximating
/// (scaled) branch was used.
///
/// Small q routes through the scaled doubling approximation (the series
/// would need ~1/q terms); moderate q beyond the alternating sum's reach
/// uses the exact survival-function series instead, which has no
/// cancellation at any M. The scaled reduction also handles odd M (the
/// fully-encoded chain needs M = 3(2ⁿ−1) mediators) by halving with
/// ceiling: N(M) ≤ N(2⌈M/2⌉) ≈ (3/2)·N(⌈M/2⌉), keeping the approximation
/// on its upper-bound side.
pub fn mean_attempts<T: Scalar>(m: u64, q: T, policy: AttemptsPolicy) -> Result<(T, bool)> {
    if q.as_f64() < policy.min_exact_q {
        let mut reduced = m;
        let mut reductions = 0u32;
        while reduced > policy.max_exact_m {
            reduced = reduced.div_ceil(2);
            reductions += 1;
        }
        let factor = T::of(1.5).powi(reductions as i32);
        Ok((mean_attempts_exact(reduced, q)? * factor, reductions > 0))
    } else if m > policy.max_exact_m {
        Ok((mean_attempts_series(m, q)?, false))
    } else {
        Ok((mean_attempts_exact(m, q)?, false))
    }
}

/// A waiting time plus the evaluation branch that produced it.
#[derive(Clone, Copy, Debug)]
pub struct WaitTime<T: Scalar> {
    pub seconds: T,
    pub used_scaled: bool,
}

fn check_nesting(n: u32) -> Result<()> {
    if n == 0 {
        return Err(SimError::InvalidNesting { n });
    }
    Ok(())
}

/// Bell pairs that must all be heralded before the encode stage.
pub fn link_pair_count(protocol: Protocol, n: u32) -> u64 {
    let two_n = 1u64 << n;
    match protocol {
        Protocol::P1 => 3 * two_n,
        Protocol::P2 => 3 * (two_n / 2),
        Protocol::P3 => two_n,
        Protocol::P4 => two_n / 2,
    }
}

/// Mediator pairs that must all be heralded before the swap stage.
pub fn mediator_pair_count(protocol: Protocol, n: u32) -> u64 {
    let two_n = 1u64 << n;
    match protocol {
        Protocol::P1 => 3 * (two_n - 1),
        Protocol::P2 => 3 * (two_n / 2),
        Protocol::P3 => two_n - 1,
        Protocol::P4 => two_n / 2,
    }
}

/// T₁ = N(M, P₀(L₀))·T₀: the mean wait until every elementary link of the
/// chain is ready.
pub fn link_wait_time<T: Scalar>(
    protocol: Protocol,
    n: u32,
    params: &LinkParams<T>,
    policy: AttemptsPolicy,
) -> Result<WaitTime<T>> {
    check_nesting(n)?;
    let l0 = params.l0(n);
    let q = entangling_success_prob(l0, params)?;
    let t0 = heralding_period(l0, params.c)?;
    let (attempts, used_scaled) = mean_attempts(link_pair_count(protocol, n), q, policy)?;
    Ok(WaitTime { seconds: attempts * t0, used_scaled })
}

/// T₂ = N(M′, P_s)·T_period: the mean wait until every swap mediator is
/// ready. Co-located mediators (P1/P3) attempt at the local period T_s with
/// P₀(0); remote mediators (P2/P4) attempt at T₀ with P₀(L₀).
pub fn swap_wait_time<T: Scalar>(
    protocol: Protocol,
    n: u32,
    params: &LinkParams<T>,
    policy: AttemptsPolicy,
) -> Result<WaitTime<T>> {
    check_nesting(n)?;
    let m = mediator_pair_count(protocol, n);
    let (q, period) = if protocol.remote_mediator() {
        let l0 = params.l0(n);
        (entangling_success_prob(l0, params)?, heralding_period(l0, params.c)?)
    } else {
        (entangling_success_prob(T::zero(), params)?, params.t_s)
    };
    let (attempts, used_scaled) = mean_attempts(m, q, policy)?;
    Ok(WaitTime { seconds: attempts * period, used_scaled })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(l_tot: f64, eta_c: f64) -> LinkParams<f64> {
        LinkParams { l_tot, eta_c, eta_d: 0.9, l_att: 22.0, c: 2e5, t_s: 1e-6 }
    }

    #[test]
    fn transmissivity_values() {
        assert!((transmissivity(0.0f64, 22.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((transmissivity(44.0f64, 22.0).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let mut prev = 1.0;
        for i in 1..10 {
            let v = transmissivity(10.0f64 * i as f64, 22.0).unwrap();
            assert!(v < prev);
            prev = v;
        }
        assert!(transmissivity(-1.0f64, 22.0).is_err());
    }

    #[test]
    fn success_prob_values() {
        let ideal = LinkParams { l_tot: 1.0, eta_c: 1.0, eta_d: 1.0, l_att: 22.0, c: 2e5, t_s: 1e-6 };
        assert!((entangling_success_prob(0.0f64, &ideal).unwrap() - 0.5).abs() < 1e-15);

        let p = LinkParams { l_tot: 1.0, eta_c: 0.5, eta_d: 0.9, l_att: 22.0, c: 2e5, t_s: 1e-6 };
        assert!((entangling_success_prob(0.0f64, &p).unwrap() - 0.10125).abs() < 1e-15);

        let p = params(100.0, 0.3);
        let v = entangling_success_prob(18.75, &p).unwrap();
        let expect = 0.5 * 0.09 * (-18.75f64 / 22.0).exp() * 0.81;
        assert!((v - expect).abs() < 1e-15);
        assert!((v - 0.01554).abs() < 5e-6);
    }

    #[test]
    fn heralding_period_values() {
        assert!(heralding_period(0.0f64, 2e5).unwrap().abs() < 1e-18);
        assert!((heralding_period(10.0f64, 2e5).unwrap() - 5e-5).abs() < 1e-18);
        assert!((heralding_period(200.0f64, 2e5).unwrap() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn attempts_closed_forms() {
        assert!((mean_attempts_exact(1, 0.5f64).unwrap() - 2.0).abs() < 1e-14);
        assert!((mean_attempts_exact(2, 0.5f64).unwrap() - 8.0 / 3.0).abs() < 1e-13);
        for m in [1u64, 2, 5, 16] {
            assert!((mean_attempts_exact(m, 1.0f64).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(mean_attempts_exact(0, 0.5f64).is_err());
        assert!(mean_attempts_exact(3, 0.0f64).is_err());
    }

    #[test]
    fn attempts_bounds_and_monotonicity() {
        for &q in &[0.01f64, 0.1, 0.5, 0.9] {
            let mut prev = 0.0;
            for m in [1u64, 2, 3, 6, 8, 16, 32, 64] {
                let v = mean_attempts_exact(m, q).unwrap();
                assert!(v >= 1.0 / q - 1e-9 * v, "m={m} q={q} v={v}");
                assert!(v <= m as f64 / q + 1e-9 * v);
                assert!(v >= prev);
                prev = v;
            }
        }
        for m in [2u64, 8, 32] {
            let mut prev = f64::INFINITY;
            for &q in &[0.01f64, 0.1, 0.5, 0.99] {
                let v = mean_attempts_exact(m, q).unwrap();
                assert!(v <= prev);
                prev = v;
            }
        }
    }

    #[test]
    fn series_matches_alternating_sum() {
        for &m in &[1u64, 2, 8, 48, 64] {
            for &q in &[1e-3f64, 0.01, 0.1, 0.5, 0.99] {
                let a = mean_attempts_exact(m, q).unwrap();
                let b = mean_attempts_series(m, q).unwrap();
                assert!(
                    ((a - b) / a).abs() < 1e-9,
                    "M={m} q={q}: alternating {a} vs series {b}"
                );
            }
        }
        assert!((mean_attempts_series(192, 1.0f64).unwrap() - 1.0).abs() < 1e-12);
        // beyond the alternating sum's reach the series is the exact branch
        let (v, scaled) = mean_attempts(192, 0.0245f64, AttemptsPolicy::default()).unwrap();
        assert!(!scaled);
        assert!((v - mean_attempts_series(192, 0.0245f64).unwrap()).abs() < 1e-9 * v);
    }

    #[test]
    fn scaled_degenerates_and_bounds() {
        let (v, r) = mean_attempts_scaled(6, 0.3f64, 64).unwrap();
        assert_eq!(r, 0);
        assert!((v - mean_attempts_exact(6, 0.3).unwrap()).abs() < 1e-12);

        // Upper bound in the small-q limit.
        let exact = mean_attempts_exact(2, 0.01f64).unwrap();
        let scaled = 1.5 * mean_attempts_exact(1, 0.01f64).unwrap();
        assert!((exact - 149.74874371859298).abs() < 1e-9);
        assert!(scaled >= exact);

        // Documentation check: at q → 1 the scaled form overshoots the exact
        // value 1, by design of the small-q approximation.
        let (v, r) = mean_attempts_scaled(256, 1.0f64, 64).unwrap();
        assert_eq!(r, 2);
        assert!((v - 2.25).abs() < 1e-12);
        assert!(mean_attempts_scaled(130, 0.5f64, 64).is_err()); // 65 is odd

        let (v, used) = mean_attempts(6, 1e-4f64, AttemptsPolicy::default()).unwrap();
        assert!(!used); // degenerate: 6 <= 64 so no reduction happened
        assert!((v - mean_attempts_exact(6, 1e-4).unwrap()).abs() < 1e-9 * v);
    }

    #[test]
    fn wait_times_match_tables() {
        // P3, n=1, q=0.5 engineered via eta_c=1, eta_d=1, L0=0-ish is awkward;
        // check the composition N(M,q)·T0 directly instead.
        let p = params(100.0, 0.3);
        let policy = AttemptsPolicy::default();
        let n = 1;
        let l0 = p.l0(n);
        let q = entangling_success_prob(l0, &p).unwrap();
        let t0 = heralding_period(l0, p.c).unwrap();
        let t1 = link_wait_time(Protocol::P3, n, &p, policy).unwrap();
        assert!((t1.seconds - mean_attempts_exact(2, q).unwrap() * t0).abs() < 1e-12);

        let t1_p1 = link_wait_time(Protocol::P1, n, &p, policy).unwrap();
        assert!((t1_p1.seconds - mean_attempts_exact(6, q).unwrap() * t0).abs() < 1e-12);
        let t1_p2 = link_wait_time(Protocol::P2, n, &p, policy).unwrap();
        assert!((t1_p2.seconds - mean_attempts_exact(3, q).unwrap() * t0).abs() < 1e-12);

        // P4, n=1: T2 = T0/P0(L0).
        let t2 = swap_wait_time(Protocol::P4, n, &p, policy).unwrap();
        assert!((t2.seconds - t0 / q).abs() < 1e-9 * t2.seconds);

        // P1, n=1: M' = 3, local success prob at L0 = 0.
        let q0 = entangling_success_prob(0.0f64, &p).unwrap();
        let t2_p1 = swap_wait_time(Protocol::P1, n, &p, policy).unwrap();
        assert!((t2_p1.seconds - mean_attempts_exact(3, q0).unwrap() * p.t_s).abs() < 1e-12);

        assert!(link_wait_time(Protocol::P1, 0, &p, policy).is_err());
    }

    #[test]
    fn co_located_success_prob_is_half_at_unit_efficiency() {
        let ideal = LinkParams { l_tot: 10.0, eta_c: 1.0, eta_d: 1.0, l_att: 22.0, c: 2e5, t_s: 1e-6 };
        assert!((entangling_success_prob(0.0f64, &ideal).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn nv_counts() {
        assert_eq!(Protocol::P1.nv_count(1), 12);
        assert_eq!(Protocol::P2.nv_count(1), 9);
        assert_eq!(Protocol::P1.nv_count(2), 24);
        assert_eq!(Protocol::P4.nv_count(3), 9);
        assert_eq!(Protocol::P3.nv_count(2), 8);
    }
}
