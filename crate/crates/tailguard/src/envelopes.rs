//! Finite-sample quantile confidence envelopes (DKW and Berk-Jones) and the
//! envelope-based distortion-risk UCB.
//!
//! The Berk-Jones construction needs the regularized incomplete beta
//! function, its inverse, and the exact probability that uniform order
//! statistics stay above a monotone boundary. The boundary probability is
//! computed by a multinomial-count dynamic program whose terms are all
//! nonnegative, so it is stable in plain f64 at any sample size reached
//! here (the textbook alternating-sign recursion cancels catastrophically
//! for n beyond a few hundred).

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use crate::empirical::SortedSample;
use crate::error::{Error, Result};
use crate::risk::WeightMeasure;
use crate::special::ln_gamma;

/// Regularized incomplete beta function I_x(a, b) by continued fraction
/// (Lentz's method), absolute accuracy well below 1e-12.
pub fn beta_cdf(x: f64, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "beta parameters must be positive, got ({a}, {b})"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::InvalidParameter(format!("beta_cdf argument {x} outside [0,1]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    // symmetry switch keeps the continued fraction in its fast region
    let result = if x < (a + 1.0) / (a + b + 2.0) {
        (ln_front.exp() / a) * beta_cf(x, a, b)
    } else {
        1.0 - (ln_front.exp() / b) * beta_cf(1.0 - x, b, a)
    };
    Ok(result.clamp(0.0, 1.0))
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const EPS: f64 = 1e-15;
    const TINY: f64 = 1e-300;
    const MAX_ITER: usize = 1000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Inverse of [`beta_cdf`] in x: the x with |I_x(a,b) - p| <= 1e-12,
/// by bracketed bisection with Newton acceleration.
pub fn beta_inverse(p: f64, a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidLevel(p));
    }
    beta_inverse_with_guess(p, a, b, 0.5)
}

/// Same as [`beta_inverse`] but starting from a caller-supplied guess;
/// hot paths that invert many nearby levels pass the previous solution.
pub(crate) fn beta_inverse_with_guess(p: f64, a: f64, b: f64, guess: f64) -> Result<f64> {
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let ln_b = ln_beta(a, b);
    let mut lo = 0.0_f64;
    let mut hi = 1.0_f64;
    let mut x = guess.clamp(1e-300, 1.0 - 1e-16);
    for _ in 0..200 {
        let f = beta_cdf(x, a, b)? - p;
        if f.abs() <= 1e-13 {
            return Ok(x);
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        if hi - lo < 1e-16 {
            return Ok(x);
        }
        // Newton step with the analytic density, bisection fallback
        let ln_pdf = (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - ln_b;
        let step = if ln_pdf > -700.0 { f / ln_pdf.exp() } else { f64::INFINITY };
        let candidate = x - step;
        x = if candidate.is_finite() && candidate > lo && candidate < hi {
            candidate
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(x)
}

/// P(U_(i) >= a_i for all i) for n i.i.d. uniforms on [0,1] and a
/// nondecreasing boundary a.
///
/// Writes the event as {#(U < a_i) <= i-1 for all i} and propagates the
/// joint count distribution level by level; each transition multiplies by
/// a binomial pmf, so every term is nonnegative and no cancellation occurs.
pub fn uniform_order_noncrossing(boundary: &[f64]) -> Result<f64> {
    let n = boundary.len();
    if n == 0 {
        return Ok(1.0);
    }
    for (i, w) in boundary.windows(2).enumerate() {
        if w[0] > w[1] {
            return Err(Error::NonMonotoneBoundary(i + 1));
        }
    }
    for (i, &v) in boundary.iter().enumerate() {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!(
                "boundary value {v} at index {i} outside [0,1]"
            )));
        }
    }

    // weights[k] = P(#(U < a_i) = k and the constraint held at every level <= i)
    let mut weights = vec![1.0_f64];
    let mut prev_level = 0.0_f64;
    for (i, &level) in boundary.iter().enumerate() {
        let remaining = 1.0 - prev_level;
        if remaining <= 0.0 {
            return Ok(0.0);
        }
        let p = ((level - prev_level) / remaining).clamp(0.0, 1.0);
        let max_count = i; // constraint: count <= i at this level (i is 0-based here)
        let mut next = vec![0.0_f64; max_count + 1];
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            let trials = n - k;
            let pmf = binom_pmf_prefix(trials, p, max_count - k);
            for (j, &q) in pmf.iter().enumerate() {
                next[k + j] += w * q;
            }
        }
        weights = next;
        if weights.iter().all(|&w| w == 0.0) {
            return Ok(0.0);
        }
        prev_level = level;
    }
    Ok(weights.iter().sum::<f64>().clamp(0.0, 1.0))
}

/// Binomial pmf values P(X = 0..=kmax) for X ~ Binom(trials, p), computed
/// from the mode outward so nothing underflows along the way.
fn binom_pmf_prefix(trials: usize, p: f64, kmax: usize) -> Vec<f64> {
    let kmax = kmax.min(trials);
    if trials == 0 {
        return vec![1.0];
    }
    if p <= 0.0 {
        let mut out = vec![0.0; kmax + 1];
        out[0] = 1.0;
        return out;
    }
    if p >= 1.0 {
        let mut out = vec![0.0; kmax + 1];
        if trials <= kmax {
            out[trials] = 1.0;
        }
        return out;
    }
    let m = trials as f64;
    let mode = (((m + 1.0) * p).floor() as usize).min(kmax);
    let ln_pmf = |k: usize| {
        let kf = k as f64;
        ln_gamma(m + 1.0) - ln_gamma(kf + 1.0) - ln_gamma(m - kf + 1.0)
            + kf * p.ln()
            + (m - kf) * (1.0 - p).ln()
    };
    let mut out = vec![0.0; kmax + 1];
    out[mode] = ln_pmf(mode).exp();
    let ratio = p / (1.0 - p);
    for k in (0..mode).rev() {
        // pmf(k) = pmf(k+1) * (k+1) / ((m-k) * ratio)
        out[k] = out[k + 1] * (k as f64 + 1.0) / ((m - k as f64) * ratio);
    }
    for k in mode..kmax {
        out[k + 1] = out[k] * (m - k as f64) / (k as f64 + 1.0) * ratio;
    }
    out
}

/// Largest s in [0,1] such that the uniform order statistics clear the
/// boundary b_i = G^{-1}_{i,n-i+1}(s) with probability >= 1 - delta.
/// Results are cached per (n, delta): this is the expensive step of the
/// Berk-Jones method.
pub fn bj_threshold(n: usize, delta: f64) -> Result<f64> {
    assert!(n >= 1);
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must be in (0,1), got {delta}")));
    }
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (n, delta.to_bits());
    if let Some(&hit) = cache.lock().unwrap().get(&key) {
        return Ok(hit);
    }

    let mut lo = 0.0_f64; // P >= 1 - delta here
    let mut hi = 1.0_f64; // P = 0 here
    let mut boundary = vec![0.5_f64; n];
    while hi - lo > 1e-8 {
        let s = 0.5 * (lo + hi);
        for i in 1..=n {
            boundary[i - 1] =
                beta_inverse_with_guess(s, i as f64, (n - i + 1) as f64, boundary[i - 1])?;
        }
        // guard tiny non-monotonicity from the inversion tolerance
        for i in 1..n {
            if boundary[i] < boundary[i - 1] {
                boundary[i] = boundary[i - 1];
            }
        }
        if uniform_order_noncrossing(&boundary)? >= 1.0 - delta {
            lo = s;
        } else {
            hi = s;
        }
    }
    cache.lock().unwrap().insert(key, lo);
    Ok(lo)
}

/// A step-function upper confidence envelope over quantile levels:
/// value `upper_values[k-1]` on `(levels[k-1], levels[k]]` and
/// `tail_value` beyond the last level.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    levels: Vec<f64>, // levels[0] == 0
    upper_values: Vec<f64>,
    tail_value: f64,
}

impl Envelope {
    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn upper_values(&self) -> &[f64] {
        &self.upper_values
    }

    pub fn tail_value(&self) -> f64 {
        self.tail_value
    }

    /// Envelope value at quantile level p in (0, 1].
    pub fn value_at(&self, p: f64) -> f64 {
        // first k >= 1 with p <= levels[k]
        let k = self.levels[1..].partition_point(|&s| s < p);
        if k < self.upper_values.len() {
            self.upper_values[k]
        } else {
            self.tail_value
        }
    }
}

/// Berk-Jones envelope: levels s_i = G^{-1}_{i,n-i+1}(s_delta) with the
/// order statistics as values and the score upper bound as tail.
pub fn bj_envelope(s: &SortedSample, delta: f64) -> Result<Envelope> {
    let n = s.len();
    let s_delta = bj_threshold(n, delta)?;
    let levels = bj_levels(n, s_delta)?;
    Ok(envelope_from_levels(levels, s.values().to_vec(), s.hi()))
}

/// The Berk-Jones envelope levels for a given threshold; they depend only
/// on (n, s_delta), so calibration computes them once per grid.
pub fn bj_levels(n: usize, s_delta: f64) -> Result<Vec<f64>> {
    let mut levels = Vec::with_capacity(n);
    let mut guess = 0.5;
    for i in 1..=n {
        guess = beta_inverse_with_guess(s_delta, i as f64, (n - i + 1) as f64, guess)?;
        levels.push(guess);
    }
    for i in 1..n {
        if levels[i] < levels[i - 1] {
            levels[i] = levels[i - 1];
        }
    }
    Ok(levels)
}

/// Build the envelope for precomputed per-order-statistic levels.
pub fn envelope_from_order_levels(s: &SortedSample, levels: Vec<f64>) -> Envelope {
    envelope_from_levels(levels, s.values().to_vec(), s.hi())
}

/// DKW envelope: q+_p = r_(ceil(n(p+eps))) with eps = sqrt(log(2/delta)/2n),
/// expressed with breakpoints at p = i/n - eps.
pub fn dkw_envelope(s: &SortedSample, delta: f64) -> Result<Envelope> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("delta must be in (0,1), got {delta}")));
    }
    let n = s.len();
    let eps = dkw_epsilon(n, delta);
    let levels: Vec<f64> = (1..=n).map(|i| i as f64 / n as f64 - eps).collect();
    Ok(envelope_from_levels(levels, s.values().to_vec(), s.hi()))
}

/// The DKW band half-width sqrt(log(2/delta) / 2n).
pub fn dkw_epsilon(n: usize, delta: f64) -> f64 {
    ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

fn envelope_from_levels(raw_levels: Vec<f64>, order_values: Vec<f64>, hi: f64) -> Envelope {
    debug_assert_eq!(raw_levels.len(), order_values.len());
    let mut levels = vec![0.0];
    let mut upper_values = Vec::new();
    for (level, value) in raw_levels.into_iter().zip(order_values) {
        if level <= 0.0 {
            continue; // boundary below 0 constrains nothing
        }
        let level = level.min(1.0);
        levels.push(level);
        upper_values.push(value);
    }
    Envelope { levels, upper_values, tail_value: hi }
}

/// Exact integral of the step envelope against psi: the (1-delta) UCB for
/// the distortion risk. VaR reads the envelope at p = beta.
pub fn envelope_risk_ucb(env: &Envelope, psi: &WeightMeasure) -> f64 {
    if let WeightMeasure::VaR { beta } = psi {
        return env.value_at(*beta);
    }
    let mut acc = 0.0;
    for (k, &value) in env.upper_values.iter().enumerate() {
        let mass = psi.psi(env.levels[k + 1]) - psi.psi(env.levels[k]);
        acc += value * mass;
    }
    let last = *env.levels.last().unwrap();
    acc + env.tail_value * (psi.psi(1.0) - psi.psi(last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::empirical::{empirical_quantile, sort_sample};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn beta_cdf_uniform_and_closed_form() {
        for x in [0.0, 0.2, 0.5, 0.9, 1.0] {
            assert_abs_diff_eq!(beta_cdf(x, 1.0, 1.0).unwrap(), x, epsilon = 1e-13);
        }
        // I_x(1,2) = 2x - x^2
        assert_abs_diff_eq!(beta_cdf(0.5, 1.0, 2.0).unwrap(), 0.75, epsilon = 1e-13);
        assert!(beta_cdf(1.5, 1.0, 1.0).is_err());
        assert!(beta_cdf(0.5, -1.0, 1.0).is_err());
    }

    #[test]
    fn beta_symmetry_identity() {
        let mut rng = crate::seeding::derive_rng(11, &[0]);
        for _ in 0..200 {
            let x: f64 = rng.random();
            let a: f64 = rng.random::<f64>() * 10.0 + 0.1;
            let b: f64 = rng.random::<f64>() * 10.0 + 0.1;
            let lhs = beta_cdf(x, a, b).unwrap();
            let rhs = 1.0 - beta_cdf(1.0 - x, b, a).unwrap();
            assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        }
    }

    #[test]
    fn beta_inverse_examples_and_roundtrip() {
        assert_eq!(beta_inverse(0.0, 2.0, 3.0).unwrap(), 0.0);
        assert_eq!(beta_inverse(1.0, 2.0, 3.0).unwrap(), 1.0);
        // inverse of 2x - x^2 at 0.75
        assert_abs_diff_eq!(beta_inverse(0.75, 1.0, 2.0).unwrap(), 0.5, epsilon = 1e-10);

        let mut rng = crate::seeding::derive_rng(12, &[0]);
        for _ in 0..200 {
            let p: f64 = rng.random();
            let a: f64 = rng.random::<f64>() * 20.0 + 0.2;
            let b: f64 = rng.random::<f64>() * 20.0 + 0.2;
            let x = beta_inverse(p, a, b).unwrap();
            assert_abs_diff_eq!(beta_cdf(x, a, b).unwrap(), p, epsilon = 1e-9);
        }
    }

    #[test]
    fn noncrossing_analytic_cases() {
        assert_abs_diff_eq!(uniform_order_noncrossing(&[0.0, 0.0, 0.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(uniform_order_noncrossing(&[0.3]).unwrap(), 0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(
            uniform_order_noncrossing(&[0.1, 0.5]).unwrap(),
            0.65,
            epsilon = 1e-14
        );
        assert!(uniform_order_noncrossing(&[0.5, 0.1]).is_err());
        // boundary at 1 can never be cleared
        assert_eq!(uniform_order_noncrossing(&[0.5, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn noncrossing_identical_boundary_matches_min_statistic() {
        // P(U_(1) >= a for all of n) with constant boundary a equals
        // P(all U >= a) + corrections; for a single constant level it is
        // P(U_(1) >= a) = (1-a)^n
        let p = uniform_order_noncrossing(&[0.2, 0.2, 0.2, 0.2]).unwrap();
        assert_abs_diff_eq!(p, 0.8_f64.powi(4), epsilon = 1e-13);
    }

    #[test]
    fn bj_threshold_identity_at_n1_and_monotone() {
        assert_abs_diff_eq!(bj_threshold(1, 0.05).unwrap(), 0.05, epsilon = 1e-7);
        assert_abs_diff_eq!(bj_threshold(1, 0.2).unwrap(), 0.2, epsilon = 1e-7);
        let a = bj_threshold(10, 0.01).unwrap();
        let b = bj_threshold(10, 0.05).unwrap();
        let c = bj_threshold(10, 0.2).unwrap();
        assert!(a <= b && b <= c);
    }

    #[test]
    fn bj_threshold_n2_matches_monte_carlo() {
        // delta-quantile of min(G_{1,2}(U_(1)), G_{2,1}(U_(2))) with
        // G_{1,2}(x) = 2x - x^2 and G_{2,1}(x) = x^2
        let delta = 0.05;
        let reps = 1_000_000;
        let mut rng = crate::seeding::derive_rng(99, &[2]);
        let mut stats = Vec::with_capacity(reps);
        for _ in 0..reps {
            let u1: f64 = rng.random();
            let u2: f64 = rng.random();
            let (lo, hi) = if u1 <= u2 { (u1, u2) } else { (u2, u1) };
            let g1 = 2.0 * lo - lo * lo;
            let g2 = hi * hi;
            stats.push(g1.min(g2));
        }
        stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mc = stats[(reps as f64 * delta).ceil() as usize - 1];
        let ours = bj_threshold(2, delta).unwrap();
        assert!((ours - mc).abs() < 0.005, "ours={ours} mc={mc}");
    }

    #[test]
    fn bj_envelope_n1() {
        let s = sort_sample(&[0.4], 0.0, 1.0).unwrap();
        let env = bj_envelope(&s, 0.05).unwrap();
        assert_eq!(env.levels().len(), 2);
        assert_abs_diff_eq!(env.levels()[1], 0.05, epsilon = 1e-6);
        assert_eq!(env.upper_values(), &[0.4]);
        assert_eq!(env.tail_value(), 1.0);
        assert_eq!(env.value_at(0.03), 0.4);
        assert_eq!(env.value_at(0.5), 1.0);
    }

    #[test]
    fn dkw_epsilon_values() {
        // sqrt(ln(40)/400)
        assert_abs_diff_eq!(dkw_epsilon(200, 0.05), 0.09603227913199208, epsilon = 1e-10);
        assert!(dkw_epsilon(100, 0.05) > dkw_epsilon(200, 0.05));
        assert!(dkw_epsilon(201, 0.05) < dkw_epsilon(200, 0.05));
    }

    #[test]
    fn dkw_envelope_small_n() {
        let s = sort_sample(&[0.1, 0.2, 0.3, 0.4], 0.0, 1.0).unwrap();
        let env = dkw_envelope(&s, 0.05).unwrap();
        let eps = dkw_epsilon(4, 0.05);
        assert_abs_diff_eq!(eps, 0.679051, epsilon = 1e-6);
        // at p = 0.1: ceil(4 * 0.779051) = 4 -> r_(4)
        assert_eq!(env.value_at(0.1), 0.4);
        // beyond 1 - eps the envelope is the score bound
        assert_eq!(env.value_at(0.9), 1.0);
        // only i/n - eps > 0 breakpoints survive: i in {3, 4}
        assert_eq!(env.upper_values(), &[0.3, 0.4]);
    }

    #[test]
    fn envelope_risk_ucb_examples() {
        let constant = Envelope {
            levels: vec![0.0, 0.6],
            upper_values: vec![0.7],
            tail_value: 0.7,
        };
        for psi in [WeightMeasure::Mean, WeightMeasure::cvar(0.5).unwrap()] {
            assert_abs_diff_eq!(envelope_risk_ucb(&constant, &psi), 0.7, epsilon = 1e-12);
        }

        let env = Envelope {
            levels: vec![0.0, 0.6],
            upper_values: vec![0.2],
            tail_value: 1.0,
        };
        assert_eq!(envelope_risk_ucb(&env, &WeightMeasure::var(0.5).unwrap()), 0.2);

        let env = Envelope {
            levels: vec![0.0, 0.75],
            upper_values: vec![0.2],
            tail_value: 1.0,
        };
        assert_abs_diff_eq!(
            envelope_risk_ucb(&env, &WeightMeasure::cvar(0.5).unwrap()),
            0.6,
            epsilon = 1e-12
        );
    }

    #[test]
    fn envelope_values_nondecreasing_in_p() {
        let s = sort_sample(&[0.05, 0.3, 0.3, 0.8, 0.9], 0.0, 1.0).unwrap();
        for env in [bj_envelope(&s, 0.1).unwrap(), dkw_envelope(&s, 0.1).unwrap()] {
            let mut prev = 0.0;
            for k in 1..=1000 {
                let v = env.value_at(k as f64 / 1000.0);
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn envelope_dominates_empirical_quantile(
            values in proptest::collection::vec(0.0..1.0f64, 1..30),
            delta in 0.01..0.3f64,
        ) {
            let s = sort_sample(&values, 0.0, 1.0).unwrap();
            for env in [bj_envelope(&s, delta).unwrap(), dkw_envelope(&s, delta).unwrap()] {
                for k in 1..=200 {
                    let p = k as f64 / 200.0;
                    prop_assert!(
                        env.value_at(p) >= empirical_quantile(&s, p).unwrap() - 1e-12
                    );
                }
            }
        }

        #[test]
        fn envelope_ucb_dominates_plugin_risk(
            values in proptest::collection::vec(0.0..1.0f64, 1..30),
            beta in 0.05..0.95f64,
        ) {
            let s = sort_sample(&values, 0.0, 1.0).unwrap();
            for psi in [
                WeightMeasure::Mean,
                WeightMeasure::cvar(beta).unwrap(),
                WeightMeasure::var(beta).unwrap(),
            ] {
                let point = crate::risk::estimate_risk(&s, &psi);
                for env in [bj_envelope(&s, 0.05).unwrap(), dkw_envelope(&s, 0.05).unwrap()] {
                    prop_assert!(envelope_risk_ucb(&env, &psi) >= point - 1e-12);
                }
            }
        }
    }
}
