//! Order-statistic and rank primitives: sorted samples, empirical quantiles
//! and CDF, Spearman correlation, and the plug-in variance.

use crate::error::{Error, Result};

/// A sample sorted ascending with declared score bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SortedSample {
    values: Vec<f64>,
    lo: f64,
    hi: f64,
}

impl SortedSample {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty input
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }
}

/// Sort `values` ascending after checking the declared bounds.
pub fn sort_sample(values: &[f64], lo: f64, hi: f64) -> Result<SortedSample> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    for (index, &value) in values.iter().enumerate() {
        if !(lo..=hi).contains(&value) || value.is_nan() {
            return Err(Error::OutOfBounds { index, value, lo, hi });
        }
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(SortedSample { values: sorted, lo, hi })
}

/// The inf-definition empirical quantile: `values[ceil(n*p)]` (1-indexed).
pub fn empirical_quantile(s: &SortedSample, p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidLevel(p));
    }
    Ok(s.values[quantile_index(s.len(), p) - 1])
}

/// 1-indexed order-statistic index ceil(n*p), guarded against float fuzz
/// when n*p lands a hair above an integer.
pub(crate) fn quantile_index(n: usize, p: f64) -> usize {
    let x = n as f64 * p;
    let mut k = x.ceil() as usize;
    if k as f64 - x >= 1.0 - 1e-9 {
        k -= 1;
    }
    k.clamp(1, n)
}

/// Right-continuous empirical CDF: fraction of values <= x.
pub fn empirical_cdf(s: &SortedSample, x: f64) -> f64 {
    let count = s.values.partition_point(|&v| v <= x);
    count as f64 / s.len() as f64
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { left: a.len(), right: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::InvalidParameter("spearman needs at least 2 points".into()));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for i in 0..ra.len() {
        let da = ra[i] - mean;
        let db = rb[i] - mean;
        cov += da * db;
        var_a += da * da;
        var_b += db * db;
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::InvalidParameter("constant input has no rank correlation".into()));
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].partial_cmp(&values[j]).unwrap());
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share the average
        let avg = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Plug-in variance: mean of squares minus square of mean (divisor n).
pub fn plug_in_variance(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    Ok(ss / n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sample(values: &[f64]) -> SortedSample {
        sort_sample(values, 0.0, 1.0).unwrap()
    }

    #[test]
    fn sort_sample_orders_and_checks_bounds() {
        assert_eq!(sample(&[0.3, 0.1, 0.2]).values(), &[0.1, 0.2, 0.3]);
        assert_eq!(sample(&[0.5]).values(), &[0.5]);
        match sort_sample(&[0.1, 1.2], 0.0, 1.0) {
            Err(Error::OutOfBounds { index: 1, .. }) => {}
            other => panic!("expected out-of-bounds at index 1, got {other:?}"),
        }
        assert!(matches!(sort_sample(&[], 0.0, 1.0), Err(Error::EmptySample)));
    }

    #[test]
    fn quantile_inf_definition() {
        let s = sample(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(empirical_quantile(&s, 0.5).unwrap(), 0.2);
        assert_eq!(empirical_quantile(&s, 1.0).unwrap(), 0.4);
        assert_eq!(empirical_quantile(&s, 0.51).unwrap(), 0.3);
        assert!(empirical_quantile(&s, 0.0).is_err());
        assert!(empirical_quantile(&s, 1.5).is_err());
    }

    #[test]
    fn quantile_index_float_fuzz() {
        // 10 * 0.3 is 3.0000000000000004 in f64; must map to index 3, not 4
        assert_eq!(quantile_index(10, 0.3), 3);
        assert_eq!(quantile_index(3, 1.0 / 3.0), 1);
    }

    #[test]
    fn cdf_is_right_continuous_count() {
        let s = sample(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(empirical_cdf(&s, 0.2), 0.5);
        assert_eq!(empirical_cdf(&s, 0.05), 0.0);
        assert_eq!(empirical_cdf(&s, 0.25), 0.5);
        assert_eq!(empirical_cdf(&s, 1.0), 1.0);
    }

    #[test]
    fn spearman_examples() {
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        // rank-difference formula 1 - 6*6/(3*8) = -0.5
        assert_abs_diff_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]).unwrap(), -0.5);
        assert!(spearman(&[1.0], &[1.0]).is_err());
        assert!(spearman(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn spearman_handles_ties_with_average_ranks() {
        let rho = spearman(&[1.0, 1.0, 2.0, 3.0], &[1.0, 1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(rho, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn plug_in_variance_examples() {
        assert_abs_diff_eq!(plug_in_variance(&[0.7, 0.7, 0.7]).unwrap(), 0.0);
        assert_abs_diff_eq!(plug_in_variance(&[0.0, 1.0]).unwrap(), 0.25);
        assert_abs_diff_eq!(plug_in_variance(&[0.0, 0.0, 1.0, 1.0]).unwrap(), 0.25);
        assert!(plug_in_variance(&[]).is_err());
    }

    proptest! {
        #[test]
        fn quantile_nondecreasing_in_p(
            values in proptest::collection::vec(0.0..1.0f64, 1..50),
            p1 in 0.001..1.0f64,
            p2 in 0.001..1.0f64,
        ) {
            let s = sort_sample(&values, 0.0, 1.0).unwrap();
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            prop_assert!(empirical_quantile(&s, lo).unwrap() <= empirical_quantile(&s, hi).unwrap());
        }

        #[test]
        fn cdf_of_quantile_covers_p(
            values in proptest::collection::vec(0.0..1.0f64, 1..50),
            p in 0.001..1.0f64,
        ) {
            let s = sort_sample(&values, 0.0, 1.0).unwrap();
            let q = empirical_quantile(&s, p).unwrap();
            prop_assert!(empirical_cdf(&s, q) >= p - 1e-12);
        }

        #[test]
        fn spearman_invariant_under_monotone_transform(
            pairs in proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 3..30),
        ) {
            let a: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let a_t: Vec<f64> = a.iter().map(|x| x.exp() + 3.0 * x).collect();
            match (spearman(&a, &b), spearman(&a_t, &b)) {
                (Ok(r1), Ok(r2)) => prop_assert!((r1 - r2).abs() < 1e-10),
                (Err(_), Err(_)) => {}
                other => prop_assert!(false, "inconsistent: {other:?}"),
            }
        }

        #[test]
        fn variance_shift_and_scale(
            values in proptest::collection::vec(0.0..1.0f64, 1..40),
            shift in -5.0..5.0f64,
            scale in 0.1..10.0f64,
        ) {
            let v0 = plug_in_variance(&values).unwrap();
            let shifted: Vec<f64> = values.iter().map(|x| x + shift).collect();
            let scaled: Vec<f64> = values.iter().map(|x| x * scale).collect();
            prop_assert!((plug_in_variance(&shifted).unwrap() - v0).abs() < 1e-10);
            prop_assert!((plug_in_variance(&scaled).unwrap() - scale * scale * v0).abs() < 1e-8);
        }
    }
}
