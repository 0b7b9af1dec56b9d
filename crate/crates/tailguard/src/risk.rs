//! Distortion risk measures and their L-statistic estimators: quantile
//! weightings, point estimates, asymptotic variances (general double-sum and
//! the CVaR closed form), the VaR bootstrap variance, and UCB assembly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::empirical::{self, SortedSample};
use crate::error::{Error, Result};
use crate::seeding::derive_rng;
use crate::special::norm_ppf;

/// The quantile weighting psi defining a distortion risk measure.
///
/// `Mean` integrates quantiles uniformly, `CVaR(beta)` averages the tail
/// above `beta`, `VaR(beta)` is a point mass at `beta`, and
/// `PiecewiseDensity` is an arbitrary nonnegative step density integrating
/// to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightMeasure {
    Mean,
    CVaR { beta: f64 },
    VaR { beta: f64 },
    PiecewiseDensity { breakpoints: Vec<f64>, densities: Vec<f64> },
}

impl WeightMeasure {
    pub fn cvar(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(WeightMeasure::CVaR { beta })
    }

    pub fn var(beta: f64) -> Result<Self> {
        check_beta(beta)?;
        Ok(WeightMeasure::VaR { beta })
    }

    /// A step density on [0,1]: `densities[k]` on `(breakpoints[k], breakpoints[k+1]]`.
    pub fn piecewise(breakpoints: Vec<f64>, densities: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 || densities.len() + 1 != breakpoints.len() {
            return Err(Error::InvalidParameter(
                "piecewise density needs k+1 breakpoints for k densities".into(),
            ));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidParameter("breakpoints must start at 0 and end at 1".into()));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("breakpoints must be strictly increasing".into()));
        }
        if densities.iter().any(|&d| d < 0.0 || !d.is_finite()) {
            return Err(Error::InvalidParameter("densities must be nonnegative".into()));
        }
        let mass: f64 = densities
            .iter()
            .zip(breakpoints.windows(2))
            .map(|(d, w)| d * (w[1] - w[0]))
            .sum();
        if (mass - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "piecewise density mass is {mass}, must be 1 within 1e-12"
            )));
        }
        Ok(WeightMeasure::PiecewiseDensity { breakpoints, densities })
    }

    /// Whether psi has a density (everything except VaR).
    pub fn has_density(&self) -> bool {
        !matches!(self, WeightMeasure::VaR { .. })
    }

    /// Cumulative weight psi(p) on [0, 1].
    pub fn psi(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        match self {
            WeightMeasure::Mean => p,
            WeightMeasure::CVaR { beta } => (p - beta).max(0.0) / (1.0 - beta),
            WeightMeasure::VaR { beta } => {
                if p >= *beta {
                    1.0
                } else {
                    0.0
                }
            }
            WeightMeasure::PiecewiseDensity { breakpoints, densities } => {
                let mut acc = 0.0;
                for (d, w) in densities.iter().zip(breakpoints.windows(2)) {
                    if p <= w[0] {
                        break;
                    }
                    acc += d * (p.min(w[1]) - w[0]);
                }
                acc
            }
        }
    }

    /// Density psi'(p); right-continuous at breakpoints. Errors for VaR.
    pub fn psi_prime(&self, p: f64) -> Result<f64> {
        let p = p.clamp(0.0, 1.0);
        match self {
            WeightMeasure::Mean => Ok(1.0),
            WeightMeasure::CVaR { beta } => {
                Ok(if p >= *beta { 1.0 / (1.0 - beta) } else { 0.0 })
            }
            WeightMeasure::VaR { .. } => Err(Error::PointMassVariance),
            WeightMeasure::PiecewiseDensity { breakpoints, densities } => {
                // right-continuous: pick the interval whose left edge is <= p
                let k = breakpoints[..breakpoints.len() - 1]
                    .partition_point(|&b| b <= p)
                    .saturating_sub(1);
                Ok(densities[k])
            }
        }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("beta must be in (0,1), got {beta}")));
    }
    Ok(())
}

/// A per-lambda risk estimate. `sd` is the asymptotic standard deviation
/// (not pre-divided by sqrt(n)); the 1/sqrt(n) enters only in the UCB.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskEstimate {
    pub point: f64,
    pub sd: f64,
    pub n: usize,
    pub ucb: f64,
}

/// Order-statistic weights w_i = psi(i/n) - psi((i-1)/n); for VaR a unit
/// mass at index ceil(n*beta).
pub fn lstat_weights(psi: &WeightMeasure, n: usize) -> Vec<f64> {
    assert!(n >= 1);
    match psi {
        WeightMeasure::VaR { beta } => {
            let mut w = vec![0.0; n];
            w[empirical::quantile_index(n, *beta) - 1] = 1.0;
            w
        }
        _ => (1..=n)
            .map(|i| psi.psi(i as f64 / n as f64) - psi.psi((i - 1) as f64 / n as f64))
            .collect(),
    }
}

/// The plug-in L-statistic: sum of w_i * r_(i).
pub fn estimate_risk(s: &SortedSample, psi: &WeightMeasure) -> f64 {
    lstat_weights(psi, s.len())
        .iter()
        .zip(s.values())
        .map(|(w, v)| w * v)
        .sum()
}

/// Asymptotic variance of the L-statistic for measures with a density:
/// the exact step-function double integral
/// sum_{i,j=1}^{n-1} psi'(i/n) psi'(j/n) (min(i,j)/n - ij/n^2) d_i d_j
/// with spacings d_i = r_(i+1) - r_(i).
pub fn variance_general(s: &SortedSample, psi: &WeightMeasure) -> Result<f64> {
    if !psi.has_density() {
        return Err(Error::PointMassVariance);
    }
    let n = s.len();
    if n < 2 {
        return Ok(0.0);
    }
    let nf = n as f64;
    let values = s.values();
    let mut terms: Vec<(f64, f64, f64)> = Vec::new(); // (i/n weight, i, spacing)
    for i in 1..n {
        let gap = values[i] - values[i - 1];
        if gap == 0.0 {
            continue;
        }
        let w = psi.psi_prime(i as f64 / nf)?;
        if w != 0.0 {
            terms.push((w, i as f64, gap));
        }
    }
    let mut acc = 0.0;
    for &(wi, fi, di) in &terms {
        for &(wj, fj, dj) in &terms {
            let cov = fi.min(fj) / nf - fi * fj / (nf * nf);
            acc += wi * wj * cov * di * dj;
        }
    }
    Ok(acc.max(0.0))
}

/// CVaR closed-form variance: winsorize below the empirical beta-quantile,
/// take the plug-in variance, scale by 1/(1-beta)^2.
pub fn variance_cvar(s: &SortedSample, beta: f64) -> Result<f64> {
    check_beta(beta)?;
    let threshold = empirical::empirical_quantile(s, beta)?;
    let winsorized: Vec<f64> = s.values().iter().map(|&v| v.max(threshold)).collect();
    let var = crate::empirical::plug_in_variance(&winsorized)?;
    Ok(var / ((1.0 - beta) * (1.0 - beta)))
}

/// Bootstrap variance of the empirical beta-quantile, scaled by n so it is
/// comparable to the sqrt(n)-normalized asymptotic variances.
pub fn variance_var_bootstrap(s: &SortedSample, beta: f64, b: usize, seed: u64) -> Result<f64> {
    check_beta(beta)?;
    if b < 2 {
        return Err(Error::InvalidParameter(format!("bootstrap needs B >= 2, got {b}")));
    }
    let n = s.len();
    let values = s.values();
    let k = empirical::quantile_index(n, beta) - 1;
    let mut quantiles = Vec::with_capacity(b);
    let mut resample = vec![0.0; n];
    for rep in 0..b {
        let mut rng = derive_rng(seed, &[0x626f_6f74, rep as u64]);
        for slot in resample.iter_mut() {
            *slot = values[rng.random_range(0..n)];
        }
        resample.sort_by(|a, b| a.partial_cmp(b).unwrap());
        quantiles.push(resample[k]);
    }
    Ok(n as f64 * crate::empirical::plug_in_variance(&quantiles)?)
}

/// One-sided normal upper confidence bound: point + z_{1-delta} * sd / sqrt(n).
pub fn ucb(point: f64, sd: f64, n: usize, delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 0.5) {
        return Err(Error::InvalidParameter(format!(
            "delta must be in (0, 0.5] for a one-sided UCB, got {delta}"
        )));
    }
    if sd < 0.0 {
        return Err(Error::InvalidParameter(format!("sd must be nonnegative, got {sd}")));
    }
    assert!(n >= 1);
    let z = if delta == 0.5 { 0.0 } else { norm_ppf(1.0 - delta) };
    Ok(point + z * sd / (n as f64).sqrt())
}
