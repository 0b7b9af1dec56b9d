//! Semi-synthetic benchmark: (machine, human) score pairs with a target
//! Spearman correlation, generated by a Gaussian copula with Beta marginals.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelopes::{beta_cdf, beta_inverse};
use crate::error::{Error, Result};
use crate::induce::{ScoreRecord, ScoreTable};
use crate::seeding::derive_rng;
use crate::special::{norm_cdf, norm_ppf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_prompts: usize,
    pub set_size: usize,
    pub target_spearman: f64,
    /// Beta(a, b) marginal of the human score.
    pub human_marginal: (f64, f64),
    /// Beta(a, b) marginal of the machine score.
    pub machine_marginal: (f64, f64),
    pub seed: u64,
}

impl SynthConfig {
    /// Long-right-tail defaults: Beta(0.4, 3) marginals, 40 candidates per
    /// prompt.
    pub fn new(n_prompts: usize, target_spearman: f64, seed: u64) -> Self {
        SynthConfig {
            n_prompts,
            set_size: 40,
            target_spearman,
            human_marginal: (0.4, 3.0),
            machine_marginal: (0.4, 3.0),
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_prompts == 0 || self.set_size == 0 {
            return Err(Error::InvalidParameter("n_prompts and set_size must be >= 1".into()));
        }
        if self.target_spearman.abs() > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "target Spearman {} outside [-1, 1]",
                self.target_spearman
            )));
        }
        for &(a, b) in [&self.human_marginal, &self.machine_marginal] {
            if !(a > 0.0 && b > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "Beta marginal parameters must be positive, got ({a}, {b})"
                )));
            }
        }
        Ok(())
    }
}

/// The bivariate-normal correlation whose Gaussian copula yields the
/// requested Spearman correlation: r = 2 sin(pi * rho_s / 6).
pub fn copula_param(target_spearman: f64) -> f64 {
    2.0 * (std::f64::consts::PI * target_spearman / 6.0).sin()
}

/// Monotone interpolation table for a Beta quantile function, with a
/// Newton polish against the exact CDF on every lookup.
struct BetaQuantile {
    a: f64,
    b: f64,
    xs: Vec<f64>, // quantiles at p = k / (len - 1)
}

impl BetaQuantile {
    fn build(a: f64, b: f64) -> Result<Self> {
        const CELLS: usize = 1024;
        let mut xs = Vec::with_capacity(CELLS + 1);
        for k in 0..=CELLS {
            xs.push(beta_inverse(k as f64 / CELLS as f64, a, b)?);
        }
        Ok(BetaQuantile { a, b, xs })
    }

    fn inverse(&self, p: f64) -> Result<f64> {
        let cells = (self.xs.len() - 1) as f64;
        let t = p.clamp(0.0, 1.0) * cells;
        let k = (t.floor() as usize).min(self.xs.len() - 2);
        let guess = self.xs[k] + (t - k as f64) * (self.xs[k + 1] - self.xs[k]);
        crate::envelopes::beta_inverse_with_guess(p, self.a, self.b, guess)
    }
}

/// Generate the full score table: for each (prompt, candidate) a correlated
/// standard normal pair mapped through the normal CDF and the Beta inverse
/// CDFs. Deterministic per seed; prompts are generated independently so
/// parallel scheduling cannot change the output.
pub fn generate_scores(config: &SynthConfig) -> Result<ScoreTable> {
    config.validate()?;
    let r = copula_param(config.target_spearman);
    let ortho = (1.0 - r * r).max(0.0).sqrt();
    let human_q = BetaQuantile::build(config.human_marginal.0, config.human_marginal.1)?;
    let machine_q = BetaQuantile::build(config.machine_marginal.0, config.machine_marginal.1)?;

    let rows: Result<Vec<Vec<ScoreRecord>>> = (0..config.n_prompts)
        .into_par_iter()
        .map(|i| {
            let mut records = Vec::with_capacity(config.set_size);
            for j in 0..config.set_size {
                let mut rng = derive_rng(config.seed, &[0x636f_7075, i as u64, j as u64]);
                let z_h = norm_ppf(open_unit(rng.random()));
                let z_extra = norm_ppf(open_unit(rng.random()));
                let z_m = r * z_h + ortho * z_extra;
                let human = human_q.inverse(norm_cdf(z_h))?;
                let machine = machine_q.inverse(norm_cdf(z_m))?;
                records.push(ScoreRecord {
                    prompt_id: format!("p{i:06}"),
                    response_id: format!("r{j:03}"),
                    machine_score: machine.clamp(0.0, 1.0),
                    human_score: human.clamp(0.0, 1.0),
                });
            }
            Ok(records)
        })
        .collect();
    ScoreTable::new(rows?.into_iter().flatten().collect())
}

fn open_unit(u: f64) -> f64 {
    u.clamp(1e-15, 1.0 - 1e-15)
}

/// Empirical Spearman correlation between machine and human scores of a
/// table (the realized misalignment, recorded in sidecar manifests).
pub fn realized_spearman(table: &ScoreTable) -> Result<f64> {
    let machine: Vec<f64> = table.records().iter().map(|r| r.machine_score).collect();
    let human: Vec<f64> = table.records().iter().map(|r| r.human_score).collect();
    crate::empirical::spearman(&machine, &human)
}

/// Beta marginal mean a / (a + b), used by sanity checks.
pub fn beta_mean(a: f64, b: f64) -> f64 {
    a / (a + b)
}

/// Exact Beta CDF re-export for oracle checks against generated marginals.
pub fn marginal_cdf(x: f64, marginal: (f64, f64)) -> Result<f64> {
    beta_cdf(x, marginal.0, marginal.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn copula_param_examples() {
        assert_eq!(copula_param(0.0), 0.0);
        assert_abs_diff_eq!(copula_param(1.0), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(copula_param(0.57), 0.5880806504646079, epsilon = 1e-10);
        assert_abs_diff_eq!(copula_param(-1.0), -1.0, epsilon = 1e-12);
    }

    #[test]
    fn perfect_alignment_is_comonotone() {
        let config = SynthConfig::new(20, 1.0, 5);
        let table = generate_scores(&config).unwrap();
        assert_abs_diff_eq!(realized_spearman(&table).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn target_spearman_is_realized() {
        let config = SynthConfig { set_size: 1, ..SynthConfig::new(10_000, 0.57, 9) };
        let table = generate_scores(&config).unwrap();
        let rho = realized_spearman(&table).unwrap();
        assert!((rho - 0.57).abs() < 0.03, "rho = {rho}");
    }

    #[test]
    fn generation_is_deterministic() {
        let config = SynthConfig::new(30, 0.68, 123);
        assert_eq!(generate_scores(&config).unwrap(), generate_scores(&config).unwrap());
        let other = SynthConfig { seed: 124, ..config };
        assert_ne!(generate_scores(&config).unwrap(), generate_scores(&other).unwrap());
    }

    #[test]
    fn marginal_means_match_beta() {
        let config = SynthConfig { set_size: 1, ..SynthConfig::new(10_000, 0.5, 17) };
        let table = generate_scores(&config).unwrap();
        let n = table.records().len() as f64;
        let mean_h: f64 = table.records().iter().map(|r| r.human_score).sum::<f64>() / n;
        let mean_m: f64 = table.records().iter().map(|r| r.machine_score).sum::<f64>() / n;
        let want = beta_mean(0.4, 3.0);
        assert!((mean_h - want).abs() < 0.01, "human mean {mean_h} vs {want}");
        assert!((mean_m - want).abs() < 0.01, "machine mean {mean_m} vs {want}");
    }

    #[test]
    fn spearman_invariant_to_marginals() {
        let base = SynthConfig { set_size: 1, ..SynthConfig::new(6_000, 0.6, 31) };
        let mut rhos = Vec::new();
        for marginal in [(0.4, 3.0), (2.0, 2.0), (5.0, 1.5)] {
            let config = SynthConfig {
                human_marginal: marginal,
                machine_marginal: marginal,
                ..base.clone()
            };
            rhos.push(realized_spearman(&generate_scores(&config).unwrap()).unwrap());
        }
        for rho in rhos {
            assert!((rho - 0.6).abs() < 0.03, "rho = {rho}");
        }
    }
}
