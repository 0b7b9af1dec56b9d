//! Per-lambda UCB curves under the three methods and the monotone scan
//! that selects the threshold lambda-hat.

use serde::{Deserialize, Serialize};

use crate::empirical::sort_sample;
use crate::envelopes::{self, bj_levels, bj_threshold, dkw_envelope, envelope_from_order_levels};
use crate::error::{Error, Result};
use crate::induce::{InducedMatrix, LambdaGrid};
use crate::risk::{self, WeightMeasure};

/// Which UCB construction to invert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    LStat,
    Dkw,
    Bj,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Method::LStat => write!(f, "lstat"),
            Method::Dkw => write!(f, "dkw"),
            Method::Bj => write!(f, "bj"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub psi: WeightMeasure,
    pub alpha: f64,
    pub delta: f64,
    pub method: Method,
    pub grid: LambdaGrid,
    #[serde(default = "default_bootstrap_b")]
    pub bootstrap_b: usize,
    pub seed: u64,
}

fn default_bootstrap_b() -> usize {
    1000
}

impl CalibrationConfig {
    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must be in (0,1), got {}",
                self.alpha
            )));
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(Error::InvalidParameter(format!(
                "delta must be in (0, 0.5], got {}",
                self.delta
            )));
        }
        Ok(())
    }
}

/// One point of the UCB curve; `sigma_hat` is present only for the
/// L-statistic method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub r_hat: f64,
    pub sigma_hat: Option<f64>,
    pub ucb: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub lambda_hat: f64,
    pub curve: Vec<CurvePoint>,
    pub config: CalibrationConfig,
    pub n: usize,
}

impl CalibrationResult {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Compute the per-lambda (R-hat, sigma-hat, UCB) records for every grid
/// point of the induced matrix.
pub fn ucb_curve(matrix: &InducedMatrix, config: &CalibrationConfig) -> Result<Vec<CurvePoint>> {
    config.validate()?;
    let n = matrix.n_prompts();
    if n == 0 {
        return Err(Error::EmptySample);
    }

    // Berk-Jones levels depend only on (n, delta); compute once per curve.
    let bj_level_cache = if config.method == Method::Bj {
        let s_delta = bj_threshold(n, config.delta)?;
        Some(bj_levels(n, s_delta)?)
    } else {
        None
    };

    let mut curve = Vec::with_capacity(config.grid.len());
    for (j, &lambda) in config.grid.values().iter().enumerate() {
        if j == 0 {
            // the first grid point admits nothing: the induced column is
            // identically zero and its risk is zero with certainty
            curve.push(CurvePoint {
                lambda,
                r_hat: 0.0,
                sigma_hat: if config.method == Method::LStat { Some(0.0) } else { None },
                ucb: 0.0,
            });
            continue;
        }
        let column = matrix.column(j);
        let sorted = sort_sample(&column, 0.0, 1.0)?;
        let r_hat = risk::estimate_risk(&sorted, &config.psi);
        let point = match config.method {
            Method::LStat => {
                let variance = match &config.psi {
                    WeightMeasure::CVaR { beta } => risk::variance_cvar(&sorted, *beta)?,
                    WeightMeasure::VaR { beta } => risk::variance_var_bootstrap(
                        &sorted,
                        *beta,
                        config.bootstrap_b,
                        config.seed ^ (j as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15),
                    )?,
                    _ => risk::variance_general(&sorted, &config.psi)?,
                };
                let sd = variance.max(0.0).sqrt();
                CurvePoint {
                    lambda,
                    r_hat,
                    sigma_hat: Some(sd),
                    ucb: risk::ucb(r_hat, sd, n, config.delta)?,
                }
            }
            Method::Dkw => {
                let env = dkw_envelope(&sorted, config.delta)?;
                CurvePoint {
                    lambda,
                    r_hat,
                    sigma_hat: None,
                    ucb: envelopes::envelope_risk_ucb(&env, &config.psi),
                }
            }
            Method::Bj => {
                let env =
                    envelope_from_order_levels(&sorted, bj_level_cache.clone().unwrap());
                CurvePoint {
                    lambda,
                    r_hat,
                    sigma_hat: None,
                    ucb: envelopes::envelope_risk_ucb(&env, &config.psi),
                }
            }
        };
        curve.push(point);
    }
    Ok(curve)
}

/// The monotone scan of the UCB curve: the last lambda before the first
/// UCB exceeding alpha. Later dips below alpha do not revive the scan.
pub fn select_lambda(curve: &[CurvePoint], alpha: f64) -> f64 {
    debug_assert!(!curve.is_empty());
    let mut selected = curve[0].lambda;
    for point in curve {
        if point.ucb > alpha {
            break;
        }
        selected = point.lambda;
    }
    selected
}

/// End-to-end calibration: curve plus threshold selection.
pub fn calibrate(matrix: &InducedMatrix, config: &CalibrationConfig) -> Result<CalibrationResult> {
    let curve = ucb_curve(matrix, config)?;
    let lambda_hat = select_lambda(&curve, config.alpha);
    Ok(CalibrationResult {
        lambda_hat,
        curve,
        config: config.clone(),
        n: matrix.n_prompts(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::induce::{build_grid, induce_scores, GridPolicy, ScoreRecord, ScoreTable};
    use approx::assert_abs_diff_eq;

    fn config(method: Method, psi: WeightMeasure, grid: LambdaGrid) -> CalibrationConfig {
        CalibrationConfig {
            psi,
            alpha: 0.3,
            delta: 0.05,
            method,
            grid,
            bootstrap_b: 200,
            seed: 7,
        }
    }

    fn matrix_from(records: Vec<(&str, &str, f64, f64)>, m: usize) -> InducedMatrix {
        let table = ScoreTable::new(
            records
                .into_iter()
                .map(|(p, r, ms, hs)| ScoreRecord {
                    prompt_id: p.into(),
                    response_id: r.into(),
                    machine_score: ms,
                    human_score: hs,
                })
                .collect(),
        )
        .unwrap();
        let grid = build_grid(&table, GridPolicy::Uniform { m }).unwrap();
        induce_scores(&table, &grid).unwrap()
    }

    #[test]
    fn lambda_min_column_is_exactly_zero_for_all_methods() {
        let matrix = matrix_from(
            vec![("p1", "a", 0.2, 0.8), ("p2", "a", 0.4, 0.6), ("p3", "a", 0.9, 0.2)],
            11,
        );
        for method in [Method::LStat, Method::Dkw, Method::Bj] {
            let cfg = config(method, WeightMeasure::cvar(0.5).unwrap(), matrix.grid().clone());
            let curve = ucb_curve(&matrix, &cfg).unwrap();
            assert_eq!(curve[0].r_hat, 0.0);
            assert_eq!(curve[0].ucb, 0.0);
        }
    }

    #[test]
    fn lstat_curve_matches_hand_computed_column() {
        // two prompts yield column [0,0,1,1] at the top lambda
        let matrix = matrix_from(
            vec![
                ("p1", "a", 0.1, 1.0),
                ("p2", "a", 0.1, 1.0),
                ("p3", "a", 0.1, 0.0),
                ("p4", "a", 0.1, 0.0),
            ],
            3,
        );
        let cfg = config(Method::LStat, WeightMeasure::cvar(0.5).unwrap(), matrix.grid().clone());
        let curve = ucb_curve(&matrix, &cfg).unwrap();
        let top = curve.last().unwrap();
        assert_abs_diff_eq!(top.r_hat, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(top.sigma_hat.unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(top.ucb, 1.0 + 1.6448536269514722 / 2.0, epsilon = 1e-7);
    }

    #[test]
    fn single_prompt_ucb_is_the_lone_value() {
        let matrix = matrix_from(vec![("p1", "a", 0.3, 0.55)], 3);
        let cfg = config(Method::LStat, WeightMeasure::cvar(0.5).unwrap(), matrix.grid().clone());
        let curve = ucb_curve(&matrix, &cfg).unwrap();
        let top = curve.last().unwrap();
        assert_abs_diff_eq!(top.r_hat, 0.55, epsilon = 1e-12);
        assert_eq!(top.sigma_hat, Some(0.0));
        assert_abs_diff_eq!(top.ucb, 0.55, epsilon = 1e-12);
    }

    #[test]
    fn select_lambda_scan_semantics() {
        let curve: Vec<CurvePoint> = [(0.0, 0.0), (0.33, 0.1), (0.66, 0.2), (1.0, 0.4)]
            .iter()
            .map(|&(lambda, ucb)| CurvePoint { lambda, r_hat: ucb, sigma_hat: None, ucb })
            .collect();
        assert_eq!(select_lambda(&curve, 0.25), 0.66);

        let all_pass: Vec<CurvePoint> = curve
            .iter()
            .map(|p| CurvePoint { ucb: 0.05, ..p.clone() })
            .collect();
        assert_eq!(select_lambda(&all_pass, 0.25), 1.0);

        // a later dip below alpha does not revive the scan
        let dip: Vec<CurvePoint> = [(0.0, 0.0), (0.33, 0.3), (0.66, 0.2), (1.0, 0.1)]
            .iter()
            .map(|&(lambda, ucb)| CurvePoint { lambda, r_hat: ucb, sigma_hat: None, ucb })
            .collect();
        assert_eq!(select_lambda(&dip, 0.25), 0.0);
    }

    #[test]
    fn lambda_hat_monotone_in_alpha() {
        let matrix = matrix_from(
            vec![
                ("p1", "a", 0.2, 0.1),
                ("p1", "b", 0.7, 0.8),
                ("p2", "a", 0.3, 0.2),
                ("p2", "b", 0.8, 0.9),
                ("p3", "a", 0.4, 0.3),
                ("p4", "a", 0.5, 0.6),
            ],
            21,
        );
        let cfg = config(Method::LStat, WeightMeasure::cvar(0.5).unwrap(), matrix.grid().clone());
        let curve = ucb_curve(&matrix, &cfg).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for alpha in [0.05, 0.1, 0.2, 0.4, 0.8] {
            let lam = select_lambda(&curve, alpha);
            assert!(lam >= prev);
            prev = lam;
        }
    }

    #[test]
    fn calibration_result_json_roundtrip() {
        let matrix = matrix_from(vec![("p1", "a", 0.2, 0.3), ("p2", "a", 0.6, 0.1)], 5);
        let cfg = config(Method::Dkw, WeightMeasure::var(0.75).unwrap(), matrix.grid().clone());
        let result = calibrate(&matrix, &cfg).unwrap();
        let json = result.to_json().unwrap();
        let back = CalibrationResult::from_json(&json).unwrap();
        assert_eq!(back, result);
        assert!(matrix.grid().position(result.lambda_hat).is_some());
    }

    #[test]
    fn invalid_config_is_rejected() {
        let matrix = matrix_from(vec![("p1", "a", 0.2, 0.3)], 3);
        let mut cfg =
            config(Method::LStat, WeightMeasure::Mean, matrix.grid().clone());
        cfg.delta = 0.7;
        assert!(ucb_curve(&matrix, &cfg).is_err());
        cfg.delta = 0.05;
        cfg.alpha = 1.5;
        assert!(ucb_curve(&matrix, &cfg).is_err());
    }
}
