//! Held-out evaluation: realized risk at the selected threshold,
//! deployment cost and abstention accounting, target-level suggestion,
//! and the multi-repeat experiment sweep.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::calibrate::{calibrate, select_lambda, ucb_curve, CalibrationConfig, Method};
use crate::empirical::sort_sample;
use crate::error::{Error, Result};
use crate::induce::{build_grid, induce_scores, GridPolicy, InducedMatrix, ScoreTable};
use crate::risk::{estimate_risk, WeightMeasure};
use crate::seeding::derive_rng;
use crate::synth::{generate_scores, SynthConfig};

/// Deployment metrics of a calibrated threshold on held-out prompts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub realized_risk: f64,
    /// Mean of 1 / P-hat over prompts with a passing candidate; absent when
    /// every prompt abstains.
    pub cost_mean: Option<f64>,
    pub abstention_rate: f64,
    pub n_heldout: usize,
    pub lambda_hat: f64,
    pub method: Method,
    pub psi: WeightMeasure,
    pub alpha: f64,
    pub delta: f64,
    pub seed: u64,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Plug-in risk of the held-out induced column at lambda-hat (no UCB).
pub fn realized_risk(
    heldout: &InducedMatrix,
    lambda_hat: f64,
    psi: &WeightMeasure,
) -> Result<f64> {
    let j = heldout
        .grid()
        .position(lambda_hat)
        .ok_or(Error::LambdaNotOnGrid(lambda_hat))?;
    if j == 0 {
        return Ok(0.0);
    }
    let sorted = sort_sample(&heldout.column(j), 0.0, 1.0)?;
    Ok(estimate_risk(&sorted, psi))
}

/// Per-prompt pass probability estimated by the candidate fraction below
/// lambda-hat; expected sampling cost is its reciprocal. Prompts with no
/// passing candidate are abstentions, excluded from the cost mean.
pub fn estimate_cost(heldout: &ScoreTable, lambda_hat: f64) -> Result<(Option<f64>, f64)> {
    if heldout.is_empty() {
        return Err(Error::EmptySample);
    }
    // (total, passing) per prompt in one pass; ordered map so the cost
    // mean sums in a reproducible order
    let mut counts: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for r in heldout.records() {
        let entry = counts.entry(r.prompt_id.as_str()).or_insert((0, 0));
        entry.0 += 1;
        if r.machine_score < lambda_hat {
            entry.1 += 1;
        }
    }
    let mut costs = Vec::new();
    let mut abstained = 0usize;
    for &(total, passing) in counts.values() {
        if passing == 0 {
            abstained += 1;
        } else {
            costs.push(total as f64 / passing as f64);
        }
    }
    let abstention_rate = abstained as f64 / counts.len() as f64;
    let cost_mean = if costs.is_empty() {
        None
    } else {
        Some(costs.iter().sum::<f64>() / costs.len() as f64)
    };
    Ok((cost_mean, abstention_rate))
}

/// Suggest a target level: sort pooled human scores ascending, drop the
/// top floor(q*n), and return the distortion risk of the remainder.
pub fn suggest_alpha(pooled_human_scores: &[f64], q: f64, psi: &WeightMeasure) -> Result<f64> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::InvalidLevel(q));
    }
    let mut scores = pooled_human_scores.to_vec();
    scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let drop = (q * scores.len() as f64).floor() as usize;
    let keep = scores.len().saturating_sub(drop);
    if keep == 0 {
        return Err(Error::EmptySample);
    }
    let sorted = sort_sample(&scores[..keep], 0.0, 1.0)?;
    Ok(estimate_risk(&sorted, psi))
}

/// Large-sample plug-in risk at a fixed lambda, from a fresh synthetic
/// table: a near-truth stand-in for the population risk in coverage tests.
pub fn oracle_risk(
    config: &SynthConfig,
    lambda: f64,
    psi: &WeightMeasure,
    n_large: usize,
) -> Result<f64> {
    if n_large < 10_000 {
        return Err(Error::InvalidParameter(format!(
            "oracle needs n_large >= 10000, got {n_large}"
        )));
    }
    let big = SynthConfig { n_prompts: n_large, ..config.clone() };
    let table = generate_scores(&big)?;
    // worst passing human score per prompt, one pass
    let mut worst: HashMap<&str, f64> = HashMap::new();
    for r in table.records() {
        let entry = worst.entry(r.prompt_id.as_str()).or_insert(0.0);
        if r.machine_score < lambda && r.human_score > *entry {
            *entry = r.human_score;
        }
    }
    let induced: Vec<f64> = worst.values().copied().collect();
    let sorted = sort_sample(&induced, 0.0, 1.0)?;
    Ok(estimate_risk(&sorted, psi))
}

/// Which family of distortion measures a sweep varies beta over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeasureKind {
    Cvar,
    Var,
    Mean,
}

impl MeasureKind {
    pub fn to_measure(self, beta: f64) -> Result<WeightMeasure> {
        match self {
            MeasureKind::Cvar => WeightMeasure::cvar(beta),
            MeasureKind::Var => WeightMeasure::var(beta),
            MeasureKind::Mean => Ok(WeightMeasure::Mean),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub measure: MeasureKind,
    pub methods: Vec<Method>,
    pub repeats: usize,
    /// Berk-Jones repeat override (the threshold computation dominates
    /// runtime); None means use `repeats`.
    pub repeats_bj: Option<usize>,
    pub split_fraction: f64,
    pub delta: f64,
    pub grid: GridPolicy,
    pub bootstrap_b: usize,
    pub base_seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            alphas: vec![0.15, 0.2, 0.25, 0.3, 0.35],
            betas: vec![0.5, 0.75, 0.9],
            measure: MeasureKind::Cvar,
            methods: vec![Method::LStat, Method::Dkw],
            repeats: 15,
            repeats_bj: Some(3),
            split_fraction: 0.6,
            delta: 0.05,
            grid: GridPolicy::default(),
            bootstrap_b: 1000,
            base_seed: 0,
        }
    }
}

/// One calibrate-then-evaluate outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub alpha: f64,
    pub beta: f64,
    pub method: Method,
    pub repeat: usize,
    pub lambda_hat: f64,
    pub realized_risk: f64,
    pub cost_mean: Option<f64>,
    pub abstention_rate: f64,
}

/// Per-cell mean and standard error across repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRecord {
    pub alpha: f64,
    pub beta: f64,
    pub method: Method,
    pub metric: String,
    pub mean: f64,
    pub stderr: Option<f64>,
}

/// Repeatedly split prompts, calibrate on one side, evaluate on the other,
/// for every (alpha, beta, method) cell.
pub fn run_sweep(table: &ScoreTable, config: &SweepConfig) -> Result<Vec<SweepRecord>> {
    if !(config.split_fraction > 0.0 && config.split_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "split fraction must be in (0,1), got {}",
            config.split_fraction
        )));
    }
    let prompts = table.prompt_ids();
    if prompts.len() < 2 {
        return Err(Error::InvalidParameter("sweep needs at least 2 prompts".into()));
    }
    let max_repeats = config
        .methods
        .iter()
        .map(|m| self::repeats_for(config, *m))
        .max()
        .unwrap_or(0);

    let mut records = Vec::new();
    for repeat in 0..max_repeats {
        let (calib_table, heldout_table) =
            split_prompts(table, &prompts, config.split_fraction, config.base_seed + repeat as u64);
        let grid = build_grid(&calib_table, config.grid)?;
        let calib_matrix = induce_scores(&calib_table, &grid)?;
        let heldout_matrix = induce_scores(&heldout_table, &grid)?;

        for &beta in &config.betas {
            let psi = config.measure.to_measure(beta)?;
            for &method in &config.methods {
                if repeat >= repeats_for(config, method) {
                    continue;
                }
                let calib_config = CalibrationConfig {
                    psi: psi.clone(),
                    alpha: 0.5, // overwritten per alpha below; curve is alpha-free
                    delta: config.delta,
                    method,
                    grid: grid.clone(),
                    bootstrap_b: config.bootstrap_b,
                    seed: config.base_seed + repeat as u64,
                };
                let curve = ucb_curve(&calib_matrix, &calib_config)?;
                for &alpha in &config.alphas {
                    let lambda_hat = select_lambda(&curve, alpha);
                    let risk = realized_risk(&heldout_matrix, lambda_hat, &psi)?;
                    let (cost_mean, abstention_rate) =
                        estimate_cost(&heldout_table, lambda_hat)?;
                    records.push(SweepRecord {
                        alpha,
                        beta,
                        method,
                        repeat,
                        lambda_hat,
                        realized_risk: risk,
                        cost_mean,
                        abstention_rate,
                    });
                }
            }
        }
    }
    Ok(records)
}

fn repeats_for(config: &SweepConfig, method: Method) -> usize {
    match method {
        Method::Bj => config.repeats_bj.unwrap_or(config.repeats),
        _ => config.repeats,
    }
}

/// Prompt-level split: candidates of a prompt never straddle the split.
pub fn split_prompts(
    table: &ScoreTable,
    prompts: &[String],
    fraction: f64,
    seed: u64,
) -> (ScoreTable, ScoreTable) {
    let mut shuffled = prompts.to_vec();
    let mut rng = derive_rng(seed, &[0x7370_6c69]);
    shuffled.shuffle(&mut rng);
    let cut = ((prompts.len() as f64 * fraction).round() as usize).clamp(1, prompts.len() - 1);
    let calib: HashSet<String> = shuffled[..cut].iter().cloned().collect();
    let heldout: HashSet<String> = shuffled[cut..].iter().cloned().collect();
    (table.subset(&calib), table.subset(&heldout))
}

/// Aggregate sweep records into per-cell mean and standard error rows.
pub fn summarize(records: &[SweepRecord]) -> Vec<SummaryRecord> {
    use std::collections::BTreeMap;
    let mut cells: BTreeMap<(u64, u64, String), Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        cells
            .entry((r.alpha.to_bits(), r.beta.to_bits(), r.method.to_string()))
            .or_default()
            .push(r);
    }
    let mut out = Vec::new();
    for rs in cells.values() {
        let first = rs[0];
        let metrics: [(&str, Vec<f64>); 4] = [
            ("lambda_hat", rs.iter().map(|r| r.lambda_hat).collect()),
            ("realized_risk", rs.iter().map(|r| r.realized_risk).collect()),
            ("cost_mean", rs.iter().filter_map(|r| r.cost_mean).collect()),
            ("abstention_rate", rs.iter().map(|r| r.abstention_rate).collect()),
        ];
        for (name, values) in metrics {
            if values.is_empty() {
                continue;
            }
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let stderr = if values.len() >= 2 {
                let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
                Some((ss / (n - 1.0)).sqrt() / n.sqrt())
            } else {
                None
            };
            out.push(SummaryRecord {
                alpha: first.alpha,
                beta: first.beta,
                method: first.method,
                metric: name.to_string(),
                mean,
                stderr,
            });
        }
    }
    out
}

pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_summary_csv<W: Write>(records: &[SummaryRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Calibrate on one table and evaluate on another: the single-shot variant
/// of the sweep, used by the CLI.
pub fn evaluate(
    heldout: &ScoreTable,
    grid: &crate::induce::LambdaGrid,
    lambda_hat: f64,
    psi: &WeightMeasure,
    alpha: f64,
    delta: f64,
    method: Method,
    seed: u64,
) -> Result<EvalReport> {
    let matrix = induce_scores(heldout, grid)?;
    let risk = realized_risk(&matrix, lambda_hat, psi)?;
    let (cost_mean, abstention_rate) = estimate_cost(heldout, lambda_hat)?;
    Ok(EvalReport {
        realized_risk: risk,
        cost_mean,
        abstention_rate,
        n_heldout: matrix.n_prompts(),
        lambda_hat,
        method,
        psi: psi.clone(),
        alpha,
        delta,
        seed,
    })
}

/// Convenience wrapper tying calibration to a table (used by examples).
pub fn calibrate_table(
    table: &ScoreTable,
    config: &CalibrationConfig,
) -> Result<crate::calibrate::CalibrationResult> {
    let matrix = induce_scores(table, &config.grid)?;
    calibrate(&matrix, config)
}
