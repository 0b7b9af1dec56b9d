//! The three bound constructions on identical data: the L-statistic CLT
//! bound is typically the least conservative, Berk-Jones next, DKW last.

use tailguard::calibrate::{calibrate, CalibrationConfig, Method};
use tailguard::induce::{build_grid, induce_scores, GridPolicy};
use tailguard::risk::WeightMeasure;
use tailguard::synth::{generate_scores, SynthConfig};

fn main() -> tailguard::Result<()> {
    let table = generate_scores(&SynthConfig::new(600, 0.57, 3))?;
    let grid = build_grid(&table, GridPolicy::Uniform { m: 101 })?;
    let matrix = induce_scores(&table, &grid)?;

    println!("method  lambda_hat  UCB at lambda_hat");
    for method in [Method::LStat, Method::Bj, Method::Dkw] {
        let config = CalibrationConfig {
            psi: WeightMeasure::cvar(0.9)?,
            alpha: 0.3,
            delta: 0.05,
            method,
            grid: grid.clone(),
            bootstrap_b: 1000,
            seed: 3,
        };
        let result = calibrate(&matrix, &config)?;
        let at = result
            .curve
            .iter()
            .find(|p| p.lambda == result.lambda_hat)
            .map(|p| p.ucb)
            .unwrap_or(f64::NAN);
        println!("{:6}  {:10.3}  {:.4}", method.to_string(), result.lambda_hat, at);
    }
    Ok(())
}
