//! Calibrate a release threshold: the largest lambda whose CVaR upper
//! confidence bound stays below the target level.

use tailguard::calibrate::{calibrate, CalibrationConfig, Method};
use tailguard::induce::{build_grid, induce_scores, GridPolicy};
use tailguard::risk::WeightMeasure;
use tailguard::synth::{generate_scores, SynthConfig};

fn main() -> tailguard::Result<()> {
    let table = generate_scores(&SynthConfig::new(600, 0.57, 7))?;
    let grid = build_grid(&table, GridPolicy::Uniform { m: 101 })?;
    let matrix = induce_scores(&table, &grid)?;

    let config = CalibrationConfig {
        psi: WeightMeasure::cvar(0.9)?,
        alpha: 0.3,
        delta: 0.05,
        method: Method::LStat,
        grid,
        bootstrap_b: 1000,
        seed: 7,
    };
    let result = calibrate(&matrix, &config)?;

    println!("lambda_hat = {:.3} (n = {})", result.lambda_hat, result.n);
    println!("lambda   R_hat  sigma  UCB");
    for point in result.curve.iter().step_by(10) {
        println!(
            "{:6.2} {:7.4} {:6.4} {:7.4}{}",
            point.lambda,
            point.r_hat,
            point.sigma_hat.unwrap_or(f64::NAN),
            point.ucb,
            if point.ucb > config.alpha { "  > alpha" } else { "" }
        );
    }
    Ok(())
}
