//! Split prompts 60/40, calibrate on one side, evaluate realized risk,
//! sampling cost, and abstention on the other.

use tailguard::calibrate::{calibrate, CalibrationConfig, Method};
use tailguard::evalx::{evaluate, split_prompts};
use tailguard::induce::{build_grid, induce_scores, GridPolicy};
use tailguard::risk::WeightMeasure;
use tailguard::synth::{generate_scores, SynthConfig};

fn main() -> tailguard::Result<()> {
    let table = generate_scores(&SynthConfig::new(500, 0.68, 11))?;
    let prompts = table.prompt_ids();
    let (calib, heldout) = split_prompts(&table, &prompts, 0.6, 11);

    let grid = build_grid(&calib, GridPolicy::Uniform { m: 101 })?;
    let config = CalibrationConfig {
        psi: WeightMeasure::cvar(0.75)?,
        alpha: 0.25,
        delta: 0.05,
        method: Method::LStat,
        grid: grid.clone(),
        bootstrap_b: 1000,
        seed: 11,
    };
    let matrix = induce_scores(&calib, &grid)?;
    let result = calibrate(&matrix, &config)?;

    let report = evaluate(
        &heldout,
        &grid,
        result.lambda_hat,
        &config.psi,
        config.alpha,
        config.delta,
        config.method,
        config.seed,
    )?;

    println!("calibrated on {} prompts, held out {}", matrix.n_prompts(), report.n_heldout);
    println!("lambda_hat      {:.3}", report.lambda_hat);
    println!("target alpha    {:.3}", report.alpha);
    println!("realized risk   {:.4}", report.realized_risk);
    match report.cost_mean {
        Some(cost) => println!("mean cost       {cost:.3} draws per release"),
        None => println!("mean cost       n/a (all prompts abstained)"),
    }
    println!("abstention rate {:.3}", report.abstention_rate);
    Ok(())
}
