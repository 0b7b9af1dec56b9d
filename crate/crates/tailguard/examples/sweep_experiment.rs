//! A small repeated-split experiment over (alpha, method) cells, with
//! per-cell mean and standard error.

use tailguard::calibrate::Method;
use tailguard::evalx::{run_sweep, summarize, MeasureKind, SweepConfig};
use tailguard::induce::GridPolicy;
use tailguard::synth::{generate_scores, SynthConfig};

fn main() -> tailguard::Result<()> {
    let table = generate_scores(&SynthConfig { set_size: 20, ..SynthConfig::new(200, 0.57, 1) })?;
    let config = SweepConfig {
        alphas: vec![0.2, 0.3],
        betas: vec![0.75],
        measure: MeasureKind::Cvar,
        methods: vec![Method::LStat, Method::Dkw],
        repeats: 5,
        repeats_bj: None,
        split_fraction: 0.6,
        delta: 0.05,
        grid: GridPolicy::Uniform { m: 51 },
        bootstrap_b: 200,
        base_seed: 1,
    };
    let records = run_sweep(&table, &config)?;
    println!("{} records from {} repeats", records.len(), config.repeats);

    println!("\nalpha  method  metric           mean     stderr");
    for row in summarize(&records) {
        println!(
            "{:<5}  {:<6}  {:<15} {:7.4}  {}",
            row.alpha,
            row.method.to_string(),
            row.metric,
            row.mean,
            row.stderr.map(|s| format!("{s:.4}")).unwrap_or_else(|| "-".into())
        );
    }
    Ok(())
}
