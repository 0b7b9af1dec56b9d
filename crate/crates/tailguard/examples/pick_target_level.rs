//! Suggest a target risk level: trim the worst q fraction of pooled human
//! scores and take the distortion risk of what remains.

use tailguard::evalx::suggest_alpha;
use tailguard::risk::WeightMeasure;
use tailguard::synth::{generate_scores, SynthConfig};

fn main() -> tailguard::Result<()> {
    let table = generate_scores(&SynthConfig::new(300, 0.57, 19))?;
    let scores: Vec<f64> = table.records().iter().map(|r| r.human_score).collect();
    let psi = WeightMeasure::cvar(0.9)?;

    println!("pooled human scores: {}", scores.len());
    println!("q      suggested alpha");
    for q in [0.01, 0.05, 0.1, 0.15, 0.2] {
        println!("{:<5}  {:.4}", q, suggest_alpha(&scores, q, &psi)?);
    }
    Ok(())
}
