//! Generate a semi-synthetic score table and inspect its marginals.

use tailguard::synth::{beta_mean, generate_scores, realized_spearman, SynthConfig};

fn main() -> tailguard::Result<()> {
    let config = SynthConfig::new(500, 0.68, 42);
    let table = generate_scores(&config)?;

    let n = table.records().len();
    let mean_machine: f64 =
        table.records().iter().map(|r| r.machine_score).sum::<f64>() / n as f64;
    let mean_human: f64 = table.records().iter().map(|r| r.human_score).sum::<f64>() / n as f64;

    println!("{} records over {} prompts", n, table.prompt_ids().len());
    println!("target Spearman   {:.3}", config.target_spearman);
    println!("realized Spearman {:.3}", realized_spearman(&table)?);
    println!(
        "machine mean {:.4} / human mean {:.4} (Beta(0.4, 3) mean {:.4})",
        mean_machine,
        mean_human,
        beta_mean(0.4, 3.0)
    );
    for record in &table.records()[..5] {
        println!(
            "  {} {}  machine {:.4}  human {:.4}",
            record.prompt_id, record.response_id, record.machine_score, record.human_score
        );
    }
    Ok(())
}
