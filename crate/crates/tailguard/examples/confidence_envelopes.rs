//! One-sided quantile envelopes for a small sample: DKW's uniform band
//! versus the Berk-Jones order-statistic band, and the risk UCBs they give.

use tailguard::empirical::sort_sample;
use tailguard::envelopes::{
    bj_envelope, bj_threshold, dkw_envelope, dkw_epsilon, envelope_risk_ucb,
};
use tailguard::risk::{estimate_risk, WeightMeasure};

fn main() -> tailguard::Result<()> {
    let values: Vec<f64> = (1..=20).map(|i| (i as f64 / 21.0).powi(2)).collect();
    let sorted = sort_sample(&values, 0.0, 1.0)?;
    let delta = 0.05;
    let n = values.len();

    println!("n = {n}, delta = {delta}");
    println!("DKW epsilon     = {:.4}", dkw_epsilon(n, delta));
    println!("BJ threshold    = {:.6}", bj_threshold(n, delta)?);

    let dkw = dkw_envelope(&sorted, delta)?;
    let bj = bj_envelope(&sorted, delta)?;
    println!("\np      DKW upper  BJ upper");
    for k in 1..=4 {
        let p = k as f64 / 5.0;
        println!("{:.2}   {:8.4}  {:8.4}", p, dkw.value_at(p), bj.value_at(p));
    }

    let psi = WeightMeasure::cvar(0.75)?;
    println!("\nCVaR(0.75) plug-in {:.4}", estimate_risk(&sorted, &psi));
    println!("CVaR(0.75) DKW UCB {:.4}", envelope_risk_ucb(&dkw, &psi));
    println!("CVaR(0.75) BJ  UCB {:.4}", envelope_risk_ucb(&bj, &psi));
    Ok(())
}
