//! Distribution-free control of tail risk for selective generation.
//!
//! A generator produces candidate responses, a cheap machine judge scores
//! them, and a threshold lambda decides which candidates may be released.
//! Given a calibration set of (machine, human) score pairs, this crate
//! selects the largest lambda whose upper confidence bound on a chosen
//! distortion risk measure (CVaR, VaR, mean, or a custom spectral weight)
//! of the induced human-score distribution stays below a target level.
//!
//! Three bound constructions are available: a central-limit bound on the
//! L-statistic plug-in estimator, and two one-sided confidence envelopes
//! for the empirical CDF (Dvoretzky-Kiefer-Wolfowitz and Berk-Jones)
//! integrated against the distortion weight.
//!
//! The crate also ships a semi-synthetic benchmark generator (Gaussian
//! copula with Beta marginals at a target Spearman correlation), held-out
//! evaluation and sweep drivers, and a mock candidate-set generator with
//! quality and similarity gates.

pub mod calibrate;
pub mod candidates;
pub mod empirical;
pub mod envelopes;
pub mod error;
pub mod evalx;
pub mod induce;
pub mod manifest;
pub mod risk;
pub mod seeding;
pub mod special;
pub mod synth;

pub use calibrate::{
    calibrate, select_lambda, ucb_curve, CalibrationConfig, CalibrationResult, CurvePoint, Method,
};
pub use error::{Error, Result};
pub use evalx::{
    estimate_cost, evaluate, oracle_risk, realized_risk, run_sweep, suggest_alpha, summarize,
    EvalReport, MeasureKind, SweepConfig, SweepRecord, SummaryRecord,
};
pub use induce::{
    build_grid, induce_scores, GridPolicy, InducedMatrix, LambdaGrid, ScoreRecord, ScoreTable,
};
pub use risk::{estimate_risk, ucb, WeightMeasure};
pub use synth::{generate_scores, realized_spearman, SynthConfig};
