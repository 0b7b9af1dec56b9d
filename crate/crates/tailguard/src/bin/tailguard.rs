//! Batch CLI: synthesize benchmark tables, calibrate thresholds, evaluate
//! them on held-out data, sweep the full experimental grid, suggest target
//! levels, and generate mock candidate sets. Every command is a pure
//! function of (flags, input files, seed) and writes a sidecar manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tailguard::calibrate::{calibrate, CalibrationConfig, CalibrationResult, Method};
use tailguard::candidates::{
    cardinality_confidence, generate_candidate_set, mock_human_score, mock_machine_score,
    mock_quality, mock_sampler, read_pool_csv_path, rouge_l_text, GenerationConfig,
};
use tailguard::error::Error;
use tailguard::evalx::{
    evaluate, run_sweep, suggest_alpha, summarize, write_summary_csv, write_sweep_csv,
    MeasureKind, SweepConfig,
};
use tailguard::induce::{build_grid, induce_scores, GridPolicy, ScoreRecord, ScoreTable};
use tailguard::manifest::RunManifest;
use tailguard::risk::WeightMeasure;
use tailguard::synth::{generate_scores, realized_spearman, SynthConfig};

#[derive(Parser)]
#[command(name = "tailguard", version, about = "Distribution-free tail-risk control for selective generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a semi-synthetic (machine, human) score table
    Synth(SynthArgs),
    /// Select the largest threshold whose risk UCB stays below alpha
    Calibrate(CalibrateArgs),
    /// Evaluate a calibrated threshold on held-out data
    Evaluate(EvaluateArgs),
    /// Repeated split/calibrate/evaluate over an (alpha, beta, method) grid
    Sweep(SweepArgs),
    /// Suggest target levels from pooled human scores
    SuggestAlpha(SuggestAlphaArgs),
    /// Build mock candidate sets with quality/diversity gates and score them
    Generate(GenerateArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    prompts: usize,
    #[arg(long, default_value_t = 40)]
    set_size: usize,
    /// Target Spearman correlation between machine and human scores
    #[arg(long)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Human-score Beta marginal as "a,b"
    #[arg(long, default_value = "0.4,3")]
    human_beta: String,
    /// Machine-score Beta marginal as "a,b"
    #[arg(long, default_value = "0.4,3")]
    machine_beta: String,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Score table CSV (prompt_id,response_id,machine_score,human_score)
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "cvar")]
    measure: String,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[arg(long, default_value_t = 0.3)]
    alpha: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value = "lstat")]
    method: String,
    /// Threshold grid: "uniform:M" or "observed"
    #[arg(long, default_value = "uniform:101")]
    grid: String,
    #[arg(long, default_value_t = 1000)]
    bootstrap_b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Emit stage progress on stderr
    #[arg(long)]
    progress: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Held-out score table CSV
    #[arg(long)]
    data: PathBuf,
    /// Calibration result JSON produced by `calibrate`
    #[arg(long)]
    calibration: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Score table CSV; omit to synthesize one via --prompts/--rho
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, conflicts_with = "data")]
    prompts: Option<usize>,
    #[arg(long, default_value_t = 40)]
    set_size: usize,
    #[arg(long, default_value_t = 0.57)]
    rho: f64,
    #[arg(long, default_value = "0.15,0.2,0.25,0.3,0.35", value_delimiter = ',')]
    alphas: Vec<f64>,
    #[arg(long, default_value = "0.5,0.75,0.9", value_delimiter = ',')]
    betas: Vec<f64>,
    #[arg(long, default_value = "cvar")]
    measure: String,
    #[arg(long, default_value = "lstat,dkw", value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, default_value_t = 15)]
    repeats: usize,
    /// Berk-Jones repeat override; defaults to --repeats
    #[arg(long)]
    repeats_bj: Option<usize>,
    #[arg(long, default_value_t = 0.6)]
    split: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    #[arg(long, default_value = "uniform:101")]
    grid: String,
    #[arg(long, default_value_t = 1000)]
    bootstrap_b: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-repeat records CSV; the summary lands beside it as
    /// `<out>.summary.csv`
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    progress: bool,
}

#[derive(Args)]
struct SuggestAlphaArgs {
    /// Score table CSV whose human scores are pooled
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "0.01,0.05,0.1,0.15,0.2", value_delimiter = ',')]
    q: Vec<f64>,
    #[arg(long, default_value = "cvar")]
    measure: String,
    #[arg(long, default_value_t = 0.9)]
    beta: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    /// Pre-generated response pool CSV (prompt_id,response_id,text); omit to
    /// sample from the built-in mock generator
    #[arg(long)]
    pool: Option<PathBuf>,
    /// Number of mock prompts when no pool is given
    #[arg(long, default_value_t = 10, conflicts_with = "pool")]
    prompts: usize,
    #[arg(long, default_value_t = 2.61)]
    quality_max: f64,
    #[arg(long, default_value_t = 0.26)]
    similarity_max: f64,
    #[arg(long, default_value_t = 32.0)]
    confidence: f64,
    #[arg(long, default_value_t = 40)]
    k_max: usize,
    #[arg(long, default_value_t = 0.8)]
    temperature: f64,
    #[arg(long, default_value_t = 0.95)]
    top_p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        return fail(&e);
    }
    let result = match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::SuggestAlpha(args) => cmd_suggest_alpha(args),
        Command::Generate(args) => cmd_generate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

/// TAILGUARD_THREADS caps worker parallelism; 0 or unset means auto.
fn configure_threads() -> Result<(), Error> {
    if let Ok(raw) = std::env::var("TAILGUARD_THREADS") {
        let n: usize = raw
            .parse()
            .map_err(|_| Error::InvalidParameter(format!("TAILGUARD_THREADS={raw} is not a count")))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        }
    }
    Ok(())
}

/// 2 = flag error (clap handles those itself), 3 = data error, 4 = semantic.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_)
        | Error::Csv(_)
        | Error::Json(_)
        | Error::MalformedData { .. }
        | Error::DuplicateRecord(..)
        | Error::EmptyPrompt(_)
        | Error::EmptySample => 3,
        _ => 4,
    }
}

fn fail(e: &Error) -> ExitCode {
    let payload = serde_json::json!({
        "error": format!("{e:?}").split(['(', ' ', '{']).next().unwrap_or("Error"),
        "message": e.to_string(),
    });
    eprintln!("{payload}");
    ExitCode::from(exit_code(e))
}

fn parse_beta_pair(raw: &str) -> Result<(f64, f64), Error> {
    let parts: Vec<&str> = raw.split(',').collect();
    let bad = || Error::InvalidParameter(format!("expected Beta marginal as \"a,b\", got {raw:?}"));
    if parts.len() != 2 {
        return Err(bad());
    }
    let a: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let b: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    Ok((a, b))
}

fn parse_grid(raw: &str) -> Result<GridPolicy, Error> {
    if raw == "observed" {
        return Ok(GridPolicy::Observed);
    }
    if let Some(m) = raw.strip_prefix("uniform:") {
        let m: usize = m.parse().map_err(|_| {
            Error::InvalidParameter(format!("bad uniform grid size in {raw:?}"))
        })?;
        return Ok(GridPolicy::Uniform { m });
    }
    Err(Error::InvalidParameter(format!(
        "grid must be \"uniform:M\" or \"observed\", got {raw:?}"
    )))
}

fn parse_measure(kind: &str, beta: f64) -> Result<WeightMeasure, Error> {
    parse_measure_kind(kind)?.to_measure(beta)
}

fn parse_measure_kind(kind: &str) -> Result<MeasureKind, Error> {
    match kind {
        "cvar" => Ok(MeasureKind::Cvar),
        "var" => Ok(MeasureKind::Var),
        "mean" => Ok(MeasureKind::Mean),
        other => Err(Error::InvalidParameter(format!(
            "measure must be cvar|var|mean, got {other:?}"
        ))),
    }
}

fn parse_method(raw: &str) -> Result<Method, Error> {
    match raw {
        "lstat" => Ok(Method::LStat),
        "dkw" => Ok(Method::Dkw),
        "bj" => Ok(Method::Bj),
        other => Err(Error::InvalidParameter(format!(
            "method must be lstat|dkw|bj, got {other:?}"
        ))),
    }
}

fn write_output(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents)?;
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<(), Error> {
    let config = SynthConfig {
        n_prompts: args.prompts,
        set_size: args.set_size,
        target_spearman: args.rho,
        human_marginal: parse_beta_pair(&args.human_beta)?,
        machine_marginal: parse_beta_pair(&args.machine_beta)?,
        seed: args.seed,
    };
    let table = generate_scores(&config)?;
    table.write_csv_path(&args.out)?;

    let mut manifest = RunManifest::new(
        "synth",
        serde_json::json!({
            "config": config,
            "realized_spearman": realized_spearman(&table)?,
        }),
        Some(args.seed),
    );
    manifest.add_input(&args.out)?;
    manifest.write_beside(&args.out)?;
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), Error> {
    let table = ScoreTable::read_csv_path(&args.data)?;
    let psi = parse_measure(&args.measure, args.beta)?;
    let policy = parse_grid(&args.grid)?;
    let grid = build_grid(&table, policy)?;
    let config = CalibrationConfig {
        psi,
        alpha: args.alpha,
        delta: args.delta,
        method: parse_method(&args.method)?,
        grid: grid.clone(),
        bootstrap_b: args.bootstrap_b,
        seed: args.seed,
    };
    if args.progress {
        eprintln!(
            "calibrate: {} prompts, {} grid points, method {}",
            table.prompt_ids().len(),
            grid.len(),
            config.method
        );
    }
    let matrix = induce_scores(&table, &grid)?;
    let result = calibrate(&matrix, &config)?;
    if args.progress {
        eprintln!("calibrate: lambda_hat = {}", result.lambda_hat);
    }
    write_output(&args.out, &(result.to_json()? + "\n"))?;

    let mut manifest =
        RunManifest::new("calibrate", serde_json::to_value(&config)?, Some(args.seed));
    manifest.add_input(&args.data)?;
    manifest.write_beside(&args.out)?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let table = ScoreTable::read_csv_path(&args.data)?;
    let calibration = CalibrationResult::from_json(&std::fs::read_to_string(&args.calibration)?)?;
    let config = &calibration.config;
    let report = evaluate(
        &table,
        &config.grid,
        calibration.lambda_hat,
        &config.psi,
        config.alpha,
        config.delta,
        config.method,
        config.seed,
    )?;
    write_output(&args.out, &(report.to_json()? + "\n"))?;

    let mut manifest =
        RunManifest::new("evaluate", serde_json::to_value(config)?, Some(config.seed));
    manifest.add_input(&args.data)?;
    manifest.add_input(&args.calibration)?;
    manifest.write_beside(&args.out)?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    let (table, source) = match (&args.data, args.prompts) {
        (Some(path), _) => (ScoreTable::read_csv_path(path)?, None),
        (None, Some(prompts)) => {
            let synth = SynthConfig {
                set_size: args.set_size,
                ..SynthConfig::new(prompts, args.rho, args.seed)
            };
            (generate_scores(&synth)?, Some(synth))
        }
        (None, None) => {
            return Err(Error::InvalidParameter(
                "sweep needs either --data or --prompts".into(),
            ))
        }
    };
    let methods = args
        .methods
        .iter()
        .map(|m| parse_method(m))
        .collect::<Result<Vec<_>, _>>()?;
    let config = SweepConfig {
        alphas: args.alphas.clone(),
        betas: args.betas.clone(),
        measure: parse_measure_kind(&args.measure)?,
        methods,
        repeats: args.repeats,
        repeats_bj: args.repeats_bj,
        split_fraction: args.split,
        delta: args.delta,
        grid: parse_grid(&args.grid)?,
        bootstrap_b: args.bootstrap_b,
        base_seed: args.seed,
    };
    if args.progress {
        eprintln!(
            "sweep: {} prompts, {} alphas x {} betas x {} methods, {} repeats",
            table.prompt_ids().len(),
            config.alphas.len(),
            config.betas.len(),
            config.methods.len(),
            config.repeats
        );
    }
    let records = run_sweep(&table, &config)?;
    let summary = summarize(&records);

    write_sweep_csv(&records, std::fs::File::create(&args.out)?)?;
    let summary_path = summary_path(&args.out);
    write_summary_csv(&summary, std::fs::File::create(&summary_path)?)?;

    let mut manifest = RunManifest::new(
        "sweep",
        serde_json::json!({ "config": config, "synth": source }),
        Some(args.seed),
    );
    if let Some(path) = &args.data {
        manifest.add_input(path)?;
    }
    manifest.write_beside(&args.out)?;
    Ok(())
}

fn summary_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|s| s.to_os_string()).unwrap_or_default();
    name.push(".summary.csv");
    out.with_file_name(name)
}

fn cmd_suggest_alpha(args: SuggestAlphaArgs) -> Result<(), Error> {
    let table = ScoreTable::read_csv_path(&args.data)?;
    let psi = parse_measure(&args.measure, args.beta)?;
    let scores: Vec<f64> = table.records().iter().map(|r| r.human_score).collect();
    let mut out = BTreeMap::new();
    for &q in &args.q {
        out.insert(format!("{q}"), suggest_alpha(&scores, q, &psi)?);
    }
    write_output(&args.out, &(serde_json::to_string_pretty(&out)? + "\n"))?;

    let mut manifest = RunManifest::new(
        "suggest-alpha",
        serde_json::json!({ "q": args.q, "measure": args.measure, "beta": args.beta }),
        None,
    );
    manifest.add_input(&args.data)?;
    manifest.write_beside(&args.out)?;
    Ok(())
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Error> {
    let config = GenerationConfig {
        quality_threshold: args.quality_max,
        similarity_threshold: args.similarity_max,
        confidence_threshold: args.confidence,
        k_max: args.k_max,
        seed: args.seed,
        temperature: args.temperature,
        top_p: args.top_p,
    };

    // (prompt_id, accepted response texts) per prompt
    let accepted: Vec<(String, Vec<String>)> = match &args.pool {
        Some(path) => {
            let pool = read_pool_csv_path(path)?;
            let mut by_prompt: BTreeMap<String, Vec<String>> = BTreeMap::new();
            for record in pool {
                by_prompt.entry(record.prompt_id).or_default().push(record.text);
            }
            by_prompt
                .into_iter()
                .map(|(prompt, texts)| {
                    let prompt_config = GenerationConfig {
                        k_max: config.k_max.min(texts.len()),
                        ..config.clone()
                    };
                    let set = generate_candidate_set(
                        &prompt,
                        |_prompt: &str, _seed: u64, index: usize| texts[index].clone(),
                        mock_quality,
                        rouge_l_text,
                        cardinality_confidence,
                        &prompt_config,
                    );
                    (prompt, set)
                })
                .collect()
        }
        None => (0..args.prompts)
            .map(|i| {
                let prompt = format!("p{i:06}");
                let set = generate_candidate_set(
                    &prompt,
                    mock_sampler(config.temperature, config.top_p),
                    mock_quality,
                    rouge_l_text,
                    cardinality_confidence,
                    &config,
                );
                (prompt, set)
            })
            .collect(),
    };

    let mut records = Vec::new();
    for (prompt, set) in &accepted {
        for (j, text) in set.iter().enumerate() {
            records.push(ScoreRecord {
                prompt_id: prompt.clone(),
                response_id: format!("r{j:03}"),
                machine_score: mock_machine_score(text),
                human_score: mock_human_score(text),
            });
        }
    }
    let table = ScoreTable::new(records)?;
    table.write_csv_path(&args.out)?;

    let mut manifest =
        RunManifest::new("generate", serde_json::to_value(&config)?, Some(args.seed));
    if let Some(path) = &args.pool {
        manifest.add_input(path)?;
    }
    manifest.write_beside(&args.out)?;
    Ok(())
}
