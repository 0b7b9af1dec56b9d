//! Candidate-set generation: sequential sampling with quality, diversity,
//! and set-confidence control, plus a ROUGE-L similarity implementation
//! and a deterministic mock sampler for desk-scale runs.

use std::io::Read;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding::derive_rng;

/// Thresholds and budget for the sequential generation loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Accept a draw only when its quality score is below this (perplexity-like).
    pub quality_threshold: f64,
    /// Reject a draw when its max similarity to the accepted set exceeds this.
    pub similarity_threshold: f64,
    /// Stop once the set-confidence function reaches this.
    pub confidence_threshold: f64,
    pub k_max: usize,
    pub seed: u64,
    /// Decoding knobs recorded for provenance; the mock sampler folds them
    /// into its seed only.
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            quality_threshold: 2.61,
            similarity_threshold: 0.26,
            confidence_threshold: 32.0,
            k_max: 40,
            seed: 0,
            temperature: 0.8,
            top_p: 0.95,
        }
    }
}

/// ROUGE-L F-measure between two token sequences.
pub fn rouge_l<T: AsRef<str>>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let lcs = lcs_length(a, b) as f64;
    if lcs == 0.0 {
        return 0.0;
    }
    let precision = lcs / a.len() as f64;
    let recall = lcs / b.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// ROUGE-L on whitespace-tokenized text.
pub fn rouge_l_text(a: &str, b: &str) -> f64 {
    let ta: Vec<&str> = a.split_whitespace().collect();
    let tb: Vec<&str> = b.split_whitespace().collect();
    rouge_l(&ta, &tb)
}

fn lcs_length<T: AsRef<str>>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut curr = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            curr[j + 1] = if x.as_ref() == y.as_ref() {
                prev[j] + 1
            } else {
                prev[j + 1].max(curr[j])
            };
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Sequential candidate-set construction: draw up to `k_max` responses,
/// accept each iff its quality clears the threshold and its similarity to
/// every accepted response stays within the diversity bound (the max over
/// an empty set is 0, so the first qualifying draw is always accepted),
/// and stop early once the set confidence reaches its threshold.
pub fn generate_candidate_set<S, Q, M, C>(
    prompt: &str,
    sampler: S,
    quality_fn: Q,
    similarity_fn: M,
    confidence_fn: C,
    config: &GenerationConfig,
) -> Vec<String>
where
    S: Fn(&str, u64, usize) -> String,
    Q: Fn(&str, &str) -> f64,
    M: Fn(&str, &str) -> f64,
    C: Fn(&[String]) -> f64,
{
    let mut set: Vec<String> = Vec::new();
    for k in 0..config.k_max {
        let draw = sampler(prompt, config.seed, k);
        let quality_ok = quality_fn(prompt, &draw) < config.quality_threshold;
        let max_similarity = set
            .iter()
            .map(|y| similarity_fn(&draw, y))
            .fold(0.0_f64, f64::max);
        if quality_ok && max_similarity <= config.similarity_threshold {
            set.push(draw);
        }
        if confidence_fn(&set) >= config.confidence_threshold {
            break;
        }
    }
    set
}

/// Default set-confidence function: cardinality, making the confidence
/// threshold a maximum set size.
pub fn cardinality_confidence(set: &[String]) -> f64 {
    set.len() as f64
}

const MOCK_VOCAB: [&str; 24] = [
    "river", "stone", "quiet", "lantern", "orbit", "meadow", "signal", "harbor", "ember",
    "willow", "cedar", "drift", "hollow", "summit", "vesper", "thistle", "gleam", "marrow",
    "tide", "fable", "umber", "sable", "north", "pale",
];

/// Deterministic mock sampler: token strings from a seeded stream keyed on
/// (prompt, seed, draw index). Temperature and top-p act only as seed salt.
pub fn mock_sampler(temperature: f64, top_p: f64) -> impl Fn(&str, u64, usize) -> String {
    move |prompt: &str, seed: u64, index: usize| {
        let prompt_hash = fxhash(prompt.as_bytes());
        let decode_salt = temperature.to_bits() ^ top_p.to_bits().rotate_left(17);
        let mut rng = derive_rng(seed, &[prompt_hash, decode_salt, index as u64]);
        let len = rng.random_range(3..=10);
        let mut tokens = Vec::with_capacity(len);
        for _ in 0..len {
            tokens.push(MOCK_VOCAB[rng.random_range(0..MOCK_VOCAB.len())]);
        }
        tokens.join(" ")
    }
}

/// Paired mock quality function: a pseudo-perplexity in [1, 5], a
/// deterministic function of (prompt, response).
pub fn mock_quality(prompt: &str, response: &str) -> f64 {
    let h = fxhash(prompt.as_bytes()) ^ fxhash(response.as_bytes()).rotate_left(31);
    1.0 + 4.0 * (h as f64 / u64::MAX as f64)
}

/// Deterministic mock machine disutility score in [0, 1].
pub fn mock_machine_score(response: &str) -> f64 {
    fxhash(response.as_bytes()) as f64 / u64::MAX as f64
}

/// Deterministic mock human disutility score: correlated with the machine
/// score but perturbed, emulating imperfect alignment.
pub fn mock_human_score(response: &str) -> f64 {
    let base = mock_machine_score(response);
    let noise = fxhash_seeded(response.as_bytes(), 0x68756d61) as f64 / u64::MAX as f64;
    (0.6 * base + 0.4 * noise).clamp(0.0, 1.0)
}

fn fxhash(bytes: &[u8]) -> u64 {
    fxhash_seeded(bytes, 0xcbf2_9ce4_8422_2325)
}

fn fxhash_seeded(bytes: &[u8], seed: u64) -> u64 {
    let mut h = seed;
    for &b in bytes {
        h = (h ^ b as u64).wrapping_mul(0x100_0000_01b3);
    }
    h ^ (h >> 29)
}

/// A pre-generated response read from a pool CSV (`prompt_id,response_id,text`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub prompt_id: String,
    pub response_id: String,
    pub text: String,
}

pub fn read_pool_csv<R: Read>(reader: R) -> Result<Vec<PoolRecord>> {
    let mut csv_reader = csv::ReaderBuilder::new().from_reader(reader);
    let mut records = Vec::new();
    for row in csv_reader.deserialize::<PoolRecord>() {
        let record = row.map_err(|e| match e.position() {
            Some(pos) => Error::MalformedData { line: pos.line(), message: e.to_string() },
            None => Error::Csv(e),
        })?;
        records.push(record);
    }
    Ok(records)
}

pub fn read_pool_csv_path(path: &Path) -> Result<Vec<PoolRecord>> {
    read_pool_csv(std::fs::File::open(path)?)
}
