//! From raw per-prompt candidate scores to the lambda-indexed induced-loss
//! matrix: r_lambda(x) is the worst human score among candidates whose
//! machine score falls strictly below lambda, or 0 when none qualify.

use std::collections::{BTreeMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One scored candidate response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub prompt_id: String,
    pub response_id: String,
    pub machine_score: f64,
    pub human_score: f64,
}

/// Per-prompt candidate records; the raw calibration/held-out data.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    records: Vec<ScoreRecord>,
}

impl ScoreTable {
    pub fn new(records: Vec<ScoreRecord>) -> Result<Self> {
        let mut seen = HashSet::new();
        for r in &records {
            if !(0.0..=1.0).contains(&r.machine_score) || r.machine_score.is_nan() {
                return Err(Error::InvalidParameter(format!(
                    "machine_score {} for ({}, {}) outside [0,1]",
                    r.machine_score, r.prompt_id, r.response_id
                )));
            }
            if !(0.0..=1.0).contains(&r.human_score) || r.human_score.is_nan() {
                return Err(Error::InvalidParameter(format!(
                    "human_score {} for ({}, {}) outside [0,1]",
                    r.human_score, r.prompt_id, r.response_id
                )));
            }
            if !seen.insert((r.prompt_id.clone(), r.response_id.clone())) {
                return Err(Error::DuplicateRecord(r.prompt_id.clone(), r.response_id.clone()));
            }
        }
        Ok(ScoreTable { records })
    }

    pub fn records(&self) -> &[ScoreRecord] {
        &self.records
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Distinct prompt ids, sorted, so downstream results do not depend on
    /// record order.
    pub fn prompt_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> =
            self.records.iter().map(|r| r.prompt_id.clone()).collect::<HashSet<_>>().into_iter().collect();
        ids.sort();
        ids
    }

    /// Restrict to the given prompts (used for calibration/held-out splits).
    pub fn subset(&self, prompts: &HashSet<String>) -> ScoreTable {
        ScoreTable {
            records: self
                .records
                .iter()
                .filter(|r| prompts.contains(&r.prompt_id))
                .cloned()
                .collect(),
        }
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut csv_reader = csv::ReaderBuilder::new().from_reader(reader);
        let mut records = Vec::new();
        for row in csv_reader.deserialize::<ScoreRecord>() {
            let record = row.map_err(|e| match e.position() {
                Some(pos) => Error::MalformedData { line: pos.line(), message: e.to_string() },
                None => Error::Csv(e),
            })?;
            records.push(record);
        }
        ScoreTable::new(records)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut csv_writer = csv::Writer::from_writer(writer);
        for record in &self.records {
            csv_writer.serialize(record)?;
        }
        csv_writer.flush()?;
        Ok(())
    }

    pub fn write_csv_path(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Grid construction policy for the threshold search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum GridPolicy {
    /// m equally spaced points on [0, 1], endpoints included.
    Uniform { m: usize },
    /// Sorted unique machine scores plus 0 and a point strictly above the
    /// maximum score.
    Observed,
}

impl Default for GridPolicy {
    fn default() -> Self {
        GridPolicy::Uniform { m: 101 }
    }
}

/// Strictly increasing threshold values; the first value admits nothing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaGrid {
    values: Vec<f64>,
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 points".into()));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("grid values must be strictly increasing".into()));
        }
        Ok(LambdaGrid { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of `lambda` on the grid, tolerating float round-trips.
    pub fn position(&self, lambda: f64) -> Option<usize> {
        self.values.iter().position(|&v| (v - lambda).abs() <= 1e-12)
    }
}

/// Build the lambda grid for a table under the given policy.
pub fn build_grid(table: &ScoreTable, policy: GridPolicy) -> Result<LambdaGrid> {
    if table.is_empty() {
        return Err(Error::EmptySample);
    }
    match policy {
        GridPolicy::Uniform { m } => {
            if m < 2 {
                return Err(Error::InvalidParameter(format!("uniform grid needs m >= 2, got {m}")));
            }
            let values = (0..m).map(|i| i as f64 / (m - 1) as f64).collect();
            Ok(LambdaGrid { values })
        }
        GridPolicy::Observed => {
            let mut scores: Vec<f64> = table.records.iter().map(|r| r.machine_score).collect();
            scores.sort_by(|a, b| a.partial_cmp(b).unwrap());
            scores.dedup();
            let mut values = vec![0.0];
            for s in scores {
                if s > 0.0 {
                    values.push(s);
                }
            }
            // top point strictly above every possible score so the full
            // candidate set is selectable under the strict m < lambda rule
            let max = *values.last().unwrap();
            let step = if values.len() >= 2 {
                (max - values[values.len() - 2]).max(1e-6)
            } else {
                1.0
            };
            values.push(1.0_f64.max(max) + step);
            Ok(LambdaGrid { values })
        }
    }
}

/// n prompts x m grid values of induced scores; rows monotone in lambda.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedMatrix {
    prompt_ids: Vec<String>,
    grid: LambdaGrid,
    values: Vec<Vec<f64>>, // row per prompt
}

impl InducedMatrix {
    pub fn prompt_ids(&self) -> &[String] {
        &self.prompt_ids
    }

    pub fn grid(&self) -> &LambdaGrid {
        &self.grid
    }

    pub fn n_prompts(&self) -> usize {
        self.prompt_ids.len()
    }

    /// The induced-score column at grid index j.
    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|row| row[j]).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i]
    }
}

/// Induce r_lambda(x) over the whole grid: per prompt, the max human score
/// among candidates with machine_score < lambda, else 0 (abstention).
pub fn induce_scores(table: &ScoreTable, grid: &LambdaGrid) -> Result<InducedMatrix> {
    if table.records.is_empty() {
        return Err(Error::EmptySample);
    }
    // group candidates per prompt in one pass over the table
    let mut by_prompt: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for r in &table.records {
        by_prompt
            .entry(r.prompt_id.as_str())
            .or_default()
            .push((r.machine_score, r.human_score));
    }
    let prompt_ids: Vec<String> = by_prompt.keys().map(|p| p.to_string()).collect();
    let mut values = Vec::with_capacity(prompt_ids.len());
    for pairs in by_prompt.values_mut() {
        // sort candidates by machine score, prefix-max the human scores,
        // then each lambda is a binary search
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut prefix_max = Vec::with_capacity(pairs.len());
        let mut running = 0.0_f64;
        for &(_, human) in pairs.iter() {
            running = running.max(human);
            prefix_max.push(running);
        }
        let row: Vec<f64> = grid
            .values()
            .iter()
            .map(|&lambda| {
                let passing = pairs.partition_point(|&(machine, _)| machine < lambda);
                if passing == 0 {
                    0.0
                } else {
                    prefix_max[passing - 1]
                }
            })
            .collect();
        values.push(row);
    }
    Ok(InducedMatrix { prompt_ids, grid: grid.clone(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(p: &str, r: &str, m: f64, h: f64) -> ScoreRecord {
        ScoreRecord {
            prompt_id: p.into(),
            response_id: r.into(),
            machine_score: m,
            human_score: h,
        }
    }

    fn two_candidate_table() -> ScoreTable {
        ScoreTable::new(vec![record("p1", "a", 0.2, 0.1), record("p1", "b", 0.6, 0.9)]).unwrap()
    }

    #[test]
    fn table_rejects_duplicates_and_bad_scores() {
        assert!(matches!(
            ScoreTable::new(vec![record("p", "a", 0.1, 0.1), record("p", "a", 0.2, 0.2)]),
            Err(Error::DuplicateRecord(..))
        ));
        assert!(ScoreTable::new(vec![record("p", "a", 1.5, 0.1)]).is_err());
        assert!(ScoreTable::new(vec![record("p", "a", 0.5, -0.1)]).is_err());
    }

    #[test]
    fn uniform_grid() {
        let table = two_candidate_table();
        let g = build_grid(&table, GridPolicy::Uniform { m: 3 }).unwrap();
        assert_eq!(g.values(), &[0.0, 0.5, 1.0]);
        let g = build_grid(&table, GridPolicy::Uniform { m: 101 }).unwrap();
        assert_eq!(g.len(), 101);
        assert!((g.values()[1] - 0.01).abs() < 1e-15);
        assert!(build_grid(&table, GridPolicy::Uniform { m: 1 }).is_err());
    }

    #[test]
    fn observed_grid_exceeds_max_score() {
        let table = two_candidate_table();
        let g = build_grid(&table, GridPolicy::Observed).unwrap();
        assert_eq!(g.values()[0], 0.0);
        assert_eq!(g.values()[1], 0.2);
        assert_eq!(g.values()[2], 0.6);
        assert!(*g.values().last().unwrap() > 1.0);
    }

    #[test]
    fn induce_matches_strict_inequality() {
        let table = two_candidate_table();
        let grid = LambdaGrid { values: vec![0.0, 0.1, 0.5, 0.7] };
        let m = induce_scores(&table, &grid).unwrap();
        let row = m.row(0);
        assert_eq!(row[0], 0.0); // lambda_min admits nothing
        assert_eq!(row[1], 0.0); // 0.2 not < 0.1
        assert_eq!(row[2], 0.1); // only the first candidate passes
        assert_eq!(row[3], 0.9); // both pass, max human
    }

    #[test]
    fn candidate_at_exact_lambda_is_excluded() {
        let table = ScoreTable::new(vec![record("p", "a", 0.5, 0.8)]).unwrap();
        let grid = LambdaGrid { values: vec![0.0, 0.5, 0.6] };
        let m = induce_scores(&table, &grid).unwrap();
        assert_eq!(m.row(0), &[0.0, 0.0, 0.8]);
    }

    #[test]
    fn missing_prompt_candidates_is_an_error() {
        let table = two_candidate_table();
        // craft a table whose record list is empty
        let empty = ScoreTable::new(vec![]).unwrap();
        let grid = build_grid(&table, GridPolicy::Uniform { m: 3 }).unwrap();
        assert!(induce_scores(&empty, &grid).is_err());
    }

    #[test]
    fn csv_roundtrip() {
        let table = two_candidate_table();
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("prompt_id,response_id,machine_score,human_score\n"));
        let back = ScoreTable::read_csv(&buf[..]).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn malformed_csv_reports_line() {
        let data = "prompt_id,response_id,machine_score,human_score\np,a,0.1,0.2\np,b,zap,0.3\n";
        match ScoreTable::read_csv(data.as_bytes()) {
            Err(Error::MalformedData { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected malformed-data error, got {other:?}"),
        }
    }

    proptest! {
        #[test]
        fn rows_monotone_and_order_invariant(
            raw in proptest::collection::vec(
                (0u8..5, 0.0..1.0f64, 0.0..1.0f64), 1..60),
            m in 2usize..20,
        ) {
            let records: Vec<ScoreRecord> = raw
                .iter()
                .enumerate()
                .map(|(i, (p, ms, hs))| record(&format!("p{p}"), &format!("r{i}"), *ms, *hs))
                .collect();
            let table = ScoreTable::new(records.clone()).unwrap();
            let grid = build_grid(&table, GridPolicy::Uniform { m }).unwrap();
            let matrix = induce_scores(&table, &grid).unwrap();
            for i in 0..matrix.n_prompts() {
                let row = matrix.row(i);
                prop_assert!(row[0] == 0.0);
                prop_assert!(row.windows(2).all(|w| w[0] <= w[1]));
                prop_assert!(row.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }

            let mut shuffled = records;
            shuffled.reverse();
            let table2 = ScoreTable::new(shuffled).unwrap();
            let matrix2 = induce_scores(&table2, &grid).unwrap();
            prop_assert_eq!(matrix, matrix2);
        }
    }
}
