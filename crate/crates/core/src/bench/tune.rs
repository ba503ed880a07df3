use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{mean, with_pool, BenchError};
use crate::corpus::ConflictRecord;
use crate::resolvers::SbcrResolver;
use crate::search::{Budget, SearchParams};
use crate::simkit::{similarity, Granularity};

/// Cross product of the three search parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneGrid {
    pub neighbors: Vec<usize>,
    pub time_budgets_s: Vec<f64>,
    pub stagnation: Vec<usize>,
}

impl TuneGrid {
    pub fn configs(&self) -> Vec<TuningConfig> {
        let mut out = Vec::new();
        for &k in &self.neighbors {
            for &t in &self.time_budgets_s {
                for &s in &self.stagnation {
                    out.push(TuningConfig {
                        neighbors_per_iteration: k,
                        max_execution_time: t,
                        max_stagnation_iterations: s,
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    pub neighbors_per_iteration: usize,
    pub max_execution_time: f64,
    pub max_stagnation_iterations: usize,
}

/// How a configuration's time budget is enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BudgetMode {
    /// Real wall-clock seconds.
    WallClock,
    /// `max(1, round(seconds * per_second))` evaluations, which makes runs
    /// machine independent.
    Evaluations { per_second: f64 },
}

/// What counts as a top-1 hit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Top1Mode {
    /// The best-scoring candidate reproduces the developer resolution.
    #[default]
    ExactMatch,
    /// The best-scoring candidate is also the most resolution-like candidate
    /// of the ranked list (rank 1 under the ranking mode).
    RankOne,
}

/// Which ranked-list position a record contributes to the average ranking.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankingMode {
    /// Position of the candidate most similar to the developer resolution
    /// (first one on ties).
    #[default]
    MostSimilar,
    /// Position of the first exact reproduction of the resolution.
    FirstExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuneOptions {
    pub budget_mode: BudgetMode,
    pub top_n: usize,
    /// Search seed shared by every configuration and record.
    pub seed: u64,
    pub top1: Top1Mode,
    pub ranking: RankingMode,
    pub jobs: usize,
}

impl Default for TuneOptions {
    fn default() -> Self {
        TuneOptions {
            budget_mode: BudgetMode::Evaluations { per_second: 1000.0 },
            top_n: 100,
            seed: 0,
            top1: Top1Mode::default(),
            ranking: RankingMode::default(),
            jobs: 1,
        }
    }
}

/// One line of the tuning table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRow {
    pub neighbors_per_iteration: usize,
    pub max_execution_time: f64,
    pub max_stagnation_iterations: usize,
    /// Evaluation cap actually used, when not running on wall-clock time.
    pub max_evaluations: Option<u64>,
    pub top1_count: usize,
    pub avg_ranking: f64,
    pub avg_similarity: f64,
    pub avg_time: f64,
}

pub fn params_for(config: &TuningConfig, opts: &TuneOptions) -> SearchParams {
    let budget = match opts.budget_mode {
        BudgetMode::WallClock => Budget::MaxExecutionTime(config.max_execution_time),
        BudgetMode::Evaluations { per_second } => {
            Budget::MaxEvaluations(((config.max_execution_time * per_second).round() as u64).max(1))
        }
    };
    SearchParams {
        neighbors_per_iteration: config.neighbors_per_iteration,
        budget,
        max_stagnation_iterations: config.max_stagnation_iterations,
        top_n: opts.top_n,
        seed: opts.seed,
    }
}

/// Seeded sample of at most `n` records, in sampling order.
pub fn sample_records(records: &[ConflictRecord], n: usize, seed: u64) -> Vec<ConflictRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records.choose_multiple(&mut rng, n.min(records.len())).cloned().collect()
}

struct RecordOutcome {
    top1: bool,
    rank: usize,
    similarity: f64,
    elapsed: f64,
}

fn score_record(record: &ConflictRecord, resolver: &SbcrResolver, opts: &TuneOptions) -> RecordOutcome {
    let chunk = record.chunk();
    let truth = &record.resolution_lines;
    let penalty = opts.top_n + 1;
    let Ok(result) = resolver.search(&chunk) else {
        let none: [&str; 0] = [];
        return RecordOutcome {
            top1: false,
            rank: penalty,
            similarity: similarity(&none, truth, Granularity::CharLevel),
            elapsed: 0.0,
        };
    };
    let sims: Vec<f64> = result
        .ranked
        .iter()
        .map(|rc| similarity(&rc.candidate.text(&chunk), truth, Granularity::CharLevel))
        .collect();
    let rank = match opts.ranking {
        RankingMode::MostSimilar => sims
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, &s)| match best {
                Some((_, bs)) if bs >= s => best,
                _ => Some((i, s)),
            })
            .map(|(i, _)| i + 1),
        RankingMode::FirstExact => sims.iter().position(|&s| s == 1.0).map(|i| i + 1),
    }
    .unwrap_or(penalty);
    let best_similarity = similarity(&result.best.text(&chunk), truth, Granularity::CharLevel);
    let top1 = match opts.top1 {
        Top1Mode::ExactMatch => best_similarity == 1.0,
        Top1Mode::RankOne => rank == 1,
    };
    RecordOutcome {
        top1,
        rank,
        similarity: best_similarity,
        elapsed: result.elapsed,
    }
}

/// Runs every grid configuration over the sample and returns one row per
/// configuration, best average similarity first (grid order on ties).
pub fn tune_grid(sample: &[ConflictRecord], grid: &TuneGrid, opts: &TuneOptions) -> Result<Vec<TuningRow>, BenchError> {
    let configs = grid.configs();
    if configs.is_empty() {
        return Err(BenchError::EmptyGrid);
    }
    if sample.is_empty() {
        return Err(BenchError::EmptySample);
    }
    let mut rows = Vec::with_capacity(configs.len());
    for config in &configs {
        let params = params_for(config, opts);
        let max_evaluations = match params.budget {
            Budget::MaxEvaluations(n) => Some(n),
            Budget::MaxExecutionTime(_) => None,
        };
        let resolver = SbcrResolver::new(params);
        let run = || -> Vec<RecordOutcome> { sample.par_iter().map(|r| score_record(r, &resolver, opts)).collect() };
        let outcomes = if opts.jobs <= 1 {
            sample.iter().map(|r| score_record(r, &resolver, opts)).collect()
        } else {
            with_pool(opts.jobs, run)?
        };
        rows.push(TuningRow {
            neighbors_per_iteration: config.neighbors_per_iteration,
            max_execution_time: config.max_execution_time,
            max_stagnation_iterations: config.max_stagnation_iterations,
            max_evaluations,
            top1_count: outcomes.iter().filter(|o| o.top1).count(),
            avg_ranking: mean(outcomes.iter().map(|o| o.rank as f64)),
            avg_similarity: mean(outcomes.iter().map(|o| o.similarity)),
            avg_time: mean(outcomes.iter().map(|o| o.elapsed)),
        });
    }
    rows.sort_by(|a, b| b.avg_similarity.total_cmp(&a.avg_similarity));
    Ok(rows)
}

/// Writes the tuning table with one column per parameter and per metric.
pub fn write_tuning_csv<W: Write>(out: W, rows: &[TuningRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "neighbors_per_iteration",
        "max_execution_time",
        "max_stagnation_iterations",
        "max_evaluations",
        "top1_similarity_count",
        "average_ranking",
        "average_similarity",
        "average_time",
    ])?;
    for r in rows {
        w.write_record([
            r.neighbors_per_iteration.to_string(),
            r.max_execution_time.to_string(),
            r.max_stagnation_iterations.to_string(),
            r.max_evaluations.map(|n| n.to_string()).unwrap_or_default(),
            r.top1_count.to_string(),
            r.avg_ranking.to_string(),
            r.avg_similarity.to_string(),
            r.avg_time.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
