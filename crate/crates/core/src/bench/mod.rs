//! Benchmark harness: run a resolver over a labelled dataset, tune search
//! parameters, and compare two resolvers with paired statistics.

mod compare;
pub mod stats;
mod tune;

use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ConflictRecord;
use crate::resolvers::{Resolver, Status};
use crate::simkit::{similarity_with, Granularity, ReportOptions};

pub use compare::{compare_results, write_balance_csv, write_sim_diff_csv, BalanceBucket, ComparisonReport, Extremes, PairedDiff, TIE_TOLERANCE};
pub use stats::{cles, cles_counts, wilcoxon_signed_rank, StatsError};
pub use tune::{
    params_for, sample_records, tune_grid, write_tuning_csv, BudgetMode, RankingMode, Top1Mode, TuneGrid, TuneOptions,
    TuningConfig, TuningRow,
};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("malformed result row at line {line}: {source}")]
    MalformedRow { line: usize, source: serde_json::Error },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("conflict id {0:?} is present in only one of the result sets")]
    IdMismatch(String),
    #[error("conflict id {0:?} appears more than once")]
    DuplicateId(String),
    #[error("no balance feature known for conflict {0:?}")]
    MissingBalance(String),
    #[error("tuning grid is empty")]
    EmptyGrid,
    #[error("tuning sample is empty")]
    EmptySample,
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("could not start worker pool: {0}")]
    Pool(String),
}

/// One resolver's outcome on one labelled conflict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub conflict_id: String,
    pub resolver_id: String,
    pub sim_line: f64,
    pub sim_char: f64,
    /// Seconds; 0 when timing was not recorded.
    pub elapsed: f64,
    pub status: Status,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchOptions {
    /// Worker threads; 1 runs inline.
    pub jobs: usize,
    /// Keep measured generation times. Off makes result files
    /// byte-reproducible.
    pub record_time: bool,
    pub report: ReportOptions,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            jobs: 1,
            record_time: true,
            report: ReportOptions::default(),
        }
    }
}

pub(crate) fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T, BenchError> {
    if jobs <= 1 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Resolves every record and scores the proposal against the developer
/// resolution at both granularities. Rows come back ordered by conflict id.
pub fn run_benchmark<R: Resolver + ?Sized>(
    records: &[ConflictRecord],
    resolver: &R,
    opts: &BenchOptions,
) -> Result<Vec<ResultRow>, BenchError> {
    let score = |record: &ConflictRecord| {
        let candidate = resolver.resolve(&record.chunk());
        let truth = &record.resolution_lines;
        ResultRow {
            conflict_id: record.id.clone(),
            resolver_id: candidate.resolver_id,
            sim_line: similarity_with(&candidate.lines, truth, Granularity::LineLevel, opts.report),
            sim_char: similarity_with(&candidate.lines, truth, Granularity::CharLevel, opts.report),
            elapsed: if opts.record_time { candidate.elapsed } else { 0.0 },
            status: candidate.status,
        }
    };
    let mut rows: Vec<ResultRow> = if opts.jobs <= 1 {
        records.iter().map(score).collect()
    } else {
        with_pool(opts.jobs, || records.par_iter().map(score).collect())?
    };
    rows.sort_by(|a, b| a.conflict_id.cmp(&b.conflict_id));
    Ok(rows)
}

pub fn write_results<W: Write>(mut out: W, rows: &[ResultRow]) -> io::Result<()> {
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_results<R: BufRead>(input: R) -> Result<Vec<ResultRow>, BenchError> {
    let mut rows = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row = serde_json::from_str(&line).map_err(|source| BenchError::MalformedRow { line: i + 1, source })?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}
