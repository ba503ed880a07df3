use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::stats::{cles, wilcoxon_signed_rank};
use super::{BenchError, ResultRow};

/// Character-level similarity differences within this band count as ties.
pub const TIE_TOLERANCE: f64 = 1e-9;

const BUCKETS: usize = 20;
const BUCKET_WIDTH: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedDiff {
    pub conflict_id: String,
    pub sim_a: f64,
    pub sim_b: f64,
    /// `sim_a - sim_b`.
    pub diff: f64,
    pub balance: Option<f64>,
}

/// Outcome counts for conflicts whose balance falls in `[lower, upper)`
/// (the last bucket also holds 1.0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalanceBucket {
    pub lower: f64,
    pub upper: f64,
    pub a_wins: usize,
    pub b_wins: usize,
    pub ties: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    /// Conflicts where A beats B by the widest margin, widest first.
    pub a_best: Vec<String>,
    /// Conflicts where B beats A by the widest margin, widest first.
    pub b_best: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub resolver_a: String,
    pub resolver_b: String,
    pub n: usize,
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
    pub wilcoxon_p: f64,
    pub cles_a_over_b: f64,
    pub sim_diff: Vec<PairedDiff>,
    /// Empty when no balance features were supplied.
    pub balance_histogram: Vec<BalanceBucket>,
    pub extremes: Extremes,
}

fn index_by_id(rows: &[ResultRow]) -> Result<BTreeMap<&str, &ResultRow>, BenchError> {
    let mut map = BTreeMap::new();
    for row in rows {
        if map.insert(row.conflict_id.as_str(), row).is_some() {
            return Err(BenchError::DuplicateId(row.conflict_id.clone()));
        }
    }
    Ok(map)
}

fn bucket_of(balance: f64) -> usize {
    // The epsilon keeps values such as 0.3 out of the bucket below.
    let idx = ((balance + 1.0) / BUCKET_WIDTH + 1e-9).floor();
    (idx.max(0.0) as usize).min(BUCKETS - 1)
}

/// Pairs two result sets by conflict id and computes win/loss/tie counts,
/// the Wilcoxon signed-rank p-value of the character-level differences, the
/// common-language effect size of A over B, the balance histogram and the
/// `m` most extreme conflicts in each direction.
pub fn compare_results(
    rows_a: &[ResultRow],
    rows_b: &[ResultRow],
    balances: Option<&HashMap<String, f64>>,
    m: usize,
) -> Result<ComparisonReport, BenchError> {
    let a = index_by_id(rows_a)?;
    let b = index_by_id(rows_b)?;
    if let Some(id) = a
        .keys()
        .filter(|id| !b.contains_key(*id))
        .chain(b.keys().filter(|id| !a.contains_key(*id)))
        .min()
    {
        return Err(BenchError::IdMismatch(id.to_string()));
    }

    let mut sim_diff = Vec::with_capacity(a.len());
    for (id, ra) in &a {
        let rb = b[id];
        let balance = match balances {
            None => None,
            Some(map) => Some(*map.get(*id).ok_or_else(|| BenchError::MissingBalance(id.to_string()))?),
        };
        sim_diff.push(PairedDiff {
            conflict_id: id.to_string(),
            sim_a: ra.sim_char,
            sim_b: rb.sim_char,
            diff: ra.sim_char - rb.sim_char,
            balance,
        });
    }

    let (mut wins_a, mut wins_b, mut ties) = (0, 0, 0);
    let mut histogram: Vec<BalanceBucket> = (0..BUCKETS)
        .map(|i| BalanceBucket {
            lower: -1.0 + i as f64 * BUCKET_WIDTH,
            upper: -1.0 + (i + 1) as f64 * BUCKET_WIDTH,
            a_wins: 0,
            b_wins: 0,
            ties: 0,
        })
        .collect();
    for d in &sim_diff {
        let bucket = d.balance.map(|bal| &mut histogram[bucket_of(bal)]);
        if d.diff > TIE_TOLERANCE {
            wins_a += 1;
            if let Some(b) = bucket {
                b.a_wins += 1;
            }
        } else if d.diff < -TIE_TOLERANCE {
            wins_b += 1;
            if let Some(b) = bucket {
                b.b_wins += 1;
            }
        } else {
            ties += 1;
            if let Some(b) = bucket {
                b.ties += 1;
            }
        }
    }
    if balances.is_none() {
        histogram.clear();
    }

    let diffs: Vec<f64> = sim_diff.iter().map(|d| d.diff).collect();
    let sims_a: Vec<f64> = sim_diff.iter().map(|d| d.sim_a).collect();
    let sims_b: Vec<f64> = sim_diff.iter().map(|d| d.sim_b).collect();
    let cles_a_over_b = if sim_diff.is_empty() { 0.5 } else { cles(&sims_a, &sims_b)? };

    let mut by_diff: Vec<&PairedDiff> = sim_diff.iter().collect();
    by_diff.sort_by(|x, y| y.diff.total_cmp(&x.diff).then_with(|| x.conflict_id.cmp(&y.conflict_id)));
    let a_best = by_diff.iter().take(m).map(|d| d.conflict_id.clone()).collect();
    by_diff.sort_by(|x, y| x.diff.total_cmp(&y.diff).then_with(|| x.conflict_id.cmp(&y.conflict_id)));
    let b_best = by_diff.iter().take(m).map(|d| d.conflict_id.clone()).collect();

    let resolver_of = |rows: &[ResultRow]| rows.first().map(|r| r.resolver_id.clone()).unwrap_or_default();
    Ok(ComparisonReport {
        resolver_a: resolver_of(rows_a),
        resolver_b: resolver_of(rows_b),
        n: sim_diff.len(),
        wins_a,
        wins_b,
        ties,
        wilcoxon_p: wilcoxon_signed_rank(&diffs),
        cles_a_over_b,
        sim_diff,
        balance_histogram: histogram,
        extremes: Extremes { a_best, b_best },
    })
}

pub fn write_sim_diff_csv<W: Write>(out: W, report: &ComparisonReport) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["conflict_id", "sim_a", "sim_b", "sim_diff", "balance"])?;
    for d in &report.sim_diff {
        w.write_record([
            d.conflict_id.clone(),
            d.sim_a.to_string(),
            d.sim_b.to_string(),
            d.diff.to_string(),
            d.balance.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_balance_csv<W: Write>(out: W, report: &ComparisonReport) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lower", "upper", "a_wins", "b_wins", "ties"])?;
    for b in &report.balance_histogram {
        w.write_record([
            format!("{:.1}", b.lower),
            format!("{:.1}", b.upper),
            b.a_wins.to_string(),
            b.b_wins.to_string(),
            b.ties.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::resolvers::Status;

    fn row(id: &str, sim: f64) -> ResultRow {
        ResultRow {
            conflict_id: id.into(),
            resolver_id: "r".into(),
            sim_line: sim,
            sim_char: sim,
            elapsed: 0.0,
            status: Status::Ok,
        }
    }

    #[test]
    fn identical_inputs_are_all_ties() {
        let rows: Vec<_> = (0..6).map(|i| row(&format!("c{i}"), i as f64 / 10.0)).collect();
        let r = compare_results(&rows, &rows, None, 2).unwrap();
        assert_eq!((r.wins_a, r.wins_b, r.ties, r.n), (0, 0, 6, 6));
        assert_eq!(r.cles_a_over_b, 0.5);
        assert_eq!(r.wilcoxon_p, 1.0);
        assert!(r.sim_diff.iter().all(|d| d.diff == 0.0));
        assert!(r.balance_histogram.is_empty());
    }

    #[test]
    fn mismatched_ids_name_the_first_one() {
        let a = [row("a", 1.0), row("b", 1.0), row("d", 1.0)];
        let b = [row("a", 1.0), row("c", 1.0), row("d", 1.0)];
        match compare_results(&a, &b, None, 1) {
            Err(BenchError::IdMismatch(id)) => assert_eq!(id, "b"),
            other => panic!("{other:?}"),
        }
        let dup = [row("a", 1.0), row("a", 0.0)];
        assert!(matches!(compare_results(&dup, &dup, None, 1), Err(BenchError::DuplicateId(_))));
    }

    #[test]
    fn buckets_cover_closed_interval() {
        assert_eq!(bucket_of(-1.0), 0);
        assert_eq!(bucket_of(-0.95), 0);
        assert_eq!(bucket_of(0.0), 10);
        assert_eq!(bucket_of(0.3), 13);
        assert_eq!(bucket_of(0.99), 19);
        assert_eq!(bucket_of(1.0), 19);
    }

    #[test]
    fn missing_balance_is_an_error() {
        let rows = [row("a", 1.0)];
        let balances = HashMap::new();
        assert!(matches!(
            compare_results(&rows, &rows, Some(&balances), 1),
            Err(BenchError::MissingBalance(_))
        ));
    }
}
