//! Independent reference implementations shared by the integration tests.
//!
//! Everything here is written the slow, obvious way on purpose and only
//! depends on the library for plain data types.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::Rng;
use sbcr::search::{Candidate, SourceLineRef, Version};
use sbcr::ConflictChunk;

pub fn sample_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/sample50.jsonl")
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

/// LCS length by memoised recursion on suffix positions.
pub fn lcs_memo<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            1 + go(a, b, i + 1, j + 1, memo)
        } else {
            go(a, b, i + 1, j, memo).max(go(a, b, i, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

pub fn similarity_oracle<T: PartialEq>(a: &[T], b: &[T]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    2.0 * lcs_memo(a, b) as f64 / (a.len() + b.len()) as f64
}

pub fn char_similarity_oracle(a: &[String], b: &[String]) -> f64 {
    let a: Vec<char> = a.join("\n").chars().collect();
    let b: Vec<char> = b.join("\n").chars().collect();
    similarity_oracle(&a, &b)
}

/// Objective value of a line sequence: mean line similarity to both versions.
pub fn objective_oracle(lines: &[String], chunk: &ConflictChunk) -> f64 {
    (similarity_oracle(lines, &chunk.v1) + similarity_oracle(lines, &chunk.v2)) / 2.0
}

/// Every candidate of the chunk: each order-preserving choice of source
/// lines, as reference sequences. Each distinct sequence appears once.
pub fn all_candidates(chunk: &ConflictChunk) -> Vec<Vec<SourceLineRef>> {
    fn go(n1: usize, n2: usize, i: usize, j: usize, cur: &mut Vec<SourceLineRef>, out: &mut Vec<Vec<SourceLineRef>>) {
        out.push(cur.clone());
        for k in i..n1 {
            cur.push(SourceLineRef::v1(k));
            go(n1, n2, k + 1, j, cur, out);
            cur.pop();
        }
        for k in j..n2 {
            cur.push(SourceLineRef::v2(k));
            go(n1, n2, i, k + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(chunk.v1.len(), chunk.v2.len(), 0, 0, &mut Vec::new(), &mut out);
    out
}

pub fn ref_text(chunk: &ConflictChunk, refs: &[SourceLineRef]) -> Vec<String> {
    refs.iter()
        .map(|r| match r.version {
            Version::V1 => chunk.v1[r.index].clone(),
            Version::V2 => chunk.v2[r.index].clone(),
        })
        .collect()
}

/// Best objective value over the whole search space.
pub fn brute_force_optimum(chunk: &ConflictChunk) -> f64 {
    all_candidates(chunk)
        .iter()
        .map(|refs| objective_oracle(&ref_text(chunk, refs), chunk))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Whether `lines` is the text of some candidate, by enumeration.
pub fn is_shuffle_oracle(lines: &[String], v1: &[String], v2: &[String]) -> bool {
    let chunk = ConflictChunk::new(v1.to_vec(), v2.to_vec());
    all_candidates(&chunk)
        .iter()
        .any(|refs| refs.len() == lines.len() && ref_text(&chunk, refs) == lines)
}

/// Reports why a candidate is not a valid ordered selection of source lines.
pub fn candidate_violation(c: &Candidate, chunk: &ConflictChunk) -> Option<String> {
    let mut last: [Option<usize>; 2] = [None, None];
    for (pos, r) in c.elements.iter().enumerate() {
        let (slot, len) = match r.version {
            Version::V1 => (0, chunk.v1.len()),
            Version::V2 => (1, chunk.v2.len()),
        };
        if r.index >= len {
            return Some(format!("position {pos}: index {} out of range", r.index));
        }
        if let Some(prev) = last[slot] {
            if r.index == prev {
                return Some(format!("position {pos}: duplicate reference {r:?}"));
            }
            if r.index < prev {
                return Some(format!("position {pos}: {r:?} after index {prev}"));
            }
        }
        last[slot] = Some(r.index);
    }
    None
}

/// Chunk over a small alphabet so that duplicate lines are common.
pub fn random_chunk<R: Rng>(rng: &mut R, max_side: usize, alphabet: usize) -> ConflictChunk {
    let side = |rng: &mut R| -> Vec<String> {
        let n = rng.gen_range(0..=max_side);
        (0..n).map(|_| format!("line {}", rng.gen_range(0..alphabet))).collect()
    };
    let v1 = side(rng);
    let v2 = side(rng);
    ConflictChunk::new(v1, v2)
}

/// Average ranks (1-based) of `values`, ties sharing the mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn signed_rank_setup(diffs: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let nonzero: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let abs: Vec<f64> = nonzero.iter().map(|d| d.abs()).collect();
    (average_ranks(&abs), nonzero.iter().map(|d| *d > 0.0).collect())
}

/// Two-sided signed-rank p-value by enumerating all 2^n sign assignments.
pub fn wilcoxon_enumeration(diffs: &[f64]) -> f64 {
    let (ranks, positive) = signed_rank_setup(diffs);
    let n = ranks.len();
    if n == 0 {
        return 1.0;
    }
    assert!(n <= 20, "enumeration oracle is exponential");
    let total: f64 = ranks.iter().sum();
    let observed: f64 = ranks.iter().zip(&positive).filter(|(_, p)| **p).map(|(r, _)| r).sum();
    let obs_dev = (2.0 * observed - total).abs();
    let mut extreme = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| ranks[k]).sum();
        if (2.0 * w - total).abs() >= obs_dev - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / (1u64 << n) as f64
}

/// Two-sided signed-rank p-value estimated from random sign flips.
pub fn wilcoxon_monte_carlo<R: Rng>(diffs: &[f64], resamples: usize, rng: &mut R) -> f64 {
    let (ranks, positive) = signed_rank_setup(diffs);
    let total: f64 = ranks.iter().sum();
    let observed: f64 = ranks.iter().zip(&positive).filter(|(_, p)| **p).map(|(r, _)| r).sum();
    let obs_dev = (2.0 * observed - total).abs();
    let mut extreme = 0usize;
    for _ in 0..resamples {
        let w: f64 = ranks.iter().filter(|_| rng.gen_bool(0.5)).sum();
        if (2.0 * w - total).abs() >= obs_dev - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / resamples as f64
}

/// `(wins, ties)` over all cross pairs.
pub fn pair_counts(a: &[f64], b: &[f64]) -> (u64, u64) {
    let (mut wins, mut ties) = (0, 0);
    for x in a {
        for y in b {
            if x > y {
                wins += 1;
            } else if x == y {
                ties += 1;
            }
        }
    }
    (wins, ties)
}

/// A conflicted file and the chunk contents it was built from.
pub struct GeneratedFile {
    pub text: String,
    pub chunks: Vec<ConflictChunk>,
    pub crlf: bool,
}

const WORDS: [&str; 12] = [
    "int", "value", "return", "{", "}", "foo(bar);", "// note", "x = y + 1;", "if (ok)", "list.add(item);", "", "\t",
];

fn code_line<R: Rng>(rng: &mut R) -> String {
    let n = rng.gen_range(0..4);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Well-formed conflicted file with 1 to 4 chunks.
pub fn generate_conflicted_file<R: Rng>(rng: &mut R, crlf: bool, diff3: bool) -> GeneratedFile {
    let nl = if crlf { "\r\n" } else { "\n" };
    let mut text = String::new();
    let mut chunks = Vec::new();
    let block = |rng: &mut R, text: &mut String| -> Vec<String> {
        let lines: Vec<String> = (0..rng.gen_range(0..5)).map(|_| code_line(rng)).collect();
        for l in &lines {
            text.push_str(l);
            text.push_str(nl);
        }
        lines
    };
    for _ in 0..rng.gen_range(1..=4) {
        block(rng, &mut text);
        text.push_str(&format!("<<<<<<< {}{nl}", ["HEAD", "ours", "feature/x"].choose(rng).unwrap()));
        let v1 = block(rng, &mut text);
        let base = diff3.then(|| {
            text.push_str(&format!("||||||| merged common ancestors{nl}"));
            block(rng, &mut text)
        });
        text.push_str(&format!("======={nl}"));
        let v2 = block(rng, &mut text);
        text.push_str(&format!(">>>>>>> {}{nl}", ["theirs", "origin/main", "1a2b3c4"].choose(rng).unwrap()));
        let mut chunk = ConflictChunk::new(v1, v2);
        chunk.base = base;
        chunks.push(chunk);
    }
    block(rng, &mut text);
    if rng.gen_bool(0.3) {
        text.push('}');
    }
    GeneratedFile { text, chunks, crlf }
}
