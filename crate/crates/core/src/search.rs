//! Search-based resolution of a single conflict chunk.
//!
//! A candidate resolution is an ordered selection of lines taken from the
//! two conflicting versions. Lines of the same version always keep their
//! original relative order; lines of different versions may interleave
//! freely. Candidates are scored by their mean line-level similarity to both
//! versions and improved with random-restart hill climbing over three
//! operators: add an unused line, remove a line, exchange two lines.

use std::collections::{HashMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chunk::ConflictChunk;
use crate::simkit::{lcs_length, ratio};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
    #[error("chunk has no lines on either side")]
    EmptyChunk,
    #[error("invalid candidate: {0}")]
    InvalidCandidate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Version {
    V1,
    V2,
}

/// A line of V1 or V2, by position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceLineRef {
    pub version: Version,
    pub index: usize,
}

impl SourceLineRef {
    pub fn v1(index: usize) -> Self {
        SourceLineRef {
            version: Version::V1,
            index,
        }
    }

    pub fn v2(index: usize) -> Self {
        SourceLineRef {
            version: Version::V2,
            index,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Candidate {
    pub elements: Vec<SourceLineRef>,
}

impl Candidate {
    pub fn new(elements: Vec<SourceLineRef>) -> Self {
        Candidate { elements }
    }

    /// All of V1 followed by all of V2.
    pub fn concatenation(chunk: &ConflictChunk) -> Self {
        let v1 = (0..chunk.v1.len()).map(SourceLineRef::v1);
        let v2 = (0..chunk.v2.len()).map(SourceLineRef::v2);
        Candidate::new(v1.chain(v2).collect())
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Checks bounds, uniqueness and the per-version order constraint.
    pub fn check(&self, chunk: &ConflictChunk) -> Result<(), SearchError> {
        let mut last: [Option<usize>; 2] = [None, None];
        for (pos, r) in self.elements.iter().enumerate() {
            let (slot, len) = match r.version {
                Version::V1 => (0, chunk.v1.len()),
                Version::V2 => (1, chunk.v2.len()),
            };
            if r.index >= len {
                return Err(SearchError::InvalidCandidate(format!(
                    "element {pos} refers to {:?}[{}] but that version has {len} lines",
                    r.version, r.index
                )));
            }
            if let Some(prev) = last[slot] {
                if r.index <= prev {
                    return Err(SearchError::InvalidCandidate(format!(
                        "element {pos} ({:?}[{}]) does not follow {:?}[{prev}]",
                        r.version, r.index, r.version
                    )));
                }
            }
            last[slot] = Some(r.index);
        }
        Ok(())
    }

    pub fn is_valid_for(&self, chunk: &ConflictChunk) -> bool {
        self.check(chunk).is_ok()
    }

    pub fn text<'c>(&self, chunk: &'c ConflictChunk) -> Vec<&'c str> {
        self.elements
            .iter()
            .map(|r| match r.version {
                Version::V1 => chunk.v1[r.index].as_str(),
                Version::V2 => chunk.v2[r.index].as_str(),
            })
            .collect()
    }

    pub fn lines(&self, chunk: &ConflictChunk) -> Vec<String> {
        self.text(chunk).into_iter().map(str::to_owned).collect()
    }
}

/// Mean line-level similarity of the candidate's text to V1 and to V2.
pub fn evaluate(c: &Candidate, chunk: &ConflictChunk) -> Result<f64, SearchError> {
    c.check(chunk)?;
    Ok(Interned::new(chunk).score(c))
}

/// Chunk lines mapped to small integer symbols so that scoring compares
/// integers instead of strings.
struct Interned {
    v1: Vec<u32>,
    v2: Vec<u32>,
}

impl Interned {
    fn new(chunk: &ConflictChunk) -> Self {
        let mut table: HashMap<&str, u32> = HashMap::new();
        let mut ids = [Vec::new(), Vec::new()];
        for (side, lines) in [&chunk.v1, &chunk.v2].into_iter().enumerate() {
            for l in lines {
                let next = table.len() as u32;
                ids[side].push(*table.entry(l.as_str()).or_insert(next));
            }
        }
        let [v1, v2] = ids;
        Interned { v1, v2 }
    }

    fn score(&self, c: &Candidate) -> f64 {
        let text: Vec<u32> = c
            .elements
            .iter()
            .map(|r| match r.version {
                Version::V1 => self.v1[r.index],
                Version::V2 => self.v2[r.index],
            })
            .collect();
        let s1 = ratio(lcs_length(&text, &self.v1), text.len(), self.v1.len());
        let s2 = ratio(lcs_length(&text, &self.v2), text.len(), self.v2.len());
        (s1 + s2) / 2.0
    }
}

/// Includes each source line with probability 1/2 and interleaves the
/// chosen lines uniformly at random among all order-preserving merges.
pub fn random_candidate<R: Rng + ?Sized>(chunk: &ConflictChunk, rng: &mut R) -> Candidate {
    let pick = |len: usize, rng: &mut R| -> Vec<usize> { (0..len).filter(|_| rng.gen_bool(0.5)).collect() };
    let a = pick(chunk.v1.len(), rng);
    let b = pick(chunk.v2.len(), rng);

    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let (ra, rb) = (a.len() - i, b.len() - j);
        // Taking from A with probability ra / (ra + rb) makes every merge
        // equally likely.
        if rng.gen_range(0..ra + rb) < ra {
            out.push(SourceLineRef::v1(a[i]));
            i += 1;
        } else {
            out.push(SourceLineRef::v2(b[j]));
            j += 1;
        }
    }
    out.extend(a[i..].iter().map(|&k| SourceLineRef::v1(k)));
    out.extend(b[j..].iter().map(|&k| SourceLineRef::v2(k)));
    Candidate::new(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Operator {
    Addition,
    Removal,
    Exchange,
}

/// Applies one operator chosen uniformly among the applicable ones.
///
/// The result is valid and differs from `c` whenever the chunk has at least
/// one line; with both versions empty `c` is returned unchanged.
pub fn neighbor<R: Rng + ?Sized>(c: &Candidate, chunk: &ConflictChunk, rng: &mut R) -> Candidate {
    let mut used = [vec![false; chunk.v1.len()], vec![false; chunk.v2.len()]];
    for r in &c.elements {
        used[slot(r.version)][r.index] = true;
    }
    let unused: Vec<SourceLineRef> = used[0]
        .iter()
        .enumerate()
        .filter(|(_, u)| !**u)
        .map(|(i, _)| SourceLineRef::v1(i))
        .chain(
            used[1]
                .iter()
                .enumerate()
                .filter(|(_, u)| !**u)
                .map(|(i, _)| SourceLineRef::v2(i)),
        )
        .collect();

    let mut ops = Vec::with_capacity(3);
    if !unused.is_empty() {
        ops.push(Operator::Addition);
    }
    if !c.is_empty() {
        ops.push(Operator::Removal);
    }
    if has_exchangeable_pair(c) {
        ops.push(Operator::Exchange);
    }

    while !ops.is_empty() {
        let k = rng.gen_range(0..ops.len());
        let applied = match ops[k] {
            Operator::Addition => Some(add_line(c, &unused, rng)),
            Operator::Removal => {
                let mut out = c.clone();
                out.elements.remove(rng.gen_range(0..c.len()));
                Some(out)
            }
            Operator::Exchange => exchange(c, rng),
        };
        match applied {
            Some(next) => return next,
            None => {
                ops.swap_remove(k);
            }
        }
    }
    c.clone()
}

fn slot(v: Version) -> usize {
    match v {
        Version::V1 => 0,
        Version::V2 => 1,
    }
}

fn add_line<R: Rng + ?Sized>(c: &Candidate, unused: &[SourceLineRef], rng: &mut R) -> Candidate {
    let line = unused[rng.gen_range(0..unused.len())];
    // Insertion window: after the same-version predecessor already in `c`,
    // up to and including the slot of its same-version successor.
    let mut lo = 0;
    let mut hi = c.len();
    for (pos, r) in c.elements.iter().enumerate() {
        if r.version != line.version {
            continue;
        }
        if r.index < line.index {
            lo = pos + 1;
        } else {
            hi = pos;
            break;
        }
    }
    let mut out = c.clone();
    out.elements.insert(rng.gen_range(lo..=hi), line);
    out
}

// A swap of positions i < j keeps the order constraint iff the two lines
// come from different versions and are adjacent: any line between them
// shares a version with one of the two and would end up on the wrong side.
fn swappable(c: &Candidate, i: usize, j: usize) -> bool {
    i.abs_diff(j) == 1 && c.elements[i].version != c.elements[j].version
}

fn has_exchangeable_pair(c: &Candidate) -> bool {
    c.elements.windows(2).any(|w| w[0].version != w[1].version)
}

fn exchange<R: Rng + ?Sized>(c: &Candidate, rng: &mut R) -> Option<Candidate> {
    let n = c.len();
    if n < 2 {
        return None;
    }
    for _ in 0..n * n {
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        if swappable(c, i, j) {
            let mut out = c.clone();
            out.elements.swap(i, j);
            return Some(out);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Budget {
    /// Wall-clock limit in seconds, checked between iterations.
    MaxExecutionTime(f64),
    /// Limit on scored candidates, checked after every evaluation.
    MaxEvaluations(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchParams {
    pub neighbors_per_iteration: usize,
    pub budget: Budget,
    pub max_stagnation_iterations: usize,
    pub top_n: usize,
    pub seed: u64,
}

impl Default for SearchParams {
    fn default() -> Self {
        SearchParams {
            neighbors_per_iteration: 5,
            budget: Budget::MaxExecutionTime(15.0),
            max_stagnation_iterations: 10,
            top_n: 100,
            seed: 0,
        }
    }
}

impl SearchParams {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |msg: &str| Err(SearchError::InvalidParams(msg.to_string()));
        if self.neighbors_per_iteration < 1 {
            return bad("neighbors_per_iteration must be at least 1");
        }
        if self.max_stagnation_iterations < 1 {
            return bad("max_stagnation_iterations must be at least 1");
        }
        if self.top_n < 1 {
            return bad("top_n must be at least 1");
        }
        match self.budget {
            Budget::MaxExecutionTime(t) if !(t.is_finite() && t > 0.0) => bad("max_execution_time must be positive"),
            Budget::MaxEvaluations(0) => bad("max_evaluations must be positive"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub candidate: Candidate,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Candidate,
    pub best_score: f64,
    /// Distinct candidates by descending score; ties keep discovery order.
    pub ranked: Vec<RankedCandidate>,
    pub evaluations: u64,
    pub restarts: u64,
    /// Seconds, as measured by the search clock.
    pub elapsed: f64,
    /// `(evaluation number, score)` each time the best score improved.
    pub improvements: Vec<(u64, f64)>,
}

/// Source of monotonic time for the execution-time budget.
pub trait Clock {
    fn now(&self) -> Duration;
}

#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        MonotonicClock { origin: Instant::now() }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// Advances by a fixed step every time it is read.
#[derive(Debug, Default)]
pub struct SteppingClock {
    nanos: AtomicU64,
    step: u64,
}

impl SteppingClock {
    pub fn new(step: Duration) -> Self {
        SteppingClock {
            nanos: AtomicU64::new(0),
            step: step.as_nanos() as u64,
        }
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> Duration {
        Duration::from_nanos(self.nanos.fetch_add(self.step, Ordering::Relaxed))
    }
}

struct TopN {
    cap: usize,
    items: Vec<RankedCandidate>,
    members: HashSet<Vec<SourceLineRef>>,
}

impl TopN {
    fn new(cap: usize) -> Self {
        TopN {
            cap,
            items: Vec::with_capacity(cap + 1),
            members: HashSet::new(),
        }
    }

    fn offer(&mut self, c: &Candidate, score: f64) {
        if self.items.len() == self.cap && self.items.last().is_some_and(|last| score <= last.score) {
            return;
        }
        if self.members.contains(&c.elements) {
            return;
        }
        let pos = self.items.partition_point(|it| it.score >= score);
        self.items.insert(
            pos,
            RankedCandidate {
                candidate: c.clone(),
                score,
            },
        );
        self.members.insert(c.elements.clone());
        if self.items.len() > self.cap {
            let evicted = self.items.pop().expect("over capacity");
            self.members.remove(&evicted.candidate.elements);
        }
    }
}

struct Run<'a> {
    chunk: &'a ConflictChunk,
    interned: Interned,
    top: TopN,
    best: Candidate,
    best_score: f64,
    evaluations: u64,
    improvements: Vec<(u64, f64)>,
}

impl Run<'_> {
    fn score(&mut self, c: &Candidate) -> f64 {
        debug_assert!(c.is_valid_for(self.chunk), "search produced {c:?}");
        let s = self.interned.score(c);
        self.evaluations += 1;
        self.top.offer(c, s);
        if s > self.best_score {
            self.best = c.clone();
            self.best_score = s;
            self.improvements.push((self.evaluations, s));
        }
        s
    }
}

/// Random-restart hill climbing with the process monotonic clock.
pub fn rrhc_resolve(chunk: &ConflictChunk, params: &SearchParams) -> Result<SearchResult, SearchError> {
    rrhc_resolve_with_clock(chunk, params, &MonotonicClock::new())
}

/// Random-restart hill climbing.
///
/// The first climb starts from the V1-then-V2 concatenation. Each iteration
/// scores `k` neighbors of the current candidate and moves to the best one
/// (first drawn wins ties) only if it is strictly better. After `S`
/// consecutive iterations without a move the climb restarts from a random
/// candidate.
pub fn rrhc_resolve_with_clock(
    chunk: &ConflictChunk,
    params: &SearchParams,
    clock: &dyn Clock,
) -> Result<SearchResult, SearchError> {
    params.validate()?;
    if chunk.is_empty() {
        return Err(SearchError::EmptyChunk);
    }
    let started = clock.now();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut run = Run {
        chunk,
        interned: Interned::new(chunk),
        top: TopN::new(params.top_n),
        best: Candidate::default(),
        best_score: f64::NEG_INFINITY,
        evaluations: 0,
        improvements: Vec::new(),
    };
    let evals_exhausted = |run: &Run| matches!(params.budget, Budget::MaxEvaluations(max) if run.evaluations >= max);
    let time_exhausted = || match params.budget {
        Budget::MaxExecutionTime(secs) => (clock.now() - started).as_secs_f64() >= secs,
        Budget::MaxEvaluations(_) => false,
    };

    let mut current = Candidate::concatenation(chunk);
    let mut current_score = run.score(&current);
    let mut stagnation = 0;
    let mut restarts = 0;

    'search: while !evals_exhausted(&run) && !time_exhausted() {
        let mut best_neighbor: Option<(Candidate, f64)> = None;
        for _ in 0..params.neighbors_per_iteration {
            if evals_exhausted(&run) {
                break 'search;
            }
            let next = neighbor(&current, chunk, &mut rng);
            let s = run.score(&next);
            if best_neighbor.as_ref().is_none_or(|(_, bs)| s > *bs) {
                best_neighbor = Some((next, s));
            }
        }
        match best_neighbor {
            Some((next, s)) if s > current_score => {
                current = next;
                current_score = s;
                stagnation = 0;
            }
            _ => stagnation += 1,
        }
        if stagnation >= params.max_stagnation_iterations {
            if evals_exhausted(&run) {
                break;
            }
            current = random_candidate(chunk, &mut rng);
            current_score = run.score(&current);
            restarts += 1;
            stagnation = 0;
        }
    }

    Ok(SearchResult {
        best: run.best,
        best_score: run.best_score,
        ranked: run.top.items,
        evaluations: run.evaluations,
        restarts,
        elapsed: (clock.now() - started).as_secs_f64(),
        improvements: run.improvements,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk(v1: &[&str], v2: &[&str]) -> ConflictChunk {
        ConflictChunk::new(v1.iter().copied(), v2.iter().copied())
    }

    fn evals(n: u64) -> SearchParams {
        SearchParams {
            budget: Budget::MaxEvaluations(n),
            ..SearchParams::default()
        }
    }

    #[test]
    fn evaluate_examples() {
        let ch = chunk(&["x"], &["y"]);
        let both = Candidate::new(vec![SourceLineRef::v1(0), SourceLineRef::v2(0)]);
        assert!((evaluate(&both, &ch).unwrap() - 2.0 / 3.0).abs() < 1e-9);

        let ch = chunk(&["a", "b"], &["c"]);
        let v1_only = Candidate::new(vec![SourceLineRef::v1(0), SourceLineRef::v1(1)]);
        assert_eq!(evaluate(&v1_only, &ch).unwrap(), 0.5);
        assert_eq!(evaluate(&Candidate::default(), &ch).unwrap(), 0.0);
    }

    #[test]
    fn evaluate_rejects_invalid_candidates() {
        let ch = chunk(&["a", "b"], &["c"]);
        let reversed = Candidate::new(vec![SourceLineRef::v1(1), SourceLineRef::v1(0)]);
        assert!(matches!(evaluate(&reversed, &ch), Err(SearchError::InvalidCandidate(_))));
        let twice = Candidate::new(vec![SourceLineRef::v2(0), SourceLineRef::v2(0)]);
        assert!(evaluate(&twice, &ch).is_err());
        let out_of_range = Candidate::new(vec![SourceLineRef::v2(1)]);
        assert!(evaluate(&out_of_range, &ch).is_err());
    }

    #[test]
    fn random_candidate_one_sided() {
        let ch = chunk(&[], &["y"]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut seen = [0usize; 2];
        for _ in 0..2000 {
            seen[random_candidate(&ch, &mut rng).len()] += 1;
        }
        assert!(seen[0] > 800 && seen[1] > 800, "{seen:?}");
        let a = random_candidate(&ch, &mut ChaCha8Rng::seed_from_u64(9));
        let b = random_candidate(&ch, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn neighbor_of_empty_adds_one_line() {
        let ch = chunk(&["a", "b"], &["c"]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            assert_eq!(neighbor(&Candidate::default(), &ch, &mut rng).len(), 1);
        }
    }

    #[test]
    fn neighbor_of_full_concatenation_never_adds() {
        let ch = chunk(&["a", "b"], &["c", "d"]);
        let full = Candidate::concatenation(&ch);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut lens = HashSet::new();
        for _ in 0..200 {
            let n = neighbor(&full, &ch, &mut rng);
            assert!(n.is_valid_for(&ch));
            assert_ne!(n, full);
            lens.insert(n.len());
        }
        // Removal (3 lines) and exchange (4 lines) both show up.
        assert_eq!(lens, HashSet::from([3, 4]));
    }

    #[test]
    fn neighbor_with_no_lines_is_identity() {
        let ch = chunk(&[], &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(neighbor(&Candidate::default(), &ch, &mut rng), Candidate::default());
    }

    #[test]
    fn identical_versions_reach_perfect_score() {
        let ch = chunk(&["x"], &["x"]);
        let r = rrhc_resolve(&ch, &evals(50)).unwrap();
        assert_eq!(r.best_score, 1.0);
        assert_eq!(r.best.len(), 1);
        assert_eq!(r.ranked[0].candidate, r.best);
    }

    #[test]
    fn single_evaluation_returns_concatenation() {
        let ch = chunk(&["a", "b"], &["c"]);
        let r = rrhc_resolve(&ch, &evals(1)).unwrap();
        assert_eq!(r.evaluations, 1);
        assert_eq!(r.best, Candidate::concatenation(&ch));
        assert_eq!(r.ranked.len(), 1);
    }

    #[test]
    fn parameter_and_chunk_errors() {
        let ch = chunk(&["a"], &["b"]);
        let mut p = evals(10);
        p.neighbors_per_iteration = 0;
        assert!(matches!(rrhc_resolve(&ch, &p), Err(SearchError::InvalidParams(_))));
        let mut p = evals(10);
        p.max_stagnation_iterations = 0;
        assert!(rrhc_resolve(&ch, &p).is_err());
        assert!(rrhc_resolve(&ch, &evals(0)).is_err());
        let p = SearchParams {
            budget: Budget::MaxExecutionTime(0.0),
            ..SearchParams::default()
        };
        assert!(rrhc_resolve(&ch, &p).is_err());
        assert_eq!(rrhc_resolve(&chunk(&[], &[]), &evals(10)), Err(SearchError::EmptyChunk));
    }

    #[test]
    fn time_budget_uses_injected_clock() {
        let ch = chunk(&["a", "b", "c"], &["a", "d"]);
        let p = SearchParams {
            budget: Budget::MaxExecutionTime(1.0),
            ..SearchParams::default()
        };
        // Each clock read advances 100 ms: start, then one read per loop check.
        let clock = SteppingClock::new(Duration::from_millis(100));
        let r = rrhc_resolve_with_clock(&ch, &p, &clock).unwrap();
        assert_eq!(r.evaluations, 1 + 9 * 5);
    }

    #[test]
    fn ranked_list_is_sorted_and_distinct() {
        let ch = chunk(&["a", "b", "c", "d"], &["a", "x", "c", "y"]);
        let p = SearchParams {
            top_n: 15,
            ..evals(3000)
        };
        let r = rrhc_resolve(&ch, &p).unwrap();
        assert_eq!(r.ranked.len(), 15);
        assert!(r.ranked.windows(2).all(|w| w[0].score >= w[1].score));
        let distinct: HashSet<_> = r.ranked.iter().map(|x| &x.candidate).collect();
        assert_eq!(distinct.len(), r.ranked.len());
        assert_eq!(r.ranked[0].candidate, r.best);
        assert_eq!(r.ranked[0].score, r.best_score);
        assert!(r.improvements.windows(2).all(|w| w[0].1 < w[1].1));
    }
}
