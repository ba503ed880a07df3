//! Conflict datasets: ingestion with validation filters, commit-level
//! deduplication across datasets, and seeded train/valid/test splits.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::chunk::ConflictChunk;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("invalid split ratios {0:?}: must be non-negative and sum to 1")]
    InvalidRatios([f64; 3]),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum Language {
    Java,
    CSharp,
    JavaScript,
    TypeScript,
    #[default]
    Other,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::Java => "Java",
            Language::CSharp => "CSharp",
            Language::JavaScript => "JavaScript",
            Language::TypeScript => "TypeScript",
            Language::Other => "Other",
        }
    }

    /// Lenient name lookup; anything unrecognised is `Other`.
    pub fn from_name(name: &str) -> Language {
        match name.trim().to_ascii_lowercase().as_str() {
            "java" => Language::Java,
            "csharp" | "c#" | "cs" => Language::CSharp,
            "javascript" | "js" => Language::JavaScript,
            "typescript" | "ts" => Language::TypeScript,
            _ => Language::Other,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Language {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Language {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let name = String::deserialize(d)?;
        Ok(Language::from_name(&name))
    }
}

/// One real-world conflict chunk with its developer resolution.
///
/// Serialized as one JSON object per line; line arrays hold lines without
/// their terminators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictRecord {
    pub id: String,
    #[serde(default)]
    pub project: String,
    #[serde(rename = "commit", default)]
    pub commit_hash: String,
    #[serde(rename = "path", default)]
    pub file_path: String,
    #[serde(default)]
    pub language: Language,
    #[serde(rename = "base", default)]
    pub base_lines: Option<Vec<String>>,
    #[serde(rename = "v1")]
    pub v1_lines: Vec<String>,
    #[serde(rename = "v2")]
    pub v2_lines: Vec<String>,
    #[serde(rename = "resolution", default)]
    pub resolution_lines: Vec<String>,
}

impl ConflictRecord {
    pub fn chunk(&self) -> ConflictChunk {
        ConflictChunk {
            base: self.base_lines.clone(),
            v1: self.v1_lines.clone(),
            v2: self.v2_lines.clone(),
        }
    }

    /// True when every resolution line (counted with multiplicity) can be
    /// taken from a distinct line of V1 or V2.
    pub fn is_combination(&self) -> bool {
        is_multiset_contained(&self.resolution_lines, &self.v1_lines, &self.v2_lines)
    }
}

fn is_multiset_contained(needles: &[String], v1: &[String], v2: &[String]) -> bool {
    let mut available: HashMap<&str, usize> = HashMap::new();
    for line in v1.iter().chain(v2) {
        *available.entry(line.as_str()).or_default() += 1;
    }
    for line in needles {
        match available.get_mut(line.as_str()) {
            Some(n) if *n > 0 => *n -= 1,
            _ => return false,
        }
    }
    true
}

/// Which validation filters `ingest_records` applies beyond the structural
/// checks that always run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterFlags {
    /// Reject records whose resolution uses lines absent from both versions.
    pub combination: bool,
    /// Reject records whose resolution reorders lines within a version.
    pub partial_order: bool,
}

impl Default for FilterFlags {
    fn default() -> Self {
        FilterFlags {
            combination: true,
            partial_order: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectReason {
    EmptyBothSides,
    NotCombination,
    NotPartialOrder,
    Malformed,
    DuplicateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionReport {
    /// 1-based line number within the input stream.
    pub line: usize,
    pub id: Option<String>,
    pub reason: RejectReason,
    pub detail: String,
}

/// Reads line-delimited JSON records and splits them into accepted records
/// and per-record rejections. Blank lines are skipped. Only an I/O failure
/// aborts the stream.
pub fn ingest_records<R: BufRead>(
    stream: R,
    filters: FilterFlags,
) -> Result<(Vec<ConflictRecord>, Vec<RejectionReport>), CorpusError> {
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    let mut seen_ids = HashSet::new();

    for (idx, line) in stream.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: ConflictRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                rejected.push(RejectionReport {
                    line: lineno,
                    id: None,
                    reason: RejectReason::Malformed,
                    detail: e.to_string(),
                });
                continue;
            }
        };
        let reject = |reason, detail: &str| RejectionReport {
            line: lineno,
            id: Some(record.id.clone()),
            reason,
            detail: detail.to_string(),
        };
        if !seen_ids.insert(record.id.clone()) {
            rejected.push(reject(RejectReason::DuplicateId, "id already seen earlier in the stream"));
            continue;
        }
        if let Some(report) = validate(&record, filters).map(|(r, d)| reject(r, d)) {
            rejected.push(report);
            continue;
        }
        accepted.push(record);
    }
    Ok((accepted, rejected))
}

/// Applies the per-record checks of `ingest_records`, returning the first
/// failing reason.
pub fn validate(record: &ConflictRecord, filters: FilterFlags) -> Option<(RejectReason, &'static str)> {
    if record.v1_lines.is_empty() && record.v2_lines.is_empty() {
        return Some((RejectReason::EmptyBothSides, "both versions are empty"));
    }
    if filters.combination && !record.is_combination() {
        return Some((
            RejectReason::NotCombination,
            "resolution contains a line absent from both versions",
        ));
    }
    if filters.partial_order
        && !preserves_partial_order(&record.resolution_lines, &record.v1_lines, &record.v2_lines)
    {
        return Some((
            RejectReason::NotPartialOrder,
            "resolution reorders lines within a version",
        ));
    }
    None
}

/// Writes records as line-delimited JSON.
pub fn write_records<W: Write>(mut out: W, records: &[ConflictRecord]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn write_rejections<W: Write>(mut out: W, reports: &[RejectionReport]) -> io::Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Whether `resolution` can be produced by deleting lines from `v1` and `v2`
/// and interleaving the survivors without reordering lines of either version.
///
/// Lines are matched by position: a duplicated text in one version can be
/// used at most as many times as it occurs there.
pub fn preserves_partial_order<S: AsRef<str>>(resolution: &[S], v1: &[S], v2: &[S]) -> bool {
    let (n1, n2) = (v1.len(), v2.len());
    let width = n2 + 1;
    // `layer[i * width + j]`: the resolution prefix matched so far can end
    // with exactly i lines of v1 and j lines of v2 consumed.
    let mut layer = vec![false; (n1 + 1) * width];
    layer[0] = true;
    let mut next = vec![false; layer.len()];

    for target in resolution {
        let target = target.as_ref();
        next.iter_mut().for_each(|b| *b = false);
        let mut any = false;
        for i in 0..=n1 {
            for j in 0..=n2 {
                if !layer[i * width + j] {
                    continue;
                }
                // Matching the earliest remaining occurrence dominates any
                // later one, so only that successor is recorded per side.
                if let Some(k) = (i..n1).find(|&k| v1[k].as_ref() == target) {
                    next[(k + 1) * width + j] = true;
                    any = true;
                }
                if let Some(k) = (j..n2).find(|&k| v2[k].as_ref() == target) {
                    next[i * width + k + 1] = true;
                    any = true;
                }
            }
        }
        if !any {
            return false;
        }
        std::mem::swap(&mut layer, &mut next);
    }
    true
}

/// Merges two datasets, dropping every record whose commit hash occurs in
/// both of them.
pub fn dedupe_by_commit(records_a: Vec<ConflictRecord>, records_b: Vec<ConflictRecord>) -> Vec<ConflictRecord> {
    let hashes_a: HashSet<&str> = records_a.iter().map(|r| r.commit_hash.as_str()).collect();
    let shared: HashSet<String> = records_b
        .iter()
        .map(|r| r.commit_hash.as_str())
        .filter(|h| hashes_a.contains(h))
        .map(str::to_owned)
        .collect();
    records_a
        .into_iter()
        .chain(records_b)
        .filter(|r| !shared.contains(&r.commit_hash))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train_ids: Vec<String>,
    pub valid_ids: Vec<String>,
    pub test_ids: Vec<String>,
    pub seed: u64,
    pub ratios: [f64; 3],
}

/// Seeded shuffle followed by floor cuts at `n * r_train` and
/// `n * (r_train + r_valid)`; the remainder is the test set.
pub fn split_dataset(ids: &[String], seed: u64, ratios: [f64; 3]) -> Result<DatasetSplit, CorpusError> {
    let sum: f64 = ratios.iter().sum();
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
        return Err(CorpusError::InvalidRatios(ratios));
    }
    let mut shuffled = ids.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let n = shuffled.len();
    // The epsilon absorbs representation error such as 0.8 + 0.1 != 0.9.
    let cut = |r: f64| ((n as f64 * r + 1e-9).floor() as usize).min(n);
    let first = cut(ratios[0]);
    let second = cut(ratios[0] + ratios[1]).max(first);

    let test_ids = shuffled.split_off(second);
    let valid_ids = shuffled.split_off(first);
    Ok(DatasetSplit {
        train_ids: shuffled,
        valid_ids,
        test_ids,
        seed,
        ratios,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, commit: &str, v1: &[&str], v2: &[&str], res: &[&str]) -> ConflictRecord {
        let own = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        ConflictRecord {
            id: id.into(),
            project: "p".into(),
            commit_hash: commit.into(),
            file_path: "A.java".into(),
            language: Language::Java,
            base_lines: None,
            v1_lines: own(v1),
            v2_lines: own(v2),
            resolution_lines: own(res),
        }
    }

    fn ingest_str(input: &str, filters: FilterFlags) -> (Vec<ConflictRecord>, Vec<RejectionReport>) {
        ingest_records(input.as_bytes(), filters).unwrap()
    }

    #[test]
    fn empty_both_sides_is_rejected() {
        let line = r#"{"id":"a","v1":[],"v2":[],"resolution":[]}"#;
        let (ok, bad) = ingest_str(line, FilterFlags::default());
        assert!(ok.is_empty());
        assert_eq!(bad[0].reason, RejectReason::EmptyBothSides);
        assert_eq!(bad[0].id.as_deref(), Some("a"));
    }

    #[test]
    fn one_sided_chunk_with_kept_annotation_is_accepted() {
        let v2 = [
            "",
            "    /**",
            "     * For testing",
            "     */",
            "    ChronicleMapBuilder<K, V> forceReplicatedImpl() {",
            "        this.forceReplicatedImpl = true;",
            "        return this;",
            "    }",
            "",
            "    @Override",
        ];
        let r = rec("l1", "9d8e848", &[], &v2, &["    @Override"]);
        let line = serde_json::to_string(&r).unwrap();
        let (ok, bad) = ingest_str(&line, FilterFlags::default());
        assert!(bad.is_empty(), "{bad:?}");
        assert_eq!(ok, vec![r]);
    }

    #[test]
    fn combination_filter_toggles() {
        let r = rec("n", "h", &["a"], &["b"], &["a", "brand new"]);
        let line = serde_json::to_string(&r).unwrap();
        let (ok, bad) = ingest_str(&line, FilterFlags::default());
        assert!(ok.is_empty());
        assert_eq!(bad[0].reason, RejectReason::NotCombination);
        let off = FilterFlags {
            combination: false,
            partial_order: false,
        };
        let (ok, bad) = ingest_str(&line, off);
        assert_eq!(ok.len(), 1);
        assert!(bad.is_empty());
    }

    #[test]
    fn combination_counts_multiplicity() {
        assert!(rec("x", "h", &["a"], &["a"], &["a", "a"]).is_combination());
        assert!(!rec("x", "h", &["a"], &["b"], &["a", "a"]).is_combination());
    }

    #[test]
    fn malformed_and_duplicate_lines_are_reported_not_fatal() {
        let input = [
            r#"{"id":"a","v1":["x"],"v2":[],"resolution":["x"]}"#,
            "{not json",
            "",
            r#"{"id":"a","v1":["y"],"v2":[],"resolution":[]}"#,
            r#"{"id":"b","v2":["y"]}"#,
            r#"{"id":"c","v1":["y"],"v2":["z"],"language":"c#"}"#,
        ]
        .join("\n");
        let (ok, bad) = ingest_str(&input, FilterFlags::default());
        assert_eq!(ok.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["a", "c"]);
        assert_eq!(ok[0].v1_lines, ["x"]);
        assert_eq!(ok[1].language, Language::CSharp);
        let reasons: Vec<_> = bad.iter().map(|r| (r.line, r.reason)).collect();
        assert_eq!(
            reasons,
            [
                (2, RejectReason::Malformed),
                (4, RejectReason::DuplicateId),
                (5, RejectReason::Malformed)
            ]
        );
    }

    #[test]
    fn partial_order_filter_is_opt_in() {
        let r = rec("r", "h", &["a", "b"], &[], &["b", "a"]);
        let line = serde_json::to_string(&r).unwrap();
        assert_eq!(ingest_str(&line, FilterFlags::default()).0.len(), 1);
        let strict = FilterFlags {
            combination: true,
            partial_order: true,
        };
        assert_eq!(ingest_str(&line, strict).1[0].reason, RejectReason::NotPartialOrder);
    }

    #[test]
    fn partial_order_examples() {
        assert!(preserves_partial_order(&["a", "c", "b"], &["a", "b"], &["c"]));
        assert!(!preserves_partial_order(&["b", "a"], &["a", "b"], &[]));
        assert!(preserves_partial_order::<&str>(&[], &["a"], &["b"]));
        assert!(preserves_partial_order::<&str>(&[], &[], &[]));
        // Duplicates: "a" must come from two different positions.
        assert!(preserves_partial_order(&["a", "b", "a"], &["a", "b"], &["a"]));
        assert!(!preserves_partial_order(&["a", "a", "a"], &["a", "b"], &["a"]));
        // Greedy on v1 alone would consume "x" too early.
        assert!(preserves_partial_order(&["x", "y", "x"], &["x", "y"], &["x"]));
    }

    #[test]
    fn dedupe_examples() {
        let a = vec![rec("a1", "H", &["x"], &[], &[]), rec("a2", "K", &["x"], &[], &[])];
        let b = vec![rec("b1", "H", &["x"], &[], &[]), rec("b2", "L", &["x"], &[], &[])];
        let ids: Vec<_> = dedupe_by_commit(a.clone(), b.clone()).into_iter().map(|r| r.id).collect();
        assert_eq!(ids, ["a2", "b2"]);
        assert_eq!(dedupe_by_commit(Vec::new(), b.clone()), b);
        let c = vec![rec("c1", "M", &["x"], &[], &[])];
        assert_eq!(dedupe_by_commit(a.clone(), c.clone()).len(), 3);
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("id{i}")).collect()
    }

    #[test]
    fn split_sizes_follow_floor_cuts() {
        let s = split_dataset(&ids(100), 7, [0.8, 0.1, 0.1]).unwrap();
        assert_eq!((s.train_ids.len(), s.valid_ids.len(), s.test_ids.len()), (80, 10, 10));
        let s = split_dataset(&ids(5), 7, [0.8, 0.1, 0.1]).unwrap();
        assert_eq!((s.train_ids.len(), s.valid_ids.len(), s.test_ids.len()), (4, 0, 1));
        let s = split_dataset(&[], 7, [0.8, 0.1, 0.1]).unwrap();
        assert!(s.train_ids.is_empty() && s.valid_ids.is_empty() && s.test_ids.is_empty());
    }

    #[test]
    fn split_is_deterministic_and_rejects_bad_ratios() {
        let a = split_dataset(&ids(37), 42, [0.8, 0.1, 0.1]).unwrap();
        let b = split_dataset(&ids(37), 42, [0.8, 0.1, 0.1]).unwrap();
        assert_eq!(a, b);
        assert!(split_dataset(&ids(3), 1, [0.5, 0.5, 0.5]).is_err());
        assert!(split_dataset(&ids(3), 1, [1.2, -0.1, -0.1]).is_err());
    }
}
