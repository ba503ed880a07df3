mod common;

use std::collections::HashSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sbcr::bench::{cles, compare_results, ResultRow};
use sbcr::corpus::{dedupe_by_commit, ingest_records, split_dataset, write_records, ConflictRecord, FilterFlags, Language};
use sbcr::parser::parse_conflicted_file;
use sbcr::resolvers::Status;
use sbcr::search::{evaluate, random_candidate, rrhc_resolve, Budget, SearchParams, Version};
use sbcr::simkit::{similarity, Granularity};
use sbcr::ConflictChunk;

use common::*;

fn lines(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "a b", "", "ß"]).prop_map(String::from), 0..max)
}

fn chunk(max: usize) -> impl Strategy<Value = ConflictChunk> {
    (lines(max), lines(max)).prop_map(|(v1, v2)| ConflictChunk::new(v1, v2))
}

fn record(id: String, commit: String) -> ConflictRecord {
    ConflictRecord {
        id,
        project: "p".into(),
        commit_hash: commit,
        file_path: "f.java".into(),
        language: Language::Java,
        base_lines: None,
        v1_lines: vec!["x".into()],
        v2_lines: vec!["y".into()],
        resolution_lines: vec!["x".into()],
    }
}

fn rows(resolver: &str, sims: &[f64]) -> Vec<ResultRow> {
    sims.iter()
        .enumerate()
        .map(|(i, &s)| ResultRow {
            conflict_id: format!("c{i:03}"),
            resolver_id: resolver.into(),
            sim_line: s,
            sim_char: s,
            elapsed: 0.0,
            status: Status::Ok,
        })
        .collect()
}

proptest! {
    #[test]
    fn similarity_is_symmetric_bounded_and_matches_oracle(a in lines(8), b in lines(8)) {
        let line = similarity(&a, &b, Granularity::LineLevel);
        prop_assert_eq!(line, similarity(&b, &a, Granularity::LineLevel));
        prop_assert!((0.0..=1.0).contains(&line));
        prop_assert!((line - similarity_oracle(&a, &b)).abs() < 1e-12);
        let chars = similarity(&a, &b, Granularity::CharLevel);
        prop_assert!((chars - char_similarity_oracle(&a, &b)).abs() < 1e-12);
        prop_assert_eq!(similarity(&a, &a, Granularity::CharLevel), 1.0);
    }

    #[test]
    fn evaluate_matches_objective_oracle(c in chunk(5), seed in any::<u64>()) {
        prop_assume!(!c.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cand = random_candidate(&c, &mut rng);
        let score = evaluate(&cand, &c).unwrap();
        prop_assert!((score - objective_oracle(&cand.lines(&c), &c)).abs() < 1e-12);
    }

    #[test]
    fn search_is_deterministic_and_best_never_drops(c in chunk(6), seed in any::<u64>()) {
        prop_assume!(!c.is_empty());
        let params = SearchParams { budget: Budget::MaxEvaluations(300), seed, ..SearchParams::default() };
        let first = rrhc_resolve(&c, &params).unwrap();
        let second = rrhc_resolve(&c, &params).unwrap();
        prop_assert_eq!(&first.best, &second.best);
        prop_assert_eq!(&first.ranked, &second.ranked);
        prop_assert!(first.evaluations <= 300);
        prop_assert!(first.improvements.windows(2).all(|w| w[0].1 < w[1].1 && w[0].0 < w[1].0));
        prop_assert_eq!(first.improvements.last().map(|p| p.1), Some(first.best_score));
        prop_assert!(first.ranked.windows(2).all(|w| w[0].score >= w[1].score));
        let distinct: HashSet<_> = first.ranked.iter().map(|r| r.candidate.clone()).collect();
        prop_assert_eq!(distinct.len(), first.ranked.len());
        // The concatenation is always scored first.
        let concat = sbcr::search::Candidate::concatenation(&c);
        prop_assert!(first.best_score >= evaluate(&concat, &c).unwrap());
    }

    #[test]
    fn generated_conflicted_files_round_trip(seed in any::<u64>(), crlf in any::<bool>(), diff3 in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = generate_conflicted_file(&mut rng, crlf, diff3);
        let file = parse_conflicted_file(&g.text).unwrap();
        prop_assert_eq!(file.render(), g.text);
        prop_assert_eq!(file.chunk_count(), g.chunks.len());
    }

    #[test]
    fn split_is_a_partition(n in 0usize..200, seed in any::<u64>(), a in 0u32..=10, b in 0u32..=10) {
        prop_assume!(a + b <= 10);
        let ratios = [a as f64 / 10.0, b as f64 / 10.0, (10 - a - b) as f64 / 10.0];
        let ids: Vec<String> = (0..n).map(|i| format!("id{i}")).collect();
        let split = split_dataset(&ids, seed, ratios).unwrap();
        let mut all: Vec<String> = split.train_ids.iter().chain(&split.valid_ids).chain(&split.test_ids).cloned().collect();
        all.sort();
        let mut expected = ids.clone();
        expected.sort();
        prop_assert_eq!(all, expected);
        prop_assert_eq!(split.train_ids.len(), (n as f64 * ratios[0] + 1e-9).floor() as usize);
        prop_assert_eq!(split_dataset(&ids, seed, ratios).unwrap(), split);
    }

    #[test]
    fn dedupe_is_commutative_as_a_set(a in prop::collection::vec(0u8..6, 0..10), b in prop::collection::vec(0u8..6, 0..10)) {
        let make = |tag: &str, commits: &[u8]| -> Vec<ConflictRecord> {
            commits.iter().enumerate().map(|(i, c)| record(format!("{tag}{i}"), format!("{c:040}"))).collect()
        };
        let ids = |v: Vec<ConflictRecord>| -> HashSet<String> { v.into_iter().map(|r| r.id).collect() };
        let ab = ids(dedupe_by_commit(make("a", &a), make("b", &b)));
        let ba = ids(dedupe_by_commit(make("b", &b), make("a", &a)));
        prop_assert_eq!(&ab, &ba);
        let shared: HashSet<u8> = a.iter().filter(|c| b.contains(c)).copied().collect();
        let kept = a.iter().chain(&b).filter(|c| !shared.contains(c)).count();
        prop_assert_eq!(ab.len(), kept);
    }

    #[test]
    fn ingest_is_idempotent(v1 in lines(4), v2 in lines(4), take in prop::collection::vec(any::<bool>(), 8), extra in any::<bool>()) {
        let mut resolution: Vec<String> = v1.iter().chain(&v2).zip(&take).filter(|(_, t)| **t).map(|(l, _)| l.clone()).collect();
        if extra {
            resolution.push("invented line".into());
        }
        let mut r = record("r1".into(), "c".into());
        r.v1_lines = v1;
        r.v2_lines = v2;
        r.resolution_lines = resolution;
        let mut once = Vec::new();
        write_records(&mut once, &[r]).unwrap();
        let (accepted, _) = ingest_records(once.as_slice(), FilterFlags::default()).unwrap();
        let mut twice = Vec::new();
        write_records(&mut twice, &accepted).unwrap();
        let (again, rejected) = ingest_records(twice.as_slice(), FilterFlags::default()).unwrap();
        prop_assert_eq!(&again, &accepted);
        prop_assert!(rejected.is_empty());
    }

    #[test]
    fn cles_complements_and_matches_pair_counts(
        a in prop::collection::vec(0u8..8, 1..40),
        b in prop::collection::vec(0u8..8, 1..40),
    ) {
        let a: Vec<f64> = a.into_iter().map(f64::from).collect();
        let b: Vec<f64> = b.into_iter().map(f64::from).collect();
        let ab = cles(&a, &b).unwrap();
        prop_assert_eq!(ab + cles(&b, &a).unwrap(), 1.0);
        let (wins, ties) = pair_counts(&a, &b);
        let reference = (wins as f64 + 0.5 * ties as f64) / (a.len() * b.len()) as f64;
        prop_assert!((ab - reference).abs() < 1e-12);
    }

    #[test]
    fn comparison_is_antisymmetric(sims in prop::collection::vec((0u8..5, 0u8..5), 1..40)) {
        let a: Vec<f64> = sims.iter().map(|p| p.0 as f64 / 4.0).collect();
        let b: Vec<f64> = sims.iter().map(|p| p.1 as f64 / 4.0).collect();
        let ab = compare_results(&rows("A", &a), &rows("B", &b), None, 3).unwrap();
        let ba = compare_results(&rows("B", &b), &rows("A", &a), None, 3).unwrap();
        prop_assert_eq!(ab.wins_a, ba.wins_b);
        prop_assert_eq!(ab.ties, ba.ties);
        prop_assert_eq!(ab.wins_a + ab.wins_b + ab.ties, ab.n);
        prop_assert_eq!(ab.cles_a_over_b + ba.cles_a_over_b, 1.0);
        prop_assert!((ab.wilcoxon_p - ba.wilcoxon_p).abs() < 1e-12);
        prop_assert_eq!(&ab.extremes.a_best, &ba.extremes.b_best);
    }
}

#[test]
fn random_candidate_includes_each_line_half_the_time() {
    let c = ConflictChunk::new(["a", "b", "c"], ["d", "e"]);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let draws = 10_000;
    let mut counts = [[0usize; 3]; 2];
    for _ in 0..draws {
        for r in random_candidate(&c, &mut rng).elements {
            let v = if r.version == Version::V1 { 0 } else { 1 };
            counts[v][r.index] += 1;
        }
    }
    for (v, len) in [(0, 3), (1, 2)] {
        for count in &counts[v][..len] {
            let freq = *count as f64 / draws as f64;
            assert!((freq - 0.5).abs() <= 0.02, "inclusion frequency {freq}");
        }
    }
}

#[test]
fn random_candidate_interleavings_are_uniform() {
    // With one line kept on each side both orders must be equally likely.
    let c = ConflictChunk::new(["a"], ["b"]);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (mut both, mut v1_first) = (0, 0);
    for _ in 0..20_000 {
        let cand = random_candidate(&c, &mut rng);
        if cand.len() == 2 {
            both += 1;
            if cand.elements[0].version == Version::V1 {
                v1_first += 1;
            }
        }
    }
    let freq = v1_first as f64 / both as f64;
    assert!((freq - 0.5).abs() < 0.03, "v1-first frequency {freq}");
}
