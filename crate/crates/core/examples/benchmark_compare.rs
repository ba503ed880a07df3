//! Benchmarks the search engine against the best trivial strategy on the
//! bundled sample and prints the paired comparison.

use std::fs::File;
use std::io::BufReader;

use sbcr::bench::{compare_results, mean, run_benchmark, BenchOptions};
use sbcr::corpus::{ingest_records, FilterFlags};
use sbcr::resolvers::{SbcrResolver, TrivialStrategy};
use sbcr::search::{Budget, SearchParams};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample50.jsonl");
    let (records, _) = ingest_records(BufReader::new(File::open(path).unwrap()), FilterFlags::default()).unwrap();
    let opts = BenchOptions {
        jobs: 4,
        record_time: false,
        ..BenchOptions::default()
    };

    let search = SbcrResolver::new(SearchParams {
        budget: Budget::MaxEvaluations(5_000),
        seed: 1,
        ..SearchParams::default()
    });
    let sbcr_rows = run_benchmark(&records, &search, &opts).unwrap();
    let trivial_rows = run_benchmark(&records, &TrivialStrategy::TakeV2, &opts).unwrap();

    println!("mean sim_char sbcr    {:.4}", mean(sbcr_rows.iter().map(|r| r.sim_char)));
    println!("mean sim_char take-v2 {:.4}", mean(trivial_rows.iter().map(|r| r.sim_char)));

    let report = compare_results(&sbcr_rows, &trivial_rows, None, 3).unwrap();
    println!(
        "wins {} / losses {} / ties {}, Wilcoxon p = {:.4}, CLES = {:.3}",
        report.wins_a, report.wins_b, report.ties, report.wilcoxon_p, report.cles_a_over_b
    );
    println!("search ahead most on:    {:?}", report.extremes.a_best);
    println!("take-v2 ahead most on:   {:?}", report.extremes.b_best);
}
