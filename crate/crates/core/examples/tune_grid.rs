//! Small parameter sweep on a sample of the bundled records.

use std::fs::File;
use std::io::BufReader;

use sbcr::bench::{sample_records, tune_grid, write_tuning_csv, TuneGrid, TuneOptions};
use sbcr::corpus::{ingest_records, FilterFlags};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample50.jsonl");
    let (records, _) = ingest_records(BufReader::new(File::open(path).unwrap()), FilterFlags::default()).unwrap();
    let sample = sample_records(&records, 20, 0);

    let grid = TuneGrid {
        neighbors: vec![1, 5, 9],
        time_budgets_s: vec![0.5, 2.0],
        stagnation: vec![5, 20],
    };
    // Time budgets become 1000 evaluations per second, so the table is the
    // same on every machine.
    let rows = tune_grid(&sample, &grid, &TuneOptions::default()).unwrap();
    write_tuning_csv(std::io::stdout(), &rows).unwrap();
}
