//! Extracts records from a conflicted file, validates a record stream and
//! splits it into train, validation and test partitions.

use std::fs::File;
use std::io::BufReader;

use sbcr::corpus::{ingest_records, split_dataset, FilterFlags, Language};
use sbcr::parser::{extract_records, parse_conflicted_file};

fn main() {
    let text = "a();\n<<<<<<< HEAD\nb();\n=======\nc();\n>>>>>>> topic\nd();\n";
    let file = parse_conflicted_file(text).unwrap();
    for record in extract_records(&file, "src/Demo.java", "demo", "0123abcd", Language::Java) {
        println!("extracted {}: v1={:?} v2={:?}", record.id, record.v1_lines, record.v2_lines);
    }

    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample50.jsonl");
    let filters = FilterFlags {
        partial_order: true,
        ..FilterFlags::default()
    };
    let (records, rejects) = ingest_records(BufReader::new(File::open(path).unwrap()), filters).unwrap();
    println!("{} records accepted, {} rejected", records.len(), rejects.len());
    for r in &rejects {
        println!("  line {}: {:?} ({})", r.line, r.reason, r.detail);
    }

    let ids: Vec<String> = records.iter().map(|r| r.id.clone()).collect();
    let split = split_dataset(&ids, 42, [0.8, 0.1, 0.1]).unwrap();
    println!(
        "train {} / valid {} / test {}",
        split.train_ids.len(),
        split.valid_ids.len(),
        split.test_ids.len()
    );
}
