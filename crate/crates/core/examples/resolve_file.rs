//! Resolves every conflict chunk of a file with the search engine and prints
//! the merged file.
//!
//! ```text
//! cargo run --example resolve_file -- path/to/Conflicted.java
//! ```

use std::env;
use std::fs;

use sbcr::parser::{parse_conflicted_file, render_resolved};
use sbcr::resolvers::{Resolver, SbcrResolver};
use sbcr::search::{Budget, SearchParams};

const DEMO: &str = "class Demo {
<<<<<<< HEAD
    int retries = 3;
    Duration timeout = Duration.ofSeconds(5);
=======
    int retries = 3;
    boolean verbose = false;
>>>>>>> feature/verbose
}
";

fn main() {
    let text = match env::args().nth(1) {
        Some(path) => fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}")),
        None => DEMO.to_string(),
    };
    let file = parse_conflicted_file(&text).expect("well-formed conflict markers");
    let resolver = SbcrResolver::new(SearchParams {
        budget: Budget::MaxEvaluations(2_000),
        ..SearchParams::default()
    });

    let resolutions: Vec<Vec<String>> = file
        .chunks()
        .map(|block| {
            let candidate = resolver.resolve(&block.to_chunk());
            eprintln!(
                "chunk at line {}: {:?} in {:.3}s",
                block.start_line, candidate.status, candidate.elapsed
            );
            candidate.lines
        })
        .collect();
    print!("{}", render_resolved(&file, &resolutions).expect("one resolution per chunk"));
}
