//! Runs the hill climber on one conflict chunk and prints the ranked
//! candidates.

use sbcr::search::{rrhc_resolve, Budget, SearchParams};
use sbcr::ConflictChunk;

fn main() {
    let chunk = ConflictChunk::new(
        [
            "import java.util.List;",
            "import java.util.Map;",
            "import org.slf4j.Logger;",
        ],
        [
            "import java.time.Duration;",
            "import java.util.List;",
            "import java.util.Optional;",
        ],
    );
    let params = SearchParams {
        budget: Budget::MaxEvaluations(5_000),
        top_n: 5,
        seed: 7,
        ..SearchParams::default()
    };
    let result = rrhc_resolve(&chunk, &params).expect("chunk is not empty");

    println!(
        "{} evaluations, {} restarts, best score {:.4}",
        result.evaluations, result.restarts, result.best_score
    );
    for (rank, rc) in result.ranked.iter().enumerate() {
        println!("#{} score {:.4}", rank + 1, rc.score);
        for line in rc.candidate.text(&chunk) {
            println!("    {line}");
        }
    }
}
