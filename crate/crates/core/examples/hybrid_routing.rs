//! Routes a few chunks between the search engine and a generative resolver.
//! A local stub stands in for the generative service; pass a mode name
//! (`echo-v1`, `empty`, `truncate`, `error`, ...) to change its behavior.

use std::env;
use std::time::Duration;

use sbcr::resolvers::{RemoteResolver, SbcrResolver, TokenLimits};
use sbcr::router::{HybridResolver, Thresholds};
use sbcr::search::{Budget, SearchParams};
use sbcr::stub::{StubMode, StubServer};
use sbcr::ConflictChunk;

fn main() {
    let mode: StubMode = env::args().nth(1).as_deref().unwrap_or("echo-v1").parse().unwrap();
    let stub = StubServer::start("127.0.0.1:0", mode, Duration::from_millis(100)).unwrap();

    let search = SbcrResolver::new(SearchParams {
        budget: Budget::MaxEvaluations(1_000),
        ..SearchParams::default()
    });
    let generative = RemoteResolver::new(stub.url(), TokenLimits::default(), Duration::from_secs(2), 4);
    let hybrid = HybridResolver::new(search, generative, Thresholds::default());

    let big = vec!["value = compute(a, b, c, d);".to_string(); 40];
    let chunks = [
        ("balanced", ConflictChunk::new(["int a = 1;"], ["int a = 2;"])),
        (
            "unbalanced",
            ConflictChunk::new(["log.debug(\"start\");", "open();", "read();"], ["open();"]),
        ),
        ("one-sided", ConflictChunk::new(vec![], vec!["@Override".to_string()])),
        ("large", ConflictChunk::new(big.clone(), vec![])),
        ("non-English", ConflictChunk::new(["// größe prüfen", "check();"], vec![])),
    ];
    for (name, chunk) in &chunks {
        let (candidate, decision) = hybrid.resolve_routed(chunk);
        println!(
            "{name:12} {:?}/{:?} -> {} ({:?}, {} lines)",
            decision.target,
            decision.rule,
            candidate.resolver_id,
            candidate.status,
            candidate.lines.len()
        );
    }
    println!("generative calls: {}", stub.request_count());
}
