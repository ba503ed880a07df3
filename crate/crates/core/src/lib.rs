//! Search-based merge conflict resolution.
//!
//! Conflict chunks are resolved by searching over order-preserving
//! interleavings of the lines of both conflicting versions, guided by the
//! candidate's mean similarity to the two versions. Around the search engine
//! sit the pieces needed to run it on real data and compare it with other
//! resolvers: conflict-marker parsing, dataset handling, trivial and remote
//! resolvers, a rule-based hybrid router, and a benchmark harness with
//! paired statistics.

pub mod bench;
pub mod chunk;
pub mod cli;
pub mod corpus;
pub mod parser;
pub mod resolvers;
pub mod router;
pub mod search;
pub mod simkit;
pub mod stub;

pub use chunk::ConflictChunk;
