//! Rule-based dispatch between the search engine and a generative resolver.
//!
//! Rules, first match wins:
//!
//! 1. more input tokens than the generative limit: search (`TokenLimit`)
//! 2. non-ASCII fraction above `tau`: search (`NonEnglish`)
//! 3. `|balance| <= beta`: search (`Balanced`)
//! 4. otherwise: generative (`Default`)
//!
//! A generative answer that is empty, truncated or failed is replaced by the
//! search engine's answer.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::chunk::ConflictChunk;
use crate::resolvers::{count_tokens, ResolutionCandidate, Resolver, Status};

pub const FALLBACK_RESOLVER_ID: &str = "generative→search-fallback";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConflictFeatures {
    pub token_estimate: usize,
    /// `(|v1| - |v2|) / (|v1| + |v2|)` in lines, 0 when both are empty.
    pub balance: f64,
    pub non_ascii_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Target {
    Search,
    Generative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rule {
    TokenLimit,
    NonEnglish,
    Balanced,
    Default,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RouteDecision {
    pub target: Target,
    pub rule: Rule,
    pub features: ConflictFeatures,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// `None` disables the size rule.
    pub input_token_limit: Option<usize>,
    pub non_english_tau: f64,
    pub balance_beta: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            input_token_limit: Some(300),
            non_english_tau: 0.05,
            balance_beta: 0.2,
        }
    }
}

pub fn extract_features(chunk: &ConflictChunk) -> ConflictFeatures {
    let base: &[String] = chunk.base.as_deref().unwrap_or(&[]);
    let token_estimate = count_tokens(base) + count_tokens(&chunk.v1) + count_tokens(&chunk.v2);

    let (n1, n2) = (chunk.v1.len() as f64, chunk.v2.len() as f64);
    let balance = if chunk.is_empty() { 0.0 } else { (n1 - n2) / (n1 + n2) };

    let (mut total, mut non_ascii) = (0usize, 0usize);
    for line in base.iter().chain(&chunk.v1).chain(&chunk.v2) {
        for c in line.chars() {
            total += 1;
            if !c.is_ascii() {
                non_ascii += 1;
            }
        }
    }
    let non_ascii_fraction = if total == 0 { 0.0 } else { non_ascii as f64 / total as f64 };

    ConflictFeatures {
        token_estimate,
        balance,
        non_ascii_fraction,
    }
}

pub fn route(features: ConflictFeatures, thresholds: &Thresholds) -> RouteDecision {
    let (target, rule) = if thresholds.input_token_limit.is_some_and(|limit| features.token_estimate > limit) {
        (Target::Search, Rule::TokenLimit)
    } else if features.non_ascii_fraction > thresholds.non_english_tau {
        (Target::Search, Rule::NonEnglish)
    } else if features.balance.abs() <= thresholds.balance_beta {
        (Target::Search, Rule::Balanced)
    } else {
        (Target::Generative, Rule::Default)
    };
    RouteDecision { target, rule, features }
}

/// Routes each chunk and falls back to search when the generative resolver
/// does not deliver.
pub struct HybridResolver<S, G> {
    pub search: S,
    pub generative: G,
    pub thresholds: Thresholds,
}

impl<S: Resolver, G: Resolver> HybridResolver<S, G> {
    pub fn new(search: S, generative: G, thresholds: Thresholds) -> Self {
        HybridResolver {
            search,
            generative,
            thresholds,
        }
    }

    pub fn resolve_routed(&self, chunk: &ConflictChunk) -> (ResolutionCandidate, RouteDecision) {
        let decision = route(extract_features(chunk), &self.thresholds);
        let candidate = match decision.target {
            Target::Search => self.search.resolve(chunk),
            Target::Generative => {
                let generated = self.generative.resolve(chunk);
                match generated.status {
                    Status::Ok => generated,
                    Status::Empty | Status::Truncated | Status::Failed => {
                        let mut fallback = self.search.resolve(chunk);
                        fallback.elapsed += generated.elapsed;
                        fallback.resolver_id = FALLBACK_RESOLVER_ID.to_string();
                        let why = format!(
                            "generative resolver returned {:?}{}",
                            generated.status,
                            generated.diagnostic.map(|d| format!(": {d}")).unwrap_or_default()
                        );
                        fallback.diagnostic = Some(match fallback.diagnostic {
                            Some(d) => format!("{why}; search: {d}"),
                            None => why,
                        });
                        fallback
                    }
                }
            }
        };
        (candidate, decision)
    }
}

impl<S: Resolver, G: Resolver> Resolver for HybridResolver<S, G> {
    fn id(&self) -> String {
        "hybrid".to_string()
    }

    fn resolve(&self, chunk: &ConflictChunk) -> ResolutionCandidate {
        self.resolve_routed(chunk).0
    }
}

/// One line of the decision log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionLogEntry {
    pub id: String,
    pub rule: Rule,
    pub target: Target,
    pub features: ConflictFeatures,
}

impl DecisionLogEntry {
    pub fn new(id: impl Into<String>, decision: &RouteDecision) -> Self {
        DecisionLogEntry {
            id: id.into(),
            rule: decision.rule,
            target: decision.target,
            features: decision.features,
        }
    }
}

pub fn write_decisions<W: Write>(mut out: W, entries: &[DecisionLogEntry]) -> io::Result<()> {
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
