//! A common interface over everything that can propose a chunk resolution:
//! the search engine, the trivial take/concatenate strategies, and a remote
//! generative service reached over HTTP.

use std::fmt;
use std::str::FromStr;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::chunk::ConflictChunk;
use crate::search::{rrhc_resolve, SearchError, SearchParams, SearchResult};

/// Environment variable naming the default remote resolver endpoint.
pub const ENDPOINT_ENV: &str = "SBCR_REMOTE_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Ok,
    /// The resolver succeeded but proposed no lines.
    Empty,
    /// The remote output hit its token limit.
    Truncated,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionCandidate {
    pub lines: Vec<String>,
    pub resolver_id: String,
    /// Seconds spent generating, excluding any setup.
    pub elapsed: f64,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

impl ResolutionCandidate {
    /// `Ok`, or `Empty` when there are no lines.
    pub fn success(lines: Vec<String>, resolver_id: impl Into<String>, elapsed: f64) -> Self {
        let status = if lines.is_empty() { Status::Empty } else { Status::Ok };
        ResolutionCandidate {
            lines,
            resolver_id: resolver_id.into(),
            elapsed,
            status,
            diagnostic: None,
        }
    }

    pub fn failed(resolver_id: impl Into<String>, elapsed: f64, diagnostic: impl Into<String>) -> Self {
        ResolutionCandidate {
            lines: Vec::new(),
            resolver_id: resolver_id.into(),
            elapsed,
            status: Status::Failed,
            diagnostic: Some(diagnostic.into()),
        }
    }
}

pub trait Resolver: Send + Sync {
    fn id(&self) -> String;

    /// Never panics on a well-formed chunk; problems surface as
    /// `Status::Failed`.
    fn resolve(&self, chunk: &ConflictChunk) -> ResolutionCandidate;
}

impl<R: Resolver + ?Sized> Resolver for Box<R> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn resolve(&self, chunk: &ConflictChunk) -> ResolutionCandidate {
        (**self).resolve(chunk)
    }
}

impl<R: Resolver + ?Sized> Resolver for std::sync::Arc<R> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn resolve(&self, chunk: &ConflictChunk) -> ResolutionCandidate {
        (**self).resolve(chunk)
    }
}

/// Adapter running random-restart hill climbing.
#[derive(Debug, Clone, Default)]
pub struct SbcrResolver {
    pub params: SearchParams,
}

impl SbcrResolver {
    pub fn new(params: SearchParams) -> Self {
        SbcrResolver { params }
    }

    pub fn search(&self, chunk: &ConflictChunk) -> Result<SearchResult, SearchError> {
        rrhc_resolve(chunk, &self.params)
    }
}

impl Resolver for SbcrResolver {
    fn id(&self) -> String {
        "sbcr".to_string()
    }

    fn resolve(&self, chunk: &ConflictChunk) -> ResolutionCandidate {
        let started = Instant::now();
        if chunk.is_empty() {
            // The empty resolution is the only candidate there is.
            return ResolutionCandidate::success(Vec::new(), self.id(), 0.0);
        }
        match self.search(chunk) {
            Ok(result) => ResolutionCandidate::success(result.best.lines(chunk), self.id(), result.elapsed),
            Err(e) => ResolutionCandidate::failed(self.id(), started.elapsed().as_secs_f64(), e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrivialStrategy {
    TakeV1,
    TakeV2,
    TakeBase,
    ConcatV1V2,
    ConcatV2V1,
}

impl TrivialStrategy {
    pub const ALL: [TrivialStrategy; 5] = [
        TrivialStrategy::TakeV1,
        TrivialStrategy::TakeV2,
        TrivialStrategy::TakeBase,
        TrivialStrategy::ConcatV1V2,
        TrivialStrategy::ConcatV2V1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrivialStrategy::TakeV1 => "take-v1",
            TrivialStrategy::TakeV2 => "take-v2",
            TrivialStrategy::TakeBase => "take-base",
            TrivialStrategy::ConcatV1V2 => "concat-v1-v2",
            TrivialStrategy::ConcatV2V1 => "concat-v2-v1",
        }
    }

    /// `None` only for `TakeBase` on a chunk without a base section.
    pub fn apply(self, chunk: &ConflictChunk) -> Option<Vec<String>> {
        let cat = |a: &[String], b: &[String]| a.iter().chain(b).cloned().collect();
        Some(match self {
            TrivialStrategy::TakeV1 => chunk.v1.clone(),
            TrivialStrategy::TakeV2 => chunk.v2.clone(),
            TrivialStrategy::TakeBase => chunk.base.clone()?,
            TrivialStrategy::ConcatV1V2 => cat(&chunk.v1, &chunk.v2),
            TrivialStrategy::ConcatV2V1 => cat(&chunk.v2, &chunk.v1),
        })
    }
}

impl fmt::Display for TrivialStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrivialStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TrivialStrategy::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = TrivialStrategy::ALL.iter().map(|t| t.name()).collect();
                format!("unknown strategy {s:?}; expected one of {}", names.join(", "))
            })
    }
}

impl Resolver for TrivialStrategy {
    fn id(&self) -> String {
        format!("trivial:{}", self.name())
    }

    fn resolve(&self, chunk: &ConflictChunk) -> ResolutionCandidate {
        let started = Instant::now();
        let lines = self.apply(chunk);
        let elapsed = started.elapsed().as_secs_f64();
        match lines {
            Some(lines) => ResolutionCandidate::success(lines, self.id(), elapsed),
            None => ResolutionCandidate::failed(self.id(), elapsed, "chunk has no base section"),
        }
    }
}

/// Counts tokens the way the router and the remote limits do: maximal runs
/// of alphanumeric characters or `_` are one token each, every other
/// non-whitespace character is a token on its own.
pub fn count_tokens<S: AsRef<str>>(lines: &[S]) -> usize {
    lines.iter().map(|l| token_ends(l.as_ref()).len()).sum()
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte offsets just past each token of `line`.
fn token_ends(line: &str) -> Vec<usize> {
    let mut ends = Vec::new();
    let mut chars = line.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if c.is_whitespace() {
            continue;
        }
        let mut end = i + c.len_utf8();
        if is_word(c) {
            while let Some(&(j, d)) = chars.peek() {
                if !is_word(d) {
                    break;
                }
                end = j + d.len_utf8();
                chars.next();
            }
        }
        ends.push(end);
    }
    ends
}

/// Keeps the first `limit` tokens, cutting the line that holds the last
/// kept token right after it.
pub fn truncate_to_tokens<S: AsRef<str>>(lines: &[S], limit: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut remaining = limit;
    for line in lines {
        if remaining == 0 {
            break;
        }
        let line = line.as_ref();
        let ends = token_ends(line);
        if ends.len() <= remaining {
            remaining -= ends.len();
            out.push(line.to_string());
        } else {
            out.push(line[..ends[remaining - 1]].to_string());
            remaining = 0;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenLimits {
    pub input_token_limit: usize,
    pub output_token_limit: usize,
}

impl Default for TokenLimits {
    fn default() -> Self {
        TokenLimits {
            input_token_limit: 300,
            output_token_limit: 100,
        }
    }
}

/// Body of `POST /v1/resolve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolveRequest {
    pub base: Vec<String>,
    pub v1: Vec<String>,
    pub v2: Vec<String>,
    pub input_token_limit: usize,
    pub output_token_limit: usize,
}

impl ResolveRequest {
    pub fn new(chunk: &ConflictChunk, limits: TokenLimits) -> Self {
        ResolveRequest {
            base: chunk.base.clone().unwrap_or_default(),
            v1: chunk.v1.clone(),
            v2: chunk.v2.clone(),
            input_token_limit: limits.input_token_limit,
            output_token_limit: limits.output_token_limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolveResponse {
    pub lines: Vec<String>,
    #[serde(default)]
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorResponse {
    pub error: String,
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Permits {
    free: Mutex<usize>,
    released: Condvar,
}

impl Permits {
    fn new(n: usize) -> Self {
        Permits {
            free: Mutex::new(n.max(1)),
            released: Condvar::new(),
        }
    }

    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.released.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.released.notify_one();
    }
}

/// HTTP client for an external generative resolver.
#[derive(Debug)]
pub struct RemoteResolver {
    endpoint: String,
    limits: TokenLimits,
    agent: ureq::Agent,
    permits: Permits,
}

impl RemoteResolver {
    /// `endpoint` is the service root; requests go to `<endpoint>/v1/resolve`.
    pub fn new(endpoint: impl Into<String>, limits: TokenLimits, deadline: Duration, max_in_flight: usize) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(deadline))
            .http_status_as_error(false)
            .build()
            .into();
        RemoteResolver {
            endpoint: endpoint.into().trim_end_matches('/').to_string(),
            limits,
            agent,
            permits: Permits::new(max_in_flight),
        }
    }

    /// Endpoint from `SBCR_REMOTE_URL`, if set.
    pub fn from_env(limits: TokenLimits, deadline: Duration, max_in_flight: usize) -> Option<Self> {
        let url = std::env::var(ENDPOINT_ENV).ok()?;
        Some(Self::new(url, limits, deadline, max_in_flight))
    }

    pub fn endpoint(&self) -> &str {
        &self.endpoint
    }

    pub fn limits(&self) -> TokenLimits {
        self.limits
    }

    fn call(&self, chunk: &ConflictChunk) -> Result<ResolveResponse, String> {
        let _permit = self.permits.acquire();
        let url = format!("{}/v1/resolve", self.endpoint);
        let mut response = self
            .agent
            .post(&url)
            .send_json(ResolveRequest::new(chunk, self.limits))
            .map_err(|e| format!("request to {url} failed: {e}"))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| format!("reading response body failed: {e}"))?;
        if status != 200 {
            let reason = serde_json::from_str::<ErrorResponse>(&body)
                .map(|e| e.error)
                .unwrap_or(body);
            return Err(format!("server answered {status}: {reason}"));
        }
        serde_json::from_str(&body).map_err(|e| format!("malformed response: {e}"))
    }
}

impl Resolver for RemoteResolver {
    fn id(&self) -> String {
        "remote".to_string()
    }

    fn resolve(&self, chunk: &ConflictChunk) -> ResolutionCandidate {
        let started = Instant::now();
        let outcome = self.call(chunk);
        let elapsed = started.elapsed().as_secs_f64();
        match outcome {
            Err(reason) => ResolutionCandidate::failed(self.id(), elapsed, reason),
            Ok(resp) => {
                let mut c = ResolutionCandidate::success(resp.lines, self.id(), elapsed);
                if c.status == Status::Ok
                    && (resp.truncated || count_tokens(&c.lines) >= self.limits.output_token_limit)
                {
                    c.status = Status::Truncated;
                }
                c
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chunk() -> ConflictChunk {
        ConflictChunk::new(["int a = 1;", "int b;"], ["int a = 2;"])
    }

    #[test]
    fn trivial_strategies() {
        let c = chunk();
        let r = TrivialStrategy::TakeV1.resolve(&c);
        assert_eq!(r.lines, c.v1);
        assert_eq!(r.status, Status::Ok);
        assert_eq!(r.resolver_id, "trivial:take-v1");
        assert_eq!(TrivialStrategy::ConcatV2V1.apply(&c).unwrap(), ["int a = 2;", "int a = 1;", "int b;"]);
        let r = TrivialStrategy::TakeBase.resolve(&c);
        assert_eq!(r.status, Status::Failed);
        let with_base = c.clone().with_base(["int a;"]);
        assert_eq!(TrivialStrategy::TakeBase.resolve(&with_base).lines, ["int a;"]);
        let one_sided = ConflictChunk::new(Vec::<String>::new(), vec!["x".to_string()]);
        assert_eq!(TrivialStrategy::TakeV1.resolve(&one_sided).status, Status::Empty);
    }

    #[test]
    fn strategy_names_round_trip() {
        for t in TrivialStrategy::ALL {
            assert_eq!(t.name().parse::<TrivialStrategy>().unwrap(), t);
        }
        assert!("take-v3".parse::<TrivialStrategy>().is_err());
    }

    #[test]
    fn token_counting() {
        assert_eq!(count_tokens(&["int a = 1;"]), 5);
        assert_eq!(count_tokens(&["foo_bar(x, y)"]), 6);
        assert_eq!(count_tokens(&["", "   "]), 0);
        assert_eq!(count_tokens(&["naïve == ünïcode"]), 4);
    }

    #[test]
    fn truncation_keeps_prefix_tokens() {
        let lines = ["int a = 1;", "return a;"];
        assert_eq!(truncate_to_tokens(&lines, 5), ["int a = 1;"]);
        assert_eq!(truncate_to_tokens(&lines, 3), ["int a ="]);
        assert_eq!(truncate_to_tokens(&lines, 7), ["int a = 1;", "return a"]);
        assert_eq!(truncate_to_tokens(&lines, 0), Vec::<String>::new());
        assert_eq!(count_tokens(&truncate_to_tokens(&lines, 6)), 6);
    }

    #[test]
    fn sbcr_adapter_returns_best_text() {
        let c = chunk();
        let params = SearchParams {
            budget: crate::search::Budget::MaxEvaluations(500),
            ..SearchParams::default()
        };
        let adapter = SbcrResolver::new(params);
        let best = adapter.search(&c).unwrap();
        let r = adapter.resolve(&c);
        assert_eq!(r.lines, best.best.lines(&c));
        assert_eq!(r.resolver_id, "sbcr");
        let empty = ConflictChunk::default();
        assert_eq!(adapter.resolve(&empty).status, Status::Empty);
        let bad = SbcrResolver::new(SearchParams {
            neighbors_per_iteration: 0,
            ..SearchParams::default()
        });
        assert_eq!(bad.resolve(&c).status, Status::Failed);
    }

    #[test]
    fn unreachable_endpoint_fails_cleanly() {
        let r = RemoteResolver::new("http://127.0.0.1:1", TokenLimits::default(), Duration::from_secs(2), 1);
        let c = r.resolve(&chunk());
        assert_eq!(c.status, Status::Failed);
        assert!(c.diagnostic.is_some());
    }
}
