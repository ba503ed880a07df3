//! Local stand-in for a generative resolver service.
//!
//! Serves `POST /v1/resolve` and answers according to a fixed mode, which
//! makes every generative failure class reproducible without a model.

use std::fmt;
use std::net::SocketAddr;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tiny_http::{Header, Method, Response, Server};

use crate::resolvers::{truncate_to_tokens, ErrorResponse, ResolveRequest, ResolveResponse};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StubMode {
    EchoV1,
    EchoV2,
    Empty,
    /// First `output_token_limit` tokens of V1 followed by V2, flagged truncated.
    Truncate,
    /// Sleeps for the configured delay, then echoes V1.
    Slow,
    /// Answers 200 with a body that is not JSON.
    Garbage,
    /// Answers 500 with an error document.
    Error,
}

impl StubMode {
    pub const ALL: [StubMode; 7] = [
        StubMode::EchoV1,
        StubMode::EchoV2,
        StubMode::Empty,
        StubMode::Truncate,
        StubMode::Slow,
        StubMode::Garbage,
        StubMode::Error,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StubMode::EchoV1 => "echo-v1",
            StubMode::EchoV2 => "echo-v2",
            StubMode::Empty => "empty",
            StubMode::Truncate => "truncate",
            StubMode::Slow => "slow",
            StubMode::Garbage => "garbage",
            StubMode::Error => "error",
        }
    }
}

impl fmt::Display for StubMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StubMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StubMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown stub mode {s:?}"))
    }
}

/// A running stub server. Dropping it stops the server.
pub struct StubServer {
    server: Arc<Server>,
    addr: SocketAddr,
    requests: Arc<AtomicUsize>,
    worker: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts serving on
    /// a background thread.
    pub fn start(addr: &str, mode: StubMode, delay: Duration) -> std::io::Result<StubServer> {
        let server = Server::http(addr).map_err(std::io::Error::other)?;
        let addr = server
            .server_addr()
            .to_ip()
            .ok_or_else(|| std::io::Error::other("stub server is not bound to an IP address"))?;
        let server = Arc::new(server);
        let requests = Arc::new(AtomicUsize::new(0));
        let worker = {
            let server = Arc::clone(&server);
            let requests = Arc::clone(&requests);
            thread::spawn(move || {
                for request in server.incoming_requests() {
                    requests.fetch_add(1, Ordering::SeqCst);
                    thread::spawn(move || handle(request, mode, delay));
                }
            })
        };
        Ok(StubServer {
            server,
            addr,
            requests,
            worker: Some(worker),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Requests received so far, of any method or path.
    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }

    /// Blocks until the server stops.
    pub fn join(mut self) {
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

fn json_response(status: u16, body: String) -> Response<std::io::Cursor<Vec<u8>>> {
    let header = Header::from_bytes("Content-Type", "application/json").expect("static header");
    Response::from_string(body).with_status_code(status).with_header(header)
}

fn error(status: u16, msg: &str) -> Response<std::io::Cursor<Vec<u8>>> {
    let body = serde_json::to_string(&ErrorResponse { error: msg.to_string() }).expect("serializable");
    json_response(status, body)
}

/// Computes the stub's answer for a decoded request.
pub fn answer(mode: StubMode, req: &ResolveRequest) -> ResolveResponse {
    let (lines, truncated) = match mode {
        StubMode::EchoV1 | StubMode::Slow | StubMode::Garbage | StubMode::Error => (req.v1.clone(), false),
        StubMode::EchoV2 => (req.v2.clone(), false),
        StubMode::Empty => (Vec::new(), false),
        StubMode::Truncate => {
            let all: Vec<&String> = req.v1.iter().chain(&req.v2).collect();
            (truncate_to_tokens(&all, req.output_token_limit), true)
        }
    };
    ResolveResponse { lines, truncated }
}

fn handle(mut request: tiny_http::Request, mode: StubMode, delay: Duration) {
    let response = if request.method() != &Method::Post || request.url() != "/v1/resolve" {
        error(404, "only POST /v1/resolve is served")
    } else {
        let mut body = String::new();
        match request.as_reader().read_to_string(&mut body) {
            Err(e) => error(400, &format!("unreadable body: {e}")),
            Ok(_) => match serde_json::from_str::<ResolveRequest>(&body) {
                Err(e) => error(400, &format!("invalid request: {e}")),
                Ok(req) => match mode {
                    StubMode::Garbage => json_response(200, "{\"lines\": [\"unterminated".to_string()),
                    StubMode::Error => error(500, "stub configured to fail"),
                    _ => {
                        if mode == StubMode::Slow {
                            thread::sleep(delay);
                        }
                        let resp = answer(mode, &req);
                        json_response(200, serde_json::to_string(&resp).expect("serializable"))
                    }
                },
            },
        }
    };
    let _ = request.respond(response);
}
