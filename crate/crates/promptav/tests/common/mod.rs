//! Shared helpers for integration tests: an instrumented local HTTP stub
//! server speaking just enough of the chat-completions protocol, plus
//! fixture builders.

#![allow(dead_code)] // each integration test binary uses a different subset

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicI64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

/// A minimal HTTP/1.1 server that answers chat-completion POSTs with canned
/// bodies while recording how it was called: total backend hits, the highest
/// number of simultaneously open requests, and every Authorization header.
pub struct StubServer {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    in_flight: Arc<AtomicI64>,
    max_in_flight: Arc<AtomicI64>,
    auth_headers: Arc<Mutex<Vec<String>>>,
    /// Status codes to serve, one per request, in order; empty → 200.
    script: Arc<Mutex<VecDeque<u16>>>,
    shutdown: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
}

impl StubServer {
    /// Start the server. `hold` is how long each request stays open before
    /// answering (gives concurrency something to overlap on);
    /// `response_text` is the assistant message content served on 200s.
    pub fn start(hold: Duration, response_text: &str) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind stub server");
        let addr = listener.local_addr().expect("stub server address");

        let hits = Arc::new(AtomicUsize::new(0));
        let in_flight = Arc::new(AtomicI64::new(0));
        let max_in_flight = Arc::new(AtomicI64::new(0));
        let auth_headers = Arc::new(Mutex::new(Vec::new()));
        let script: Arc<Mutex<VecDeque<u16>>> = Arc::new(Mutex::new(VecDeque::new()));
        let shutdown = Arc::new(AtomicBool::new(false));

        let accept_thread = {
            let hits = hits.clone();
            let in_flight = in_flight.clone();
            let max_in_flight = max_in_flight.clone();
            let auth_headers = auth_headers.clone();
            let script = script.clone();
            let shutdown = shutdown.clone();
            let response_text = response_text.to_string();
            std::thread::spawn(move || {
                let mut workers = Vec::new();
                for stream in listener.incoming() {
                    if shutdown.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let hits = hits.clone();
                    let in_flight = in_flight.clone();
                    let max_in_flight = max_in_flight.clone();
                    let auth_headers = auth_headers.clone();
                    let script = script.clone();
                    let response_text = response_text.clone();
                    workers.push(std::thread::spawn(move || {
                        handle_connection(
                            stream,
                            hold,
                            &response_text,
                            &hits,
                            &in_flight,
                            &max_in_flight,
                            &auth_headers,
                            &script,
                        );
                    }));
                }
                for worker in workers {
                    let _ = worker.join();
                }
            })
        };

        Self {
            addr,
            hits,
            in_flight,
            max_in_flight,
            auth_headers,
            script,
            shutdown,
            accept_thread: Some(accept_thread),
        }
    }

    /// Endpoint base URL; the gateway appends `/chat/completions`.
    pub fn endpoint(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Total requests that reached the backend.
    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    /// Highest number of requests that were open at the same time.
    pub fn max_observed_in_flight(&self) -> i64 {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    /// Authorization header values in arrival order.
    pub fn auth_headers(&self) -> Vec<String> {
        self.auth_headers.lock().unwrap().clone()
    }

    /// Queue a status code for the next unserved request.
    pub fn push_status(&self, status: u16) {
        self.script.lock().unwrap().push_back(status);
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.shutdown.store(true, Ordering::SeqCst);
        // Wake the accept loop so it notices the flag.
        let _ = TcpStream::connect(self.addr);
        if let Some(handle) = self.accept_thread.take() {
            let _ = handle.join();
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn handle_connection(
    mut stream: TcpStream,
    hold: Duration,
    response_text: &str,
    hits: &AtomicUsize,
    in_flight: &AtomicI64,
    max_in_flight: &AtomicI64,
    auth_headers: &Mutex<Vec<String>>,
    script: &Mutex<VecDeque<u16>>,
) {
    let mut reader = BufReader::new(match stream.try_clone() {
        Ok(clone) => clone,
        Err(_) => return,
    });

    let mut request_line = String::new();
    if reader.read_line(&mut request_line).is_err() || request_line.trim().is_empty() {
        return; // the wake-up connection from Drop, or a broken client
    }

    let mut content_length = 0usize;
    let mut authorization = None;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).is_err() {
            return;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((name, value)) = line.split_once(':') {
            let value = value.trim();
            match name.to_ascii_lowercase().as_str() {
                "content-length" => content_length = value.parse().unwrap_or(0),
                "authorization" => authorization = Some(value.to_string()),
                _ => {}
            }
        }
    }
    let mut body = vec![0u8; content_length];
    if reader.read_exact(&mut body).is_err() {
        return;
    }

    let now = in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    max_in_flight.fetch_max(now, Ordering::SeqCst);
    hits.fetch_add(1, Ordering::SeqCst);
    if let Some(auth) = authorization {
        auth_headers.lock().unwrap().push(auth);
    }

    std::thread::sleep(hold);

    let status = script.lock().unwrap().pop_front().unwrap_or(200);
    let body = if status == 200 {
        serde_json::json!({
            "choices": [{"message": {"role": "assistant", "content": response_text}}],
            "usage": {"prompt_tokens": 100, "completion_tokens": 25, "total_tokens": 125},
            "model": "stub-model",
        })
        .to_string()
    } else {
        format!("{{\"error\":\"stub status {status}\"}}")
    };
    let reason = match status {
        200 => "OK",
        401 => "Unauthorized",
        403 => "Forbidden",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    };
    let response = format!(
        "HTTP/1.1 {status} {reason}\r\nContent-Type: application/json\r\n\
         Content-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.write_all(response.as_bytes());
    let _ = stream.flush();

    in_flight.fetch_sub(1, Ordering::SeqCst);
}
