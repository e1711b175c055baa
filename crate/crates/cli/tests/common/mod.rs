//! Shared helpers: a local chat-completions server and config scaffolding.
#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use clues_core::backend::{ChatBackend, ChatRequest, MockBackend};
use clues_core::profiles::PopulationKind;
use clues_core::runner::{ForecastRecord, Pct, RecordStatus};
use clues_core::{Scenario, VignetteId};

/// Answers chat-completion requests on 127.0.0.1 with [`MockBackend`]
/// replies and counts them.
pub struct ChatServer {
    pub url: String,
    requests: Arc<AtomicUsize>,
}

impl ChatServer {
    pub fn start(seed: u64) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
        let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
        let requests = Arc::new(AtomicUsize::new(0));
        let mock = Arc::new(MockBackend::new(seed));
        let counter = requests.clone();
        std::thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let (mock, counter) = (mock.clone(), counter.clone());
                std::thread::spawn(move || serve(stream, &mock, &counter));
            }
        });
        Self { url, requests }
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

fn serve(stream: TcpStream, mock: &MockBackend, counter: &AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().expect("clone stream"));
    let mut out = stream;
    loop {
        let mut request_line = String::new();
        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
            return;
        }
        let mut length = 0usize;
        loop {
            let mut line = String::new();
            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                return;
            }
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((name, value)) = line.split_once(':') {
                if name.eq_ignore_ascii_case("content-length") {
                    length = value.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut body = vec![0u8; length];
        if reader.read_exact(&mut body).is_err() {
            return;
        }
        counter.fetch_add(1, Ordering::SeqCst);
        let (status, payload) = match serde_json::from_slice::<ChatRequest>(&body) {
            Ok(req) => {
                let reply = mock.complete(&req).expect("mock replies");
                ("200 OK", serde_json::json!({"choices": [{"message": {"content": reply.text}}]}).to_string())
            }
            Err(e) => ("400 Bad Request", serde_json::json!({"error": e.to_string()}).to_string()),
        };
        let head = format!(
            "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: keep-alive\r\n\r\n",
            payload.len()
        );
        if out.write_all(head.as_bytes()).and_then(|_| out.write_all(payload.as_bytes())).is_err() {
            return;
        }
    }
}

/// The corpora shipped with the demo configuration.
pub fn demo_corpora() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo/corpora").canonicalize().expect("demo corpora")
}

/// Writes `clues.toml` into `dir`: small chunks over the demo corpora, then
/// `body`.
pub fn write_config(dir: &Path, body: &str) -> PathBuf {
    let text = format!(
        "seed = 20240501\nworkers = 4\n{body}\n\n[knowledge.retrieval]\nchunk_size = 64\nchunk_overlap = 8\n",
    );
    let text = text.replace("@CORPORA@", &demo_corpora().to_string_lossy().replace('\\', "/"));
    let path = dir.join("clues.toml");
    std::fs::write(&path, text).expect("write config");
    path
}

/// A 29-row forecaster file with every trend combination represented.
pub fn write_spf_fixture(path: &Path) {
    let trends = ["continuously increase", "stay constant", "continuously decrease"];
    let mut text = String::from("ID,PCE,UNEMP\n");
    for i in 0..29 {
        text.push_str(&format!("{},{},{}\n", 100 + i, trends[i % 3], trends[(i / 3) % 3]));
    }
    std::fs::write(path, text).expect("write fixture");
}

/// An answered record; shock records carry `considerations`.
pub fn record(
    repeat: u32,
    kind: PopulationKind,
    agent: &str,
    vignette: &str,
    scenario: Scenario,
    forecast: (i64, i64),
    considerations: &str,
) -> ForecastRecord {
    ForecastRecord {
        run_id: "fixture".into(),
        repeat,
        agent_id: agent.into(),
        kind,
        vignette: VignetteId::new(vignette),
        scenario,
        status: RecordStatus::Ok,
        inflation: Some(Pct(forecast.0)),
        unemployment: Some(Pct(forecast.1)),
        considerations: scenario.is_shock().then(|| considerations.to_string()),
        reasoning_content: None,
        response_hash: String::new(),
        attempts: 1,
        warnings: Vec::new(),
        error: None,
    }
}
