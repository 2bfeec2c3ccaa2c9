//! Wire-protocol client against an in-process HTTP server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use deduce_cli::batch::{ModelSet, SyntheticModels};
use deduce_cli::remote::{RemoteBackend, RemoteOptions};
use deduce_core::dataset::Example;
use deduce_core::synthetic::{self, SyntheticBackend};
use deduce_core::{BackendError, EntailmentBackend, Goal, HeuristicKind, PairScoreBackend, SearchConfig, Statement, StepBackend};
use serde_json::{json, Value};

type Handler = dyn Fn(&str, &Value) -> (u16, String) + Send + Sync;

struct FakeServer {
    url: String,
    log: Arc<Mutex<Vec<(String, Value)>>>,
}

fn read_request(stream: &mut TcpStream) -> Option<(String, String)> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut request_line = String::new();
    reader.read_line(&mut request_line).ok()?;
    let path = request_line.split_whitespace().nth(1)?.to_string();
    let mut length = 0;
    loop {
        let mut line = String::new();
        reader.read_line(&mut line).ok()?;
        if line == "\r\n" || line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                length = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; length];
    reader.read_exact(&mut body).ok()?;
    Some((path, String::from_utf8(body).ok()?))
}

fn serve(handler: Box<Handler>) -> FakeServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let log = Arc::new(Mutex::new(Vec::new()));
    let handler: Arc<Handler> = Arc::from(handler);
    let server_log = Arc::clone(&log);
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let handler = Arc::clone(&handler);
            let log = Arc::clone(&server_log);
            std::thread::spawn(move || {
                let Some((path, body)) = read_request(&mut stream) else { return };
                let value: Value = serde_json::from_str(&body).unwrap_or(Value::Null);
                log.lock().unwrap().push((path.clone(), value.clone()));
                let (status, text) = handler(&path, &value);
                let reply = format!(
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                    text.len()
                );
                let _ = stream.write_all(reply.as_bytes());
            });
        }
    });
    FakeServer { url, log }
}

fn fast_options() -> RemoteOptions {
    RemoteOptions { timeout: Duration::from_secs(10), retries: 2, backoff: Duration::from_millis(5), max_in_flight: 4 }
}

fn st(id: u32, text: &str) -> Statement {
    Statement::premise(id, text)
}

fn fixture(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/wire").join(name);
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Replies with the fixture response only when the request matches it exactly.
fn fixture_server(names: &[&str]) -> FakeServer {
    let fixtures: Vec<Value> = names.iter().map(|n| fixture(n)).collect();
    serve(Box::new(move |path, body| {
        for f in &fixtures {
            if f["path"] == path && &f["request"] == body {
                return (200, f["response"].to_string());
            }
        }
        (400, json!({"error": "no fixture matches"}).to_string())
    }))
}

#[test]
fn golden_step_fixture() {
    let f = fixture("step.json");
    let server = fixture_server(&["step.json"]);
    let client = RemoteBackend::new(&server.url, fast_options());
    let (a, b) = (st(0, "cats are mammals"), st(1, "mammals have fur"));
    assert_eq!(client.sample_conclusion(&a, &b, 0.9, 17).unwrap(), f["response"]["conclusion"]);
    // the likelihood arrived with the sample and is served from the memo
    assert_eq!(client.repeat_logprob(&a, &b).unwrap(), -4.2);
    assert_eq!(server.log.lock().unwrap().len(), 1);
}

#[test]
fn golden_entail_and_pair_fixtures() {
    let server = fixture_server(&["entail.json", "pair_score_goal.json", "pair_score_no_goal.json"]);
    let client = RemoteBackend::new(&server.url, fast_options());
    assert_eq!(client.entail_prob(&st(0, "cats have fur"), "cats have hair").unwrap(), 0.93);
    let goal = Goal::new("cats have fur").unwrap();
    assert_eq!(client.pair_score(&st(0, "cats are mammals"), &st(1, "mammals have fur"), Some(&goal)).unwrap(), 1.7);
    assert_eq!(client.pair_score(&st(0, "cats are mammals"), &st(1, "glass is transparent"), None).unwrap(), -0.25);
    let log = server.log.lock().unwrap();
    assert_eq!(log.len(), 3);
    // `goal` is always present, explicitly null when absent
    assert_eq!(log[2].1.as_object().unwrap().get("goal"), Some(&Value::Null));
}

#[test]
fn scoring_calls_are_memoized() {
    let server = fixture_server(&["entail.json"]);
    let client = RemoteBackend::new(&server.url, fast_options());
    for _ in 0..5 {
        client.entail_prob(&st(0, "cats have fur"), "cats have hair").unwrap();
    }
    assert_eq!(server.log.lock().unwrap().len(), 1);
}

#[test]
fn schema_violations_are_protocol_errors() {
    let server = serve(Box::new(|path, _| match path {
        "/entail" => (200, r#"{"prob_entail": 1.5}"#.to_string()),
        "/pair_score" => (200, r#"{"score": 1.0, "extra": true}"#.to_string()),
        "/step" => (200, r#"{"conclusion": "x"}"#.to_string()),
        _ => (404, "{}".to_string()),
    }));
    let client = RemoteBackend::new(&server.url, fast_options());
    let (a, b) = (st(0, "a"), st(1, "b"));
    assert!(matches!(client.entail_prob(&a, "g"), Err(BackendError::Protocol(_))));
    assert!(matches!(client.pair_score(&a, &b, None), Err(BackendError::Protocol(_))));
    assert!(matches!(client.sample_conclusion(&a, &b, 0.9, 1), Err(BackendError::Protocol(_))));
}

#[test]
fn positive_repeat_logprob_is_rejected() {
    let server = serve(Box::new(|_, _| (200, r#"{"conclusion": "x", "repeat_logprob": 0.5}"#.to_string())));
    let client = RemoteBackend::new(&server.url, fast_options());
    assert!(matches!(client.sample_conclusion(&st(0, "a"), &st(1, "b"), 0.9, 1), Err(BackendError::Protocol(_))));
}

fn flaky_server(failures: usize) -> FakeServer {
    let count = Arc::new(Mutex::new(0usize));
    serve(Box::new(move |path, _| {
        let mut n = count.lock().unwrap();
        *n += 1;
        if *n <= failures {
            return (503, r#"{"error": "warming up"}"#.to_string());
        }
        match path {
            "/step" => (200, r#"{"conclusion": "c", "repeat_logprob": -1.0}"#.to_string()),
            _ => (200, r#"{"prob_entail": 0.5}"#.to_string()),
        }
    }))
}

#[test]
fn scoring_retries_twice_then_gives_up() {
    let server = flaky_server(2);
    let client = RemoteBackend::new(&server.url, fast_options());
    assert_eq!(client.entail_prob(&st(0, "a"), "g").unwrap(), 0.5);
    assert_eq!(server.log.lock().unwrap().len(), 3);

    let server = flaky_server(3);
    let client = RemoteBackend::new(&server.url, fast_options());
    assert!(matches!(client.entail_prob(&st(0, "a"), "g"), Err(BackendError::Unavailable(_))));
    assert_eq!(server.log.lock().unwrap().len(), 3);
}

#[test]
fn sampling_is_never_retried() {
    let server = flaky_server(1);
    let client = RemoteBackend::new(&server.url, fast_options());
    assert!(matches!(client.sample_conclusion(&st(0, "a"), &st(1, "b"), 0.9, 3), Err(BackendError::Unavailable(_))));
    assert_eq!(server.log.lock().unwrap().len(), 1);
}

#[test]
fn unreachable_server_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let client = RemoteBackend::new(&format!("http://127.0.0.1:{port}"), fast_options());
    assert!(matches!(client.sample_conclusion(&st(0, "a"), &st(1, "b"), 0.9, 3), Err(BackendError::Unavailable(_))));
}

/// A server answering every role with the synthetic backend, so a remote
/// search must match an in-process one exactly.
fn synthetic_server(premises: Vec<String>) -> FakeServer {
    let backend = SyntheticBackend::for_premises(&premises);
    serve(Box::new(move |path, body| {
        let text = |v: &Value| v.as_str().unwrap().to_string();
        let reply = match path {
            "/step" => {
                let (a, b) = (st(0, &text(&body["inputs"][0])), st(1, &text(&body["inputs"][1])));
                let c = backend.sample_conclusion(&a, &b, body["top_p"].as_f64().unwrap(), body["seed"].as_u64().unwrap()).unwrap();
                json!({"conclusion": c, "repeat_logprob": backend.repeat_logprob(&a, &b).unwrap()})
            }
            "/entail" => json!({"prob_entail": backend.entail_prob(&st(0, &text(&body["premise"])), &text(&body["hypothesis"])).unwrap()}),
            "/pair_score" => {
                let goal = body["goal"].as_str().map(|g| Goal::new(g).unwrap());
                let (a, b) = (st(0, &text(&body["inputs"][0])), st(1, &text(&body["inputs"][1])));
                json!({"score": backend.pair_score(&a, &b, goal.as_ref()).unwrap()})
            }
            _ => return (404, "{}".to_string()),
        };
        (200, reply.to_string())
    }))
}

#[test]
fn remote_search_matches_in_process_search() {
    let examples: Vec<Example> = synthetic::suite(3, &[2, 3], 4, None, 8).unwrap();
    for e in &examples {
        let server = synthetic_server(e.premises.clone());
        let client = RemoteBackend::new(&server.url, fast_options());
        for kind in HeuristicKind::ALL {
            let config = SearchConfig { rng_seed: 5, ..Default::default() };
            let remote = client.run(e, kind, &config, &mut |_| {}).unwrap();
            let local = SyntheticModels.run(e, kind, &config, &mut |_| {}).unwrap();
            assert_eq!(remote, local, "{} {kind}", e.id);
        }
    }
}
