//! Model client against a local stub server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use layoutjudge::client::{Backoff, ClientError, ModelClient, ModelEndpointConfig, ReplaySession};
use layoutjudge::prompts::{render_bytes, DiagnosticImages, PromptProtocol, RenderedRequest, SamplingConfig};
use layoutjudge::synth::srp_screenshot;
use layoutjudge::Protocol;
use serde_json::{json, Value};

#[derive(Clone)]
enum Reply {
    Status(u16, String),
    Ok(String),
    /// Read the request, then hold the connection open without answering.
    Hang,
    /// Answer after a pause.
    Slow(Duration, String),
}

struct Seen {
    body: Value,
    auth: Option<String>,
}

struct Stub {
    url: String,
    hits: Arc<AtomicUsize>,
    peak: Arc<AtomicUsize>,
    seen: Arc<Mutex<Vec<Seen>>>,
}

fn read_request(stream: &mut TcpStream) -> Option<Seen> {
    let mut reader = BufReader::new(stream.try_clone().ok()?);
    let mut len = 0usize;
    let mut auth = None;
    let mut line = String::new();
    reader.read_line(&mut line).ok()?;
    loop {
        line.clear();
        reader.read_line(&mut line).ok()?;
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        let (k, v) = l.split_once(':')?;
        match k.to_ascii_lowercase().as_str() {
            "content-length" => len = v.trim().parse().ok()?,
            "authorization" => auth = Some(v.trim().to_string()),
            _ => {}
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    Some(Seen { body: serde_json::from_slice(&body).ok()?, auth })
}

fn write_response(stream: &mut TcpStream, status: u16, body: &str) {
    let _ = write!(
        stream,
        "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
        body.len()
    );
    let _ = stream.flush();
}

fn completion(text: &str) -> String {
    json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
}

/// Serves `script` in order; the last entry repeats.
fn stub(script: Vec<Reply>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let hits = Arc::new(AtomicUsize::new(0));
    let in_flight = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let seen = Arc::new(Mutex::new(Vec::new()));
    let (h, f, p, s) = (hits.clone(), in_flight, peak.clone(), seen.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let n = h.fetch_add(1, Ordering::SeqCst);
            let reply = script[n.min(script.len() - 1)].clone();
            let (f, p, s) = (f.clone(), p.clone(), s.clone());
            thread::spawn(move || {
                let now = f.fetch_add(1, Ordering::SeqCst) + 1;
                p.fetch_max(now, Ordering::SeqCst);
                if let Some(req) = read_request(&mut stream) {
                    s.lock().unwrap().push(req);
                }
                match reply {
                    Reply::Status(code, body) => write_response(&mut stream, code, &body),
                    Reply::Ok(text) => write_response(&mut stream, 200, &completion(&text)),
                    Reply::Slow(d, text) => {
                        thread::sleep(d);
                        write_response(&mut stream, 200, &completion(&text));
                    }
                    Reply::Hang => thread::sleep(Duration::from_secs(5)),
                }
                f.fetch_sub(1, Ordering::SeqCst);
            });
        }
    });
    Stub { url, hits, peak, seen }
}

fn config(url: &str, env: &str) -> ModelEndpointConfig {
    std::env::set_var(env, "test-token");
    ModelEndpointConfig {
        base_url: url.into(),
        model_id: "stub-model".into(),
        auth_env: env.into(),
        timeout_secs: 1,
        max_retries: 3,
        max_concurrent: 2,
        backoff: Backoff { initial_ms: 5, factor: 2.0, cap_ms: 20 },
    }
}

fn request(id: &str, prompt: &PromptProtocol) -> RenderedRequest {
    render_bytes(
        id,
        vec![srp_screenshot(id.bytes().map(u64::from).sum(), 0.4, 0)],
        prompt,
        &SamplingConfig::default(),
        DiagnosticImages::First,
    )
    .unwrap()
}

fn diagnostic(id: &str) -> RenderedRequest {
    request(id, &PromptProtocol::builtin(Protocol::Diagnostic))
}

#[test]
fn transient_429_then_success() {
    let s = stub(vec![Reply::Status(429, "{\"error\":\"slow down\"}".into()), Reply::Ok(" raw \n".into())]);
    let client = ModelClient::live(config(&s.url, "LJ_TEST_TOKEN_429")).unwrap();
    let resp = client.complete(&diagnostic("srp-1")).unwrap();
    assert_eq!(resp.attempt_count, 2);
    assert_eq!(resp.raw_text, " raw \n", "raw text must not be trimmed");
    assert_eq!(s.hits.load(Ordering::SeqCst), 2);
}

#[test]
fn server_errors_retry_until_budget() {
    let s = stub(vec![Reply::Status(503, "down".into())]);
    let client = ModelClient::live(config(&s.url, "LJ_TEST_TOKEN_503")).unwrap();
    match client.complete(&diagnostic("srp-1")) {
        Err(ClientError::RetriesExhausted { attempts, last_cause }) => {
            assert_eq!(attempts, 4);
            assert!(last_cause.contains("503"), "{last_cause}");
        }
        other => panic!("{other:?}"),
    }
    assert_eq!(s.hits.load(Ordering::SeqCst), 4);
}

#[test]
fn auth_failure_is_not_retried() {
    let s = stub(vec![Reply::Status(401, "{\"error\":\"bad key\"}".into()), Reply::Ok("never".into())]);
    let client = ModelClient::live(config(&s.url, "LJ_TEST_TOKEN_401")).unwrap();
    let err = client.complete(&diagnostic("srp-1")).unwrap_err();
    assert!(matches!(err, ClientError::Auth { status: 401, attempts: 1 }), "{err:?}");
    assert_eq!(err.class(), "auth");
    assert_eq!(s.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn client_error_status_is_rejected_without_retry() {
    let s = stub(vec![Reply::Status(400, "bad request".into())]);
    let client = ModelClient::live(config(&s.url, "LJ_TEST_TOKEN_400")).unwrap();
    let err = client.complete(&diagnostic("srp-1")).unwrap_err();
    assert_eq!(err.class(), "rejected");
    assert_eq!(s.hits.load(Ordering::SeqCst), 1);
}

#[test]
fn timeout_on_every_attempt_names_last_cause() {
    let s = stub(vec![Reply::Hang]);
    let mut cfg = config(&s.url, "LJ_TEST_TOKEN_TIMEOUT");
    cfg.max_retries = 1;
    let client = ModelClient::live(cfg).unwrap();
    match client.complete(&diagnostic("srp-1")) {
        Err(ClientError::RetriesExhausted { attempts, last_cause }) => {
            assert_eq!(attempts, 2);
            assert!(last_cause.starts_with("timeout"), "{last_cause}");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn malformed_reply_is_typed() {
    let s = stub(vec![Reply::Status(200, "{\"choices\": []}".into())]);
    let client = ModelClient::live(config(&s.url, "LJ_TEST_TOKEN_MALFORMED")).unwrap();
    assert_eq!(client.complete(&diagnostic("srp-1")).unwrap_err().class(), "malformed_reply");
}

#[test]
fn missing_token_fails_before_dispatch() {
    let cfg = ModelEndpointConfig { auth_env: "LJ_TEST_TOKEN_UNSET_X".into(), ..Default::default() };
    let err = ModelClient::live(cfg).err().unwrap();
    assert_eq!(err.class(), "missing_auth");
    assert!(err.to_string().contains("LJ_TEST_TOKEN_UNSET_X"));
}

#[test]
fn wire_shape_and_auth_header() {
    let s = stub(vec![Reply::Ok("ok".into())]);
    let client = ModelClient::live(config(&s.url, "LJ_TEST_TOKEN_WIRE")).unwrap();
    client.complete(&diagnostic("srp-1")).unwrap();
    let seen = s.seen.lock().unwrap();
    assert_eq!(seen[0].auth.as_deref(), Some("Bearer test-token"));
    let body = &seen[0].body;
    assert_eq!(body["model"], "stub-model");
    assert_eq!(body["temperature"], 0.1);
    assert_eq!(body["max_tokens"], 4096);
    let parts = body["messages"][0]["content"].as_array().unwrap();
    assert_eq!(parts[0]["type"], "text");
    let url = parts[1]["image_url"]["url"].as_str().unwrap();
    assert!(url.starts_with("data:image/png;base64,"), "{url:.40}");
}

#[test]
fn in_flight_requests_respect_bound() {
    let s = stub(vec![Reply::Slow(Duration::from_millis(150), "ok".into())]);
    let mut cfg = config(&s.url, "LJ_TEST_TOKEN_POOL");
    cfg.max_concurrent = 3;
    let client = ModelClient::live(cfg).unwrap();
    let reqs: Vec<_> = (0..10).map(|i| diagnostic(&format!("srp-{i:03}"))).collect();
    let results = client.complete_all(&reqs);
    assert_eq!(results.len(), 10);
    for (req, res) in reqs.iter().zip(&results) {
        assert_eq!(res.as_ref().unwrap().request_digest, req.digest(), "results out of order");
    }
    let peak = s.peak.load(Ordering::SeqCst);
    assert!(peak <= 3, "peak in-flight {peak}");
    assert!(peak >= 2, "pool never ran concurrently (peak {peak})");
}

#[test]
fn record_then_replay_without_network() {
    let s = stub(vec![Reply::Ok("{\"reply\": 1}".into())]);
    let dir = tempfile::tempdir().unwrap();
    let session = dir.path().join("session.jsonl");
    let client = ModelClient::recording(config(&s.url, "LJ_TEST_TOKEN_RECORD"), &session).unwrap();
    assert_eq!(client.mode(), "record");
    let reqs: Vec<_> = (0..4).map(|i| diagnostic(&format!("srp-{i}"))).collect();
    let recorded: Vec<_> = client.complete_all(&reqs).into_iter().map(Result::unwrap).collect();
    let lines = std::fs::read_to_string(&session).unwrap().lines().count();
    assert_eq!(lines, 4);

    // replay never dials: point it at a closed port
    let cfg = ModelEndpointConfig { base_url: "http://127.0.0.1:1/v1".into(), ..Default::default() };
    let replay = ModelClient::replay(cfg.clone(), &session).unwrap();
    let hits = s.hits.load(Ordering::SeqCst);
    for (req, rec) in reqs.iter().zip(&recorded) {
        let r = replay.complete(req).unwrap();
        assert_eq!(r.raw_text, rec.raw_text);
        assert_eq!(r.attempt_count, 0);
    }
    assert_eq!(s.hits.load(Ordering::SeqCst), hits);

    // one edited prompt byte changes the digest
    let edited = PromptProtocol::custom(
        Protocol::Diagnostic,
        PromptProtocol::builtin(Protocol::Diagnostic).text().replacen('Q', "q", 1),
    );
    let err = replay.complete(&request("srp-0", &edited)).unwrap_err();
    assert!(matches!(err, ClientError::ReplayMiss { .. }), "{err:?}");

    let loaded = ReplaySession::load(&session).unwrap();
    assert_eq!(loaded.len(), 4);
}
