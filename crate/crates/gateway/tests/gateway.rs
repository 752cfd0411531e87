use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use geoforge_gateway::{
    extract_json, prompt_hash, transcript_to_jsonl, vars, BackendKind, CompletionBackend, ExtractionError, Gateway,
    GatewayConfig, GatewayError, HttpBackend, MockBackend, Role, TemplateError, TranscriptEntry,
};
use proptest::prelude::*;
use serde_json::{json, Value};

struct Counting(AtomicUsize);

impl CompletionBackend for Counting {
    fn complete(&self, _: Role, _: &str, _: &str, _: f64) -> Result<String, GatewayError> {
        self.0.fetch_add(1, Ordering::SeqCst);
        Ok("{}".into())
    }
}

fn mock_gateway(entries: Vec<TranscriptEntry>) -> Gateway {
    Gateway::with_backend(GatewayConfig::default(), Box::new(MockBackend::new(entries).unwrap()))
}

#[test]
fn each_role_has_its_placeholders() {
    let expected: [(Role, &[&str]); 9] = [
        (Role::InstructorComputation, &["aux_section", "conclusion", "problem"]),
        (Role::InstructorProof, &["aux_section", "conclusion", "problem"]),
        (Role::CoderPlotcode, &["question"]),
        (Role::Judge, &["answer", "cot", "question"]),
        (Role::DebiasStep1, &["question"]),
        (Role::DebiasStep2, &["annotations", "question_simplified"]),
        (Role::CotRewrite, &["cot", "plotting_code"]),
        (Role::ImageQc, &[]),
        (Role::Caption, &["plotting_code_str"]),
    ];
    for (role, names) in expected {
        let got: Vec<&str> = role.template().placeholders().into_iter().collect();
        assert_eq!(got, names, "{role}");
    }
}

#[test]
fn missing_placeholder_fails_before_backend() {
    let backend = Arc::new(Counting(AtomicUsize::new(0)));
    struct Shared(Arc<Counting>);
    impl CompletionBackend for Shared {
        fn complete(&self, r: Role, s: &str, p: &str, t: f64) -> Result<String, GatewayError> {
            self.0.complete(r, s, p, t)
        }
    }
    let gw = Gateway::with_backend(GatewayConfig::default(), Box::new(Shared(backend.clone())));
    let err = gw
        .complete(Role::Judge, &vars([("cot", "c"), ("answer", "a")]))
        .unwrap_err();
    assert_eq!(
        err,
        GatewayError::Template(TemplateError::Missing {
            role: Role::Judge,
            name: "question".into()
        })
    );
    let err = gw
        .complete(Role::DebiasStep1, &vars([("question", "q"), ("cot", "c")]))
        .unwrap_err();
    assert!(matches!(err, GatewayError::Template(TemplateError::Unknown { .. })));
    assert_eq!(backend.0.load(Ordering::SeqCst), 0);
    gw.complete(Role::ImageQc, &vars::<&str, &str>([])).unwrap();
    assert_eq!(backend.0.load(Ordering::SeqCst), 1);
}

#[test]
fn rendering_fills_values_verbatim() {
    let text = Role::DebiasStep1
        .template()
        .render(&vars([("question", "Given {cot} and $AB=3$.")]))
        .unwrap();
    assert!(text.contains("Given {cot} and $AB=3$."));
    assert!(!text.contains("{question}"));
    assert!(text.contains("\\frac{AO}{OC}"));
}

#[test]
fn mock_replays_recorded_bytes() {
    let v = vars([("question", "Q"), ("cot", "C"), ("answer", "5")]);
    let prompt = Role::Judge.template().render(&v).unwrap();
    let response = "```json\n{\"passed\": true, \"reason\": \"ok\"}\n```  trailing\n";
    let gw = mock_gateway(vec![TranscriptEntry::new(Role::Judge, &prompt, response)]);
    assert_eq!(gw.complete(Role::Judge, &v).unwrap(), response);

    let other = vars([("question", "Q2"), ("cot", "C"), ("answer", "5")]);
    let want = prompt_hash(Role::Judge, &Role::Judge.template().render(&other).unwrap());
    assert_eq!(gw.complete(Role::Judge, &other).unwrap_err(), GatewayError::MockMiss(want));
}

#[test]
fn prompt_hash_is_sha256_of_role_and_prompt() {
    assert_eq!(
        sha2_oracle::digest(b""),
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
    );
    assert_eq!(prompt_hash(Role::Judge, "hi"), sha2_oracle::digest(b"judge\nhi"));
    let long = "x".repeat(200);
    assert_eq!(
        prompt_hash(Role::Caption, &long),
        sha2_oracle::digest(format!("caption\n{long}").as_bytes())
    );
}

/// Standalone SHA-256 so the hash check does not reuse the library's path.
mod sha2_oracle {
    const K: [u32; 64] = [
        0x428a2f98, 0x71374491, 0xb5c0fbcf, 0xe9b5dba5, 0x3956c25b, 0x59f111f1, 0x923f82a4, 0xab1c5ed5, 0xd807aa98,
        0x12835b01, 0x243185be, 0x550c7dc3, 0x72be5d74, 0x80deb1fe, 0x9bdc06a7, 0xc19bf174, 0xe49b69c1, 0xefbe4786,
        0x0fc19dc6, 0x240ca1cc, 0x2de92c6f, 0x4a7484aa, 0x5cb0a9dc, 0x76f988da, 0x983e5152, 0xa831c66d, 0xb00327c8,
        0xbf597fc7, 0xc6e00bf3, 0xd5a79147, 0x06ca6351, 0x14292967, 0x27b70a85, 0x2e1b2138, 0x4d2c6dfc, 0x53380d13,
        0x650a7354, 0x766a0abb, 0x81c2c92e, 0x92722c85, 0xa2bfe8a1, 0xa81a664b, 0xc24b8b70, 0xc76c51a3, 0xd192e819,
        0xd6990624, 0xf40e3585, 0x106aa070, 0x19a4c116, 0x1e376c08, 0x2748774c, 0x34b0bcb5, 0x391c0cb3, 0x4ed8aa4a,
        0x5b9cca4f, 0x682e6ff3, 0x748f82ee, 0x78a5636f, 0x84c87814, 0x8cc70208, 0x90befffa, 0xa4506ceb, 0xbef9a3f7,
        0xc67178f2,
    ];

    pub fn digest(msg: &[u8]) -> String {
        let mut h: [u32; 8] = [
            0x6a09e667, 0xbb67ae85, 0x3c6ef372, 0xa54ff53a, 0x510e527f, 0x9b05688c, 0x1f83d9ab, 0x5be0cd19,
        ];
        let mut data = msg.to_vec();
        data.push(0x80);
        while data.len() % 64 != 56 {
            data.push(0);
        }
        data.extend_from_slice(&((msg.len() as u64) * 8).to_be_bytes());
        for block in data.chunks(64) {
            let mut w = [0u32; 64];
            for i in 0..16 {
                w[i] = u32::from_be_bytes(block[4 * i..4 * i + 4].try_into().unwrap());
            }
            for i in 16..64 {
                let s0 = w[i - 15].rotate_right(7) ^ w[i - 15].rotate_right(18) ^ (w[i - 15] >> 3);
                let s1 = w[i - 2].rotate_right(17) ^ w[i - 2].rotate_right(19) ^ (w[i - 2] >> 10);
                w[i] = w[i - 16].wrapping_add(s0).wrapping_add(w[i - 7]).wrapping_add(s1);
            }
            let mut v = h;
            for i in 0..64 {
                let s1 = v[4].rotate_right(6) ^ v[4].rotate_right(11) ^ v[4].rotate_right(25);
                let ch = (v[4] & v[5]) ^ (!v[4] & v[6]);
                let t1 = v[7].wrapping_add(s1).wrapping_add(ch).wrapping_add(K[i]).wrapping_add(w[i]);
                let s0 = v[0].rotate_right(2) ^ v[0].rotate_right(13) ^ v[0].rotate_right(22);
                let maj = (v[0] & v[1]) ^ (v[0] & v[2]) ^ (v[1] & v[2]);
                let t2 = s0.wrapping_add(maj);
                v = [t1.wrapping_add(t2), v[0], v[1], v[2], v[3].wrapping_add(t1), v[4], v[5], v[6]];
            }
            for (a, b) in h.iter_mut().zip(v) {
                *a = a.wrapping_add(b);
            }
        }
        h.iter().map(|x| format!("{x:08x}")).collect()
    }
}

#[test]
fn recording_round_trips_through_replay() {
    let gw = Gateway::with_backend(GatewayConfig::default(), Box::new(Counting(AtomicUsize::new(0)))).recording();
    let v1 = vars([("question", "one")]);
    let v2 = vars([("question", "two")]);
    gw.complete(Role::DebiasStep1, &v2).unwrap();
    gw.complete(Role::DebiasStep1, &v1).unwrap();
    gw.complete(Role::DebiasStep1, &v1).unwrap();
    let t = gw.transcript();
    assert_eq!(t.len(), 2);
    let jsonl = transcript_to_jsonl(&t);
    assert_eq!(jsonl.lines().count(), 2);
    for line in jsonl.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["prompt_hash", "response", "role"]);
    }
    let replay = Gateway::with_backend(GatewayConfig::default(), Box::new(MockBackend::from_jsonl(&jsonl).unwrap()));
    assert_eq!(replay.complete(Role::DebiasStep1, &v1).unwrap(), "{}");
}

#[test]
fn conflicting_transcript_entries_are_rejected() {
    let a = TranscriptEntry::new(Role::Caption, "p", "x");
    let b = TranscriptEntry::new(Role::Caption, "p", "y");
    assert!(matches!(MockBackend::new([a, b]), Err(GatewayError::Transcript(_))));
    assert!(MockBackend::from_jsonl("not json\n").is_err());
}

#[test]
fn extraction_examples() {
    assert_eq!(extract_json("```json\n{\"answer\": \"5\"}\n```").unwrap(), json!({"answer": "5"}));
    assert_eq!(
        extract_json("Sure! {\"a\": {\"b\": 1}} thanks").unwrap(),
        json!({"a": {"b": 1}})
    );
    assert_eq!(extract_json("no json here"), Err(ExtractionError::NoObject));
    assert_eq!(
        extract_json("set {x} first, then {\"k\": \"}{\"} done").unwrap(),
        json!({"k": "}{"})
    );
    assert_eq!(extract_json("{\"open\": 1"), Err(ExtractionError::NoObject));
    assert_eq!(extract_json("```\n{\"x\": [1, 2]}\n```\n{\"y\": 0}").unwrap(), json!({"x": [1, 2]}));
}

fn judge_with(response: &str) -> geoforge_gateway::Verdict {
    let v = vars([("question", "Q"), ("cot", "C"), ("answer", "A")]);
    let prompt = Role::Judge.template().render(&v).unwrap();
    mock_gateway(vec![TranscriptEntry::new(Role::Judge, &prompt, response)])
        .judge("Q", "C", "A")
        .unwrap()
}

#[test]
fn judge_verdicts() {
    let v = judge_with(r#"{"passed": true, "reason": "consistent"}"#);
    assert!(v.passed);
    assert_eq!(v.reason, "consistent");

    let v = judge_with(r#"{"passed": "yes", "reason": "fine"}"#);
    assert!(!v.passed);
    assert_eq!(v.reason, "malformed verdict");

    let v = judge_with("The problem looks fine to me.");
    assert!(!v.passed);
    assert_eq!(v.reason, "malformed verdict");

    let v = judge_with(r#"{"passed": false}"#);
    assert!(!v.passed);
    assert_eq!(v.reason, "");
    let v = judge_with(r#"{"passed": true}"#);
    assert!(v.passed);
    assert_eq!(v.reason, "");
}

#[test]
fn config_validation_and_temperatures() {
    let cfg = GatewayConfig::default();
    assert_eq!(cfg.temperature(Role::InstructorProof), 0.7);
    assert_eq!(cfg.temperature(Role::CoderPlotcode), 0.2);
    assert_eq!(cfg.temperature(Role::Judge), 0.0);
    let bad = GatewayConfig {
        concurrency: 0,
        ..GatewayConfig::default()
    };
    assert!(matches!(bad.validate(), Err(GatewayError::Config(_))));
    let parsed: GatewayConfig = serde_json::from_str(r#"{"temperatures": {"judge": 0.1}, "max_retries": 0}"#).unwrap();
    assert_eq!(parsed.temperature(Role::Judge), 0.1);
    assert_eq!(parsed.max_retries, 0);
    assert!(serde_json::from_str::<GatewayConfig>(r#"{"retries": 1}"#).is_err());
    assert!(matches!(
        Gateway::from_config(GatewayConfig::default()),
        Err(GatewayError::Config(_))
    ));
}

/// What the stub does with the n-th request (0-based).
#[derive(Clone, Copy)]
enum Reply {
    Content,
    Drop,
    Status(u16),
}

struct Stub {
    url: String,
    requests: Arc<AtomicUsize>,
    max_in_flight: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<String>>>,
}

fn read_request(stream: &TcpStream) -> Option<String> {
    let mut reader = BufReader::new(stream);
    let mut len = 0;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line).ok()? == 0 {
            return None;
        }
        if line == "\r\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().ok()?;
            }
        }
    }
    let mut body = vec![0; len];
    reader.read_exact(&mut body).ok()?;
    String::from_utf8(body).ok()
}

fn stub(plan: impl Fn(usize) -> Reply + Send + Sync + 'static, delay: Duration) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let in_flight = Arc::new(AtomicUsize::new(0));
    let max_in_flight = Arc::new(AtomicUsize::new(0));
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let plan = Arc::new(plan);
    let (rq, mx, bd) = (requests.clone(), max_in_flight.clone(), bodies.clone());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { break };
            let (rq, inf, mx, bd, plan) = (rq.clone(), in_flight.clone(), mx.clone(), bd.clone(), plan.clone());
            thread::spawn(move || {
                let Some(body) = read_request(&stream) else { return };
                let n = rq.fetch_add(1, Ordering::SeqCst);
                let now = inf.fetch_add(1, Ordering::SeqCst) + 1;
                mx.fetch_max(now, Ordering::SeqCst);
                bd.lock().unwrap().push(body);
                thread::sleep(delay);
                inf.fetch_sub(1, Ordering::SeqCst);
                let (status, text) = match plan(n) {
                    Reply::Drop => return,
                    Reply::Status(s) => (s, "{\"error\": \"nope\"}".to_string()),
                    Reply::Content => (
                        200,
                        json!({"choices": [{"message": {"role": "assistant", "content": format!("reply {n}")}}]})
                            .to_string(),
                    ),
                };
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                    text.len()
                );
            });
        }
    });
    Stub {
        url,
        requests,
        max_in_flight,
        bodies,
    }
}

fn http_gateway(url: &str, max_retries: u32, concurrency: usize) -> Gateway {
    let cfg = GatewayConfig {
        backend: BackendKind::Http,
        endpoint: url.to_string(),
        model: "stub-model".into(),
        max_retries,
        backoff_ms: 5,
        timeout_ms: 5_000,
        concurrency,
        ..GatewayConfig::default()
    };
    Gateway::with_backend(cfg.clone(), Box::new(HttpBackend::new(cfg.http_settings())))
}

#[test]
fn http_returns_first_choice_content() {
    let s = stub(|_| Reply::Content, Duration::ZERO);
    let gw = http_gateway(&s.url, 0, 1);
    let out = gw.complete(Role::Judge, &vars([("question", "Q"), ("cot", "C"), ("answer", "A")])).unwrap();
    assert_eq!(out, "reply 0");
    let body: Value = serde_json::from_str(&s.bodies.lock().unwrap()[0]).unwrap();
    assert_eq!(body["model"], "stub-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["role"], "user");
    assert!(body["messages"][1]["content"].as_str().unwrap().contains("Problem: Q"));
}

#[test]
fn http_retries_transport_errors() {
    let s = stub(|n| if n < 2 { Reply::Drop } else { Reply::Content }, Duration::ZERO);
    let gw = http_gateway(&s.url, 3, 1);
    assert_eq!(gw.complete(Role::ImageQc, &vars::<&str, &str>([])).unwrap(), "reply 2");
    assert_eq!(s.requests.load(Ordering::SeqCst), 3);

    let s = stub(|_| Reply::Status(503), Duration::ZERO);
    let gw = http_gateway(&s.url, 2, 1);
    let err = gw.complete(Role::ImageQc, &vars::<&str, &str>([])).unwrap_err();
    assert!(matches!(err, GatewayError::Unavailable { attempts: 3, .. }), "{err}");
    assert_eq!(s.requests.load(Ordering::SeqCst), 3);

    let s = stub(|_| Reply::Status(400), Duration::ZERO);
    let gw = http_gateway(&s.url, 2, 1);
    let err = gw.complete(Role::ImageQc, &vars::<&str, &str>([])).unwrap_err();
    assert!(matches!(err, GatewayError::Http { status: 400, .. }), "{err}");
    assert_eq!(s.requests.load(Ordering::SeqCst), 1);
}

#[test]
fn unreachable_endpoint_is_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let gw = http_gateway(&format!("http://127.0.0.1:{port}/"), 1, 1);
    let err = gw.complete(Role::ImageQc, &vars::<&str, &str>([])).unwrap_err();
    assert!(matches!(err, GatewayError::Unavailable { attempts: 2, .. }), "{err}");
}

#[test]
fn http_respects_concurrency_cap() {
    let s = stub(|_| Reply::Content, Duration::from_millis(60));
    let gw = Arc::new(http_gateway(&s.url, 0, 2));
    let handles: Vec<_> = (0..8)
        .map(|_| {
            let gw = gw.clone();
            thread::spawn(move || gw.complete(Role::ImageQc, &vars::<&str, &str>([])).unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(s.requests.load(Ordering::SeqCst), 8);
    let peak = s.max_in_flight.load(Ordering::SeqCst);
    assert!((1..=2).contains(&peak), "peak in flight {peak}");
}

fn arb_json() -> impl Strategy<Value = Value> {
    let leaf = prop_oneof![
        Just(Value::Null),
        any::<bool>().prop_map(Value::Bool),
        any::<i64>().prop_map(|i| json!(i)),
        "[a-z{}\"\\\\ ]{0,8}".prop_map(Value::String),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 0..4).prop_map(Value::Array),
            prop::collection::btree_map("[a-z]{1,4}", inner, 0..4).prop_map(|m| Value::Object(m.into_iter().collect())),
        ]
    })
}

fn arb_object() -> impl Strategy<Value = Value> {
    prop::collection::btree_map("[a-z]{1,4}", arb_json(), 0..4).prop_map(|m| Value::Object(m.into_iter().collect()))
}

proptest! {
    #[test]
    fn extracts_embedded_object(obj in arb_object(), pre in "[A-Za-z .,!?]{0,20}", post in "[A-Za-z .,!?{}]{0,20}", fence in any::<bool>()) {
        let body = serde_json::to_string_pretty(&obj).unwrap();
        let text = if fence { format!("{pre}\n```json\n{body}\n```\n{post}") } else { format!("{pre}{body}{post}") };
        prop_assert_eq!(extract_json(&text).unwrap(), obj);
    }

    #[test]
    fn extracted_values_reserialize(text in "\\PC{0,60}") {
        if let Ok(v) = extract_json(&text) {
            prop_assert!(v.is_object());
            let again: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
            prop_assert_eq!(again, v);
        }
    }
}
