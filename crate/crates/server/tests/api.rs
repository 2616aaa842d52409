use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use lowmt_core::backends::{Engine, ModelDescriptor, Registry, ToyCipher};
use lowmt_server::{router, AppState, ServerConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

struct Fixture {
    _dir: tempfile::TempDir,
    state: Arc<AppState>,
}

fn descriptor(key: &str, engine: Engine) -> ModelDescriptor {
    ModelDescriptor::new(key.parse().unwrap(), engine)
}

fn fixture(capacity: usize) -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    let mut reg = Registry::create(dir.path().join("registry")).unwrap();
    reg.register(descriptor("toy/ft/yue-en", Engine::Cipher { seed: 7 })).unwrap();
    reg.register(descriptor("toy/ft/en-yue", Engine::Cipher { seed: 7 })).unwrap();
    reg.register(descriptor("toy/ft-syn-1:1/yue-en", Engine::Cipher { seed: 7 })).unwrap();
    reg.register(descriptor("nllb/baseline/yue-en", Engine::Copy)).unwrap();
    let mut broken = descriptor("mbart/ft/yue-en", Engine::Table);
    broken.path = dir.path().join("secret/missing-table.json");
    reg.register(broken).unwrap();
    reg.register(descriptor(
        "opus/ft/yue-en",
        Engine::Command {
            program: "sh".into(),
            args: vec!["-c".into(), "echo 'segfault in /opt/models/opus' >&2; exit 139".into()],
        },
    ))
    .unwrap();
    let config = ServerConfig {
        capacity,
        max_input_chars: 50,
        max_batch: 3,
        registry: reg.root().to_path_buf(),
        ..Default::default()
    };
    Fixture {
        state: AppState::new(config, reg),
        _dir: dir,
    }
}

async fn call(f: &Fixture, req: Request<Body>) -> (StatusCode, Value) {
    let resp = router(f.state.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let body = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, body)
}

async fn get(f: &Fixture, uri: &str) -> (StatusCode, Value) {
    call(f, Request::get(uri).body(Body::empty()).unwrap()).await
}

async fn post(f: &Fixture, body: Value) -> (StatusCode, Value) {
    let req = Request::post("/translate")
        .header("content-type", "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    call(f, req).await
}

fn tr(model_type: &str, category: &str, src: &str, tgt: &str, text: &str) -> Value {
    json!({"model_type": model_type, "training_category": category, "source_lang": src, "target_lang": tgt, "text": text})
}

fn names(v: &Value) -> Vec<String> {
    v["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| format!("{}/{}/{}-{}", m["model_type"].as_str().unwrap(), m["training_category"].as_str().unwrap(), m["source_lang"].as_str().unwrap(), m["target_lang"].as_str().unwrap()))
        .collect()
}

#[tokio::test]
async fn list_filters() {
    let f = fixture(2);
    let (s, all) = get(&f, "/models").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(names(&all).len(), 6);
    let (_, toy) = get(&f, "/models?type=toy").await;
    assert_eq!(names(&toy), ["toy/ft/yue-en", "toy/ft/en-yue", "toy/ft-syn-1:1/yue-en"]);
    let (_, toy_en) = get(&f, "/models?type=toy&source=en").await;
    assert_eq!(names(&toy_en), ["toy/ft/en-yue"]);
    let (_, nllb) = get(&f, "/models?type=nllb&source=yue").await;
    assert_eq!(names(&nllb), ["nllb/baseline/yue-en"]);
    assert_eq!(nllb["models"][0]["display_name"], "nllb-baseline");
    assert!(f.state.manager().resident().is_empty(), "listing must not load models");
}

#[tokio::test]
async fn unknown_filter_values_list_allowed() {
    let f = fixture(2);
    let (s, body) = get(&f, "/models?type=gpt").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(body["allowed"], json!(["opus", "nllb", "mbart", "toy"]));
    let (s, body) = get(&f, "/models?source=fr").await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(body["allowed"], json!(["yue", "en"]));
}

#[tokio::test]
async fn toy_round_trip() {
    let f = fixture(2);
    let (s, fwd) = post(&f, tr("toy", "ft", "en", "yue", "abc")).await;
    assert_eq!(s, StatusCode::OK, "{fwd}");
    let ciphered = fwd["translation"].as_str().unwrap().to_string();
    assert_eq!(ciphered, ToyCipher::new(7).decode("abc"));
    assert_eq!(fwd["model"]["display_name"], "toy-ft");
    assert!(fwd["latency_ms"].as_f64().unwrap() >= 0.0);
    let (_, back) = post(&f, tr("toy", "ft", "yue", "en", &ciphered)).await;
    assert_eq!(back["translation"], "abc");
}

#[tokio::test]
async fn multi_line_text_is_a_batch() {
    let f = fixture(2);
    let (s, body) = post(&f, tr("nllb", "baseline", "yue", "en", "一\n二\n三")).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["translation"], "一\n二\n三");
}

#[tokio::test]
async fn unresolvable_model_is_404() {
    let f = fixture(2);
    let (s, body) = post(&f, tr("nllb", "ft-syn-1:3", "yue", "en", "x")).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "model_not_found");
}

#[tokio::test]
async fn malformed_requests_are_400() {
    let f = fixture(2);
    let cases = [
        tr("gpt", "ft", "yue", "en", "x"),
        tr("toy", "ft-syn-2:1", "yue", "en", "x"),
        tr("toy", "ft", "yue", "yue", "x"),
        tr("toy", "ft", "yue", "en", "   "),
        json!({"model_type": "toy"}),
        json!({"model_type": "toy", "training_category": "ft", "source_lang": "yue", "target_lang": "en", "text": "x", "extra": 1}),
    ];
    for c in cases {
        let (s, body) = post(&f, c.clone()).await;
        assert_eq!(s, StatusCode::BAD_REQUEST, "{c} -> {body}");
        assert!(body["message"].is_string());
    }
    let (s, _) = call(&f, Request::post("/translate").body(Body::from("{not json")).unwrap()).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn oversize_input_reports_limit() {
    let f = fixture(2);
    let (s, body) = post(&f, tr("toy", "ft", "yue", "en", &"甲".repeat(51))).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(body["limit"], 50);
    let (s, body) = post(&f, tr("toy", "ft", "yue", "en", "a\nb\nc\nd")).await;
    assert_eq!(s, StatusCode::PAYLOAD_TOO_LARGE);
    assert_eq!(body["limit"], 3);
    let (s, _) = post(&f, tr("toy", "ft", "yue", "en", &"甲".repeat(50))).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn backend_failures_are_opaque_500s() {
    let f = fixture(2);
    for (base, cat) in [("mbart", "ft"), ("opus", "ft")] {
        let (s, body) = post(&f, tr(base, cat, "yue", "en", "甲乙")).await;
        assert_eq!(s, StatusCode::INTERNAL_SERVER_ERROR);
        let id = body["error_id"].as_str().unwrap();
        assert_eq!(uuid::Uuid::parse_str(id).unwrap().get_version_num(), 4);
        let text = body.to_string();
        assert!(!text.contains("secret") && !text.contains("/opt") && !text.contains("segfault"), "{text}");
    }
    // The failed load left nothing resident.
    assert!(!f.state.manager().resident().iter().any(|k| k.to_string() == "mbart/ft/yue-en"));
}

#[tokio::test]
async fn capacity_one_reloads_evicted_model() {
    let f = fixture(1);
    for (cat, src, tgt) in [("ft", "yue", "en"), ("ft", "en", "yue"), ("ft", "yue", "en")] {
        let (s, _) = post(&f, tr("toy", cat, src, tgt, "甲")).await;
        assert_eq!(s, StatusCode::OK);
    }
    let a = "toy/ft/yue-en".parse().unwrap();
    assert_eq!(f.state.manager().load_count(&a), 2);
    assert_eq!(f.state.manager().resident(), [a]);
}

#[tokio::test]
async fn repeated_calls_do_not_reload() {
    let f = fixture(2);
    for _ in 0..4 {
        post(&f, tr("toy", "ft", "yue", "en", "甲")).await;
    }
    assert_eq!(f.state.manager().load_count(&"toy/ft/yue-en".parse().unwrap()), 1);
}

#[tokio::test]
async fn newly_registered_models_appear() {
    let f = fixture(2);
    let root = f.state.config().registry.clone();
    let mut reg = Registry::open(&root).unwrap();
    reg.register(descriptor("nllb/ft/yue-en", Engine::Copy)).unwrap();
    let (_, nllb) = get(&f, "/models?type=nllb").await;
    assert_eq!(names(&nllb), ["nllb/baseline/yue-en", "nllb/ft/yue-en"]);
    let (s, _) = post(&f, tr("nllb", "ft", "yue", "en", "甲")).await;
    assert_eq!(s, StatusCode::OK);
}

#[tokio::test]
async fn healthz_and_cors() {
    let f = fixture(2);
    let (s, body) = get(&f, "/healthz").await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["capacity"], 2);
    let req = Request::get("/models").header("origin", "http://localhost:5173").body(Body::empty()).unwrap();
    let resp = router(f.state.clone()).oneshot(req).await.unwrap();
    assert_eq!(resp.headers()["access-control-allow-origin"], "http://localhost:5173");
}
