//! Concurrent translate streams against a small-capacity manager; the
//! recorded transition history must replay exactly on a sequential LRU.

use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use lowmt_core::backends::{Engine, ModelDescriptor, ModelKey, Registry};
use lowmt_server::{router, AppState, EventKind, ManagerEvent, ServerConfig};
use serde_json::json;
use tower::ServiceExt;

const KEYS: [&str; 6] = [
    "toy/ft/yue-en",
    "toy/ft/en-yue",
    "toy/ft-syn-1:1/yue-en",
    "nllb/ft/yue-en",
    "mbart/ft/yue-en",
    "opus/ft/yue-en",
];

fn replay(events: &[ManagerEvent<ModelKey>], capacity: usize) {
    let mut lru: Vec<ModelKey> = Vec::new();
    for (i, e) in events.iter().enumerate() {
        assert_eq!(e.seq, i as u64 + 1, "gap in history");
        match &e.kind {
            EventKind::Hit(k) => {
                let pos = lru.iter().position(|x| x == k).expect("hit on a non-resident model");
                let k = lru.remove(pos);
                lru.push(k);
            }
            EventKind::Loaded { key, evicted } => {
                assert!(!lru.contains(key), "double load of {key}");
                let mut expect_evicted = Vec::new();
                while lru.len() >= capacity {
                    expect_evicted.push(lru.remove(0));
                }
                assert_eq!(evicted, &expect_evicted);
                lru.push(*key);
            }
            EventKind::LoadFailed(_) => {}
        }
        assert_eq!(e.resident, lru, "event {}", e.seq);
        assert!(e.resident.len() <= capacity);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 8)]
async fn sixteen_streams_are_linearizable() {
    let dir = tempfile::tempdir().unwrap();
    let mut reg = Registry::create(dir.path()).unwrap();
    for k in KEYS {
        let key: ModelKey = k.parse().unwrap();
        reg.register(ModelDescriptor::new(key, Engine::Cipher { seed: 1 })).unwrap();
    }
    let capacity = 2;
    let events = Arc::new(Mutex::new(Vec::new()));
    let sink = events.clone();
    let config = ServerConfig {
        capacity,
        ..Default::default()
    };
    let state = AppState::with_manager(config, reg, move |m| m.with_observer(move |e| sink.lock().unwrap().push(e.clone())));
    let app = router(state.clone());

    let streams: Vec<_> = (0..16u64)
        .map(|s| {
            let app = app.clone();
            tokio::spawn(async move {
                let mut x = s.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
                for _ in 0..25 {
                    x ^= x << 13;
                    x ^= x >> 7;
                    x ^= x << 17;
                    let key: ModelKey = KEYS[(x % KEYS.len() as u64) as usize].parse().unwrap();
                    let body = json!({
                        "model_type": key.base.to_string(),
                        "training_category": key.category.to_string(),
                        "source_lang": key.direction.source.to_string(),
                        "target_lang": key.direction.target.to_string(),
                        "text": "甲乙 丙丁",
                    });
                    let req = Request::post("/translate")
                        .header("content-type", "application/json")
                        .body(Body::from(body.to_string()))
                        .unwrap();
                    let resp = app.clone().oneshot(req).await.unwrap();
                    assert_eq!(resp.status(), StatusCode::OK);
                }
            })
        })
        .collect();
    for s in streams {
        s.await.unwrap();
    }
    let events = events.lock().unwrap();
    assert_eq!(events.iter().filter(|e| !matches!(e.kind, EventKind::LoadFailed(_))).count(), 16 * 25);
    replay(&events, capacity);
}
