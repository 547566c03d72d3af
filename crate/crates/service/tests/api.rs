use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use parley_core::config::Config;
use parley_core::context::Scope;
use parley_core::engine::{Engine, Resources};
use parley_service::{router, AppState};

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

fn resources() -> Arc<Resources> {
    static RES: OnceLock<Arc<Resources>> = OnceLock::new();
    RES.get_or_init(|| {
        let mut config = Config::load(&repo_root().join("parley.toml")).unwrap();
        config.data_dir = std::env::temp_dir();
        Arc::new(Resources::load(&config).unwrap())
    })
    .clone()
}

struct Harness {
    app: Router,
    state: Arc<AppState>,
    _dir: tempfile::TempDir,
}

fn harness() -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::new(Engine::new(resources()).with_data_dir(dir.path()));
    Harness { app: router(state.clone(), None), state, _dir: dir }
}

impl Harness {
    async fn call(&self, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Value) {
        let req = Request::builder()
            .method(method)
            .uri(uri)
            .header("content-type", "application/json")
            .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
            .unwrap();
        let resp = self.app.clone().oneshot(req).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let value =
            serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
        (status, value)
    }

    async fn session(&self, user: Option<&str>) -> String {
        let body = user.map(|u| json!({ "user_id": u }).to_string());
        let (status, v) = self.call(Method::POST, "/sessions", body.as_deref()).await;
        assert_eq!(status, StatusCode::CREATED, "{v}");
        v["session_id"].as_str().unwrap().to_string()
    }

    async fn say(&self, id: &str, text: &str) -> Value {
        let (status, v) = self.turn(id, &json!({ "text": text })).await;
        assert_eq!(status, StatusCode::OK, "{v}");
        v
    }

    async fn turn(&self, id: &str, body: &Value) -> (StatusCode, Value) {
        self.call(Method::POST, &format!("/sessions/{id}/turns"), Some(&body.to_string())).await
    }
}

fn spoken(text: &str, confidence: f64) -> Value {
    let tokens: Vec<Value> = text.split_whitespace().map(|w| json!({ "text": w, "confidence": confidence })).collect();
    json!({ "asr_hypotheses": [{ "tokens": tokens }] })
}

#[tokio::test]
async fn topic_request_enters_the_dialogue() {
    let h = harness();
    let id = h.session(None).await;
    let v = h.say(&id, "let's chat about movies").await;
    assert_eq!(v["trace"]["module"], "structured_topic");
    assert_eq!(v["trace"]["topic"], "movies");
    assert_eq!(v["session_id"], id.as_str());
    assert_eq!(v["turn_counter"], 1);
    assert!(!v["response"].as_str().unwrap().is_empty());
}

#[tokio::test]
async fn gates_answer_over_http() {
    let h = harness();
    let id = h.session(None).await;
    let (status, v) = h.turn(&id, &spoken("what is the capital of france", 0.3)).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["trace"]["module"], "repeat_request");
    let v = h.say(&id, "shut up you moron").await;
    assert_eq!(v["trace"]["module"], "refuse_profanity");
    assert_eq!(v["trace"]["profane"], true);
}

#[tokio::test]
async fn bad_requests_are_rejected() {
    let h = harness();
    let (status, v) = h.turn("nope", &json!({ "text": "hi" })).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(v["error"].as_str().unwrap().contains("nope"));

    let id = h.session(None).await;
    let uri = format!("/sessions/{id}/turns");
    assert_eq!(h.call(Method::POST, &uri, Some("{not json")).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(h.call(Method::POST, &uri, Some(r#"{"txt":"hi"}"#)).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(h.turn(&id, &json!({ "text": "   " })).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(h.turn(&id, &spoken("hello", 1.5)).await.0, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = h.turn(&id, &json!({ "asr_hypotheses": [{ "tokens": [] }] })).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(h.say(&id, "hello").await["turn_counter"], 1);
}

#[tokio::test]
async fn ratings() {
    let h = harness();
    let (status, _) = h.call(Method::POST, "/sessions/ghost/rating", Some(r#"{"stars":3}"#)).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let id = h.session(None).await;
    let uri = format!("/sessions/{id}/rating");
    for bad in [0, 6, -1] {
        let (status, v) = h.call(Method::POST, &uri, Some(&json!({ "stars": bad }).to_string())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{bad}");
        assert!(v["error"].is_string());
    }
    let (status, v) = h.call(Method::POST, &uri, Some(r#"{"stars":5}"#)).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(v["topics_visited"], json!([]));
    assert_eq!(v["stars"], 5);

    h.say(&id, "let's talk about movies").await;
    h.say(&id, "tell me a joke").await;
    let (_, v) = h.call(Method::POST, &uri, Some(r#"{"stars":4}"#)).await;
    assert_eq!(v["topics_visited"], json!(["movies"]));
}

#[tokio::test]
async fn sessions_are_distinct_and_restorable() {
    let h = harness();
    let a = h.session(None).await;
    let b = h.session(None).await;
    assert_ne!(a, b);
    h.say(&a, "let's chat about movies").await;
    assert_eq!(h.say(&b, "hello").await["turn_counter"], 1);

    // a second service over the same store picks the session up from disk
    let other = AppState::new(Engine::new(resources()).with_data_dir(h._dir.path()));
    let h2 = Harness { app: router(other.clone(), None), state: other, _dir: tempfile::tempdir().unwrap() };
    let v = h2.say(&a, "Inception").await;
    assert_eq!(v["turn_counter"], 2);
    assert_eq!(v["trace"]["topic"], "movies");
}

#[tokio::test]
async fn long_term_memory_follows_user_id() {
    let h = harness();
    let a = h.session(Some("u1")).await;
    for text in ["tell me a joke", "yes", "yes", "yes"] {
        h.say(&a, text).await;
    }
    let b = h.session(Some("u1")).await;
    let c = h.session(Some("u2")).await;
    let engine = h.state.engine();
    let likes =
        |id: &str| engine.open_session(id).unwrap().unwrap().recall(Scope::LongTerm, "likes_jokes").map(|v| v.render());
    assert_eq!(likes(&b).as_deref(), Some("yes"));
    assert_eq!(likes(&c), None);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_turns_are_serialized() {
    let h = Arc::new(harness());
    let id = h.session(None).await;
    let tasks: Vec<_> = (0..16)
        .map(|i| {
            let (h, id) = (h.clone(), id.clone());
            tokio::spawn(async move { h.say(&id, if i % 2 == 0 { "hello" } else { "how are you" }).await })
        })
        .collect();
    let mut counters = Vec::new();
    for t in tasks {
        counters.push(t.await.unwrap()["turn_counter"].as_u64().unwrap());
    }
    counters.sort_unstable();
    assert_eq!(counters, (1..=16).collect::<Vec<u64>>());
}

#[tokio::test]
async fn metrics_and_health() {
    let h = harness();
    let (status, v) = h.call(Method::GET, "/metrics", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["topics"], json!([]));

    let id = h.session(None).await;
    h.say(&id, "let's talk about movies").await;
    h.say(&id, "Inception").await;
    h.call(Method::POST, &format!("/sessions/{id}/rating"), Some(r#"{"stars":4}"#)).await;
    let (_, v) = h.call(Method::GET, "/metrics", None).await;
    assert_eq!(v["topics"][0]["topic"], "movies");
    let (status, tsv) = h.call(Method::GET, "/metrics?format=tsv", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(tsv.as_str().unwrap().lines().nth(1).unwrap().starts_with("movies\t"), "{tsv}");
    assert_eq!(h.call(Method::GET, "/metrics?format=xml", None).await.0, StatusCode::BAD_REQUEST);

    let (status, v) = h.call(Method::GET, "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["status"], "ok");
    assert!(v["topics"].as_array().unwrap().iter().any(|t| t == "movies"));
}
