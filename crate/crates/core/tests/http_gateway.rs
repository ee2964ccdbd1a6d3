use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde_json::{json, Value};
use taxometer::gateway::http::SidecarClient;
use taxometer::gateway::{cosine, FillMaskProvider, GatewayError, NliPair, NliProvider, SimilarityProvider};

#[derive(Default)]
struct Sidecar {
    embed_batches: Mutex<Vec<usize>>,
    nli_batches: Mutex<Vec<usize>>,
    failures_left: AtomicUsize,
    drop_one: bool,
    bad_sum: bool,
}

fn vector_for(text: &str) -> Vec<f64> {
    let n = text.len() as f64;
    vec![n, 1.0, (text.bytes().map(u64::from).sum::<u64>() % 7) as f64]
}

async fn embed(State(s): State<Arc<Sidecar>>, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    if s.failures_left.load(Ordering::SeqCst) > 0 {
        s.failures_left.fetch_sub(1, Ordering::SeqCst);
        return (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"error": "loading"})));
    }
    let texts: Vec<String> = serde_json::from_value(body["texts"].clone()).unwrap();
    s.embed_batches.lock().unwrap().push(texts.len());
    let mut vectors: Vec<Vec<f64>> = texts.iter().map(|t| vector_for(t)).collect();
    if s.drop_one {
        vectors.pop();
    }
    let truncated = texts.iter().filter(|t| t.len() > 40).count();
    (
        StatusCode::OK,
        Json(json!({"vectors": vectors, "model": "test-embedder", "truncated": truncated})),
    )
}

async fn nli(State(s): State<Arc<Sidecar>>, Json(body): Json<Value>) -> Json<Value> {
    let pairs = body["pairs"].as_array().unwrap();
    s.nli_batches.lock().unwrap().push(pairs.len());
    let judgments: Vec<Value> = pairs
        .iter()
        .map(|p| {
            let same = p["premise"] == p["hypothesis"];
            let entails = if same { 0.9 } else { 0.2 };
            let contradicts = if s.bad_sum { 0.5 } else { (1.0 - entails) / 2.0 };
            json!({"contradicts": contradicts, "neutral": (1.0 - entails) / 2.0, "entails": entails})
        })
        .collect();
    Json(json!({"judgments": judgments, "model": "test-nli"}))
}

async fn fill_mask(Json(body): Json<Value>) -> Json<Value> {
    let k = body["k"].as_u64().unwrap() as usize;
    let candidates: Vec<Value> = ["Fruit", "fruit", "food", "plant"]
        .iter()
        .enumerate()
        .map(|(i, t)| json!({"token": t, "score": 0.5 / (i + 1) as f64}))
        .take(k + 1)
        .collect();
    Json(json!({"candidates": candidates}))
}

async fn health() -> Json<Value> {
    Json(
        json!({"status": "ok", "models": {"embed": "test-embedder", "nli": "test-nli"}, "versions": {"server": "1.2"}}),
    )
}

/// Starts a sidecar on an ephemeral port and returns its base URL.
fn serve(state: Sidecar) -> (String, Arc<Sidecar>) {
    let state = Arc::new(state);
    let app = Router::new()
        .route("/v1/embed", post(embed))
        .route("/v1/nli", post(nli))
        .route("/v1/fill_mask", post(fill_mask))
        .route("/v1/health", get(health))
        .with_state(state.clone());
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .unwrap();
        runtime.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, app).await.unwrap();
        });
    });
    let addr = rx.recv().unwrap();
    (format!("http://{addr}"), state)
}

fn texts(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("text number {i}")).collect()
}

#[test]
fn embeddings_are_batched_in_order_and_unit_norm() {
    let (url, state) = serve(Sidecar::default());
    let client = SidecarClient::new(url);
    let input = texts(150);
    let vectors = client.embed(&input).unwrap();
    assert_eq!(vectors.len(), 150);
    assert_eq!(*state.embed_batches.lock().unwrap(), vec![64, 64, 22]);
    for (text, v) in input.iter().zip(&vectors) {
        let norm: f32 = v.iter().map(|x| x * x).sum::<f32>().sqrt();
        assert!((norm - 1.0).abs() < 1e-6);
        let expected = vector_for(text);
        let expected: Vec<f32> = expected.iter().map(|&x| x as f32).collect();
        assert!((cosine(v, &expected) - 1.0).abs() < 1e-6);
    }
}

#[test]
fn nli_batches_of_thirty_two() {
    let (url, state) = serve(Sidecar::default());
    let client = SidecarClient::new(url);
    let pairs: Vec<NliPair> = (0..70)
        .map(|i| {
            if i % 2 == 0 {
                NliPair::new("a thing", "a thing")
            } else {
                NliPair::new(format!("premise {i}"), "hypothesis")
            }
        })
        .collect();
    let judgments = client.judge(&pairs).unwrap();
    assert_eq!(*state.nli_batches.lock().unwrap(), vec![32, 32, 6]);
    for (i, j) in judgments.iter().enumerate() {
        assert!(j.is_valid());
        assert_eq!(j.entails, if i % 2 == 0 { 0.9 } else { 0.2 });
    }
}

#[test]
fn transient_unavailability_is_retried() {
    let state = Sidecar::default();
    state.failures_left.store(2, Ordering::SeqCst);
    let (url, _) = serve(state);
    let client = SidecarClient::new(url).with_retries(3, Duration::from_millis(5));
    assert_eq!(client.embed(&texts(3)).unwrap().len(), 3);
}

#[test]
fn persistent_unavailability_fails_the_call() {
    let state = Sidecar::default();
    state.failures_left.store(100, Ordering::SeqCst);
    let (url, _) = serve(state);
    let client = SidecarClient::new(url).with_retries(2, Duration::from_millis(1));
    assert!(matches!(
        client.embed(&texts(3)),
        Err(GatewayError::BackendUnavailable(_))
    ));
}

#[test]
fn unreachable_sidecar_is_unavailable() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    drop(listener);
    let client = SidecarClient::new(url).with_retries(1, Duration::from_millis(1));
    assert!(matches!(
        client.embed(&texts(1)),
        Err(GatewayError::BackendUnavailable(_))
    ));
    assert!(client.health().is_err());
}

#[test]
fn short_batches_fail_the_whole_call() {
    let (url, _) = serve(Sidecar {
        drop_one: true,
        ..Default::default()
    });
    let client = SidecarClient::new(url);
    assert!(matches!(
        client.embed(&texts(100)),
        Err(GatewayError::MalformedResponse(_))
    ));
}

#[test]
fn judgments_that_do_not_sum_to_one_are_rejected() {
    let (url, _) = serve(Sidecar {
        bad_sum: true,
        ..Default::default()
    });
    let client = SidecarClient::new(url);
    let err = client.judge(&[NliPair::new("a", "b")]).unwrap_err();
    assert!(matches!(err, GatewayError::MalformedResponse(_)));
}

#[test]
fn fill_mask_is_trimmed_and_deduplicated() {
    let (url, _) = serve(Sidecar::default());
    let client = SidecarClient::new(url);
    let got = client.fill_mask("apple is a kind of [MASK].", 2).unwrap();
    let tokens: Vec<&str> = got.iter().map(|c| c.token.as_str()).collect();
    assert_eq!(tokens.len(), 2);
    assert!(tokens[0].eq_ignore_ascii_case("fruit"));
    assert_eq!(tokens[1], "food");
    assert!(matches!(
        client.fill_mask("no mask here", 2),
        Err(GatewayError::NoMask { found: 0, .. })
    ));
}

#[test]
fn fingerprint_includes_model_versions() {
    let (url, _) = serve(Sidecar::default());
    let client = SidecarClient::new(url);
    let fp = SimilarityProvider::fingerprint(&client);
    assert!(fp.contains("test-embedder"));
    assert!(fp.contains("1.2"));
    assert_eq!(fp, NliProvider::fingerprint(&client));
}

#[test]
fn truncation_counts_accumulate() {
    let (url, _) = serve(Sidecar::default());
    let client = SidecarClient::new(url);
    let input = vec!["short".to_string(), "x".repeat(60), "y".repeat(41)];
    client.embed(&input).unwrap();
    assert_eq!(client.truncated(), 2);
}

#[test]
fn concurrent_callers_share_the_client() {
    let (url, state) = serve(Sidecar::default());
    let client = Arc::new(SidecarClient::new(url).with_max_in_flight(2));
    let handles: Vec<_> = (0..6)
        .map(|i| {
            let client = client.clone();
            std::thread::spawn(move || client.embed(&[format!("thread {i}")]).unwrap())
        })
        .collect();
    for h in handles {
        assert_eq!(h.join().unwrap().len(), 1);
    }
    assert_eq!(state.embed_batches.lock().unwrap().len(), 6);
}
