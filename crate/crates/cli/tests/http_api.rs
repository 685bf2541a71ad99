mod common;

use std::fs;
use std::sync::Arc;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use common::*;
use cqk_cli::history::History;
use cqk_cli::http::{router, AppState};
use cqk_core::registry::{self, ResolveOptions};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(bench: &Bench, history: History) -> Router {
    let options = ResolveOptions::new(vec![bench.path("reg")]);
    let corpora = ["tiny", "tiny-f", "news"]
        .iter()
        .map(|id| registry::resolve_corpus(id, &options).unwrap())
        .collect();
    router(Arc::new(AppState::new(corpora, history)))
}

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn query(app: &Router, corpus: &str, q: &str) -> (StatusCode, Value) {
    call(app, Method::POST, "/query", Some(json!({"corpus": corpus, "query": q}))).await
}

fn texts(page: &Value) -> Vec<String> {
    page["lines"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["text"].as_str().unwrap().to_owned())
        .collect()
}

#[tokio::test]
async fn corpora_metadata() {
    let bench = Bench::new();
    let app = app(&bench, History::in_memory());
    let (status, body) = call(&app, Method::GET, "/corpora", None).await;
    assert_eq!(status, StatusCode::OK);
    let tiny = body.as_array().unwrap().iter().find(|c| c["id"] == "tiny").unwrap();
    assert_eq!(tiny["size"], 6);
    assert_eq!(tiny["attributes"][0], json!({"name": "word", "lexiconSize": 4, "remote": null}));
    assert_eq!(tiny["structures"], json!([{"name": "s", "regions": 2}]));
    assert_eq!(tiny["aligned"], "tiny-f");
    let news = body.as_array().unwrap().iter().find(|c| c["id"] == "news").unwrap();
    assert_eq!(news["dynamic"][0], json!({"name": "isshort", "args": ["String"], "returns": "INT"}));
}

#[tokio::test]
async fn query_then_kwic() {
    let bench = Bench::new();
    let app = app(&bench, History::in_memory());
    let (status, created) = query(&app, "tiny", r#"[pos="NN.*"]"#).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(created["matchCount"], 2);
    let id = created["resultId"].as_str().unwrap();

    let (status, page) = call(&app, Method::GET, &format!("/results/{id}/kwic?context=1"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(texts(&page), ["the <cat> sat", "the <dogs> sat"]);
    assert_eq!(page["lines"][0]["match"], "cat");
    assert_eq!(page["lines"][1]["start"], 4);
    assert_eq!((page["total"].clone(), page["pageSize"].clone(), page["pages"].clone()), (json!(2), json!(50), json!(1)));

    let (_, page) = call(
        &app,
        Method::GET,
        &format!("/results/{id}/kwic?context=s&attrs=word,pos&sort=left&page=2&pageSize=1"),
        None,
    )
    .await;
    assert_eq!(texts(&page), ["the/DT <dogs/NNS> sat/VBD"]);
    assert_eq!(page["lines"][0]["index"], 1);
    assert_eq!(page["pages"], 2);

    let (status, _) = call(&app, Method::GET, &format!("/results/{id}/kwic?page=0"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, err) = call(&app, Method::GET, &format!("/results/{id}/kwic?sort=sideways"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(err["error"]["message"].as_str().unwrap().contains("sideways"));
}

#[tokio::test]
async fn error_shapes() {
    let bench = Bench::new();
    let app = app(&bench, History::in_memory());
    let (status, err) = query(&app, "tiny", r#"[pos="NN.*""#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["kind"], "syntax");
    assert_eq!(err["error"]["position"]["column"], 12);
    assert_eq!(err["error"]["position"]["line"], 1);

    let (status, err) = query(&app, "tiny", r#"[lemma="x"]"#).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["kind"], "unknown-attribute");

    let (status, err) = query(&app, "nope", r#""a""#).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(err["error"]["kind"], "not-found");

    for uri in ["/results/r99/kwic", "/results/x/aligned", "/results/r5"] {
        let (status, _) = call(&app, Method::GET, uri, None).await;
        assert_eq!(status, StatusCode::NOT_FOUND, "{uri}");
    }
    let (status, err) = call(&app, Method::POST, "/query", Some(json!({"corpus": "tiny"}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["kind"], "bad-request");
}

#[tokio::test]
async fn dynamic_failure_is_a_server_error() {
    let bench = Bench::new();
    let reg = bench.path("reg/tiny");
    let mut text = fs::read_to_string(&reg).unwrap();
    text.push_str("DYNAMIC broken(String):INT \"echo '$1' >/dev/null; exit 3\"\n");
    fs::write(&reg, text).unwrap();
    let app = app(&bench, History::in_memory());
    let (status, err) = query(&app, "tiny", "[broken(word)]").await;
    assert_eq!(status, StatusCode::INTERNAL_SERVER_ERROR);
    assert_eq!(err["error"]["kind"], "dynamic-failed");
    assert!(err["error"]["message"].as_str().unwrap().contains("broken"));
}

#[tokio::test]
async fn setop_delete_and_aligned() {
    let bench = Bench::new();
    let app = app(&bench, History::in_memory());
    let a = query(&app, "tiny", r#"[pos="N.*|DT"]"#).await.1["resultId"].clone();
    let b = query(&app, "tiny", r#"[pos="NN.*"]"#).await.1["resultId"].clone();
    let (status, d) = call(&app, Method::POST, "/results/setop", Some(json!({"kind": "difference", "a": a, "b": b}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(d["matchCount"], 2);
    let (_, page) = call(&app, Method::GET, &format!("/results/{}/kwic?context=0", d["resultId"].as_str().unwrap()), None).await;
    assert_eq!(texts(&page), ["<the>", "<the>"]);

    let f = query(&app, "tiny-f", r#""le""#).await.1["resultId"].clone();
    let (status, err) = call(&app, Method::POST, "/results/setop", Some(json!({"kind": "union", "a": a, "b": f}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["kind"], "corpus-mismatch");
    let (status, _) = call(&app, Method::POST, "/results/setop", Some(json!({"kind": "xor", "a": a, "b": b}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let a_id = a.as_str().unwrap();
    let (status, after) = call(&app, Method::DELETE, &format!("/results/{a_id}/lines"), Some(json!({"indices": [0, 2]}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(after["matchCount"], 2);
    let (_, page) = call(&app, Method::GET, &format!("/results/{a_id}/kwic?context=1"), None).await;
    assert_eq!(texts(&page), ["the <cat> sat", "the <dogs> sat"]);
    let (status, err) = call(&app, Method::DELETE, &format!("/results/{a_id}/lines"), Some(json!({"indices": [7]}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["kind"], "line-index");

    let (status, aligned) = call(&app, Method::GET, &format!("/results/{}/aligned", b.as_str().unwrap()), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(aligned["target"], "tiny-f");
    assert_eq!(aligned["lines"][0]["source"], "the <cat> sat");
    assert_eq!(aligned["lines"][1]["target"], "les chiens sont assis");
    let (status, err) = call(&app, Method::GET, &format!("/results/{}/aligned", f.as_str().unwrap()), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(err["error"]["kind"], "not-aligned");

    let (_, list) = call(&app, Method::GET, "/results", None).await;
    assert_eq!(list.as_array().unwrap().len(), 4);
    assert_eq!(list[0]["query"], r#"[pos="N.*|DT"]"#);
}

#[tokio::test]
async fn subcorpus_result() {
    let bench = Bench::new();
    let app = app(&bench, History::in_memory());
    let sub = query(&app, "tiny", "<s> []* </s>").await.1["resultId"].clone();
    let (_, first) = query(&app, "tiny", r#""cat""#).await;
    let (status, r) = call(
        &app,
        Method::POST,
        "/query",
        Some(json!({"corpus": "tiny", "query": r#"[pos="NN.*"]"#, "subcorpusResult": first["resultId"]})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(r["matchCount"], 1);
    let (_, r) = call(
        &app,
        Method::POST,
        "/query",
        Some(json!({"corpus": "tiny", "query": "[]", "subcorpusResult": sub})),
    )
    .await;
    assert_eq!(r["matchCount"], 6);
    let (status, _) = call(
        &app,
        Method::POST,
        "/query",
        Some(json!({"corpus": "tiny", "query": "[]", "subcorpusResult": "r404"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

/// The API and the CLI agree on every golden query.
#[tokio::test]
async fn http_composes_like_the_cli() {
    let bench = Bench::new();
    let app = app(&bench, History::in_memory());
    let mut text = String::new();
    for q in NEWS_QUERIES {
        let (status, created) = query(&app, "news", q).await;
        assert_eq!(status, StatusCode::OK, "{q}: {created}");
        let n = created["matchCount"].as_u64().unwrap();
        text.push_str(&format!("# {q}\n{n} match{}\n", if n == 1 { "" } else { "es" }));
        let id = created["resultId"].as_str().unwrap();
        let (_, page) = call(&app, Method::GET, &format!("/results/{id}/kwic?context=3&pageSize=1000"), None).await;
        for line in texts(&page) {
            text.push_str(&line);
            text.push('\n');
        }
    }
    assert_eq!(text, fs::read_to_string(golden("news-queries.txt")).unwrap());
}

#[tokio::test]
async fn history_round_trip() {
    let bench = Bench::new();
    let path = bench.path("session.jsonl");
    let app1 = app(&bench, History::open(&path).unwrap());
    let runs = [("news", NEWS_QUERIES[8]), ("tiny", r#""the" []?"#), ("news", NEWS_QUERIES[2])];
    let mut pages = Vec::new();
    for (corpus, q) in runs {
        let id = query(&app1, corpus, q).await.1["resultId"].as_str().unwrap().to_owned();
        pages.push(call(&app1, Method::GET, &format!("/results/{id}/kwic"), None).await.1["lines"].clone());
    }
    let (status, entry) = call(&app1, Method::POST, "/history", Some(json!({"query": "\"x\"", "corpus": "tiny"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(entry["query"], "\"x\"");

    // a new session over the same file
    let app2 = app(&bench, History::open(&path).unwrap());
    let (_, history) = call(&app2, Method::GET, "/history", None).await;
    let entries = history.as_array().unwrap();
    assert_eq!(entries.len(), 4);
    for (k, (corpus, q)) in runs.iter().enumerate() {
        assert_eq!(entries[k]["query"], *q);
        assert_eq!(entries[k]["corpus"], *corpus);
        let rerun = query(&app2, entries[k]["corpus"].as_str().unwrap(), entries[k]["query"].as_str().unwrap()).await;
        let id = rerun.1["resultId"].as_str().unwrap();
        let (_, page) = call(&app2, Method::GET, &format!("/results/{id}/kwic"), None).await;
        assert_eq!(page["lines"], pages[k]);
    }
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 7);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn slow_queries_do_not_block_reads() {
    let bench = Bench::new();
    let reg = bench.path("reg/tiny");
    let mut text = fs::read_to_string(&reg).unwrap();
    text.push_str("DYNAMIC slow(String):INT \"sleep 0.3; echo '$1' >/dev/null; echo 1\"\n");
    fs::write(&reg, text).unwrap();
    let app = app(&bench, History::in_memory());
    let slow = {
        let app = app.clone();
        tokio::spawn(async move { query(&app, "tiny", "[slow(word)]").await })
    };
    tokio::time::sleep(Duration::from_millis(50)).await;
    let started = Instant::now();
    let (status, _) = call(&app, Method::GET, "/corpora", None).await;
    assert_eq!(status, StatusCode::OK);
    let (status, _) = call(&app, Method::GET, "/history", None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(started.elapsed() < Duration::from_millis(300), "{:?}", started.elapsed());
    let (status, body) = slow.await.unwrap();
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["matchCount"], 6);
}
