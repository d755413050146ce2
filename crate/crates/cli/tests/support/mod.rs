//! Helpers shared by the CLI test targets: fixture files on disk, the binary, a stub endpoint.

#![allow(dead_code)]

use std::ffi::OsStr;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use axum::extract::State;
use axum::routing::post;
use axum::{Json, Router};
use gradrank_core::encoder::TrainConfig;
use gradrank_core::fixture::{separable_fixture, Fixture, FixtureConfig};
use gradrank_core::io::{write_contexts, write_qrels, write_tsv};
use serde_json::{json, Value};

pub fn gradrank<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<OsStr>,
{
    Command::new(env!("CARGO_BIN_EXE_gradrank"))
        .args(args)
        .env("GRADRANK_API_KEY", "")
        .output()
        .expect("binary runs")
}

pub fn stdout_json(out: &Output) -> Value {
    let text = String::from_utf8_lossy(&out.stdout);
    serde_json::from_str(text.trim()).unwrap_or_else(|e| panic!("stdout {text:?}: {e}"))
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// The default separable fixture written as the CLI's input formats.
pub struct FixtureFiles {
    pub fixture: Fixture,
    pub train: PathBuf,
    pub heldout: PathBuf,
    pub queries: PathBuf,
    pub corpus: PathBuf,
    pub qrels: PathBuf,
}

pub fn write_fixture(dir: &Path) -> FixtureFiles {
    let fixture = separable_fixture(&FixtureConfig::default()).unwrap();
    let files = FixtureFiles {
        train: dir.join("train.jsonl"),
        heldout: dir.join("heldout.jsonl"),
        queries: dir.join("queries.tsv"),
        corpus: dir.join("corpus.tsv"),
        qrels: dir.join("heldout.qrels"),
        fixture,
    };
    let f = &files.fixture;
    write_contexts(&files.train, &f.train).unwrap();
    write_contexts(&files.heldout, &f.heldout).unwrap();
    let queries = f.heldout_queries();
    std::fs::write(&files.queries, write_tsv(queries.iter().map(|q| (q.id.as_str(), q.text.as_str())))).unwrap();
    let corpus = f.heldout_corpus();
    std::fs::write(&files.corpus, write_tsv(corpus.iter().map(|p| (p.id.as_str(), p.text.as_str())))).unwrap();
    std::fs::write(&files.qrels, write_qrels(&f.heldout_qrels().unwrap())).unwrap();
    files
}

/// Writes `{"train": config}` as a config file.
pub fn write_train_config(path: &Path, config: &TrainConfig) {
    std::fs::write(path, serde_json::to_string_pretty(&json!({ "train": config })).unwrap()).unwrap();
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reply {
    /// Four marked passages that mention the query.
    WellFormed,
    /// Text without any level markers.
    Garbage,
}

pub struct Stub {
    pub requests: AtomicUsize,
    reply: Reply,
}

fn completion(content: &str) -> String {
    json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]}).to_string()
}

async fn handle(State(stub): State<Arc<Stub>>, Json(body): Json<Value>) -> String {
    stub.requests.fetch_add(1, Ordering::SeqCst);
    let prompt = body["messages"][0]["content"].as_str().unwrap_or_default();
    let query = prompt
        .lines()
        .rev()
        .find_map(|l| l.strip_prefix("Query: "))
        .unwrap_or_default();
    match stub.reply {
        Reply::WellFormed => completion(&format!(
            "### Level 3\n{query} fully answered.\n### Level 2\n{query} mostly answered.\n### Level 1\nNear {query}.\n### Level 0\nUnrelated."
        )),
        Reply::Garbage => completion("I cannot help with that."),
    }
}

/// Serves chat completions on an ephemeral local port; returns the endpoint URL.
pub async fn serve(reply: Reply) -> (String, Arc<Stub>) {
    let stub = Arc::new(Stub {
        requests: AtomicUsize::new(0),
        reply,
    });
    let app = Router::new()
        .route("/v1/chat/completions", post(handle))
        .with_state(stub.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/v1/chat/completions"), stub)
}
