//! JSON API over loaded corpora, a result store and the query history.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use chrono::SecondsFormat;
use cqk_core::kwic::{self, Context, SortKey};
use cqk_core::results::{self, SetOp};
use cqk_core::{compile, eval_query, parse_query, Corpus, Error, MatchSet, NamedResult, RegistryDecl};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::history::{Entry, History};

pub const DEFAULT_PAGE_SIZE: usize = 50;
pub const DEFAULT_CONTEXT: usize = 5;

struct Loaded {
    decl: RegistryDecl,
    corpus: Arc<Corpus>,
}

#[derive(Default)]
struct ResultStore {
    next: u64,
    items: BTreeMap<u64, Arc<NamedResult>>,
}

impl ResultStore {
    fn insert(&mut self, make: impl FnOnce(&str) -> NamedResult) -> Arc<NamedResult> {
        self.next += 1;
        let r = Arc::new(make(&result_id(self.next)));
        self.items.insert(self.next, r.clone());
        r
    }
}

fn result_id(n: u64) -> String {
    format!("r{n}")
}

fn result_key(id: &str) -> Option<u64> {
    id.strip_prefix('r')?.parse().ok()
}

pub struct AppState {
    corpora: BTreeMap<String, Loaded>,
    results: RwLock<ResultStore>,
    history: Mutex<History>,
    max_match_length: usize,
}

impl AppState {
    pub fn new(corpora: Vec<(RegistryDecl, Corpus)>, history: History) -> Self {
        AppState {
            corpora: corpora
                .into_iter()
                .map(|(decl, corpus)| {
                    (
                        corpus.id().to_owned(),
                        Loaded {
                            decl,
                            corpus: Arc::new(corpus),
                        },
                    )
                })
                .collect(),
            results: RwLock::default(),
            history: Mutex::new(history),
            max_match_length: cqk_core::eval::DEFAULT_MAX_MATCH_LENGTH,
        }
    }

    pub fn with_max_match_length(mut self, n: usize) -> Self {
        self.max_match_length = n;
        self
    }

    fn corpus(&self, id: &str) -> Result<Arc<Corpus>, ApiError> {
        self.corpora
            .get(id)
            .map(|l| l.corpus.clone())
            .ok_or_else(|| ApiError::not_found(format!("unknown corpus `{id}`")))
    }

    fn result(&self, id: &str) -> Result<Arc<NamedResult>, ApiError> {
        result_key(id)
            .and_then(|k| self.results.read().unwrap().items.get(&k).cloned())
            .ok_or_else(|| ApiError::not_found(format!("unknown result `{id}`")))
    }

    fn store(&self, matchset: MatchSet, query: Option<String>) -> Arc<NamedResult> {
        self.results
            .write()
            .unwrap()
            .insert(|id| NamedResult::new(id, matchset, query))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/corpora", get(list_corpora))
        .route("/query", post(run_query))
        .route("/results", get(list_results))
        .route("/results/setop", post(set_operation))
        .route("/results/:id", get(get_result))
        .route("/results/:id/kwic", get(kwic_page))
        .route("/results/:id/lines", delete(delete_lines))
        .route("/results/:id/aligned", get(aligned_page))
        .route("/history", get(get_history).post(add_history))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: String,
    message: String,
    position: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind: kind.to_owned(),
            message: message.into(),
            position: None,
        }
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not-found", message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad-request", message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::CorpusNotFound { .. } => StatusCode::NOT_FOUND,
            Error::DynamicFailed { .. }
            | Error::Io { .. }
            | Error::Format { .. }
            | Error::MissingFile(_)
            | Error::Remote { .. }
            | Error::RemoteUnreachable { .. }
            | Error::AuthFailed(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        let mut err = ApiError::new(status, e.kind(), e.to_string());
        if let Error::Parse(p) = &e {
            err.message = p.message.clone();
            err.position = Some(json!({"line": p.line, "column": p.column, "offset": p.offset}));
        }
        err
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request(r.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({"kind": self.kind, "message": self.message});
        if let Some(p) = self.position {
            body["position"] = p;
        }
        (self.status, Json(json!({ "error": body }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string())
    })?
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct AttributeInfo {
    name: String,
    lexicon_size: usize,
    remote: Option<String>,
}

#[derive(Serialize)]
struct StructureInfo {
    name: String,
    regions: usize,
}

#[derive(Serialize)]
struct DynamicInfo {
    name: String,
    args: Vec<String>,
    returns: String,
}

#[derive(Serialize)]
struct CorpusInfo {
    id: String,
    name: Option<String>,
    size: usize,
    attributes: Vec<AttributeInfo>,
    structures: Vec<StructureInfo>,
    dynamic: Vec<DynamicInfo>,
    aligned: Option<String>,
}

fn type_name(t: cqk_core::ValueType) -> String {
    match t {
        cqk_core::ValueType::Str => "String".into(),
        cqk_core::ValueType::Int => "Int".into(),
    }
}

async fn list_corpora(State(state): State<Arc<AppState>>) -> ApiResult<Vec<CorpusInfo>> {
    let infos = blocking(move || {
        state
            .corpora
            .values()
            .map(|Loaded { decl, corpus }| {
                let attributes = decl
                    .positional
                    .iter()
                    .map(|a| {
                        Ok(AttributeInfo {
                            name: a.name.clone(),
                            lexicon_size: corpus.attribute(&a.name)?.lexicon_len()?,
                            remote: a.remote.clone(),
                        })
                    })
                    .collect::<Result<_, Error>>()?;
                Ok(CorpusInfo {
                    id: corpus.id().to_owned(),
                    name: decl.display_name.clone(),
                    size: corpus.size(),
                    attributes,
                    structures: corpus
                        .structural()
                        .iter()
                        .map(|s| StructureInfo {
                            name: s.name().to_owned(),
                            regions: s.len(),
                        })
                        .collect(),
                    dynamic: corpus
                        .dynamic()
                        .iter()
                        .map(|d| DynamicInfo {
                            name: d.name.clone(),
                            args: d.arg_types.iter().copied().map(type_name).collect(),
                            returns: d.return_type.to_string(),
                        })
                        .collect(),
                    aligned: decl.aligned.clone(),
                })
            })
            .collect::<Result<Vec<_>, Error>>()
            .map_err(ApiError::from)
    })
    .await?;
    Ok(Json(infos))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct QueryRequest {
    corpus: String,
    query: String,
    subcorpus_result: Option<String>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ResultCreated {
    result_id: String,
    match_count: usize,
}

impl From<&NamedResult> for ResultCreated {
    fn from(r: &NamedResult) -> Self {
        ResultCreated {
            result_id: r.name.clone(),
            match_count: r.matchset.len(),
        }
    }
}

async fn run_query(
    State(state): State<Arc<AppState>>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> ApiResult<ResultCreated> {
    let Json(req) = body?;
    let corpus = state.corpus(&req.corpus)?;
    let sub = req
        .subcorpus_result
        .as_deref()
        .map(|id| state.result(id))
        .transpose()?;
    let limit = state.max_match_length;
    let text = req.query.clone();
    let matchset = blocking(move || {
        let query = parse_query(&text).map_err(Error::from)?;
        let program = compile(&query, &corpus)?.with_max_match_length(limit);
        Ok(eval_query(&program, &corpus, sub.as_ref().map(|r| &r.matchset))?)
    })
    .await?;
    let stored = state.store(matchset, Some(req.query.clone()));
    state
        .history
        .lock()
        .unwrap()
        .append(Entry::now(req.query, req.corpus))
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "io", format!("{e:#}")))?;
    Ok(Json(stored.as_ref().into()))
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct ResultSummary {
    result_id: String,
    corpus: String,
    query: Option<String>,
    match_count: usize,
    created_at: String,
}

impl From<&NamedResult> for ResultSummary {
    fn from(r: &NamedResult) -> Self {
        ResultSummary {
            result_id: r.name.clone(),
            corpus: r.matchset.corpus().to_owned(),
            query: r.query.clone(),
            match_count: r.matchset.len(),
            created_at: r.created_at.to_rfc3339_opts(SecondsFormat::Millis, true),
        }
    }
}

async fn list_results(State(state): State<Arc<AppState>>) -> Json<Vec<ResultSummary>> {
    let store = state.results.read().unwrap();
    Json(store.items.values().map(|r| r.as_ref().into()).collect())
}

async fn get_result(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<ResultSummary> {
    Ok(Json(state.result(&id)?.as_ref().into()))
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct PageParams {
    context: Option<String>,
    sort: Option<String>,
    attrs: Option<String>,
    page: Option<usize>,
    page_size: Option<usize>,
}

struct Paging {
    page: usize,
    page_size: usize,
    pages: usize,
    range: std::ops::Range<usize>,
}

fn paging(total: usize, page: Option<usize>, page_size: Option<usize>) -> Result<Paging, ApiError> {
    let page = page.unwrap_or(1);
    let page_size = page_size.unwrap_or(DEFAULT_PAGE_SIZE);
    if page == 0 || page_size == 0 {
        return Err(ApiError::bad_request("page and pageSize start at 1"));
    }
    let pages = total.div_ceil(page_size);
    let start = (page - 1).saturating_mul(page_size).min(total);
    Ok(Paging {
        page,
        page_size,
        pages,
        range: start..(start + page_size).min(total),
    })
}

#[derive(Serialize)]
struct KwicLineJson {
    index: usize,
    start: usize,
    end: usize,
    left: String,
    #[serde(rename = "match")]
    matched: String,
    right: String,
    text: String,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct KwicPage {
    result_id: String,
    corpus: String,
    total: usize,
    page: usize,
    page_size: usize,
    pages: usize,
    lines: Vec<KwicLineJson>,
}

async fn kwic_page(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(params): Query<PageParams>,
) -> ApiResult<KwicPage> {
    let result = state.result(&id)?;
    let corpus = state.corpus(result.matchset.corpus())?;
    let context: Context = match params.context.as_deref() {
        Some(c) => c.parse().unwrap(),
        None => Context::Tokens(DEFAULT_CONTEXT),
    };
    let sort: Option<SortKey> = params.sort.as_deref().map(str::parse).transpose()?;
    let attrs: Vec<String> = match params.attrs.as_deref() {
        Some(a) => a.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect(),
        None => vec!["word".into()],
    };
    let paging = paging(result.matchset.len(), params.page, params.page_size)?;
    let page = blocking(move || {
        let attr_refs: Vec<&str> = attrs.iter().map(String::as_str).collect();
        let indexed: Vec<(usize, kwic::KwicLine)> = match sort {
            None | Some(SortKey::Position) => {
                let slice = &result.matchset.intervals()[paging.range.clone()];
                let part = MatchSet::new(result.matchset.corpus(), slice.to_vec())?;
                let lines = kwic::kwic_lines(&part, &corpus, &context, &attr_refs)?;
                paging.range.clone().zip(lines).collect()
            }
            Some(key) => {
                let lines = kwic::kwic_lines(&result.matchset, &corpus, &context, &attr_refs)?;
                let order = kwic::sort_lines(&lines, key);
                order[paging.range.clone()].iter().map(|&i| (i, lines[i].clone())).collect()
            }
        };
        Ok(KwicPage {
            result_id: result.name.clone(),
            corpus: corpus.id().to_owned(),
            total: result.matchset.len(),
            page: paging.page,
            page_size: paging.page_size,
            pages: paging.pages,
            lines: indexed
                .into_iter()
                .map(|(index, l)| KwicLineJson {
                    index,
                    start: l.interval.0,
                    end: l.interval.1,
                    left: l.left_text(),
                    matched: l.match_text(),
                    right: l.right_text(),
                    text: l.render(),
                })
                .collect(),
        })
    })
    .await?;
    Ok(Json(page))
}

#[derive(Deserialize)]
struct SetOpRequest {
    kind: String,
    a: String,
    b: String,
}

async fn set_operation(
    State(state): State<Arc<AppState>>,
    body: Result<Json<SetOpRequest>, JsonRejection>,
) -> ApiResult<ResultCreated> {
    let Json(req) = body?;
    let kind: SetOp = req.kind.parse()?;
    let (a, b) = (state.result(&req.a)?, state.result(&req.b)?);
    let combined = results::set_op(kind, &a.matchset, &b.matchset)?;
    let stored = state.store(combined, None);
    Ok(Json(stored.as_ref().into()))
}

#[derive(Deserialize)]
struct DeleteRequest {
    indices: Vec<usize>,
}

/// Replaces the stored result with one lacking the given lines.
async fn delete_lines(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    body: Result<Json<DeleteRequest>, JsonRejection>,
) -> ApiResult<ResultCreated> {
    let Json(req) = body?;
    let key = result_key(&id).ok_or_else(|| ApiError::not_found(format!("unknown result `{id}`")))?;
    let mut store = state.results.write().unwrap();
    let current = store
        .items
        .get(&key)
        .cloned()
        .ok_or_else(|| ApiError::not_found(format!("unknown result `{id}`")))?;
    let remaining = kwic::delete_lines(&current.matchset, &req.indices)?;
    let mut updated = NamedResult::new(current.name.clone(), remaining, current.query.clone());
    updated.created_at = current.created_at;
    let updated = Arc::new(updated);
    store.items.insert(key, updated.clone());
    Ok(Json(updated.as_ref().into()))
}

#[derive(Serialize)]
struct AlignedLineJson {
    index: usize,
    start: usize,
    end: usize,
    source: String,
    target: Option<String>,
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct AlignedPage {
    result_id: String,
    source: String,
    target: String,
    total: usize,
    page: usize,
    page_size: usize,
    pages: usize,
    lines: Vec<AlignedLineJson>,
}

async fn aligned_page(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(params): Query<PageParams>,
) -> ApiResult<AlignedPage> {
    let result = state.result(&id)?;
    let source = state.corpus(result.matchset.corpus())?;
    let target_id = source
        .alignment()
        .map(|a| a.target.clone())
        .ok_or_else(|| ApiError::from(Error::NotAligned(source.id().to_owned())))?;
    let target = state.corpus(&target_id)?;
    let paging = paging(result.matchset.len(), params.page, params.page_size)?;
    let page = blocking(move || {
        let slice = &result.matchset.intervals()[paging.range.clone()];
        let part = MatchSet::new(result.matchset.corpus(), slice.to_vec())?;
        let lines = kwic::aligned_lines(&part, &source, &target)?;
        Ok(AlignedPage {
            result_id: result.name.clone(),
            source: source.id().to_owned(),
            target: target.id().to_owned(),
            total: result.matchset.len(),
            page: paging.page,
            page_size: paging.page_size,
            pages: paging.pages,
            lines: paging
                .range
                .clone()
                .zip(lines)
                .map(|(index, l)| AlignedLineJson {
                    index,
                    start: l.interval.0,
                    end: l.interval.1,
                    source: l.source,
                    target: l.target,
                })
                .collect(),
        })
    })
    .await?;
    Ok(Json(page))
}

async fn get_history(State(state): State<Arc<AppState>>) -> Json<Vec<Entry>> {
    Json(state.history.lock().unwrap().entries().to_vec())
}

#[derive(Deserialize)]
struct HistoryRequest {
    query: String,
    corpus: String,
}

async fn add_history(
    State(state): State<Arc<AppState>>,
    body: Result<Json<HistoryRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<Entry>), ApiError> {
    let Json(req) = body?;
    let entry = Entry::now(req.query, req.corpus);
    state
        .history
        .lock()
        .unwrap()
        .append(entry.clone())
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "io", format!("{e:#}")))?;
    Ok((StatusCode::CREATED, Json(entry)))
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(state: Arc<AppState>, addr: &str) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("http listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
