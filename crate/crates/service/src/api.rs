//! HTTP routes. Every JSON payload carries `schema_version`; errors are
//! `{"schema_version", "error"}` with a 4xx/5xx status.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use telewb_core::dataset::{Dataset, Interval};
use telewb_core::evaluation::WhatIfSpec;
use telewb_core::importance::{compute, ImportanceReport, RankedFeature, ScoreKind};
use telewb_core::learners::TrainedModel;
use telewb_core::run::{
    execute_run, load_summary, whatif_config, ArtifactKind, ImportanceBundle, Predictions, RunConfig,
};
use tokio::sync::Semaphore;

use crate::eda::{describe, EdaReport, EdaRequest};
use crate::store::{RunRecord, RunStore, StoreError};
use crate::SERVICE_SCHEMA_VERSION;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub store_root: PathBuf,
    /// Base for relative input paths in submitted configurations.
    pub data_root: Option<PathBuf>,
    pub max_jobs: usize,
}

impl ServiceConfig {
    pub fn new(store_root: impl Into<PathBuf>) -> Self {
        ServiceConfig {
            store_root: store_root.into(),
            data_root: None,
            max_jobs: 2,
        }
    }
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

fn core_status(e: &telewb_core::Error) -> StatusCode {
    use telewb_core::Error as E;
    match e {
        E::RequiresTreeEnsemble => StatusCode::UNPROCESSABLE_ENTITY,
        E::Io(_) | E::ModelFile(_) | E::DigestMismatch { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::BAD_REQUEST,
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound(_) | StoreError::NoArtifact(_) => StatusCode::NOT_FOUND,
            StoreError::NotReady { .. } | StoreError::Transition { .. } => StatusCode::CONFLICT,
            StoreError::Core(c) => core_status(c),
            StoreError::Io(_) | StoreError::Json(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl From<telewb_core::Error> for ApiError {
    fn from(e: telewb_core::Error) -> Self {
        ApiError::new(core_status(&e), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({
            "schema_version": SERVICE_SCHEMA_VERSION,
            "error": self.message,
        });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Serializes `v` and stamps `schema_version` on the top-level object.
fn payload(v: &impl Serialize) -> Json<Value> {
    let mut value = serde_json::to_value(v).expect("payload serializes");
    if let Value::Object(map) = &mut value {
        map.entry("schema_version").or_insert(SERVICE_SCHEMA_VERSION.into());
    }
    Json(value)
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("invalid request body: {e}")))
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<RunStore>,
    permits: Arc<Semaphore>,
    data_root: Option<PathBuf>,
}

struct Job {
    id: String,
    config: RunConfig,
    base: Option<(String, PathBuf)>,
}

impl AppState {
    pub fn new(cfg: &ServiceConfig) -> Result<Self, StoreError> {
        Ok(AppState {
            store: Arc::new(RunStore::open(&cfg.store_root)?),
            permits: Arc::new(Semaphore::new(cfg.max_jobs.max(1))),
            data_root: cfg.data_root.clone(),
        })
    }

    pub fn store(&self) -> &RunStore {
        &self.store
    }

    /// Validates and queues a run.
    pub fn submit(&self, mut config: RunConfig) -> ApiResult<RunRecord> {
        if let Some(root) = &self.data_root {
            config.resolve_paths(root);
        }
        let config = config.normalized()?;
        let missing: Vec<String> = config
            .source
            .input_paths()
            .iter()
            .filter(|p| !p.is_file())
            .map(|p| p.display().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(ApiError::bad_request(format!("missing input files: {}", missing.join(", "))));
        }
        let rec = self.store.create(&config)?;
        self.spawn(Job {
            id: rec.id.clone(),
            config,
            base: None,
        });
        Ok(rec)
    }

    /// Queues the what-if child of a finished run.
    pub fn submit_whatif(&self, spec: WhatIfSpec) -> ApiResult<RunRecord> {
        self.store.done(&spec.base_run)?;
        let base_dir = self.store.run_dir(&spec.base_run);
        let base_cfg = telewb_core::run::read_config(&base_dir)?;
        let config = whatif_config(&base_cfg, &spec).normalized()?;
        let rec = self.store.create(&config)?;
        self.spawn(Job {
            id: rec.id.clone(),
            config,
            base: Some((spec.base_run, base_dir)),
        });
        Ok(rec)
    }

    fn spawn(&self, job: Job) {
        let state = self.clone();
        tokio::spawn(async move {
            let _permit = state.permits.clone().acquire_owned().await.expect("semaphore open");
            let id = job.id.clone();
            if let Err(e) = state.store.mark_running(&id) {
                tracing::error!(run = %id, "cannot mark running: {e}");
                return;
            }
            let store = state.store.clone();
            let result = tokio::task::spawn_blocking(move || -> Result<BTreeMap<String, String>, String> {
                let mut out = execute_run(&job.config).map_err(|e| e.to_string())?;
                if let Some((base_id, base_dir)) = &job.base {
                    let base = load_summary(base_dir, Some(base_id.clone())).map_err(|e| e.to_string())?;
                    out.compare_with(&base, Some(job.id.clone()));
                }
                out.write_to(&store.run_dir(&job.id)).map_err(|e| e.to_string())
            })
            .await;
            let outcome = match result {
                Ok(Ok(artifacts)) => state.store.mark_done(&id, artifacts),
                Ok(Err(e)) => state.store.mark_failed(&id, e),
                Err(e) => state.store.mark_failed(&id, format!("job aborted: {e}")),
            };
            match outcome {
                Ok(rec) => tracing::info!(run = %id, state = ?rec.state, "run finished"),
                Err(e) => tracing::error!(run = %id, "cannot record outcome: {e}"),
            }
        });
    }

    /// Polls until the run reaches a terminal state or `timeout` elapses.
    pub async fn wait(&self, id: &str, timeout: Duration) -> Result<RunRecord, StoreError> {
        let deadline = tokio::time::Instant::now() + timeout;
        loop {
            let rec = self.store.get(id)?;
            if rec.state.is_terminal() || tokio::time::Instant::now() >= deadline {
                return Ok(rec);
            }
            tokio::time::sleep(Duration::from_millis(20)).await;
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/runs", get(list_runs).post(create_run))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/artifacts/{kind}", get(get_artifact))
        .route("/runs/{id}/predictions", get(get_predictions))
        .route("/runs/{id}/importance", get(get_importance))
        .route("/whatif", post(create_whatif))
        .route("/eda", post(eda))
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(cfg: &ServiceConfig, addr: SocketAddr) -> std::io::Result<()> {
    let state = AppState::new(cfg).map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

async fn health() -> Json<Value> {
    payload(&serde_json::json!({
        "status": "ok",
        "version": telewb_core::TOOL_VERSION,
    }))
}

async fn list_runs(State(s): State<AppState>) -> Json<Value> {
    payload(&serde_json::json!({ "runs": s.store.list() }))
}

async fn create_run(State(s): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let cfg: RunConfig = parse_body(&body)?;
    let rec = s.submit(cfg)?;
    Ok((StatusCode::ACCEPTED, payload(&rec)))
}

async fn create_whatif(State(s): State<AppState>, body: Bytes) -> ApiResult<(StatusCode, Json<Value>)> {
    let spec: WhatIfSpec = parse_body(&body)?;
    let rec = s.submit_whatif(spec)?;
    Ok((StatusCode::ACCEPTED, payload(&rec)))
}

async fn get_run(State(s): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    Ok(payload(&s.store.get(&id)?))
}

async fn get_artifact(
    State(s): State<AppState>,
    Path((id, kind)): Path<(String, String)>,
) -> ApiResult<Response> {
    s.store.get(&id)?;
    let kind: ArtifactKind = kind
        .parse()
        .map_err(|e: telewb_core::Error| ApiError::new(StatusCode::NOT_FOUND, e.to_string()))?;
    let bytes = s.store.artifact(&id, kind)?;
    Ok((
        [
            (header::CONTENT_TYPE, kind.content_type().to_owned()),
            (header::HeaderName::from_static("x-schema-version"), SERVICE_SCHEMA_VERSION.to_string()),
        ],
        bytes,
    )
        .into_response())
}

fn read_json<T: for<'de> Deserialize<'de>>(s: &AppState, id: &str, kind: ArtifactKind) -> ApiResult<T> {
    let bytes = s.store.artifact(id, kind)?;
    serde_json::from_slice(&bytes).map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))
}

fn interval(from: Option<i64>, to: Option<i64>) -> ApiResult<Option<Interval>> {
    match (from, to) {
        (None, None) => Ok(None),
        (Some(f), Some(t)) if f < t => Ok(Some(Interval::new(f, t))),
        (Some(_), Some(_)) => Err(ApiError::bad_request("`from` must be before `to`")),
        _ => Err(ApiError::bad_request("give both `from` and `to` or neither")),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PredictionQuery {
    /// Comma-separated target names; all when absent.
    lines: Option<String>,
    #[serde(default)]
    cumulative: bool,
    from: Option<i64>,
    to: Option<i64>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Series {
    pub name: String,
    pub predicted: Vec<Option<f64>>,
    pub observed: Vec<Option<f64>>,
    /// `|predicted - observed|` where both exist.
    pub abs_error: Vec<Option<f64>>,
}

impl Series {
    fn new(name: String, predicted: Vec<Option<f64>>, observed: Vec<Option<f64>>) -> Self {
        let abs_error = predicted
            .iter()
            .zip(&observed)
            .map(|(p, o)| Some((p.as_ref()? - o.as_ref()?).abs()))
            .collect();
        Series {
            name,
            predicted,
            observed,
            abs_error,
        }
    }
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct PredictionView {
    pub schema_version: u32,
    pub run: String,
    pub time: Vec<i64>,
    pub is_test: Vec<bool>,
    pub series: Vec<Series>,
    /// Row-wise sum over the selected series; `None` where any is missing.
    pub cumulative: Option<Series>,
}

fn row_sum(columns: &[&Vec<Option<f64>>], n: usize) -> Vec<Option<f64>> {
    (0..n)
        .map(|i| columns.iter().map(|c| c[i]).sum::<Option<f64>>())
        .collect()
}

async fn get_predictions(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<PredictionQuery>,
) -> ApiResult<Json<Value>> {
    let p: Predictions = read_json(&s, &id, ArtifactKind::Predictions)?;
    let window = interval(q.from, q.to)?;
    let rows: Vec<usize> = (0..p.time.len())
        .filter(|&i| window.is_none_or(|w| w.contains(p.time[i])))
        .collect();
    let selected: Vec<usize> = match &q.lines {
        None => (0..p.targets.len()).collect(),
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                p.targets
                    .iter()
                    .position(|t| t == l)
                    .ok_or_else(|| ApiError::bad_request(format!("unknown line `{l}`")))
            })
            .collect::<ApiResult<_>>()?,
    };
    let pick = |col: &Vec<Option<f64>>| rows.iter().map(|&i| col[i]).collect::<Vec<_>>();
    let series: Vec<Series> = selected
        .iter()
        .map(|&k| Series::new(p.targets[k].clone(), pick(&p.predicted[k]), pick(&p.observed[k])))
        .collect();
    let cumulative = q.cumulative.then(|| {
        let pred: Vec<_> = series.iter().map(|s| &s.predicted).collect();
        let obs: Vec<_> = series.iter().map(|s| &s.observed).collect();
        Series::new("cumulative".into(), row_sum(&pred, rows.len()), row_sum(&obs, rows.len()))
    });
    Ok(payload(&PredictionView {
        schema_version: SERVICE_SCHEMA_VERSION,
        run: id,
        time: rows.iter().map(|&i| p.time[i]).collect(),
        is_test: rows.iter().map(|&i| p.is_test[i]).collect(),
        series,
        cumulative,
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImportanceQuery {
    score: Option<String>,
    from: Option<i64>,
    to: Option<i64>,
    /// `aggregate` or a target name; the full report when absent.
    selector: Option<String>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Selection {
    pub name: String,
    pub scores: BTreeMap<String, f64>,
    /// Doughnut: score sum per category.
    pub categories: BTreeMap<String, f64>,
    /// Pies: category -> feature -> score.
    pub within_category: BTreeMap<String, BTreeMap<String, f64>>,
    pub top_k: Vec<RankedFeature>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ImportanceView {
    pub schema_version: u32,
    pub run: String,
    pub score_kind: ScoreKind,
    pub subset: Option<Interval>,
    pub n_rows: usize,
    pub report: Option<ImportanceReport>,
    pub selection: Option<Selection>,
}

fn select(
    report: &ImportanceReport,
    selector: &str,
    feature_categories: &BTreeMap<String, String>,
) -> ApiResult<Selection> {
    let (scores, categories, top_k) = if selector == "aggregate" {
        (
            report.aggregate.clone(),
            report.categories.aggregate.clone(),
            report.top_k.aggregate.clone(),
        )
    } else {
        let unknown = || ApiError::bad_request(format!("unknown selector `{selector}`"));
        (
            report.per_target.get(selector).ok_or_else(unknown)?.clone(),
            report.categories.per_target.get(selector).ok_or_else(unknown)?.clone(),
            report.top_k.per_target.get(selector).ok_or_else(unknown)?.clone(),
        )
    };
    let mut within_category: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for (f, v) in &scores {
        let cat = feature_categories.get(f).cloned().unwrap_or_default();
        within_category.entry(cat).or_default().insert(f.clone(), *v);
    }
    Ok(Selection {
        name: selector.to_owned(),
        scores,
        categories,
        within_category,
        top_k,
    })
}

async fn get_importance(
    State(s): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ImportanceQuery>,
) -> ApiResult<Json<Value>> {
    let kind: ScoreKind = q.score.as_deref().unwrap_or("permutation").parse()?;
    let subset = interval(q.from, q.to)?;
    let bundle: ImportanceBundle = read_json(&s, &id, ArtifactKind::Importance)?;
    if let Some(skip) = bundle.skipped.iter().find(|k| k.score_kind == kind) {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, skip.reason.clone()));
    }
    let cols: BTreeMap<String, String> = read_json(&s, &id, ArtifactKind::Columns)?;
    let stored = || {
        bundle
            .report(kind)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no {} scores", kind.as_str())))
    };
    let (report, subset) = match subset {
        None => (stored()?, None),
        Some(iv) => {
            let model_bytes = s.store.artifact(&id, ArtifactKind::Model)?;
            let csv = s.store.artifact(&id, ArtifactKind::Dataset)?;
            let cfg: RunConfig = read_json(&s, &id, ArtifactKind::Config)?;
            let map = cols.clone();
            let computed = tokio::task::spawn_blocking(move || -> telewb_core::Result<Option<ImportanceReport>> {
                let ds = Dataset::from_csv(&csv, &map)?;
                if ds.rows_within(Some(iv)).len() == ds.n_rows() {
                    return Ok(None);
                }
                let model = TrainedModel::<f64>::from_bytes(&model_bytes)?;
                compute(&model, &ds, kind, Some(iv), &cfg.importance).map(Some)
            })
            .await
            .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
            match computed {
                // the whole dataset: the stored report, unchanged
                None => (stored()?, None),
                Some(r) => (r, Some(iv)),
            }
        }
    };
    let selection = q
        .selector
        .as_deref()
        .map(|sel| select(&report, sel, &cols))
        .transpose()?;
    Ok(payload(&ImportanceView {
        schema_version: SERVICE_SCHEMA_VERSION,
        run: id,
        score_kind: kind,
        subset,
        n_rows: report.n_rows,
        report: selection.is_none().then_some(report),
        selection,
    }))
}

async fn eda(State(s): State<AppState>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: EdaRequest = parse_body(&body)?;
    let window = interval(req.from, req.to)?;
    let (n_rows, columns): (usize, Vec<(String, Vec<f64>)>) = match (&req.run, &req.values) {
        (None, Some(v)) if req.columns.is_empty() && window.is_none() => (
            v.len(),
            vec![("values".into(), v.iter().map(|x| x.unwrap_or(f64::NAN)).collect())],
        ),
        (Some(run), None) if !req.columns.is_empty() => {
            let csv = s.store.artifact(run, ArtifactKind::Dataset)?;
            let cols: BTreeMap<String, String> = read_json(&s, run, ArtifactKind::Columns)?;
            let ds = Dataset::<f64>::from_csv(&csv, &cols)?;
            let rows = ds.rows_within(window);
            let columns = req
                .columns
                .iter()
                .map(|c| {
                    let col = if let Some(j) = ds.feature_index(c) {
                        ds.x.column(j)
                    } else if let Some(k) = ds.target_index(c) {
                        ds.y.column(k)
                    } else {
                        return Err(ApiError::bad_request(format!("unknown column `{c}`")));
                    };
                    Ok((c.clone(), rows.iter().map(|&i| col[i]).collect()))
                })
                .collect::<ApiResult<_>>()?;
            (rows.len(), columns)
        }
        _ => {
            return Err(ApiError::bad_request(
                "give either `values` or `run` with at least one of `columns`",
            ))
        }
    };
    if n_rows == 0 {
        return Err(ApiError::bad_request("the requested range selects no rows"));
    }
    let variables = columns
        .into_iter()
        .map(|(name, values)| describe(name, &values, req.bins).map_err(ApiError::bad_request))
        .collect::<ApiResult<Vec<_>>>()?;
    Ok(payload(&EdaReport {
        schema_version: SERVICE_SCHEMA_VERSION,
        n_rows,
        subset: window,
        variables,
    }))
}
