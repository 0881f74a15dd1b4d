//! HTTP session service over the fusion pipeline.
//!
//! Each session holds an immutable snapshot of its pipeline state. Reads
//! clone the current snapshot; a mutating request takes the session's
//! writer gate without waiting (a busy session answers 409 and the client
//! retries), computes a new snapshot off the async runtime, and publishes it.

use std::collections::hash_map::RandomState;
use std::collections::HashMap;
use std::hash::{BuildHasher, Hasher};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};
use std::time::Instant;

use axum::body::Body;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use topofuse::fusion::{count_peaks, FusionMode, Histogram1D, PeakReport};
use topofuse::histogram::{compute_joint_histogram, log_normalize, DensityField, Histogram2D};
use topofuse::pathfind::{tree_diameter_path, TreePath};
use topofuse::pipeline::{
    axis_peak_stage, fusion_warnings, load_inputs, run_fusion, run_topology, select_paths, write_run, FusionStage,
    Manifest, PipelineConfig, PipelineRun, StageTiming, TopologyStage,
};
use topofuse::synth::CircularGaussians;
use topofuse::volio::{encode_grid, GridData, Volume, SCHEMA_VERSION};
use topofuse::Error;

/// Pipeline state of one session. Later stages are cleared whenever an
/// earlier one is recomputed.
#[derive(Clone)]
struct Snapshot {
    config: PipelineConfig,
    volumes: Arc<(Volume, Volume)>,
    histogram: Arc<Histogram2D>,
    density: Arc<DensityField>,
    topology: Option<Arc<TopologyStage>>,
    paths: Option<Arc<Vec<TreePath>>>,
    fused: Option<Arc<Fused>>,
    timings: Vec<StageTiming>,
}

struct Fused {
    fusion: FusionStage,
    axis_histograms: [Histogram1D; 2],
    axis_peaks: [PeakReport; 2],
    manifest: Manifest,
}

struct Session {
    snapshot: RwLock<Arc<Snapshot>>,
    gate: tokio::sync::Mutex<()>,
    dir: PathBuf,
}

impl Session {
    fn current(&self) -> Arc<Snapshot> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    fn publish(&self, s: Snapshot) {
        *self.snapshot.write().expect("snapshot lock") = Arc::new(s);
    }
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Session>>>>,
    counter: Arc<AtomicU64>,
    data_dir: PathBuf,
}

impl AppState {
    /// Session artifacts are written below `data_dir/<session id>`.
    pub fn new(data_dir: impl Into<PathBuf>) -> Self {
        Self {
            sessions: Arc::default(),
            counter: Arc::default(),
            data_dir: data_dir.into(),
        }
    }

    fn session(&self, id: &str) -> Result<Arc<Session>, ApiError> {
        self.sessions
            .read()
            .expect("session table lock")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id:?}")))
    }

    fn fresh_id(&self) -> String {
        let k = self.counter.fetch_add(1, Ordering::Relaxed);
        let mut h = RandomState::new().build_hasher();
        h.write_u64(k);
        format!("{:016x}{:04x}", h.finish(), k & 0xffff)
    }
}

pub fn app(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/:id", get(session_info).delete(delete_session))
        .route("/sessions/:id/config", get(session_config))
        .route("/sessions/:id/histogram", get(histogram_grid))
        .route("/sessions/:id/simplify", post(simplify))
        .route("/sessions/:id/graph", get(graph))
        .route("/sessions/:id/path", post(path))
        .route("/sessions/:id/fuse", post(fuse))
        .route("/sessions/:id/field", get(field_grid))
        .route("/sessions/:id/peaks", get(peaks))
        .route("/sessions/:id/artifacts/:name", get(artifact))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, message)
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound => {
                StatusCode::INTERNAL_SERVER_ERROR
            }
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "schema_version": SCHEMA_VERSION, "error": self.message });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T = Json<Value>> = Result<T, ApiError>;

fn body(v: Value) -> Json<Value> {
    let mut v = v;
    if let Some(obj) = v.as_object_mut() {
        obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    }
    Json(v)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

fn busy() -> ApiError {
    ApiError::conflict("session is busy with another update; retry")
}

fn lap(timings: &mut Vec<StageTiming>, stage: &str, t0: Instant) {
    timings.retain(|t| t.stage != stage);
    timings.push(StageTiming {
        stage: stage.into(),
        seconds: t0.elapsed().as_secs_f64(),
    });
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateRequest {
    synth: Option<CircularGaussians>,
    v1: Option<PathBuf>,
    v2: Option<PathBuf>,
    bins: Option<usize>,
    ranges: Option<[[f64; 2]; 2]>,
}

async fn create_session(State(st): State<AppState>, Json(req): Json<CreateRequest>) -> ApiResult<Response> {
    let mut config = match (&req.synth, &req.v1, &req.v2) {
        (Some(s), None, None) => {
            let mut c = PipelineConfig::synthetic();
            c.input.synth = Some(s.clone());
            c
        }
        (None, Some(_), Some(_)) => {
            let mut c = PipelineConfig::default();
            c.input.v1 = req.v1.clone();
            c.input.v2 = req.v2.clone();
            c
        }
        _ => return Err(ApiError::invalid("give either a synth spec or both v1 and v2 paths")),
    };
    if let Some(b) = req.bins {
        config.bins = b;
    }
    config.ranges = req.ranges;
    config.validate()?;
    let id = st.fresh_id();
    config.output_dir = st.data_dir.join(&id);
    let snap = blocking(move || {
        let t0 = Instant::now();
        let (v1, v2) = load_inputs(&config.input)?;
        let mut timings = Vec::new();
        lap(&mut timings, "load", t0);
        let t0 = Instant::now();
        let h = compute_joint_histogram(&v1, &v2, config.bins, config.axis_ranges()?)?;
        let d = log_normalize(&h);
        lap(&mut timings, "histogram", t0);
        Ok(Snapshot {
            config,
            volumes: Arc::new((v1, v2)),
            histogram: Arc::new(h),
            density: Arc::new(d),
            topology: None,
            paths: None,
            fused: None,
            timings,
        })
    })
    .await?;
    let info = json!({
        "id": id,
        "n": snap.histogram.n(),
        "total_count": snap.histogram.total_count(),
        "dims": snap.volumes.0.dims(),
        "tau": snap.config.tau,
    });
    let session = Session {
        dir: snap.config.output_dir.clone(),
        snapshot: RwLock::new(Arc::new(snap)),
        gate: tokio::sync::Mutex::new(()),
    };
    st.sessions.write().expect("session table lock").insert(id, Arc::new(session));
    Ok((StatusCode::CREATED, body(info)).into_response())
}

fn stage_of(s: &Snapshot) -> &'static str {
    if s.fused.is_some() {
        "fused"
    } else if s.paths.is_some() {
        "path"
    } else if s.topology.is_some() {
        "simplified"
    } else {
        "histogram"
    }
}

async fn session_info(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?.current();
    Ok(body(json!({
        "id": id,
        "stage": stage_of(&s),
        "n": s.histogram.n(),
        "timings": s.timings,
    })))
}

async fn delete_session(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let removed = st.sessions.write().expect("session table lock").remove(&id);
    match removed {
        Some(_) => Ok(body(json!({ "id": id, "deleted": true }))),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id:?}"))),
    }
}

/// The equivalent pipeline config, replayable with `topofuse fuse --config`.
async fn session_config(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?.current();
    let toml = s.config.to_toml_string()?;
    Ok(body(json!({ "config": s.config, "toml": toml })))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Scale {
    Linear,
    Log,
}

#[derive(Debug, Deserialize)]
struct GridQuery {
    scale: Option<Scale>,
    decimate: Option<usize>,
}

fn grid_response(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "application/octet-stream")], Body::from(bytes)).into_response()
}

/// Sums `k x k` blocks of an `n x n` grid.
fn block_sums(n: usize, k: usize, values: &[u64]) -> (usize, Vec<u64>) {
    let m = n.div_ceil(k);
    let mut out = vec![0u64; m * m];
    for j in 0..n {
        for i in 0..n {
            out[i / k + m * (j / k)] += values[i + n * j];
        }
    }
    (m, out)
}

fn check_decimate(k: Option<usize>) -> Result<usize, ApiError> {
    match k.unwrap_or(1) {
        0 => Err(ApiError::invalid("decimate must be at least 1")),
        k => Ok(k),
    }
}

/// Linear counts (`u64`) or log-normalized density (`f64`) in the binary grid
/// container; `decimate=k` sums counts over `k x k` blocks first.
async fn histogram_grid(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<GridQuery>,
) -> ApiResult<Response> {
    let s = st.session(&id)?.current();
    let k = check_decimate(q.decimate)?;
    let n = s.histogram.n();
    let (m, counts) = if k == 1 {
        (n, s.histogram.counts().to_vec())
    } else {
        block_sums(n, k, s.histogram.counts())
    };
    let data = match q.scale.unwrap_or(Scale::Log) {
        Scale::Linear => GridData::U64(counts),
        Scale::Log => {
            let max = counts.iter().copied().max().unwrap_or(0);
            let denom = ((max + 1) as f64).ln();
            GridData::F64(
                counts
                    .iter()
                    .map(|&c| if max == 0 { 0.0 } else if c == max { 1.0 } else { ((c + 1) as f64).ln() / denom })
                    .collect(),
            )
        }
    };
    Ok(grid_response(encode_grid(m, m, &data)?))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimplifyRequest {
    #[serde(default)]
    threshold: f64,
}

async fn simplify(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<SimplifyRequest>,
) -> ApiResult {
    let session = st.session(&id)?;
    let _gate = session.gate.try_lock().map_err(|_| busy())?;
    let mut next = (*session.current()).clone();
    next.config.persistence_threshold = req.threshold;
    next.config.validate()?;
    let next = blocking(move || {
        let t0 = Instant::now();
        let t = run_topology(&next.density, next.config.persistence_threshold)?;
        lap(&mut next.timings, "simplification_and_graph", t0);
        next.topology = Some(Arc::new(t));
        next.paths = None;
        next.fused = None;
        Ok(next)
    })
    .await?;
    let t = next.topology.clone().expect("just computed");
    session.publish(next);
    Ok(body(json!({
        "threshold": t.threshold,
        "critical": t.critical,
        "pairs": t.diagram.pairs.len(),
        "graph_nodes": t.graph.nodes.len(),
    })))
}

/// Extremum graph, spanning tree, and the diameter under the session's
/// endpoint options.
async fn graph(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult {
    let s = st.session(&id)?.current();
    let t = s
        .topology
        .clone()
        .ok_or_else(|| ApiError::conflict("simplify the histogram before requesting the graph"))?;
    let diameter = tree_diameter_path(&t.mst, s.config.diameter_options()).ok();
    let components = t.mst.components();
    Ok(body(json!({
        "graph": t.graph,
        "mst": t.mst,
        "mst_components": components.len(),
        "component_representatives": components.iter().filter_map(|c| c.iter().min()).collect::<Vec<_>>(),
        "diameter": diameter,
        "tau": s.config.tau,
    })))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PathRequest {
    endpoints: Option<[usize; 2]>,
    branches: Option<Vec<[usize; 2]>>,
    tau: Option<f64>,
    hop_metric: Option<bool>,
}

async fn path(State(st): State<AppState>, Path(id): Path<String>, Json(req): Json<PathRequest>) -> ApiResult {
    let session = st.session(&id)?;
    let _gate = session.gate.try_lock().map_err(|_| busy())?;
    let mut next = (*session.current()).clone();
    let t = next
        .topology
        .clone()
        .ok_or_else(|| ApiError::conflict("simplify the histogram before selecting a path"))?;
    next.config.branches = match (req.endpoints, req.branches) {
        (Some(_), Some(_)) => return Err(ApiError::invalid("give endpoints or branches, not both")),
        (Some(e), None) => vec![e],
        (None, Some(b)) if b.is_empty() => return Err(ApiError::invalid("branch list is empty")),
        (None, Some(b)) => b,
        (None, None) => Vec::new(),
    };
    if let Some(tau) = req.tau {
        next.config.tau = tau;
    }
    if let Some(h) = req.hop_metric {
        next.config.hop_metric = h;
    }
    next.config.validate()?;
    let t0 = Instant::now();
    let paths = select_paths(&t.mst, &next.density, &next.config.branches, next.config.diameter_options())?;
    lap(&mut next.timings, "path", t0);
    let out = json!({ "paths": paths, "tau": next.config.tau });
    next.paths = Some(Arc::new(paths));
    next.fused = None;
    session.publish(next);
    Ok(body(out))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FuseMode {
    Grid,
    Continuous,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FuseRequest {
    smoothing: Option<f64>,
    sample_count: Option<usize>,
    mode: Option<FuseMode>,
    spline_bins: Option<usize>,
    min_persistence: Option<f64>,
}

/// Spline fit, parameterization and pullback; writes the same artifact set
/// as `cmd_fuse` into the session directory.
async fn fuse(State(st): State<AppState>, Path(id): Path<String>, Json(req): Json<FuseRequest>) -> ApiResult {
    let session = st.session(&id)?;
    let _gate = session.gate.try_lock().map_err(|_| busy())?;
    let mut next = (*session.current()).clone();
    if next.paths.is_none() {
        return Err(ApiError::conflict("select a path before fusing"));
    }
    let c = &mut next.config;
    if let Some(v) = req.smoothing {
        c.smoothing = v;
    }
    if let Some(v) = req.sample_count {
        c.sample_count = v;
    }
    if let Some(m) = req.mode {
        c.continuous = matches!(m, FuseMode::Continuous);
    }
    if let Some(v) = req.spline_bins {
        c.spline_bins = v;
    }
    if let Some(v) = req.min_persistence {
        c.min_persistence = v;
    }
    c.validate()?;
    let dir = session.dir.clone();
    let next = blocking(move || {
        let (v1, v2) = &*next.volumes;
        let paths = next.paths.clone().expect("checked above");
        let t0 = Instant::now();
        let fusion = run_fusion(v1, v2, &next.histogram, &next.density, &paths, &next.config.fusion_params())?;
        lap(&mut next.timings, "spline_and_fusion", t0);
        let t0 = Instant::now();
        let (axis_histograms, axis_peaks) = axis_peak_stage(&next.histogram, next.config.min_persistence)?;
        lap(&mut next.timings, "peaks", t0);
        let run = PipelineRun {
            histogram: (*next.histogram).clone(),
            density: (*next.density).clone(),
            topology: (**next.topology.as_ref().expect("paths imply topology")).clone(),
            paths: (*paths).clone(),
            warnings: fusion_warnings(&next.config, &fusion),
            fusion,
            axis_histograms,
            axis_peaks,
            timings: next.timings.clone(),
        };
        let manifest = write_run(&next.config, &run, &dir)?;
        next.fused = Some(Arc::new(Fused {
            fusion: run.fusion,
            axis_histograms: run.axis_histograms,
            axis_peaks: run.axis_peaks,
            manifest,
        }));
        Ok(next)
    })
    .await?;
    let f = next.fused.clone().expect("just computed");
    session.publish(next);
    Ok(body(json!({
        "mode": f.fusion.field.mode,
        "branch_count": f.fusion.field.branch_count,
        "peaks": f.manifest.peaks,
        "spline_histogram": f.fusion.spline_histogram,
        "spline_peaks": f.fusion.spline_peaks,
        "axis_histograms": f.axis_histograms,
        "axis_peaks": f.axis_peaks,
        "artifacts": f.manifest.artifacts,
        "warnings": f.manifest.warnings,
        "field": format!("/sessions/{id}/field"),
        "fused_volume": format!("/sessions/{id}/artifacts/fused_volume"),
    })))
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FieldKind {
    Value,
    Branch,
}

#[derive(Debug, Deserialize)]
struct FieldQuery {
    kind: Option<FieldKind>,
    decimate: Option<usize>,
}

/// Parameterized grid `F` (`f64`) or branch assignment (`u32`); decimation
/// keeps every `k`-th cell.
async fn field_grid(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<FieldQuery>,
) -> ApiResult<Response> {
    let s = st.session(&id)?.current();
    let f = s.fused.clone().ok_or_else(|| ApiError::conflict("fuse before requesting the field"))?;
    let k = check_decimate(q.decimate)?;
    let field = &f.fusion.field;
    let n = field.n;
    let m = n.div_ceil(k);
    let cells = (0..m).flat_map(|j| (0..m).map(move |i| i * k + n * (j * k)));
    let data = match q.kind.unwrap_or(FieldKind::Value) {
        FieldKind::Value => GridData::F64(cells.map(|c| field.values[c]).collect()),
        FieldKind::Branch => GridData::U32(cells.map(|c| field.branch_assignment[c]).collect()),
    };
    Ok(grid_response(encode_grid(m, m, &data)?))
}

#[derive(Debug, Deserialize)]
struct PeaksQuery {
    min_persistence: Option<f64>,
}

/// Peaks of the fused and axis histograms at any persistence level.
async fn peaks(State(st): State<AppState>, Path(id): Path<String>, Query(q): Query<PeaksQuery>) -> ApiResult {
    let s = st.session(&id)?.current();
    let f = s.fused.clone().ok_or_else(|| ApiError::conflict("fuse before requesting peaks"))?;
    let p = q.min_persistence.unwrap_or(s.config.min_persistence);
    let spline = count_peaks(&f.fusion.spline_histogram, p)?;
    let axis1 = count_peaks(&f.axis_histograms[0], p)?;
    let axis2 = count_peaks(&f.axis_histograms[1], p)?;
    Ok(body(json!({
        "min_persistence": p,
        "merged": f.fusion.field.mode == FusionMode::Merged,
        "spline": spline,
        "axis1": axis1,
        "axis2": axis2,
    })))
}

/// Raw bytes of an artifact listed in the session manifest.
async fn artifact(State(st): State<AppState>, Path((id, name)): Path<(String, String)>) -> ApiResult<Response> {
    let session = st.session(&id)?;
    let s = session.current();
    let f = s.fused.clone().ok_or_else(|| ApiError::conflict("no artifacts before fusing"))?;
    let entry = f
        .manifest
        .artifacts
        .get(&name)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown artifact {name:?}")))?;
    let path = session.dir.join(&entry.file);
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("{}: {e}", path.display())))?;
    Ok(grid_response(bytes))
}
