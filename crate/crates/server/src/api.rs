use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use clara::corpus::{tokenize, AnchorWord, Modality};
use clara::encoder::{Embedding, RecordingInput};
use clara::metrics::{bleu, cider_with_idf, CiderIdf, EvalPair};
use clara::pipeline::{GenerationConfig, Mode, Provenance, SessionState, System};
use clara::prototype::make_query;

pub const API_VERSION: &str = "1";
pub const VERSION_HEADER: &str = "x-clara-api-version";

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

    fn bad_request(e: impl ToString) -> Self {
        Self::new(StatusCode::BAD_REQUEST, e.to_string())
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    fn unavailable(message: impl Into<String>) -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Clone, Debug, Serialize)]
pub struct SessionRecord {
    pub id: String,
    pub state: SessionState,
    pub revision: u64,
    pub created_ms: u64,
    pub updated_ms: u64,
    pub finalized: bool,
}

/// Shared service state: the models (read-only while serving) and the
/// in-memory session table. Each session has its own lock, so mutations
/// of one session are serialized without blocking the others.
pub struct AppState {
    system: Option<Arc<System>>,
    idf: Option<CiderIdf>,
    sessions: Mutex<Sessions>,
}

#[derive(Default)]
struct Sessions {
    next: u64,
    map: HashMap<String, Arc<Mutex<SessionRecord>>>,
}

impl AppState {
    pub fn new(system: Option<System>) -> Arc<Self> {
        // CIDEr for a single finalized report takes its idf from the
        // repository, one document per stored sentence weighted by its
        // count.
        let idf = system.as_ref().map(|s| {
            let docs: Vec<(Vec<Vec<String>>, f64)> = s
                .repository()
                .entries()
                .iter()
                .map(|e| (vec![tokenize(&e.raw)], e.weight as f64))
                .collect();
            CiderIdf::from_documents(docs.iter().map(|(d, w)| (d.as_slice(), *w)))
        });
        Arc::new(Self {
            system: system.map(Arc::new),
            idf,
            sessions: Mutex::new(Sessions::default()),
        })
    }

    fn system(&self) -> Result<&Arc<System>, ApiError> {
        self.system
            .as_ref()
            .ok_or_else(|| ApiError::unavailable("no models loaded"))
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<SessionRecord>>, ApiError> {
        self.sessions
            .lock()
            .unwrap()
            .map
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("unknown session {id}")))
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/{id}", get(get_session))
        .route("/v1/sessions/{id}/suggest", post(suggest))
        .route("/v1/sessions/{id}/accept", post(accept))
        .route("/v1/sessions/{id}/finalize", post(finalize))
        .route("/v1/anchors", get(anchors))
        .route("/v1/retrieve", get(retrieve))
        .layer(axum::middleware::map_response(|mut res: Response| async move {
            res.headers_mut()
                .insert(VERSION_HEADER, HeaderValue::from_static(API_VERSION));
            res
        }))
        .with_state(state)
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

#[derive(Deserialize)]
pub struct CreateRequest {
    pub signal_ref: Option<String>,
    pub embedding: Option<Vec<f64>>,
    pub anchors: Option<Vec<String>>,
    pub modality: Option<Modality>,
    pub config: Option<GenerationConfig>,
}

#[derive(Serialize)]
pub struct CreateResponse {
    pub session_id: String,
    pub anchors: Vec<AnchorWord>,
    pub revision: u64,
}

async fn create_session(State(app): State<Arc<AppState>>, Json(req): Json<CreateRequest>) -> ApiResult<CreateResponse> {
    let system = app.system()?;
    let modality = system.modality();
    if let Some(m) = req.modality.filter(|m| *m != modality) {
        return Err(ApiError::bad_request(format!("models are for {modality}, not {m}")));
    }
    let f = match (req.embedding, req.signal_ref) {
        (Some(v), _) => Embedding::new(v).map_err(ApiError::bad_request)?,
        (None, Some(path)) => {
            let rec = RecordingInput::read(&PathBuf::from(&path)).map_err(ApiError::bad_request)?;
            system.embed(&rec).map_err(ApiError::bad_request)?
        }
        (None, None) => return Err(ApiError::bad_request("need signal_ref or embedding")),
    };
    let anchors = req
        .anchors
        .unwrap_or_default()
        .iter()
        .map(|a| AnchorWord::parse(modality, a))
        .collect::<Result<Vec<_>, _>>()
        .map_err(ApiError::bad_request)?;
    let config = req.config.unwrap_or_else(|| system.config().generation.clone());
    if anchors.is_empty() && system.anchor_classifier().is_none() {
        return Err(ApiError::unavailable("no anchors given and no anchor classifier loaded"));
    }
    if config.mode == Mode::Full && system.editor().is_none() {
        return Err(ApiError::unavailable("no editor loaded"));
    }
    let given = (!anchors.is_empty()).then_some(anchors.as_slice());
    let state = SessionState::new(system, f, given, config).map_err(ApiError::bad_request)?;
    let mut sessions = app.sessions.lock().unwrap();
    sessions.next += 1;
    let id = format!("s{:06}", sessions.next);
    let t = now_ms();
    let resolved = state.anchors.clone();
    let record = SessionRecord {
        id: id.clone(),
        state,
        revision: 0,
        created_ms: t,
        updated_ms: t,
        finalized: false,
    };
    sessions.map.insert(id.clone(), Arc::new(Mutex::new(record)));
    Ok(Json(CreateResponse {
        session_id: id,
        anchors: resolved,
        revision: 0,
    }))
}

#[derive(Serialize)]
pub struct SessionView {
    pub session_id: String,
    pub modality: Modality,
    pub anchors: Vec<AnchorWord>,
    pub sentences: Vec<String>,
    pub step: usize,
    pub next_anchor: AnchorWord,
    pub revision: u64,
    pub finalized: bool,
    pub created_ms: u64,
    pub updated_ms: u64,
    pub config: GenerationConfig,
}

async fn get_session(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<SessionView> {
    let system = app.system()?;
    let session = app.session(&id)?;
    let r = session.lock().unwrap();
    Ok(Json(SessionView {
        session_id: r.id.clone(),
        modality: system.modality(),
        anchors: r.state.anchors.clone(),
        sentences: r.state.accepted.clone(),
        step: r.state.step(),
        next_anchor: r.state.next_anchor().clone(),
        revision: r.revision,
        finalized: r.finalized,
        created_ms: r.created_ms,
        updated_ms: r.updated_ms,
        config: r.state.config.clone(),
    }))
}

#[derive(Default, Deserialize)]
pub struct SuggestRequest {
    pub prefix: Option<String>,
    pub anchor_override: Option<String>,
}

#[derive(Serialize)]
pub struct SuggestResponse {
    pub sentence: String,
    pub template_id: Option<u32>,
    pub template: Option<String>,
    pub score: Option<f64>,
    pub anchor_used: AnchorWord,
}

async fn suggest(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<SuggestRequest>,
) -> ApiResult<SuggestResponse> {
    let system = app.system()?;
    let state = app.session(&id)?.lock().unwrap().state.clone();
    let anchor = req
        .anchor_override
        .as_deref()
        .map(|a| AnchorWord::parse(system.modality(), a))
        .transpose()
        .map_err(ApiError::bad_request)?;
    let s = state
        .suggest(system, req.prefix.as_deref(), anchor.as_ref())
        .map_err(ApiError::bad_request)?;
    let (template_id, template, score) = match s.provenance {
        Provenance::Template {
            sentence_id,
            template,
            score,
        } => (Some(sentence_id), Some(template), Some(score)),
        Provenance::NoTemplate => (None, None, None),
    };
    Ok(Json(SuggestResponse {
        sentence: s.sentence,
        template_id,
        template,
        score,
        anchor_used: s.anchor,
    }))
}

#[derive(Deserialize)]
pub struct AcceptRequest {
    pub sentence: String,
    pub revision: Option<u64>,
}

#[derive(Serialize)]
pub struct AcceptResponse {
    pub revision: u64,
    pub sentences: Vec<String>,
}

fn check_writable(r: &SessionRecord, revision: Option<u64>) -> Result<(), ApiError> {
    if r.finalized {
        return Err(ApiError::conflict(format!("session {} is finalized", r.id)));
    }
    match revision {
        Some(rev) if rev != r.revision => Err(ApiError::conflict(format!(
            "stale revision {rev}; session {} is at {}",
            r.id, r.revision
        ))),
        _ => Ok(()),
    }
}

async fn accept(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<AcceptRequest>,
) -> ApiResult<AcceptResponse> {
    let system = app.system()?;
    let session = app.session(&id)?;
    let mut r = session.lock().unwrap();
    check_writable(&r, req.revision)?;
    r.state.accept(system, &req.sentence).map_err(ApiError::bad_request)?;
    r.revision += 1;
    r.updated_ms = now_ms();
    Ok(Json(AcceptResponse {
        revision: r.revision,
        sentences: r.state.accepted.clone(),
    }))
}

#[derive(Default, Deserialize)]
pub struct FinalizeRequest {
    pub references: Option<Vec<String>>,
    pub revision: Option<u64>,
}

#[derive(Serialize)]
pub struct ReportMetrics {
    pub bleu1: f64,
    pub bleu2: f64,
    pub bleu3: f64,
    pub bleu4: f64,
    pub cider: f64,
}

#[derive(Serialize)]
pub struct FinalizeResponse {
    pub report: String,
    pub sentences: Vec<String>,
    pub revision: u64,
    pub metrics: Option<ReportMetrics>,
}

async fn finalize(
    State(app): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(req): Json<FinalizeRequest>,
) -> ApiResult<FinalizeResponse> {
    app.system()?;
    let session = app.session(&id)?;
    let mut r = session.lock().unwrap();
    check_writable(&r, req.revision)?;
    if r.state.accepted.is_empty() {
        return Err(ApiError::conflict("nothing accepted yet"));
    }
    let report = r.state.report();
    let metrics = match req.references.filter(|refs| !refs.is_empty()) {
        Some(refs) => {
            let refs: Vec<&str> = refs.iter().map(String::as_str).collect();
            let pairs = [EvalPair::from_text(&report, &refs)];
            let idf = app.idf.as_ref().expect("idf exists with models");
            Some(ReportMetrics {
                bleu1: bleu(&pairs, 1),
                bleu2: bleu(&pairs, 2),
                bleu3: bleu(&pairs, 3),
                bleu4: bleu(&pairs, 4),
                cider: cider_with_idf(&pairs, idf),
            })
        }
        None => None,
    };
    r.finalized = true;
    r.revision += 1;
    r.updated_ms = now_ms();
    Ok(Json(FinalizeResponse {
        report,
        sentences: r.state.accepted.clone(),
        revision: r.revision,
        metrics,
    }))
}

#[derive(Deserialize)]
pub struct AnchorsQuery {
    pub modality: Option<String>,
}

#[derive(Serialize)]
pub struct AnchorsResponse {
    pub modality: Modality,
    pub anchors: Vec<&'static str>,
}

async fn anchors(State(app): State<Arc<AppState>>, Query(q): Query<AnchorsQuery>) -> ApiResult<AnchorsResponse> {
    let modality = match q.modality {
        Some(m) => m.parse::<Modality>().map_err(ApiError::bad_request)?,
        None => app
            .system
            .as_ref()
            .map(|s| s.modality())
            .ok_or_else(|| ApiError::bad_request("modality is required when no models are loaded"))?,
    };
    Ok(Json(AnchorsResponse {
        modality,
        anchors: modality.anchor_vocabulary().to_vec(),
    }))
}

#[derive(Deserialize)]
pub struct RetrieveQuery {
    pub q: String,
    pub k: Option<usize>,
}

#[derive(Serialize)]
pub struct RetrievedSentence {
    pub sentence_id: u32,
    pub sentence: String,
    pub weight: u64,
    pub score: f64,
}

async fn retrieve(State(app): State<Arc<AppState>>, Query(q): Query<RetrieveQuery>) -> ApiResult<Vec<RetrievedSentence>> {
    let system = app.system()?;
    let query = make_query(&[], Some(&q.q), system.vocab()).map_err(ApiError::bad_request)?;
    let k = q.k.unwrap_or(5);
    let hits = match system.repository().retrieve(&query, k) {
        Ok(h) => h,
        Err(clara::Error::EmptyQuery) => Vec::new(),
        Err(e) => return Err(ApiError::bad_request(e)),
    };
    Ok(Json(
        hits.into_iter()
            .map(|(e, score)| RetrievedSentence {
                sentence_id: e.sentence_id,
                sentence: e.raw.clone(),
                weight: e.weight,
                score,
            })
            .collect(),
    ))
}

/// Serves `router` on `addr` until the process ends.
pub async fn serve(addr: &str, state: Arc<AppState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
