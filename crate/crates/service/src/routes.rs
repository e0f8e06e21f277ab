use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{FromRequest, FromRequestParts, Path, State};
use axum::http::StatusCode;
use axum::routing::{get, patch, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use vignette_core::extract::{CharacterPatch, EnvOp, EventEdit, ExtractionSession, Extractor, Stage};
use vignette_core::planner::{Planner, PlannerMode};
use vignette_core::runtime::{CommandKind, RuntimeConfig, Status, World, WorldState};
use vignette_core::spec::{CharacterId, Character, ObjectId, RoomId, Snippet};

use crate::error::ApiError;
use crate::live::{spawn_clock, Delta, LiveSession};
use crate::store::{SessionMeta, StoredVignette};
use crate::{new_id, AppState};

type Shared = State<Arc<AppState>>;
type ApiResult<T> = Result<T, ApiError>;

/// `Json` whose rejections come back in the service's error shape.
#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
pub struct ApiJson<T>(pub T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
pub struct ApiQuery<T>(pub T);

const DEFAULT_POLL_MS: u64 = 10_000;
const MAX_POLL_MS: u64 = 30_000;

pub fn router(state: Arc<AppState>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/catalog", get(catalog))
        .route("/vignettes", post(create_vignette).get(list_vignettes))
        .route("/vignettes/{id}", get(get_vignette))
        .route("/vignettes/{id}/rooms", post(confirm_rooms))
        .route("/vignettes/{id}/environment", post(update_environment))
        .route("/vignettes/{id}/confirm", post(confirm_stage))
        .route("/vignettes/{id}/characters/{cid}", patch(update_character))
        .route("/vignettes/{id}/characters/{cid}/suggest", post(suggest_persona))
        .route("/vignettes/{id}/characters/{cid}/chat", post(rehearse_chat))
        .route("/vignettes/{id}/events", post(update_events))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(session_info).delete(end_session))
        .route("/sessions/{id}/commands", post(post_command))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/state", get(get_state));
    Router::new().nest("/api/v1", api).fallback(no_route).with_state(state)
}

async fn no_route() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", "no such route")
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))
}

async fn health(State(s): Shared) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "provider": s.gateway.provider_id(),
        "vignettes": s.vignette_ids().len(),
        "manual_clock": s.config.manual_clock(),
    }))
}

async fn catalog(State(s): Shared) -> Json<vignette_core::catalog::Catalog> {
    Json(s.extractor.catalog().clone())
}

#[derive(Debug, Deserialize)]
pub struct CreateVignette {
    #[serde(alias = "story_text")]
    pub story: String,
}

async fn create_vignette(State(s): Shared, ApiJson(req): ApiJson<CreateVignette>) -> ApiResult<(StatusCode, Json<StoredVignette>)> {
    let ex = s.extractor.clone();
    let session = blocking(move || ex.start(&req.story)).await??;
    let v = StoredVignette::new(new_id(), session);
    s.store.save_vignette(&v)?;
    s.insert_vignette(v.clone());
    tracing::info!(id = %v.id, "vignette created");
    Ok((StatusCode::CREATED, Json(v)))
}

#[derive(Debug, Serialize)]
struct VignetteSummary {
    id: String,
    title: String,
    extraction_stage: Stage,
    updated_at: chrono::DateTime<chrono::Utc>,
}

async fn list_vignettes(State(s): Shared) -> Json<Vec<VignetteSummary>> {
    let mut out = Vec::new();
    for id in s.vignette_ids() {
        if let Ok(v) = s.vignette(&id) {
            let v = v.lock().await;
            out.push(VignetteSummary { id: v.id.clone(), title: v.spec.title.clone(), extraction_stage: v.extraction_stage, updated_at: v.updated_at });
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Json(out)
}

async fn get_vignette(State(s): Shared, Path(id): Path<String>) -> ApiResult<Json<StoredVignette>> {
    let v = s.vignette(&id)?;
    let v = v.lock().await.clone();
    Ok(Json(v))
}

/// Runs `f` on a copy of the draft off the async runtime and stores the result if it succeeds.
async fn mutate<R, F>(s: &AppState, id: &str, f: F) -> ApiResult<(R, StoredVignette)>
where
    R: Send + 'static,
    F: FnOnce(&Extractor, &mut ExtractionSession) -> ApiResult<R> + Send + 'static,
{
    let entry = s.vignette(id)?;
    let mut guard = entry.lock().await;
    let mut session = guard.session();
    let ex = s.extractor.clone();
    let (result, session) = blocking(move || {
        let r = f(&ex, &mut session);
        (r, session)
    })
    .await?;
    let r = result?;
    let mut next = guard.clone();
    next.apply(session);
    s.store.save_vignette(&next)?;
    *guard = next.clone();
    Ok((r, next))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct ConfirmRooms {
    pub layout_id: Option<String>,
    pub labels: BTreeMap<RoomId, String>,
}

async fn confirm_rooms(State(s): Shared, Path(id): Path<String>, ApiJson(req): ApiJson<ConfirmRooms>) -> ApiResult<Json<StoredVignette>> {
    let (_, v) = mutate(&s, &id, move |ex, session| Ok(ex.confirm_rooms(session, req.layout_id.as_deref(), &req.labels)?)).await?;
    Ok(Json(v))
}

#[derive(Debug, Deserialize)]
pub struct EnvironmentEdit {
    pub ops: Vec<EnvOp>,
}

#[derive(Debug, Serialize)]
struct EnvironmentResult {
    touched: Vec<ObjectId>,
    vignette: StoredVignette,
}

async fn update_environment(
    State(s): Shared,
    Path(id): Path<String>,
    ApiJson(req): ApiJson<EnvironmentEdit>,
) -> ApiResult<Json<EnvironmentResult>> {
    let (touched, vignette) = mutate(&s, &id, move |ex, session| Ok(ex.update_environment(session, &req.ops)?)).await?;
    Ok(Json(EnvironmentResult { touched, vignette }))
}

#[derive(Debug, Deserialize)]
pub struct ConfirmStage {
    pub stage: Stage,
}

async fn confirm_stage(State(s): Shared, Path(id): Path<String>, ApiJson(req): ApiJson<ConfirmStage>) -> ApiResult<Json<StoredVignette>> {
    let (_, v) = mutate(&s, &id, move |_, session| Ok(session.confirm(req.stage)?)).await?;
    Ok(Json(v))
}

fn character(session: &ExtractionSession, cid: &CharacterId) -> ApiResult<Character> {
    session.draft.character(cid).cloned().ok_or_else(|| ApiError::not_found("character", cid.as_str()))
}

async fn update_character(
    State(s): Shared,
    Path((id, cid)): Path<(String, String)>,
    ApiJson(patch): ApiJson<CharacterPatch>,
) -> ApiResult<Json<StoredVignette>> {
    let cid = CharacterId::new(cid);
    let (_, v) = mutate(&s, &id, move |_, session| {
        character(session, &cid)?;
        Ok(session.update_character(&cid, &patch)?)
    })
    .await?;
    Ok(Json(v))
}

async fn read_character(s: &AppState, id: &str, cid: &str) -> ApiResult<Character> {
    let entry = s.vignette(id)?;
    let v = entry.lock().await;
    character(&v.session(), &CharacterId::new(cid))
}

async fn suggest_persona(State(s): Shared, Path((id, cid)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    let c = read_character(&s, &id, &cid).await?;
    let ex = s.extractor.clone();
    let suggestions = blocking(move || ex.suggest_persona(&c)).await?;
    Ok(Json(json!({ "character_id": cid, "suggestions": suggestions })))
}

#[derive(Debug, Deserialize)]
pub struct RehearseChat {
    pub utterance: String,
    #[serde(default)]
    pub history: Vec<Snippet>,
}

async fn rehearse_chat(
    State(s): Shared,
    Path((id, cid)): Path<(String, String)>,
    ApiJson(req): ApiJson<RehearseChat>,
) -> ApiResult<Json<vignette_core::extract::ChatReply>> {
    let c = read_character(&s, &id, &cid).await?;
    let ex = s.extractor.clone();
    Ok(Json(blocking(move || ex.simulate_chat(&c, &req.utterance, &req.history)).await?))
}

#[derive(Debug, Deserialize)]
pub struct EventEdits {
    pub edits: Vec<EventEdit>,
}

async fn update_events(State(s): Shared, Path(id): Path<String>, ApiJson(req): ApiJson<EventEdits>) -> ApiResult<Json<StoredVignette>> {
    let (_, v) = mutate(&s, &id, move |_, session| Ok(session.update_events(&req.edits)?)).await?;
    Ok(Json(v))
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub vignette_id: String,
    #[serde(default = "default_mode")]
    pub mode: PlannerMode,
    pub seed: Option<u64>,
}

fn default_mode() -> PlannerMode {
    PlannerMode::Cd
}

#[derive(Debug, Serialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub vignette_id: String,
    pub mode: PlannerMode,
    pub seed: u64,
    /// The story text, shown above the grid.
    pub caption: String,
    pub state: WorldState,
}

async fn create_session(State(s): Shared, ApiJson(req): ApiJson<CreateSession>) -> ApiResult<(StatusCode, Json<SessionCreated>)> {
    let entry = s.vignette(&req.vignette_id)?;
    let spec = {
        let v = entry.lock().await;
        if v.extraction_stage != Stage::Complete {
            return Err(ApiError::new(StatusCode::CONFLICT, "INCOMPLETE_SPEC", format!("vignette is at stage {}", v.extraction_stage))
                .with_details(json!({ "extraction_stage": v.extraction_stage })));
        }
        v.spec.clone()
    };
    let seed = req.seed.unwrap_or_else(|| uuid::Uuid::new_v4().as_u64_pair().0);
    let manual = s.config.manual_clock();
    let config = RuntimeConfig {
        realtime_planning: !manual,
        ms_per_tick: if manual { RuntimeConfig::default().ms_per_tick } else { s.config.tick_ms },
        ..RuntimeConfig::default()
    };
    let planner = Planner::new(s.gateway.clone(), req.mode, seed);
    let caption = spec.story_text.clone();
    let world = blocking(move || World::new(spec, planner, config)).await??;
    let meta = SessionMeta { id: new_id(), vignette_id: req.vignette_id, mode: req.mode, seed, created_at: chrono::Utc::now() };
    s.store.save_session_meta(&meta)?;
    let state = world.snapshot();
    let live = LiveSession::new(meta.clone(), world, s.store.clone());
    if !manual {
        spawn_clock(&live, Duration::from_millis(s.config.tick_ms));
    }
    s.insert_session(live);
    tracing::info!(session = %meta.id, vignette = %meta.vignette_id, mode = %meta.mode, "session started");
    Ok((
        StatusCode::CREATED,
        Json(SessionCreated { session_id: meta.id, vignette_id: meta.vignette_id, mode: meta.mode, seed, caption, state }),
    ))
}

async fn session_info(State(s): Shared, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let live = s.session(&id)?;
    let d = live.delta(u64::MAX);
    Ok(Json(json!({
        "session_id": live.meta.id,
        "vignette_id": live.meta.vignette_id,
        "mode": live.meta.mode,
        "seed": live.meta.seed,
        "created_at": live.meta.created_at,
        "tick": d.tick,
        "status": d.status,
        "closed": d.closed,
    })))
}

fn gone(id: &str) -> ApiError {
    ApiError::new(StatusCode::GONE, "SESSION_ENDED", format!("session {id} has ended"))
}

async fn post_command(State(s): Shared, Path(id): Path<String>, ApiJson(command): ApiJson<CommandKind>) -> ApiResult<(StatusCode, Json<Value>)> {
    let live = s.session(&id)?;
    let at = live.enqueue(command).ok_or_else(|| gone(&id))?;
    Ok((StatusCode::ACCEPTED, Json(json!({ "accepted": true, "apply_at_tick": at }))))
}

#[derive(Debug, Deserialize)]
pub struct Advance {
    #[serde(default = "one")]
    pub ticks: u64,
}

fn one() -> u64 {
    1
}

async fn advance(State(s): Shared, Path(id): Path<String>, ApiJson(req): ApiJson<Advance>) -> ApiResult<Json<Value>> {
    let live = s.session(&id)?;
    if !s.config.manual_clock() {
        return Err(ApiError::new(StatusCode::CONFLICT, "CLOCK_RUNNING", "sessions advance on their own; set the tick length to 0 to step manually"));
    }
    if live.finished() {
        return Err(gone(&id));
    }
    let (tick, status) = blocking(move || {
        let mut last = live.step();
        for _ in 1..req.ticks {
            if last.1 == Status::Ended {
                break;
            }
            last = live.step();
        }
        last
    })
    .await?;
    Ok(Json(json!({ "tick": tick, "status": status })))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
pub struct StateQuery {
    pub since_tick: u64,
    pub timeout_ms: Option<u64>,
}

async fn get_state(State(s): Shared, Path(id): Path<String>, ApiQuery(q): ApiQuery<StateQuery>) -> ApiResult<Json<Delta>> {
    let live = s.session(&id)?;
    let timeout = Duration::from_millis(q.timeout_ms.unwrap_or(DEFAULT_POLL_MS).min(MAX_POLL_MS));
    if !timeout.is_zero() {
        live.wait_past(q.since_tick, timeout).await;
    }
    Ok(Json(live.delta(q.since_tick)))
}

async fn end_session(State(s): Shared, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    let live = s.session(&id)?;
    live.close();
    let d = live.delta(u64::MAX);
    tracing::info!(session = %id, tick = d.tick, "session closed");
    Ok(Json(json!({ "session_id": id, "closed": true, "tick": d.tick, "status": d.status })))
}
