//! HTTP routes.
//!
//! Every handler answers JSON; failures use the [`ApiError`] envelope.
//! Blocking core calls run on the blocking pool.

use std::collections::HashMap;
use std::sync::Arc;

use axum::body::{Body, Bytes};
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rosann_core::annotation::{AnnotationPatch, Codebook, TierKind};
use rosann_core::assist::{
    apply_suggestions, build_context, parse_suggestions, request_annotations, AssistError, PrivacyPolicy, Rejection,
};
use rosann_core::bag::open_bag;
use rosann_core::media::{
    config_fingerprint, load_frame_index, load_manifest, load_transcript, lookup_cache, process_bag, ExtractionConfig,
    ProcessContext,
};
use rosann_core::stats::{export_stats_csv, export_stats_json};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower::ServiceExt;
use tower_http::services::{ServeDir, ServeFile};

use crate::app::{project_csv, project_stats, AppState};
use crate::error::ApiError;
use crate::jobs::{JobKind, JobState};

type Shared = Arc<AppState>;
type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: Shared) -> Router {
    let ui = state.ui_dir.clone();
    let api = Router::new()
        .route("/api/bags", get(list_bags))
        .route("/api/bags/{id}/topics", get(bag_topics))
        .route("/api/bags/{id}/process", post(process))
        .route("/api/bags/{id}/manifest", get(manifest))
        .route("/api/bags/{id}/frames", get(frames))
        .route("/api/bags/{id}/transcript", get(transcript))
        .route("/media/{id}/{kind}", get(media))
        .route("/api/codebooks", get(list_codebooks).post(create_codebook))
        .route(
            "/api/codebooks/{name}",
            get(get_codebook).put(put_codebook).delete(delete_codebook),
        )
        .route("/api/projects/{bag_id}", get(get_project))
        .route("/api/projects/{bag_id}/tiers", post(create_tier))
        .route("/api/projects/{bag_id}/tiers/{name}", axum::routing::delete(delete_tier))
        .route("/api/projects/{bag_id}/annotations", post(add_annotation))
        .route(
            "/api/projects/{bag_id}/annotations/{id}",
            axum::routing::patch(update_annotation).delete(delete_annotation),
        )
        .route("/api/projects/{bag_id}/transcript", post(import_transcript))
        .route("/api/projects/{bag_id}/stats", get(stats))
        .route("/api/projects/{bag_id}/export/csv", get(export_csv))
        .route("/api/projects/{bag_id}/export/stats", get(export_stats))
        .route("/api/projects/{bag_id}/chat", post(chat))
        .route("/api/projects/{bag_id}/chat/{session}", get(chat_log))
        .route("/api/jobs/{id}", get(job))
        .with_state(state);
    match ui {
        Some(dir) if dir.is_dir() => api.fallback_service(ServeDir::new(dir)),
        _ => api.fallback(|| async { ApiError::not_found("no such route") }),
    }
}

async fn blocking<T, F>(f: F) -> ApiResult<T>
where
    T: Send + 'static,
    F: FnOnce() -> ApiResult<T> + Send + 'static,
{
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

/// JSON body with the failing field path in the error.
fn parse<T: DeserializeOwned>(body: &[u8]) -> ApiResult<T> {
    let de = &mut serde_json::Deserializer::from_slice(body);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let err = ApiError::validation(e.inner().to_string());
        if path == "." {
            err
        } else {
            err.with_field(path)
        }
    })
}

fn flag(q: &HashMap<String, String>, key: &str, default: bool) -> ApiResult<bool> {
    match q.get(key).map(String::as_str) {
        None => Ok(default),
        Some("true") | Some("1") => Ok(true),
        Some("false") | Some("0") => Ok(false),
        Some(other) => Err(ApiError::validation(format!("'{other}' is not a boolean")).with_field(key)),
    }
}

fn number(q: &HashMap<String, String>, key: &str) -> ApiResult<Option<u64>> {
    q.get(key)
        .map(|v| {
            v.parse::<u64>()
                .map_err(|_| ApiError::validation(format!("'{v}' is not a non-negative integer")).with_field(key))
        })
        .transpose()
}

async fn list_bags(State(st): State<Shared>) -> ApiResult<Json<Value>> {
    blocking(move || Ok(Json(json!(st.list_bags()?)))).await
}

async fn bag_topics(State(st): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let handle = open_bag(st.bag_path(&id)?)?;
        Ok(Json(json!(handle.list_topics())))
    })
    .await
}

/// Starts extraction, or answers from the cache when this bag was already
/// processed with the same config.
async fn process(State(st): State<Shared>, Path(id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let config: ExtractionConfig = if body.iter().all(u8::is_ascii_whitespace) {
        ExtractionConfig::default()
    } else {
        parse(&body)?
    };
    blocking(move || {
        let path = st.bag_path(&id)?;
        if let Some(entry) = lookup_cache(&st.data, &id) {
            if entry.config_fingerprint == config_fingerprint(&config) {
                let m = load_manifest(&st.data, &id)?;
                return Ok((StatusCode::OK, Json(json!({"cached": true, "manifest": m}))).into_response());
            }
        }
        let kind = if config.transcribe { JobKind::Transcribe } else { JobKind::ProcessBag };
        let (job, created) = st.jobs.start(kind, &id);
        if created {
            let st = st.clone();
            let job_id = job.id.clone();
            std::thread::spawn(move || {
                st.jobs.set(&job_id, JobState::Running, 0.1, None);
                let mut ctx = ProcessContext::new(st.data.clone())
                    .with_exec(st.exec)
                    .with_decoder(st.decoder.clone());
                if let Some(t) = &st.transcriber {
                    ctx = ctx.with_transcriber(t.clone());
                }
                let result = open_bag(&path)
                    .map_err(ApiError::from)
                    .and_then(|h| process_bag(&h, &config, &ctx).map_err(ApiError::from));
                match result {
                    Ok(_) => st.jobs.set(&job_id, JobState::Done, 1.0, None),
                    Err(e) => st.jobs.set(&job_id, JobState::Failed, 1.0, Some(e.line())),
                };
            });
        }
        Ok((StatusCode::ACCEPTED, Json(json!({"cached": false, "job": job}))).into_response())
    })
    .await
}

async fn manifest(State(st): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(move || Ok(Json(json!(st.manifest(&id)?)))).await
}

async fn frames(State(st): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let m = st.manifest(&id)?;
        Ok(Json(json!(load_frame_index(&st.data, &m)?)))
    })
    .await
}

async fn transcript(State(st): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let m = st.manifest(&id)?;
        Ok(Json(json!(load_transcript(&st.data, &m)?)))
    })
    .await
}

/// Video or audio file, with byte-range support for seeking.
async fn media(State(st): State<Shared>, Path((id, kind)): Path<(String, String)>, req: Request) -> ApiResult<Response> {
    let data = st.data.clone();
    let m = blocking(move || Ok(load_manifest(&data, &id)?)).await?;
    let rel = match kind.as_str() {
        "video" => m.video.map(|v| v.path),
        "audio" => m.audio.map(|a| a.path),
        other => return Err(ApiError::not_found(format!("no media kind '{other}'"))),
    }
    .ok_or_else(|| ApiError::not_found(format!("bag has no {kind}")))?;
    let path = st.data.processed(&m.bag_id).join(rel);
    let resp = ServeFile::new(path)
        .oneshot(req)
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(resp.map(Body::new))
}

async fn list_codebooks(State(st): State<Shared>) -> ApiResult<Json<Value>> {
    blocking(move || Ok(Json(json!(st.booklist().list()?)))).await
}

async fn get_codebook(State(st): State<Shared>, Path(name): Path<String>) -> ApiResult<Json<Value>> {
    blocking(move || Ok(Json(json!(st.booklist().get(&name)?)))).await
}

fn codebook_body(body: &[u8]) -> ApiResult<Codebook> {
    std::str::from_utf8(body)
        .map_err(|e| ApiError::validation(e.to_string()))
        .and_then(|t| Codebook::from_json(t).map_err(ApiError::from))
}

async fn create_codebook(State(st): State<Shared>, body: Bytes) -> ApiResult<Response> {
    let book = codebook_body(&body)?;
    blocking(move || {
        let list = st.booklist();
        if list.get(&book.name).is_ok() {
            return Err(ApiError::new(409, "DUPLICATE", format!("codebook '{}' exists", book.name)).with_field("name"));
        }
        list.save(&book)?;
        Ok((StatusCode::CREATED, Json(json!(book))).into_response())
    })
    .await
}

async fn put_codebook(State(st): State<Shared>, Path(name): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let book = codebook_body(&body)?;
    if book.name != name {
        return Err(ApiError::validation("body name differs from the path").with_field("name"));
    }
    blocking(move || {
        st.booklist().save(&book)?;
        Ok(Json(json!(book)))
    })
    .await
}

async fn delete_codebook(State(st): State<Shared>, Path(name): Path<String>) -> ApiResult<StatusCode> {
    blocking(move || {
        st.booklist().delete(&name)?;
        Ok(StatusCode::NO_CONTENT)
    })
    .await
}

async fn get_project(State(st): State<Shared>, Path(bag_id): Path<String>) -> ApiResult<Json<Value>> {
    blocking(move || Ok(Json(json!(*st.project_store(&bag_id)?.snapshot())))).await
}

#[derive(Deserialize)]
struct NewTier {
    name: String,
    kind: TierKind,
    #[serde(default)]
    codebook_ref: Option<String>,
}

async fn create_tier(State(st): State<Shared>, Path(bag_id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: NewTier = parse(&body)?;
    blocking(move || {
        let store = st.project_store(&bag_id)?;
        let books = st.booklist();
        let tier = store.update(|p| {
            p.create_tier(&req.name, req.kind, req.codebook_ref.as_deref(), &books)
                .cloned()
        })?;
        Ok((StatusCode::CREATED, Json(json!(tier))).into_response())
    })
    .await
}

async fn delete_tier(State(st): State<Shared>, Path((bag_id, name)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let tier = st.project_store(&bag_id)?.update(|p| p.delete_tier(&name))?;
        Ok(Json(json!(tier)))
    })
    .await
}

#[derive(Deserialize)]
struct NewAnnotation {
    tier: String,
    start_ms: u64,
    end_ms: u64,
    value: String,
}

async fn add_annotation(State(st): State<Shared>, Path(bag_id): Path<String>, body: Bytes) -> ApiResult<Response> {
    let req: NewAnnotation = parse(&body)?;
    blocking(move || {
        let books = st.booklist();
        let a = st
            .project_store(&bag_id)?
            .update(|p| p.add_annotation(&req.tier, req.start_ms, req.end_ms, &req.value, &books))?;
        Ok((StatusCode::CREATED, Json(json!(a))).into_response())
    })
    .await
}

async fn update_annotation(
    State(st): State<Shared>,
    Path((bag_id, id)): Path<(String, String)>,
    body: Bytes,
) -> ApiResult<Json<Value>> {
    let patch: AnnotationPatch = parse(&body)?;
    blocking(move || {
        let books = st.booklist();
        let a = st
            .project_store(&bag_id)?
            .update(|p| p.update_annotation(&id, &patch, &books))?;
        Ok(Json(json!(a)))
    })
    .await
}

async fn delete_annotation(
    State(st): State<Shared>,
    Path((bag_id, id)): Path<(String, String)>,
) -> ApiResult<Json<Value>> {
    blocking(move || {
        let a = st.project_store(&bag_id)?.update(|p| p.delete_annotation(&id))?;
        Ok(Json(json!(a)))
    })
    .await
}

#[derive(Deserialize, Default)]
struct ImportRequest {
    #[serde(default)]
    replace: bool,
}

/// Turns the extracted transcript into one tier per speaker.
async fn import_transcript(State(st): State<Shared>, Path(bag_id): Path<String>, body: Bytes) -> ApiResult<Json<Value>> {
    let req: ImportRequest = if body.iter().all(u8::is_ascii_whitespace) {
        ImportRequest::default()
    } else {
        parse(&body)?
    };
    blocking(move || {
        let m = st.manifest(&bag_id)?;
        let segments = load_transcript(&st.data, &m)?;
        let report = st
            .project_store(&bag_id)?
            .update(|p| p.import_transcript(&segments, req.replace))?;
        Ok(Json(json!(report)))
    })
    .await
}

async fn stats(
    State(st): State<Shared>,
    Path(bag_id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Json<Value>> {
    let include = flag(&q, "include_transcript", true)?;
    let t_ms = number(&q, "t_ms")?;
    blocking(move || {
        let p = st.project_store(&bag_id)?.snapshot();
        Ok(Json(json!(project_stats(&p, include, t_ms)?)))
    })
    .await
}

async fn export_csv(State(st): State<Shared>, Path(bag_id): Path<String>) -> ApiResult<Response> {
    let csv = blocking(move || Ok(project_csv(&st.project_store(&bag_id)?.snapshot()))).await?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

async fn export_stats(
    State(st): State<Shared>,
    Path(bag_id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
) -> ApiResult<Response> {
    let include = flag(&q, "include_transcript", true)?;
    let t_ms = number(&q, "t_ms")?;
    let format = q.get("format").cloned().unwrap_or_else(|| "json".into());
    let summary = blocking(move || project_stats(&st.project_store(&bag_id)?.snapshot(), include, t_ms)).await?;
    match format.as_str() {
        "json" => Ok(([(header::CONTENT_TYPE, "application/json")], export_stats_json(&summary)).into_response()),
        "csv" => Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], export_stats_csv(&summary)).into_response()),
        other => Err(ApiError::validation(format!("unknown format '{other}'")).with_field("format")),
    }
}

#[derive(Deserialize)]
struct ChatRequest {
    instruction: String,
    #[serde(default)]
    session_id: Option<String>,
    #[serde(default)]
    frames_per_minute: Option<f64>,
    #[serde(default)]
    privacy: Option<String>,
    #[serde(default)]
    codebook: Option<String>,
}

#[derive(Serialize)]
struct ChatResponse {
    session_id: String,
    reply: String,
    tiers: Vec<String>,
    applied: usize,
    rejected: Vec<Rejection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

/// One assisted-annotation turn: context, LLM call, parse, apply.
async fn chat(State(st): State<Shared>, Path(bag_id): Path<String>, body: Bytes) -> ApiResult<Json<ChatResponse>> {
    let req: ChatRequest = parse(&body)?;
    blocking(move || {
        let policy = match req.privacy.as_deref() {
            None | Some("deny_all_frames") => PrivacyPolicy::DenyAllFrames,
            Some("allow_all_frames") => PrivacyPolicy::AllowAllFrames,
            Some("detector") => PrivacyPolicy::Detector(
                st.frame_filter
                    .clone()
                    .ok_or_else(|| ApiError::validation("no frame detector configured").with_field("privacy"))?,
            ),
            Some(other) => {
                return Err(ApiError::validation(format!("unknown privacy mode '{other}'")).with_field("privacy"))
            }
        };
        let store = st.project_store(&bag_id)?;
        let manifest = st.manifest(&bag_id)?;
        let backend = st.chat_backend()?;
        let book = req.codebook.as_deref().map(|n| st.booklist().get(n)).transpose()?;
        let session_id = req.session_id.clone().unwrap_or_else(|| bag_id.clone());
        let session = st.chat_session(&session_id);
        let mut log = session.lock().expect("chat session");
        let snapshot = store.snapshot();
        let ctx = build_context(
            &snapshot,
            &st.data,
            &manifest,
            &req.instruction,
            &policy,
            req.frames_per_minute.unwrap_or(6.0),
            book.as_ref(),
        )?;
        let reply = request_annotations(backend.as_ref(), &ctx, &mut log)?;
        let parsed = match parse_suggestions(&reply, snapshot.observation_ms) {
            Ok(p) => p,
            Err(AssistError::NoJsonFound) => {
                return Ok(Json(ChatResponse {
                    session_id,
                    reply,
                    tiers: Vec::new(),
                    applied: 0,
                    rejected: Vec::new(),
                    note: Some("the reply contained no JSON array; nothing applied".into()),
                }))
            }
            Err(e) => return Err(e.into()),
        };
        let report = store.update(|p| Ok(apply_suggestions(p, &parsed.accepted)))?;
        let mut rejected = parsed.rejected;
        rejected.extend(report.rejected);
        Ok(Json(ChatResponse {
            session_id,
            reply,
            tiers: report.tiers,
            applied: report.applied,
            rejected,
            note: None,
        }))
    })
    .await
}

async fn chat_log(State(st): State<Shared>, Path((_bag_id, session)): Path<(String, String)>) -> ApiResult<Json<Value>> {
    blocking(move || {
        let log = st.chat_session(&session);
        let log = log.lock().expect("chat session").clone();
        Ok(Json(json!(log)))
    })
    .await
}

async fn job(State(st): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<Value>> {
    st.jobs
        .get(&id)
        .map(|j| Json(json!(j)))
        .ok_or_else(|| ApiError::not_found(format!("no job '{id}'")))
}
