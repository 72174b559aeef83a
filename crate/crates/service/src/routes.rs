use std::collections::HashMap;

use axum::body::Bytes;
use axum::extract::rejection::JsonRejection;
use axum::extract::{Multipart, Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine as _;
use imgjournal_core::codecs::DEFAULT_JPEG_QUALITY;
use imgjournal_core::journal::{entry_line, parse};
use imgjournal_core::replay::Verification;
use imgjournal_core::{
    export_image, import_image, verify, ContentHash, ImageFormat, Imported, Raster, Session,
};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;
use crate::params::OpRequest;
use crate::state::AppState;

/// Snapshot of a session as returned by every session endpoint.
#[derive(Debug, Serialize)]
pub struct SessionResource {
    pub id: String,
    pub source_name: String,
    pub width: u32,
    pub height: u32,
    /// Canonical journal text, header included.
    pub journal: String,
    /// The most recently appended journal line.
    pub entry: String,
    pub history_len: usize,
    pub undo_depth: usize,
    pub source_hash: ContentHash,
    pub current_hash: ContentHash,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SessionResource {
    pub fn of(session: &Session) -> Self {
        let (width, height) = session.current().dimensions();
        SessionResource {
            id: session.id().to_string(),
            source_name: session.source_name().to_string(),
            width,
            height,
            journal: session.journal_text(),
            entry: entry_line(session.journal().entries.last().expect("journal has IMPORT")),
            history_len: session.history_len(),
            undo_depth: session.undo_depth(),
            source_hash: session.source_hash(),
            current_hash: session.current_hash(),
            warnings: Vec::new(),
        }
    }
}

struct Part {
    name: String,
    file_name: Option<String>,
    bytes: Bytes,
}

async fn read_parts(mut multipart: Multipart) -> Result<Vec<Part>, ApiError> {
    let mut parts = Vec::new();
    while let Some(field) = multipart.next_field().await? {
        let name = field.name().unwrap_or_default().to_string();
        let file_name = field.file_name().map(str::to_string);
        let bytes = field.bytes().await?;
        parts.push(Part { name, file_name, bytes });
    }
    Ok(parts)
}

fn take_part(parts: &mut Vec<Part>, name: &str) -> Result<Part, ApiError> {
    let idx = parts
        .iter()
        .position(|p| p.name == name)
        .ok_or_else(|| ApiError::bad_request(format!("missing multipart field `{name}`")))?;
    Ok(parts.remove(idx))
}

fn import_part(part: &Part) -> Result<Imported, ApiError> {
    let declared = part.file_name.as_deref().and_then(ImageFormat::from_path);
    Ok(import_image(&part.bytes, declared)?)
}

/// Runs `f` on a blocking thread while holding the session's lock.
async fn with_session<T, F>(state: &AppState, id: &str, f: F) -> Result<T, ApiError>
where
    T: Send + 'static,
    F: FnOnce(&mut Session) -> Result<T, ApiError> + Send + 'static,
{
    let session = state.get(id)?;
    let mut guard = session.lock_owned().await;
    tokio::task::spawn_blocking(move || f(&mut guard))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))?
}

pub async fn create_session(
    State(state): State<AppState>,
    multipart: Multipart,
) -> Result<(StatusCode, Json<SessionResource>), ApiError> {
    let mut parts = read_parts(multipart).await?;
    let part = take_part(&mut parts, "image")?;
    let name = part.file_name.clone().unwrap_or_else(|| "image".into());
    let imported = tokio::task::spawn_blocking(move || import_part(&part))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))??;
    let session = Session::open(imported.raster, name);
    let mut resource = SessionResource::of(&session);
    resource.warnings = imported.warnings;
    tracing::info!(id = %resource.id, width = resource.width, height = resource.height, "session opened");
    state.insert(session);
    Ok((StatusCode::CREATED, Json(resource)))
}

pub async fn get_session(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionResource>, ApiError> {
    with_session(&state, &id, |s| Ok(SessionResource::of(s))).await.map(Json)
}

#[derive(Debug, Serialize)]
pub struct InsertResource {
    pub name: String,
    pub hash: ContentHash,
    pub width: u32,
    pub height: u32,
}

pub async fn add_insert(
    State(state): State<AppState>,
    Path(id): Path<String>,
    multipart: Multipart,
) -> Result<(StatusCode, Json<InsertResource>), ApiError> {
    let mut parts = read_parts(multipart).await?;
    let part = take_part(&mut parts, "image")?;
    let resource = with_session(&state, &id, move |s| {
        let raster = import_part(&part)?.raster;
        let name = part.file_name.unwrap_or_else(|| "insert".into());
        let (width, height) = raster.dimensions();
        let hash = s.add_insert(name.clone(), raster);
        Ok(InsertResource { name, hash, width, height })
    })
    .await?;
    Ok((StatusCode::CREATED, Json(resource)))
}

pub async fn apply_op(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<OpRequest>, JsonRejection>,
) -> Result<Json<SessionResource>, ApiError> {
    let Json(request) = body?;
    with_session(&state, &id, move |s| {
        let action = request.into_action(s)?;
        s.apply(action)?;
        Ok(SessionResource::of(s))
    })
    .await
    .map(Json)
}

pub async fn undo(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionResource>, ApiError> {
    with_session(&state, &id, |s| {
        s.undo()?;
        Ok(SessionResource::of(s))
    })
    .await
    .map(Json)
}

pub async fn redo(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<SessionResource>, ApiError> {
    with_session(&state, &id, |s| {
        s.redo()?;
        Ok(SessionResource::of(s))
    })
    .await
    .map(Json)
}

pub async fn journal(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let text = with_session(&state, &id, |s| Ok(s.journal_text())).await?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], text).into_response())
}

#[derive(Debug, Deserialize)]
pub struct ImageQuery {
    /// Index into the session's recorded states; 0 is the source.
    pub state: Option<usize>,
}

pub async fn image(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<ImageQuery>,
) -> Result<Response, ApiError> {
    let (hash, png) = with_session(&state, &id, move |s| {
        let snapshot = match query.state {
            None => s.current_snapshot(),
            Some(n) => s.history().get(n).ok_or_else(|| {
                ApiError::new(
                    StatusCode::NOT_FOUND,
                    "StateOutOfRange",
                    format!("state {n} out of range 0..{}", s.history_len()),
                )
            })?,
        };
        let png = export_image(&snapshot.raster, ImageFormat::Png, DEFAULT_JPEG_QUALITY)?;
        Ok((snapshot.hash, png))
    })
    .await?;
    Ok((
        [
            (header::CONTENT_TYPE, ImageFormat::Png.mime_type().to_string()),
            (header::HeaderName::from_static("x-content-hash"), hash.to_hex()),
        ],
        png,
    )
        .into_response())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExportRequest {
    pub format: ImageFormat,
    pub quality: Option<u8>,
    pub file: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct ExportResponse {
    pub file: String,
    pub format: ImageFormat,
    pub mime_type: &'static str,
    /// Encoded image, base64.
    pub data: String,
    pub journal: String,
    pub session: SessionResource,
}

pub async fn export(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<ExportRequest>, JsonRejection>,
) -> Result<Json<ExportResponse>, ApiError> {
    let Json(request) = body?;
    with_session(&state, &id, move |s| {
        let file = request.file.unwrap_or_else(|| {
            let name = s.source_name();
            let stem = name.rsplit_once('.').map_or(name, |(stem, _)| stem);
            format!("{stem}-export.{}", request.format)
        });
        let quality = request.quality.unwrap_or(DEFAULT_JPEG_QUALITY);
        let bytes = s.export(file.clone(), request.format, quality)?;
        Ok(ExportResponse {
            file,
            format: request.format,
            mime_type: request.format.mime_type(),
            data: BASE64.encode(bytes),
            journal: s.journal_text(),
            session: SessionResource::of(s),
        })
    })
    .await
    .map(Json)
}

#[derive(Debug, Serialize)]
pub struct VerifyResponse {
    #[serde(flatten)]
    pub verification: Verification,
    /// Plain-text rendering of the verdict, replay report and diff.
    pub text: String,
}

/// Multipart fields: `source`, `journal`, `claimed`, and one `insert` per
/// image melded by the journal.
pub async fn verify_upload(multipart: Multipart) -> Result<Json<VerifyResponse>, ApiError> {
    let mut parts = read_parts(multipart).await?;
    let source = take_part(&mut parts, "source")?;
    let journal = take_part(&mut parts, "journal")?;
    let claimed = take_part(&mut parts, "claimed")?;
    let inserts: Vec<Part> = parts.into_iter().filter(|p| p.name == "insert").collect();
    let verification = tokio::task::spawn_blocking(move || -> Result<Verification, ApiError> {
        let text = std::str::from_utf8(&journal.bytes)
            .map_err(|_| ApiError::bad_request("journal is not UTF-8"))?;
        let journal = parse(text)?;
        let source = import_part(&source)?.raster;
        let claimed = import_part(&claimed)?.raster;
        let mut store: HashMap<ContentHash, Raster> = HashMap::new();
        for part in &inserts {
            let raster = import_part(part)?.raster;
            store.insert(imgjournal_core::content_hash(&raster), raster);
        }
        Ok(verify(&journal, &source, &claimed, &store)?)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string()))??;
    let text = verification.render();
    Ok(Json(VerifyResponse { verification, text }))
}
