use std::collections::{BTreeSet, HashMap};
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::StatusCode;
use axum::routing::{get, post, put};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use cuiwb_core::agreement::{agreement_report, AgreementReport};
use cuiwb_core::corpus::{Annotation, AnnotationStatus, Corpus, Document};
use cuiwb_core::eval_e2e::{corpus_report, E2EMode, E2EPrediction, E2EReport, MatchMode};
use cuiwb_core::eval_norm::{norm_report, NormEvalReport};
use cuiwb_core::formats::{parse_pred_tsv, parse_spans_tsv, resolve_gold_spans, system_id_for};
use cuiwb_core::suggestion::{suggest, SuggestionResult};
use cuiwb_core::vocabulary::SemanticTypeSource;
use cuiwb_core::Cui;
use serde::Deserialize;
use tower_http::cors::CorsLayer;

use crate::error::{ApiError, JsonBody};
use crate::AppState;

type AppResult<T> = Result<T, ApiError>;
type Shared = State<Arc<AppState>>;

pub const DEFAULT_K: usize = 10;
pub const MAX_K: usize = 100;
pub const DEFAULT_SEMTYPE_MIN: usize = 50;
const UPLOAD_LIMIT: usize = 64 * 1024 * 1024;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/suggest", get(suggest_handler))
        .route("/api/documents", get(list_documents).post(create_document))
        .route("/api/documents/{id}", get(get_document))
        .route("/api/documents/{id}/annotations", get(list_annotations).post(create_annotation))
        .route("/api/annotations/{id}", put(update_annotation).delete(delete_annotation))
        .route("/api/annotations/{id}/status", post(set_status))
        .route("/api/autotag/{doc_id}", post(autotag))
        .route("/api/agreement", get(agreement))
        .route("/api/eval/norm", post(eval_norm))
        .route("/api/eval/e2e", post(eval_e2e))
        .layer(DefaultBodyLimit::max(UPLOAD_LIMIT))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

async fn suggest_handler(State(state): Shared, Query(params): Query<HashMap<String, String>>) -> AppResult<Json<SuggestionResult>> {
    let q = params.get("q").ok_or_else(|| ApiError::bad_request("missing query parameter q"))?;
    let k = match params.get("k") {
        None => DEFAULT_K,
        Some(raw) => raw
            .parse::<usize>()
            .ok()
            .filter(|k| (1..=MAX_K).contains(k))
            .ok_or_else(|| ApiError::bad_request(format!("k must be an integer in 1..={MAX_K}, got {raw:?}")))?,
    };
    Ok(Json(suggest(&state.index, q, k)))
}

async fn list_documents(State(state): Shared) -> Json<Vec<Document>> {
    Json(state.store.documents())
}

async fn get_document(State(state): Shared, Path(id): Path<String>) -> AppResult<Json<Document>> {
    state
        .store
        .document(&id)
        .map(Json)
        .ok_or_else(|| ApiError::not_found(format!("unknown document {id:?}")))
}

async fn create_document(State(state): Shared, JsonBody(doc): JsonBody<Document>) -> AppResult<(StatusCode, Json<Document>)> {
    let doc = state.store.create_document(doc).await?;
    Ok((StatusCode::CREATED, Json(doc)))
}

async fn list_annotations(State(state): Shared, Path(id): Path<String>) -> AppResult<Json<Vec<Annotation>>> {
    Ok(Json(state.store.annotations(&id).await?))
}

/// Annotation payload: the stored shape with the server filling in what the
/// client may omit.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationInput {
    id: Option<String>,
    doc_id: Option<String>,
    start: usize,
    end: usize,
    #[serde(default)]
    cuis: BTreeSet<Cui>,
    #[serde(default)]
    cui_less: bool,
    annotator_id: String,
    status: Option<AnnotationStatus>,
    created_at: Option<DateTime<Utc>>,
}

fn check_doc_field(input: &AnnotationInput, doc_id: &str) -> AppResult<()> {
    match &input.doc_id {
        Some(d) if d != doc_id => Err(ApiError::bad_request(format!(
            "body doc_id {d:?} does not match document {doc_id:?}"
        ))),
        _ => Ok(()),
    }
}

async fn create_annotation(
    State(state): Shared,
    Path(doc_id): Path<String>,
    JsonBody(input): JsonBody<AnnotationInput>,
) -> AppResult<(StatusCode, Json<Annotation>)> {
    check_doc_field(&input, &doc_id)?;
    let ann = Annotation {
        id: input.id.unwrap_or_else(|| uuid::Uuid::new_v4().to_string()),
        doc_id,
        start: input.start,
        end: input.end,
        cuis: input.cuis,
        cui_less: input.cui_less,
        annotator_id: input.annotator_id,
        status: input.status.unwrap_or(AnnotationStatus::Accepted),
        created_at: input.created_at.unwrap_or_else(Utc::now),
    };
    match state.store.add_annotation(ann.clone()).await {
        Ok(stored) => Ok((StatusCode::CREATED, Json(stored))),
        Err(e) => Err(ApiError::from_store(e, Some(&ann))),
    }
}

async fn update_annotation(
    State(state): Shared,
    Path(id): Path<String>,
    JsonBody(input): JsonBody<AnnotationInput>,
) -> AppResult<Json<Annotation>> {
    if input.id.as_deref().is_some_and(|body_id| body_id != id) {
        return Err(ApiError::bad_request("body id does not match the path"));
    }
    let current = state.store.annotation(&id).await?;
    check_doc_field(&input, &current.doc_id)?;
    let ann = Annotation {
        id,
        doc_id: current.doc_id,
        start: input.start,
        end: input.end,
        cuis: input.cuis,
        cui_less: input.cui_less,
        annotator_id: input.annotator_id,
        status: input.status.unwrap_or(current.status),
        created_at: input.created_at.unwrap_or(current.created_at),
    };
    match state.store.update_annotation(ann.clone()).await {
        Ok(stored) => Ok(Json(stored)),
        Err(e) => Err(ApiError::from_store(e, Some(&ann))),
    }
}

async fn delete_annotation(State(state): Shared, Path(id): Path<String>) -> AppResult<Json<Annotation>> {
    Ok(Json(state.store.remove_annotation(&id).await?))
}

#[derive(Debug, Deserialize)]
struct StatusInput {
    status: AnnotationStatus,
}

async fn set_status(
    State(state): Shared,
    Path(id): Path<String>,
    JsonBody(input): JsonBody<StatusInput>,
) -> AppResult<Json<Annotation>> {
    Ok(Json(state.store.set_status(&id, input.status).await?))
}

async fn autotag(State(state): Shared, Path(doc_id): Path<String>) -> AppResult<Json<Vec<Annotation>>> {
    Ok(Json(state.store.autotag(&doc_id, &state.index, Utc::now()).await?))
}

async fn agreement(State(state): Shared, Query(params): Query<HashMap<String, String>>) -> AppResult<Json<AgreementReport>> {
    let who = |key: &str| {
        params
            .get(key)
            .ok_or_else(|| ApiError::bad_request(format!("missing query parameter {key}")))
    };
    let (a, b) = (who("a")?, who("b")?);
    let corpus = state.store.snapshot().await;
    agreement_report(&corpus, a, b)
        .map(Json)
        .map_err(ApiError::not_found)
}

/// Multipart parts: `train` and `gold` spans files, one or more `pred`
/// files (system id from the file name), optional `semtype_min`.
async fn eval_norm(State(state): Shared, mut form: Multipart) -> AppResult<Json<NormEvalReport>> {
    let (mut train, mut gold, mut preds, mut semtype_min) = (None, None, Vec::new(), DEFAULT_SEMTYPE_MIN);
    while let Some(field) = form.next_field().await.map_err(ApiError::bad_request)? {
        let name = field.name().unwrap_or_default().to_string();
        let file_name = field.file_name().map(str::to_string);
        let bytes = field.bytes().await.map_err(ApiError::bad_request)?;
        match name.as_str() {
            "train" => train = Some(bytes),
            "gold" => gold = Some(bytes),
            "pred" => {
                let id = file_name
                    .as_deref()
                    .map(system_id_for)
                    .unwrap_or_else(|| format!("system{}", preds.len() + 1));
                preds.push((id, bytes));
            }
            "semtype_min" => {
                semtype_min = std::str::from_utf8(&bytes)
                    .ok()
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| ApiError::bad_request("semtype_min must be a non-negative integer"))?;
            }
            other => return Err(ApiError::bad_request(format!("unexpected part {other:?}"))),
        }
    }
    let missing = |part: &str| ApiError::bad_request(format!("missing part {part:?}"));
    let (train, gold) = (train.ok_or_else(|| missing("train"))?, gold.ok_or_else(|| missing("gold"))?);
    if preds.is_empty() {
        return Err(missing("pred"));
    }
    let corpus = state.store.snapshot().await;
    let spans = |bytes: &[u8], name: &str| {
        parse_spans_tsv(bytes, name)
            .and_then(|records| resolve_gold_spans(records, Some(&corpus)))
            .map_err(ApiError::bad_request)
    };
    let train = spans(&train, "train")?;
    let gold = spans(&gold, "gold")?;
    let runs = preds
        .iter()
        .map(|(id, bytes)| parse_pred_tsv(&bytes[..], id).map_err(ApiError::bad_request))
        .collect::<AppResult<Vec<_>>>()?;
    norm_report(&train, &gold, &runs, Some(&state.index), semtype_min)
        .map(Json)
        .map_err(ApiError::bad_request)
}

/// End-to-end request: predictions scored against the store's accepted
/// annotations, optionally restricted to some annotators.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct E2EInput {
    #[serde(default = "default_mode")]
    mode: E2EMode,
    #[serde(default, rename = "match")]
    match_mode: MatchMode,
    #[serde(default)]
    annotators: Option<Vec<String>>,
    #[serde(default = "default_semtype_min")]
    semtype_min: usize,
    predictions: Vec<E2EPrediction>,
}

fn default_mode() -> E2EMode {
    E2EMode::Framework
}

fn default_semtype_min() -> usize {
    DEFAULT_SEMTYPE_MIN
}

fn select_annotators(corpus: Corpus, annotators: &[String]) -> AppResult<Corpus> {
    let known = corpus.annotators();
    if let Some(who) = annotators.iter().find(|a| !known.contains(a.as_str())) {
        return Err(ApiError::not_found(format!("annotator {who:?} has no annotations in this corpus")));
    }
    let kept = corpus
        .annotations()
        .iter()
        .filter(|a| annotators.contains(&a.annotator_id))
        .cloned()
        .collect();
    Ok(Corpus::from_parts(corpus.documents().to_vec(), kept).expect("subset of a valid corpus"))
}

async fn eval_e2e(State(state): Shared, JsonBody(input): JsonBody<E2EInput>) -> AppResult<Json<E2EReport>> {
    if let Some(p) = input.predictions.iter().find(|p| p.start >= p.end) {
        return Err(ApiError::bad_request(format!("empty prediction span [{}, {})", p.start, p.end)));
    }
    let mut corpus = state.store.snapshot().await;
    if let Some(who) = &input.annotators {
        corpus = select_annotators(corpus, who)?;
    }
    Ok(Json(corpus_report(
        &corpus,
        &input.predictions,
        input.mode,
        input.match_mode,
        Some(&state.index as &dyn SemanticTypeSource),
        input.semtype_min,
    )))
}
