//! HTTP API for running annotation campaigns.
//!
//! | Method | Path | |
//! |---|---|---|
//! | GET | `/tasks/next?annotator=ID` | next unfinished task for an annotator |
//! | POST | `/annotations` | submit answers for a task |
//! | GET | `/progress` | completion counts |
//! | GET | `/export` | the annotation log as JSON lines, by sequence number |
//! | POST | `/campaigns` | upload a plan (JSON lines) |
//!
//! Task assignment is static. A task counts as done once the log holds an
//! annotation by its annotator for the same review and system (facet) or
//! the same review and unordered system pair (pairwise), so progress
//! survives restarts over the same log. Envelopes never carry system ids.

mod error;
mod state;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use mslr_eval::campaign::{CampaignError, CampaignPlan};
use mslr_eval::corpus::{AnnotationLog, LogError};
use mslr_eval::humaneval::{
    Agreement, Annotation, Effect, FacetAnnotation, Fluency, PairwiseAnnotation, Preference, Question, Strength,
    FACET_QUESTIONS, PAIRWISE_QUESTION,
};
use mslr_eval::Corpus;

pub use error::ApiError;
pub use state::AppState;
use state::{Campaign, Completed, Shared, Slot};

impl AppState {
    /// Builds the state. A plan, if given, must resolve against `corpus`.
    pub fn new(
        corpus: Corpus,
        log: AnnotationLog,
        plan: Option<CampaignPlan>,
        plan_path: Option<PathBuf>,
    ) -> Result<Self, CampaignError> {
        if let Some(p) = &plan {
            p.check_against(&corpus)?;
        }
        Ok(Self {
            shared: Arc::new(Shared {
                corpus,
                log,
                campaign: RwLock::new(plan.map(|p| Arc::new(Campaign::new(p)))),
                plan_path,
                writer: Mutex::new(()),
            }),
        })
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/tasks/next", get(next_task))
        .route("/annotations", post(submit))
        .route("/progress", get(progress))
        .route("/export", get(export))
        .route("/campaigns", post(upload_campaign))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

#[derive(Debug, Serialize)]
pub struct TaskEnvelope<'a> {
    pub task_id: &'a str,
    pub kind: &'static str,
    pub payload: Payload<'a>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Payload<'a> {
    Facet {
        target: &'a str,
        generated: &'a str,
        questions: &'static [Question],
    },
    Pairwise {
        target: &'a str,
        summary_a: &'a str,
        summary_b: &'a str,
        question: &'static Question,
    },
}

fn no_campaign() -> ApiError {
    ApiError::conflict("no_campaign", "no campaign plan is loaded")
}

fn envelope<'a>(c: &'a Campaign, corpus: &'a Corpus, slot: Slot) -> TaskEnvelope<'a> {
    let text = |s: &str, r: &str| corpus.summary(s, r).map(|g| g.summary.as_str()).unwrap_or_default();
    let target = |r: &str| corpus.review(r).map(|x| x.target.as_str()).unwrap_or_default();
    match slot {
        Slot::Facet(i) => {
            let t = c.facet(i);
            TaskEnvelope {
                task_id: &t.task_id,
                kind: "facet",
                payload: Payload::Facet {
                    target: target(&t.review_id),
                    generated: text(&t.system_id, &t.review_id),
                    questions: &FACET_QUESTIONS,
                },
            }
        }
        Slot::Pairwise(i) => {
            let t = c.pairwise(i);
            TaskEnvelope {
                task_id: &t.task_id,
                kind: "pairwise",
                payload: Payload::Pairwise {
                    target: target(&t.review_id),
                    summary_a: text(&t.system_a, &t.review_id),
                    summary_b: text(&t.system_b, &t.review_id),
                    question: &PAIRWISE_QUESTION,
                },
            }
        }
    }
}

async fn next_task(
    State(state): State<AppState>,
    Query(q): Query<HashMap<String, String>>,
) -> Result<Json<Value>, ApiError> {
    let annotator = q
        .get("annotator")
        .filter(|a| !a.is_empty())
        .ok_or_else(|| ApiError::bad_request("missing_parameter", "query parameter `annotator` is required"))?;
    let campaign = state.campaign().ok_or_else(no_campaign)?;
    let slots = campaign
        .by_annotator
        .get(annotator)
        .ok_or_else(|| ApiError::not_found("unknown_annotator", format!("no tasks are assigned to {annotator:?}")))?;
    let done = state.completed();
    let mut open = slots.iter().filter(|s| !campaign.is_done(**s, &done));
    let first = open.next().copied();
    let remaining = first.map_or(0, |_| 1 + open.count());
    let task = first.map(|s| envelope(&campaign, &state.shared.corpus, s));
    Ok(Json(json!({"task": task, "remaining": remaining})))
}

#[derive(Debug, Deserialize)]
struct Submission {
    annotation_id: String,
    annotator_id: String,
    task_id: String,
    answers: Value,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FacetAnswers {
    fluency: Fluency,
    population: Agreement,
    intervention: Agreement,
    outcome: Agreement,
    effect_target: Effect,
    effect_generated: Effect,
    strength_target: Strength,
    strength_generated: Strength,
    #[serde(default)]
    comment: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairwiseAnswers {
    preference: Preference,
    #[serde(default)]
    justification: Option<String>,
}

fn build_annotation(c: &Campaign, slot: Slot, sub: Submission) -> Result<Annotation, ApiError> {
    let schema = |e: serde_json::Error| ApiError::schema(e.to_string());
    Ok(match slot {
        Slot::Facet(i) => {
            let t = c.facet(i);
            let a: FacetAnswers = serde_json::from_value(sub.answers).map_err(schema)?;
            Annotation::Facet(FacetAnnotation {
                annotation_id: sub.annotation_id,
                annotator_id: sub.annotator_id,
                review_id: t.review_id.clone(),
                system_id: t.system_id.clone(),
                fluency: a.fluency,
                population: a.population,
                intervention: a.intervention,
                outcome: a.outcome,
                effect_target: a.effect_target,
                effect_generated: a.effect_generated,
                strength_target: a.strength_target,
                strength_generated: a.strength_generated,
                comment: a.comment,
            })
        }
        Slot::Pairwise(i) => {
            let t = c.pairwise(i);
            let a: PairwiseAnswers = serde_json::from_value(sub.answers).map_err(schema)?;
            Annotation::Pairwise(PairwiseAnnotation {
                annotation_id: sub.annotation_id,
                annotator_id: sub.annotator_id,
                review_id: t.review_id.clone(),
                system_a: t.system_a.clone(),
                system_b: t.system_b.clone(),
                preference: a.preference,
                justification: a.justification,
            })
        }
    })
}

fn log_error(e: LogError) -> ApiError {
    match e {
        LogError::Schema(e) => ApiError::schema(e.to_string()),
        LogError::IdConflict(id) => ApiError::conflict(
            "annotation_id_conflict",
            format!("annotation id {id:?} was already used for different content"),
        ),
        e @ (LogError::Corrupt { .. } | LogError::Storage(_)) => ApiError::internal(e.to_string()),
    }
}

fn submit_blocking(state: &AppState, body: &[u8]) -> Result<Response, ApiError> {
    let sub: Submission =
        serde_json::from_slice(body).map_err(|e| ApiError::bad_request("invalid_request", e.to_string()))?;
    let _guard = state.shared.writer.lock().unwrap_or_else(|e| e.into_inner());
    let campaign = state.campaign().ok_or_else(no_campaign)?;
    let slot = *campaign
        .by_id
        .get(&sub.task_id)
        .ok_or_else(|| ApiError::not_found("unknown_task", format!("no task {:?} in the campaign", sub.task_id)))?;
    if campaign.annotator_of(slot) != sub.annotator_id {
        return Err(ApiError::new(
            StatusCode::FORBIDDEN,
            "task_annotator_mismatch",
            format!("task {:?} is not assigned to {:?}", sub.task_id, sub.annotator_id),
        ));
    }
    let task_id = sub.task_id.clone();
    let known_id = state.shared.log.get(&sub.annotation_id).is_some();
    let annotation = build_annotation(&campaign, slot, sub)?;
    annotation.validate().map_err(|e| ApiError::schema(e.to_string()))?;
    if !known_id && campaign.is_done(slot, &state.completed()) {
        return Err(ApiError::conflict(
            "task_completed",
            format!("task {task_id:?} already has an annotation"),
        ));
    }
    let ack = state.shared.log.append(annotation).map_err(log_error)?;
    let status = if ack.duplicate {
        StatusCode::OK
    } else {
        StatusCode::CREATED
    };
    Ok((
        status,
        Json(
            json!({"annotation_id": ack.annotation_id, "seq": ack.seq, "duplicate": ack.duplicate, "task_id": task_id}),
        ),
    )
        .into_response())
}

async fn submit(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    tokio::task::spawn_blocking(move || submit_blocking(&state, &body))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}

#[derive(Debug, Default, Serialize)]
struct Counts {
    assigned: usize,
    completed: usize,
}

#[derive(Debug, Default, Serialize)]
struct SystemCounts {
    facet: usize,
    pairwise: usize,
}

async fn progress(State(state): State<AppState>) -> Json<Value> {
    let entries = state.shared.log.entries();
    let done = Completed::from_log(&entries);
    let mut by_kind: BTreeMap<&str, Counts> =
        BTreeMap::from([("facet", Counts::default()), ("pairwise", Counts::default())]);
    let mut by_annotator: BTreeMap<String, Counts> = BTreeMap::new();
    if let Some(c) = state.campaign() {
        for (annotator, slots) in &c.by_annotator {
            let counts = by_annotator.entry(annotator.clone()).or_default();
            for &slot in slots {
                let kind = match slot {
                    Slot::Facet(_) => "facet",
                    Slot::Pairwise(_) => "pairwise",
                };
                let finished = c.is_done(slot, &done);
                counts.assigned += 1;
                counts.completed += usize::from(finished);
                let k = by_kind.get_mut(kind).expect("both kinds present");
                k.assigned += 1;
                k.completed += usize::from(finished);
            }
        }
    }
    let mut logged: BTreeMap<&str, usize> = BTreeMap::from([("facet", 0), ("pairwise", 0)]);
    let mut by_system: BTreeMap<String, SystemCounts> = BTreeMap::new();
    for e in &entries {
        match &e.annotation {
            Annotation::Facet(a) => {
                *logged.get_mut("facet").expect("present") += 1;
                by_system.entry(a.system_id.clone()).or_default().facet += 1;
            }
            Annotation::Pairwise(a) => {
                *logged.get_mut("pairwise").expect("present") += 1;
                for s in [&a.system_a, &a.system_b] {
                    by_system.entry(s.clone()).or_default().pairwise += 1;
                }
            }
        }
    }
    Json(json!({
        "total": entries.len(),
        "logged": logged,
        "by_kind": by_kind,
        "by_annotator": by_annotator,
        "by_system": by_system,
    }))
}

async fn export(State(state): State<AppState>) -> Result<Response, ApiError> {
    let mut buf = Vec::new();
    state
        .shared
        .log
        .export(&mut buf)
        .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], buf).into_response())
}

fn persist_plan(path: &std::path::Path, plan: &CampaignPlan) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, plan.to_jsonl())?;
    std::fs::rename(tmp, path)
}

fn upload_blocking(state: &AppState, body: &[u8]) -> Result<Response, ApiError> {
    let text = std::str::from_utf8(body).map_err(|e| ApiError::bad_request("invalid_plan", e.to_string()))?;
    let plan = CampaignPlan::from_jsonl(text)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_plan", e.to_string()))?;
    plan.check_against(&state.shared.corpus)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_plan", e.to_string()))?;
    let _guard = state.shared.writer.lock().unwrap_or_else(|e| e.into_inner());
    let current = state.campaign();
    if current.as_ref().is_some_and(|c| c.plan == plan) {
        return Ok((StatusCode::OK, Json(plan_summary(&plan, false))).into_response());
    }
    if !state.shared.log.is_empty() {
        return Err(ApiError::conflict(
            "campaign_locked",
            "the log already holds annotations; the plan cannot be replaced",
        ));
    }
    if let Some(path) = &state.shared.plan_path {
        persist_plan(path, &plan).map_err(|e| ApiError::internal(e.to_string()))?;
    }
    let summary = plan_summary(&plan, true);
    *state.shared.campaign.write().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(Campaign::new(plan)));
    Ok((StatusCode::CREATED, Json(summary)).into_response())
}

fn plan_summary(plan: &CampaignPlan, replaced: bool) -> Value {
    json!({
        "facet_tasks": plan.facet_tasks.len(),
        "pairwise_tasks": plan.pairwise_tasks.len(),
        "replaced": replaced,
    })
}

async fn upload_campaign(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    tokio::task::spawn_blocking(move || upload_blocking(&state, &body))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
}
