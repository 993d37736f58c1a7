//! JSON-over-HTTP surface. Every error is returned as
//! `{"code", "message", "details"}` with a matching status.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::{Json, Router};
use contest_core::rating::Grouping;
use contest_core::submission::{DraftInput, Profile};
use contest_core::SubmissionId;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::ServiceError;
use crate::service::{ExportKind, Role, Service};
use crate::state::{ContestPhase, Principal};

type AppState = Arc<Service>;
type ApiResult = Result<Response, ServiceError>;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if self.status() >= 500 {
            tracing::error!(error = %self, "request failed");
        }
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self.envelope())).into_response()
    }
}

pub fn router(service: Arc<Service>) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/accounts", post(register))
        .route("/sessions", post(login))
        .route("/profile", put(put_profile))
        .route("/submissions", get(my_submissions).post(create_draft))
        .route("/submissions/{id}", get(get_submission).put(update_draft).delete(withdraw))
        .route("/submissions/{id}/finalize", post(finalize))
        .route("/submissions/{id}/widget", get(widget))
        .route("/topics", get(topics))
        .route("/stats", get(stats))
        .route("/leaderboard", get(leaderboard))
        .route("/winners", get(winners))
        .route("/phase", get(phase).post(advance_phase))
        .route("/jury/shortlist", get(jury_shortlist))
        .route("/jury/scores/{id}", put(record_score))
        .route("/export/{kind}", get(export))
        .route("/audience-award", post(audience_award))
        .route("/announcements", post(announce))
        .fallback(|| async { ServiceError::NotFound("route".into()) })
        .with_state(service)
}

/// Runs a synchronous service call off the async workers; password hashing
/// and store writes may block.
async fn blocking<T: Send + 'static>(
    service: &AppState,
    f: impl FnOnce(&Service) -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    let svc = service.clone();
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ServiceError::InvalidRequest(format!("request aborted: {e}")))?
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::InvalidRequest(format!("malformed request body: {e}")))
}

fn ok<T: Serialize>(value: T) -> ApiResult {
    Ok(Json(value).into_response())
}

fn created<T: Serialize>(value: T) -> ApiResult {
    Ok((StatusCode::CREATED, Json(value)).into_response())
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    let value = headers.get(header::AUTHORIZATION)?.to_str().ok()?;
    let (scheme, token) = value.split_once(' ')?;
    scheme.eq_ignore_ascii_case("bearer").then(|| token.trim())
}

fn principal(service: &Service, headers: &HeaderMap) -> Result<Principal, ServiceError> {
    service.authorize(bearer(headers).ok_or(ServiceError::Unauthenticated)?)
}

fn optional_principal(service: &Service, headers: &HeaderMap) -> Result<Option<Principal>, ServiceError> {
    bearer(headers).map(|t| service.authorize(t)).transpose()
}

fn participant(service: &Service, headers: &HeaderMap) -> Result<contest_core::AccountId, ServiceError> {
    match principal(service, headers)? {
        Principal::Participant(id) => Ok(id),
        _ => Err(ServiceError::Forbidden { required: "participant" }),
    }
}

fn juror(service: &Service, headers: &HeaderMap) -> Result<contest_core::JurorId, ServiceError> {
    match principal(service, headers)? {
        Principal::Juror(id) => Ok(id),
        _ => Err(ServiceError::Forbidden { required: "juror" }),
    }
}

fn admin(service: &Service, headers: &HeaderMap) -> Result<String, ServiceError> {
    match principal(service, headers)? {
        Principal::Admin(id) => Ok(id),
        _ => Err(ServiceError::Forbidden { required: "admin" }),
    }
}

async fn health(State(svc): State<AppState>) -> ApiResult {
    ok(svc.health()?)
}

#[derive(Deserialize)]
struct RegisterBody {
    first_name: String,
    last_name: String,
    email: String,
    password: String,
}

async fn register(State(svc): State<AppState>, body: Bytes) -> ApiResult {
    let b: RegisterBody = parse(&body)?;
    let id = blocking(&svc, move |s| s.register(&b.first_name, &b.last_name, &b.email, &b.password)).await?;
    created(json!({ "account_id": id }))
}

#[derive(Deserialize)]
struct LoginBody {
    role: Role,
    login: String,
    password: String,
}

async fn login(State(svc): State<AppState>, body: Bytes) -> ApiResult {
    let b: LoginBody = parse(&body)?;
    created(blocking(&svc, move |s| s.login(b.role, &b.login, &b.password)).await?)
}

async fn put_profile(State(svc): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let account = participant(&svc, &headers)?;
    let profile: Profile = parse(&body)?;
    ok(svc.put_profile(&account, profile)?)
}

async fn my_submissions(State(svc): State<AppState>, headers: HeaderMap) -> ApiResult {
    let account = participant(&svc, &headers)?;
    ok(svc.my_submissions(&account)?)
}

async fn create_draft(State(svc): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let account = participant(&svc, &headers)?;
    let input: DraftInput = parse(&body)?;
    created(svc.create_draft(&account, &input)?)
}

async fn update_draft(State(svc): State<AppState>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let account = participant(&svc, &headers)?;
    let input: DraftInput = parse(&body)?;
    ok(svc.update_draft(&account, &SubmissionId(id), &input)?)
}

#[derive(Deserialize)]
struct FinalizeBody {
    #[serde(default)]
    hashtag_attested: bool,
}

async fn finalize(State(svc): State<AppState>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let account = participant(&svc, &headers)?;
    let b: FinalizeBody = if body.is_empty() { FinalizeBody { hashtag_attested: false } } else { parse(&body)? };
    ok(svc.finalize(&account, &SubmissionId(id), b.hashtag_attested)?)
}

async fn withdraw(State(svc): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    let account = participant(&svc, &headers)?;
    ok(svc.withdraw(&account, &SubmissionId(id))?)
}

async fn get_submission(State(svc): State<AppState>, Path(id): Path<String>, headers: HeaderMap) -> ApiResult {
    let viewer = optional_principal(&svc, &headers)?;
    ok(svc.submission(&SubmissionId(id), viewer.as_ref())?)
}

async fn widget(State(svc): State<AppState>, Path(id): Path<String>) -> ApiResult {
    ok(svc.widget(&SubmissionId(id))?)
}

async fn topics(State(svc): State<AppState>) -> ApiResult {
    ok(svc.topics())
}

async fn stats(State(svc): State<AppState>) -> ApiResult {
    ok(svc.stats()?)
}

async fn leaderboard(State(svc): State<AppState>, Query(q): Query<BTreeMap<String, String>>) -> ApiResult {
    let grouping = match q.get("group_by").map(|s| s.to_ascii_lowercase()).as_deref() {
        None | Some("country") => Grouping::Country,
        Some("category") => Grouping::Category,
        Some(other) => {
            return Err(ServiceError::InvalidRequest(format!(
                "group_by must be country or category, not {other:?}"
            )))
        }
    };
    ok(svc.leaderboard(grouping)?)
}

async fn winners(State(svc): State<AppState>) -> ApiResult {
    ok(svc.winners()?)
}

async fn phase(State(svc): State<AppState>) -> ApiResult {
    ok(svc.phase_view()?)
}

#[derive(Deserialize)]
struct PhaseBody {
    target: String,
}

async fn advance_phase(State(svc): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let actor = admin(&svc, &headers)?;
    let b: PhaseBody = parse(&body)?;
    let target: ContestPhase = b.target.parse().map_err(ServiceError::InvalidRequest)?;
    ok(blocking(&svc, move |s| s.advance_phase(&actor, target)).await?)
}

async fn jury_shortlist(State(svc): State<AppState>, headers: HeaderMap) -> ApiResult {
    let id = juror(&svc, &headers)?;
    ok(svc.jury_shortlist(&id)?)
}

#[derive(Deserialize)]
struct ScoreBody {
    scores: BTreeMap<String, i64>,
}

async fn record_score(State(svc): State<AppState>, Path(id): Path<String>, headers: HeaderMap, body: Bytes) -> ApiResult {
    let juror_id = juror(&svc, &headers)?;
    let b: ScoreBody = parse(&body)?;
    ok(svc.record_score(&juror_id, &SubmissionId(id), b.scores)?)
}

async fn export(State(svc): State<AppState>, Path(kind): Path<String>, headers: HeaderMap) -> ApiResult {
    admin(&svc, &headers)?;
    let kind = ExportKind::parse(&kind).ok_or_else(|| ServiceError::NotFound(format!("export kind {kind:?}")))?;
    let e = blocking(&svc, move |s| s.export(kind)).await?;
    let disposition = format!("attachment; filename=\"{}\"", e.file_name);
    Ok(([(header::CONTENT_TYPE, e.content_type.to_string()), (header::CONTENT_DISPOSITION, disposition)], e.body)
        .into_response())
}

#[derive(Deserialize)]
struct AwardBody {
    submission_id: SubmissionId,
}

async fn audience_award(State(svc): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult {
    admin(&svc, &headers)?;
    let b: AwardBody = parse(&body)?;
    ok(svc.audience_award(&b.submission_id)?)
}

#[derive(Deserialize)]
struct AnnouncementBody {
    title: String,
    link: String,
}

async fn announce(State(svc): State<AppState>, headers: HeaderMap, body: Bytes) -> ApiResult {
    admin(&svc, &headers)?;
    let b: AnnouncementBody = parse(&body)?;
    if b.link.trim().is_empty() {
        return Err(ServiceError::InvalidRequest("announcement link is empty".into()));
    }
    created(svc.announce(&b.title, &b.link)?)
}
