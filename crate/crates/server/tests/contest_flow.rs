mod support;

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Arc;

use axum::http::{Method, StatusCode};
use chrono::{DateTime, Duration, Utc};
use contest_core::credentials::Argon2Hasher;
use contest_core::metrics::{Counts, MetricsProvider, Unavailable};
use contest_core::syndication::{DeliveryAdapter, OutboxPost, PostState, TemplateSet};
use contest_core::{MediaLink, TopicCatalog};
use contest_server::clock::ManualClock;
use contest_server::service::Service;
use contest_server::state::{ContestPhase, ContestState};
use contest_server::store::{FileStore, MemoryStore, Store, StoreError};
use serde_json::json;
use support::*;

/// Three AG1 entries from two countries, frozen and in the jury phase.
async fn jury_ready(h: &Harness) -> Vec<String> {
    let mut ids = Vec::new();
    for (i, (country, media)) in [("AT", "video"), ("AT", "poster"), ("BE", "video")].into_iter().enumerate() {
        let token = h.participant(&format!("p{i}@school.example"), country).await;
        ids.push(h.submit(&token, media, &format!("v{i}")).await);
    }
    let contest = h.service.config().contest.clone();
    h.clock.set(contest.metrics_freeze);
    let admin = h.admin().await;
    for target in ["FROZEN", "JURY"] {
        let r = h.call(Method::POST, "/phase", Some(&admin), Some(json!({ "target": target }))).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    }
    ids
}

fn ag1(v: i64) -> serde_json::Value {
    json!({ "scores": { "problem_presentation": v, "creativity": v, "added_value": v, "future_thinking": v } })
}

#[tokio::test]
async fn jury_round_through_the_api() {
    let h = harness();
    let ids = jury_ready(&h).await;
    let juror = h.login("juror", "juror-a", JUROR_PASSWORD).await;
    let admin = h.admin().await;

    let view = h.call(Method::GET, "/jury/shortlist", Some(&juror), None).await;
    assert_eq!(view.status, StatusCode::OK, "{}", view.text);
    assert_eq!(view.body["scale_max"], json!(10));
    assert_eq!(view.body["matrix"]["AG1"].as_array().unwrap().len(), 4);
    assert_eq!(view.body["matrix"]["AG2"].as_array().unwrap().len(), 5);
    let entries = view.body["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 3);
    assert!(entries.iter().all(|e| e["criteria"].as_array().unwrap().len() == 4 && e["my_scores"].is_null()));

    let r = h.call(Method::POST, "/phase", Some(&admin), Some(json!({ "target": "COMPLETE" }))).await;
    assert_error(&r, 409, "PRECONDITION_FAILED");
    assert_eq!(r.body["details"]["unscored"].as_array().unwrap().len(), 3);

    let mut five = ag1(5);
    five["scores"]["scientific_approach"] = json!(5);
    let r = h.call(Method::PUT, &format!("/jury/scores/{}", ids[0]), Some(&juror), Some(five)).await;
    assert_error(&r, 422, "CRITERIA_MISMATCH");
    let r = h.call(Method::PUT, &format!("/jury/scores/{}", ids[0]), Some(&juror), Some(ag1(11))).await;
    assert_error(&r, 422, "SCORE_OUT_OF_RANGE");
    assert_eq!(r.body["details"]["max"], json!(10));

    for (id, v) in ids.iter().zip([9, 4, 7]) {
        let r = h.call(Method::PUT, &format!("/jury/scores/{id}"), Some(&juror), Some(ag1(v))).await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text);
    }
    let view = h.call(Method::GET, "/jury/shortlist", Some(&juror), None).await;
    assert_eq!(view.body["scored_by_me"], json!(3));

    let done = h.call(Method::POST, "/phase", Some(&admin), Some(json!({ "target": "COMPLETE" }))).await;
    assert_eq!(done.status, StatusCode::OK, "{}", done.text);
    assert_eq!(done.body["winner_count"], json!(2));
    let r = h.call(Method::PUT, &format!("/jury/scores/{}", ids[0]), Some(&juror), Some(ag1(1))).await;
    assert_error(&r, 409, "WRONG_PHASE");

    let winners = h.call(Method::GET, "/winners", None, None).await;
    let by_cat: Vec<(String, String)> = winners.body["winners"]
        .as_array()
        .unwrap()
        .iter()
        .map(|w| (w["category_id"].as_str().unwrap().into(), w["submission_id"].as_str().unwrap().into()))
        .collect();
    assert_eq!(by_cat, vec![("AG1-poster".into(), ids[1].clone()), ("AG1-video".into(), ids[0].clone())]);

    let r = h.call(Method::POST, "/audience-award", Some(&admin), Some(json!({ "submission_id": ids[2] }))).await;
    assert_error(&r, 422, "NOT_A_WINNER");
    for pick in [&ids[0], &ids[1]] {
        let r = h.call(Method::POST, "/audience-award", Some(&admin), Some(json!({ "submission_id": pick }))).await;
        assert_eq!(r.status, StatusCode::OK);
    }
    let csv = h.call(Method::GET, "/export/winners", Some(&admin), None).await;
    assert_eq!(csv.text.lines().count(), 3);
    assert!(csv.text.contains(&format!("AG1-poster,{},", ids[1])));
    assert_eq!(h.service.snapshot_state().winners.unwrap().audience_award_log.len(), 2);

    let outbox = h.service.snapshot_state().outbox;
    for kind in ["shortlist_published", "winners_announced"] {
        assert_eq!(outbox.posts().iter().filter(|p| p.post_id.starts_with(kind)).count(), 2);
    }
    assert!(outbox.posts().iter().all(|p| p.body.contains("#SciChallenge2017")));
}

#[tokio::test]
async fn jury_endpoints_wait_for_the_shortlist() {
    let h = harness();
    let juror = h.login("juror", "juror-b", JUROR_PASSWORD).await;
    let r = h.call(Method::GET, "/jury/shortlist", Some(&juror), None).await;
    assert_error(&r, 409, "PHASE_TOO_EARLY");
    let r = h.call(Method::PUT, "/jury/scores/sub-000001", Some(&juror), Some(ag1(5))).await;
    assert_error(&r, 409, "WRONG_PHASE");
}

#[tokio::test]
async fn file_store_survives_a_restart() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("contest.json");
    let id;
    {
        let h = harness_with(config(), Arc::new(FileStore::open(&path).unwrap()));
        let token = h.participant("p@school.example", "AT").await;
        id = h.submit(&token, "video", "v1").await;
    }
    let h = harness_with(config(), Arc::new(FileStore::open(&path).unwrap()));
    let r = h.call(Method::GET, &format!("/submissions/{id}"), None, None).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.body["state"], json!("SUBMITTED"));
    let token = h.login("participant", "p@school.example", PARTICIPANT_PASSWORD).await;
    let r = h.call(Method::GET, "/submissions", Some(&token), None).await;
    assert_eq!(r.body.as_array().unwrap().len(), 1);
    assert_eq!(h.service.phase().unwrap(), ContestPhase::Open);
}

#[test]
fn unreachable_store_fails_at_startup() {
    let mut config = config();
    config.store_path = Some("/nonexistent-contest-dir/state.json".into());
    let clock = Arc::new(ManualClock::new(Utc::now()));
    let err = Service::from_config(config, clock, Arc::new(Argon2Hasher::low_cost())).err().unwrap();
    assert!(err.contains("not reachable"), "{err}");
}

#[test]
fn missing_templates_fail_at_startup() {
    let mut templates = TemplateSet::new();
    templates.insert(contest_core::syndication::EventKind::SubmissionFinalized, "microblog", "{title} {link} {hashtag}");
    let err = Service::new(
        config(),
        TopicCatalog::default_catalog(),
        templates,
        Arc::new(MemoryStore::new()),
        Arc::new(ManualClock::new(Utc::now())),
        Arc::new(Argon2Hasher::low_cost()),
    )
    .err()
    .unwrap();
    assert_eq!(err.code(), "NO_TEMPLATE");
}

/// Accepts writes until told to fail.
#[derive(Default)]
struct FlakyStore {
    inner: MemoryStore,
    broken: AtomicBool,
}

impl Store for FlakyStore {
    fn load(&self) -> Result<Option<ContestState>, StoreError> {
        self.inner.load()
    }

    fn save(&self, state: &ContestState) -> Result<(), StoreError> {
        if self.broken.load(Ordering::SeqCst) {
            return Err(StoreError::Write("disk full".into()));
        }
        self.inner.save(state)
    }

    fn describe(&self) -> String {
        "flaky".into()
    }
}

#[tokio::test]
async fn failed_writes_leave_no_partial_state() {
    let store = Arc::new(FlakyStore::default());
    let h = harness_with(config(), store.clone());
    let token = h.participant("p@school.example", "AT").await;
    let before = h.service.snapshot_state();
    store.broken.store(true, Ordering::SeqCst);
    let r = h
        .call(
            Method::POST,
            "/submissions",
            Some(&token),
            Some(json!({ "title": "t", "topic_id": "AG1_01", "media_type_id": "video", "media_url": "https://youtu.be/zz" })),
        )
        .await;
    assert_error(&r, 500, "STORE_ERROR");
    assert_eq!(h.service.snapshot_state(), before);
    store.broken.store(false, Ordering::SeqCst);
    let id = h.submit(&token, "video", "zz").await;
    assert_eq!(id, "sub-000001");
}

/// Fixed counters per external id; links listed in `down` are unavailable.
struct TableProvider {
    down: Vec<&'static str>,
}

impl MetricsProvider for TableProvider {
    fn provider_id(&self) -> &str {
        "table"
    }

    fn fetch(&self, link: &MediaLink, at: DateTime<Utc>) -> Result<Counts, Unavailable> {
        if self.down.contains(&link.external_id.as_str()) {
            return Err(Unavailable("down".into()));
        }
        let day = at.timestamp() / 86_400 % 1000;
        Ok(Counts::new(day as u64, 1, 0))
    }
}

#[tokio::test]
async fn polling_records_samples_and_flags_dead_links() {
    let h = harness();
    let token = h.participant("a@school.example", "AT").await;
    let alive = h.submit(&token, "video", "alive").await;
    let token = h.participant("b@school.example", "BE").await;
    let dead = h.submit(&token, "video", "dead").await;
    let provider = TableProvider { down: vec!["dead"] };
    let threshold = h.service.config().failure_threshold;
    for _ in 0..threshold {
        h.clock.advance(Duration::hours(1));
        h.service.poll_once(&provider).unwrap();
    }
    let state = h.service.snapshot_state();
    assert_eq!(state.history.series(&alive.as_str().into()).len(), threshold as usize);
    assert!(state.history.series(&dead.as_str().into()).is_empty());
    assert!(state.tracker.is_flagged(&dead.as_str().into()));
    assert!(!state.tracker.is_flagged(&alive.as_str().into()));
}

/// Fails the first `failures` deliveries.
struct Unreliable {
    failures: usize,
    seen: AtomicUsize,
}

impl DeliveryAdapter for Unreliable {
    fn deliver(&self, _: &OutboxPost) -> Result<(), String> {
        if self.seen.fetch_add(1, Ordering::SeqCst) < self.failures {
            Err("channel timeout".into())
        } else {
            Ok(())
        }
    }
}

#[tokio::test]
async fn outbox_retries_with_backoff() {
    let h = harness();
    let token = h.participant("a@school.example", "AT").await;
    h.submit(&token, "video", "v1").await;
    let adapter = Unreliable { failures: 2, seen: AtomicUsize::new(0) };

    let report = h.service.drain_outbox(&adapter, 10, "test").unwrap();
    assert_eq!((report.delivered(), report.failed()), (0, 2));
    assert_eq!(h.service.drain_outbox(&adapter, 10, "test").unwrap().outcomes.len(), 0);

    h.clock.advance(Duration::seconds(h.service.config().backoff.base_secs));
    let report = h.service.drain_outbox(&adapter, 10, "test").unwrap();
    assert_eq!(report.delivered(), 2);
    let outbox = h.service.snapshot_state().outbox;
    assert!(outbox.posts().iter().all(|p| p.state == PostState::Delivered && p.attempts == 2));

    let admin = h.admin().await;
    let r = h
        .call(Method::POST, "/announcements", Some(&admin), Some(json!({ "title": "New topic sheets", "link": "http://localhost:8080/topics" })))
        .await;
    assert_eq!(r.status, StatusCode::CREATED);
    assert_eq!(r.body.as_array().unwrap().len(), 2);
}
