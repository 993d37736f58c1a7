#![allow(dead_code)]

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use chrono::{DateTime, Duration, Utc};
use contest_core::credentials::{Argon2Hasher, CredentialHasher};
use contest_core::syndication::TemplateSet;
use contest_core::{ContestConfig, TopicCatalog};
use contest_server::api;
use contest_server::clock::ManualClock;
use contest_server::config::{ServiceConfig, StaffCredential};
use contest_server::service::Service;
use contest_server::store::{MemoryStore, Store};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

pub const ADMIN_PASSWORD: &str = "admin password";
pub const JUROR_PASSWORD: &str = "juror password";
pub const PARTICIPANT_PASSWORD: &str = "participant password";

pub struct Harness {
    pub service: Arc<Service>,
    pub clock: Arc<ManualClock>,
    pub router: Router,
}

pub fn config() -> ServiceConfig {
    let hasher = Argon2Hasher::low_cost();
    let mut config = ServiceConfig::new(ContestConfig::default());
    config.admins = vec![StaffCredential { id: "admin".into(), password_digest: hasher.digest(ADMIN_PASSWORD) }];
    config.jurors = ["juror-a", "juror-b"]
        .into_iter()
        .map(|id| StaffCredential { id: id.into(), password_digest: hasher.digest(JUROR_PASSWORD) })
        .collect();
    config
}

/// One day into the submission window.
pub fn opening_day(config: &ServiceConfig) -> DateTime<Utc> {
    config.contest.submission_open + Duration::days(1)
}

pub fn harness() -> Harness {
    harness_with(config(), Arc::new(MemoryStore::new()))
}

pub fn harness_with(config: ServiceConfig, store: Arc<dyn Store>) -> Harness {
    let clock = Arc::new(ManualClock::new(opening_day(&config)));
    let service = Arc::new(
        Service::new(
            config,
            TopicCatalog::default_catalog(),
            TemplateSet::builtin(),
            store,
            clock.clone(),
            Arc::new(Argon2Hasher::low_cost()),
        )
        .unwrap(),
    );
    let router = api::router(service.clone());
    Harness { service, clock, router }
}

pub struct Reply {
    pub status: StatusCode,
    pub body: Value,
    pub text: String,
}

impl Harness {
    pub async fn call(&self, method: Method, uri: &str, token: Option<&str>, body: Option<Value>) -> Reply {
        let mut req = Request::builder().method(method).uri(uri);
        if let Some(t) = token {
            req = req.header("authorization", format!("Bearer {t}"));
        }
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self.router.clone().oneshot(req.body(body).unwrap()).await.unwrap();
        let status = resp.status();
        let bytes = resp.into_body().collect().await.unwrap().to_bytes();
        let text = String::from_utf8(bytes.to_vec()).unwrap();
        let body = serde_json::from_str(&text).unwrap_or(Value::Null);
        Reply { status, body, text }
    }

    pub async fn login(&self, role: &str, login: &str, password: &str) -> String {
        let r = self
            .call(Method::POST, "/sessions", None, Some(json!({ "role": role, "login": login, "password": password })))
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
        r.body["token"].as_str().unwrap().to_string()
    }

    pub async fn admin(&self) -> String {
        self.login("admin", "admin", ADMIN_PASSWORD).await
    }

    /// Registers, completes an eligible profile in `country` and returns
    /// the session token.
    pub async fn participant(&self, email: &str, country: &str) -> String {
        let r = self
            .call(
                Method::POST,
                "/accounts",
                None,
                Some(json!({ "first_name": "Test", "last_name": "Person", "email": email, "password": PARTICIPANT_PASSWORD })),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
        let token = self.login("participant", email, PARTICIPANT_PASSWORD).await;
        let r = self
            .call(
                Method::PUT,
                "/profile",
                Some(&token),
                Some(json!({ "birth_date": "2004-05-05", "country_of_residence": country, "participation_mode": "individual" })),
            )
            .await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text);
        assert_eq!(r.body["eligible"], json!(true));
        token
    }

    /// Creates and finalizes one entry; returns its id.
    pub async fn submit(&self, token: &str, media_type: &str, video_id: &str) -> String {
        let r = self
            .call(
                Method::POST,
                "/submissions",
                Some(token),
                Some(json!({
                    "title": format!("Entry {video_id}"),
                    "description": "about science",
                    "topic_id": "AG1_03",
                    "media_type_id": media_type,
                    "media_url": format!("https://youtu.be/{video_id}"),
                })),
            )
            .await;
        assert_eq!(r.status, StatusCode::CREATED, "{}", r.text);
        let id = r.body["submission_id"].as_str().unwrap().to_string();
        let r = self
            .call(Method::POST, &format!("/submissions/{id}/finalize"), Some(token), Some(json!({ "hashtag_attested": true })))
            .await;
        assert_eq!(r.status, StatusCode::OK, "{}", r.text);
        id
    }
}

pub fn assert_error(r: &Reply, status: u16, code: &str) {
    assert_eq!(r.status.as_u16(), status, "{}", r.text);
    assert_eq!(r.body["code"], json!(code), "{}", r.text);
    assert!(r.body["message"].is_string(), "{}", r.text);
    assert!(r.body.as_object().unwrap().contains_key("details"), "{}", r.text);
}
