//! Service configuration: the contest document plus optional platform
//! settings at the top level of the same file.

use std::path::{Path, PathBuf};

use contest_core::config::ConfigError;
use contest_core::syndication::{BackoffPolicy, Channel};
use contest_core::ContestConfig;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const ENV_STORE_PATH: &str = "CONTEST_STORE_PATH";
pub const ENV_LISTEN_ADDR: &str = "CONTEST_LISTEN_ADDR";
pub const DEFAULT_LISTEN_ADDR: &str = "127.0.0.1:8080";

#[derive(Debug, Error)]
pub enum ServiceConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}:{column}: {message}")]
    Syntax { path: PathBuf, line: usize, column: usize, message: String },
    #[error("{path}:{line}: {source}")]
    Invalid { path: PathBuf, line: usize, source: ConfigError },
    #[error("{path}: {message}")]
    Setting { path: PathBuf, message: String },
}

/// Login material for a juror or administrator. Digests are PHC strings as
/// printed by `contest hash-password`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StaffCredential {
    pub id: String,
    pub password_digest: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ServiceConfig {
    #[serde(flatten)]
    pub contest: ContestConfig,
    #[serde(default = "default_base_url")]
    pub platform_base_url: String,
    #[serde(default = "default_poll_interval")]
    pub poll_interval_secs: u64,
    #[serde(default = "default_drain_interval")]
    pub outbox_drain_interval_secs: u64,
    #[serde(default = "default_session_ttl")]
    pub session_ttl_secs: i64,
    #[serde(default = "default_failure_threshold")]
    pub failure_threshold: u32,
    /// Show the live leaderboard before the metrics freeze.
    #[serde(default)]
    pub leaderboard_during_contest: bool,
    #[serde(default)]
    pub backoff: BackoffPolicy,
    #[serde(default = "Channel::defaults")]
    pub channels: Vec<Channel>,
    #[serde(default)]
    pub jurors: Vec<StaffCredential>,
    #[serde(default)]
    pub admins: Vec<StaffCredential>,
    #[serde(default)]
    pub topic_catalog: Option<PathBuf>,
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    /// JSON-lines file receiving delivered outbox posts.
    #[serde(default)]
    pub outbox_sink: Option<PathBuf>,
    /// Simulator fixture used as metrics provider instead of the inert live
    /// platform stubs. Virtual time 0 is `submission_open`.
    #[serde(default)]
    pub metrics_fixture: Option<PathBuf>,
    #[serde(default)]
    pub store_path: Option<PathBuf>,
    #[serde(default)]
    pub listen_addr: Option<String>,
}

fn default_base_url() -> String {
    "http://localhost:8080".into()
}

fn default_poll_interval() -> u64 {
    3600
}

fn default_drain_interval() -> u64 {
    30
}

fn default_session_ttl() -> i64 {
    12 * 3600
}

fn default_failure_threshold() -> u32 {
    contest_core::metrics::DEFAULT_FAILURE_THRESHOLD
}

impl ServiceConfig {
    pub fn new(contest: ContestConfig) -> Self {
        ServiceConfig {
            contest,
            platform_base_url: default_base_url(),
            poll_interval_secs: default_poll_interval(),
            outbox_drain_interval_secs: default_drain_interval(),
            session_ttl_secs: default_session_ttl(),
            failure_threshold: default_failure_threshold(),
            leaderboard_during_contest: false,
            backoff: BackoffPolicy::default(),
            channels: Channel::defaults(),
            jurors: Vec::new(),
            admins: Vec::new(),
            topic_catalog: None,
            templates_dir: None,
            outbox_sink: None,
            metrics_fixture: None,
            store_path: None,
            listen_addr: None,
        }
    }

    /// Parses and validates; `path` is only used in diagnostics and to
    /// resolve relative file settings.
    pub fn parse(text: &str, path: &Path) -> Result<Self, ServiceConfigError> {
        let mut config: ServiceConfig = serde_json::from_str(text).map_err(|e| ServiceConfigError::Syntax {
            path: path.to_path_buf(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        config.contest.validate().map_err(|source| ServiceConfigError::Invalid {
            path: path.to_path_buf(),
            line: offending_line(text, &source),
            source,
        })?;
        let setting = |message: &str| ServiceConfigError::Setting { path: path.to_path_buf(), message: message.into() };
        if config.poll_interval_secs == 0 || config.outbox_drain_interval_secs == 0 {
            return Err(setting("poll and drain intervals must be positive"));
        }
        if config.session_ttl_secs <= 0 {
            return Err(setting("session_ttl_secs must be positive"));
        }
        if config.backoff.base_secs <= 0 || config.backoff.cap_secs < config.backoff.base_secs {
            return Err(setting("backoff needs 0 < base_secs <= cap_secs"));
        }
        if config.channels.is_empty() {
            return Err(setting("at least one syndication channel is required"));
        }
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut config.topic_catalog,
            &mut config.templates_dir,
            &mut config.outbox_sink,
            &mut config.metrics_fixture,
            &mut config.store_path,
        ]
        .into_iter()
        .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ServiceConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ServiceConfigError::Io { path: path.to_path_buf(), source })?;
        Self::parse(&text, path)
    }

    /// Applies `CONTEST_STORE_PATH` and `CONTEST_LISTEN_ADDR`.
    pub fn apply_env(&mut self) {
        if let Ok(p) = std::env::var(ENV_STORE_PATH) {
            if !p.is_empty() {
                self.store_path = Some(PathBuf::from(p));
            }
        }
        if let Ok(a) = std::env::var(ENV_LISTEN_ADDR) {
            if !a.is_empty() {
                self.listen_addr = Some(a);
            }
        }
    }

    pub fn listen_addr(&self) -> &str {
        self.listen_addr.as_deref().unwrap_or(DEFAULT_LISTEN_ADDR)
    }
}

/// Line of the top-level key a semantic error refers to, or 1.
fn offending_line(text: &str, error: &ConfigError) -> usize {
    let key = match error {
        ConfigError::Parse(_) => return 1,
        ConfigError::WindowOrder => "submission_close",
        ConfigError::NoAgeGroups
        | ConfigError::InvertedAgeGroup(_)
        | ConfigError::DuplicateAgeGroup(_)
        | ConfigError::OverlappingAgeGroups(..)
        | ConfigError::AgeGap(..) => "age_groups",
        ConfigError::NoMediaTypes | ConfigError::EmptyMediaType | ConfigError::DuplicateMediaType(_) => "media_types",
        ConfigError::BadCountryCode(_) => "eligible_countries",
        ConfigError::NegativeWeight(_) => "score_weights",
        ConfigError::NonPositiveLimit => "jury_scale_max",
        ConfigError::BadHashtag => "required_hashtag",
        _ => "jury_criteria",
    };
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map_or(1, |i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = include_str!("../../core/data/default_config.json");

    #[test]
    fn plain_contest_document_is_a_service_config() {
        let c = ServiceConfig::parse(BASE, Path::new("/etc/contest/config.json")).unwrap();
        assert_eq!(c.contest, ContestConfig::default());
        assert_eq!(c.poll_interval_secs, 3600);
        assert_eq!(c.channels.len(), 2);
    }

    #[test]
    fn overlapping_groups_fail_with_line_and_names() {
        let text = BASE.replace("\"min_age\": 15", "\"min_age\": 14");
        let err = ServiceConfig::parse(&text, Path::new("c.json")).unwrap_err();
        let msg = err.to_string();
        let line = BASE.lines().position(|l| l.contains("\"age_groups\"")).unwrap() + 1;
        assert!(msg.starts_with(&format!("c.json:{line}:")), "{msg}");
        assert!(msg.contains("AG1") && msg.contains("AG2"), "{msg}");
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = ServiceConfig::parse("{\n  \"submission_open\": ,\n}", Path::new("c.json")).unwrap_err();
        assert!(matches!(err, ServiceConfigError::Syntax { line: 2, .. }), "{err}");
    }

    #[test]
    fn relative_paths_resolve_against_the_config_directory() {
        let text = BASE.replacen('{', "{\"store_path\": \"state.json\", \"outbox_sink\": \"/var/out.jsonl\",", 1);
        let c = ServiceConfig::parse(&text, Path::new("/srv/contest/config.json")).unwrap();
        assert_eq!(c.store_path, Some(PathBuf::from("/srv/contest/state.json")));
        assert_eq!(c.outbox_sink, Some(PathBuf::from("/var/out.jsonl")));
    }
}
