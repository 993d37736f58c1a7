//! The persisted contest document and its lifecycle phases.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use contest_core::metrics::{FailureTracker, MetricsSnapshot, SampleHistory};
use contest_core::rating::{JuryBook, Shortlist, WinnerSet};
use contest_core::submission::SubmissionBook;
use contest_core::syndication::Outbox;
use contest_core::{AccountId, JurorId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ContestPhase {
    Setup,
    Open,
    Closed,
    Frozen,
    Jury,
    Complete,
}

impl ContestPhase {
    pub const ALL: [ContestPhase; 6] = [
        ContestPhase::Setup,
        ContestPhase::Open,
        ContestPhase::Closed,
        ContestPhase::Frozen,
        ContestPhase::Jury,
        ContestPhase::Complete,
    ];

    pub fn successor(self) -> Option<ContestPhase> {
        let i = Self::ALL.iter().position(|p| *p == self).expect("listed");
        Self::ALL.get(i + 1).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ContestPhase::Setup => "SETUP",
            ContestPhase::Open => "OPEN",
            ContestPhase::Closed => "CLOSED",
            ContestPhase::Frozen => "FROZEN",
            ContestPhase::Jury => "JURY",
            ContestPhase::Complete => "COMPLETE",
        }
    }
}

impl fmt::Display for ContestPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ContestPhase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown phase {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseRecord {
    pub phase: ContestPhase,
    pub at: DateTime<Utc>,
    pub actor: String,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "role", content = "id", rename_all = "lowercase")]
pub enum Principal {
    Participant(AccountId),
    Juror(JurorId),
    Admin(String),
}

impl Principal {
    pub fn role(&self) -> &'static str {
        match self {
            Principal::Participant(_) => "participant",
            Principal::Juror(_) => "juror",
            Principal::Admin(_) => "admin",
        }
    }

    pub fn subject(&self) -> &str {
        match self {
            Principal::Participant(id) => id.as_str(),
            Principal::Juror(id) => id.as_str(),
            Principal::Admin(id) => id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub principal: Principal,
    pub expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestState {
    pub phase: ContestPhase,
    pub phase_log: Vec<PhaseRecord>,
    pub book: SubmissionBook,
    pub history: SampleHistory,
    pub tracker: FailureTracker,
    pub snapshot: Option<MetricsSnapshot>,
    pub shortlist: Option<Shortlist>,
    pub jury: JuryBook,
    pub winners: Option<WinnerSet>,
    pub outbox: Outbox,
    /// Keyed by bearer token.
    pub sessions: BTreeMap<String, Session>,
}

impl Default for ContestState {
    fn default() -> Self {
        ContestState {
            phase: ContestPhase::Setup,
            phase_log: Vec::new(),
            book: SubmissionBook::new(),
            history: SampleHistory::new(),
            tracker: FailureTracker::default(),
            snapshot: None,
            shortlist: None,
            jury: JuryBook::new(),
            winners: None,
            outbox: Outbox::new(),
            sessions: BTreeMap::new(),
        }
    }
}

impl ContestState {
    pub fn with_failure_threshold(threshold: u32) -> Self {
        ContestState { tracker: FailureTracker::new(threshold), ..Self::default() }
    }

    pub fn enter(&mut self, phase: ContestPhase, at: DateTime<Utc>, actor: &str) {
        debug_assert!(phase > self.phase);
        self.phase = phase;
        self.phase_log.push(PhaseRecord { phase, at, actor: actor.to_string() });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phases_are_strictly_ordered() {
        let mut p = ContestPhase::Setup;
        let mut seen = vec![p];
        while let Some(next) = p.successor() {
            assert!(next > p);
            p = next;
            seen.push(p);
        }
        assert_eq!(seen, ContestPhase::ALL);
        assert_eq!("jury".parse::<ContestPhase>().unwrap(), ContestPhase::Jury);
    }

    #[test]
    fn principal_serializes_with_role_tag() {
        let p = Principal::Juror("j1".into());
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"role":"juror","id":"j1"}"#);
    }
}
