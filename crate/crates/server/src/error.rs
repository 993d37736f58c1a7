use contest_core::metrics::AlreadyFrozen;
use contest_core::rating::{JuryError, WinnerError};
use contest_core::submission::SubmissionError;
use contest_core::syndication::SyndicationError;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::state::ContestPhase;
use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Submission(#[from] SubmissionError),
    #[error(transparent)]
    Jury(#[from] JuryError),
    #[error(transparent)]
    Winner(#[from] WinnerError),
    #[error(transparent)]
    Syndication(#[from] SyndicationError),
    #[error(transparent)]
    Frozen(#[from] AlreadyFrozen),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("missing, unknown or expired session token")]
    Unauthenticated,
    #[error("wrong login or password")]
    InvalidCredentials,
    #[error("this endpoint requires the {required} role")]
    Forbidden { required: &'static str },
    #[error("cannot move from {from} to {to}")]
    InvalidTransition { from: ContestPhase, to: ContestPhase },
    #[error("{message}")]
    PreconditionFailed { message: String, details: Value },
    #[error("{what} is available from phase {required} on; the contest is in {current}")]
    PhaseTooEarly { what: &'static str, required: ContestPhase, current: ContestPhase },
    #[error("{what} is only possible in phase {required}; the contest is in {current}")]
    WrongPhase { what: &'static str, required: ContestPhase, current: ContestPhase },
    #[error("{0}")]
    InvalidRequest(String),
    #[error("{0} not found")]
    NotFound(String),
}

/// Uniform error body.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorEnvelope {
    pub code: String,
    pub message: String,
    pub details: Value,
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Submission(e) => e.code(),
            ServiceError::Jury(e) => e.code(),
            ServiceError::Winner(e) => e.code(),
            ServiceError::Syndication(e) => e.code(),
            ServiceError::Frozen(e) => e.code(),
            ServiceError::Store(_) => "STORE_ERROR",
            ServiceError::Unauthenticated => "UNAUTHENTICATED",
            ServiceError::InvalidCredentials => "INVALID_CREDENTIALS",
            ServiceError::Forbidden { .. } => "FORBIDDEN",
            ServiceError::InvalidTransition { .. } => "INVALID_TRANSITION",
            ServiceError::PreconditionFailed { .. } => "PRECONDITION_FAILED",
            ServiceError::PhaseTooEarly { .. } => "PHASE_TOO_EARLY",
            ServiceError::WrongPhase { .. } => "WRONG_PHASE",
            ServiceError::InvalidRequest(_) => "INVALID_REQUEST",
            ServiceError::NotFound(_) => "NOT_FOUND",
        }
    }

    pub fn status(&self) -> u16 {
        match self.code() {
            "UNAUTHENTICATED" | "INVALID_CREDENTIALS" => 401,
            "FORBIDDEN" => 403,
            "NOT_FOUND" | "ACCOUNT_NOT_FOUND" => 404,
            "INVALID_REQUEST" => 400,
            "STORE_ERROR" => 500,
            "EMAIL_TAKEN" | "ALREADY_SUBMITTED" | "NOT_DRAFT" | "PROFILE_LOCKED" | "FROZEN" | "WINDOW_CLOSED"
            | "INVALID_TRANSITION" | "PRECONDITION_FAILED" | "PHASE_TOO_EARLY" | "WRONG_PHASE"
            | "ALREADY_FROZEN" | "UNSCORED_ENTRIES" => 409,
            _ => 422,
        }
    }

    pub fn details(&self) -> Value {
        match self {
            ServiceError::Submission(SubmissionError::NotEligible(reasons)) => {
                json!({ "reasons": reasons.iter().map(|r| r.code()).collect::<Vec<_>>() })
            }
            ServiceError::Submission(SubmissionError::MissingField(field)) => json!({ "field": field }),
            ServiceError::Jury(JuryError::CriteriaMismatch { age_group, expected, given }) => {
                json!({ "age_group": age_group, "expected": expected, "given": given })
            }
            ServiceError::Jury(JuryError::ScoreOutOfRange { criterion, value, max }) => {
                json!({ "criterion": criterion, "value": value, "min": 0, "max": max })
            }
            ServiceError::Winner(WinnerError::UnscoredEntries(ids)) => json!({ "unscored": ids }),
            ServiceError::Forbidden { required } => json!({ "required_role": required }),
            ServiceError::InvalidTransition { from, to } => {
                json!({ "from": from, "to": to, "allowed": from.successor() })
            }
            ServiceError::PreconditionFailed { details, .. } => details.clone(),
            ServiceError::PhaseTooEarly { required, current, .. }
            | ServiceError::WrongPhase { required, current, .. } => json!({ "required": required, "current": current }),
            _ => Value::Null,
        }
    }

    pub fn envelope(&self) -> ErrorEnvelope {
        ErrorEnvelope { code: self.code().to_string(), message: self.to_string(), details: self.details() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use contest_core::eligibility::RejectionReason;

    #[test]
    fn envelope_carries_reasons() {
        let e = ServiceError::from(SubmissionError::NotEligible(vec![RejectionReason::CountryNotEligible]));
        let env = e.envelope();
        assert_eq!(env.code, "NOT_ELIGIBLE");
        assert_eq!(env.details, json!({ "reasons": ["COUNTRY_NOT_ELIGIBLE"] }));
        assert_eq!(e.status(), 422);
    }

    #[test]
    fn transition_errors_name_the_allowed_step() {
        let e = ServiceError::InvalidTransition { from: ContestPhase::Open, to: ContestPhase::Jury };
        assert_eq!(e.status(), 409);
        assert_eq!(e.details()["allowed"], json!("CLOSED"));
    }
}
