use chrono::{DateTime, Datelike, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::ContestConfig;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AgeError {
    #[error("birth date {birth} lies after reference date {reference}")]
    InvalidDate { birth: NaiveDate, reference: NaiveDate },
}

impl AgeError {
    pub fn code(&self) -> &'static str {
        "INVALID_DATE"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectionReason {
    CountryNotEligible,
    AgeOutOfRange,
    WindowClosed,
    /// A configured extension rule failed.
    Rule(String),
}

impl RejectionReason {
    pub fn code(&self) -> String {
        match self {
            RejectionReason::CountryNotEligible => "COUNTRY_NOT_ELIGIBLE".into(),
            RejectionReason::AgeOutOfRange => "AGE_OUT_OF_RANGE".into(),
            RejectionReason::WindowClosed => "WINDOW_CLOSED".into(),
            RejectionReason::Rule(name) => format!("RULE_FAILED:{name}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EligibilityResult {
    pub eligible: bool,
    pub age_group: Option<String>,
    pub reasons: Vec<RejectionReason>,
}

/// Everything an extension rule may look at.
#[derive(Debug, Clone, Copy)]
pub struct Applicant<'a> {
    pub country: &'a str,
    pub birth_date: NaiveDate,
    pub now: DateTime<Utc>,
}

/// Optional extra eligibility predicate, evaluated after the built-in checks.
pub trait EligibilityRule: Send + Sync {
    fn name(&self) -> &str;
    fn admits(&self, applicant: &Applicant<'_>, config: &ContestConfig) -> bool;
}

/// Completed years between `birth` and `on`.
pub fn completed_years(birth: NaiveDate, on: NaiveDate) -> Option<u32> {
    if birth > on {
        return None;
    }
    let mut years = on.year() - birth.year();
    if (on.month(), on.day()) < (birth.month(), birth.day()) {
        years -= 1;
    }
    u32::try_from(years).ok()
}

pub fn derive_age_group(
    birth_date: NaiveDate,
    reference_date: NaiveDate,
    config: &ContestConfig,
) -> Result<Option<String>, AgeError> {
    let age = completed_years(birth_date, reference_date)
        .ok_or(AgeError::InvalidDate { birth: birth_date, reference: reference_date })?;
    Ok(config.age_groups.iter().find(|g| g.contains(age)).map(|g| g.id.clone()))
}

pub fn validate_eligibility(
    country: &str,
    birth_date: NaiveDate,
    now: DateTime<Utc>,
    config: &ContestConfig,
) -> EligibilityResult {
    validate_eligibility_with(country, birth_date, now, config, &[])
}

pub fn validate_eligibility_with(
    country: &str,
    birth_date: NaiveDate,
    now: DateTime<Utc>,
    config: &ContestConfig,
    rules: &[Box<dyn EligibilityRule>],
) -> EligibilityResult {
    let mut reasons = Vec::new();
    if !config.eligible_countries.contains(country) {
        reasons.push(RejectionReason::CountryNotEligible);
    }
    let group = derive_age_group(birth_date, config.reference_date(), config).ok().flatten();
    if group.is_none() {
        reasons.push(RejectionReason::AgeOutOfRange);
    }
    if !config.in_window(now) {
        reasons.push(RejectionReason::WindowClosed);
    }
    let applicant = Applicant { country, birth_date, now };
    for rule in rules {
        if !rule.admits(&applicant, config) {
            reasons.push(RejectionReason::Rule(rule.name().to_string()));
        }
    }
    if reasons.is_empty() {
        EligibilityResult { eligible: true, age_group: group, reasons }
    } else {
        EligibilityResult { eligible: false, age_group: None, reasons }
    }
}
