//! Accounts, participant profiles and the draft → submitted → withdrawn
//! lifecycle of contributions.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::category::{assign_category, CategoryError};
use crate::config::{is_alpha2, ContestConfig};
use crate::credentials::CredentialHasher;
use crate::eligibility::{
    derive_age_group, validate_eligibility_with, EligibilityResult, EligibilityRule,
    RejectionReason,
};
use crate::ids::{AccountId, SubmissionId};
use crate::media::{validate_media_link, MediaLink, MediaLinkError};
use crate::topics::TopicCatalog;

pub const MIN_PASSWORD_CHARS: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SubmissionError {
    #[error("an account with this e-mail already exists")]
    EmailTaken,
    #[error("password must have at least {MIN_PASSWORD_CHARS} characters")]
    WeakPassword,
    #[error("e-mail address is not valid")]
    InvalidEmail,
    #[error("{0} must not be empty")]
    MissingField(&'static str),
    #[error("account not found")]
    AccountNotFound,
    #[error("{0:?} is not an ISO 3166-1 alpha-2 code")]
    InvalidCountryCode(String),
    #[error("birth date {0} lies in the future")]
    InvalidDate(NaiveDate),
    #[error("group participation needs member names; individual participation must not list any")]
    InvalidProfile,
    #[error("profile cannot change while a submission is finalized")]
    ProfileLocked,
    #[error("profile has not been completed")]
    ProfileIncomplete,
    #[error("unknown topic {0}")]
    UnknownTopic(String),
    #[error("unknown media type {0}")]
    UnknownMediaType(String),
    #[error(transparent)]
    MediaLink(#[from] MediaLinkError),
    #[error("submission not found")]
    NotFound,
    #[error("participant is not eligible: {0:?}")]
    NotEligible(Vec<RejectionReason>),
    #[error("the submission window is closed")]
    WindowClosed,
    #[error("this account already has a finalized submission")]
    AlreadySubmitted,
    #[error("only drafts can be edited or finalized")]
    NotDraft,
    #[error("the hashtag attestation is required to finalize")]
    HashtagNotAttested,
    #[error("metrics are frozen; entries can no longer be withdrawn")]
    Frozen,
}

impl SubmissionError {
    pub fn code(&self) -> &'static str {
        match self {
            SubmissionError::EmailTaken => "EMAIL_TAKEN",
            SubmissionError::WeakPassword => "WEAK_PASSWORD",
            SubmissionError::InvalidEmail => "INVALID_EMAIL",
            SubmissionError::MissingField(_) => "MISSING_FIELD",
            SubmissionError::AccountNotFound => "ACCOUNT_NOT_FOUND",
            SubmissionError::InvalidCountryCode(_) => "INVALID_COUNTRY_CODE",
            SubmissionError::InvalidDate(_) => "INVALID_DATE",
            SubmissionError::InvalidProfile => "INVALID_PROFILE",
            SubmissionError::ProfileLocked => "PROFILE_LOCKED",
            SubmissionError::ProfileIncomplete => "PROFILE_INCOMPLETE",
            SubmissionError::UnknownTopic(_) => "UNKNOWN_TOPIC",
            SubmissionError::UnknownMediaType(_) => "UNKNOWN_MEDIA_TYPE",
            SubmissionError::MediaLink(e) => e.code(),
            SubmissionError::NotFound => "NOT_FOUND",
            SubmissionError::NotEligible(_) => "NOT_ELIGIBLE",
            SubmissionError::WindowClosed => "WINDOW_CLOSED",
            SubmissionError::AlreadySubmitted => "ALREADY_SUBMITTED",
            SubmissionError::NotDraft => "NOT_DRAFT",
            SubmissionError::HashtagNotAttested => "HASHTAG_NOT_ATTESTED",
            SubmissionError::Frozen => "FROZEN",
        }
    }
}

impl From<CategoryError> for SubmissionError {
    fn from(e: CategoryError) -> Self {
        match e {
            CategoryError::UnknownMediaType(m) => SubmissionError::UnknownMediaType(m),
            // Profiles only ever carry age groups derived from the config.
            CategoryError::UnknownAgeGroup(_) => SubmissionError::ProfileIncomplete,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub account_id: AccountId,
    pub first_name: String,
    pub last_name: String,
    pub email: String,
    /// Never leaves the store.
    pub credential_digest: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParticipationMode {
    Individual,
    Group,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Profile {
    pub birth_date: NaiveDate,
    pub country_of_residence: String,
    pub participation_mode: ParticipationMode,
    #[serde(default)]
    pub group_member_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoredProfile {
    pub profile: Profile,
    /// Outcome at the time the profile was saved; ineligible profiles are kept.
    pub eligibility: EligibilityResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SubmissionState {
    Draft,
    Submitted,
    Withdrawn,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submission {
    pub submission_id: SubmissionId,
    pub account_id: AccountId,
    pub title: String,
    pub description: String,
    pub topic_id: String,
    pub media_type_id: String,
    pub media_link: MediaLink,
    pub state: SubmissionState,
    pub created_at: DateTime<Utc>,
    pub submitted_at: Option<DateTime<Utc>>,
    pub category_id: Option<String>,
    pub age_group_id: Option<String>,
    pub country: Option<String>,
    /// Participant confirmed the required hashtag is on the hosted media.
    pub hashtag_attested: bool,
}

impl Submission {
    pub fn is_live(&self) -> bool {
        self.state == SubmissionState::Submitted
    }
}

/// Draft fields as entered by the participant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DraftInput {
    pub title: String,
    #[serde(default)]
    pub description: String,
    pub topic_id: String,
    pub media_type_id: String,
    pub media_url: String,
}

/// Read-only context every lifecycle operation validates against.
pub struct Rules<'a> {
    pub config: &'a ContestConfig,
    pub catalog: &'a TopicCatalog,
    pub extra: &'a [Box<dyn EligibilityRule>],
}

impl<'a> Rules<'a> {
    pub fn new(config: &'a ContestConfig, catalog: &'a TopicCatalog) -> Self {
        Rules { config, catalog, extra: &[] }
    }
}

fn is_valid_email(email: &str) -> bool {
    let Some((local, domain)) = email.split_once('@') else {
        return false;
    };
    !local.is_empty()
        && !domain.contains('@')
        && domain.contains('.')
        && !domain.starts_with('.')
        && !domain.ends_with('.')
        && !email.chars().any(|c| c.is_whitespace() || c.is_control())
}

/// Accounts, profiles and submissions. Callers wrap every mutation in a
/// store transaction; the book itself is plain data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SubmissionBook {
    accounts: BTreeMap<AccountId, Account>,
    emails: BTreeMap<String, AccountId>,
    profiles: BTreeMap<AccountId, StoredProfile>,
    submissions: BTreeMap<SubmissionId, Submission>,
    next_account: u64,
    next_submission: u64,
}

impl SubmissionBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_account(
        &mut self,
        first_name: &str,
        last_name: &str,
        email: &str,
        password: &str,
        hasher: &dyn CredentialHasher,
        now: DateTime<Utc>,
    ) -> Result<AccountId, SubmissionError> {
        let first_name = first_name.trim();
        let last_name = last_name.trim();
        if first_name.is_empty() {
            return Err(SubmissionError::MissingField("first_name"));
        }
        if last_name.is_empty() {
            return Err(SubmissionError::MissingField("last_name"));
        }
        let email = email.trim().to_lowercase();
        if !is_valid_email(&email) {
            return Err(SubmissionError::InvalidEmail);
        }
        if password.chars().count() < MIN_PASSWORD_CHARS {
            return Err(SubmissionError::WeakPassword);
        }
        if self.emails.contains_key(&email) {
            return Err(SubmissionError::EmailTaken);
        }
        self.next_account += 1;
        let account_id = AccountId(format!("acc-{:06}", self.next_account));
        self.emails.insert(email.clone(), account_id.clone());
        self.accounts.insert(
            account_id.clone(),
            Account {
                account_id: account_id.clone(),
                first_name: first_name.to_string(),
                last_name: last_name.to_string(),
                email,
                credential_digest: hasher.digest(password),
                created_at: now,
            },
        );
        Ok(account_id)
    }

    /// Looks up an account by e-mail and checks the password.
    pub fn authenticate(
        &self,
        email: &str,
        password: &str,
        hasher: &dyn CredentialHasher,
    ) -> Option<&Account> {
        let id = self.emails.get(&email.trim().to_lowercase())?;
        let account = self.accounts.get(id)?;
        hasher.verify(password, &account.credential_digest).then_some(account)
    }

    pub fn complete_profile(
        &mut self,
        account_id: &AccountId,
        mut profile: Profile,
        rules: &Rules<'_>,
        now: DateTime<Utc>,
    ) -> Result<EligibilityResult, SubmissionError> {
        if !self.accounts.contains_key(account_id) {
            return Err(SubmissionError::AccountNotFound);
        }
        profile.country_of_residence = profile.country_of_residence.trim().to_ascii_uppercase();
        if !is_alpha2(&profile.country_of_residence) {
            return Err(SubmissionError::InvalidCountryCode(profile.country_of_residence));
        }
        if profile.birth_date > now.date_naive() {
            return Err(SubmissionError::InvalidDate(profile.birth_date));
        }
        profile.group_member_names.retain(|n| !n.trim().is_empty());
        let members_ok = match profile.participation_mode {
            ParticipationMode::Individual => profile.group_member_names.is_empty(),
            ParticipationMode::Group => !profile.group_member_names.is_empty(),
        };
        if !members_ok {
            return Err(SubmissionError::InvalidProfile);
        }
        if self.live_submission_of(account_id).is_some() {
            return Err(SubmissionError::ProfileLocked);
        }
        let eligibility = validate_eligibility_with(
            &profile.country_of_residence,
            profile.birth_date,
            now,
            rules.config,
            rules.extra,
        );
        self.profiles
            .insert(account_id.clone(), StoredProfile { profile, eligibility: eligibility.clone() });
        Ok(eligibility)
    }

    pub fn create_submission(
        &mut self,
        account_id: &AccountId,
        input: &DraftInput,
        rules: &Rules<'_>,
        now: DateTime<Utc>,
    ) -> Result<SubmissionId, SubmissionError> {
        if !self.accounts.contains_key(account_id) {
            return Err(SubmissionError::AccountNotFound);
        }
        let draft = self.build_draft(account_id, SubmissionId(String::new()), input, rules, now)?;
        self.next_submission += 1;
        let id = SubmissionId(format!("sub-{:06}", self.next_submission));
        self.submissions.insert(id.clone(), Submission { submission_id: id.clone(), ..draft });
        Ok(id)
    }

    /// Replaces the fields of an existing draft.
    pub fn update_draft(
        &mut self,
        account_id: &AccountId,
        submission_id: &SubmissionId,
        input: &DraftInput,
        rules: &Rules<'_>,
    ) -> Result<&Submission, SubmissionError> {
        let existing = self.owned(account_id, submission_id)?;
        if existing.state != SubmissionState::Draft {
            return Err(SubmissionError::NotDraft);
        }
        let created_at = existing.created_at;
        let draft = self.build_draft(account_id, submission_id.clone(), input, rules, created_at)?;
        self.submissions.insert(submission_id.clone(), draft);
        Ok(&self.submissions[submission_id])
    }

    fn build_draft(
        &self,
        account_id: &AccountId,
        submission_id: SubmissionId,
        input: &DraftInput,
        rules: &Rules<'_>,
        created_at: DateTime<Utc>,
    ) -> Result<Submission, SubmissionError> {
        let title = input.title.trim();
        if title.is_empty() {
            return Err(SubmissionError::MissingField("title"));
        }
        if rules.catalog.get(&input.topic_id).is_none() {
            return Err(SubmissionError::UnknownTopic(input.topic_id.clone()));
        }
        if rules.config.media_type(&input.media_type_id).is_none() {
            return Err(SubmissionError::UnknownMediaType(input.media_type_id.clone()));
        }
        let media_link = validate_media_link(&input.media_url)?;
        Ok(Submission {
            submission_id,
            account_id: account_id.clone(),
            title: title.to_string(),
            description: input.description.trim().to_string(),
            topic_id: input.topic_id.clone(),
            media_type_id: input.media_type_id.clone(),
            media_link,
            state: SubmissionState::Draft,
            created_at,
            submitted_at: None,
            category_id: None,
            age_group_id: None,
            country: None,
            hashtag_attested: false,
        })
    }

    pub fn finalize_submission(
        &mut self,
        account_id: &AccountId,
        submission_id: &SubmissionId,
        hashtag_attested: bool,
        rules: &Rules<'_>,
        now: DateTime<Utc>,
    ) -> Result<&Submission, SubmissionError> {
        let submission = self.owned(account_id, submission_id)?;
        match submission.state {
            SubmissionState::Draft => {}
            SubmissionState::Submitted => return Err(SubmissionError::AlreadySubmitted),
            SubmissionState::Withdrawn => return Err(SubmissionError::NotDraft),
        }
        if !rules.config.in_window(now) {
            return Err(SubmissionError::WindowClosed);
        }
        let stored = self.profiles.get(account_id).ok_or(SubmissionError::ProfileIncomplete)?;
        let profile = &stored.profile;
        let eligibility = validate_eligibility_with(
            &profile.country_of_residence,
            profile.birth_date,
            now,
            rules.config,
            rules.extra,
        );
        if !eligibility.eligible {
            return Err(SubmissionError::NotEligible(eligibility.reasons));
        }
        if self.live_submission_of(account_id).is_some() {
            return Err(SubmissionError::AlreadySubmitted);
        }
        if !hashtag_attested {
            return Err(SubmissionError::HashtagNotAttested);
        }
        let age_group = eligibility.age_group.expect("eligible results carry an age group");
        let category_id = assign_category(&age_group, &submission.media_type_id, rules.config)?;
        let country = profile.country_of_residence.clone();

        let submission = self.submissions.get_mut(submission_id).expect("checked above");
        submission.state = SubmissionState::Submitted;
        submission.submitted_at = Some(now);
        submission.category_id = Some(category_id);
        submission.age_group_id = Some(age_group);
        submission.country = Some(country);
        submission.hashtag_attested = true;
        Ok(submission)
    }

    /// `frozen` is true once the metrics snapshot exists.
    pub fn withdraw_submission(
        &mut self,
        account_id: &AccountId,
        submission_id: &SubmissionId,
        frozen: bool,
        config: &ContestConfig,
        now: DateTime<Utc>,
    ) -> Result<&Submission, SubmissionError> {
        let submission = self.owned(account_id, submission_id)?;
        if submission.state == SubmissionState::Withdrawn {
            return Ok(&self.submissions[submission_id]);
        }
        if frozen || now >= config.metrics_freeze {
            return Err(SubmissionError::Frozen);
        }
        let submission = self.submissions.get_mut(submission_id).expect("checked above");
        submission.state = SubmissionState::Withdrawn;
        Ok(submission)
    }

    /// Foreign ids look exactly like missing ones.
    fn owned(
        &self,
        account_id: &AccountId,
        submission_id: &SubmissionId,
    ) -> Result<&Submission, SubmissionError> {
        self.submissions
            .get(submission_id)
            .filter(|s| &s.account_id == account_id)
            .ok_or(SubmissionError::NotFound)
    }

    pub fn account(&self, id: &AccountId) -> Option<&Account> {
        self.accounts.get(id)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &Account> {
        self.accounts.values()
    }

    pub fn profile(&self, id: &AccountId) -> Option<&StoredProfile> {
        self.profiles.get(id)
    }

    pub fn submission(&self, id: &SubmissionId) -> Option<&Submission> {
        self.submissions.get(id)
    }

    pub fn submissions(&self) -> impl Iterator<Item = &Submission> {
        self.submissions.values()
    }

    /// SUBMITTED entries in id order.
    pub fn live_submissions(&self) -> impl Iterator<Item = &Submission> {
        self.submissions.values().filter(|s| s.is_live())
    }

    pub fn live_submission_of(&self, account_id: &AccountId) -> Option<&Submission> {
        self.live_submissions().find(|s| &s.account_id == account_id)
    }

    pub fn submissions_of<'a>(
        &'a self,
        account_id: &'a AccountId,
    ) -> impl Iterator<Item = &'a Submission> + 'a {
        self.submissions.values().filter(move |s| &s.account_id == account_id)
    }

    /// Recomputes the category of a live entry from the stored profile.
    pub fn recomputed_category(
        &self,
        submission: &Submission,
        config: &ContestConfig,
    ) -> Option<String> {
        let profile = &self.profiles.get(&submission.account_id)?.profile;
        let group = derive_age_group(profile.birth_date, config.reference_date(), config).ok()??;
        assign_category(&group, &submission.media_type_id, config).ok()
    }
}
