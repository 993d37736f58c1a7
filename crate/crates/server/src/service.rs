//! Contest operations over the persisted state. Every mutation runs as one
//! transaction: the state is copied, changed, saved, and only then
//! published, so a failed operation or a failed save leaves no trace.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Duration, Utc};
use contest_core::credentials::CredentialHasher;
use contest_core::metrics::{
    freeze_snapshot, poll_cycle, settle_snapshot, MetricsProvider, MetricsSnapshot, PollReport, PollTarget,
};
use contest_core::rating::export::{rankings_csv, winners_csv};
use contest_core::rating::{
    build_shortlist, ranked_groups, record_audience_award, record_jury_score, select_winners, Diagnostic, Entrant,
    Grouping, JuryScore, ScoringMatrix, WinnerError, WinnerSet,
};
use contest_core::submission::{DraftInput, Profile, Rules, Submission, SubmissionState};
use contest_core::syndication::widget::deep_link;
use contest_core::syndication::{
    render_event_post, ContestEvent, DeliveryAdapter, DeliveryReport, EventKind, OutboxPost, PostContext,
    TemplateSet,
};
use contest_core::syndication::outbox::DeliveryOutcome;
use contest_core::{
    enumerate_categories, AccountId, EligibilityResult, JurorId, MediaLink, SubmissionId,
    TopicCatalog, TopicSheet,
};
use rand::RngExt;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::clock::Clock;
use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::state::{ContestPhase, ContestState, PhaseRecord, Principal, Session};
use crate::store::{FileStore, MemoryStore, Store};

pub type Result<T> = std::result::Result<T, ServiceError>;

pub const CLOCK_ACTOR: &str = "clock";

/// A digest computed before the state lock is taken.
struct Precomputed(String);

impl CredentialHasher for Precomputed {
    fn digest(&self, _: &str) -> String {
        self.0.clone()
    }

    fn verify(&self, _: &str, _: &str) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Participant,
    Juror,
    Admin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionGrant {
    pub token: String,
    pub role: String,
    pub subject: String,
    pub expires_at: DateTime<Utc>,
}

/// Public page of one contribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubmissionView {
    pub submission_id: SubmissionId,
    pub title: String,
    pub description: String,
    pub topic_id: String,
    pub topic_title: Option<String>,
    pub media_type_id: String,
    pub media_link: MediaLink,
    pub state: SubmissionState,
    pub submitted_at: Option<DateTime<Utc>>,
    pub category_id: Option<String>,
    pub country: Option<String>,
    pub hashtag_attested: bool,
    pub deep_link: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsView {
    pub phase: ContestPhase,
    pub registered_accounts: usize,
    pub total_participants: usize,
    pub total_submissions: usize,
    pub distinct_countries: usize,
    pub per_country: BTreeMap<String, usize>,
    pub per_category: BTreeMap<String, usize>,
    pub target_min_countries: u32,
    /// Advisory only; the contest runs regardless.
    pub below_country_target: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub rank: usize,
    pub submission_id: SubmissionId,
    pub title: String,
    pub country: String,
    pub category_id: String,
    pub score: String,
    pub views: u64,
    pub likes: u64,
    pub shares: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leaderboard {
    pub frozen: bool,
    pub as_of: DateTime<Utc>,
    pub group_by: Grouping,
    pub groups: BTreeMap<String, Vec<LeaderboardRow>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JuryRow {
    pub submission_id: SubmissionId,
    pub title: String,
    pub description: String,
    pub topic_id: String,
    pub category_id: String,
    pub age_group_id: String,
    pub country: String,
    pub media_link: Option<MediaLink>,
    pub hashtag_attested: bool,
    pub provenance: Vec<String>,
    pub community_score: String,
    pub criteria: Vec<String>,
    pub my_scores: Option<BTreeMap<String, i64>>,
    pub juror_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JuryShortlistView {
    pub scale_max: u32,
    pub matrix: BTreeMap<String, Vec<String>>,
    pub scored_by_me: usize,
    pub entries: Vec<JuryRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseView {
    pub phase: ContestPhase,
    pub changed: bool,
    pub log: Vec<PhaseRecord>,
    pub snapshot: Option<MetricsSnapshot>,
    pub shortlist_size: Option<usize>,
    pub winner_count: Option<usize>,
    pub diagnostics: Vec<Diagnostic>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExportKind {
    RankingsCountry,
    RankingsCategory,
    Winners,
    Samples,
    Outbox,
    Snapshot,
}

impl ExportKind {
    pub const ALL: [ExportKind; 6] = [
        ExportKind::RankingsCountry,
        ExportKind::RankingsCategory,
        ExportKind::Winners,
        ExportKind::Samples,
        ExportKind::Outbox,
        ExportKind::Snapshot,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            ExportKind::RankingsCountry => "rankings-country",
            ExportKind::RankingsCategory => "rankings-category",
            ExportKind::Winners => "winners",
            ExportKind::Samples => "samples",
            ExportKind::Outbox => "outbox",
            ExportKind::Snapshot => "snapshot",
        }
    }

    pub fn file_name(self) -> String {
        match self {
            ExportKind::Snapshot => "snapshot.json".into(),
            k => format!("{}.csv", k.slug()),
        }
    }

    pub fn parse(s: &str) -> Option<ExportKind> {
        let s = s.trim().to_ascii_lowercase().replace('_', "-");
        Self::ALL.into_iter().find(|k| k.slug() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Export {
    pub kind: ExportKind,
    pub file_name: String,
    pub content_type: &'static str,
    pub body: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Health {
    pub phase: ContestPhase,
    pub now: DateTime<Utc>,
    pub store: String,
}

pub struct Service {
    config: Arc<ServiceConfig>,
    catalog: TopicCatalog,
    templates: TemplateSet,
    matrix: ScoringMatrix,
    store: Arc<dyn Store>,
    state: Mutex<ContestState>,
    clock: Arc<dyn Clock>,
    hasher: Arc<dyn CredentialHasher>,
}

impl Service {
    /// Loads the persisted state (or starts empty) and checks that every
    /// channel has a template for every event kind.
    pub fn new(
        config: ServiceConfig,
        catalog: TopicCatalog,
        templates: TemplateSet,
        store: Arc<dyn Store>,
        clock: Arc<dyn Clock>,
        hasher: Arc<dyn CredentialHasher>,
    ) -> Result<Self> {
        for channel in &config.channels {
            for kind in EventKind::ALL {
                if templates.get(kind, &channel.id).is_none() {
                    return Err(contest_core::syndication::SyndicationError::NoTemplate {
                        kind,
                        channel: channel.id.clone(),
                    }
                    .into());
                }
            }
        }
        let state = match store.load()? {
            Some(s) => s,
            None => ContestState::with_failure_threshold(config.failure_threshold),
        };
        Ok(Service {
            matrix: ScoringMatrix::from_config(&config.contest),
            config: Arc::new(config),
            catalog,
            templates,
            store,
            state: Mutex::new(state),
            clock,
            hasher,
        })
    }

    /// Builds catalog, templates and store from the file settings.
    pub fn from_config(
        config: ServiceConfig,
        clock: Arc<dyn Clock>,
        hasher: Arc<dyn CredentialHasher>,
    ) -> std::result::Result<Self, String> {
        let catalog = match &config.topic_catalog {
            Some(path) => TopicCatalog::from_json(&read(path)?).map_err(|e| format!("{}: {e}", path.display()))?,
            None => TopicCatalog::default_catalog(),
        };
        let templates = match &config.templates_dir {
            Some(dir) => TemplateSet::load_dir(dir).map_err(|e| e.to_string())?,
            None => TemplateSet::builtin(),
        };
        let store: Arc<dyn Store> = match &config.store_path {
            Some(path) => Arc::new(FileStore::open(path).map_err(|e| e.to_string())?),
            None => Arc::new(MemoryStore::new()),
        };
        Service::new(config, catalog, templates, store, clock, hasher).map_err(|e| e.to_string())
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn matrix(&self) -> &ScoringMatrix {
        &self.matrix
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    fn rules(&self) -> Rules<'_> {
        Rules::new(&self.config.contest, &self.catalog)
    }

    /// Moves SETUP to OPEN and OPEN to CLOSED when the clock has passed the
    /// configured instants. Returns true when anything changed.
    fn follow_clock(&self, st: &mut ContestState, now: DateTime<Utc>) -> bool {
        let c = &self.config.contest;
        let mut changed = false;
        if st.phase == ContestPhase::Setup && now >= c.submission_open {
            st.enter(ContestPhase::Open, now, CLOCK_ACTOR);
            changed = true;
        }
        if st.phase == ContestPhase::Open && now > c.submission_close {
            st.enter(ContestPhase::Closed, now, CLOCK_ACTOR);
            changed = true;
        }
        changed
    }

    /// Runs `f` on a copy of the state and commits the copy when both `f`
    /// and the store write succeed.
    pub fn transact<R>(&self, f: impl FnOnce(&mut ContestState, DateTime<Utc>) -> Result<R>) -> Result<R> {
        let mut guard = self.state.lock().expect("state lock");
        let now = self.clock.now();
        let mut draft = guard.clone();
        self.follow_clock(&mut draft, now);
        let out = f(&mut draft, now)?;
        self.store.save(&draft)?;
        *guard = draft;
        Ok(out)
    }

    /// Read-only access to a consistent view.
    pub fn view<R>(&self, f: impl FnOnce(&ContestState, DateTime<Utc>) -> Result<R>) -> Result<R> {
        let mut guard = self.state.lock().expect("state lock");
        let now = self.clock.now();
        let mut probe = ContestState { phase: guard.phase, ..ContestState::default() };
        if self.follow_clock(&mut probe, now) {
            let mut draft = guard.clone();
            self.follow_clock(&mut draft, now);
            self.store.save(&draft)?;
            *guard = draft;
        }
        f(&guard, now)
    }

    pub fn health(&self) -> Result<Health> {
        self.view(|st, now| Ok(Health { phase: st.phase, now, store: self.store.describe() }))
    }

    pub fn phase(&self) -> Result<ContestPhase> {
        self.view(|st, _| Ok(st.phase))
    }

    // Accounts and sessions

    pub fn register(&self, first: &str, last: &str, email: &str, password: &str) -> Result<AccountId> {
        let digest = Precomputed(self.hasher.digest(password));
        self.transact(|st, now| Ok(st.book.register_account(first, last, email, password, &digest, now)?))
    }

    pub fn login(&self, role: Role, login: &str, password: &str) -> Result<SessionGrant> {
        let (principal, digest) = match role {
            Role::Participant => self.view(|st, _| {
                let email = login.trim().to_lowercase();
                st.book
                    .accounts()
                    .find(|a| a.email == email)
                    .map(|a| (Principal::Participant(a.account_id.clone()), a.credential_digest.clone()))
                    .ok_or(ServiceError::InvalidCredentials)
            })?,
            Role::Juror => self
                .config
                .jurors
                .iter()
                .find(|c| c.id == login)
                .map(|c| (Principal::Juror(JurorId::from(c.id.as_str())), c.password_digest.clone()))
                .ok_or(ServiceError::InvalidCredentials)?,
            Role::Admin => self
                .config
                .admins
                .iter()
                .find(|c| c.id == login)
                .map(|c| (Principal::Admin(c.id.clone()), c.password_digest.clone()))
                .ok_or(ServiceError::InvalidCredentials)?,
        };
        if !self.hasher.verify(password, &digest) {
            return Err(ServiceError::InvalidCredentials);
        }
        let token = new_token();
        let ttl = Duration::seconds(self.config.session_ttl_secs);
        self.transact(|st, now| {
            st.sessions.retain(|_, s| s.expires_at > now);
            let expires_at = now + ttl;
            st.sessions.insert(token.clone(), Session { principal: principal.clone(), expires_at });
            Ok(SessionGrant {
                token: token.clone(),
                role: principal.role().into(),
                subject: principal.subject().into(),
                expires_at,
            })
        })
    }

    pub fn authorize(&self, token: &str) -> Result<Principal> {
        self.view(|st, now| {
            st.sessions
                .get(token)
                .filter(|s| s.expires_at > now)
                .map(|s| s.principal.clone())
                .ok_or(ServiceError::Unauthenticated)
        })
    }

    // Participant flow

    pub fn put_profile(&self, account: &AccountId, profile: Profile) -> Result<EligibilityResult> {
        self.transact(|st, now| Ok(st.book.complete_profile(account, profile, &self.rules(), now)?))
    }

    pub fn create_draft(&self, account: &AccountId, input: &DraftInput) -> Result<SubmissionView> {
        self.transact(|st, now| {
            let id = st.book.create_submission(account, input, &self.rules(), now)?;
            Ok(self.present(st.book.submission(&id).expect("just created")))
        })
    }

    pub fn update_draft(&self, account: &AccountId, id: &SubmissionId, input: &DraftInput) -> Result<SubmissionView> {
        self.transact(|st, _| Ok(self.present(st.book.update_draft(account, id, input, &self.rules())?)))
    }

    pub fn finalize(&self, account: &AccountId, id: &SubmissionId, hashtag_attested: bool) -> Result<SubmissionView> {
        self.transact(|st, now| {
            let submission = st.book.finalize_submission(account, id, hashtag_attested, &self.rules(), now)?.clone();
            let ctx = PostContext {
                title: submission.title.clone(),
                topic: self.topic_title(&submission.topic_id).unwrap_or_default(),
                link: deep_link(&self.config.platform_base_url, id.as_str()),
            };
            self.enqueue_event(st, EventKind::SubmissionFinalized, id.as_str(), &ctx, now);
            Ok(self.present(&submission))
        })
    }

    pub fn withdraw(&self, account: &AccountId, id: &SubmissionId) -> Result<SubmissionView> {
        self.transact(|st, now| {
            let frozen = st.snapshot.is_some() || st.phase >= ContestPhase::Frozen;
            Ok(self.present(st.book.withdraw_submission(account, id, frozen, &self.config.contest, now)?))
        })
    }

    /// Finalized and withdrawn entries are public; drafts only to their owner.
    pub fn submission(&self, id: &SubmissionId, viewer: Option<&Principal>) -> Result<SubmissionView> {
        self.view(|st, _| {
            let s = st.book.submission(id).ok_or_else(|| ServiceError::NotFound(format!("submission {id}")))?;
            let owner = matches!(viewer, Some(Principal::Participant(a)) if *a == s.account_id);
            if s.state == SubmissionState::Draft && !owner {
                return Err(ServiceError::NotFound(format!("submission {id}")));
            }
            Ok(self.present(s))
        })
    }

    pub fn my_submissions(&self, account: &AccountId) -> Result<Vec<SubmissionView>> {
        self.view(|st, _| Ok(st.book.submissions_of(account).map(|s| self.present(s)).collect()))
    }

    pub fn widget(&self, id: &SubmissionId) -> Result<contest_core::syndication::Widget> {
        self.view(|st, _| {
            let s = st.book.submission(id).ok_or_else(|| ServiceError::NotFound(format!("submission {id}")))?;
            Ok(contest_core::syndication::generate_widget(
                s,
                &self.topic_title(&s.topic_id).unwrap_or_default(),
                &self.config.platform_base_url,
                &self.config.contest.required_hashtag,
            )?)
        })
    }

    pub fn topics(&self) -> &[TopicSheet] {
        self.catalog.sheets()
    }

    fn topic_title(&self, topic_id: &str) -> Option<String> {
        self.catalog.get(topic_id).map(|t| t.title.clone())
    }

    fn present(&self, s: &Submission) -> SubmissionView {
        SubmissionView {
            submission_id: s.submission_id.clone(),
            title: s.title.clone(),
            description: s.description.clone(),
            topic_id: s.topic_id.clone(),
            topic_title: self.topic_title(&s.topic_id),
            media_type_id: s.media_type_id.clone(),
            media_link: s.media_link.clone(),
            state: s.state,
            submitted_at: s.submitted_at,
            category_id: s.category_id.clone(),
            country: s.country.clone(),
            hashtag_attested: s.hashtag_attested,
            deep_link: deep_link(&self.config.platform_base_url, s.submission_id.as_str()),
        }
    }

    // Public boards

    pub fn stats(&self) -> Result<StatsView> {
        self.view(|st, _| Ok(compute_stats(st, &self.config)))
    }

    pub fn leaderboard(&self, group_by: Grouping) -> Result<Leaderboard> {
        self.view(|st, now| {
            let (snapshot, frozen) = match &st.snapshot {
                Some(s) => (s.clone(), true),
                None if self.config.leaderboard_during_contest => {
                    let ids: Vec<SubmissionId> = st.book.live_submissions().map(|s| s.submission_id.clone()).collect();
                    (freeze_snapshot(&st.history, &ids, now), false)
                }
                None => {
                    return Err(ServiceError::PhaseTooEarly {
                        what: "the leaderboard",
                        required: ContestPhase::Frozen,
                        current: st.phase,
                    })
                }
            };
            let entrants = entrants_in(st, &snapshot);
            let groups = ranked_groups(&snapshot, &entrants, group_by, &self.config.contest.score_weights)
                .into_iter()
                .map(|(key, list)| {
                    let rows = list
                        .iter()
                        .enumerate()
                        .map(|(i, s)| LeaderboardRow {
                            rank: i + 1,
                            submission_id: s.entrant.submission_id.clone(),
                            title: st.book.submission(&s.entrant.submission_id).map(|x| x.title.clone()).unwrap_or_default(),
                            country: s.entrant.country.clone(),
                            category_id: s.entrant.category_id.clone(),
                            score: s.score.score.to_string(),
                            views: s.score.components.views,
                            likes: s.score.components.likes,
                            shares: s.score.components.shares,
                        })
                        .collect();
                    (key, rows)
                })
                .collect();
            Ok(Leaderboard { frozen, as_of: snapshot.frozen_at, group_by, groups })
        })
    }

    pub fn winners(&self) -> Result<WinnerSet> {
        self.view(|st, _| {
            st.winners.clone().ok_or(ServiceError::PhaseTooEarly {
                what: "the winner list",
                required: ContestPhase::Complete,
                current: st.phase,
            })
        })
    }

    // Jury

    pub fn jury_shortlist(&self, juror: &JurorId) -> Result<JuryShortlistView> {
        self.view(|st, _| {
            let shortlist = st.shortlist.as_ref().ok_or(ServiceError::PhaseTooEarly {
                what: "the jury shortlist",
                required: ContestPhase::Jury,
                current: st.phase,
            })?;
            let entries: Vec<JuryRow> = shortlist
                .entries
                .values()
                .map(|e| {
                    let id = &e.entrant.submission_id;
                    let s = st.book.submission(id);
                    let scores = st.jury.scores_for(id);
                    JuryRow {
                        submission_id: id.clone(),
                        title: s.map(|s| s.title.clone()).unwrap_or_default(),
                        description: s.map(|s| s.description.clone()).unwrap_or_default(),
                        topic_id: s.map(|s| s.topic_id.clone()).unwrap_or_default(),
                        category_id: e.entrant.category_id.clone(),
                        age_group_id: e.entrant.age_group_id.clone(),
                        country: e.entrant.country.clone(),
                        media_link: s.map(|s| s.media_link.clone()),
                        hashtag_attested: s.is_some_and(|s| s.hashtag_attested),
                        provenance: e.provenance.iter().map(|p| p.label()).collect(),
                        community_score: e.community_score.to_string(),
                        criteria: self.matrix.criterion_ids(&e.entrant.age_group_id),
                        my_scores: scores.iter().find(|j| &j.juror_id == juror).map(|j| j.scores.clone()),
                        juror_count: scores.len(),
                    }
                })
                .collect();
            Ok(JuryShortlistView {
                scale_max: self.matrix.scale_max,
                matrix: self.matrix.criteria.keys().map(|g| (g.clone(), self.matrix.criterion_ids(g))).collect(),
                scored_by_me: entries.iter().filter(|r| r.my_scores.is_some()).count(),
                entries,
            })
        })
    }

    pub fn record_score(&self, juror: &JurorId, id: &SubmissionId, scores: BTreeMap<String, i64>) -> Result<JuryScore> {
        self.transact(|st, now| {
            if st.phase != ContestPhase::Jury {
                return Err(ServiceError::WrongPhase {
                    what: "jury scoring",
                    required: ContestPhase::Jury,
                    current: st.phase,
                });
            }
            let shortlist = st.shortlist.as_ref().expect("JURY phase has a shortlist");
            let score = JuryScore { juror_id: juror.clone(), submission_id: id.clone(), scores, recorded_at: now };
            Ok(record_jury_score(&mut st.jury, score, &self.matrix, shortlist)?.clone())
        })
    }

    // Administration

    pub fn advance_phase(&self, actor: &str, target: ContestPhase) -> Result<PhaseView> {
        self.transact(|st, now| {
            if target == st.phase || (target == ContestPhase::Frozen && st.snapshot.is_some()) {
                return Ok(phase_view(st, false));
            }
            if st.phase.successor() != Some(target) {
                return Err(ServiceError::InvalidTransition { from: st.phase, to: target });
            }
            let c = &self.config.contest;
            let not_before = |instant: DateTime<Utc>, strict: bool| {
                let reached = if strict { now > instant } else { now >= instant };
                if reached {
                    Ok(())
                } else {
                    Err(ServiceError::PreconditionFailed {
                        message: format!("{target} cannot start before {instant}"),
                        details: json!({ "not_before": instant, "now": now }),
                    })
                }
            };
            match target {
                ContestPhase::Setup => unreachable!("SETUP has no predecessor"),
                ContestPhase::Open => not_before(c.submission_open, false)?,
                ContestPhase::Closed => not_before(c.submission_close, true)?,
                ContestPhase::Frozen => {
                    not_before(c.metrics_freeze, false)?;
                    let ids: Vec<SubmissionId> = st.book.live_submissions().map(|s| s.submission_id.clone()).collect();
                    let computed = freeze_snapshot(&st.history, &ids, c.metrics_freeze);
                    st.snapshot = Some(settle_snapshot(st.snapshot.as_ref(), computed)?);
                }
                ContestPhase::Jury => {
                    let snapshot = st.snapshot.as_ref().expect("FROZEN phase has a snapshot");
                    let shortlist = build_shortlist(snapshot, &entrants_in(st, snapshot), c);
                    let ctx = PostContext {
                        title: format!(
                            "{} entries from {} countries",
                            shortlist.len(),
                            shortlist.participating_countries
                        ),
                        topic: String::new(),
                        link: format!("{}/leaderboard", self.config.platform_base_url.trim_end_matches('/')),
                    };
                    st.shortlist = Some(shortlist);
                    self.enqueue_event(st, EventKind::ShortlistPublished, "shortlist", &ctx, now);
                }
                ContestPhase::Complete => {
                    let shortlist = st.shortlist.as_ref().expect("JURY phase has a shortlist");
                    let winners = select_winners(shortlist, &st.jury, &self.matrix, c).map_err(|e| match e {
                        WinnerError::UnscoredEntries(ids) => ServiceError::PreconditionFailed {
                            message: format!("{} shortlisted entries have no jury score", ids.len()),
                            details: json!({ "unscored": ids }),
                        },
                        other => other.into(),
                    })?;
                    let titles: Vec<String> = winners
                        .winners
                        .iter()
                        .filter_map(|w| st.book.submission(&w.submission_id).map(|s| s.title.clone()))
                        .collect();
                    let ctx = PostContext {
                        title: titles.join("; "),
                        topic: String::new(),
                        link: format!("{}/winners", self.config.platform_base_url.trim_end_matches('/')),
                    };
                    st.winners = Some(winners);
                    self.enqueue_event(st, EventKind::WinnersAnnounced, "winners", &ctx, now);
                }
            }
            st.enter(target, now, actor);
            Ok(phase_view(st, true))
        })
    }

    pub fn phase_view(&self) -> Result<PhaseView> {
        self.view(|st, _| Ok(phase_view(st, false)))
    }

    pub fn audience_award(&self, id: &SubmissionId) -> Result<WinnerSet> {
        self.transact(|st, now| {
            let current = st.phase;
            let winners = st.winners.as_mut().ok_or(ServiceError::WrongPhase {
                what: "recording the audience award",
                required: ContestPhase::Complete,
                current,
            })?;
            Ok(record_audience_award(winners, id, now)?)
        })
    }

    /// Queues a CONTENT_UPDATED post on every channel.
    pub fn announce(&self, title: &str, link: &str) -> Result<Vec<OutboxPost>> {
        self.transact(|st, now| {
            let subject = format!("update-{}", now.format("%Y%m%dT%H%M%S"));
            let ctx = PostContext { title: title.to_string(), topic: String::new(), link: link.to_string() };
            Ok(self.enqueue_event(st, EventKind::ContentUpdated, &subject, &ctx, now))
        })
    }

    fn enqueue_event(
        &self,
        st: &mut ContestState,
        kind: EventKind,
        subject: &str,
        ctx: &PostContext,
        now: DateTime<Utc>,
    ) -> Vec<OutboxPost> {
        let event = ContestEvent { kind, subject_id: subject.to_string(), occurred_at: now };
        let mut queued = Vec::new();
        for channel in &self.config.channels {
            match render_event_post(&event, ctx, &self.templates, channel, &self.config.contest.required_hashtag) {
                Ok(post) => {
                    if st.outbox.enqueue(post.clone()) {
                        queued.push(post);
                    }
                }
                Err(e) => tracing::warn!(channel = %channel.id, error = %e, "post not generated"),
            }
        }
        queued
    }

    pub fn export(&self, kind: ExportKind) -> Result<Export> {
        self.view(|st, _| {
            let weights = &self.config.contest.score_weights;
            let too_early = |what, required| ServiceError::PhaseTooEarly { what, required, current: st.phase };
            let body = match kind {
                ExportKind::RankingsCountry | ExportKind::RankingsCategory => {
                    let snapshot = st.snapshot.as_ref().ok_or_else(|| too_early("rankings", ContestPhase::Frozen))?;
                    let grouping =
                        if kind == ExportKind::RankingsCountry { Grouping::Country } else { Grouping::Category };
                    rankings_csv(snapshot, &entrants_in(st, snapshot), grouping, weights)
                }
                ExportKind::Winners => {
                    winners_csv(st.winners.as_ref().ok_or_else(|| too_early("winners", ContestPhase::Complete))?)
                }
                ExportKind::Samples => st.history.to_csv(),
                ExportKind::Outbox => st.outbox.to_csv(),
                ExportKind::Snapshot => {
                    let snapshot = st.snapshot.as_ref().ok_or_else(|| too_early("the snapshot", ContestPhase::Frozen))?;
                    snapshot.to_canonical_json()
                }
            };
            let content_type = if kind == ExportKind::Snapshot { "application/json" } else { "text/csv; charset=utf-8" };
            Ok(Export { kind, file_name: kind.file_name(), content_type, body })
        })
    }

    // Background work

    /// One polling cycle over every live submission. Fetching happens
    /// outside the state lock.
    pub fn poll_once(&self, provider: &dyn MetricsProvider) -> Result<PollReport> {
        let (targets, mut tracker) = self.view(|st, _| {
            let targets: Vec<PollTarget> = st
                .book
                .live_submissions()
                .map(|s| PollTarget { submission_id: s.submission_id.clone(), media_link: s.media_link.clone() })
                .collect();
            Ok((targets, st.tracker.clone()))
        })?;
        if targets.is_empty() {
            return Ok(PollReport::default());
        }
        let report = poll_cycle(&targets, provider, self.now(), &mut tracker);
        self.transact(|st, _| {
            st.tracker = tracker;
            for e in st.history.extend(report.samples.iter().cloned()) {
                tracing::warn!(error = %e, "sample rejected");
            }
            Ok(())
        })?;
        for id in &report.newly_flagged {
            tracing::warn!(submission = %id, "metrics unavailable for too many consecutive cycles");
        }
        Ok(report)
    }

    /// Claims due posts, delivers them without holding the state lock and
    /// records the outcomes.
    pub fn drain_outbox(&self, adapter: &dyn DeliveryAdapter, limit: usize, worker: &str) -> Result<DeliveryReport> {
        let claimed = self.transact(|st, now| Ok(st.outbox.claim(limit, now, worker)))?;
        if claimed.is_empty() {
            return Ok(DeliveryReport::default());
        }
        let results: Vec<(String, std::result::Result<(), String>)> =
            claimed.iter().map(|p| (p.post_id.clone(), adapter.deliver(p))).collect();
        let backoff = self.config.backoff;
        self.transact(|st, now| {
            let outcomes: Vec<DeliveryOutcome> = results
                .into_iter()
                .filter_map(|(id, r)| st.outbox.complete(&id, r, now, &backoff))
                .collect();
            Ok(DeliveryReport { outcomes })
        })
    }

    pub fn release_outbox_claims(&self) -> Result<()> {
        self.transact(|st, _| {
            st.outbox.release_claims();
            Ok(())
        })
    }

    /// Full copy of the state, for diagnostics and tests.
    pub fn snapshot_state(&self) -> ContestState {
        self.state.lock().expect("state lock").clone()
    }
}

fn read(path: &Path) -> std::result::Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn new_token() -> String {
    let bytes: [u8; 32] = rand::rng().random();
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Live entrants that are part of the snapshot.
fn entrants_in(st: &ContestState, snapshot: &MetricsSnapshot) -> Vec<Entrant> {
    st.book
        .live_submissions()
        .filter(|s| snapshot.entries.contains_key(&s.submission_id))
        .filter_map(Entrant::from_submission)
        .collect()
}

fn phase_view(st: &ContestState, changed: bool) -> PhaseView {
    let mut diagnostics = Vec::new();
    if let Some(sl) = &st.shortlist {
        diagnostics.extend(sl.diagnostics.iter().cloned());
    }
    if let Some(ws) = &st.winners {
        diagnostics.extend(ws.diagnostics.iter().cloned());
    }
    PhaseView {
        phase: st.phase,
        changed,
        log: st.phase_log.clone(),
        snapshot: st.snapshot.clone(),
        shortlist_size: st.shortlist.as_ref().map(|s| s.len()),
        winner_count: st.winners.as_ref().map(|w| w.winners.len()),
        diagnostics,
    }
}

pub fn compute_stats(st: &ContestState, config: &ServiceConfig) -> StatsView {
    let mut per_country: BTreeMap<String, usize> = BTreeMap::new();
    let mut per_category: BTreeMap<String, usize> =
        enumerate_categories(&config.contest).iter().map(|c| (c.id(), 0)).collect();
    let mut participants = std::collections::BTreeSet::new();
    let mut total = 0;
    for s in st.book.live_submissions() {
        total += 1;
        participants.insert(s.account_id.clone());
        if let Some(c) = &s.country {
            *per_country.entry(c.clone()).or_default() += 1;
        }
        if let Some(c) = &s.category_id {
            *per_category.entry(c.clone()).or_default() += 1;
        }
    }
    let distinct = per_country.len();
    StatsView {
        phase: st.phase,
        registered_accounts: st.book.accounts().count(),
        total_participants: participants.len(),
        total_submissions: total,
        distinct_countries: distinct,
        per_country,
        per_category,
        target_min_countries: config.contest.target_min_countries,
        below_country_target: distinct < config.contest.target_min_countries as usize,
    }
}
