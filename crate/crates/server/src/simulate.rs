//! Offline contest replay on virtual time: participants submit, metrics are
//! polled from a fixture, the jury scores and every export is produced.
//! Outputs depend only on the input documents, never on their order.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use contest_core::credentials::Argon2Hasher;
use contest_core::metrics::{FixtureRecord, SimulatedProvider};
use contest_core::rating::{Diagnostic, WinnerSet};
use contest_core::submission::{DraftInput, ParticipationMode, Profile};
use contest_core::syndication::{DeliveryAdapter, OutboxPost, TemplateSet};
use contest_core::{validate_media_link, AccountId, JurorId, SubmissionId, TopicCatalog};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::ManualClock;
use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::service::{ExportKind, Service, StatsView};
use crate::state::ContestPhase;
use crate::store::MemoryStore;

pub const SIMULATION_ACTOR: &str = "simulator";
const SIMULATION_PASSWORD: &str = "simulated participant";

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("{path}: {message}")]
    Input { path: String, message: String },
    #[error("participant {email}: {source}")]
    Participant { email: String, source: ServiceError },
    #[error("{step}: {source}")]
    Step { step: &'static str, source: ServiceError },
    #[error("writing {path}: {message}")]
    Output { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSubmission {
    pub title: String,
    #[serde(default)]
    pub description: String,
    pub topic_id: String,
    pub media_type_id: String,
    pub media_url: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioParticipant {
    pub email: String,
    pub first_name: String,
    pub last_name: String,
    pub birth_date: NaiveDate,
    pub country: String,
    #[serde(default)]
    pub group_member_names: Vec<String>,
    pub submission: ScenarioSubmission,
    /// Seconds after submission_open at which the entry is finalized.
    pub submit_at: i64,
}

/// Participants, the metric samples the platforms will report, and an
/// optional audience pick (participant e-mail or media URL).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub participants: Vec<ScenarioParticipant>,
    pub samples: Vec<FixtureRecord>,
    #[serde(default)]
    pub audience_award: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JuryEntry {
    #[serde(default)]
    pub participant: Option<String>,
    #[serde(default)]
    pub media_url: Option<String>,
    pub scores: BTreeMap<String, i64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JuryFile {
    pub juror_id: String,
    pub scores: Vec<JuryEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub phase: ContestPhase,
    pub participants: usize,
    pub finalized: usize,
    pub samples_recorded: usize,
    pub shortlist_size: usize,
    pub winner_count: usize,
    pub categories_awarded: Vec<String>,
    pub stats: StatsView,
    pub posts_delivered: usize,
    pub diagnostics: Vec<Diagnostic>,
    /// Inputs that could not be applied, for example a jury line for an
    /// entry that is not on the shortlist.
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub summary: SimulationSummary,
    pub winners: WinnerSet,
    /// File name to content, in the order they are written.
    pub files: BTreeMap<String, String>,
}

impl SimulationOutcome {
    pub fn write_to(&self, dir: &Path) -> Result<(), SimulationError> {
        let fail = |p: &Path, e: std::io::Error| SimulationError::Output { path: p.display().to_string(), message: e.to_string() };
        std::fs::create_dir_all(dir).map_err(|e| fail(dir, e))?;
        for (name, body) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| fail(&path, e))?;
        }
        Ok(())
    }
}

fn input_error(path: &Path, message: impl ToString) -> SimulationError {
    SimulationError::Input { path: path.display().to_string(), message: message.to_string() }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, SimulationError> {
    let text = std::fs::read_to_string(path).map_err(|e| input_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| input_error(path, e))
}

pub fn load_jury_file(path: &Path) -> Result<JuryFile, SimulationError> {
    let text = std::fs::read_to_string(path).map_err(|e| input_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| input_error(path, e))
}

/// Delivery that always succeeds and keeps nothing.
struct AcceptAll;

impl DeliveryAdapter for AcceptAll {
    fn deliver(&self, _: &OutboxPost) -> Result<(), String> {
        Ok(())
    }
}

enum Event<'a> {
    Finalize(&'a ScenarioParticipant),
    Poll,
}

/// Runs the whole contest. The service is built on an in-memory store, a
/// manual clock starting at submission_open and a cheap password hasher.
pub fn run(
    config: &ServiceConfig,
    catalog: TopicCatalog,
    templates: TemplateSet,
    scenario: &Scenario,
    jury: &[JuryFile],
) -> Result<SimulationOutcome, SimulationError> {
    let contest = &config.contest;
    let epoch = contest.submission_open;
    let clock = Arc::new(ManualClock::new(epoch));
    let service = Service::new(
        config.clone(),
        catalog,
        templates,
        Arc::new(MemoryStore::new()),
        clock.clone(),
        Arc::new(Argon2Hasher::low_cost()),
    )
    .map_err(|source| SimulationError::Step { step: "startup", source })?;
    let provider = SimulatedProvider::from_records(&scenario.samples, epoch)
        .map_err(|e| SimulationError::Input { path: "scenario samples".into(), message: e.to_string() })?;
    let at = |t: i64| epoch + Duration::seconds(t);

    let mut participants: Vec<&ScenarioParticipant> = scenario.participants.iter().collect();
    participants.sort_by(|a, b| a.email.cmp(&b.email));
    let mut skipped = Vec::new();

    // Accounts, profiles and drafts all exist from the first instant.
    let mut drafts: BTreeMap<&str, (AccountId, SubmissionId)> = BTreeMap::new();
    for p in &participants {
        let wrap = |source| SimulationError::Participant { email: p.email.clone(), source };
        let account = service.register(&p.first_name, &p.last_name, &p.email, SIMULATION_PASSWORD).map_err(wrap)?;
        let mode = if p.group_member_names.is_empty() { ParticipationMode::Individual } else { ParticipationMode::Group };
        let profile = Profile {
            birth_date: p.birth_date,
            country_of_residence: p.country.clone(),
            participation_mode: mode,
            group_member_names: p.group_member_names.clone(),
        };
        let eligibility = service.put_profile(&account, profile).map_err(wrap)?;
        if !eligibility.eligible {
            let reasons: Vec<String> = eligibility.reasons.iter().map(|r| r.code()).collect();
            skipped.push(format!("{}: not eligible ({})", p.email, reasons.join(", ")));
            continue;
        }
        let s = &p.submission;
        let input = DraftInput {
            title: s.title.clone(),
            description: s.description.clone(),
            topic_id: s.topic_id.clone(),
            media_type_id: s.media_type_id.clone(),
            media_url: s.media_url.clone(),
        };
        let view = service.create_draft(&account, &input).map_err(wrap)?;
        drafts.insert(p.email.as_str(), (account, view.submission_id));
    }

    // Finalizations and poll cycles merged on the virtual timeline; at equal
    // times entries are finalized before the poll sees them.
    let mut timeline: Vec<(i64, u8, &str, Event)> = Vec::new();
    for p in &participants {
        if drafts.contains_key(p.email.as_str()) {
            timeline.push((p.submit_at, 0, p.email.as_str(), Event::Finalize(p)));
        }
    }
    for t in provider.virtual_times() {
        timeline.push((t, 1, "", Event::Poll));
    }
    timeline.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));

    let mut finalized = 0;
    for (t, _, _, event) in &timeline {
        clock.set(at(*t).max(clock_now(&clock)));
        match event {
            Event::Finalize(p) => {
                let (account, id) = &drafts[p.email.as_str()];
                match service.finalize(account, id, true) {
                    Ok(_) => finalized += 1,
                    Err(e) => skipped.push(format!("{}: finalize at t={t} failed with {}", p.email, e.code())),
                }
            }
            Event::Poll => {
                service.poll_once(&provider).map_err(|source| SimulationError::Step { step: "poll", source })?;
            }
        }
    }

    let end = clock_now(&clock).max(contest.metrics_freeze);
    clock.set(end);
    let step = |step: &'static str| move |source| SimulationError::Step { step, source };
    for target in [ContestPhase::Closed, ContestPhase::Frozen, ContestPhase::Jury] {
        service.advance_phase(SIMULATION_ACTOR, target).map_err(step("phase change"))?;
    }

    let shortlist = service
        .snapshot_state()
        .shortlist
        .expect("JURY phase has a shortlist");
    let by_email: BTreeMap<String, &SubmissionId> =
        drafts.iter().map(|(e, (_, id))| (e.trim().to_lowercase(), id)).collect();
    let by_link: BTreeMap<(contest_core::Platform, String), SubmissionId> = service
        .snapshot_state()
        .book
        .live_submissions()
        .map(|s| ((s.media_link.platform, s.media_link.external_id.clone()), s.submission_id.clone()))
        .collect();
    let resolve = |e: &JuryEntry| -> Option<SubmissionId> {
        if let Some(email) = &e.participant {
            return by_email.get(email.trim().to_lowercase().as_str()).map(|id| (*id).clone());
        }
        let link = validate_media_link(e.media_url.as_deref()?).ok()?;
        by_link.get(&(link.platform, link.external_id)).cloned()
    };

    let mut files: Vec<&JuryFile> = jury.iter().collect();
    files.sort_by(|a, b| a.juror_id.cmp(&b.juror_id));
    for file in files {
        let juror = JurorId::from(file.juror_id.as_str());
        for entry in &file.scores {
            let label = entry.participant.clone().or_else(|| entry.media_url.clone()).unwrap_or_default();
            let Some(id) = resolve(entry).filter(|id| shortlist.contains(id)) else {
                skipped.push(format!("jury {}: {label} is not on the shortlist", file.juror_id));
                continue;
            };
            if let Err(e) = service.record_score(&juror, &id, entry.scores.clone()) {
                skipped.push(format!("jury {}: {label} rejected with {}", file.juror_id, e.code()));
            }
        }
    }
    service.advance_phase(SIMULATION_ACTOR, ContestPhase::Complete).map_err(step("phase change"))?;

    if let Some(pick) = &scenario.audience_award {
        let entry = if pick.contains('@') {
            JuryEntry { participant: Some(pick.clone()), media_url: None, scores: BTreeMap::new() }
        } else {
            JuryEntry { participant: None, media_url: Some(pick.clone()), scores: BTreeMap::new() }
        };
        match resolve(&entry).map(|id| service.audience_award(&id)) {
            Some(Ok(_)) => {}
            Some(Err(e)) => skipped.push(format!("audience award {pick}: {}", e.code())),
            None => skipped.push(format!("audience award {pick}: no such entry")),
        }
    }

    let mut delivered = 0;
    loop {
        let report = service.drain_outbox(&AcceptAll, 100, SIMULATION_ACTOR).map_err(step("outbox"))?;
        if report.outcomes.is_empty() {
            break;
        }
        delivered += report.delivered();
    }

    let mut out = BTreeMap::new();
    let names = [
        (ExportKind::RankingsCountry, "rankings_by_country.csv"),
        (ExportKind::RankingsCategory, "rankings_by_category.csv"),
        (ExportKind::Winners, "winners.csv"),
        (ExportKind::Samples, "samples.csv"),
        (ExportKind::Outbox, "outbox.csv"),
        (ExportKind::Snapshot, "snapshot.json"),
    ];
    for (kind, name) in names {
        out.insert(name.to_string(), service.export(kind).map_err(step("export"))?.body);
    }
    let state = service.snapshot_state();
    let winners = state.winners.clone().expect("COMPLETE phase has winners");
    out.insert("shortlist.json".into(), pretty(&shortlist));

    let mut diagnostics = shortlist.diagnostics.clone();
    diagnostics.extend(winners.diagnostics.iter().cloned());
    let summary = SimulationSummary {
        phase: state.phase,
        participants: participants.len(),
        finalized,
        samples_recorded: state.history.len(),
        shortlist_size: shortlist.len(),
        winner_count: winners.winners.len(),
        categories_awarded: winners.winners.iter().map(|w| w.category_id.clone()).collect::<BTreeSet<_>>().into_iter().collect(),
        stats: service.stats().map_err(step("stats"))?,
        posts_delivered: delivered,
        diagnostics,
        skipped,
    };
    out.insert("summary.json".into(), pretty(&summary));
    Ok(SimulationOutcome { summary, winners, files: out })
}

fn clock_now(clock: &ManualClock) -> DateTime<Utc> {
    crate::clock::Clock::now(clock)
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}
