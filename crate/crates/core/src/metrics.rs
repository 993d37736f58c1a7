//! Community-metrics ingestion: pluggable providers, polling cycles,
//! append-only sample history and the frozen snapshot used for ranking.

use std::collections::BTreeMap;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::SubmissionId;
use crate::media::{validate_media_link, MediaLink, Platform};

pub const DEFAULT_FAILURE_THRESHOLD: u32 = 5;
pub const NO_DATA_PROVIDER: &str = "none";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Counts {
    pub views: u64,
    pub likes: u64,
    pub shares: u64,
}

impl Counts {
    pub fn new(views: u64, likes: u64, shares: u64) -> Self {
        Counts { views, likes, shares }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MetricsSample {
    pub submission_id: SubmissionId,
    pub observed_at: DateTime<Utc>,
    pub views: u64,
    pub likes: u64,
    pub shares: u64,
    pub provider_id: String,
}

impl MetricsSample {
    pub fn counts(&self) -> Counts {
        Counts::new(self.views, self.likes, self.shares)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("metrics unavailable: {0}")]
pub struct Unavailable(pub String);

/// Source of view/like/share counters for a hosted contribution. `fetch`
/// never changes anything on the platform.
pub trait MetricsProvider: Send + Sync {
    fn provider_id(&self) -> &str;
    fn fetch(&self, link: &MediaLink, at: DateTime<Utc>) -> Result<Counts, Unavailable>;
}

/// Placeholder for a live platform adapter; always unavailable.
#[derive(Debug, Clone)]
pub struct LivePlatformStub {
    platform: Platform,
    provider_id: String,
}

impl LivePlatformStub {
    pub fn new(platform: Platform) -> Self {
        LivePlatformStub { platform, provider_id: format!("live-{}", platform).to_lowercase() }
    }
}

impl MetricsProvider for LivePlatformStub {
    fn provider_id(&self) -> &str {
        &self.provider_id
    }

    fn fetch(&self, link: &MediaLink, _at: DateTime<Utc>) -> Result<Counts, Unavailable> {
        if link.platform != self.platform {
            return Err(Unavailable(format!("{} stub cannot serve {} links", self.platform, link.platform)));
        }
        Err(Unavailable(format!(
            "no live {} adapter is configured; counters for {} cannot be collected",
            self.platform, link.canonical_url
        )))
    }
}

/// Routes each link to the inert stub of its platform.
#[derive(Debug, Clone)]
pub struct LiveStubs {
    youtube: LivePlatformStub,
    slideshare: LivePlatformStub,
}

impl Default for LiveStubs {
    fn default() -> Self {
        LiveStubs {
            youtube: LivePlatformStub::new(Platform::Youtube),
            slideshare: LivePlatformStub::new(Platform::Slideshare),
        }
    }
}

impl MetricsProvider for LiveStubs {
    fn provider_id(&self) -> &str {
        "live"
    }

    fn fetch(&self, link: &MediaLink, at: DateTime<Utc>) -> Result<Counts, Unavailable> {
        match link.platform {
            Platform::Youtube => self.youtube.fetch(link, at),
            Platform::Slideshare => self.slideshare.fetch(link, at),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FixtureError {
    #[error("fixture does not parse: {0}")]
    Parse(String),
    #[error("fixture row {row}: {reason}")]
    BadRow { row: usize, reason: String },
    #[error("fixture has two rows for {url} at virtual time {virtual_time}")]
    Ambiguous { url: String, virtual_time: i64 },
}

impl FixtureError {
    pub fn code(&self) -> &'static str {
        "PARSE_ERROR"
    }
}

/// One line of a simulator fixture.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureRecord {
    pub url: String,
    pub virtual_time: i64,
    pub views: u64,
    pub likes: u64,
    pub shares: u64,
}

/// Parses a fixture given either as a JSON list or as JSON lines.
pub fn parse_fixture(text: &str) -> Result<Vec<FixtureRecord>, FixtureError> {
    let trimmed = text.trim_start();
    if trimmed.starts_with('[') {
        return serde_json::from_str(trimmed).map_err(|e| FixtureError::Parse(e.to_string()));
    }
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| FixtureError::BadRow { row: i + 1, reason: e.to_string() })
        })
        .collect()
}

/// Deterministic provider replaying a fixture. Virtual time `t` is the
/// instant `epoch + t` seconds; a fetch returns the latest row at or
/// before that virtual time.
#[derive(Debug, Clone)]
pub struct SimulatedProvider {
    epoch: DateTime<Utc>,
    rows: BTreeMap<(Platform, String), BTreeMap<i64, Counts>>,
}

impl SimulatedProvider {
    pub fn from_records(records: &[FixtureRecord], epoch: DateTime<Utc>) -> Result<Self, FixtureError> {
        let mut rows: BTreeMap<(Platform, String), BTreeMap<i64, Counts>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            let link = validate_media_link(&r.url)
                .map_err(|e| FixtureError::BadRow { row: i + 1, reason: e.to_string() })?;
            let series = rows.entry((link.platform, link.external_id)).or_default();
            if series.insert(r.virtual_time, Counts::new(r.views, r.likes, r.shares)).is_some() {
                return Err(FixtureError::Ambiguous { url: r.url.clone(), virtual_time: r.virtual_time });
            }
        }
        Ok(SimulatedProvider { epoch, rows })
    }

    pub fn from_fixture(text: &str, epoch: DateTime<Utc>) -> Result<Self, FixtureError> {
        Self::from_records(&parse_fixture(text)?, epoch)
    }

    pub fn virtual_time(&self, at: DateTime<Utc>) -> i64 {
        (at - self.epoch).num_seconds()
    }

    pub fn instant(&self, virtual_time: i64) -> DateTime<Utc> {
        self.epoch + chrono::Duration::seconds(virtual_time)
    }

    /// Every virtual time mentioned by the fixture, ascending.
    pub fn virtual_times(&self) -> Vec<i64> {
        let mut times: Vec<i64> = self.rows.values().flat_map(|s| s.keys().copied()).collect();
        times.sort_unstable();
        times.dedup();
        times
    }
}

impl MetricsProvider for SimulatedProvider {
    fn provider_id(&self) -> &str {
        "simulated"
    }

    fn fetch(&self, link: &MediaLink, at: DateTime<Utc>) -> Result<Counts, Unavailable> {
        let t = self.virtual_time(at);
        self.rows
            .get(&(link.platform, link.external_id.clone()))
            .and_then(|series| series.range(..=t).next_back())
            .map(|(_, c)| *c)
            .ok_or_else(|| Unavailable(format!("no fixture data for {} at t={t}", link.canonical_url)))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollTarget {
    pub submission_id: SubmissionId,
    pub media_link: MediaLink,
}

/// Consecutive-failure counters per submission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureTracker {
    threshold: u32,
    consecutive: BTreeMap<SubmissionId, u32>,
}

impl Default for FailureTracker {
    fn default() -> Self {
        Self::new(DEFAULT_FAILURE_THRESHOLD)
    }
}

impl FailureTracker {
    pub fn new(threshold: u32) -> Self {
        FailureTracker { threshold: threshold.max(1), consecutive: BTreeMap::new() }
    }

    pub fn consecutive_failures(&self, id: &SubmissionId) -> u32 {
        self.consecutive.get(id).copied().unwrap_or(0)
    }

    pub fn is_flagged(&self, id: &SubmissionId) -> bool {
        self.consecutive_failures(id) >= self.threshold
    }

    pub fn flagged(&self) -> Vec<SubmissionId> {
        self.consecutive.iter().filter(|(_, &n)| n >= self.threshold).map(|(id, _)| id.clone()).collect()
    }

    /// Returns true when this failure crosses the threshold.
    fn record_failure(&mut self, id: &SubmissionId) -> bool {
        let n = self.consecutive.entry(id.clone()).or_insert(0);
        *n += 1;
        *n == self.threshold
    }

    fn record_success(&mut self, id: &SubmissionId) {
        self.consecutive.remove(id);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollFailure {
    pub submission_id: SubmissionId,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PollReport {
    pub samples: Vec<MetricsSample>,
    pub failures: Vec<PollFailure>,
    /// Submissions that reached the consecutive-failure threshold this cycle.
    pub newly_flagged: Vec<SubmissionId>,
}

/// Fetches counters for every target. Provider errors are recorded per
/// submission and never abort the cycle.
pub fn poll_cycle(
    targets: &[PollTarget],
    provider: &dyn MetricsProvider,
    now: DateTime<Utc>,
    tracker: &mut FailureTracker,
) -> PollReport {
    let mut report = PollReport::default();
    for target in targets {
        match provider.fetch(&target.media_link, now) {
            Ok(c) => {
                tracker.record_success(&target.submission_id);
                report.samples.push(MetricsSample {
                    submission_id: target.submission_id.clone(),
                    observed_at: now,
                    views: c.views,
                    likes: c.likes,
                    shares: c.shares,
                    provider_id: provider.provider_id().to_string(),
                });
            }
            Err(Unavailable(message)) => {
                if tracker.record_failure(&target.submission_id) {
                    report.newly_flagged.push(target.submission_id.clone());
                }
                report.failures.push(PollFailure { submission_id: target.submission_id.clone(), message });
            }
        }
    }
    report
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HistoryError {
    #[error("sample for {id} at {at} is not newer than the last recorded sample")]
    OutOfOrder { id: SubmissionId, at: DateTime<Utc> },
}

/// Append-only sample history, strictly ordered by observation time per
/// submission.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleHistory {
    series: BTreeMap<SubmissionId, Vec<MetricsSample>>,
}

impl SampleHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, sample: MetricsSample) -> Result<(), HistoryError> {
        let series = self.series.entry(sample.submission_id.clone()).or_default();
        if let Some(last) = series.last() {
            if sample.observed_at <= last.observed_at {
                return Err(HistoryError::OutOfOrder { id: sample.submission_id, at: sample.observed_at });
            }
        }
        series.push(sample);
        Ok(())
    }

    /// Appends every sample of a cycle; out-of-order samples are returned
    /// rather than stored.
    pub fn extend(&mut self, samples: impl IntoIterator<Item = MetricsSample>) -> Vec<HistoryError> {
        samples.into_iter().filter_map(|s| self.append(s).err()).collect()
    }

    pub fn series(&self, id: &SubmissionId) -> &[MetricsSample] {
        self.series.get(id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn samples(&self) -> impl Iterator<Item = &MetricsSample> {
        self.series.values().flatten()
    }

    pub fn len(&self) -> usize {
        self.series.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Delimited export, one row per sample, ordered by submission then time.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["submission_id", "observed_at", "views", "likes", "shares", "provider_id"])
            .expect("in-memory write");
        for s in self.samples() {
            w.write_record([
                s.submission_id.as_str(),
                &s.observed_at.to_rfc3339_opts(SecondsFormat::Secs, true),
                &s.views.to_string(),
                &s.likes.to_string(),
                &s.shares.to_string(),
                &s.provider_id,
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub sample: MetricsSample,
    /// No sample existed at or before the freeze; counters are zero.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_data: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsSnapshot {
    pub frozen_at: DateTime<Utc>,
    pub entries: BTreeMap<SubmissionId, SnapshotEntry>,
}

impl MetricsSnapshot {
    pub fn counts(&self, id: &SubmissionId) -> Option<Counts> {
        self.entries.get(id).map(|e| e.sample.counts())
    }

    pub fn no_data(&self) -> impl Iterator<Item = &SubmissionId> {
        self.entries.iter().filter(|(_, e)| e.no_data).map(|(id, _)| id)
    }

    /// Canonical serialized form; equal snapshots serialize to equal bytes.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }
}

/// Picks, for every live submission, the latest sample observed at or
/// before `freeze_at`; submissions without one get a zero sample flagged
/// as no-data.
pub fn freeze_snapshot<'a>(
    history: &SampleHistory,
    live: impl IntoIterator<Item = &'a SubmissionId>,
    freeze_at: DateTime<Utc>,
) -> MetricsSnapshot {
    let entries = live
        .into_iter()
        .map(|id| {
            let latest = history.series(id).iter().rev().find(|s| s.observed_at <= freeze_at);
            let entry = match latest {
                Some(sample) => SnapshotEntry { sample: sample.clone(), no_data: false },
                None => SnapshotEntry {
                    sample: MetricsSample {
                        submission_id: id.clone(),
                        observed_at: freeze_at,
                        views: 0,
                        likes: 0,
                        shares: 0,
                        provider_id: NO_DATA_PROVIDER.to_string(),
                    },
                    no_data: true,
                },
            };
            (id.clone(), entry)
        })
        .collect();
    MetricsSnapshot { frozen_at: freeze_at, entries }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("a different snapshot frozen at {0} already exists")]
pub struct AlreadyFrozen(pub DateTime<Utc>);

impl AlreadyFrozen {
    pub fn code(&self) -> &'static str {
        "ALREADY_FROZEN"
    }
}

/// Keeps the first persisted snapshot: an identical recomputation returns
/// it, a diverging one is rejected.
pub fn settle_snapshot(
    existing: Option<&MetricsSnapshot>,
    computed: MetricsSnapshot,
) -> Result<MetricsSnapshot, AlreadyFrozen> {
    match existing {
        None => Ok(computed),
        Some(prev) if *prev == computed => Ok(prev.clone()),
        Some(prev) => Err(AlreadyFrozen(prev.frozen_at)),
    }
}
