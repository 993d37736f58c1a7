use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Mutex;

use chrono::{DateTime, Duration, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PostState {
    Pending,
    Delivered,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboxPost {
    pub post_id: String,
    pub channel_id: String,
    pub body: String,
    pub created_at: DateTime<Utc>,
    pub state: PostState,
    #[serde(default)]
    pub attempts: u32,
    #[serde(default)]
    pub next_attempt_at: Option<DateTime<Utc>>,
    #[serde(default)]
    pub last_error: Option<String>,
    #[serde(default)]
    pub delivered_at: Option<DateTime<Utc>>,
    /// Worker currently delivering this post.
    #[serde(default)]
    pub claimed_by: Option<String>,
}

impl OutboxPost {
    pub fn pending(post_id: String, channel_id: String, body: String, created_at: DateTime<Utc>) -> Self {
        OutboxPost {
            post_id,
            channel_id,
            body,
            created_at,
            state: PostState::Pending,
            attempts: 0,
            next_attempt_at: None,
            last_error: None,
            delivered_at: None,
            claimed_by: None,
        }
    }

    fn is_due(&self, now: DateTime<Utc>) -> bool {
        self.claimed_by.is_none()
            && self.state != PostState::Delivered
            && self.next_attempt_at.is_none_or(|t| t <= now)
    }
}

/// Capped exponential retry delay: `base * 2^(attempts-1)`, at most `cap`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackoffPolicy {
    pub base_secs: i64,
    pub cap_secs: i64,
}

impl Default for BackoffPolicy {
    fn default() -> Self {
        BackoffPolicy { base_secs: 60, cap_secs: 3600 }
    }
}

impl BackoffPolicy {
    pub fn delay(&self, attempts: u32) -> Duration {
        let exp = attempts.saturating_sub(1).min(32);
        let secs = self.base_secs.saturating_mul(1i64 << exp).min(self.cap_secs);
        Duration::seconds(secs.max(0))
    }
}

/// Delivery to one external channel.
pub trait DeliveryAdapter: Send + Sync {
    fn deliver(&self, post: &OutboxPost) -> Result<(), String>;
}

/// Appends delivered posts as JSON lines to a file.
pub struct FileSink {
    file: Mutex<File>,
}

impl FileSink {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(FileSink { file: Mutex::new(file) })
    }
}

impl DeliveryAdapter for FileSink {
    fn deliver(&self, post: &OutboxPost) -> Result<(), String> {
        let line = serde_json::json!({
            "post_id": post.post_id,
            "channel_id": post.channel_id,
            "body": post.body,
        });
        let mut file = self.file.lock().map_err(|_| "sink poisoned".to_string())?;
        writeln!(file, "{line}").map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DeliveryOutcome {
    Delivered { post_id: String },
    Failed { post_id: String, error: String, next_attempt_at: DateTime<Utc> },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeliveryReport {
    pub outcomes: Vec<DeliveryOutcome>,
}

impl DeliveryReport {
    pub fn delivered(&self) -> usize {
        self.outcomes.iter().filter(|o| matches!(o, DeliveryOutcome::Delivered { .. })).count()
    }

    pub fn failed(&self) -> usize {
        self.outcomes.len() - self.delivered()
    }
}

/// Persisted posts awaiting or done with delivery.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outbox {
    posts: BTreeMap<String, OutboxPost>,
}

impl Outbox {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false when a post with the same id is already queued.
    pub fn enqueue(&mut self, post: OutboxPost) -> bool {
        if self.posts.contains_key(&post.post_id) {
            return false;
        }
        self.posts.insert(post.post_id.clone(), post);
        true
    }

    pub fn get(&self, post_id: &str) -> Option<&OutboxPost> {
        self.posts.get(post_id)
    }

    /// Posts ordered by creation time, then id.
    pub fn posts(&self) -> Vec<&OutboxPost> {
        let mut list: Vec<&OutboxPost> = self.posts.values().collect();
        list.sort_by(|a, b| a.created_at.cmp(&b.created_at).then_with(|| a.post_id.cmp(&b.post_id)));
        list
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    /// Marks up to `limit` due posts as claimed by `worker` and returns them.
    /// Claimed posts are invisible to other claims until completed.
    pub fn claim(&mut self, limit: usize, now: DateTime<Utc>, worker: &str) -> Vec<OutboxPost> {
        let due: Vec<String> = self
            .posts()
            .into_iter()
            .filter(|p| p.is_due(now))
            .take(limit)
            .map(|p| p.post_id.clone())
            .collect();
        due.iter()
            .map(|id| {
                let post = self.posts.get_mut(id).expect("listed above");
                post.claimed_by = Some(worker.to_string());
                post.clone()
            })
            .collect()
    }

    pub fn complete(
        &mut self,
        post_id: &str,
        result: Result<(), String>,
        now: DateTime<Utc>,
        policy: &BackoffPolicy,
    ) -> Option<DeliveryOutcome> {
        let post = self.posts.get_mut(post_id)?;
        post.claimed_by = None;
        post.attempts += 1;
        Some(match result {
            Ok(()) => {
                post.state = PostState::Delivered;
                post.delivered_at = Some(now);
                post.next_attempt_at = None;
                post.last_error = None;
                DeliveryOutcome::Delivered { post_id: post_id.to_string() }
            }
            Err(error) => {
                let next = now + policy.delay(post.attempts);
                post.state = PostState::Failed;
                post.next_attempt_at = Some(next);
                post.last_error = Some(error.clone());
                DeliveryOutcome::Failed { post_id: post_id.to_string(), error, next_attempt_at: next }
            }
        })
    }

    /// Drops claims left behind by a worker that stopped mid-delivery.
    pub fn release_claims(&mut self) {
        for post in self.posts.values_mut() {
            post.claimed_by = None;
        }
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["post_id", "channel_id", "state", "attempts", "created_at", "body"])
            .expect("in-memory write");
        for p in self.posts() {
            let state = match p.state {
                PostState::Pending => "PENDING",
                PostState::Delivered => "DELIVERED",
                PostState::Failed => "FAILED",
            };
            w.write_record([
                p.post_id.as_str(),
                &p.channel_id,
                state,
                &p.attempts.to_string(),
                &p.created_at.to_rfc3339_opts(SecondsFormat::Secs, true),
                &p.body,
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
    }
}

/// Attempts delivery of at most `limit` due posts. Adapter failures are
/// recorded per post with a retry time and never stop the drain.
pub fn drain_outbox(
    outbox: &mut Outbox,
    adapter: &dyn DeliveryAdapter,
    limit: usize,
    now: DateTime<Utc>,
    policy: &BackoffPolicy,
) -> DeliveryReport {
    let claimed = outbox.claim(limit, now, "drain");
    let outcomes = claimed
        .iter()
        .filter_map(|post| outbox.complete(&post.post_id, adapter.deliver(post), now, policy))
        .collect();
    DeliveryReport { outcomes }
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::{AtomicUsize, Ordering};

    use chrono::TimeZone;

    use super::*;

    fn t(secs: i64) -> DateTime<Utc> {
        Utc.with_ymd_and_hms(2017, 3, 1, 0, 0, 0).unwrap() + Duration::seconds(secs)
    }

    fn outbox(n: usize) -> Outbox {
        let mut o = Outbox::new();
        for i in 0..n {
            o.enqueue(OutboxPost::pending(format!("p{i}"), "microblog".into(), format!("body {i}"), t(i as i64)));
        }
        o
    }

    #[derive(Default)]
    struct Counting(AtomicUsize);
    impl DeliveryAdapter for Counting {
        fn deliver(&self, _: &OutboxPost) -> Result<(), String> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok(())
        }
    }

    struct Down;
    impl DeliveryAdapter for Down {
        fn deliver(&self, _: &OutboxPost) -> Result<(), String> {
            Err("connection refused".into())
        }
    }

    #[test]
    fn healthy_adapter_delivers_everything() {
        let mut o = outbox(3);
        let adapter = Counting::default();
        let report = drain_outbox(&mut o, &adapter, 10, t(100), &BackoffPolicy::default());
        assert_eq!(report.delivered(), 3);
        assert!(o.posts().iter().all(|p| p.state == PostState::Delivered));
        // Nothing left to do.
        let again = drain_outbox(&mut o, &adapter, 10, t(200), &BackoffPolicy::default());
        assert!(again.outcomes.is_empty());
        assert_eq!(adapter.0.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn failures_get_capped_exponential_retry() {
        let policy = BackoffPolicy { base_secs: 10, cap_secs: 35 };
        let mut o = outbox(3);
        let report = drain_outbox(&mut o, &Down, 10, t(100), &policy);
        assert_eq!(report.failed(), 3);
        assert!(o.posts().iter().all(|p| p.state == PostState::Failed && p.attempts == 1));
        assert_eq!(o.get("p0").unwrap().next_attempt_at, Some(t(110)));

        // Not yet due.
        assert!(drain_outbox(&mut o, &Down, 10, t(105), &policy).outcomes.is_empty());
        drain_outbox(&mut o, &Down, 10, t(110), &policy);
        assert_eq!(o.get("p0").unwrap().next_attempt_at, Some(t(130)));
        drain_outbox(&mut o, &Down, 10, t(130), &policy);
        assert_eq!(o.get("p0").unwrap().next_attempt_at, Some(t(165)));
        assert_eq!(o.get("p0").unwrap().last_error.as_deref(), Some("connection refused"));

        let report = drain_outbox(&mut o, &Counting::default(), 10, t(165), &policy);
        assert_eq!(report.delivered(), 3);
    }

    #[test]
    fn limit_bounds_attempts() {
        let mut o = outbox(3);
        let adapter = Counting::default();
        let report = drain_outbox(&mut o, &adapter, 1, t(100), &BackoffPolicy::default());
        assert_eq!(report.outcomes.len(), 1);
        assert_eq!(report.outcomes[0], DeliveryOutcome::Delivered { post_id: "p0".into() });
        assert_eq!(adapter.0.load(Ordering::SeqCst), 1);
    }

    #[test]
    fn claimed_posts_are_not_claimed_twice() {
        let mut o = outbox(3);
        let first = o.claim(2, t(100), "w1");
        let second = o.claim(5, t(100), "w2");
        assert_eq!(first.len(), 2);
        assert_eq!(second.len(), 1);
        assert_eq!(second[0].post_id, "p2");
        assert!(o.claim(5, t(100), "w3").is_empty());
        o.release_claims();
        assert_eq!(o.claim(5, t(100), "w4").len(), 3);
    }

    #[test]
    fn duplicate_ids_are_ignored() {
        let mut o = outbox(1);
        assert!(!o.enqueue(OutboxPost::pending("p0".into(), "feed".into(), "other".into(), t(9))));
        assert_eq!(o.len(), 1);
        assert_eq!(o.get("p0").unwrap().body, "body 0");
    }

    #[test]
    fn file_sink_appends_json_lines() {
        let path = std::env::temp_dir().join(format!("sink-{}.jsonl", std::process::id()));
        let _ = std::fs::remove_file(&path);
        let sink = FileSink::open(&path).unwrap();
        let mut o = outbox(2);
        drain_outbox(&mut o, &sink, 10, t(10), &BackoffPolicy::default());
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.lines().next().unwrap().contains("\"post_id\":\"p0\""));
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn backoff_delays() {
        let p = BackoffPolicy { base_secs: 60, cap_secs: 3600 };
        let secs: Vec<i64> = (1..=8).map(|a| p.delay(a).num_seconds()).collect();
        assert_eq!(secs, vec![60, 120, 240, 480, 960, 1920, 3600, 3600]);
        assert_eq!(p.delay(200).num_seconds(), 3600);
    }
}
