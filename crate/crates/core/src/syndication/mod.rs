//! Outbound syndication: event posts rendered from templates, personalized
//! embeddable widgets, and the outbox that delivers posts to channels.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod outbox;
pub mod widget;

pub use outbox::{drain_outbox, BackoffPolicy, DeliveryAdapter, DeliveryReport, Outbox, OutboxPost, PostState};
pub use widget::{generate_widget, Widget};

pub const ELLIPSIS: char = '…';
pub const MICROBLOG: &str = "microblog";
pub const FEED: &str = "feed";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SyndicationError {
    #[error("no template for {kind} on channel {channel}")]
    NoTemplate { kind: EventKind, channel: String },
    #[error("links and hashtag alone exceed the {limit}-character limit of channel {channel}")]
    ChannelLimit { channel: String, limit: usize },
    #[error("template file {0}: {1}")]
    TemplateFile(String, String),
    #[error("submission is not finalized")]
    NotSubmitted,
}

impl SyndicationError {
    pub fn code(&self) -> &'static str {
        match self {
            SyndicationError::NoTemplate { .. } => "NO_TEMPLATE",
            SyndicationError::ChannelLimit { .. } => "CHANNEL_LIMIT",
            SyndicationError::TemplateFile(..) => "TEMPLATE_FILE",
            SyndicationError::NotSubmitted => "NOT_SUBMITTED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    SubmissionFinalized,
    ShortlistPublished,
    WinnersAnnounced,
    ContentUpdated,
}

impl EventKind {
    pub const ALL: [EventKind; 4] = [
        EventKind::SubmissionFinalized,
        EventKind::ShortlistPublished,
        EventKind::WinnersAnnounced,
        EventKind::ContentUpdated,
    ];

    pub fn slug(&self) -> &'static str {
        match self {
            EventKind::SubmissionFinalized => "submission_finalized",
            EventKind::ShortlistPublished => "shortlist_published",
            EventKind::WinnersAnnounced => "winners_announced",
            EventKind::ContentUpdated => "content_updated",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.slug().to_uppercase())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.slug().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown event kind {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContestEvent {
    pub kind: EventKind,
    pub subject_id: String,
    pub occurred_at: DateTime<Utc>,
}

/// Values substituted into a template. `title` and `topic` are free text
/// and may be shortened; `link` never is.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostContext {
    pub title: String,
    pub topic: String,
    pub link: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Channel {
    pub id: String,
    pub max_chars: usize,
}

impl Channel {
    pub fn new(id: impl Into<String>, max_chars: usize) -> Self {
        Channel { id: id.into(), max_chars }
    }

    pub fn defaults() -> Vec<Channel> {
        vec![Channel::new(MICROBLOG, 280), Channel::new(FEED, 2000)]
    }
}

const DEFAULT_TEMPLATES: [(&str, &str); 8] = [
    ("submission_finalized.microblog", include_str!("../../data/templates/submission_finalized.microblog.txt")),
    ("submission_finalized.feed", include_str!("../../data/templates/submission_finalized.feed.txt")),
    ("shortlist_published.microblog", include_str!("../../data/templates/shortlist_published.microblog.txt")),
    ("shortlist_published.feed", include_str!("../../data/templates/shortlist_published.feed.txt")),
    ("winners_announced.microblog", include_str!("../../data/templates/winners_announced.microblog.txt")),
    ("winners_announced.feed", include_str!("../../data/templates/winners_announced.feed.txt")),
    ("content_updated.microblog", include_str!("../../data/templates/content_updated.microblog.txt")),
    ("content_updated.feed", include_str!("../../data/templates/content_updated.feed.txt")),
];

/// Templates keyed by (event kind, channel id). Files are named
/// `<event_kind>.<channel>.txt`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TemplateSet {
    templates: BTreeMap<(EventKind, String), String>,
}

impl TemplateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn builtin() -> Self {
        let mut set = TemplateSet::new();
        for (name, text) in DEFAULT_TEMPLATES {
            let (kind, channel) = name.split_once('.').expect("builtin names are kind.channel");
            set.insert(kind.parse().expect("builtin kinds"), channel, text);
        }
        set
    }

    pub fn insert(&mut self, kind: EventKind, channel: &str, template: &str) {
        self.templates.insert((kind, channel.to_string()), template.trim_end().to_string());
    }

    pub fn get(&self, kind: EventKind, channel: &str) -> Option<&str> {
        self.templates.get(&(kind, channel.to_string())).map(String::as_str)
    }

    /// Loads every `*.txt` file of a directory over the builtin set.
    pub fn load_dir(dir: &Path) -> Result<Self, SyndicationError> {
        let mut set = TemplateSet::builtin();
        let err = |p: &Path, e: String| SyndicationError::TemplateFile(p.display().to_string(), e);
        let entries = std::fs::read_dir(dir).map_err(|e| err(dir, e.to_string()))?;
        let mut paths: Vec<_> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
        paths.sort();
        for path in paths {
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let (kind, channel) =
                stem.split_once('.').ok_or_else(|| err(&path, "expected <event_kind>.<channel>.txt".into()))?;
            let kind: EventKind = kind.parse().map_err(|e: String| err(&path, e))?;
            let text = std::fs::read_to_string(&path).map_err(|e| err(&path, e.to_string()))?;
            set.insert(kind, channel, &text);
        }
        Ok(set)
    }
}

/// Single pass, so substituted text is never re-scanned for placeholders.
fn substitute(template: &str, title: &str, topic: &str, link: &str, hashtag: &str) -> String {
    let mut out = String::with_capacity(template.len() + title.len() + link.len());
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let tail = &rest[start..];
        let value = [("{title}", title), ("{topic}", topic), ("{link}", link), ("{hashtag}", hashtag)]
            .into_iter()
            .find(|(name, _)| tail.starts_with(name));
        match value {
            Some((name, v)) => {
                out.push_str(v);
                rest = &tail[name.len()..];
            }
            None => {
                out.push('{');
                rest = &tail[1..];
            }
        }
    }
    out.push_str(rest);
    out
}

/// Free text cut to `keep` characters with an ellipsis; empty at zero.
fn shortened(full: &str, keep: usize) -> String {
    let len = full.chars().count();
    if keep >= len {
        full.to_string()
    } else if keep == 0 {
        String::new()
    } else {
        let head: String = full.chars().take(keep).collect();
        format!("{}{ELLIPSIS}", head.trim_end())
    }
}

fn compose(template: &str, title: &str, topic: &str, ctx: &PostContext, hashtag: &str) -> String {
    let mut body = substitute(template, title, topic, &ctx.link, hashtag);
    if !body.contains(hashtag) {
        if !body.is_empty() && !body.ends_with(char::is_whitespace) {
            body.push(' ');
        }
        body.push_str(hashtag);
    }
    body
}

/// Renders the post for one event on one channel. The result is a pure
/// function of its inputs; the post id is derived from event and channel so
/// re-emitting an event does not duplicate posts.
pub fn render_event_post(
    event: &ContestEvent,
    context: &PostContext,
    templates: &TemplateSet,
    channel: &Channel,
    hashtag: &str,
) -> Result<OutboxPost, SyndicationError> {
    let template = templates
        .get(event.kind, &channel.id)
        .ok_or_else(|| SyndicationError::NoTemplate { kind: event.kind, channel: channel.id.clone() })?;

    let title_len = context.title.chars().count();
    let topic_len = context.topic.chars().count();
    let (mut keep_title, mut keep_topic) = (title_len, topic_len);
    let body = loop {
        let title = shortened(&context.title, keep_title);
        let topic = shortened(&context.topic, keep_topic);
        let body = compose(template, &title, &topic, context, hashtag);
        if body.chars().count() <= channel.max_chars {
            break body;
        }
        // Shorten whichever free-text field is currently longer.
        if keep_title == 0 && keep_topic == 0 {
            return Err(SyndicationError::ChannelLimit { channel: channel.id.clone(), limit: channel.max_chars });
        }
        if keep_title >= keep_topic {
            keep_title -= 1;
        } else {
            keep_topic -= 1;
        }
    };

    Ok(OutboxPost::pending(
        format!("{}:{}:{}", event.kind.slug(), event.subject_id, channel.id),
        channel.id.clone(),
        body,
        event.occurred_at,
    ))
}
