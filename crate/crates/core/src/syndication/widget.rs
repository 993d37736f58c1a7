use serde::{Deserialize, Serialize};

use super::SyndicationError;
use crate::submission::Submission;

/// Static embeddable snippet advertising one contribution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widget {
    pub submission_id: String,
    pub embed_markup: String,
    pub deep_link: String,
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

pub fn deep_link(platform_base_url: &str, submission_id: &str) -> String {
    format!("{}/submissions/{}", platform_base_url.trim_end_matches('/'), submission_id)
}

/// Builds the widget of a finalized submission. Output bytes depend only on
/// the arguments.
pub fn generate_widget(
    submission: &Submission,
    topic_title: &str,
    platform_base_url: &str,
    hashtag: &str,
) -> Result<Widget, SyndicationError> {
    if !submission.is_live() {
        return Err(SyndicationError::NotSubmitted);
    }
    let id = submission.submission_id.as_str();
    let link = deep_link(platform_base_url, id);
    let embed_markup = format!(
        concat!(
            "<div class=\"contest-widget\" data-submission=\"{id}\">",
            "<a class=\"contest-widget__link\" href=\"{href}\" rel=\"noopener\" target=\"_blank\">",
            "<strong class=\"contest-widget__title\">{title}</strong>",
            "<span class=\"contest-widget__topic\">{topic}</span>",
            "<span class=\"contest-widget__tag\">{tag}</span>",
            "</a></div>"
        ),
        id = escape(id),
        href = escape(&link),
        title = escape(&submission.title),
        topic = escape(topic_title),
        tag = escape(hashtag),
    );
    Ok(Widget { submission_id: id.to_string(), embed_markup, deep_link: link })
}

/// True when markup carries no script element, inline handler or
/// `javascript:` URL.
pub fn is_script_free(markup: &str) -> bool {
    let lower = markup.to_ascii_lowercase();
    let mut rest = lower.as_str();
    while let Some(open) = rest.find('<') {
        let Some(len) = rest[open..].find('>') else {
            return false;
        };
        let tag = &rest[open + 1..open + len];
        let mut parts = tag.split_whitespace();
        if parts.next().unwrap_or("").trim_start_matches('/') == "script" {
            return false;
        }
        if parts.any(|attr| attr.split('=').next().unwrap_or("").starts_with("on")) {
            return false;
        }
        if tag.contains("javascript:") {
            return false;
        }
        rest = &rest[open + len + 1..];
    }
    true
}
