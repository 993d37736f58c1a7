use chrono::{TimeZone, Utc};
use contest_core::syndication::{
    render_event_post, Channel, ContestEvent, EventKind, PostContext, TemplateSet,
};
use proptest::prelude::*;

const TAG: &str = "#SciChallenge2017";

proptest! {
    #[test]
    fn every_rendered_post_carries_the_hashtag(
        title in "\\PC{0,400}",
        topic in "\\PC{0,120}",
        subject in "[a-z0-9-]{1,20}",
        limit in 200usize..600,
    ) {
        let templates = TemplateSet::builtin();
        let link = format!("https://contest.example.org/submissions/{subject}");
        let ctx = PostContext { title, topic, link: link.clone() };
        let mut channels = Channel::defaults();
        channels.push(Channel::new("microblog", limit));
        for kind in EventKind::ALL {
            let event = ContestEvent {
                kind,
                subject_id: subject.clone(),
                occurred_at: Utc.with_ymd_and_hms(2017, 3, 1, 0, 0, 0).unwrap(),
            };
            for channel in &channels {
                let post = render_event_post(&event, &ctx, &templates, channel, TAG).unwrap();
                prop_assert!(post.body.contains(TAG));
                prop_assert!(post.body.chars().count() <= channel.max_chars);
                if templates.get(kind, &channel.id).unwrap().contains("{link}") {
                    prop_assert!(post.body.contains(&link));
                }
                let replay = render_event_post(&event, &ctx, &templates, channel, TAG).unwrap();
                prop_assert_eq!(replay, post);
            }
        }
    }
}
