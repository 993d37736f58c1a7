//! Delimited-text exports of rankings and winners.

use super::{ranked_groups, Entrant, Grouping, WinnerSet};
use crate::config::ScoreWeights;
use crate::metrics::MetricsSnapshot;

fn finish(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

/// One row per entrant, groups in key order, ranks restarting at 1 in
/// every group.
pub fn rankings_csv(
    snapshot: &MetricsSnapshot,
    entrants: &[Entrant],
    group_by: Grouping,
    weights: &ScoreWeights,
) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "submission_id", "category_id", "country", "score", "views", "likes", "shares"])
        .expect("in-memory write");
    for list in ranked_groups(snapshot, entrants, group_by, weights).values() {
        for (i, s) in list.iter().enumerate() {
            let c = s.score.components;
            w.write_record([
                (i + 1).to_string(),
                s.entrant.submission_id.to_string(),
                s.entrant.category_id.clone(),
                s.entrant.country.clone(),
                s.score.score.to_string(),
                c.views.to_string(),
                c.likes.to_string(),
                c.shares.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    finish(w)
}

/// One row per awarded category.
pub fn winners_csv(winners: &WinnerSet) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["category_id", "submission_id", "country", "jury_aggregate", "jury_aggregate_display", "audience_award"])
        .expect("in-memory write");
    for winner in &winners.winners {
        let audience = winners.audience_award.as_ref() == Some(&winner.submission_id);
        w.write_record([
            winner.category_id.clone(),
            winner.submission_id.to_string(),
            winner.country.clone(),
            winner.jury_aggregate.to_string(),
            format!("{:.3}", winner.jury_aggregate.to_f64()),
            audience.to_string(),
        ])
        .expect("in-memory write");
    }
    finish(w)
}
