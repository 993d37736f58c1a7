//! Instance generators and brute-force reference implementations shared by
//! the integration tests. The reference code deliberately avoids the
//! engine's helpers (no `precedence`, no `weighted_sum`, no sorting).
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Duration, TimeZone, Utc};
use contest_core::metrics::{Counts, MetricsSample, MetricsSnapshot, SnapshotEntry};
use contest_core::rating::{Entrant, JuryScore, Provenance, ScoringMatrix};
use contest_core::{enumerate_categories, ContestConfig, ScoreWeights, SubmissionId};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::rngs::StdRng;
use rand::RngExt;

pub fn t0() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2017, 2, 1, 0, 0, 0).unwrap()
}

pub fn at(secs: i64) -> DateTime<Utc> {
    t0() + Duration::seconds(secs)
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub entrants: Vec<Entrant>,
    pub counts: BTreeMap<SubmissionId, Counts>,
}

impl Instance {
    pub fn snapshot(&self, frozen_at: DateTime<Utc>) -> MetricsSnapshot {
        let entries = self
            .counts
            .iter()
            .map(|(id, c)| {
                let sample = MetricsSample {
                    submission_id: id.clone(),
                    observed_at: frozen_at - Duration::seconds(1),
                    views: c.views,
                    likes: c.likes,
                    shares: c.shares,
                    provider_id: "sim".into(),
                };
                (id.clone(), SnapshotEntry { sample, no_data: false })
            })
            .collect();
        MetricsSnapshot { frozen_at, entries }
    }

    pub fn counts_of(&self, id: &SubmissionId) -> Counts {
        self.counts.get(id).copied().unwrap_or_default()
    }
}

pub fn entrant(id: &str, country: &str, category_id: &str, submitted: i64) -> Entrant {
    Entrant {
        submission_id: SubmissionId::from(id),
        country: country.into(),
        category_id: category_id.into(),
        age_group_id: category_id.split('-').next().unwrap().into(),
        submitted_at: at(submitted),
    }
}

/// Random instance over the default categories. Small value ranges make
/// score and timestamp ties frequent.
pub fn random_instance(rng: &mut StdRng, n: usize, n_countries: usize, config: &ContestConfig) -> Instance {
    let countries: Vec<&String> = config.eligible_countries.iter().take(n_countries).collect();
    let categories: Vec<String> = enumerate_categories(config).iter().map(|c| c.id()).collect();
    let mut entrants = Vec::with_capacity(n);
    let mut counts = BTreeMap::new();
    for i in 0..n {
        let id = format!("sub-{:06}", rng.random_range(0..1_000_000) * 1000 + i);
        let e = entrant(
            &id,
            countries[rng.random_range(0..countries.len())],
            &categories[rng.random_range(0..categories.len())],
            rng.random_range(0..40),
        );
        counts.insert(
            e.submission_id.clone(),
            Counts::new(rng.random_range(0..30), rng.random_range(0..8), rng.random_range(0..4)),
        );
        entrants.push(e);
    }
    Instance { entrants, counts }
}

pub fn reference_score(c: Counts, w: &ScoreWeights) -> BigRational {
    let mut total = BigRational::from_integer(BigInt::from(0));
    for (n, weight) in [(c.views, &w.w_views), (c.likes, &w.w_likes), (c.shares, &w.w_shares)] {
        for _ in 0..n {
            total += weight.value().clone();
        }
    }
    total
}

/// True when `a` strictly outranks `b` under score desc, submitted_at asc,
/// id asc.
pub fn beats(a: &Entrant, sa: &BigRational, b: &Entrant, sb: &BigRational) -> bool {
    if sa != sb {
        return sa > sb;
    }
    if a.submitted_at != b.submitted_at {
        return a.submitted_at < b.submitted_at;
    }
    a.submission_id.as_str() < b.submission_id.as_str()
}

fn group_key(e: &Entrant, by_country: bool) -> String {
    if by_country { e.country.clone() } else { e.category_id.clone() }
}

/// Pairwise comparison sort: an entrant's position is the number of group
/// members that beat it.
pub fn reference_rank(inst: &Instance, by_country: bool, w: &ScoreWeights) -> BTreeMap<String, Vec<SubmissionId>> {
    let scores: Vec<BigRational> = inst.entrants.iter().map(|e| reference_score(inst.counts_of(&e.submission_id), w)).collect();
    let mut groups: BTreeMap<String, Vec<Option<SubmissionId>>> = BTreeMap::new();
    for (i, e) in inst.entrants.iter().enumerate() {
        let key = group_key(e, by_country);
        let size = inst.entrants.iter().filter(|o| group_key(o, by_country) == key).count();
        let pos = inst
            .entrants
            .iter()
            .enumerate()
            .filter(|(j, o)| *j != i && group_key(o, by_country) == key && beats(o, &scores[*j], e, &scores[i]))
            .count();
        let slots = groups.entry(key).or_insert_with(|| vec![None; size]);
        assert!(slots[pos].is_none(), "reference order is not total at position {pos}");
        slots[pos] = Some(e.submission_id.clone());
    }
    groups.into_iter().map(|(k, v)| (k, v.into_iter().map(Option::unwrap).collect())).collect()
}

/// Shortlist by full scan: an entrant is the top of a group when no other
/// member of that group beats it.
pub fn reference_shortlist(inst: &Instance, w: &ScoreWeights) -> BTreeMap<SubmissionId, BTreeSet<Provenance>> {
    let scores: Vec<BigRational> = inst.entrants.iter().map(|e| reference_score(inst.counts_of(&e.submission_id), w)).collect();
    let mut out: BTreeMap<SubmissionId, BTreeSet<Provenance>> = BTreeMap::new();
    for (i, e) in inst.entrants.iter().enumerate() {
        let unbeaten = |by_country: bool| {
            !inst.entrants.iter().enumerate().any(|(j, o)| {
                j != i && group_key(o, by_country) == group_key(e, by_country) && beats(o, &scores[j], e, &scores[i])
            })
        };
        if unbeaten(true) {
            out.entry(e.submission_id.clone()).or_default().insert(Provenance::TopOfCountry(e.country.clone()));
        }
        if unbeaten(false) {
            out.entry(e.submission_id.clone()).or_default().insert(Provenance::TopOfCategory(e.category_id.clone()));
        }
    }
    out
}

/// Searches every subset of the entrants for the ones that satisfy the
/// shortlist definition: each member tops one of its groups, and every
/// non-empty group has its top in the set.
pub fn exhaustive_shortlists(inst: &Instance, w: &ScoreWeights) -> Vec<BTreeSet<SubmissionId>> {
    let n = inst.entrants.len();
    assert!(n <= 16);
    let scores: Vec<BigRational> = inst.entrants.iter().map(|e| reference_score(inst.counts_of(&e.submission_id), w)).collect();
    let tops = |i: usize, by_country: bool| {
        let e = &inst.entrants[i];
        (0..n).all(|j| {
            j == i
                || group_key(&inst.entrants[j], by_country) != group_key(e, by_country)
                || !beats(&inst.entrants[j], &scores[j], e, &scores[i])
        })
    };
    let mut found = Vec::new();
    for mask in 0u32..(1 << n) {
        let member = |i: usize| mask & (1 << i) != 0;
        let sound = (0..n).filter(|&i| member(i)).all(|i| tops(i, true) || tops(i, false));
        let complete = (0..n).all(|i| {
            [true, false].iter().all(|&by_country| {
                let key = group_key(&inst.entrants[i], by_country);
                (0..n).any(|j| member(j) && group_key(&inst.entrants[j], by_country) == key && tops(j, by_country))
            })
        });
        if sound && complete {
            found.push((0..n).filter(|&i| member(i)).map(|i| inst.entrants[i].submission_id.clone()).collect());
        }
    }
    found
}

/// Mean over jurors of the per-juror mean over the age group's criteria,
/// recomputed from raw integers.
pub fn reference_aggregate(scores: &[&JuryScore], matrix: &ScoringMatrix, age_group: &str) -> BigRational {
    let criteria = matrix.criteria_for(age_group);
    let weight_total: i64 = criteria.iter().map(|c| i64::from(c.weight)).sum();
    let mut numer = BigInt::from(0);
    for s in scores {
        let weighted: i64 = criteria.iter().map(|c| i64::from(c.weight) * s.scores[&c.id]).sum();
        numer += BigInt::from(weighted);
    }
    BigRational::new(numer, BigInt::from(weight_total * scores.len() as i64))
}

/// Tries every assignment of one shortlisted entry (or none) to each
/// category and keeps the assignments in which every pick is unbeaten on
/// (aggregate desc, submitted_at asc, id asc) and no category with entries
/// is left empty.
pub fn exhaustive_winners(
    shortlisted: &[Entrant],
    aggregate: &BTreeMap<SubmissionId, BigRational>,
    categories: &[String],
) -> Vec<BTreeMap<String, SubmissionId>> {
    let options: Vec<Vec<Option<&Entrant>>> = categories
        .iter()
        .map(|c| {
            let mut v: Vec<Option<&Entrant>> = vec![None];
            v.extend(shortlisted.iter().filter(|e| &e.category_id == c).map(Some));
            v
        })
        .collect();
    let mut found = Vec::new();
    let mut idx = vec![0usize; categories.len()];
    loop {
        let mut ok = true;
        for (k, c) in categories.iter().enumerate() {
            let members: Vec<&Entrant> = shortlisted.iter().filter(|e| &e.category_id == c).collect();
            match options[k][idx[k]] {
                None => ok &= members.is_empty(),
                Some(pick) => {
                    let sp = &aggregate[&pick.submission_id];
                    ok &= !members.iter().any(|o| {
                        o.submission_id != pick.submission_id && beats(o, &aggregate[&o.submission_id], pick, sp)
                    });
                }
            }
        }
        if ok {
            found.push(
                categories
                    .iter()
                    .enumerate()
                    .filter_map(|(k, c)| options[k][idx[k]].map(|e| (c.clone(), e.submission_id.clone())))
                    .collect(),
            );
        }
        let mut k = 0;
        loop {
            if k == idx.len() {
                return found;
            }
            idx[k] += 1;
            if idx[k] < options[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// One juror's score-set using `value` for every criterion of the group.
pub fn flat_score(juror: &str, e: &Entrant, matrix: &ScoringMatrix, value: i64) -> JuryScore {
    JuryScore {
        juror_id: juror.into(),
        submission_id: e.submission_id.clone(),
        scores: matrix.criterion_ids(&e.age_group_id).into_iter().map(|c| (c, value)).collect(),
        recorded_at: at(0),
    }
}
