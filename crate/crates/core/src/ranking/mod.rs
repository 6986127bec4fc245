//! System-level aggregation, rankings, correlation and bootstrap analysis.

mod bootstrap;
mod correlation;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::MetricId;
use crate::humaneval::Facet;

pub use bootstrap::{bootstrap_ranking, combined_pairwise_ranking, BootstrapSummary};
pub use correlation::{
    correlate, correlation_matrix, ecdf, ecdf_at, pearson, significance_stars, spearman, CorrelationError,
    CorrelationKind, CorrelationMatrix, CorrelationResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    HigherBetter,
    LowerBetter,
}

impl Polarity {
    pub fn of_metric(metric: MetricId) -> Self {
        if metric.lower_is_better() {
            Polarity::LowerBetter
        } else {
            Polarity::HigherBetter
        }
    }

    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Polarity::HigherBetter => a > b,
            Polarity::LowerBetter => a < b,
        }
    }
}

/// Competition ranking: each item's rank is one plus the number of items
/// strictly better than it, so ties share the smallest rank of their block.
pub fn competition_ranks(scores: &BTreeMap<String, f64>, polarity: Polarity) -> BTreeMap<String, usize> {
    scores
        .iter()
        .map(|(k, &v)| {
            let better = scores.values().filter(|&&o| polarity.better(o, v)).count();
            (k.clone(), better + 1)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "id", rename_all = "snake_case")]
pub enum RankingSource {
    Metric(MetricId),
    Facet(Facet),
    Annotator(String),
    PairwiseCombined,
}

impl std::fmt::Display for RankingSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RankingSource::Metric(m) => write!(f, "{m}"),
            RankingSource::Facet(x) => write!(f, "{}", x.as_str()),
            RankingSource::Annotator(a) => write!(f, "annotator:{a}"),
            RankingSource::PairwiseCombined => f.write_str("PW-Comb"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRanking {
    pub ordering: BTreeMap<String, usize>,
    pub source: RankingSource,
    pub scores: BTreeMap<String, f64>,
}

impl SystemRanking {
    /// Systems from best to worst; ties in id order.
    pub fn ordered(&self) -> Vec<(&str, usize)> {
        let mut v: Vec<(&str, usize)> = self.ordering.iter().map(|(k, &r)| (k.as_str(), r)).collect();
        v.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)));
        v
    }
}

pub fn rank_systems(scores: BTreeMap<String, f64>, polarity: Polarity, source: RankingSource) -> SystemRanking {
    SystemRanking {
        ordering: competition_ranks(&scores, polarity),
        source,
        scores,
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RankingError {
    #[error("no rankings to combine")]
    NoVoters,
    #[error("voter {index} ranks systems {found:?}, expected {expected:?}")]
    MismatchedSystems {
        index: usize,
        expected: Vec<String>,
        found: Vec<String>,
    },
    #[error("no value (defined or undefined) for system {system:?} on review {review:?}")]
    MissingInstance { system: String, review: String },
    #[error("bootstrap needs at least one sample")]
    NoSamples,
    #[error("no pairwise annotations; the combined ranking is undefined")]
    NoPreferences,
}

/// Per-system means over a subset of instances.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SystemScores {
    pub means: BTreeMap<String, f64>,
    /// Undefined values skipped per system.
    pub excluded: BTreeMap<String, usize>,
    /// Systems with no defined value in the subset; absent from `means`.
    pub dropped: Vec<String>,
}

/// Mean of the defined values per system. With a subset, only its
/// (system, review) instances are averaged, and every member of the subset
/// must be represented in `rows`, possibly as undefined.
pub fn system_scores<'a>(
    rows: impl IntoIterator<Item = (&'a str, &'a str, Option<f64>)>,
    subset: Option<&BTreeSet<(String, String)>>,
) -> Result<SystemScores, RankingError> {
    let mut sums: BTreeMap<String, (f64, usize, usize)> = BTreeMap::new();
    let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
    for (system, review, value) in rows {
        let key = (system.to_string(), review.to_string());
        if subset.is_some_and(|s| !s.contains(&key)) {
            continue;
        }
        let entry = sums.entry(key.0.clone()).or_default();
        match value {
            Some(v) => {
                entry.0 += v;
                entry.1 += 1;
            }
            None => entry.2 += 1,
        }
        seen.insert(key);
    }
    if let Some(subset) = subset {
        if let Some((system, review)) = subset.iter().find(|k| !seen.contains(*k)) {
            return Err(RankingError::MissingInstance {
                system: system.clone(),
                review: review.clone(),
            });
        }
    }
    let mut out = SystemScores::default();
    for (system, (sum, n, undefined)) in sums {
        if undefined > 0 {
            out.excluded.insert(system.clone(), undefined);
        }
        if n == 0 {
            out.dropped.push(system);
        } else {
            out.means.insert(system, sum / n as f64);
        }
    }
    Ok(out)
}

/// Borda count over voter rankings: per voter each system earns one point
/// for every system ranked strictly worse.
pub fn borda_combine(voters: &[BTreeMap<String, usize>]) -> Result<SystemRanking, RankingError> {
    let first = voters.first().ok_or(RankingError::NoVoters)?;
    let expected: Vec<String> = first.keys().cloned().collect();
    let mut totals: BTreeMap<String, f64> = expected.iter().map(|s| (s.clone(), 0.0)).collect();
    for (index, voter) in voters.iter().enumerate() {
        if !voter.keys().eq(expected.iter()) {
            return Err(RankingError::MismatchedSystems {
                index,
                expected,
                found: voter.keys().cloned().collect(),
            });
        }
        for (system, &rank) in voter {
            let below = voter.values().filter(|&&r| r > rank).count();
            *totals.get_mut(system).expect("same key set") += below as f64;
        }
    }
    Ok(rank_systems(
        totals,
        Polarity::HigherBetter,
        RankingSource::PairwiseCombined,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn scores(v: &[(&str, f64)]) -> BTreeMap<String, f64> {
        v.iter().map(|(k, x)| (k.to_string(), *x)).collect()
    }

    fn ranks(v: &[(&str, usize)]) -> BTreeMap<String, usize> {
        v.iter().map(|(k, x)| (k.to_string(), *x)).collect()
    }

    #[test]
    fn rank_systems_hand_cases() {
        let s = scores(&[("A", 0.9), ("B", 0.1)]);
        let hb = rank_systems(
            s.clone(),
            Polarity::HigherBetter,
            RankingSource::Metric(MetricId::Rouge1F),
        );
        assert_eq!(hb.ordering, ranks(&[("A", 1), ("B", 2)]));
        let lb = rank_systems(s, Polarity::LowerBetter, RankingSource::Metric(MetricId::DeltaEi));
        assert_eq!(lb.ordering, ranks(&[("A", 2), ("B", 1)]));
        let tied = rank_systems(
            scores(&[("A", 0.5), ("B", 0.5), ("C", 0.5)]),
            Polarity::HigherBetter,
            RankingSource::PairwiseCombined,
        );
        assert!(tied.ordering.values().all(|&r| r == 1));
        let comp = competition_ranks(
            &scores(&[("A", 3.0), ("B", 3.0), ("C", 1.0), ("D", 0.0)]),
            Polarity::HigherBetter,
        );
        assert_eq!(comp, ranks(&[("A", 1), ("B", 1), ("C", 3), ("D", 4)]));
    }

    #[test]
    fn system_scores_hand_cases() {
        let rows = vec![("s", "r1", Some(0.2)), ("s", "r2", Some(0.4))];
        let out = system_scores(rows, None).unwrap();
        assert!((out.means["s"] - 0.3).abs() < 1e-12);

        let rows = vec![("s", "r1", Some(0.2)), ("s", "r2", None), ("s", "r3", Some(0.6))];
        let out = system_scores(rows, None).unwrap();
        assert!((out.means["s"] - 0.4).abs() < 1e-12);
        assert_eq!(out.excluded["s"], 1);

        let rows = vec![
            ("a", "r1", Some(1.0)),
            ("a", "r2", Some(2.0)),
            ("a", "r3", Some(6.0)),
            ("b", "r1", Some(0.5)),
            ("b", "r2", None),
            ("b", "r3", Some(0.1)),
            ("c", "r1", None),
        ];
        let subset: BTreeSet<(String, String)> = [("a", "r1"), ("a", "r3"), ("b", "r1"), ("b", "r2"), ("c", "r1")]
            .iter()
            .map(|(s, r)| (s.to_string(), r.to_string()))
            .collect();
        let out = system_scores(rows.clone(), Some(&subset)).unwrap();
        assert_eq!(out.means, scores(&[("a", 3.5), ("b", 0.5)]));
        assert_eq!(out.dropped, vec!["c".to_string()]);

        let mut bigger = subset.clone();
        bigger.insert(("c".into(), "r9".into()));
        assert!(matches!(
            system_scores(rows, Some(&bigger)),
            Err(RankingError::MissingInstance { .. })
        ));
    }

    #[test]
    fn borda_hand_cases() {
        let six: BTreeMap<String, usize> = (1..=6).map(|i| (format!("s{i}"), i)).collect();
        let out = borda_combine(&[six]).unwrap();
        assert_eq!(out.scores["s1"], 5.0);
        assert_eq!(out.scores["s6"], 0.0);

        let fwd = ranks(&[("A", 1), ("B", 2), ("C", 3)]);
        let rev = ranks(&[("A", 3), ("B", 2), ("C", 1)]);
        let out = borda_combine(&[fwd, rev]).unwrap();
        assert!(out.ordering.values().all(|&r| r == 1));

        let tied = borda_combine(&[ranks(&[("A", 1), ("B", 1), ("C", 3)])]).unwrap();
        assert_eq!(tied.scores, scores(&[("A", 1.0), ("B", 1.0), ("C", 0.0)]));

        assert_eq!(borda_combine(&[]), Err(RankingError::NoVoters));
        let err = borda_combine(&[ranks(&[("A", 1)]), ranks(&[("B", 1)])]);
        assert!(matches!(err, Err(RankingError::MismatchedSystems { index: 1, .. })));
    }

    fn voter() -> impl Strategy<Value = BTreeMap<String, usize>> {
        prop::collection::vec(0u8..4, 4).prop_map(|pts| {
            let s: BTreeMap<String, f64> = pts
                .iter()
                .enumerate()
                .map(|(i, p)| (format!("s{i}"), *p as f64))
                .collect();
            competition_ranks(&s, Polarity::HigherBetter)
        })
    }

    proptest! {
        #[test]
        fn borda_voter_order_and_duplication(mut voters in prop::collection::vec(voter(), 1..5)) {
            let base = borda_combine(&voters).unwrap();
            voters.reverse();
            prop_assert_eq!(&borda_combine(&voters).unwrap().ordering, &base.ordering);
            let doubled: Vec<_> = voters.iter().chain(voters.iter()).cloned().collect();
            prop_assert_eq!(&borda_combine(&doubled).unwrap().ordering, &base.ordering);
        }

        #[test]
        fn ranking_is_invariant_under_monotone_transforms(
            values in prop::collection::vec(prop::sample::select(vec![0.0, 0.25, 0.5, 1.0]), 2..6),
        ) {
            let s: BTreeMap<String, f64> = values.iter().enumerate().map(|(i, v)| (format!("s{i}"), *v)).collect();
            let t: BTreeMap<String, f64> = s.iter().map(|(k, v)| (k.clone(), (3.0 * v).exp())).collect();
            let neg: BTreeMap<String, f64> = s.iter().map(|(k, v)| (k.clone(), -v)).collect();
            let base = competition_ranks(&s, Polarity::HigherBetter);
            prop_assert_eq!(&competition_ranks(&t, Polarity::HigherBetter), &base);
            prop_assert_eq!(&competition_ranks(&neg, Polarity::LowerBetter), &base);
            for (k, &r) in &base {
                let better = s.values().filter(|&&o| o > s[k]).count();
                prop_assert_eq!(r, better + 1);
            }
        }

        #[test]
        fn annotator_ranking_is_monotone(points in prop::collection::vec(0u32..6, 1..7)) {
            let p: BTreeMap<String, u32> = points.iter().enumerate().map(|(i, v)| (format!("s{i}"), *v)).collect();
            let r = crate::humaneval::annotator_ranking(&p);
            for (a, pa) in &p {
                for (b, pb) in &p {
                    if pa > pb {
                        prop_assert!(r[a] < r[b]);
                    }
                }
            }
        }
    }
}
