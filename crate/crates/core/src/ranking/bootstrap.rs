use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::correlation::rank_rho;
use super::{borda_combine, RankingError, SystemRanking};
use crate::humaneval::{annotator_ranking, tally_pairwise, PairwiseAnnotation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub n_samples: usize,
    /// Mean over samples with a defined rho.
    pub mean_rho: f64,
    /// Population standard deviation over the same samples.
    pub sd_rho: f64,
    pub seed: u64,
    /// Samples whose resampled ranking had no rank variance.
    pub n_undefined: usize,
}

fn universe<'a>(lists: impl Iterator<Item = &'a [PairwiseAnnotation]>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for list in lists {
        for a in list {
            out.insert(a.system_a.clone());
            out.insert(a.system_b.clone());
        }
    }
    out
}

/// Annotator ranking over a fixed system set; unseen systems score 0.
fn ranking_over(list: &[PairwiseAnnotation], systems: &BTreeSet<String>) -> BTreeMap<String, usize> {
    let mut points: BTreeMap<String, u32> = systems.iter().map(|s| (s.clone(), 0)).collect();
    for (s, p) in tally_pairwise(list) {
        points.insert(s, p);
    }
    annotator_ranking(&points)
}

fn combine(lists: &[&[PairwiseAnnotation]], systems: &BTreeSet<String>) -> SystemRanking {
    let voters: Vec<_> = lists.iter().map(|l| ranking_over(l, systems)).collect();
    borda_combine(&voters).expect("voters share the system set")
}

/// Borda combination of per-annotator pairwise rankings.
pub fn combined_pairwise_ranking(
    per_annotator: &BTreeMap<String, Vec<PairwiseAnnotation>>,
) -> Result<SystemRanking, RankingError> {
    let systems = universe(per_annotator.values().map(Vec::as_slice));
    if systems.is_empty() {
        return Err(RankingError::NoPreferences);
    }
    let lists: Vec<&[PairwiseAnnotation]> = per_annotator.values().map(Vec::as_slice).collect();
    Ok(combine(&lists, &systems))
}

fn rank_vector(r: &SystemRanking) -> Vec<f64> {
    r.ordering.values().map(|&v| v as f64).collect()
}

/// Resamples every annotator's preferences with replacement, recombines, and
/// summarizes Spearman rho against the initial combined ranking.
///
/// Sample `i` draws from ChaCha8 seeded with `seed` on stream `i`, so results
/// do not depend on evaluation order.
pub fn bootstrap_ranking(
    per_annotator: &BTreeMap<String, Vec<PairwiseAnnotation>>,
    n_samples: usize,
    seed: u64,
) -> Result<BootstrapSummary, RankingError> {
    if n_samples == 0 {
        return Err(RankingError::NoSamples);
    }
    let initial = combined_pairwise_ranking(per_annotator)?;
    let systems: BTreeSet<String> = initial.ordering.keys().cloned().collect();
    let base = rank_vector(&initial);
    let lists: Vec<&[PairwiseAnnotation]> = per_annotator.values().map(Vec::as_slice).collect();

    let rho_of = |i: usize| -> Option<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let resampled: Vec<Vec<PairwiseAnnotation>> = lists
            .iter()
            .map(|l| (0..l.len()).map(|_| l[rng.random_range(0..l.len())].clone()).collect())
            .collect();
        let refs: Vec<&[PairwiseAnnotation]> = resampled.iter().map(Vec::as_slice).collect();
        let r = combine(&refs, &systems);
        rank_rho(&base, &rank_vector(&r))
    };

    let threads = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(n_samples);
    let chunk = n_samples.div_ceil(threads);
    let mut rhos: Vec<Option<f64>> = vec![None; n_samples];
    std::thread::scope(|scope| {
        for (t, out) in rhos.chunks_mut(chunk).enumerate() {
            let rho_of = &rho_of;
            scope.spawn(move || {
                for (k, slot) in out.iter_mut().enumerate() {
                    *slot = rho_of(t * chunk + k);
                }
            });
        }
    });

    let defined: Vec<f64> = rhos.iter().flatten().copied().collect();
    let n_undefined = n_samples - defined.len();
    let (mean_rho, sd_rho) = if defined.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        let m = defined.iter().sum::<f64>() / defined.len() as f64;
        let var = defined.iter().map(|r| (r - m).powi(2)).sum::<f64>() / defined.len() as f64;
        (m, var.sqrt())
    };
    Ok(BootstrapSummary {
        n_samples,
        mean_rho,
        sd_rho,
        seed,
        n_undefined,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::humaneval::fixtures::pw;
    use crate::humaneval::Preference;

    #[test]
    fn unanimous_repeated_preference_is_stable() {
        let list = vec![pw("ann", "A", "B", Preference::A); 5];
        let per = BTreeMap::from([("ann".to_string(), list)]);
        let s = bootstrap_ranking(&per, 200, 7).unwrap();
        assert_eq!((s.mean_rho, s.sd_rho, s.n_undefined), (1.0, 0.0, 0));
    }

    fn sample_data() -> BTreeMap<String, Vec<PairwiseAnnotation>> {
        let prefs = [Preference::A, Preference::B, Preference::Neither];
        let systems = ["s1", "s2", "s3", "s4"];
        let mut per = BTreeMap::new();
        for (k, ann) in ["a1", "a2", "a3"].iter().enumerate() {
            let mut list = Vec::new();
            for i in 0..systems.len() {
                for j in i + 1..systems.len() {
                    list.push(pw(ann, systems[i], systems[j], prefs[(i + j + k) % 3]));
                }
            }
            per.insert(ann.to_string(), list);
        }
        per
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let per = sample_data();
        let a = bootstrap_ranking(&per, 300, 42).unwrap();
        let b = bootstrap_ranking(&per, 300, 42).unwrap();
        assert_eq!(a.mean_rho.to_bits(), b.mean_rho.to_bits());
        assert_eq!(a.sd_rho.to_bits(), b.sd_rho.to_bits());
        assert!(a.sd_rho >= 0.0);
        assert!(a.mean_rho <= 1.0);
    }

    #[test]
    fn combined_ranking_fills_unseen_systems() {
        let per = BTreeMap::from([
            ("a".to_string(), vec![pw("a", "s1", "s2", Preference::A)]),
            ("b".to_string(), vec![pw("b", "s3", "s1", Preference::A)]),
        ]);
        let r = combined_pairwise_ranking(&per).unwrap();
        // a: s1=1, s2,s3=2 -> points 2,0,0; b: s3=1, s1,s2=2 -> 0,0,2.
        assert_eq!(r.scores["s1"], 2.0);
        assert_eq!(r.scores["s2"], 0.0);
        assert_eq!(r.scores["s3"], 2.0);
        assert_eq!(r.ordering["s2"], 3);
    }

    #[test]
    fn errors() {
        assert_eq!(bootstrap_ranking(&sample_data(), 0, 1), Err(RankingError::NoSamples));
        assert_eq!(
            bootstrap_ranking(&BTreeMap::new(), 5, 1),
            Err(RankingError::NoPreferences)
        );
    }
}
