//! Sampling of facet and pairwise annotation assignments.
//!
//! Plans are pure functions of the corpus, the parameters and the seed.
//! Sampling without replacement is a seeded Fisher-Yates shuffle on
//! ChaCha8.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetTask {
    pub task_id: String,
    pub annotator_id: String,
    pub system_id: String,
    pub review_id: String,
    /// Review belongs to the overlapping set.
    pub overlap: bool,
    /// Second annotation of a summary already assigned to someone else.
    pub dual: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseTask {
    pub task_id: String,
    pub annotator_id: String,
    pub review_id: String,
    /// Shown in position A.
    pub system_a: String,
    pub system_b: String,
    pub overlap: bool,
}

impl PairwiseTask {
    pub fn unordered(&self) -> (&str, &str, &str) {
        let (a, b) = if self.system_a <= self.system_b {
            (&self.system_a, &self.system_b)
        } else {
            (&self.system_b, &self.system_a)
        };
        (&self.review_id, a, b)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignPlan {
    pub seed: u64,
    #[serde(default)]
    pub pairwise_seed: Option<u64>,
    pub overlapping_reviews: BTreeSet<String>,
    pub per_system_random: BTreeMap<String, BTreeSet<String>>,
    #[serde(default)]
    pub facet_tasks: Vec<FacetTask>,
    #[serde(default)]
    pub pairwise_tasks: Vec<PairwiseTask>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetPlanConfig {
    pub systems: Vec<String>,
    pub n_overlap: usize,
    pub n_random: usize,
    pub annotators: Vec<String>,
    /// Overlapping reviews whose summaries (all systems) get a second annotator.
    #[serde(default)]
    pub n_overlap_dual: usize,
    /// Randomly sampled summaries that get a second annotator.
    #[serde(default)]
    pub n_random_dual: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwisePlanConfig {
    /// Per-annotator quotas, in assignment order.
    pub quotas: Vec<(String, usize)>,
    pub overlap_fraction: f64,
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("no systems given")]
    NoSystems,
    #[error("no annotators given")]
    NoAnnotators,
    #[error("duplicate id {0:?} in the parameter list")]
    DuplicateId(String),
    #[error("system {0:?} has no summaries in the corpus")]
    UnknownSystem(String),
    #[error("{what}: need {needed} reviews, {available} available")]
    InsufficientReviews {
        what: String,
        needed: usize,
        available: usize,
    },
    #[error("dual annotation needs at least two annotators")]
    DualNeedsTwoAnnotators,
    #[error("overlapping review set is empty")]
    EmptyOverlap,
    #[error("overlap_fraction {0} outside [0, 1]")]
    BadFraction(f64),
    #[error("annotator {annotator:?}: need {needed} distinct {pool} pairs, {available} available")]
    NotEnoughPairs {
        annotator: String,
        pool: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: parse error: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("invalid plan: {0}")]
    Invalid(String),
}

fn check_unique(ids: &[String]) -> Result<(), CampaignError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(CampaignError::DuplicateId(id.clone()));
        }
    }
    Ok(())
}

/// Review ids (sorted) for which `system` has a summary.
fn covered(corpus: &Corpus, system: &str) -> BTreeSet<String> {
    corpus.summaries_for(system).map(|g| g.review_id.clone()).collect()
}

fn sample(rng: &mut ChaCha8Rng, pool: &BTreeSet<String>, n: usize, what: String) -> Result<Vec<String>, CampaignError> {
    if pool.len() < n {
        return Err(CampaignError::InsufficientReviews {
            what,
            needed: n,
            available: pool.len(),
        });
    }
    let mut v: Vec<String> = pool.iter().cloned().collect();
    v.shuffle(rng);
    v.truncate(n);
    Ok(v)
}

/// Samples the overlapping set shared by all systems, an independent random
/// set per system from the remaining reviews, and the dual-annotated subset.
///
/// Primary tasks are shuffled and dealt to annotators round-robin. Each dual
/// task goes to the annotator after the primary one in `annotators` order
/// and is appended after all primary tasks.
pub fn plan_facet_campaign(
    corpus: &Corpus,
    config: &FacetPlanConfig,
    seed: u64,
) -> Result<CampaignPlan, CampaignError> {
    if config.systems.is_empty() {
        return Err(CampaignError::NoSystems);
    }
    if config.annotators.is_empty() {
        return Err(CampaignError::NoAnnotators);
    }
    check_unique(&config.systems)?;
    check_unique(&config.annotators)?;
    if (config.n_overlap_dual > 0 || config.n_random_dual > 0) && config.annotators.len() < 2 {
        return Err(CampaignError::DualNeedsTwoAnnotators);
    }
    let coverage: Vec<BTreeSet<String>> = config.systems.iter().map(|s| covered(corpus, s)).collect();
    for (s, c) in config.systems.iter().zip(&coverage) {
        if c.is_empty() {
            return Err(CampaignError::UnknownSystem(s.clone()));
        }
    }
    let shared: BTreeSet<String> = coverage
        .iter()
        .skip(1)
        .fold(coverage[0].clone(), |acc, c| acc.intersection(c).cloned().collect());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let overlap = sample(&mut rng, &shared, config.n_overlap, "overlapping set".into())?;
    let overlap_set: BTreeSet<String> = overlap.iter().cloned().collect();

    let mut per_system_random = BTreeMap::new();
    let mut primary: Vec<(String, String, bool)> = Vec::new();
    for r in &overlap {
        for s in &config.systems {
            primary.push((s.clone(), r.clone(), true));
        }
    }
    for (s, c) in config.systems.iter().zip(&coverage) {
        let rest: BTreeSet<String> = c.difference(&overlap_set).cloned().collect();
        let picked = sample(&mut rng, &rest, config.n_random, format!("random set for {s}"))?;
        for r in &picked {
            primary.push((s.clone(), r.clone(), false));
        }
        per_system_random.insert(s.clone(), picked.into_iter().collect::<BTreeSet<_>>());
    }
    primary.shuffle(&mut rng);

    let k = config.annotators.len();
    let mut tasks: Vec<FacetTask> = primary
        .iter()
        .enumerate()
        .map(|(i, (s, r, ov))| FacetTask {
            task_id: String::new(),
            annotator_id: config.annotators[i % k].clone(),
            system_id: s.clone(),
            review_id: r.clone(),
            overlap: *ov,
            dual: false,
        })
        .collect();

    let dual_reviews: BTreeSet<String> = sample(
        &mut rng,
        &overlap_set,
        config.n_overlap_dual,
        "dual overlapping set".into(),
    )?
    .into_iter()
    .collect();
    let random_idx: Vec<usize> = (0..tasks.len()).filter(|&i| !tasks[i].overlap).collect();
    if random_idx.len() < config.n_random_dual {
        return Err(CampaignError::InsufficientReviews {
            what: "dual random set".into(),
            needed: config.n_random_dual,
            available: random_idx.len(),
        });
    }
    let mut random_pick = random_idx;
    random_pick.shuffle(&mut rng);
    random_pick.truncate(config.n_random_dual);
    let random_pick: BTreeSet<usize> = random_pick.into_iter().collect();

    let mut duals = Vec::new();
    for (i, t) in tasks.iter().enumerate() {
        if (t.overlap && dual_reviews.contains(&t.review_id)) || random_pick.contains(&i) {
            duals.push(FacetTask {
                annotator_id: config.annotators[(i % k + 1) % k].clone(),
                dual: true,
                ..t.clone()
            });
        }
    }
    tasks.extend(duals);
    for (i, t) in tasks.iter_mut().enumerate() {
        t.task_id = format!("f{:05}", i + 1);
    }

    Ok(CampaignPlan {
        seed,
        pairwise_seed: None,
        overlapping_reviews: overlap_set,
        per_system_random,
        facet_tasks: tasks,
        pairwise_tasks: Vec::new(),
    })
}

type Pair = (String, String, String);

fn pairs_for(corpus: &Corpus, systems: &[String], reviews: &BTreeSet<String>) -> Vec<Pair> {
    let mut out = Vec::new();
    let mut sorted: Vec<&String> = systems.iter().collect();
    sorted.sort();
    for r in reviews {
        let present: Vec<&&String> = sorted.iter().filter(|s| corpus.summary(s, r).is_some()).collect();
        for i in 0..present.len() {
            for j in i + 1..present.len() {
                out.push((r.clone(), (*present[i]).clone(), (*present[j]).clone()));
            }
        }
    }
    out
}

/// Adds pairwise comparisons to `plan`. Each annotator receives `quota`
/// distinct unordered (review, pair) triples, ⌈fraction·quota⌉ of them from
/// the overlapping reviews, with the display order decided by a coin flip.
pub fn plan_pairwise_campaign(
    corpus: &Corpus,
    systems: &[String],
    plan: &CampaignPlan,
    config: &PairwisePlanConfig,
    seed: u64,
) -> Result<CampaignPlan, CampaignError> {
    if systems.is_empty() {
        return Err(CampaignError::NoSystems);
    }
    if config.quotas.is_empty() {
        return Err(CampaignError::NoAnnotators);
    }
    check_unique(systems)?;
    check_unique(&config.quotas.iter().map(|(a, _)| a.clone()).collect::<Vec<_>>())?;
    if !(0.0..=1.0).contains(&config.overlap_fraction) {
        return Err(CampaignError::BadFraction(config.overlap_fraction));
    }
    if plan.overlapping_reviews.is_empty() {
        return Err(CampaignError::EmptyOverlap);
    }
    let others: BTreeSet<String> = corpus
        .reviews()
        .iter()
        .map(|r| r.review_id.clone())
        .filter(|r| !plan.overlapping_reviews.contains(r))
        .collect();
    let overlap_pool = pairs_for(corpus, systems, &plan.overlapping_reviews);
    let other_pool = pairs_for(corpus, systems, &others);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tasks = Vec::new();
    for (annotator, quota) in &config.quotas {
        let n_ov = (config.overlap_fraction * *quota as f64).ceil() as usize;
        let n_ov = n_ov.min(*quota);
        for (pool, name, n, is_ov) in [
            (&overlap_pool, "overlapping", n_ov, true),
            (&other_pool, "non-overlapping", quota - n_ov, false),
        ] {
            if pool.len() < n {
                return Err(CampaignError::NotEnoughPairs {
                    annotator: annotator.clone(),
                    pool: name,
                    needed: n,
                    available: pool.len(),
                });
            }
            let mut idx: Vec<usize> = (0..pool.len()).collect();
            idx.shuffle(&mut rng);
            for &i in &idx[..n] {
                let (r, a, b) = &pool[i];
                let (system_a, system_b) = if rng.random_bool(0.5) {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                };
                tasks.push(PairwiseTask {
                    task_id: String::new(),
                    annotator_id: annotator.clone(),
                    review_id: r.clone(),
                    system_a,
                    system_b,
                    overlap: is_ov,
                });
            }
        }
    }
    for (i, t) in tasks.iter_mut().enumerate() {
        t.task_id = format!("p{:05}", i + 1);
    }
    let mut out = plan.clone();
    out.pairwise_seed = Some(seed);
    out.pairwise_tasks = tasks;
    Ok(out)
}

/// Realized number of comparisons per unordered system pair.
pub fn pair_counts(plan: &CampaignPlan) -> BTreeMap<(String, String), usize> {
    let mut out = BTreeMap::new();
    for t in &plan.pairwise_tasks {
        let (_, a, b) = t.unordered();
        *out.entry((a.to_string(), b.to_string())).or_default() += 1;
    }
    out
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum PlanLine {
    Meta {
        seed: u64,
        #[serde(default)]
        pairwise_seed: Option<u64>,
        overlapping_reviews: BTreeSet<String>,
        per_system_random: BTreeMap<String, BTreeSet<String>>,
    },
    Facet(FacetTask),
    Pairwise(PairwiseTask),
}

impl CampaignPlan {
    /// One meta line, then facet and pairwise task lines in plan order.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        jsonl::write_line(
            &mut w,
            &PlanLine::Meta {
                seed: self.seed,
                pairwise_seed: self.pairwise_seed,
                overlapping_reviews: self.overlapping_reviews.clone(),
                per_system_random: self.per_system_random.clone(),
            },
        )?;
        for t in &self.facet_tasks {
            jsonl::write_line(&mut w, &PlanLine::Facet(t.clone()))?;
        }
        for t in &self.pairwise_tasks {
            jsonl::write_line(&mut w, &PlanLine::Pairwise(t.clone()))?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    pub fn from_jsonl(text: &str) -> Result<Self, CampaignError> {
        Self::from_lines(jsonl::read_from(text.as_bytes()), Path::new("<plan>"))
    }

    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        Self::from_lines(jsonl::read(path), path)
    }

    fn from_lines(lines: Result<Vec<(usize, PlanLine)>, jsonl::ReadError>, path: &Path) -> Result<Self, CampaignError> {
        let lines = lines.map_err(|e| match e {
            jsonl::ReadError::Io(source) => CampaignError::Io {
                path: path.to_path_buf(),
                source,
            },
            jsonl::ReadError::Parse { line, source } => CampaignError::Parse {
                path: path.to_path_buf(),
                line,
                source,
            },
        })?;
        let mut iter = lines.into_iter();
        let mut plan = match iter.next() {
            Some((
                _,
                PlanLine::Meta {
                    seed,
                    pairwise_seed,
                    overlapping_reviews,
                    per_system_random,
                },
            )) => CampaignPlan {
                seed,
                pairwise_seed,
                overlapping_reviews,
                per_system_random,
                ..Default::default()
            },
            _ => return Err(CampaignError::Invalid("first line must be the meta record".into())),
        };
        for (line, rec) in iter {
            match rec {
                PlanLine::Meta { .. } => {
                    return Err(CampaignError::Invalid(format!("line {line}: second meta record")));
                }
                PlanLine::Facet(t) => plan.facet_tasks.push(t),
                PlanLine::Pairwise(t) => plan.pairwise_tasks.push(t),
            }
        }
        plan.check_invariants()?;
        Ok(plan)
    }

    /// Structural invariants that do not need the corpus.
    pub fn check_invariants(&self) -> Result<(), CampaignError> {
        let bad = |m: String| Err(CampaignError::Invalid(m));
        for (s, set) in &self.per_system_random {
            if let Some(r) = set.intersection(&self.overlapping_reviews).next() {
                return bad(format!("review {r:?} is both overlapping and random for {s:?}"));
            }
        }
        let mut ids = BTreeSet::new();
        let mut facet = BTreeSet::new();
        for t in &self.facet_tasks {
            if !ids.insert(t.task_id.as_str()) {
                return bad(format!("duplicate task_id {:?}", t.task_id));
            }
            if !facet.insert((&t.annotator_id, &t.system_id, &t.review_id)) {
                return bad(format!("duplicate facet task {}", t.task_id));
            }
        }
        let mut pairs = BTreeSet::new();
        for t in &self.pairwise_tasks {
            if !ids.insert(t.task_id.as_str()) {
                return bad(format!("duplicate task_id {:?}", t.task_id));
            }
            if t.system_a == t.system_b {
                return bad(format!("task {} compares a system with itself", t.task_id));
            }
            if !pairs.insert((t.annotator_id.as_str(), t.unordered())) {
                return bad(format!("duplicate pairwise task {}", t.task_id));
            }
        }
        Ok(())
    }

    /// Every task references a summary present in `corpus`.
    pub fn check_against(&self, corpus: &Corpus) -> Result<(), CampaignError> {
        self.check_invariants()?;
        let missing = |t: &str, s: &str, r: &str| {
            Err(CampaignError::Invalid(format!(
                "task {t}: no summary for system {s:?} on review {r:?}"
            )))
        };
        for t in &self.facet_tasks {
            if corpus.summary(&t.system_id, &t.review_id).is_none() {
                return missing(&t.task_id, &t.system_id, &t.review_id);
            }
        }
        for t in &self.pairwise_tasks {
            for s in [&t.system_a, &t.system_b] {
                if corpus.summary(s, &t.review_id).is_none() {
                    return missing(&t.task_id, s, &t.review_id);
                }
            }
        }
        Ok(())
    }
}
