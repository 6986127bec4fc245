use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use mslr_eval::campaign::{CampaignPlan, FacetTask, PairwiseTask};
use mslr_eval::corpus::{AnnotationLog, LogEntry};
use mslr_eval::humaneval::Annotation;
use mslr_eval::Corpus;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Slot {
    Facet(usize),
    Pairwise(usize),
}

/// A loaded plan with lookup indexes.
#[derive(Debug)]
pub(crate) struct Campaign {
    pub plan: CampaignPlan,
    pub by_id: HashMap<String, Slot>,
    /// Tasks per annotator in plan order: facet tasks, then pairwise.
    pub by_annotator: BTreeMap<String, Vec<Slot>>,
}

impl Campaign {
    pub fn new(plan: CampaignPlan) -> Self {
        let mut by_id = HashMap::new();
        let mut by_annotator: BTreeMap<String, Vec<Slot>> = BTreeMap::new();
        for (i, t) in plan.facet_tasks.iter().enumerate() {
            by_id.insert(t.task_id.clone(), Slot::Facet(i));
            by_annotator
                .entry(t.annotator_id.clone())
                .or_default()
                .push(Slot::Facet(i));
        }
        for (i, t) in plan.pairwise_tasks.iter().enumerate() {
            by_id.insert(t.task_id.clone(), Slot::Pairwise(i));
            by_annotator
                .entry(t.annotator_id.clone())
                .or_default()
                .push(Slot::Pairwise(i));
        }
        Self {
            plan,
            by_id,
            by_annotator,
        }
    }

    pub fn facet(&self, i: usize) -> &FacetTask {
        &self.plan.facet_tasks[i]
    }

    pub fn pairwise(&self, i: usize) -> &PairwiseTask {
        &self.plan.pairwise_tasks[i]
    }

    pub fn annotator_of(&self, slot: Slot) -> &str {
        match slot {
            Slot::Facet(i) => &self.facet(i).annotator_id,
            Slot::Pairwise(i) => &self.pairwise(i).annotator_id,
        }
    }

    pub fn is_done(&self, slot: Slot, done: &Completed) -> bool {
        match slot {
            Slot::Facet(i) => {
                let t = self.facet(i);
                done.facet
                    .contains(&(t.annotator_id.clone(), t.review_id.clone(), t.system_id.clone()))
            }
            Slot::Pairwise(i) => {
                let t = self.pairwise(i);
                let (r, a, b) = t.unordered();
                done.pairwise
                    .contains(&(t.annotator_id.clone(), r.to_string(), a.to_string(), b.to_string()))
            }
        }
    }
}

/// Work already present in the log, keyed the way tasks are matched.
#[derive(Debug, Default)]
pub(crate) struct Completed {
    pub facet: BTreeSet<(String, String, String)>,
    pub pairwise: BTreeSet<(String, String, String, String)>,
}

impl Completed {
    pub fn from_log(entries: &[LogEntry]) -> Self {
        let mut out = Self::default();
        for e in entries {
            match &e.annotation {
                Annotation::Facet(a) => {
                    out.facet
                        .insert((a.annotator_id.clone(), a.review_id.clone(), a.system_id.clone()));
                }
                Annotation::Pairwise(a) => {
                    let (x, y) = if a.system_a <= a.system_b {
                        (&a.system_a, &a.system_b)
                    } else {
                        (&a.system_b, &a.system_a)
                    };
                    out.pairwise
                        .insert((a.annotator_id.clone(), a.review_id.clone(), x.clone(), y.clone()));
                }
            }
        }
        out
    }
}

#[derive(Debug)]
pub(crate) struct Shared {
    pub corpus: Corpus,
    pub log: AnnotationLog,
    pub campaign: RwLock<Option<Arc<Campaign>>>,
    /// Where an uploaded plan is persisted.
    pub plan_path: Option<PathBuf>,
    /// Serializes submissions and plan uploads so that the completion check
    /// and the append are atomic.
    pub writer: Mutex<()>,
}

/// Shared service state; cheap to clone.
#[derive(Debug, Clone)]
pub struct AppState {
    pub(crate) shared: Arc<Shared>,
}

impl AppState {
    pub(crate) fn campaign(&self) -> Option<Arc<Campaign>> {
        self.shared.campaign.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub(crate) fn completed(&self) -> Completed {
        Completed::from_log(&self.shared.log.entries())
    }
}
