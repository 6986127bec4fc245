//! Loading of the files a run reads: corpus, sidecars, metric CSVs written
//! by `score`, and the annotation export.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use mslr_eval::corpus::{load_corpus, load_sidecars, read_log, MetricStore};
use mslr_eval::humaneval::{normalize_facets, Annotation, Facet, FacetAnnotation, PairwiseAnnotation};
use mslr_eval::{Corpus, MetricId, MetricRecord, SidecarBundle};

use crate::config::RunConfig;

pub type Instance = (String, String);

pub fn corpus(cfg: &RunConfig) -> Result<Corpus> {
    let c = cfg.corpus()?;
    load_corpus(&c.reviews, &c.generated).context("loading corpus")
}

pub fn sidecars(cfg: &RunConfig, corpus: &Corpus) -> Result<SidecarBundle> {
    load_sidecars(&cfg.sidecars.paths(), corpus).context("loading sidecars")
}

pub const UNDEFINED_FILE: &str = "undefined.csv";

pub fn metric_file(dir: &Path, metric: MetricId) -> std::path::PathBuf {
    dir.join(format!("{metric}.csv"))
}

#[derive(Deserialize)]
struct ValueRow {
    system_id: String,
    review_id: String,
    value: f64,
}

#[derive(Deserialize)]
struct UndefinedRow {
    metric_id: String,
    system_id: String,
    review_id: String,
}

/// Instance-level values per metric; `None` marks an instance `score`
/// reported as undefined.
#[derive(Debug, Default)]
pub struct MetricTable {
    pub values: BTreeMap<MetricId, BTreeMap<Instance, Option<f64>>>,
}

impl MetricTable {
    pub fn load(cfg: &RunConfig, corpus: &Corpus) -> Result<Self> {
        let dir = cfg.metrics_dir();
        let mut store = MetricStore::new();
        let metrics = cfg.enabled_metrics();
        for &m in &metrics {
            let path = metric_file(&dir, m);
            if !path.exists() {
                bail!("metric file {} not found; run `score` or disable {m}", path.display());
            }
            let mut rdr = csv::Reader::from_path(&path).with_context(|| format!("reading {}", path.display()))?;
            for (i, row) in rdr.deserialize::<ValueRow>().enumerate() {
                let row = row.with_context(|| format!("{}: row {}", path.display(), i + 2))?;
                store
                    .insert(
                        MetricRecord {
                            system_id: row.system_id,
                            review_id: row.review_id,
                            metric_id: m,
                            value: row.value,
                        },
                        Some(corpus),
                    )
                    .with_context(|| format!("{}: row {}", path.display(), i + 2))?;
            }
        }
        let mut values: BTreeMap<MetricId, BTreeMap<Instance, Option<f64>>> = BTreeMap::new();
        for &m in &metrics {
            let col = values.entry(m).or_default();
            for r in store.records(m) {
                col.insert((r.system_id, r.review_id), Some(r.value));
            }
        }
        let undefined = dir.join(UNDEFINED_FILE);
        if undefined.exists() {
            let mut rdr = csv::Reader::from_path(&undefined)?;
            for (i, row) in rdr.deserialize::<UndefinedRow>().enumerate() {
                let row = row.with_context(|| format!("{}: row {}", undefined.display(), i + 2))?;
                let m: MetricId = row
                    .metric_id
                    .parse()
                    .map_err(anyhow::Error::msg)
                    .with_context(|| format!("{}: row {}", undefined.display(), i + 2))?;
                if let Some(col) = values.get_mut(&m) {
                    let key = (row.system_id, row.review_id);
                    if col.contains_key(&key) {
                        bail!(
                            "{}: {m} instance ({}, {}) is both defined and undefined",
                            undefined.display(),
                            key.0,
                            key.1
                        );
                    }
                    col.insert(key, None);
                }
            }
        }
        Ok(Self { values })
    }

    pub fn metrics(&self) -> Vec<MetricId> {
        self.values.keys().copied().collect()
    }

    pub fn get(&self, metric: MetricId, key: &Instance) -> Option<f64> {
        self.values.get(&metric).and_then(|c| c.get(key).copied().flatten())
    }

    /// Every instance with a row (defined or not) for any metric.
    pub fn instances(&self) -> BTreeSet<Instance> {
        self.values.values().flat_map(|c| c.keys().cloned()).collect()
    }
}

#[derive(Debug, Default)]
pub struct Annotations {
    pub facet: Vec<FacetAnnotation>,
    pub pairwise: Vec<PairwiseAnnotation>,
}

impl Annotations {
    /// Reads the configured export; an unconfigured path yields no annotations.
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let mut out = Self::default();
        let Some(path) = &cfg.annotations else {
            return Ok(out);
        };
        for e in read_log(path).with_context(|| format!("reading annotations {}", path.display()))? {
            match e.annotation {
                Annotation::Facet(a) => out.facet.push(a),
                Annotation::Pairwise(a) => out.pairwise.push(a),
            }
        }
        Ok(out)
    }

    /// Facet-annotated (system, review) instances.
    pub fn facet_subset(&self) -> BTreeSet<Instance> {
        self.facet
            .iter()
            .map(|a| (a.system_id.clone(), a.review_id.clone()))
            .collect()
    }

    /// Per instance, each facet score averaged over the annotators with a
    /// defined value.
    pub fn facet_scores(&self) -> BTreeMap<Instance, BTreeMap<Facet, Option<f64>>> {
        let mut acc: BTreeMap<Instance, BTreeMap<Facet, (f64, usize)>> = BTreeMap::new();
        for a in &self.facet {
            let s = normalize_facets(a);
            let entry = acc.entry((a.system_id.clone(), a.review_id.clone())).or_default();
            for f in Facet::ALL {
                let slot = entry.entry(f).or_default();
                if let Some(v) = f.get(&s) {
                    slot.0 += v;
                    slot.1 += 1;
                }
            }
        }
        acc.into_iter()
            .map(|(k, m)| {
                let means = m
                    .into_iter()
                    .map(|(f, (sum, n))| (f, (n > 0).then(|| sum / n as f64)))
                    .collect();
                (k, means)
            })
            .collect()
    }
}
