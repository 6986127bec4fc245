//! Run configuration, read from TOML. Relative paths resolve against the
//! directory containing the config file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use mslr_eval::campaign::{FacetPlanConfig, PairwisePlanConfig};
use mslr_eval::corpus::SidecarPaths;
use mslr_eval::lexical::{CopyingConfig, TokenizerConfig};
use mslr_eval::MetricId;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub corpus: Option<CorpusSection>,
    #[serde(default)]
    pub sidecars: SidecarSection,
    #[serde(default)]
    pub tokenizer: TokenizerConfig,
    #[serde(default)]
    pub metrics: MetricSection,
    #[serde(default)]
    pub copying: CopyingConfig,
    #[serde(default)]
    pub selfrep: SelfRepSection,
    #[serde(default)]
    pub annotations: Option<PathBuf>,
    #[serde(default)]
    pub bootstrap: BootstrapSection,
    #[serde(default)]
    pub campaign: CampaignSection,
    #[serde(default)]
    pub serve: ServeSection,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub reviews: PathBuf,
    pub generated: PathBuf,
    /// Reviews of the training split; only their targets are read.
    #[serde(default)]
    pub train_targets: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SidecarSection {
    pub pio: Option<PathBuf>,
    pub evidence: Option<PathBuf>,
    pub statements: Option<PathBuf>,
    pub directions: Option<PathBuf>,
    #[serde(default)]
    pub embeddings: Vec<PathBuf>,
}

impl SidecarSection {
    pub fn paths(&self) -> SidecarPaths {
        SidecarPaths {
            pio: self.pio.clone(),
            evidence: self.evidence.clone(),
            statements: self.statements.clone(),
            directions: self.directions.clone(),
            embeddings: self.embeddings.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSection {
    /// Metrics computed by `score`; all of them when absent.
    #[serde(default)]
    pub enabled: Option<Vec<MetricId>>,
    /// Where `score` writes and the analyses read metric CSVs.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub encoders: Encoders,
}

/// Encoder ids looked up in the embedding sidecars.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Encoders {
    #[serde(default = "enc_bertscore")]
    pub bertscore: String,
    #[serde(default = "enc_nli")]
    pub nli: String,
    #[serde(default = "enc_sts")]
    pub sts: String,
    #[serde(default = "enc_claimver")]
    pub claimver: String,
}

fn enc_bertscore() -> String {
    "bertscore".into()
}
fn enc_nli() -> String {
    "nli".into()
}
fn enc_sts() -> String {
    "sts".into()
}
fn enc_claimver() -> String {
    "claimver".into()
}

impl Default for Encoders {
    fn default() -> Self {
        Self {
            bertscore: enc_bertscore(),
            nli: enc_nli(),
            sts: enc_sts(),
            claimver: enc_claimver(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelfRepSection {
    /// n-gram lengths for the self-repetition and train-overlap series.
    #[serde(default = "default_ns")]
    pub ns: Vec<usize>,
    /// n for the coverage series and the train-vs-generated comparison.
    #[serde(default = "default_coverage_n")]
    pub coverage_n: usize,
    /// n for the most-frequent n-gram table.
    #[serde(default = "default_top_n")]
    pub top_n: usize,
}

fn default_ns() -> Vec<usize> {
    (1..=10).collect()
}
fn default_coverage_n() -> usize {
    7
}
fn default_top_n() -> usize {
    8
}

impl Default for SelfRepSection {
    fn default() -> Self {
        Self {
            ns: default_ns(),
            coverage_n: default_coverage_n(),
            top_n: default_top_n(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    10_000
}

impl Default for BootstrapSection {
    fn default() -> Self {
        Self {
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignSection {
    pub plan: Option<PathBuf>,
    pub log: Option<PathBuf>,
    pub facet: Option<FacetPlanConfig>,
    pub pairwise: Option<PairwiseSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairwiseSection {
    /// Systems compared; the facet systems when absent.
    #[serde(default)]
    pub systems: Option<Vec<String>>,
    /// Annotator id to number of comparisons.
    pub quotas: BTreeMap<String, usize>,
    /// Assignment order of `quotas`; sorted ids when absent.
    #[serde(default)]
    pub order: Option<Vec<String>>,
    pub overlap_fraction: f64,
    /// Defaults to the run seed plus one.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl PairwiseSection {
    pub fn plan_config(&self) -> Result<PairwisePlanConfig> {
        let order: Vec<String> = match &self.order {
            Some(o) => o.clone(),
            None => self.quotas.keys().cloned().collect(),
        };
        let mut quotas = Vec::with_capacity(order.len());
        for a in order {
            let q = *self
                .quotas
                .get(&a)
                .with_context(|| format!("annotator {a:?} is listed in `order` but has no quota"))?;
            quotas.push((a, q));
        }
        if quotas.len() != self.quotas.len() {
            bail!("`order` must list every annotator in `quotas` exactly once");
        }
        Ok(PairwisePlanConfig {
            quotas,
            overlap_fraction: self.overlap_fraction,
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServeSection {
    #[serde(default = "default_addr")]
    pub addr: String,
}

fn default_addr() -> String {
    "127.0.0.1:8080".into()
}

impl Default for ServeSection {
    fn default() -> Self {
        Self { addr: default_addr() }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig = toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        Ok(cfg)
    }

    /// Parses TOML with paths resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).context("parsing config")?;
        cfg.resolve(base);
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_opt = |p: &mut Option<PathBuf>| {
            if let Some(p) = p {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        };
        fix(&mut self.output_dir);
        if let Some(c) = &mut self.corpus {
            fix(&mut c.reviews);
            fix(&mut c.generated);
            fix_opt(&mut c.train_targets);
        }
        fix_opt(&mut self.sidecars.pio);
        fix_opt(&mut self.sidecars.evidence);
        fix_opt(&mut self.sidecars.statements);
        fix_opt(&mut self.sidecars.directions);
        self.sidecars.embeddings.iter_mut().for_each(fix);
        fix_opt(&mut self.metrics.dir);
        fix_opt(&mut self.annotations);
        fix_opt(&mut self.campaign.plan);
        fix_opt(&mut self.campaign.log);
    }

    pub fn metrics_dir(&self) -> PathBuf {
        self.metrics
            .dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("metrics"))
    }

    pub fn corpus(&self) -> Result<&CorpusSection> {
        self.corpus.as_ref().context("config has no [corpus] section")
    }

    pub fn enabled_metrics(&self) -> Vec<MetricId> {
        self.metrics.enabled.clone().unwrap_or_else(|| MetricId::ALL.to_vec())
    }
}
