use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Corpus;

/// The automated metrics computed per generated summary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricId {
    #[serde(rename = "ROUGE1F")]
    Rouge1F,
    #[serde(rename = "ROUGE2F")]
    Rouge2F,
    #[serde(rename = "ROUGELF")]
    RougeLF,
    #[serde(rename = "AvgROUGEF")]
    AvgRougeF,
    #[serde(rename = "BERTScoreF")]
    BertScoreF,
    #[serde(rename = "DeltaEI")]
    DeltaEi,
    #[serde(rename = "NLI")]
    Nli,
    #[serde(rename = "STS")]
    Sts,
    #[serde(rename = "ClaimVer")]
    ClaimVer,
    #[serde(rename = "PIOOverlap")]
    PioOverlap,
}

impl MetricId {
    pub const ALL: [MetricId; 10] = [
        MetricId::Rouge1F,
        MetricId::Rouge2F,
        MetricId::RougeLF,
        MetricId::AvgRougeF,
        MetricId::BertScoreF,
        MetricId::DeltaEi,
        MetricId::Nli,
        MetricId::Sts,
        MetricId::ClaimVer,
        MetricId::PioOverlap,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MetricId::Rouge1F => "ROUGE1F",
            MetricId::Rouge2F => "ROUGE2F",
            MetricId::RougeLF => "ROUGELF",
            MetricId::AvgRougeF => "AvgROUGEF",
            MetricId::BertScoreF => "BERTScoreF",
            MetricId::DeltaEi => "DeltaEI",
            MetricId::Nli => "NLI",
            MetricId::Sts => "STS",
            MetricId::ClaimVer => "ClaimVer",
            MetricId::PioOverlap => "PIOOverlap",
        }
    }

    /// Delta-EI is a divergence; every other metric is a similarity.
    pub fn lower_is_better(self) -> bool {
        matches!(self, MetricId::DeltaEi)
    }
}

impl fmt::Display for MetricId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MetricId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        MetricId::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub system_id: String,
    pub review_id: String,
    pub metric_id: MetricId,
    pub value: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricStoreError {
    #[error("duplicate {metric} record for (system {system_id:?}, review {review_id:?})")]
    Duplicate {
        metric: MetricId,
        system_id: String,
        review_id: String,
    },
    #[error("non-finite {metric} value for (system {system_id:?}, review {review_id:?})")]
    NonFinite {
        metric: MetricId,
        system_id: String,
        review_id: String,
    },
    #[error("{metric} record references (system {system_id:?}, review {review_id:?}) absent from the corpus")]
    Unknown {
        metric: MetricId,
        system_id: String,
        review_id: String,
    },
}

/// Instance-level metric values, one per `(system, review, metric)`.
#[derive(Debug, Clone, Default)]
pub struct MetricStore {
    values: BTreeMap<(MetricId, String, String), f64>,
}

impl MetricStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a record, rejecting duplicates and non-finite values. When a
    /// corpus is supplied the record must reference one of its summaries.
    pub fn insert(&mut self, record: MetricRecord, corpus: Option<&Corpus>) -> Result<(), MetricStoreError> {
        let MetricRecord {
            system_id,
            review_id,
            metric_id: metric,
            value,
        } = record;
        if !value.is_finite() {
            return Err(MetricStoreError::NonFinite {
                metric,
                system_id,
                review_id,
            });
        }
        if let Some(c) = corpus {
            if c.summary(&system_id, &review_id).is_none() {
                return Err(MetricStoreError::Unknown {
                    metric,
                    system_id,
                    review_id,
                });
            }
        }
        let key = (metric, system_id, review_id);
        if self.values.contains_key(&key) {
            let (metric, system_id, review_id) = key;
            return Err(MetricStoreError::Duplicate {
                metric,
                system_id,
                review_id,
            });
        }
        self.values.insert(key, value);
        Ok(())
    }

    pub fn get(&self, metric: MetricId, system_id: &str, review_id: &str) -> Option<f64> {
        self.values
            .get(&(metric, system_id.to_string(), review_id.to_string()))
            .copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn metrics(&self) -> Vec<MetricId> {
        let mut m: Vec<MetricId> = self.values.keys().map(|k| k.0).collect();
        m.dedup();
        m
    }

    /// Records for one metric ordered by `(system, review)`.
    pub fn records(&self, metric: MetricId) -> impl Iterator<Item = MetricRecord> + '_ {
        self.values
            .iter()
            .filter(move |(k, _)| k.0 == metric)
            .map(|((m, s, r), v)| MetricRecord {
                system_id: s.clone(),
                review_id: r.clone(),
                metric_id: *m,
                value: *v,
            })
    }
}
