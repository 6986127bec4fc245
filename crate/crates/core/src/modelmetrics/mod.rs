//! Metrics computed from sidecar model outputs.
//!
//! None of these run a model: span tags, evidence-direction distributions and
//! embeddings are produced elsewhere and loaded through
//! [`corpus::load_sidecars`](crate::corpus::load_sidecars).

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::corpus::{EvidenceDistribution, PioSpan, TextEmbedding, TokenEmbeddingMatrix, DIST_TOLERANCE};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("invalid probability distribution {0:?}")]
    InvalidDistribution([f64; 3]),
    #[error("duplicate I/O pair ({0:?}, {1:?}) on one side; pairs must be pre-aggregated")]
    DuplicatePair(String, String),
    #[error("encoder mismatch: {0:?} vs {1:?}")]
    EncoderMismatch(String, String),
    #[error("dimensionality mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("empty token embedding matrix")]
    EmptyMatrix,
}

const UNIFORM: [f64; 3] = [1.0 / 3.0; 3];

fn valid(p: &[f64; 3]) -> bool {
    p.iter().all(|x| x.is_finite() && (0.0..=1.0).contains(x)) && (p.iter().sum::<f64>() - 1.0).abs() <= DIST_TOLERANCE
}

/// Jensen-Shannon divergence with base-2 logarithms, so the result lies in
/// `[0, 1]`.
pub fn jensen_shannon(p: &[f64; 3], q: &[f64; 3]) -> Result<f64, MetricError> {
    if !valid(p) {
        return Err(MetricError::InvalidDistribution(*p));
    }
    if !valid(q) {
        return Err(MetricError::InvalidDistribution(*q));
    }
    let mut total = 0.0;
    for i in 0..3 {
        let m = 0.5 * (p[i] + q[i]);
        if p[i] > 0.0 {
            total += 0.5 * p[i] * (p[i] / m).log2();
        }
        if q[i] > 0.0 {
            total += 0.5 * q[i] * (q[i] / m).log2();
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeltaEiScore {
    pub per_pair: BTreeMap<(String, String), f64>,
    pub total: f64,
}

fn index_pairs(pairs: &[EvidenceDistribution]) -> Result<BTreeMap<(String, String), [f64; 3]>, MetricError> {
    let mut out = BTreeMap::new();
    for p in pairs {
        let key = (p.intervention.clone(), p.outcome.clone());
        if out.insert(key.clone(), p.dist).is_some() {
            return Err(MetricError::DuplicatePair(key.0, key.1));
        }
    }
    Ok(out)
}

/// Summed JSD between target and generated evidence distributions over the
/// union of I/O pairs. A pair present on only one side is compared against
/// the uniform distribution. Lower is better.
pub fn delta_ei(
    target_pairs: &[EvidenceDistribution],
    generated_pairs: &[EvidenceDistribution],
) -> Result<DeltaEiScore, MetricError> {
    let target = index_pairs(target_pairs)?;
    let generated = index_pairs(generated_pairs)?;
    let keys: BTreeSet<&(String, String)> = target.keys().chain(generated.keys()).collect();
    let mut per_pair = BTreeMap::new();
    for key in keys {
        let t = target.get(key).unwrap_or(&UNIFORM);
        let g = generated.get(key).unwrap_or(&UNIFORM);
        per_pair.insert(key.clone(), jensen_shannon(t, g)?);
    }
    let total = per_pair.values().sum();
    Ok(DeltaEiScore { per_pair, total })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PioOverlapScore {
    pub matched: usize,
    pub target_total: usize,
    /// `None` when the target has no spans; such instances are excluded from
    /// aggregation rather than scored 0.
    pub score: Option<f64>,
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    needle.len() <= haystack.len() && haystack.windows(needle.len()).any(|w| w == needle)
}

fn spans_overlap(a: &PioSpan, b: &PioSpan) -> bool {
    a.label == b.label && (contains_run(&a.tokens, &b.tokens) || contains_run(&b.tokens, &a.tokens))
}

/// Fraction of target spans matched by a generated span with the same label
/// where one token sequence is a contiguous run of the other.
pub fn pio_overlap(target_spans: &[PioSpan], generated_spans: &[PioSpan]) -> PioOverlapScore {
    let matched = target_spans
        .iter()
        .filter(|t| generated_spans.iter().any(|g| spans_overlap(t, g)))
        .count();
    let target_total = target_spans.len();
    PioOverlapScore {
        matched,
        target_total,
        score: (target_total > 0).then(|| matched as f64 / target_total as f64),
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::DimensionMismatch(a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(MetricError::ZeroNorm);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// Cosine similarity between the target and generated sentence embeddings.
/// Serves NLI, STS and ClaimVer under their respective encoders.
pub fn cosine_metric(target: &TextEmbedding, generated: &TextEmbedding) -> Result<f64, MetricError> {
    if target.encoder_id != generated.encoder_id {
        return Err(MetricError::EncoderMismatch(
            target.encoder_id.clone(),
            generated.encoder_id.clone(),
        ));
    }
    cosine(&target.vector, &generated.vector)
}

/// Greedy-matching BERTScore precision, recall and F without IDF weighting
/// or baseline rescaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

fn unit_rows(m: &TokenEmbeddingMatrix) -> Result<Vec<Vec<f64>>, MetricError> {
    m.vectors
        .iter()
        .map(|v| {
            let n = norm(v);
            if n == 0.0 {
                Err(MetricError::ZeroNorm)
            } else {
                Ok(v.iter().map(|x| x / n).collect())
            }
        })
        .collect()
}

pub fn bertscore(candidate: &TokenEmbeddingMatrix, reference: &TokenEmbeddingMatrix) -> Result<BertScore, MetricError> {
    if candidate.encoder_id != reference.encoder_id {
        return Err(MetricError::EncoderMismatch(
            candidate.encoder_id.clone(),
            reference.encoder_id.clone(),
        ));
    }
    if candidate.vectors.is_empty() || reference.vectors.is_empty() {
        return Err(MetricError::EmptyMatrix);
    }
    if candidate.dim() != reference.dim() {
        return Err(MetricError::DimensionMismatch(candidate.dim(), reference.dim()));
    }
    let c = unit_rows(candidate)?;
    let r = unit_rows(reference)?;
    let sim: Vec<Vec<f64>> = c
        .iter()
        .map(|x| {
            r.iter()
                .map(|y| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>().clamp(-1.0, 1.0))
                .collect()
        })
        .collect();
    let precision = sim
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / c.len() as f64;
    let recall = (0..r.len())
        .map(|j| sim.iter().map(|row| row[j]).fold(f64::NEG_INFINITY, f64::max))
        .sum::<f64>()
        / r.len() as f64;
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(BertScore { precision, recall, f })
}

/// BERTScore-F of a candidate against a reference.
pub fn bertscore_f(candidate: &TokenEmbeddingMatrix, reference: &TokenEmbeddingMatrix) -> Result<f64, MetricError> {
    bertscore(candidate, reference).map(|s| s.f)
}
