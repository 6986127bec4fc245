use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RougeVariant {
    R1,
    R2,
    /// ROUGE-N for n >= 3.
    Rn(usize),
    RL,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub variant: RougeVariant,
}

impl RougeScore {
    fn from_counts(matched: usize, cand_total: usize, ref_total: usize, variant: RougeVariant) -> Self {
        if cand_total == 0 || ref_total == 0 {
            return Self::zero(variant);
        }
        let precision = matched as f64 / cand_total as f64;
        let recall = matched as f64 / ref_total as f64;
        Self {
            precision,
            recall,
            f: f_measure(precision, recall),
            variant,
        }
    }

    fn zero(variant: RougeVariant) -> Self {
        Self {
            precision: 0.0,
            recall: 0.0,
            f: 0.0,
            variant,
        }
    }
}

pub(crate) fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// ROUGE-N with clipped n-gram counts.
///
/// # Panics
///
/// Panics if `n` is 0.
pub fn rouge_n(candidate: &TokenSequence, reference: &TokenSequence, n: usize) -> RougeScore {
    assert!(n >= 1, "ROUGE-N requires n >= 1");
    let variant = match n {
        1 => RougeVariant::R1,
        2 => RougeVariant::R2,
        n => RougeVariant::Rn(n),
    };
    let mut ref_counts: HashMap<&[String], usize> = HashMap::new();
    let mut ref_total = 0;
    for g in reference.ngrams(n) {
        *ref_counts.entry(g).or_default() += 1;
        ref_total += 1;
    }
    let mut cand_total = 0;
    let mut matched = 0;
    for g in candidate.ngrams(n) {
        cand_total += 1;
        if let Some(c) = ref_counts.get_mut(g) {
            if *c > 0 {
                *c -= 1;
                matched += 1;
            }
        }
    }
    RougeScore::from_counts(matched, cand_total, ref_total, variant)
}

/// Length of the longest common subsequence.
pub(crate) fn lcs_len(a: &[String], b: &[String]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// Summary-level ROUGE-L over the whole token sequences.
pub fn rouge_l(candidate: &TokenSequence, reference: &TokenSequence) -> RougeScore {
    let lcs = lcs_len(&candidate.tokens, &reference.tokens);
    RougeScore::from_counts(lcs, candidate.len(), reference.len(), RougeVariant::RL)
}

/// Mean of the ROUGE-1, ROUGE-2 and ROUGE-L F-scores.
pub fn avg_rouge_f(r1: &RougeScore, r2: &RougeScore, rl: &RougeScore) -> f64 {
    (r1.f + r2.f + rl.f) / 3.0
}
