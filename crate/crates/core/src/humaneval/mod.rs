//! Facet and pairwise annotation protocols.
//!
//! Facet annotations answer eight questions about a (target, generated)
//! summary pair; [`normalize_facets`] folds them into four agreement scores.
//! Pairwise annotations pick the better of two blinded summaries and are
//! tallied into per-annotator system rankings.

mod schema;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ranking::{competition_ranks, Polarity};

pub use schema::{
    Agreement, AnswerOption, Effect, Fluency, Preference, Question, Strength, FACET_QUESTIONS, PAIRWISE_QUESTION,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetAnnotation {
    pub annotation_id: String,
    pub annotator_id: String,
    pub review_id: String,
    pub system_id: String,
    pub fluency: Fluency,
    pub population: Agreement,
    pub intervention: Agreement,
    pub outcome: Agreement,
    pub effect_target: Effect,
    pub effect_generated: Effect,
    pub strength_target: Strength,
    pub strength_generated: Strength,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comment: Option<String>,
}

impl FacetAnnotation {
    /// Answer codes in question order q1..q8.
    pub fn answer_codes(&self) -> [&'static str; 8] {
        [
            self.fluency.code(),
            self.population.code(),
            self.intervention.code(),
            self.outcome.code(),
            self.effect_target.code(),
            self.effect_generated.code(),
            self.strength_target.code(),
            self.strength_generated.code(),
        ]
    }

    fn has_other(&self) -> bool {
        [self.population, self.intervention, self.outcome].contains(&Agreement::Other)
            || [self.effect_target, self.effect_generated].contains(&Effect::Other)
            || [self.strength_target, self.strength_generated].contains(&Strength::Other)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairwiseAnnotation {
    pub annotation_id: String,
    pub annotator_id: String,
    pub review_id: String,
    pub system_a: String,
    pub system_b: String,
    pub preference: Preference,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub justification: Option<String>,
}

impl PairwiseAnnotation {
    /// The preferred system, if any.
    pub fn winner(&self) -> Option<&str> {
        match self.preference {
            Preference::A => Some(&self.system_a),
            Preference::B => Some(&self.system_b),
            Preference::Neither => None,
        }
    }
}

/// A record accepted by the annotation log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Annotation {
    Facet(FacetAnnotation),
    Pairwise(PairwiseAnnotation),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemaError {
    #[error("field {0} must be non-empty")]
    EmptyField(&'static str),
    #[error("an \"Other\" answer requires a non-empty comment")]
    OtherWithoutComment,
    #[error("system_a and system_b must differ (both {0:?})")]
    SameSystems(String),
}

impl Annotation {
    pub fn annotation_id(&self) -> &str {
        match self {
            Annotation::Facet(a) => &a.annotation_id,
            Annotation::Pairwise(a) => &a.annotation_id,
        }
    }

    pub fn annotator_id(&self) -> &str {
        match self {
            Annotation::Facet(a) => &a.annotator_id,
            Annotation::Pairwise(a) => &a.annotator_id,
        }
    }

    pub fn review_id(&self) -> &str {
        match self {
            Annotation::Facet(a) => &a.review_id,
            Annotation::Pairwise(a) => &a.review_id,
        }
    }

    /// Checks the constraints serde cannot express.
    pub fn validate(&self) -> Result<(), SchemaError> {
        let non_empty = |v: &str, name: &'static str| {
            if v.trim().is_empty() {
                Err(SchemaError::EmptyField(name))
            } else {
                Ok(())
            }
        };
        non_empty(self.annotation_id(), "annotation_id")?;
        non_empty(self.annotator_id(), "annotator_id")?;
        non_empty(self.review_id(), "review_id")?;
        match self {
            Annotation::Facet(a) => {
                non_empty(&a.system_id, "system_id")?;
                let has_comment = a.comment.as_deref().is_some_and(|c| !c.trim().is_empty());
                if a.has_other() && !has_comment {
                    return Err(SchemaError::OtherWithoutComment);
                }
            }
            Annotation::Pairwise(a) => {
                non_empty(&a.system_a, "system_a")?;
                non_empty(&a.system_b, "system_b")?;
                if a.system_a == a.system_b {
                    return Err(SchemaError::SameSystems(a.system_a.clone()));
                }
            }
        }
        Ok(())
    }
}

/// The four normalized agreement scores. `None` marks an undefined score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FacetScores {
    pub fluency: f64,
    pub pio: Option<f64>,
    pub direction: Option<f64>,
    pub strength: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Facet {
    Fluency,
    #[serde(rename = "PIO")]
    Pio,
    Direction,
    Strength,
}

impl Facet {
    pub const ALL: [Facet; 4] = [Facet::Fluency, Facet::Pio, Facet::Direction, Facet::Strength];

    pub fn as_str(self) -> &'static str {
        match self {
            Facet::Fluency => "Fluency",
            Facet::Pio => "PIO",
            Facet::Direction => "Direction",
            Facet::Strength => "Strength",
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Facet::Fluency => "Flu.",
            Facet::Pio => "PIO",
            Facet::Direction => "Dir.",
            Facet::Strength => "Str.",
        }
    }

    pub fn get(self, s: &FacetScores) -> Option<f64> {
        match self {
            Facet::Fluency => Some(s.fluency),
            Facet::Pio => s.pio,
            Facet::Direction => s.direction,
            Facet::Strength => s.strength,
        }
    }
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn ordinal3(a: Agreement) -> Option<f64> {
    match a {
        Agreement::Yes => Some(1.0),
        Agreement::Partially => Some(0.5),
        Agreement::No | Agreement::NotApplicable => Some(0.0),
        Agreement::Other => None,
    }
}

fn strength_level(s: Strength) -> Option<f64> {
    match s {
        Strength::Strong => Some(3.0),
        Strength::Moderate => Some(2.0),
        Strength::Weak => Some(1.0),
        Strength::Insufficient => Some(0.0),
        Strength::NotApplicable | Strength::Other => None,
    }
}

fn scored_effect(e: Effect) -> Option<Effect> {
    match e {
        Effect::NotApplicable | Effect::Other => None,
        e => Some(e),
    }
}

/// Maps one facet annotation onto the four agreement scores.
///
/// NA population/intervention/outcome answers earn no credit. Direction and
/// Strength are undefined when either side is NA; any "Other" answer makes the
/// score it feeds undefined.
pub fn normalize_facets(a: &FacetAnnotation) -> FacetScores {
    let fluency = match a.fluency {
        Fluency::Yes => 1.0,
        Fluency::Somewhat => 0.5,
        Fluency::No => 0.0,
    };
    let pio = match (ordinal3(a.population), ordinal3(a.intervention), ordinal3(a.outcome)) {
        (Some(p), Some(i), Some(o)) => Some((p + i + o) / 3.0),
        _ => None,
    };
    let direction = match (scored_effect(a.effect_target), scored_effect(a.effect_generated)) {
        (Some(t), Some(g)) => Some(if t == g { 1.0 } else { 0.0 }),
        _ => None,
    };
    let strength = match (strength_level(a.strength_target), strength_level(a.strength_generated)) {
        (Some(t), Some(g)) => Some(1.0 - (t - g).abs() / 3.0),
        _ => None,
    };
    FacetScores {
        fluency,
        pio,
        direction,
        strength,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AgreementResult {
    /// `None` when expected agreement is 1 (both raters constant and equal).
    pub kappa: Option<f64>,
    pub proportion: f64,
    pub n_items: usize,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AgreementError {
    #[error("label lists differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("no items to compare")]
    Empty,
}

/// Cohen's kappa and raw proportion of agreement between two raters.
pub fn cohen_kappa<T: Ord>(labels_a: &[T], labels_b: &[T]) -> Result<AgreementResult, AgreementError> {
    if labels_a.len() != labels_b.len() {
        return Err(AgreementError::LengthMismatch(labels_a.len(), labels_b.len()));
    }
    let n = labels_a.len();
    if n == 0 {
        return Err(AgreementError::Empty);
    }
    let mut marg_a: BTreeMap<&T, u64> = BTreeMap::new();
    let mut marg_b: BTreeMap<&T, u64> = BTreeMap::new();
    let mut matches = 0u64;
    for (a, b) in labels_a.iter().zip(labels_b) {
        *marg_a.entry(a).or_default() += 1;
        *marg_b.entry(b).or_default() += 1;
        if a == b {
            matches += 1;
        }
    }
    let chance: u64 = marg_a
        .iter()
        .map(|(k, ca)| ca * marg_b.get(k).copied().unwrap_or(0))
        .sum();
    let n2 = (n as u64) * (n as u64);
    let p_o = matches as f64 / n as f64;
    let kappa = if chance == n2 {
        None
    } else {
        let p_e = chance as f64 / n2 as f64;
        Some((p_o - p_e) / (1.0 - p_e))
    };
    Ok(AgreementResult {
        kappa,
        proportion: p_o,
        n_items: n,
    })
}

/// Number of answer classes per question, NA counted for questions 2-6.
pub const QUESTION_CLASSES: [usize; 8] = [3, 4, 4, 4, 4, 4, 4, 4];

/// One row of the inter-annotator agreement table.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementRow {
    pub question_id: &'static str,
    pub question: &'static str,
    pub classes: usize,
    pub result: AgreementResult,
    /// Proportion of agreement with "Yes" and "Partially" merged (q1-q4 only).
    pub merged_proportion: Option<f64>,
}

/// Pairs double-annotated summaries: for every `(review, system)` with at
/// least two distinct annotators, the first two annotations in input order.
pub fn dual_annotated_pairs(annotations: &[FacetAnnotation]) -> Vec<(&FacetAnnotation, &FacetAnnotation)> {
    let mut first: BTreeMap<(&str, &str), &FacetAnnotation> = BTreeMap::new();
    let mut pairs: BTreeMap<(&str, &str), (&FacetAnnotation, &FacetAnnotation)> = BTreeMap::new();
    for a in annotations {
        let key = (a.review_id.as_str(), a.system_id.as_str());
        match first.get(&key) {
            None => {
                first.insert(key, a);
            }
            Some(f) if f.annotator_id != a.annotator_id && !pairs.contains_key(&key) => {
                pairs.insert(key, (*f, a));
            }
            _ => {}
        }
    }
    pairs.into_values().collect()
}

fn merge_yes(code: &'static str) -> &'static str {
    if code == "1" {
        "2"
    } else {
        code
    }
}

/// Per-question agreement over double-annotated summaries.
pub fn facet_agreement(annotations: &[FacetAnnotation]) -> Result<Vec<AgreementRow>, AgreementError> {
    let pairs = dual_annotated_pairs(annotations);
    let mut rows = Vec::with_capacity(8);
    for (q, question) in FACET_QUESTIONS.iter().enumerate() {
        let a: Vec<&str> = pairs.iter().map(|(x, _)| x.answer_codes()[q]).collect();
        let b: Vec<&str> = pairs.iter().map(|(_, y)| y.answer_codes()[q]).collect();
        let result = cohen_kappa(&a, &b)?;
        let merged_proportion = (q < 4).then(|| {
            let ma: Vec<&str> = a.iter().map(|c| merge_yes(c)).collect();
            let mb: Vec<&str> = b.iter().map(|c| merge_yes(c)).collect();
            let m = ma.iter().zip(&mb).filter(|(x, y)| x == y).count();
            m as f64 / ma.len() as f64
        });
        rows.push(AgreementRow {
            question_id: question.id,
            question: question.name,
            classes: QUESTION_CLASSES[q],
            result,
            merged_proportion,
        });
    }
    Ok(rows)
}

/// Points per system for one annotator: the preferred system of each
/// comparison earns a point. Every system mentioned appears in the result.
pub fn tally_pairwise(annotations: &[PairwiseAnnotation]) -> BTreeMap<String, u32> {
    debug_assert!(
        annotations
            .iter()
            .map(|a| &a.annotator_id)
            .collect::<BTreeSet<_>>()
            .len()
            <= 1,
        "tally_pairwise expects a single annotator"
    );
    let mut points: BTreeMap<String, u32> = BTreeMap::new();
    for a in annotations {
        points.entry(a.system_a.clone()).or_default();
        points.entry(a.system_b.clone()).or_default();
        if let Some(w) = a.winner() {
            *points.get_mut(w).expect("winner is one of the pair") += 1;
        }
    }
    points
}

/// Competition ranking by descending points.
pub fn annotator_ranking(points: &BTreeMap<String, u32>) -> BTreeMap<String, usize> {
    let scores: BTreeMap<String, f64> = points.iter().map(|(k, v)| (k.clone(), *v as f64)).collect();
    competition_ranks(&scores, Polarity::HigherBetter)
}

/// Groups pairwise annotations by annotator, preserving input order.
pub fn by_annotator(annotations: &[PairwiseAnnotation]) -> BTreeMap<String, Vec<PairwiseAnnotation>> {
    let mut out: BTreeMap<String, Vec<PairwiseAnnotation>> = BTreeMap::new();
    for a in annotations {
        out.entry(a.annotator_id.clone()).or_default().push(a.clone());
    }
    out
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn facet(annotator: &str, review: &str, system: &str) -> FacetAnnotation {
        FacetAnnotation {
            annotation_id: format!("{annotator}-{review}-{system}"),
            annotator_id: annotator.into(),
            review_id: review.into(),
            system_id: system.into(),
            fluency: Fluency::Yes,
            population: Agreement::Yes,
            intervention: Agreement::Yes,
            outcome: Agreement::Yes,
            effect_target: Effect::Positive,
            effect_generated: Effect::Positive,
            strength_target: Strength::Moderate,
            strength_generated: Strength::Moderate,
            comment: None,
        }
    }

    pub fn pw(annotator: &str, a: &str, b: &str, pref: Preference) -> PairwiseAnnotation {
        PairwiseAnnotation {
            annotation_id: format!("{annotator}-{a}-{b}-{pref}"),
            annotator_id: annotator.into(),
            review_id: "r1".into(),
            system_a: a.into(),
            system_b: b.into(),
            preference: pref,
            justification: None,
        }
    }
}
