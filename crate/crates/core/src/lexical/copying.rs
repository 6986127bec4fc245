use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{rouge_n, tokenize, TokenizerConfig};
use crate::corpus::{Corpus, Direction, EvidenceStatement, Origin, TextKey};

/// What a summary is compared against when deciding Input Match.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchSource {
    /// The evidence statement extracted from each input.
    #[default]
    Statements,
    /// The full input abstracts.
    Abstracts,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyingConfig {
    #[serde(default)]
    pub tokenizer: TokenizerConfig,
    #[serde(default)]
    pub input_match_source: MatchSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopyingRow {
    pub review_id: String,
    /// Input whose evidence statement is closest to the summary by ROUGE-1 F.
    pub closest_doc: Option<String>,
    pub closest_f: Option<f64>,
    /// ROUGE-1 F of the summary against the target (systems only).
    pub target_f: Option<f64>,
    pub synthesis: Option<bool>,
    pub input_match: Option<bool>,
    /// Why an indicator is missing, if one is.
    pub skip_reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CopyingReport {
    pub system_id: String,
    /// `None` when no review had a defined indicator.
    pub synthesis_rate: Option<f64>,
    pub input_match_rate: Option<f64>,
    pub rows: Vec<CopyingRow>,
}

fn mean_of(flags: impl Iterator<Item = bool>) -> Option<f64> {
    let (n, hits) = flags.fold((0usize, 0usize), |(n, h), f| (n + 1, h + f as usize));
    (n > 0).then(|| hits as f64 / n as f64)
}

/// Synthesis and Input Match analysis for one system, or for the targets
/// when `origin` is [`Origin::Target`] (synthesis only).
///
/// Ties for the closest statement go to the smallest doc_id. Input Match
/// requires the best input to beat the target strictly.
pub fn copying_report(
    origin: &Origin,
    corpus: &Corpus,
    statements: &BTreeMap<(String, String), EvidenceStatement>,
    directions: &HashMap<TextKey, Direction>,
    config: &CopyingConfig,
) -> CopyingReport {
    let tok = |s: &str| tokenize(s, &config.tokenizer);
    let texts: Vec<(&str, &str)> = match origin {
        Origin::Target => corpus
            .reviews()
            .iter()
            .map(|r| (r.review_id.as_str(), r.target.as_str()))
            .collect(),
        Origin::System(s) => corpus
            .summaries_for(s)
            .map(|g| (g.review_id.as_str(), g.summary.as_str()))
            .collect(),
    };

    let mut rows = Vec::with_capacity(texts.len());
    for (review_id, text) in texts {
        let summary = tok(text);
        let review_statements: Vec<&EvidenceStatement> = statements
            .range((review_id.to_string(), String::new())..)
            .take_while(|((r, _), _)| r == review_id)
            .map(|(_, s)| s)
            .collect();

        let mut closest: Option<(&EvidenceStatement, f64)> = None;
        for st in &review_statements {
            let f = rouge_n(&tok(&st.statement), &summary, 1).f;
            if closest.is_none_or(|(_, best)| f > best) {
                closest = Some((st, f));
            }
        }

        let direction = directions.get(&TextKey {
            origin: origin.clone(),
            review_id: review_id.to_string(),
        });
        let mut reasons = Vec::new();
        let synthesis = match (closest, direction) {
            (Some((st, _)), Some(d)) => Some(st.direction == *d),
            (None, _) => {
                reasons.push("no evidence statements");
                None
            }
            (_, None) => {
                reasons.push("no summary direction");
                None
            }
        };

        let (target_f, input_match) = match origin {
            Origin::Target => (None, None),
            Origin::System(_) => {
                let review = corpus.review(review_id).expect("corpus summaries resolve");
                let target_f = rouge_n(&summary, &tok(&review.target), 1).f;
                let best_input = match config.input_match_source {
                    MatchSource::Statements => closest.map(|(_, f)| f),
                    MatchSource::Abstracts => review
                        .inputs
                        .iter()
                        .map(|d| rouge_n(&summary, &tok(&d.abstract_text), 1).f)
                        .reduce(f64::max),
                };
                (Some(target_f), best_input.map(|f| f > target_f))
            }
        };

        rows.push(CopyingRow {
            review_id: review_id.to_string(),
            closest_doc: closest.map(|(st, _)| st.doc_id.clone()),
            closest_f: closest.map(|(_, f)| f),
            target_f,
            synthesis,
            input_match,
            skip_reason: (!reasons.is_empty()).then(|| reasons.join("; ")),
        });
    }

    CopyingReport {
        system_id: origin.as_str().to_string(),
        synthesis_rate: mean_of(rows.iter().filter_map(|r| r.synthesis)),
        input_match_rate: mean_of(rows.iter().filter_map(|r| r.input_match)),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::fixtures::{review, summary};

    fn st(review: &str, doc: &str, text: &str, d: Direction) -> ((String, String), EvidenceStatement) {
        (
            (review.into(), doc.into()),
            EvidenceStatement {
                review_id: review.into(),
                doc_id: doc.into(),
                statement: text.into(),
                direction: d,
            },
        )
    }

    fn two_review_corpus() -> Corpus {
        Corpus::from_parts(
            vec![
                review("r1", "metformin lowers blood pressure", &[("d1", "x"), ("d2", "y")]),
                review("r2", "aspirin shows no benefit", &[("d1", "z")]),
            ],
            vec![
                summary("sys", "r1", "metformin reduced blood pressure in women"),
                summary("sys", "r2", "aspirin improved outcomes"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_matching_input_gives_full_synthesis() {
        let corpus = Corpus::from_parts(
            vec![review("r1", "t", &[("d1", "a")])],
            vec![summary("sys", "r1", "metformin works")],
        )
        .unwrap();
        let statements = BTreeMap::from([st("r1", "d1", "metformin works well", Direction::Positive)]);
        let dirs = HashMap::from([(TextKey::system("sys", "r1"), Direction::Positive)]);
        let rep = copying_report(
            &Origin::System("sys".into()),
            &corpus,
            &statements,
            &dirs,
            &CopyingConfig::default(),
        );
        assert_eq!(rep.synthesis_rate, Some(1.0));
        assert_eq!(rep.input_match_rate, Some(1.0));
    }

    #[test]
    fn one_match_one_mismatch_is_half() {
        let corpus = two_review_corpus();
        let statements = BTreeMap::from([
            st("r1", "d1", "metformin reduced blood pressure", Direction::Positive),
            st("r1", "d2", "insulin had no effect", Direction::NoEffect),
            st("r2", "d1", "aspirin improved outcomes", Direction::Positive),
        ]);
        let dirs = HashMap::from([
            (TextKey::system("sys", "r1"), Direction::Positive),
            (TextKey::system("sys", "r2"), Direction::NoEffect),
            (TextKey::target("r1"), Direction::Positive),
        ]);
        let rep = copying_report(
            &Origin::System("sys".into()),
            &corpus,
            &statements,
            &dirs,
            &CopyingConfig::default(),
        );
        assert_eq!(rep.synthesis_rate, Some(0.5));
        assert_eq!(rep.rows[0].closest_doc.as_deref(), Some("d1"));
        assert_eq!(rep.rows[0].synthesis, Some(true));
        assert_eq!(rep.rows[1].synthesis, Some(false));
        // r1: closest statement F = 0.8 beats target F = 0.6; r2 copies its input.
        assert_eq!(rep.input_match_rate, Some(1.0));

        let targets = copying_report(&Origin::Target, &corpus, &statements, &dirs, &CopyingConfig::default());
        assert_eq!(targets.synthesis_rate, Some(1.0));
        assert_eq!(targets.input_match_rate, None);
        assert_eq!(targets.rows[1].skip_reason.as_deref(), Some("no summary direction"));
    }

    #[test]
    fn ties_go_to_smallest_doc_id_and_equal_scores_are_not_matches() {
        let corpus = Corpus::from_parts(
            vec![review("r1", "a b", &[("d1", "x"), ("d2", "y")])],
            vec![summary("sys", "r1", "a b")],
        )
        .unwrap();
        let statements = BTreeMap::from([
            st("r1", "d2", "a b", Direction::Positive),
            st("r1", "d1", "b a", Direction::Negative),
        ]);
        let dirs = HashMap::from([(TextKey::system("sys", "r1"), Direction::Negative)]);
        let rep = copying_report(
            &Origin::System("sys".into()),
            &corpus,
            &statements,
            &dirs,
            &CopyingConfig::default(),
        );
        assert_eq!(rep.rows[0].closest_doc.as_deref(), Some("d1"));
        assert_eq!(rep.synthesis_rate, Some(1.0));
        assert_eq!(rep.rows[0].input_match, Some(false));
    }

    #[test]
    fn abstract_source_variant() {
        let corpus = Corpus::from_parts(
            vec![review("r1", "unrelated words", &[("d1", "the summary text verbatim")])],
            vec![summary("sys", "r1", "the summary text verbatim")],
        )
        .unwrap();
        let cfg = CopyingConfig {
            input_match_source: MatchSource::Abstracts,
            ..Default::default()
        };
        let rep = copying_report(
            &Origin::System("sys".into()),
            &corpus,
            &BTreeMap::new(),
            &HashMap::new(),
            &cfg,
        );
        assert_eq!(rep.input_match_rate, Some(1.0));
        assert_eq!(rep.synthesis_rate, None);
        assert_eq!(rep.rows[0].skip_reason.as_deref(), Some("no evidence statements"));
    }
}
