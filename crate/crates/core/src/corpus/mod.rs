//! Reviews, generated summaries, sidecar model outputs and the annotation log.
//!
//! Every file handled here is line-delimited JSON. Loading validates all
//! cross references up front, so the rest of the crate can index into a
//! [`Corpus`] or [`SidecarBundle`] without re-checking them.

mod log;
mod metrics;
mod sidecar;

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::jsonl;

pub use log::{read_log, Ack, AnnotationLog, LogEntry, LogError};
pub use metrics::{MetricId, MetricRecord, MetricStore};
pub use sidecar::{
    load_sidecars, Direction, EmbeddingStore, EvidenceDistribution, EvidenceStatement, PioLabel, PioSpan,
    SidecarBundle, SidecarError, SidecarPaths, TextEmbedding, TokenEmbeddingMatrix, DIST_TOLERANCE,
};

/// The literal origin token naming a review's reference summary.
pub const TARGET_ORIGIN: &str = "target";

/// Where a text comes from: the review's target summary or a system output.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Target,
    System(String),
}

impl Origin {
    pub fn parse(s: &str) -> Self {
        if s == TARGET_ORIGIN {
            Origin::Target
        } else {
            Origin::System(s.to_string())
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            Origin::Target => TARGET_ORIGIN,
            Origin::System(s) => s,
        }
    }
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Origin {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Origin {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(Origin::parse(&s))
    }
}

/// Identity of a text within the corpus: `(origin, review_id)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TextKey {
    pub origin: Origin,
    pub review_id: String,
}

impl TextKey {
    pub fn target(review_id: impl Into<String>) -> Self {
        Self {
            origin: Origin::Target,
            review_id: review_id.into(),
        }
    }

    pub fn system(system_id: impl Into<String>, review_id: impl Into<String>) -> Self {
        Self {
            origin: Origin::System(system_id.into()),
            review_id: review_id.into(),
        }
    }
}

impl fmt::Display for TextKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.origin, self.review_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDocument {
    pub doc_id: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewInstance {
    pub review_id: String,
    pub target: String,
    pub inputs: Vec<InputDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedSummary {
    pub system_id: String,
    pub review_id: String,
    pub summary: String,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: parse error: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("line {line}: duplicate review_id {review_id:?}")]
    DuplicateReview { line: usize, review_id: String },
    #[error("line {line}: duplicate doc_id {doc_id:?} in review {review_id:?}")]
    DuplicateDoc {
        line: usize,
        review_id: String,
        doc_id: String,
    },
    #[error("line {line}: duplicate generated summary for (system {system_id:?}, review {review_id:?})")]
    DuplicateSummary {
        line: usize,
        system_id: String,
        review_id: String,
    },
    #[error("line {line}: system {system_id:?} references unknown review {review_id:?}")]
    DanglingReview {
        line: usize,
        system_id: String,
        review_id: String,
    },
    #[error("line {line}: {message}")]
    Invalid { line: usize, message: String },
}

/// A validated set of reviews and generated summaries.
///
/// Record order follows the input files so that writing a loaded corpus
/// back out reproduces its records field for field.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    reviews: Vec<ReviewInstance>,
    review_index: HashMap<String, usize>,
    generated: Vec<GeneratedSummary>,
    generated_index: HashMap<(String, String), usize>,
}

impl Corpus {
    /// Builds a corpus from in-memory records. The `line` reported in errors
    /// is the 1-based position of the offending record.
    pub fn from_parts(reviews: Vec<ReviewInstance>, generated: Vec<GeneratedSummary>) -> Result<Self, CorpusError> {
        let reviews = reviews.into_iter().enumerate().map(|(i, r)| (i + 1, r));
        let generated = generated.into_iter().enumerate().map(|(i, g)| (i + 1, g));
        Self::build(reviews, generated)
    }

    fn build(
        reviews: impl IntoIterator<Item = (usize, ReviewInstance)>,
        generated: impl IntoIterator<Item = (usize, GeneratedSummary)>,
    ) -> Result<Self, CorpusError> {
        let mut corpus = Corpus::default();
        for (line, review) in reviews {
            validate_review(line, &review)?;
            if corpus.review_index.contains_key(&review.review_id) {
                return Err(CorpusError::DuplicateReview {
                    line,
                    review_id: review.review_id,
                });
            }
            corpus
                .review_index
                .insert(review.review_id.clone(), corpus.reviews.len());
            corpus.reviews.push(review);
        }
        for (line, summary) in generated {
            if summary.system_id.is_empty() {
                return Err(CorpusError::Invalid {
                    line,
                    message: "empty system_id".into(),
                });
            }
            if summary.system_id == TARGET_ORIGIN {
                return Err(CorpusError::Invalid {
                    line,
                    message: format!("system_id {TARGET_ORIGIN:?} is reserved"),
                });
            }
            if !corpus.review_index.contains_key(&summary.review_id) {
                return Err(CorpusError::DanglingReview {
                    line,
                    system_id: summary.system_id,
                    review_id: summary.review_id,
                });
            }
            let key = (summary.system_id.clone(), summary.review_id.clone());
            if corpus.generated_index.contains_key(&key) {
                return Err(CorpusError::DuplicateSummary {
                    line,
                    system_id: summary.system_id,
                    review_id: summary.review_id,
                });
            }
            corpus.generated_index.insert(key, corpus.generated.len());
            corpus.generated.push(summary);
        }
        Ok(corpus)
    }

    pub fn reviews(&self) -> &[ReviewInstance] {
        &self.reviews
    }

    pub fn review(&self, review_id: &str) -> Option<&ReviewInstance> {
        self.review_index.get(review_id).map(|&i| &self.reviews[i])
    }

    pub fn generated(&self) -> &[GeneratedSummary] {
        &self.generated
    }

    pub fn summary(&self, system_id: &str, review_id: &str) -> Option<&GeneratedSummary> {
        self.generated_index
            .get(&(system_id.to_string(), review_id.to_string()))
            .map(|&i| &self.generated[i])
    }

    /// Sorted, distinct system ids.
    pub fn systems(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.generated.iter().map(|g| g.system_id.as_str()).collect();
        set.into_iter().map(str::to_string).collect()
    }

    /// Summaries produced by one system, in corpus order.
    pub fn summaries_for<'a>(&'a self, system_id: &'a str) -> impl Iterator<Item = &'a GeneratedSummary> + 'a {
        self.generated.iter().filter(move |g| g.system_id == system_id)
    }

    /// Resolves a text key to its text.
    pub fn text(&self, key: &TextKey) -> Option<&str> {
        match &key.origin {
            Origin::Target => self.review(&key.review_id).map(|r| r.target.as_str()),
            Origin::System(s) => self.summary(s, &key.review_id).map(|g| g.summary.as_str()),
        }
    }

    pub fn contains_key(&self, key: &TextKey) -> bool {
        self.text(key).is_some()
    }

    pub fn write_reviews<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.reviews {
            jsonl::write_line(&mut w, r)?;
        }
        Ok(())
    }

    pub fn write_generated<W: Write>(&self, mut w: W) -> io::Result<()> {
        for g in &self.generated {
            jsonl::write_line(&mut w, g)?;
        }
        Ok(())
    }
}

fn validate_review(line: usize, review: &ReviewInstance) -> Result<(), CorpusError> {
    let invalid = |message: String| CorpusError::Invalid { line, message };
    if review.review_id.is_empty() {
        return Err(invalid("empty review_id".into()));
    }
    if review.target.trim().is_empty() {
        return Err(invalid(format!("review {:?} has an empty target", review.review_id)));
    }
    if review.inputs.is_empty() {
        return Err(invalid(format!("review {:?} has no inputs", review.review_id)));
    }
    let mut seen = BTreeSet::new();
    for doc in &review.inputs {
        if doc.abstract_text.trim().is_empty() {
            return Err(invalid(format!(
                "input {:?} of review {:?} has an empty abstract",
                doc.doc_id, review.review_id
            )));
        }
        if !seen.insert(doc.doc_id.as_str()) {
            return Err(CorpusError::DuplicateDoc {
                line,
                review_id: review.review_id.clone(),
                doc_id: doc.doc_id.clone(),
            });
        }
    }
    Ok(())
}

fn read_file<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>, CorpusError> {
    jsonl::read(path).map_err(|e| match e {
        jsonl::ReadError::Io(source) => CorpusError::Io {
            path: path.to_path_buf(),
            source,
        },
        jsonl::ReadError::Parse { line, source } => CorpusError::Parse {
            path: path.to_path_buf(),
            line,
            source,
        },
    })
}

/// Loads and validates a corpus from the reviews and generated-summary files.
pub fn load_corpus(reviews_path: &Path, generated_path: &Path) -> Result<Corpus, CorpusError> {
    let reviews = read_file::<ReviewInstance>(reviews_path)?;
    let generated = read_file::<GeneratedSummary>(generated_path)?;
    Corpus::build(reviews, generated)
}

/// Reads a file of reviews whose targets serve as a reference population
/// (for example the training split). Inputs are not required.
pub fn load_targets(path: &Path) -> Result<Vec<String>, CorpusError> {
    #[derive(Deserialize)]
    struct TargetOnly {
        target: String,
    }
    Ok(read_file::<TargetOnly>(path)?
        .into_iter()
        .map(|(_, t)| t.target)
        .collect())
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn review(id: &str, target: &str, inputs: &[(&str, &str)]) -> ReviewInstance {
        ReviewInstance {
            review_id: id.into(),
            target: target.into(),
            inputs: inputs
                .iter()
                .map(|(d, a)| InputDocument {
                    doc_id: (*d).into(),
                    abstract_text: (*a).into(),
                })
                .collect(),
        }
    }

    pub fn summary(system: &str, review: &str, text: &str) -> GeneratedSummary {
        GeneratedSummary {
            system_id: system.into(),
            review_id: review.into(),
            summary: text.into(),
        }
    }

    pub fn small_corpus() -> Corpus {
        Corpus::from_parts(
            vec![
                review("r1", "metformin lowers blood pressure", &[("d1", "metformin trial")]),
                review(
                    "r2",
                    "no effect of aspirin",
                    &[("d1", "aspirin trial"), ("d2", "more aspirin")],
                ),
            ],
            vec![
                summary("sysA", "r1", "metformin reduces blood pressure"),
                summary("sysA", "r2", "aspirin has no effect"),
            ],
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    fn write_tmp(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    const REVIEWS: &[&str] = &[
        r#"{"review_id":"r1","target":"metformin lowers blood pressure","inputs":[{"doc_id":"d1","abstract":"a trial"}]}"#,
        r#"{"review_id":"r2","target":"no effect","inputs":[{"doc_id":"d1","abstract":"x"},{"doc_id":"d2","abstract":"y"}]}"#,
    ];

    #[test]
    fn loads_two_review_fixture() {
        let reviews = write_tmp(REVIEWS);
        let generated = write_tmp(&[
            r#"{"system_id":"s1","review_id":"r1","summary":"metformin helps"}"#,
            r#"{"system_id":"s1","review_id":"r2","summary":"nothing"}"#,
        ]);
        let corpus = load_corpus(reviews.path(), generated.path()).unwrap();
        assert_eq!(corpus.reviews().len(), 2);
        assert_eq!(corpus.generated().len(), 2);
        assert_eq!(corpus.systems(), vec!["s1".to_string()]);
        assert_eq!(corpus.text(&TextKey::system("s1", "r2")), Some("nothing"));
        assert_eq!(
            corpus.text(&TextKey::target("r1")),
            Some("metformin lowers blood pressure")
        );
    }

    #[test]
    fn duplicate_summary_names_the_pair() {
        let reviews = write_tmp(REVIEWS);
        let generated = write_tmp(&[
            r#"{"system_id":"s1","review_id":"r1","summary":"a"}"#,
            r#"{"system_id":"s1","review_id":"r1","summary":"b"}"#,
        ]);
        let err = load_corpus(reviews.path(), generated.path()).unwrap_err();
        match &err {
            CorpusError::DuplicateSummary {
                line,
                system_id,
                review_id,
            } => {
                assert_eq!((*line, system_id.as_str(), review_id.as_str()), (2, "s1", "r1"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("s1") && err.to_string().contains("r1"));
    }

    #[test]
    fn dangling_review_is_rejected() {
        let reviews = write_tmp(REVIEWS);
        let generated = write_tmp(&[r#"{"system_id":"s1","review_id":"r9","summary":"a"}"#]);
        let err = load_corpus(reviews.path(), generated.path()).unwrap_err();
        assert!(matches!(err, CorpusError::DanglingReview { ref review_id, .. } if review_id == "r9"));
    }

    #[test]
    fn parse_error_reports_line() {
        let reviews = write_tmp(&[REVIEWS[0], "", "{not json"]);
        let generated = write_tmp(&[]);
        let err = load_corpus(reviews.path(), generated.path()).unwrap_err();
        assert!(matches!(err, CorpusError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn invariants_enforced() {
        assert!(matches!(
            Corpus::from_parts(vec![review("r", "", &[("d", "a")])], vec![]),
            Err(CorpusError::Invalid { .. })
        ));
        assert!(matches!(
            Corpus::from_parts(vec![review("r", "t", &[])], vec![]),
            Err(CorpusError::Invalid { .. })
        ));
        assert!(matches!(
            Corpus::from_parts(vec![review("r", "t", &[("d", "a"), ("d", "b")])], vec![]),
            Err(CorpusError::DuplicateDoc { .. })
        ));
        assert!(matches!(
            Corpus::from_parts(
                vec![review("r", "t", &[("d", "a")]), review("r", "u", &[("d", "a")])],
                vec![]
            ),
            Err(CorpusError::DuplicateReview { line: 2, .. })
        ));
        assert!(matches!(
            Corpus::from_parts(vec![review("r", "t", &[("d", "a")])], vec![summary("target", "r", "x")]),
            Err(CorpusError::Invalid { .. })
        ));
    }

    #[test]
    fn write_back_matches_input_field_for_field() {
        let reviews = write_tmp(REVIEWS);
        let generated = write_tmp(&[r#"{"system_id":"s1","review_id":"r1","summary":"a \"quoted\" ü"}"#]);
        let corpus = load_corpus(reviews.path(), generated.path()).unwrap();
        let mut out = Vec::new();
        corpus.write_reviews(&mut out).unwrap();
        let written: Vec<serde_json::Value> = String::from_utf8(out)
            .unwrap()
            .lines()
            .map(|l| serde_json::from_str(l).unwrap())
            .collect();
        let original: Vec<serde_json::Value> = REVIEWS.iter().map(|l| serde_json::from_str(l).unwrap()).collect();
        assert_eq!(written, original);
    }
}
