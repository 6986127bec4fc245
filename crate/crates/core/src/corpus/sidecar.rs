use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use super::{Corpus, Origin, TextKey};
use crate::jsonl;
use crate::lexical::{tokenize, TokenizerConfig};

/// Distributions whose components sum to within this distance of 1 are
/// renormalized; anything further off is rejected.
pub const DIST_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PioLabel {
    Population,
    Intervention,
    Outcome,
}

impl PioLabel {
    pub fn code(self) -> &'static str {
        match self {
            PioLabel::Population => "P",
            PioLabel::Intervention => "I",
            PioLabel::Outcome => "O",
        }
    }
}

impl Serialize for PioLabel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for PioLabel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        match s.as_str() {
            "P" => Ok(PioLabel::Population),
            "I" => Ok(PioLabel::Intervention),
            "O" => Ok(PioLabel::Outcome),
            other => Err(serde::de::Error::custom(format!(
                "unknown PIO label {other:?}, expected P, I or O"
            ))),
        }
    }
}

/// An extracted PIO span as a normalized (lowercased) token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PioSpan {
    pub label: PioLabel,
    pub tokens: Vec<String>,
}

impl PioSpan {
    /// Normalizes `text` with the default tokenizer. Returns `None` when the
    /// text contains no tokens.
    pub fn new(label: PioLabel, text: &str) -> Option<Self> {
        let tokens = tokenize(text, &TokenizerConfig::default()).tokens;
        (!tokens.is_empty()).then_some(Self { label, tokens })
    }
}

/// Direction of an effect reported by a text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Negative,
    NoEffect,
    Positive,
}

impl Direction {
    pub fn code(self) -> &'static str {
        match self {
            Direction::Negative => "-1",
            Direction::NoEffect => "0",
            Direction::Positive => "+1",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        match s.trim() {
            "-1" => Some(Direction::Negative),
            "0" => Some(Direction::NoEffect),
            "+1" | "1" => Some(Direction::Positive),
            _ => None,
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl Serialize for Direction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.code())
    }
}

impl<'de> Deserialize<'de> for Direction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Str(String),
        }
        let code = match Raw::deserialize(d)? {
            Raw::Int(i) => i.to_string(),
            Raw::Str(s) => s,
        };
        Direction::from_code(&code).ok_or_else(|| serde::de::Error::custom(format!("invalid direction {code:?}")))
    }
}

/// Evidence-direction probabilities for one intervention/outcome pair, over
/// `[negative, no effect, positive]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvidenceDistribution {
    pub intervention: String,
    pub outcome: String,
    pub dist: [f64; 3],
}

impl EvidenceDistribution {
    /// Validates and, if needed, renormalizes `dist`. Intervention and
    /// outcome strings are case-folded and whitespace-collapsed.
    pub fn new(intervention: &str, outcome: &str, dist: [f64; 3]) -> Result<Self, String> {
        if dist.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(format!("distribution {dist:?} has a component outside [0, 1]"));
        }
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > DIST_TOLERANCE {
            return Err(format!(
                "distribution {dist:?} sums to {sum}, more than {DIST_TOLERANCE} from 1"
            ));
        }
        let dist = if sum == 1.0 { dist } else { dist.map(|p| p / sum) };
        Ok(Self {
            intervention: normalize_phrase(intervention),
            outcome: normalize_phrase(outcome),
            dist,
        })
    }

    pub fn key(&self) -> (&str, &str) {
        (&self.intervention, &self.outcome)
    }
}

/// Case-folds and collapses internal whitespace.
pub fn normalize_phrase(s: &str) -> String {
    s.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceStatement {
    pub review_id: String,
    pub doc_id: String,
    pub statement: String,
    pub direction: Direction,
}

/// A sentence-level embedding of one text under one encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct TextEmbedding {
    pub key: TextKey,
    pub encoder_id: String,
    pub vector: Vec<f64>,
}

/// Contextual token embeddings of one text under one encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingMatrix {
    pub key: TextKey,
    pub encoder_id: String,
    pub tokens: Vec<String>,
    pub vectors: Vec<Vec<f64>>,
}

impl TokenEmbeddingMatrix {
    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, Vec::len)
    }
}

/// Embeddings keyed by `(encoder_id, text)`.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingStore {
    sentence: BTreeMap<(String, TextKey), TextEmbedding>,
    token: BTreeMap<(String, TextKey), TokenEmbeddingMatrix>,
    sentence_dims: BTreeMap<String, usize>,
    token_dims: BTreeMap<String, usize>,
}

impl EmbeddingStore {
    pub fn sentence(&self, encoder_id: &str, key: &TextKey) -> Option<&TextEmbedding> {
        self.sentence.get(&(encoder_id.to_string(), key.clone()))
    }

    pub fn tokens(&self, encoder_id: &str, key: &TextKey) -> Option<&TokenEmbeddingMatrix> {
        self.token.get(&(encoder_id.to_string(), key.clone()))
    }

    pub fn sentence_encoders(&self) -> impl Iterator<Item = &str> {
        self.sentence_dims.keys().map(String::as_str)
    }

    pub fn token_encoders(&self) -> impl Iterator<Item = &str> {
        self.token_dims.keys().map(String::as_str)
    }

    pub fn insert_sentence(&mut self, emb: TextEmbedding) -> Result<(), String> {
        if emb.vector.is_empty() || emb.vector.iter().any(|x| !x.is_finite()) {
            return Err(format!("embedding for {} is empty or non-finite", emb.key));
        }
        if emb.vector.iter().all(|x| *x == 0.0) {
            return Err(format!("embedding for {} has zero norm", emb.key));
        }
        check_dim(&mut self.sentence_dims, &emb.encoder_id, emb.vector.len())?;
        let k = (emb.encoder_id.clone(), emb.key.clone());
        if self.sentence.contains_key(&k) {
            return Err(format!("duplicate {} embedding for {}", emb.encoder_id, emb.key));
        }
        self.sentence.insert(k, emb);
        Ok(())
    }

    pub fn insert_tokens(&mut self, m: TokenEmbeddingMatrix) -> Result<(), String> {
        if m.tokens.is_empty() || m.tokens.len() != m.vectors.len() {
            return Err(format!(
                "token matrix for {} has {} tokens and {} vectors",
                m.key,
                m.tokens.len(),
                m.vectors.len()
            ));
        }
        let dim = m.dim();
        if dim == 0 || m.vectors.iter().any(|v| v.len() != dim) {
            return Err(format!("token matrix for {} has ragged or empty rows", m.key));
        }
        if m.vectors.iter().flatten().any(|x| !x.is_finite()) {
            return Err(format!("token matrix for {} has non-finite values", m.key));
        }
        check_dim(&mut self.token_dims, &m.encoder_id, dim)?;
        let k = (m.encoder_id.clone(), m.key.clone());
        if self.token.contains_key(&k) {
            return Err(format!("duplicate {} token matrix for {}", m.encoder_id, m.key));
        }
        self.token.insert(k, m);
        Ok(())
    }
}

fn check_dim(dims: &mut BTreeMap<String, usize>, encoder: &str, dim: usize) -> Result<(), String> {
    match dims.get(encoder) {
        Some(&d) if d != dim => Err(format!("encoder {encoder:?} dimensionality mismatch: {dim} vs {d}")),
        Some(_) => Ok(()),
        None => {
            dims.insert(encoder.to_string(), dim);
            Ok(())
        }
    }
}

/// Externally produced model outputs, keyed by text identity.
///
/// A text with no entry is distinct from a text with an empty entry: the
/// accessors return `None` for the former so metrics can skip the instance.
#[derive(Debug, Clone, Default)]
pub struct SidecarBundle {
    pub pio_spans: HashMap<TextKey, Vec<PioSpan>>,
    pub evidence: HashMap<TextKey, Vec<EvidenceDistribution>>,
    /// Keyed by `(review_id, doc_id)`.
    pub statements: BTreeMap<(String, String), EvidenceStatement>,
    /// Effect direction judged for each summary text.
    pub directions: HashMap<TextKey, Direction>,
    pub embeddings: EmbeddingStore,
}

impl SidecarBundle {
    pub fn pio(&self, key: &TextKey) -> Option<&[PioSpan]> {
        self.pio_spans.get(key).map(Vec::as_slice)
    }

    pub fn evidence_pairs(&self, key: &TextKey) -> Option<&[EvidenceDistribution]> {
        self.evidence.get(key).map(Vec::as_slice)
    }

    /// Statements of the input documents of one review, ordered by doc_id.
    pub fn statements_for<'a>(&'a self, review_id: &'a str) -> impl Iterator<Item = &'a EvidenceStatement> + 'a {
        self.statements
            .range((review_id.to_string(), String::new())..)
            .take_while(move |((r, _), _)| r == review_id)
            .map(|(_, s)| s)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SidecarPaths {
    pub pio: Option<PathBuf>,
    pub evidence: Option<PathBuf>,
    pub statements: Option<PathBuf>,
    pub directions: Option<PathBuf>,
    pub embeddings: Vec<PathBuf>,
}

#[derive(Debug, Error)]
pub enum SidecarError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}:{line}: parse error: {source}")]
    Parse {
        path: PathBuf,
        line: usize,
        source: serde_json::Error,
    },
    #[error("{path}:{line}: unknown text key {key}")]
    UnknownKey { path: PathBuf, line: usize, key: TextKey },
    #[error("{path}:{line}: {message}")]
    Invalid {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

#[derive(Deserialize)]
struct PioLine {
    origin: Origin,
    review_id: String,
    spans: Vec<RawSpan>,
}

#[derive(Deserialize)]
struct RawSpan {
    label: PioLabel,
    text: String,
}

#[derive(Deserialize)]
struct EvidenceLine {
    origin: Origin,
    review_id: String,
    pairs: Vec<RawPair>,
}

#[derive(Deserialize)]
struct RawPair {
    intervention: String,
    outcome: String,
    dist: [f64; 3],
}

#[derive(Deserialize)]
struct DirectionLine {
    origin: Origin,
    review_id: String,
    direction: Direction,
}

#[derive(Deserialize)]
struct EmbeddingLine {
    origin: Origin,
    review_id: String,
    encoder_id: String,
    #[serde(default)]
    vector: Option<Vec<f64>>,
    #[serde(default)]
    tokens: Option<Vec<String>>,
    #[serde(default)]
    vectors: Option<Vec<Vec<f64>>>,
}

struct FileCtx<'a> {
    path: &'a Path,
    corpus: &'a Corpus,
}

impl FileCtx<'_> {
    fn read<T: serde::de::DeserializeOwned>(&self) -> Result<Vec<(usize, T)>, SidecarError> {
        jsonl::read(self.path).map_err(|e| match e {
            jsonl::ReadError::Io(source) => SidecarError::Io {
                path: self.path.to_path_buf(),
                source,
            },
            jsonl::ReadError::Parse { line, source } => SidecarError::Parse {
                path: self.path.to_path_buf(),
                line,
                source,
            },
        })
    }

    fn key(&self, line: usize, origin: Origin, review_id: String) -> Result<TextKey, SidecarError> {
        let key = TextKey { origin, review_id };
        if self.corpus.contains_key(&key) {
            Ok(key)
        } else {
            Err(SidecarError::UnknownKey {
                path: self.path.to_path_buf(),
                line,
                key,
            })
        }
    }

    fn invalid(&self, line: usize, message: String) -> SidecarError {
        SidecarError::Invalid {
            path: self.path.to_path_buf(),
            line,
            message,
        }
    }
}

/// Loads the sidecar files present in `paths` against a loaded corpus.
pub fn load_sidecars(paths: &SidecarPaths, corpus: &Corpus) -> Result<SidecarBundle, SidecarError> {
    let mut bundle = SidecarBundle::default();

    if let Some(path) = &paths.pio {
        let ctx = FileCtx { path, corpus };
        for (line, rec) in ctx.read::<PioLine>()? {
            let key = ctx.key(line, rec.origin, rec.review_id)?;
            let mut spans = Vec::with_capacity(rec.spans.len());
            for raw in rec.spans {
                let span = PioSpan::new(raw.label, &raw.text)
                    .ok_or_else(|| ctx.invalid(line, format!("empty PIO span text {:?}", raw.text)))?;
                spans.push(span);
            }
            if bundle.pio_spans.insert(key.clone(), spans).is_some() {
                return Err(ctx.invalid(line, format!("duplicate PIO record for {key}")));
            }
        }
    }

    if let Some(path) = &paths.evidence {
        let ctx = FileCtx { path, corpus };
        for (line, rec) in ctx.read::<EvidenceLine>()? {
            let key = ctx.key(line, rec.origin, rec.review_id)?;
            let pairs = rec
                .pairs
                .into_iter()
                .map(|p| EvidenceDistribution::new(&p.intervention, &p.outcome, p.dist))
                .collect::<Result<Vec<_>, _>>()
                .map_err(|m| ctx.invalid(line, m))?;
            if bundle.evidence.insert(key.clone(), pairs).is_some() {
                return Err(ctx.invalid(line, format!("duplicate evidence record for {key}")));
            }
        }
    }

    if let Some(path) = &paths.statements {
        let ctx = FileCtx { path, corpus };
        for (line, st) in ctx.read::<EvidenceStatement>()? {
            let known = corpus
                .review(&st.review_id)
                .is_some_and(|r| r.inputs.iter().any(|d| d.doc_id == st.doc_id));
            if !known {
                return Err(ctx.invalid(
                    line,
                    format!("unknown input document ({}, {})", st.review_id, st.doc_id),
                ));
            }
            if st.statement.trim().is_empty() {
                return Err(ctx.invalid(line, "empty evidence statement".into()));
            }
            let k = (st.review_id.clone(), st.doc_id.clone());
            if bundle.statements.insert(k, st).is_some() {
                return Err(ctx.invalid(line, "duplicate evidence statement".into()));
            }
        }
    }

    if let Some(path) = &paths.directions {
        let ctx = FileCtx { path, corpus };
        for (line, rec) in ctx.read::<DirectionLine>()? {
            let key = ctx.key(line, rec.origin, rec.review_id)?;
            if bundle.directions.insert(key.clone(), rec.direction).is_some() {
                return Err(ctx.invalid(line, format!("duplicate direction for {key}")));
            }
        }
    }

    for path in &paths.embeddings {
        let ctx = FileCtx { path, corpus };
        for (line, rec) in ctx.read::<EmbeddingLine>()? {
            let key = ctx.key(line, rec.origin, rec.review_id)?;
            let result = match (rec.vector, rec.tokens, rec.vectors) {
                (Some(vector), None, None) => bundle.embeddings.insert_sentence(TextEmbedding {
                    key,
                    encoder_id: rec.encoder_id,
                    vector,
                }),
                (None, Some(tokens), Some(vectors)) => bundle.embeddings.insert_tokens(TokenEmbeddingMatrix {
                    key,
                    encoder_id: rec.encoder_id,
                    tokens,
                    vectors,
                }),
                _ => Err("expected either \"vector\" or \"tokens\" + \"vectors\"".to_string()),
            };
            result.map_err(|m| ctx.invalid(line, m))?;
        }
    }

    Ok(bundle)
}
