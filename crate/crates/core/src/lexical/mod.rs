//! Tokenization, ROUGE, self-repetition and input-copying analysis.

mod copying;
mod repetition;
mod rouge;

use std::collections::{BTreeSet, HashSet};
use std::sync::OnceLock;

use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use copying::{copying_report, CopyingConfig, CopyingReport, CopyingRow, MatchSource};
pub use repetition::{amplification, most_frequent, ngram_coverage, self_repetition_rate, train_overlap, NGramProfile};
pub use rouge::{avg_rouge_f, rouge_l, rouge_n, RougeScore, RougeVariant};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenizerConfig {
    /// Apply the Snowball English (Porter2) stemmer to each token.
    #[serde(default)]
    pub stemming: bool,
}

/// Lowercased tokens of one text.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    pub tokens: Vec<String>,
}

impl TokenSequence {
    pub fn new<S: Into<String>>(tokens: impl IntoIterator<Item = S>) -> Self {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        debug_assert!(tokens.iter().all(|t| !t.is_empty()));
        Self { tokens }
    }

    /// Splits on ASCII whitespace without further normalization.
    pub fn from_words(s: &str) -> Self {
        Self::new(s.split_whitespace())
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Contiguous windows of `n` tokens; empty when `n` is 0 or exceeds the
    /// sequence length.
    pub fn ngrams(&self, n: usize) -> impl Iterator<Item = &[String]> {
        let windows: Box<dyn Iterator<Item = &[String]>> = if n == 0 || n > self.tokens.len() {
            Box::new(std::iter::empty())
        } else {
            Box::new(self.tokens.windows(n))
        };
        windows
    }

    /// Distinct n-grams joined with single spaces.
    pub fn ngram_set(&self, n: usize) -> HashSet<String> {
        self.ngrams(n).map(|g| g.join(" ")).collect()
    }

    pub fn ngram_set_sorted(&self, n: usize) -> BTreeSet<String> {
        self.ngrams(n).map(|g| g.join(" ")).collect()
    }
}

fn stemmer() -> &'static Stemmer {
    static STEMMER: OnceLock<Stemmer> = OnceLock::new();
    STEMMER.get_or_init(|| Stemmer::create(Algorithm::English))
}

/// Lowercases `text` and splits it on runs of non-alphanumeric characters.
pub fn tokenize(text: &str, config: &TokenizerConfig) -> TokenSequence {
    let tokens = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| {
            let lower = t.to_lowercase();
            if config.stemming {
                stemmer().stem(&lower).into_owned()
            } else {
                lower
            }
        })
        .filter(|t| !t.is_empty())
        .collect();
    TokenSequence { tokens }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexicalError {
    #[error("n-gram length must be at least 1")]
    ZeroN,
    #[error("no summaries given")]
    NoSummaries,
    #[error("profile is empty; the overlap rate is undefined")]
    EmptyProfile,
    #[error("n-gram {0:?} never occurs in the reference set; amplification is undefined")]
    ZeroReferenceOccurrence(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(text: &str) -> Vec<String> {
        tokenize(text, &TokenizerConfig::default()).tokens
    }

    #[test]
    fn splits_on_non_alphanumeric_runs() {
        assert_eq!(toks("No effect."), vec!["no", "effect"]);
        assert!(toks("").is_empty());
        assert_eq!(toks("anti-inflammatory, 2mg"), vec!["anti", "inflammatory", "2mg"]);
        assert_eq!(toks("  ...  "), Vec::<String>::new());
        assert_eq!(toks("Ölbad ÉTUDE"), vec!["ölbad", "étude"]);
    }

    #[test]
    fn stemming_is_optional() {
        let cfg = TokenizerConfig { stemming: true };
        assert_eq!(tokenize("Running trials", &cfg).tokens, vec!["run", "trial"]);
        assert_eq!(toks("Running trials"), vec!["running", "trials"]);
    }

    #[test]
    fn ngram_windows() {
        let s = TokenSequence::from_words("a b c");
        assert_eq!(s.ngrams(2).count(), 2);
        assert_eq!(s.ngrams(4).count(), 0);
        assert_eq!(s.ngrams(0).count(), 0);
        assert!(s.ngram_set(3).contains("a b c"));
    }
}
