use std::collections::{BTreeMap, HashMap};

use super::{LexicalError, TokenSequence};

/// Self-repeating n-grams of a summary collection: n-grams occurring in at
/// least two distinct summaries, with the number of summaries containing each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramProfile {
    pub n: usize,
    pub counts: BTreeMap<String, usize>,
    pub corpus_size: usize,
}

impl NGramProfile {
    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Share of summaries containing `ngram`, in percent.
    pub fn percent(&self, ngram: &str) -> Option<f64> {
        self.counts
            .get(ngram)
            .map(|&c| 100.0 * c as f64 / self.corpus_size as f64)
    }
}

/// Number of summaries containing each n-gram.
fn document_frequency(summaries: &[TokenSequence], n: usize) -> HashMap<String, usize> {
    let mut df: HashMap<String, usize> = HashMap::new();
    for s in summaries {
        for g in s.ngram_set(n) {
            *df.entry(g).or_default() += 1;
        }
    }
    df
}

fn check(summaries: &[TokenSequence], n: usize) -> Result<(), LexicalError> {
    if n == 0 {
        return Err(LexicalError::ZeroN);
    }
    if summaries.is_empty() {
        return Err(LexicalError::NoSummaries);
    }
    Ok(())
}

/// Fraction of summaries containing at least one n-gram that also occurs in
/// another summary of the list.
pub fn self_repetition_rate(summaries: &[TokenSequence], n: usize) -> Result<f64, LexicalError> {
    check(summaries, n)?;
    let df = document_frequency(summaries, n);
    let repeating = summaries
        .iter()
        .filter(|s| s.ngrams(n).any(|g| df.get(&g.join(" ")).is_some_and(|&c| c >= 2)))
        .count();
    Ok(repeating as f64 / summaries.len() as f64)
}

pub fn ngram_coverage(summaries: &[TokenSequence], n: usize) -> Result<NGramProfile, LexicalError> {
    check(summaries, n)?;
    let counts = document_frequency(summaries, n)
        .into_iter()
        .filter(|(_, c)| *c >= 2)
        .collect();
    Ok(NGramProfile {
        n,
        counts,
        corpus_size: summaries.len(),
    })
}

/// The most widespread self-repeating n-gram and its count; ties go to the
/// lexicographically smallest n-gram.
pub fn most_frequent(profile: &NGramProfile) -> Option<(&str, usize)> {
    profile
        .counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(g, c)| (g.as_str(), *c))
}

/// Fraction of the profile's distinct n-grams that occur in at least one of
/// `train_targets`.
pub fn train_overlap(profile: &NGramProfile, train_targets: &[TokenSequence]) -> Result<f64, LexicalError> {
    if profile.is_empty() {
        return Err(LexicalError::EmptyProfile);
    }
    let mut train = std::collections::HashSet::new();
    for t in train_targets {
        train.extend(t.ngram_set(profile.n));
    }
    let found = profile.counts.keys().filter(|g| train.contains(*g)).count();
    Ok(found as f64 / profile.counts.len() as f64)
}

fn containing_share(ngram: &[String], texts: &[TokenSequence]) -> f64 {
    if texts.is_empty() {
        return 0.0;
    }
    let hits = texts
        .iter()
        .filter(|t| t.ngrams(ngram.len()).any(|g| g == ngram))
        .count();
    hits as f64 / texts.len() as f64
}

/// How much more often `ngram` appears in `generated` than in `reference`
/// (for example the training targets), as a ratio of containing shares.
pub fn amplification(
    ngram: &[String],
    generated: &[TokenSequence],
    reference: &[TokenSequence],
) -> Result<f64, LexicalError> {
    if ngram.is_empty() {
        return Err(LexicalError::ZeroN);
    }
    let base = containing_share(ngram, reference);
    if base == 0.0 {
        return Err(LexicalError::ZeroReferenceOccurrence(ngram.join(" ")));
    }
    Ok(containing_share(ngram, generated) / base)
}
