use std::collections::BTreeMap;
use std::fs;

use anyhow::{bail, Context, Result};

use mslr_eval::corpus::{TextKey, TARGET_ORIGIN};
use mslr_eval::lexical::{avg_rouge_f, rouge_l, rouge_n, tokenize, TokenSequence};
use mslr_eval::modelmetrics::{bertscore_f, cosine_metric, delta_ei, pio_overlap};
use mslr_eval::{Corpus, MetricId, SidecarBundle};

use crate::config::RunConfig;
use crate::inputs::{self, metric_file, UNDEFINED_FILE};
use crate::output::{num, Table};

/// Value of one metric for one instance, or why it is undefined.
type Scored = std::result::Result<f64, &'static str>;

struct Scorer<'a> {
    cfg: &'a RunConfig,
    corpus: &'a Corpus,
    bundle: &'a SidecarBundle,
    targets: BTreeMap<&'a str, TokenSequence>,
}

fn require(cfg: &RunConfig, bundle: &SidecarBundle, metrics: &[MetricId]) -> Result<()> {
    let enc = &cfg.metrics.encoders;
    let has_sentence = |id: &str| bundle.embeddings.sentence_encoders().any(|e| e == id);
    for &m in metrics {
        let missing = match m {
            MetricId::BertScoreF => (!bundle.embeddings.token_encoders().any(|e| e == enc.bertscore))
                .then(|| format!("token embeddings under encoder {:?}", enc.bertscore)),
            MetricId::Nli => {
                (!has_sentence(&enc.nli)).then(|| format!("sentence embeddings under encoder {:?}", enc.nli))
            }
            MetricId::Sts => {
                (!has_sentence(&enc.sts)).then(|| format!("sentence embeddings under encoder {:?}", enc.sts))
            }
            MetricId::ClaimVer => {
                (!has_sentence(&enc.claimver)).then(|| format!("sentence embeddings under encoder {:?}", enc.claimver))
            }
            MetricId::DeltaEi => cfg
                .sidecars
                .evidence
                .is_none()
                .then(|| "an evidence sidecar".to_string()),
            MetricId::PioOverlap => cfg.sidecars.pio.is_none().then(|| "a PIO sidecar".to_string()),
            _ => None,
        };
        if let Some(what) = missing {
            bail!("metric {m} is enabled but no sidecar provides {what}");
        }
    }
    Ok(())
}

impl<'a> Scorer<'a> {
    fn score(&self, metric: MetricId, system: &str, review: &str, summary: &TokenSequence) -> Result<Scored> {
        let target = &self.targets[review];
        let gen_key = TextKey::system(system, review);
        let tgt_key = TextKey::target(review);
        let enc = &self.cfg.metrics.encoders;
        let cosine = |encoder: &str| -> Result<Scored> {
            let e = &self.bundle.embeddings;
            Ok(match (e.sentence(encoder, &tgt_key), e.sentence(encoder, &gen_key)) {
                (None, _) => Err("no target embedding"),
                (_, None) => Err("no generated embedding"),
                (Some(t), Some(g)) => Ok(cosine_metric(t, g)?),
            })
        };
        Ok(match metric {
            MetricId::Rouge1F => Ok(rouge_n(summary, target, 1).f),
            MetricId::Rouge2F => Ok(rouge_n(summary, target, 2).f),
            MetricId::RougeLF => Ok(rouge_l(summary, target).f),
            MetricId::AvgRougeF => Ok(avg_rouge_f(
                &rouge_n(summary, target, 1),
                &rouge_n(summary, target, 2),
                &rouge_l(summary, target),
            )),
            MetricId::BertScoreF => {
                let e = &self.bundle.embeddings;
                match (e.tokens(&enc.bertscore, &tgt_key), e.tokens(&enc.bertscore, &gen_key)) {
                    (None, _) => Err("no target token embeddings"),
                    (_, None) => Err("no generated token embeddings"),
                    (Some(r), Some(c)) => Ok(bertscore_f(c, r)?),
                }
            }
            MetricId::DeltaEi => match (
                self.bundle.evidence_pairs(&tgt_key),
                self.bundle.evidence_pairs(&gen_key),
            ) {
                (None, _) => Err("no target evidence record"),
                (_, None) => Err("no generated evidence record"),
                (Some(t), Some(g)) => Ok(delta_ei(t, g)
                    .with_context(|| format!("Delta-EI for ({system}, {review})"))?
                    .total),
            },
            MetricId::Nli => cosine(&enc.nli)?,
            MetricId::Sts => cosine(&enc.sts)?,
            MetricId::ClaimVer => cosine(&enc.claimver)?,
            MetricId::PioOverlap => match (self.bundle.pio(&tgt_key), self.bundle.pio(&gen_key)) {
                (None, _) => Err("no target PIO record"),
                (_, None) => Err("no generated PIO record"),
                (Some(t), Some(g)) => pio_overlap(t, g).score.ok_or("target has no PIO spans"),
            },
        })
    }
}

/// Writes `<metric>.csv` per enabled metric and `undefined.csv`. Returns the
/// number of defined values written.
pub fn run(cfg: &RunConfig) -> Result<usize> {
    let corpus = inputs::corpus(cfg)?;
    let bundle = inputs::sidecars(cfg, &corpus)?;
    let metrics = cfg.enabled_metrics();
    require(cfg, &bundle, &metrics)?;

    let tok = &cfg.tokenizer;
    let targets = corpus
        .reviews()
        .iter()
        .map(|r| (r.review_id.as_str(), tokenize(&r.target, tok)))
        .collect();
    let scorer = Scorer {
        cfg,
        corpus: &corpus,
        bundle: &bundle,
        targets,
    };

    let mut summaries: Vec<_> = scorer.corpus.generated().iter().collect();
    summaries.sort_by(|a, b| (&a.system_id, &a.review_id).cmp(&(&b.system_id, &b.review_id)));
    let tokens: Vec<TokenSequence> = summaries.iter().map(|g| tokenize(&g.summary, tok)).collect();

    let dir = cfg.metrics_dir();
    let mut undefined = Vec::new();
    let mut written = 0;
    for m in MetricId::ALL {
        let path = metric_file(&dir, m);
        if !metrics.contains(&m) {
            if path.exists() {
                fs::remove_file(&path).with_context(|| format!("removing stale {}", path.display()))?;
            }
            continue;
        }
        let mut table = Table::create(&path, &["system_id", "review_id", "value"])?;
        for (g, t) in summaries.iter().zip(&tokens) {
            debug_assert_ne!(g.system_id, TARGET_ORIGIN);
            match scorer.score(m, &g.system_id, &g.review_id, t)? {
                Ok(v) if v.is_finite() => {
                    table.row([g.system_id.as_str(), g.review_id.as_str(), &num(v)])?;
                    written += 1;
                }
                Ok(_) => undefined.push((m, g.system_id.clone(), g.review_id.clone(), "non-finite value")),
                Err(reason) => undefined.push((m, g.system_id.clone(), g.review_id.clone(), reason)),
            }
        }
        table.finish()?;
    }

    let mut table = Table::create(
        &dir.join(UNDEFINED_FILE),
        &["metric_id", "system_id", "review_id", "reason"],
    )?;
    for (m, s, r, reason) in &undefined {
        table.row([m.as_str(), s, r, reason])?;
    }
    table.finish()?;
    Ok(written)
}
