use std::collections::HashMap;

use anyhow::{bail, Context, Result};

use mslr_eval::corpus::{load_targets, Origin, TARGET_ORIGIN};
use mslr_eval::lexical::{
    copying_report, most_frequent, ngram_coverage, self_repetition_rate, tokenize, train_overlap, CopyingReport,
    TokenSequence,
};
use mslr_eval::Corpus;

use crate::config::RunConfig;
use crate::inputs;
use crate::output::{flag, num, opt, warn, Table};

/// Summary collections profiled separately: the targets first, then each
/// system in id order.
fn series(cfg: &RunConfig, corpus: &Corpus) -> Vec<(String, Vec<TokenSequence>)> {
    let tok = &cfg.tokenizer;
    let mut out = vec![(
        TARGET_ORIGIN.to_string(),
        corpus.reviews().iter().map(|r| tokenize(&r.target, tok)).collect(),
    )];
    for s in corpus.systems() {
        let seqs = corpus.summaries_for(&s).map(|g| tokenize(&g.summary, tok)).collect();
        out.push((s, seqs));
    }
    out
}

/// Document frequency of every n-gram across `texts`.
fn doc_freq(texts: &[TokenSequence], n: usize) -> HashMap<String, usize> {
    let mut df = HashMap::new();
    for t in texts {
        for g in t.ngram_set(n) {
            *df.entry(g).or_insert(0) += 1;
        }
    }
    df
}

pub fn selfrep(cfg: &RunConfig) -> Result<()> {
    let sel = &cfg.selfrep;
    if sel.ns.is_empty() || sel.ns.contains(&0) || sel.coverage_n == 0 || sel.top_n == 0 {
        bail!("[selfrep] n values must be positive");
    }
    let corpus = inputs::corpus(cfg)?;
    let series = series(cfg, &corpus);
    let out = &cfg.output_dir;

    let mut t = Table::create(&out.join("self_repetition.csv"), &["series", "n", "rate"])?;
    for (name, seqs) in &series {
        for &n in &sel.ns {
            t.row([name.clone(), n.to_string(), num(self_repetition_rate(seqs, n)?)])?;
        }
    }
    t.finish()?;

    let mut t = Table::create(
        &out.join("ngram_coverage.csv"),
        &["series", "ngram", "n", "count", "percent"],
    )?;
    for (name, seqs) in &series {
        let profile = ngram_coverage(seqs, sel.coverage_n)?;
        let mut rows: Vec<(&String, &usize)> = profile.counts.iter().collect();
        rows.sort_by(|a, b| b.1.cmp(a.1).then_with(|| a.0.cmp(b.0)));
        for (g, &c) in rows {
            let pct = profile.percent(g).expect("profile n-gram");
            t.row([
                name.clone(),
                g.clone(),
                sel.coverage_n.to_string(),
                c.to_string(),
                num(pct),
            ])?;
        }
    }
    t.finish()?;

    let mut t = Table::create(
        &out.join("top_ngrams.csv"),
        &["series", "n", "ngram", "count", "percent"],
    )?;
    for (name, seqs) in &series {
        let profile = ngram_coverage(seqs, sel.top_n)?;
        match most_frequent(&profile) {
            Some((g, c)) => {
                let pct = profile.percent(g).expect("profile n-gram");
                t.row([
                    name.clone(),
                    sel.top_n.to_string(),
                    g.to_string(),
                    c.to_string(),
                    num(pct),
                ])?;
            }
            None => t.row([name.clone(), sel.top_n.to_string(), String::new(), "0".into(), num(0.0)])?,
        }
    }
    t.finish()?;

    let Some(train_path) = cfg.corpus()?.train_targets.as_ref() else {
        warn("no [corpus] train_targets; train_overlap.csv and train_vs_generated.csv skipped");
        return Ok(());
    };
    let train: Vec<TokenSequence> = load_targets(train_path)
        .context("loading train targets")?
        .iter()
        .map(|s| tokenize(s, &cfg.tokenizer))
        .collect();
    if train.is_empty() {
        bail!("train targets file {} is empty", train_path.display());
    }

    let mut t = Table::create(&out.join("train_overlap.csv"), &["series", "n", "overlap"])?;
    for (name, seqs) in &series {
        for &n in &sel.ns {
            let profile = ngram_coverage(seqs, n)?;
            // An empty profile has no defined overlap.
            let v = train_overlap(&profile, &train).ok();
            t.row([name.clone(), n.to_string(), opt(v)])?;
        }
    }
    t.finish()?;

    let n = sel.coverage_n;
    let train_df = doc_freq(&train, n);
    let mut t = Table::create(
        &out.join("train_vs_generated.csv"),
        &["series", "ngram", "n", "percent", "train_percent", "amplification"],
    )?;
    for (name, seqs) in &series {
        let profile = ngram_coverage(seqs, n)?;
        for (g, &c) in &profile.counts {
            let share = c as f64 / seqs.len() as f64;
            let train_share = train_df.get(g).map_or(0.0, |&d| d as f64 / train.len() as f64);
            let amp = (train_share > 0.0).then(|| share / train_share);
            t.row([
                name.clone(),
                g.clone(),
                n.to_string(),
                num(100.0 * share),
                num(100.0 * train_share),
                opt(amp),
            ])?;
        }
    }
    t.finish()?;
    Ok(())
}

pub fn copying_reports(cfg: &RunConfig) -> Result<Vec<CopyingReport>> {
    if cfg.sidecars.statements.is_none() || cfg.sidecars.directions.is_none() {
        bail!("the copying analysis needs the statements and directions sidecars");
    }
    let corpus = inputs::corpus(cfg)?;
    let bundle = inputs::sidecars(cfg, &corpus)?;
    let mut origins = vec![Origin::Target];
    origins.extend(corpus.systems().into_iter().map(Origin::System));
    Ok(origins
        .iter()
        .map(|o| copying_report(o, &corpus, &bundle.statements, &bundle.directions, &cfg.copying))
        .collect())
}

pub fn copying(cfg: &RunConfig) -> Result<Vec<CopyingReport>> {
    let reports = copying_reports(cfg)?;
    let out = &cfg.output_dir;
    let mut t = Table::create(
        &out.join("copying.csv"),
        &[
            "system_id",
            "synthesis_rate",
            "input_match_rate",
            "n_reviews",
            "n_skipped",
        ],
    )?;
    for r in &reports {
        let skipped = r.rows.iter().filter(|x| x.skip_reason.is_some()).count();
        t.row([
            r.system_id.clone(),
            opt(r.synthesis_rate),
            opt(r.input_match_rate),
            r.rows.len().to_string(),
            skipped.to_string(),
        ])?;
    }
    t.finish()?;

    let mut t = Table::create(
        &out.join("copying_detail.csv"),
        &[
            "system_id",
            "review_id",
            "closest_doc",
            "closest_f",
            "target_f",
            "synthesis",
            "input_match",
            "skip_reason",
        ],
    )?;
    for r in &reports {
        for row in &r.rows {
            t.row([
                r.system_id.clone(),
                row.review_id.clone(),
                row.closest_doc.clone().unwrap_or_default(),
                opt(row.closest_f),
                opt(row.target_f),
                flag(row.synthesis),
                flag(row.input_match),
                row.skip_reason.clone().unwrap_or_default(),
            ])?;
        }
    }
    t.finish()?;
    Ok(reports)
}
