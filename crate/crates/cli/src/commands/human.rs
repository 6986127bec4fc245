use std::collections::{BTreeMap, BTreeSet};

use anyhow::{bail, Context, Result};
use serde_json::json;

use mslr_eval::humaneval::{annotator_ranking, by_annotator, facet_agreement, normalize_facets, tally_pairwise, Facet};
use mslr_eval::ranking::{
    bootstrap_ranking, combined_pairwise_ranking, correlate, correlation_matrix, ecdf, rank_systems,
    significance_stars, spearman, system_scores, BootstrapSummary, CorrelationKind, CorrelationResult, Polarity,
    RankingSource, SystemRanking,
};
use mslr_eval::{Corpus, MetricId};

use crate::config::RunConfig;
use crate::inputs::{Annotations, Instance, MetricTable};
use crate::output::{num, opt, quantile, warn, write_file, Table};

pub fn agreement(cfg: &RunConfig, ann: &Annotations) -> Result<()> {
    let rows = facet_agreement(&ann.facet).context("no dual-annotated facet instances")?;
    let mut t = Table::create(
        &cfg.output_dir.join("agreement.csv"),
        &[
            "question_id",
            "question",
            "classes",
            "kappa",
            "agreement",
            "merged_agreement",
            "n_items",
        ],
    )?;
    for r in rows {
        t.row([
            r.question_id.to_string(),
            r.question.to_string(),
            r.classes.to_string(),
            opt(r.result.kappa),
            num(r.result.proportion),
            opt(r.merged_proportion),
            r.result.n_items.to_string(),
        ])?;
    }
    t.finish()?;
    Ok(())
}

fn warn_scores(source: &RankingSource, scores: &mslr_eval::ranking::SystemScores) {
    for s in &scores.dropped {
        warn(format!(
            "{source}: system {s:?} has no defined value and is left unranked"
        ));
    }
}

/// Every ranking the analyses compare, in report column order: metrics,
/// facets, individual annotators, then the combined pairwise ranking.
///
/// Metrics are averaged over the facet-annotated instances when there are
/// any, and over every instance otherwise.
pub fn rankings(metrics: &MetricTable, ann: &Annotations) -> Result<Vec<SystemRanking>> {
    let mut out = Vec::new();
    let subset = ann.facet_subset();
    let subset = (!subset.is_empty()).then_some(&subset);
    if subset.is_none() {
        warn("no facet annotations; metrics are averaged over all instances and human columns are omitted");
    }
    for m in metrics.metrics() {
        let source = RankingSource::Metric(m);
        let col = &metrics.values[&m];
        let scores = system_scores(col.iter().map(|((s, r), v)| (s.as_str(), r.as_str(), *v)), subset)
            .with_context(|| format!("averaging {m}"))?;
        warn_scores(&source, &scores);
        if !scores.means.is_empty() {
            out.push(rank_systems(scores.means, Polarity::of_metric(m), source));
        }
    }

    let facet_scores = ann.facet_scores();
    if !facet_scores.is_empty() {
        for f in Facet::ALL {
            let source = RankingSource::Facet(f);
            let rows = facet_scores.iter().map(|((s, r), m)| (s.as_str(), r.as_str(), m[&f]));
            let scores = system_scores(rows, None)?;
            warn_scores(&source, &scores);
            if !scores.means.is_empty() {
                out.push(rank_systems(scores.means, Polarity::HigherBetter, source));
            }
        }
    }

    if !ann.pairwise.is_empty() {
        let per = by_annotator(&ann.pairwise);
        let universe: BTreeSet<&str> = ann
            .pairwise
            .iter()
            .flat_map(|a| [a.system_a.as_str(), a.system_b.as_str()])
            .collect();
        for (annotator, list) in &per {
            let mut points: BTreeMap<String, u32> = universe.iter().map(|s| (s.to_string(), 0)).collect();
            points.extend(tally_pairwise(list));
            out.push(SystemRanking {
                ordering: annotator_ranking(&points),
                source: RankingSource::Annotator(annotator.clone()),
                scores: points.into_iter().map(|(k, v)| (k, v as f64)).collect(),
            });
        }
        out.push(combined_pairwise_ranking(&per)?);
    } else {
        warn("no pairwise annotations; annotator and PW-Comb columns are omitted");
    }
    Ok(out)
}

fn wide_table(
    cfg: &RunConfig,
    file: &str,
    rankings: &[SystemRanking],
    cell: impl Fn(&SystemRanking, &str) -> String,
) -> Result<()> {
    let systems: BTreeSet<&str> = rankings
        .iter()
        .flat_map(|r| r.ordering.keys().map(String::as_str))
        .collect();
    let header: Vec<String> = std::iter::once("system_id".to_string())
        .chain(rankings.iter().map(|r| r.source.to_string()))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut t = Table::create(&cfg.output_dir.join(file), &header)?;
    for s in systems {
        let row: Vec<String> = std::iter::once(s.to_string())
            .chain(rankings.iter().map(|r| cell(r, s)))
            .collect();
        t.row(row)?;
    }
    t.finish()?;
    Ok(())
}

pub fn rank(cfg: &RunConfig, metrics: &MetricTable, ann: &Annotations) -> Result<Vec<SystemRanking>> {
    let rankings = rankings(metrics, ann)?;
    wide_table(cfg, "rankings.csv", &rankings, |r, s| {
        r.ordering.get(s).map(|v| v.to_string()).unwrap_or_default()
    })?;
    wide_table(cfg, "rank_scores.csv", &rankings, |r, s| opt(r.scores.get(s).copied()))?;
    Ok(rankings)
}

fn result_cells(r: Option<&CorrelationResult>) -> [String; 4] {
    match r {
        Some(r) => [
            num(r.value),
            opt(r.p_value),
            r.n.to_string(),
            significance_stars(r.p_value).to_string(),
        ],
        None => Default::default(),
    }
}

/// Spearman rho between two rankings over the systems both rank.
pub fn ranking_correlation(a: &SystemRanking, b: &SystemRanking) -> Option<CorrelationResult> {
    let (x, y): (Vec<f64>, Vec<f64>) = a
        .ordering
        .iter()
        .filter_map(|(s, &ra)| b.ordering.get(s).map(|&rb| (ra as f64, rb as f64)))
        .unzip();
    spearman(&x, &y).ok()
}

/// Instance-level Pearson correlations between each metric and each facet
/// score over the facet-annotated instances.
pub fn metric_facet_correlations(
    metrics: &MetricTable,
    ann: &Annotations,
) -> Vec<(MetricId, Facet, Option<CorrelationResult>)> {
    let facet_scores = ann.facet_scores();
    let mut out = Vec::new();
    for m in metrics.metrics() {
        let x: Vec<Option<f64>> = facet_scores.keys().map(|k| metrics.get(m, k)).collect();
        for f in Facet::ALL {
            let y: Vec<Option<f64>> = facet_scores.values().map(|v| v[&f]).collect();
            out.push((m, f, correlate(CorrelationKind::Pearson, &x, &y).ok()));
        }
    }
    out
}

pub fn correlate_cmd(
    cfg: &RunConfig,
    metrics: &MetricTable,
    ann: &Annotations,
    rankings: &[SystemRanking],
) -> Result<()> {
    let out = &cfg.output_dir;
    let instances: Vec<Instance> = metrics.instances().into_iter().collect();

    let columns: Vec<(String, Vec<Option<f64>>)> = metrics
        .metrics()
        .into_iter()
        .map(|m| (m.to_string(), instances.iter().map(|k| metrics.get(m, k)).collect()))
        .collect();
    let matrix = correlation_matrix(&columns, CorrelationKind::Pearson);
    let mut t = Table::create(
        &out.join("metric_correlations.csv"),
        &["metric_a", "metric_b", "r", "p_value", "n", "stars"],
    )?;
    for (i, a) in matrix.names.iter().enumerate() {
        for (j, b) in matrix.names.iter().enumerate() {
            let [r, p, n, stars] = result_cells(matrix.cells[i][j].as_ref());
            t.row([a.clone(), b.clone(), r, p, n, stars])?;
        }
    }
    t.finish()?;

    let mut t = Table::create(
        &out.join("metric_distributions.csv"),
        &[
            "metric",
            "system_id",
            "n",
            "n_undefined",
            "mean",
            "sd",
            "min",
            "q1",
            "median",
            "q3",
            "max",
        ],
    )?;
    for m in metrics.metrics() {
        let mut per: BTreeMap<&str, (Vec<f64>, usize)> = BTreeMap::new();
        for ((s, _), v) in &metrics.values[&m] {
            let e = per.entry(s.as_str()).or_default();
            match v {
                Some(v) => e.0.push(*v),
                None => e.1 += 1,
            }
        }
        for (s, (mut v, undefined)) in per {
            if v.is_empty() {
                t.row(
                    [m.to_string(), s.to_string(), "0".into(), undefined.to_string()]
                        .into_iter()
                        .chain(std::iter::repeat_n(String::new(), 7)),
                )?;
                continue;
            }
            v.sort_by(f64::total_cmp);
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            t.row([
                m.to_string(),
                s.to_string(),
                v.len().to_string(),
                undefined.to_string(),
                num(mean),
                num(sd),
                num(v[0]),
                num(quantile(&v, 0.25)),
                num(quantile(&v, 0.5)),
                num(quantile(&v, 0.75)),
                num(v[v.len() - 1]),
            ])?;
        }
    }
    t.finish()?;

    let mut t = Table::create(
        &out.join("ranking_correlations.csv"),
        &["source_a", "source_b", "rho", "p_value", "n", "stars"],
    )?;
    for a in rankings {
        for b in rankings {
            let [r, p, n, stars] = result_cells(ranking_correlation(a, b).as_ref());
            t.row([a.source.to_string(), b.source.to_string(), r, p, n, stars])?;
        }
    }
    t.finish()?;

    if ann.facet.is_empty() {
        warn("no facet annotations; metric-facet correlations, PIO scatter and ECDF series are omitted");
        return Ok(());
    }

    let mut t = Table::create(
        &out.join("metric_facet_correlations.csv"),
        &["metric", "facet", "r", "p_value", "n", "stars"],
    )?;
    for (m, f, r) in metric_facet_correlations(metrics, ann) {
        let [r, p, n, stars] = result_cells(r.as_ref());
        t.row([m.to_string(), f.to_string(), r, p, n, stars])?;
    }
    t.finish()?;

    let facet_scores = ann.facet_scores();
    let mut t = Table::create(
        &out.join("pio_correlations.csv"),
        &["metric", "system_id", "review_id", "value", "pio"],
    )?;
    for m in metrics.metrics() {
        for (k, f) in &facet_scores {
            if let (Some(v), Some(p)) = (metrics.get(m, k), f[&Facet::Pio]) {
                t.row([m.to_string(), k.0.clone(), k.1.clone(), num(v), num(p)])?;
            }
        }
    }
    t.finish()?;

    // One observation per annotation with a defined Direction score.
    let mut t = Table::create(&out.join("ecdf.csv"), &["metric", "class", "value", "fraction"])?;
    for m in metrics.metrics() {
        let mut classes: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for a in &ann.facet {
            let Some(d) = normalize_facets(a).direction else {
                continue;
            };
            let key = (a.system_id.clone(), a.review_id.clone());
            if let Some(v) = metrics.get(m, &key) {
                classes
                    .entry(if d == 1.0 { "agree" } else { "disagree" })
                    .or_default()
                    .push(v);
            }
        }
        for (class, values) in classes {
            for (v, frac) in ecdf(&values) {
                t.row([m.to_string(), class.to_string(), num(v), num(frac)])?;
            }
        }
    }
    t.finish()?;
    Ok(())
}

pub fn bootstrap(cfg: &RunConfig, ann: &Annotations) -> Result<BootstrapSummary> {
    if ann.pairwise.is_empty() {
        bail!("bootstrap needs pairwise annotations");
    }
    let per = by_annotator(&ann.pairwise);
    let initial = combined_pairwise_ranking(&per)?;
    let summary = bootstrap_ranking(&per, cfg.bootstrap.samples, cfg.seed)?;
    let doc = json!({
        "n_samples": summary.n_samples,
        "mean_rho": summary.mean_rho,
        "sd_rho": summary.sd_rho,
        "seed": summary.seed,
        "n_undefined": summary.n_undefined,
        "initial_ranking": initial.ordering,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_file(&cfg.output_dir.join("bootstrap.json"), text.as_bytes())?;
    Ok(summary)
}

/// Runs each analysis whose inputs are present. Inputs are only read.
pub fn report(cfg: &RunConfig, corpus: &Corpus) -> Result<()> {
    let metrics = MetricTable::load(cfg, corpus)?;
    let ann = Annotations::load(cfg)?;
    if ann.facet.is_empty() && ann.pairwise.is_empty() {
        warn("annotation set is empty; human columns are omitted");
    }
    if ann.facet.is_empty() {
        warn("no facet annotations; agreement.csv skipped");
    } else if let Err(e) = agreement(cfg, &ann) {
        warn(format!("agreement.csv skipped: {e:#}"));
    }
    let rankings = rank(cfg, &metrics, &ann)?;
    correlate_cmd(cfg, &metrics, &ann, &rankings)?;
    if ann.pairwise.is_empty() {
        warn("no pairwise annotations; bootstrap.json skipped");
    } else {
        bootstrap(cfg, &ann)?;
    }
    Ok(())
}
