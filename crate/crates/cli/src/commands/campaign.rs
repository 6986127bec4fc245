use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use mslr_eval::campaign::{pair_counts, plan_facet_campaign, plan_pairwise_campaign, CampaignPlan};
use mslr_eval::corpus::AnnotationLog;
use mslr_eval_service::AppState;

use crate::config::RunConfig;
use crate::inputs;
use crate::output::{write_file, Table};

pub fn plan_path(cfg: &RunConfig) -> PathBuf {
    cfg.campaign
        .plan
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("plan.jsonl"))
}

pub fn log_path(cfg: &RunConfig) -> PathBuf {
    cfg.campaign
        .log
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("annotations.jsonl"))
}

pub fn build_plan(cfg: &RunConfig) -> Result<CampaignPlan> {
    let corpus = inputs::corpus(cfg)?;
    let facet = cfg
        .campaign
        .facet
        .as_ref()
        .context("config has no [campaign.facet] section")?;
    let mut plan = plan_facet_campaign(&corpus, facet, cfg.seed).context("planning facet annotation")?;
    if let Some(pw) = &cfg.campaign.pairwise {
        let systems = pw.systems.clone().unwrap_or_else(|| facet.systems.clone());
        let seed = pw.seed.unwrap_or(cfg.seed.wrapping_add(1));
        plan = plan_pairwise_campaign(&corpus, &systems, &plan, &pw.plan_config()?, seed)
            .context("planning pairwise annotation")?;
    }
    plan.check_against(&corpus)?;
    Ok(plan)
}

/// Writes the plan and the realized pair-count matrix.
pub fn plan(cfg: &RunConfig) -> Result<CampaignPlan> {
    let plan = build_plan(cfg)?;
    write_file(&plan_path(cfg), plan.to_jsonl().as_bytes())?;
    if !plan.pairwise_tasks.is_empty() {
        let mut t = Table::create(
            &cfg.output_dir.join("pair_counts.csv"),
            &["system_a", "system_b", "count"],
        )?;
        for ((a, b), n) in pair_counts(&plan) {
            t.row([a, b, n.to_string()])?;
        }
        t.finish()?;
    }
    Ok(plan)
}

/// Serves the configured plan until the process is stopped. Prints
/// `listening on ADDR` once the socket is bound.
pub fn serve(cfg: &RunConfig, addr: Option<&str>) -> Result<()> {
    let path = plan_path(cfg);
    if !path.exists() {
        bail!("campaign plan {} not found; run `plan` first", path.display());
    }
    let plan = CampaignPlan::load(&path)?;
    let corpus = inputs::corpus(cfg)?;
    let log_path = log_path(cfg);
    if let Some(dir) = log_path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let log = AnnotationLog::open(&log_path).with_context(|| format!("opening log {}", log_path.display()))?;
    let state = AppState::new(corpus, log, Some(plan), Some(path))?;
    let addr = addr.unwrap_or(&cfg.serve.addr).to_string();

    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        let local = listener.local_addr()?;
        let mut stdout = std::io::stdout();
        writeln!(stdout, "listening on {local}")?;
        stdout.flush()?;
        mslr_eval_service::serve(listener, state).await?;
        Ok(())
    })
}
