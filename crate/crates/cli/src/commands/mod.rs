pub mod campaign;
pub mod human;
pub mod lexical;
pub mod score;

use anyhow::Result;

use crate::config::RunConfig;
use crate::inputs;
use crate::output::warn;

/// Every analysis over existing metric CSVs, annotations and texts.
pub fn report(cfg: &RunConfig) -> Result<()> {
    let corpus = inputs::corpus(cfg)?;
    lexical::selfrep(cfg)?;
    if cfg.sidecars.statements.is_some() && cfg.sidecars.directions.is_some() {
        lexical::copying(cfg)?;
    } else {
        warn("no statements or directions sidecar; copying.csv skipped");
    }
    human::report(cfg, &corpus)
}
