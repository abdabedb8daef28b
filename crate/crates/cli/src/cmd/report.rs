use std::path::PathBuf;

use clap::Args;
use routefit::data::load_outcomes;
use routefit::eval::{advantage_matrix, emit_report, load_report, prefixed_path, Report};
use serde::{Deserialize, Serialize};

use super::route::prepare_prefix;
use super::train::models_or_all;
use crate::config::{self, require, set, set_some, SNAPSHOT_NAME};
use crate::error::Result;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportRun {
    /// Manifest of an existing bundle.
    pub from: Option<PathBuf>,
    /// Prefix for the regenerated bundle.
    pub out: Option<PathBuf>,
}

/// Verify a report bundle and write it again under a new prefix.
#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn resolve_report(args: ReportArgs) -> Result<ReportRun> {
    let mut c: ReportRun = config::load(args.config.as_deref())?;
    set_some(&mut c.from, args.from);
    set_some(&mut c.out, args.out);
    Ok(c)
}

pub fn run_report(c: &ReportRun) -> Result<()> {
    let from = require(&c.from, "from", "--from")?;
    let out = require(&c.out, "out", "--out")?;
    let report = load_report(from)?;
    prepare_prefix(out)?;
    config::write_snapshot(c, &prefixed_path(out, SNAPSHOT_NAME))?;
    emit_report(&report, out)?;
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdvantageRun {
    pub outcomes: Option<PathBuf>,
    /// Matrix order; empty means every model in the outcomes.
    pub models: Vec<String>,
    pub out: Option<PathBuf>,
}

/// Pairwise "i correct, j wrong" counts from an outcomes CSV.
#[derive(Debug, Args)]
pub struct AdvantageArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn resolve_advantage(args: AdvantageArgs) -> Result<AdvantageRun> {
    let mut c: AdvantageRun = config::load(args.config.as_deref())?;
    set_some(&mut c.outcomes, args.outcomes);
    set(&mut c.models, args.models);
    set_some(&mut c.out, args.out);
    Ok(c)
}

pub fn run_advantage(c: &AdvantageRun) -> Result<()> {
    let outcomes = load_outcomes(require(&c.outcomes, "outcomes", "--outcomes")?, false)?;
    let out = require(&c.out, "out", "--out")?;
    let models = models_or_all(&c.models, outcomes.models());
    let matrix = advantage_matrix(&outcomes, &models)?;
    prepare_prefix(out)?;
    config::write_snapshot(c, &prefixed_path(out, SNAPSHOT_NAME))?;
    for (i, mi) in matrix.models.iter().enumerate() {
        let row: Vec<String> = matrix.counts[i].iter().map(|n| n.to_string()).collect();
        println!("{mi}\t{}", row.join("\t"));
    }
    emit_report(&Report { advantage: Some(matrix), ..Report::default() }, out)?;
    Ok(())
}
