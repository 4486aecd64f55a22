//! Stratified scan of `h / N` over random mixtures.

use serde::Serialize;

use super::{fmt, Outcome, RunContext};
use crate::error::{Error, Result};
use crate::geometry::ratio_scan;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RatioSummary {
    pub c_hat: Option<f64>,
    pub budget: usize,
    pub seed: u64,
    pub config_hash: String,
    pub rows: usize,
    pub threshold: f64,
    /// Rows with `h ≤ threshold`.
    pub local_rows: usize,
    pub local_min: f64,
    pub local_max: f64,
    pub global_min: f64,
    pub global_max: f64,
}

pub fn run_ratio(ctx: &RunContext) -> Result<Outcome<RatioSummary>> {
    let model = ctx.model()?;
    let nbhd = ctx.neighborhoods(&model)?;
    let cfg = &ctx.config.ratio;
    let rows = ratio_scan(&model, &nbhd, &cfg.scan, ctx.seed)?;
    let local: Vec<f64> = rows.iter().filter(|r| r.h <= cfg.threshold).map(|r| r.ratio).collect();
    if local.is_empty() {
        return Err(Error::Config(format!("no sampled mixture has h ≤ {}", cfg.threshold)));
    }
    let min = |v: &mut dyn Iterator<Item = f64>| v.fold(f64::INFINITY, f64::min);
    let max = |v: &mut dyn Iterator<Item = f64>| v.fold(0.0, f64::max);
    let prov = ctx.provenance("ratio", ctx.config.model.grid_label(&model), ctx.config.cstar.value);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.stratum.to_string(), fmt(r.h), fmt(r.n), fmt(r.ratio)])
        .collect();
    ctx.emit_csv("ratio_scan.csv", &prov, &["stratum", "h", "n", "ratio"], &table)?;
    let summary = RatioSummary {
        c_hat: ctx.config.cstar.value,
        budget: cfg.scan.n_samples,
        seed: ctx.seed,
        config_hash: ctx.hash().to_string(),
        rows: rows.len(),
        threshold: cfg.threshold,
        local_rows: local.len(),
        local_min: min(&mut local.iter().copied()),
        local_max: max(&mut local.iter().copied()),
        global_min: min(&mut rows.iter().map(|r| r.ratio)),
        global_max: max(&mut rows.iter().map(|r| r.ratio)),
    };
    ctx.finish("ratio_summary.json", prov, summary)
}
