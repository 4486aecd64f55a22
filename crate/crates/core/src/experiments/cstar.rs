//! Search estimate of the comparison constant.

use serde::Serialize;

use super::{fmt, Outcome, RunContext};
use crate::error::Result;
use crate::geometry::{estimate_cstar, DeviationCoefficients};

#[derive(Clone, Debug, Serialize)]
pub struct CstarSummary {
    pub c_hat: f64,
    pub budget: usize,
    pub seed: u64,
    pub config_hash: String,
    /// `ĉ` at `seed, seed+1, …` when repeats are configured.
    pub seeds: Vec<u64>,
    pub c_hats: Vec<f64>,
    /// `(max − min) / min` over `c_hats`.
    pub spread: f64,
    pub argmin: DeviationCoefficients,
}

pub fn run_cstar(ctx: &RunContext) -> Result<Outcome<CstarSummary>> {
    let model = ctx.model()?;
    let nbhd = ctx.neighborhoods(&model)?;
    let opts = &ctx.config.cstar.search;
    let seeds: Vec<u64> = (0..=ctx.config.cstar.repeats as u64).map(|k| ctx.seed.wrapping_add(k)).collect();
    let mut estimates = Vec::with_capacity(seeds.len());
    for &s in &seeds {
        estimates.push(estimate_cstar(&model, &nbhd, opts, s)?);
    }
    let c_hats: Vec<f64> = estimates.iter().map(|e| e.c_hat).collect();
    let lo = c_hats.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = c_hats.iter().copied().fold(0.0, f64::max);
    let first = estimates.swap_remove(0);
    let prov = ctx.provenance("cstar", ctx.config.model.grid_label(&model), Some(first.c_hat));
    let rows: Vec<Vec<String>> = first
        .ratios
        .iter()
        .zip(&first.trace)
        .enumerate()
        .map(|(k, (r, m))| vec![k.to_string(), fmt(*r), fmt(*m)])
        .collect();
    ctx.emit_csv("cstar_trace.csv", &prov, &["sample", "ratio", "running_min"], &rows)?;
    let summary = CstarSummary {
        c_hat: first.c_hat,
        budget: opts.budget,
        seed: ctx.seed,
        config_hash: ctx.hash().to_string(),
        seeds,
        spread: (hi - lo) / lo,
        c_hats,
        argmin: first.argmin,
    };
    ctx.finish("cstar_summary.json", prov, summary)
}
