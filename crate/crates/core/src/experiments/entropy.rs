//! Local entropy of `ℋ_q(ε)`: constructed bracket counts and greedy nets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{fmt, Outcome, RunContext};
use crate::bracketing::{bracket_hq_local, greedy_cover, LatticeNorm, MixtureContext};
use crate::density::{Envelopes, Model};
use crate::error::{Error, Result};
use crate::metrics::hellinger_values;
use crate::sampling::sample_uniform_mixture;
use crate::stats::linear_fit;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyRow {
    pub kind: String,
    /// `δ/ε`.
    pub ratio: f64,
    pub delta: f64,
    /// `ln(ε/δ)`.
    pub ln_scale: f64,
    pub ln_count: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropySummary {
    pub q: usize,
    pub eps: f64,
    pub c_hat: f64,
    /// `10(d+1)q + 1`.
    pub exponent_bound: f64,
    pub construction_slope: f64,
    pub construction_r2: f64,
    pub greedy_slope: f64,
    pub greedy_r2: f64,
    pub samples: usize,
    pub rows: Vec<EntropyRow>,
}

const BATCH: usize = 4096;

/// `√(f w)` for `n` uniform `q`-mixtures with `h(f, f*) ≤ eps`, so that
/// Euclidean distance is Hellinger distance.
///
/// Candidate `k` uses ChaCha8 stream `k` of `seed`; accepted candidates are
/// kept in index order.
pub fn greedy_points(model: &Model, q: usize, eps: f64, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let w = model.grid().weights();
    let mut out = Vec::with_capacity(n);
    let mut next = 0u64;
    while out.len() < n {
        if next > 1000 * n.max(1) as u64 {
            return Err(Error::Config(format!(
                "fewer than {n} of {next} sampled mixtures lie within h ≤ {eps}"
            )));
        }
        let batch: Vec<Option<Vec<f64>>> = (next..next + BATCH as u64)
            .into_par_iter()
            .map(|k| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(k);
                let m = sample_uniform_mixture(&mut rng, model.domain(), q)?;
                let f = model.mixture_values(&m)?;
                let h = hellinger_values(model, &f, model.fstar());
                Ok((h <= eps).then(|| f.iter().zip(w).map(|(a, b)| (a * b).sqrt()).collect()))
            })
            .collect::<Result<_>>()?;
        next += BATCH as u64;
        out.extend(batch.into_iter().flatten().take(n - out.len()));
    }
    Ok(out)
}

pub fn run_entropy(ctx: &RunContext) -> Result<Outcome<EntropySummary>> {
    let cfg = &ctx.config.entropy;
    let model = ctx.model()?;
    let nbhd = ctx.neighborhoods(&model)?;
    let c_hat = ctx.cstar(&model, &nbhd)?;
    let env = Envelopes::compute(&model, &ctx.config.envelopes)?;
    let grid = ctx.config.model.grid_label(&model);
    let d = model.dim();
    let mctx = MixtureContext::new(model, nbhd, &env, c_hat)?;
    let prov = ctx.provenance("entropy", grid, Some(c_hat));
    let columns = ["kind", "ratio", "delta", "ln_scale", "ln_count"];
    let emit = |rows: &[EntropyRow]| {
        let table: Vec<Vec<String>> = rows
            .iter()
            .map(|r| vec![r.kind.clone(), fmt(r.ratio), fmt(r.delta), fmt(r.ln_scale), fmt(r.ln_count)])
            .collect();
        ctx.emit_csv("entropy.csv", &prov, &columns, &table)
    };

    let mut rows = Vec::new();
    for &ratio in &cfg.ladder {
        let delta = ratio * cfg.eps;
        let cover = bracket_hq_local(&mctx, cfg.q, cfg.eps, delta)?;
        rows.push(EntropyRow {
            kind: "construction".into(),
            ratio,
            delta,
            ln_scale: -ratio.ln(),
            ln_count: cover.ln_count(),
        });
    }
    let points = greedy_points(&mctx.model, cfg.q, cfg.eps, cfg.samples, ctx.seed)?;
    for &ratio in &cfg.ladder {
        let delta = ratio * cfg.eps;
        let centers = greedy_cover(&points, delta, &LatticeNorm::L2)?;
        if centers.len() > cfg.max_centers {
            emit(&rows)?;
            return Err(Error::CapExceeded(format!(
                "greedy net at δ = {delta} has {} centers, cap {}",
                centers.len(),
                cfg.max_centers
            )));
        }
        rows.push(EntropyRow {
            kind: "greedy".into(),
            ratio,
            delta,
            ln_scale: -ratio.ln(),
            ln_count: (centers.len() as f64).ln(),
        });
    }
    emit(&rows)?;
    let fit = |kind: &str| {
        let (x, y): (Vec<f64>, Vec<f64>) =
            rows.iter().filter(|r| r.kind == kind).map(|r| (r.ln_scale, r.ln_count)).unzip();
        linear_fit(&x, &y)
    };
    let cons = fit("construction")?;
    let greedy = fit("greedy")?;
    let summary = EntropySummary {
        q: cfg.q,
        eps: cfg.eps,
        c_hat,
        exponent_bound: (10 * (d + 1) * cfg.q + 1) as f64,
        construction_slope: cons.slope,
        construction_r2: cons.r2,
        greedy_slope: greedy.slope,
        greedy_r2: greedy.r2,
        samples: points.len(),
        rows,
    };
    ctx.finish("entropy_summary.json", prov, summary)
}
