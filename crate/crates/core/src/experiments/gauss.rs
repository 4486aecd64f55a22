//! Growth of the envelope norms with the radius of `Θ` for a Gaussian base.

use serde::Serialize;

use super::{fmt, Outcome, RunContext};
use crate::density::{Envelopes, GridFunction, Model, ParameterDomain};
use crate::error::{Error, Result};
use crate::stats::linear_fit;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussRow {
    pub t: f64,
    pub nodes: usize,
    /// `‖H₀‖₄, ‖H₁‖₄, ‖H₂‖₄, ‖H₃‖₂`.
    pub norms: [f64; 4],
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GaussSummary {
    pub rows: Vec<GaussRow>,
    /// Fits of `ln‖H_k‖` against `T²`, one per `k`.
    pub slopes: [f64; 4],
    pub intercepts: [f64; 4],
    pub r2: [f64; 4],
    pub residuals: [Vec<f64>; 4],
    pub all_finite: bool,
    pub increasing: bool,
}

const ORDERS: [f64; 4] = [4.0, 4.0, 4.0, 2.0];

/// Largest share of `∫ g^p f* dμ` carried by a single boundary node.
fn boundary_share(model: &Model, g: &GridFunction, p: f64) -> f64 {
    let grid = model.grid();
    let d = model.dim();
    let axes = grid.axes();
    let mut total = 0.0;
    let mut edge = 0.0f64;
    for (k, (v, m)) in g.values().iter().zip(model.measure()).enumerate() {
        let val = v.abs().powf(p) * m;
        total += val;
        let x = grid.node(k);
        let on_edge = (0..d).any(|a| x[a] == axes[a][0] || x[a] == *axes[a].last().unwrap());
        if on_edge {
            edge = edge.max(val);
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

pub fn run_gauss(ctx: &RunContext) -> Result<Outcome<GaussSummary>> {
    let cfg = &ctx.config;
    if cfg.model.base != "gaussian" {
        return Err(Error::Config("gauss needs base = \"gaussian\"".into()));
    }
    if cfg.gauss.t_ladder.len() < 2 {
        return Err(Error::Config("gauss.t_ladder needs at least two radii".into()));
    }
    let mut rows = Vec::with_capacity(cfg.gauss.t_ladder.len());
    let mut label = String::new();
    for &t in &cfg.gauss.t_ladder {
        let domain = ParameterDomain::new(cfg.model.domain.center.clone(), t)?;
        let model = cfg.model.build_with_domain(&ctx.base_dir, domain)?;
        let env = Envelopes::compute(&model, &cfg.envelopes)?;
        let mut norms = [0.0; 4];
        for k in 0..4 {
            let h = env.get(k)?;
            let share = boundary_share(&model, h, ORDERS[k]);
            if share > cfg.gauss.truncation_tol {
                return Err(Error::Config(format!(
                    "quadrature box truncates ‖H_{k}‖ at T = {t} (boundary share {share:.3e}); \
                     widen model.grid.lo/hi or leave them unset for an automatic box"
                )));
            }
            norms[k] = model.lp_norm(h, ORDERS[k])?;
        }
        label = cfg.model.grid_label(&model);
        rows.push(GaussRow {
            t,
            nodes: model.len(),
            norms,
        });
    }
    let all_finite = rows.iter().all(|r| r.norms.iter().all(|v| v.is_finite() && *v > 0.0));
    if !all_finite {
        return Err(Error::Numeric("an envelope norm is not finite and positive".into()));
    }
    let increasing = rows
        .windows(2)
        .all(|w| w[1].t <= w[0].t || (0..4).all(|k| w[1].norms[k] > w[0].norms[k]));
    let x: Vec<f64> = rows.iter().map(|r| r.t * r.t).collect();
    let mut slopes = [0.0; 4];
    let mut intercepts = [0.0; 4];
    let mut r2 = [0.0; 4];
    let mut residuals: [Vec<f64>; 4] = Default::default();
    for k in 0..4 {
        let y: Vec<f64> = rows.iter().map(|r| r.norms[k].ln()).collect();
        let f = linear_fit(&x, &y)?;
        slopes[k] = f.slope;
        intercepts[k] = f.intercept;
        r2[k] = f.r2;
        residuals[k] = f.residuals;
    }
    let prov = ctx.provenance("gauss", format!("{label};per-T automatic box"), None);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![fmt(r.t), r.nodes.to_string()];
            v.extend(r.norms.iter().map(|x| fmt(*x)));
            v
        })
        .collect();
    ctx.emit_csv("gauss_envelopes.csv", &prov, &["T", "nodes", "H0_L4", "H1_L4", "H2_L4", "H3_L2"], &table)?;
    let fits: Vec<Vec<String>> = (0..4)
        .map(|k| vec![k.to_string(), fmt(slopes[k]), fmt(intercepts[k]), fmt(r2[k])])
        .collect();
    ctx.emit_csv("gauss_fits.csv", &prov, &["k", "slope_T2", "intercept", "r2"], &fits)?;
    let summary = GaussSummary {
        rows,
        slopes,
        intercepts,
        r2,
        residuals,
        all_finite,
        increasing,
    };
    ctx.finish("gauss_summary.json", prov, summary)
}
