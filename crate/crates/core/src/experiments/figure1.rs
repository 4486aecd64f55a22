//! Sublevel sets of `h` and of the closed-form `N` over two-atom mixtures.

use rayon::prelude::*;
use serde::Serialize;

use super::{fmt, Outcome, RunContext};
use crate::error::{Error, Result};

/// `N(p, θ₁, θ₂)` for `p f_{θ₁} + (1−p) f_{θ₂}` against `f_{θ*}` in one dimension.
pub fn fig1_pseudo_n(p: f64, t1: f64, t2: f64, tstar: f64) -> f64 {
    let (a, b) = (t1 - tstar, t2 - tstar);
    (p * a + (1.0 - p) * b).abs() + 0.5 * p * a * a + 0.5 * (1.0 - p) * b * b
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Figure1Summary {
    pub resolution: usize,
    pub threshold: f64,
    pub points: usize,
    pub count_h: usize,
    pub count_n: usize,
    pub intersection: usize,
    pub union: usize,
    pub jaccard: f64,
    /// Degenerate parameters `(p,θ*,θ*)`, `(0,θ,θ*)`, `(1,θ*,θ)` checked.
    pub sanity_checked: usize,
    pub sanity_violations: usize,
    pub sanity_max_h: f64,
    pub sanity_max_n: f64,
}

pub fn run_figure1(ctx: &RunContext) -> Result<Outcome<Figure1Summary>> {
    let model = ctx.model()?;
    let cfg = &ctx.config;
    if cfg.model.base != "fig1" || model.dim() != 1 || model.reference().len() != 1 {
        return Err(Error::Config(
            "figure1 needs base = \"fig1\", dim = 1 and a single reference atom".into(),
        ));
    }
    let tstar = model.reference().atom(0)[0];
    let res = cfg.figure1.resolution;
    let thr = cfg.figure1.threshold;
    let axis: Vec<f64> = (0..=res).map(|k| k as f64 / res as f64).collect();
    let atoms: Vec<Vec<f64>> = axis.iter().map(|t| model.atom_values(&[*t])).collect();
    let sqrt_star: Vec<f64> = model.fstar().iter().map(|v| v.sqrt()).collect();
    let w = model.grid().weights();
    let h_of = |p: f64, a: &[f64], b: &[f64]| -> f64 {
        let mut s = 0.0;
        for k in 0..w.len() {
            let d = (p * a[k] + (1.0 - p) * b[k]).sqrt() - sqrt_star[k];
            s += w[k] * d * d;
        }
        s.sqrt()
    };
    // (i, j, k, h, n) for every grid point in lexicographic order.
    let cells: Vec<(usize, usize, usize, f64, f64)> = (0..=res)
        .into_par_iter()
        .flat_map_iter(|i| {
            let p = axis[i];
            let atoms = &atoms;
            let axis = &axis;
            (0..=res).flat_map(move |j| {
                (0..=res).map(move |k| {
                    let h = h_of(p, &atoms[j], &atoms[k]);
                    (i, j, k, h, fig1_pseudo_n(p, axis[j], axis[k], tstar))
                })
            })
        })
        .collect();
    let in_h = |c: &(usize, usize, usize, f64, f64)| c.3 <= thr;
    let in_n = |c: &(usize, usize, usize, f64, f64)| c.4 <= thr;
    let count_h = cells.iter().filter(|c| in_h(c)).count();
    let count_n = cells.iter().filter(|c| in_n(c)).count();
    let intersection = cells.iter().filter(|c| in_h(c) && in_n(c)).count();
    let union = count_h + count_n - intersection;

    let fs = model.atom_values(&[tstar]);
    let mut sanity = Vec::new();
    for (k, t) in axis.iter().enumerate() {
        sanity.push((*t, tstar, tstar, h_of(*t, &fs, &fs)));
        sanity.push((0.0, *t, tstar, h_of(0.0, &atoms[k], &fs)));
        sanity.push((1.0, tstar, *t, h_of(1.0, &fs, &atoms[k])));
    }
    let mut sanity_violations = 0;
    let (mut sanity_max_h, mut sanity_max_n) = (0.0f64, 0.0f64);
    for (p, a, b, h) in &sanity {
        let n = fig1_pseudo_n(*p, *a, *b, tstar);
        sanity_max_h = sanity_max_h.max(*h);
        sanity_max_n = sanity_max_n.max(n);
        if !(*h <= thr && n <= thr) {
            sanity_violations += 1;
        }
    }

    let prov = ctx.provenance("figure1", format!("{};sweep={}^3", cfg.model.grid_label(&model), res + 1), None);
    let row = |c: &(usize, usize, usize, f64, f64), v: f64| vec![fmt(axis[c.0]), fmt(axis[c.1]), fmt(axis[c.2]), fmt(v)];
    let rows_h: Vec<Vec<String>> = cells.iter().filter(|c| in_h(c)).map(|c| row(c, c.3)).collect();
    let rows_n: Vec<Vec<String>> = cells.iter().filter(|c| in_n(c)).map(|c| row(c, c.4)).collect();
    ctx.emit_csv("figure1_a_hellinger.csv", &prov, &["p", "theta1", "theta2", "h"], &rows_h)?;
    ctx.emit_csv("figure1_b_pseudo.csv", &prov, &["p", "theta1", "theta2", "n"], &rows_n)?;
    let summary = Figure1Summary {
        resolution: res,
        threshold: thr,
        points: cells.len(),
        count_h,
        count_n,
        intersection,
        union,
        jaccard: if union == 0 { 1.0 } else { intersection as f64 / union as f64 },
        sanity_checked: sanity.len(),
        sanity_violations,
        sanity_max_h,
        sanity_max_n,
    };
    ctx.finish("figure1_summary.json", prov, summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_vanishes_on_degenerate_set() {
        for k in 0..=10 {
            let t = k as f64 / 10.0;
            assert_eq!(fig1_pseudo_n(t, 0.5, 0.5, 0.5), 0.0);
            assert_eq!(fig1_pseudo_n(0.0, t, 0.5, 0.5), 0.0);
            assert_eq!(fig1_pseudo_n(1.0, 0.5, t, 0.5), 0.0);
        }
        assert!((fig1_pseudo_n(0.5, 0.0, 1.0, 0.5) - 0.125).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_pseudo_n_inside_the_neighborhood() {
        use crate::density::Mixture;
        use crate::geometry::{build_neighborhoods, mixture_to_coeffs, pseudo_n, NeighborhoodOptions};
        let cfg = crate::config::Config::parse_toml(
            "[model]\nbase = \"fig1\"\ndim = 1\ndomain = { center = [0.5], radius = 0.5 }\n\
             reference = { weights = [1.0], atoms = [[0.5]] }\n",
        )
        .unwrap();
        let reference = cfg.model.reference().unwrap();
        let domain = cfg.model.domain().unwrap();
        let nbhd = build_neighborhoods(&reference, &domain, 0, &NeighborhoodOptions::default()).unwrap();
        for (p, a, b) in [(0.3, 0.4, 0.7), (0.9, 0.26, 0.5), (0.5, 0.5, 0.74), (0.0, 0.6, 0.3)] {
            let f = Mixture::new(vec![p, 1.0 - p], vec![vec![a], vec![b]]).unwrap();
            let n = pseudo_n(&mixture_to_coeffs(&f, &reference, &nbhd, &domain), &nbhd);
            assert!((n - fig1_pseudo_n(p, a, b, 0.5)).abs() < 1e-15, "{p} {a} {b}");
        }
    }
}
