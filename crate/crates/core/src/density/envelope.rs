//! Envelope functions `H_k(x) = sup_{θ∈Θ} max |D_k f_θ(x)| / f*(x)`.
//!
//! The supremum is approximated by a θ-grid search followed by coordinate
//! ascent from every grid local maximum. The result is a lower approximation
//! of the true supremum that dominates every probe actually evaluated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{GridFunction, Model};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvelopeOptions {
    /// θ-grid points per axis (inclusive endpoints).
    pub theta_grid: usize,
    /// Coordinate-ascent steps per start.
    pub refine_steps: usize,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        Self {
            theta_grid: 64,
            refine_steps: 20,
        }
    }
}

/// `H_0, …, H_3` on the model grid.
#[derive(Clone, Debug)]
pub struct Envelopes {
    h: Vec<GridFunction>,
}

impl Envelopes {
    /// Computes all four envelopes.
    pub fn compute(model: &Model, opts: &EnvelopeOptions) -> Result<Self> {
        let thetas = theta_grid(model, opts)?;
        let d = model.dim();
        let rows: Vec<[f64; 4]> = model
            .grid()
            .nodes()
            .par_chunks_exact(d)
            .zip(model.fstar().par_iter())
            .map(|(x, &fs)| node_envelopes(model, &thetas, x, fs, opts, [true; 4]))
            .collect();
        let h = (0..4)
            .map(|k| model.function(rows.iter().map(|r| r[k]).collect()))
            .collect::<Result<_>>()?;
        Ok(Self { h })
    }

    pub fn from_parts(h: Vec<GridFunction>) -> Result<Self> {
        if h.len() != 4 {
            return Err(Error::Shape("expected four envelopes".into()));
        }
        Ok(Self { h })
    }

    pub fn get(&self, k: usize) -> Result<&GridFunction> {
        self.h
            .get(k)
            .ok_or_else(|| Error::Dependency(format!("envelope H_{k} unavailable")))
    }
}

/// Single envelope `H_k`.
pub fn envelope_h(k: usize, model: &Model, opts: &EnvelopeOptions) -> Result<GridFunction> {
    if k > model.family().smoothness_order() {
        return Err(Error::Capability(format!("no derivatives of order {k}")));
    }
    let thetas = theta_grid(model, opts)?;
    let d = model.dim();
    let mut mask = [false; 4];
    mask[k] = true;
    let vals: Vec<f64> = model
        .grid()
        .nodes()
        .par_chunks_exact(d)
        .zip(model.fstar().par_iter())
        .map(|(x, &fs)| node_envelopes(model, &thetas, x, fs, opts, mask)[k])
        .collect();
    model.function(vals)
}

/// θ-grid over the domain ball: box lattice restricted to the ball.
struct ThetaGrid {
    n: usize,
    spacing: f64,
    // Lattice index → position among kept points.
    slot: Vec<Option<usize>>,
    points: Vec<Vec<f64>>,
    lattice: Vec<Vec<usize>>,
}

fn theta_grid(model: &Model, opts: &EnvelopeOptions) -> Result<ThetaGrid> {
    if opts.theta_grid == 0 {
        return Err(Error::Config("empty θ-grid".into()));
    }
    let dom = model.domain();
    let d = dom.dim();
    let radius = dom.radius();
    let n = if radius == 0.0 { 1 } else { opts.theta_grid.max(2) };
    let spacing = if n == 1 { 0.0 } else { 2.0 * radius / (n - 1) as f64 };
    let total = n.pow(d as u32);
    let mut slot = vec![None; total];
    let mut points = Vec::new();
    let mut lattice = Vec::new();
    for (li, s) in slot.iter_mut().enumerate() {
        let mut idx = vec![0; d];
        let mut r = li;
        for a in (0..d).rev() {
            idx[a] = r % n;
            r /= n;
        }
        let theta: Vec<f64> = (0..d)
            .map(|a| dom.center()[a] - radius + spacing * idx[a] as f64)
            .collect();
        if dom.contains(&theta) {
            *s = Some(points.len());
            points.push(theta);
            lattice.push(idx);
        }
    }
    Ok(ThetaGrid {
        n,
        spacing,
        slot,
        points,
        lattice,
    })
}

fn node_envelopes(
    model: &Model,
    grid: &ThetaGrid,
    x: &[f64],
    fstar: f64,
    opts: &EnvelopeOptions,
    mask: [bool; 4],
) -> [f64; 4] {
    let fam = model.family();
    let vals: Vec<[f64; 4]> = grid
        .points
        .iter()
        .map(|t| fam.max_abs_all_orders(x, t))
        .collect();
    let mut out = [0.0; 4];
    let d = model.dim();
    for k in 0..4 {
        if !mask[k] {
            continue;
        }
        let mut best = vals.iter().fold(0.0_f64, |m, v| m.max(v[k]));
        if grid.spacing > 0.0 && opts.refine_steps > 0 {
            for (p, idx) in grid.lattice.iter().enumerate() {
                if is_local_max(grid, &vals, p, idx, k, d) {
                    let v = ascend(model, x, &grid.points[p], vals[p][k], k, grid.spacing, opts.refine_steps);
                    best = best.max(v);
                }
            }
        }
        out[k] = best / fstar;
    }
    out
}

// Plateaus are broken toward the lowest lattice index.
fn is_local_max(grid: &ThetaGrid, vals: &[[f64; 4]], p: usize, idx: &[usize], k: usize, d: usize) -> bool {
    let v = vals[p][k];
    let n = grid.n as isize;
    let offsets = 3usize.pow(d as u32);
    for o in 0..offsets {
        let mut r = o;
        let mut li = 0isize;
        let mut centre = true;
        let mut ok = true;
        for a in 0..d {
            let step = (r % 3) as isize - 1;
            r /= 3;
            if step != 0 {
                centre = false;
            }
            let c = idx[a] as isize + step;
            if c < 0 || c >= n {
                ok = false;
                break;
            }
            li = li * n + c;
        }
        if centre || !ok {
            continue;
        }
        if let Some(q) = grid.slot[li as usize] {
            let w = vals[q][k];
            if w > v || (w == v && q < p) {
                return false;
            }
        }
    }
    true
}

fn ascend(model: &Model, x: &[f64], start: &[f64], v0: f64, k: usize, spacing: f64, steps: usize) -> f64 {
    let fam = model.family();
    let dom = model.domain();
    let d = start.len();
    let mut theta = start.to_vec();
    let mut v = v0;
    let mut h = spacing;
    let mut trial = theta.clone();
    for _ in 0..steps {
        let mut best: Option<(f64, Vec<f64>)> = None;
        for a in 0..d {
            for s in [-1.0, 1.0] {
                trial.copy_from_slice(&theta);
                trial[a] += s * h;
                dom.project(&mut trial);
                let w = fam.max_abs_all_orders(x, &trial)[k];
                if w > v && best.as_ref().is_none_or(|b| w > b.0) {
                    best = Some((w, trial.clone()));
                }
            }
        }
        match best {
            Some((w, t)) => {
                v = w;
                theta = t;
            }
            None => h *= 0.5,
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{default_box, LocationFamily, Mixture, ParameterDomain, QuadratureGrid};
    use std::sync::Arc;

    fn model(t: f64) -> Model {
        let fam = LocationFamily::gaussian(1).unwrap();
        let dom = ParameterDomain::new(vec![0.0], t).unwrap();
        let r = Mixture::point(&[0.0]);
        let (lo, hi) = default_box(&fam, &dom, &r);
        let g = QuadratureGrid::trapezoid_spacing(&lo, &hi, 0.1).unwrap();
        Model::new(fam, dom, r, Arc::new(g)).unwrap()
    }

    #[test]
    fn h0_is_one_at_zero_radius() {
        let m = model(0.0);
        let h0 = envelope_h(0, &m, &EnvelopeOptions::default()).unwrap();
        assert!(h0.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn h0_matches_closed_form() {
        // sup_{|θ|≤T} e^{θx − θ²/2} = e^{xT' − T'²/2}, T' = clamp(x, −T, T).
        let m = model(1.0);
        let h0 = envelope_h(0, &m, &EnvelopeOptions::default()).unwrap();
        for (k, x) in m.grid().nodes().iter().enumerate() {
            let t = x.clamp(-1.0, 1.0);
            let exact = (x * t - 0.5 * t * t).exp();
            assert!((h0.values()[k] - exact).abs() <= 1e-9 * exact, "x={x}");
        }
    }

    #[test]
    fn envelopes_grow_with_domain() {
        let opts = EnvelopeOptions::default();
        let small = Envelopes::compute(&model(0.5), &opts).unwrap();
        let big = Envelopes::compute(&model(0.5).with_domain(ParameterDomain::new(vec![0.0], 1.0).unwrap()).unwrap(), &opts).unwrap();
        for k in 0..4 {
            let a = small.get(k).unwrap().values();
            let b = big.get(k).unwrap().values();
            assert!(a.iter().zip(b).all(|(x, y)| *y >= x * (1.0 - 1e-9)));
        }
    }

    #[test]
    fn empty_theta_grid_rejected() {
        let opts = EnvelopeOptions {
            theta_grid: 0,
            refine_steps: 20,
        };
        assert!(matches!(envelope_h(0, &model(1.0), &opts), Err(Error::Config(_))));
    }
}
