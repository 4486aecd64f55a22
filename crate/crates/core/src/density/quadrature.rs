//! Tensor-product quadrature grids over `ℝ^d`.

use std::hash::{Hash, Hasher};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QuadratureScheme {
    /// Composite trapezoid rule on a truncated box.
    #[default]
    Trapezoid,
    /// Gauss–Hermite rule with weights rescaled to Lebesgue measure.
    GaussHermite,
}

/// Nodes and Lebesgue weights. Node `k` occupies `nodes[k*d..(k+1)*d]`.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    axes: Vec<Vec<f64>>,
    fingerprint: u64,
}

impl QuadratureGrid {
    /// Composite trapezoid rule with `n[a]` equispaced nodes on `[lo[a], hi[a]]`.
    pub fn trapezoid(lo: &[f64], hi: &[f64], n: &[usize]) -> Result<Self> {
        if lo.len() != hi.len() || lo.len() != n.len() || lo.is_empty() {
            return Err(Error::Shape("quadrature box bounds differ in dimension".into()));
        }
        let mut axes = Vec::with_capacity(lo.len());
        for a in 0..lo.len() {
            if !(hi[a] > lo[a]) || !lo[a].is_finite() || !hi[a].is_finite() {
                return Err(Error::Config(format!("empty quadrature interval on axis {a}")));
            }
            if n[a] < 2 {
                return Err(Error::Config("trapezoid rule needs at least 2 nodes per axis".into()));
            }
            let h = (hi[a] - lo[a]) / (n[a] - 1) as f64;
            let mut pts = Vec::with_capacity(n[a]);
            let mut wts = Vec::with_capacity(n[a]);
            for i in 0..n[a] {
                pts.push(lo[a] + h * i as f64);
                wts.push(if i == 0 || i == n[a] - 1 { 0.5 * h } else { h });
            }
            axes.push((pts, wts));
        }
        Ok(Self::tensor(axes))
    }

    /// Trapezoid rule with node spacing at most `spacing`.
    pub fn trapezoid_spacing(lo: &[f64], hi: &[f64], spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) {
            return Err(Error::Config("grid spacing must be positive".into()));
        }
        let n: Vec<usize> = lo
            .iter()
            .zip(hi)
            .map(|(l, h)| ((h - l) / spacing).ceil().max(1.0) as usize + 1)
            .collect();
        Self::trapezoid(lo, hi, &n)
    }

    /// Gauss–Hermite rule with `n` nodes per axis for `x = center + scale·y`.
    pub fn gauss_hermite(n: usize, center: &[f64], scale: f64) -> Result<Self> {
        if n == 0 || n > 400 {
            return Err(Error::Config(format!("Gauss-Hermite order {n} out of range 1..=400")));
        }
        if !(scale > 0.0) {
            return Err(Error::Config("Gauss-Hermite scale must be positive".into()));
        }
        let (y, w) = hermite_rule(n);
        let axes = center
            .iter()
            .map(|c| {
                let pts = y.iter().map(|v| c + scale * v).collect();
                let wts = w.iter().map(|v| scale * v).collect();
                (pts, wts)
            })
            .collect();
        Ok(Self::tensor(axes))
    }

    fn tensor(axes: Vec<(Vec<f64>, Vec<f64>)>) -> Self {
        let dim = axes.len();
        let total: usize = axes.iter().map(|a| a.0.len()).product();
        let mut nodes = Vec::with_capacity(total * dim);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for _ in 0..total {
            let mut w = 1.0;
            for a in 0..dim {
                nodes.push(axes[a].0[idx[a]]);
                w *= axes[a].1[idx[a]];
            }
            weights.push(w);
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < axes[a].0.len() {
                    break;
                }
                idx[a] = 0;
            }
        }
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        dim.hash(&mut hasher);
        for v in nodes.iter().chain(&weights) {
            v.to_bits().hash(&mut hasher);
        }
        Self {
            dim,
            nodes,
            weights,
            axes: axes.into_iter().map(|a| a.0).collect(),
            fingerprint: hasher.finish(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Per-axis node coordinates.
    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    /// Identifies the node set; functions on different grids never mix.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        (0..self.len()).map(|k| self.weights[k] * f(self.node(k))).sum()
    }
}

/// Nodes and Lebesgue weights `w_i e^{y_i²}` of the physicists' Hermite rule.
///
/// Nodes come from the Golub–Welsch eigenproblem; weights are evaluated as
/// `1 / Σ_k ψ_k(y)²` with orthonormal Hermite functions so that outer nodes
/// keep full relative precision.
fn hermite_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jac[(k, k - 1)] = b;
        jac[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(jac);
    let mut y: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    y.sort_by(|a, b| a.partial_cmp(b).unwrap());
    // Symmetrize to remove eigen-solver noise.
    for i in 0..n / 2 {
        let m = 0.5 * (y[n - 1 - i] - y[i]);
        y[i] = -m;
        y[n - 1 - i] = m;
    }
    if n % 2 == 1 {
        y[n / 2] = 0.0;
    }
    let w = y
        .iter()
        .map(|&x| {
            let mut p_prev = 0.0;
            let mut p = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
            let mut s = p * p;
            for k in 0..n - 1 {
                let kf = k as f64;
                let next = (2.0 / (kf + 1.0)).sqrt() * x * p - (kf / (kf + 1.0)).sqrt() * p_prev;
                p_prev = p;
                p = next;
                s += p * p;
            }
            1.0 / s
        })
        .collect();
    (y, w)
}
