//! Brackets for normalized mixture deviations `d_f` and local Hellinger balls.
//!
//! The covers are parameter lattices and never materialized: each exposes
//! its log-count and, for a given mixture, the witness bracket containing it.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use super::lattice::{Bracket, BracketSet, LatticeNorm};
use super::slicing::{map_shell_bracket, SliceSchedule};
use crate::density::{dist, Envelopes, GridFunction, Mixture, Model};
use crate::error::{Error, Result};
use crate::geometry::{LocalBasis, NeighborhoodSystem};
use crate::metrics::{deviation_values, envelope_s, hellinger_values, SEnvelope};

/// Largest mixture order accepted by the constructions.
pub const MAX_Q: usize = 4;
/// Largest parameter dimension accepted by the constructions.
pub const MAX_DIM: usize = 2;

/// Norms of the envelope functions entering the bracket widths.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BundleNorms {
    pub s1: f64,
    pub s4: f64,
    pub h3_2: f64,
    pub u2: f64,
    pub v2: f64,
    pub w2: f64,
    pub d2: f64,
    /// `‖H₀ + H₁√d‖₁`.
    pub h01_1: f64,
}

/// `S`, `U`, `V`, `W` and their norms for one model and `ĉ*`.
#[derive(Clone, Debug)]
pub struct MixtureEnvelopeBundle {
    pub s: SEnvelope,
    pub h: Vec<GridFunction>,
    pub u: GridFunction,
    pub v: GridFunction,
    pub w: GridFunction,
    pub norms: BundleNorms,
    pub cstar: f64,
    /// Radius of `Θ`.
    pub t: f64,
    pub dim: usize,
    pub qstar: usize,
}

impl MixtureEnvelopeBundle {
    pub fn new(model: &Model, env: &Envelopes, cstar: f64) -> Result<Self> {
        let s = envelope_s(model, env, cstar)?;
        let h: Vec<GridFunction> = (0..4).map(|k| env.get(k).cloned()).collect::<Result<_>>()?;
        let d = model.dim() as f64;
        let qstar = model.reference().len();
        let s4 = model.lp_norm(&s.s, 4.0)?;
        let h3_2 = model.lp_norm(&h[3], 2.0)?;
        let coef = (1.0 + h3_2) / cstar.powf(1.25) + 8.0 * s4 * s4 + 4.0;
        let u = s
            .s
            .zip_with(&h[3], |sv, h3| coef * d.powf(1.5) * (sv + sv * sv + h3))?;
        let v = h[0]
            .add(&h[1])?
            .add(&h[2])?
            .scale(d * (d * qstar as f64).sqrt());
        let h01 = h[0].zip_with(&h[1], |a, b| a + b * d.sqrt())?;
        let h01_1 = model.lp_norm(&h01, 1.0)?;
        let w = s
            .s
            .zip_with(&h01, |sv, g| h01_1.sqrt() * 2.0 * sv + g.sqrt())?;
        let norms = BundleNorms {
            s1: model.lp_norm(&s.s, 1.0)?,
            s4,
            h3_2,
            u2: model.lp_norm(&u, 2.0)?,
            v2: model.lp_norm(&v, 2.0)?,
            w2: model.lp_norm(&w, 2.0)?,
            d2: model.lp_norm(&s.d, 2.0)?,
            h01_1,
        };
        Ok(Self {
            s,
            h,
            u,
            v,
            w,
            norms,
            cstar,
            t: model.domain().radius(),
            dim: model.dim(),
            qstar,
        })
    }

    /// `1 ∧ 4ĉ^{1/4}`.
    pub fn delta_cap(&self) -> f64 {
        1f64.min(4.0 * self.cstar.powf(0.25))
    }

    /// `κ = 1/(√(cα) ∧ c)`.
    pub fn kappa(&self, alpha: f64) -> f64 {
        1.0 / (self.cstar * alpha).sqrt().min(self.cstar)
    }
}

/// Model, neighborhoods, reference basis and envelopes shared by the covers.
#[derive(Clone, Debug)]
pub struct MixtureContext {
    pub model: Model,
    pub nbhd: NeighborhoodSystem,
    pub basis: LocalBasis,
    pub bundle: MixtureEnvelopeBundle,
    pub norm: LatticeNorm,
}

impl MixtureContext {
    pub fn new(model: Model, nbhd: NeighborhoodSystem, env: &Envelopes, cstar: f64) -> Result<Self> {
        if model.dim() > MAX_DIM {
            return Err(Error::Precondition(format!(
                "bracket constructions support d ≤ {MAX_DIM}, got {}",
                model.dim()
            )));
        }
        let basis = LocalBasis::new(&model, &nbhd)?;
        let bundle = MixtureEnvelopeBundle::new(&model, env, cstar)?;
        let norm = LatticeNorm::WeightedL2(Arc::from(model.measure().to_vec()));
        Ok(Self {
            model,
            nbhd,
            basis,
            bundle,
            norm,
        })
    }
}

/// Coefficients `(η, β, ρ, γ, θ)` with `ρ_i` held as its factor vectors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreParams {
    pub eta: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    pub rho: Vec<Vec<Vec<f64>>>,
    pub gamma: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
}

impl ScoreParams {
    pub fn composition(&self) -> Vec<usize> {
        self.rho.iter().map(|v| v.len()).collect()
    }
}

/// `ℓ` at the nodes for the given coefficients.
pub fn ell_from_params(ctx: &MixtureContext, p: &ScoreParams) -> Vec<f64> {
    let model = &ctx.model;
    let b = &ctx.basis;
    let d = model.dim();
    let mut out = vec![0.0; model.len()];
    for i in 0..p.eta.len() {
        axpy(p.eta[i], &b.f[i], &mut out);
        for a in 0..d {
            axpy(p.beta[i][a], &b.d1[i][a], &mut out);
        }
        for v in &p.rho[i] {
            for a in 0..d {
                for c in 0..d {
                    axpy(v[a] * v[c], &b.d2[i][a * d + c], &mut out);
                }
            }
        }
    }
    for (g, th) in p.gamma.iter().zip(&p.theta) {
        if *g != 0.0 {
            axpy(*g, &model.atom_values(th), &mut out);
        }
    }
    out.iter_mut().zip(model.fstar()).for_each(|(o, s)| *o /= s);
    out
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    if a != 0.0 {
        y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
    }
}

/// Index `m ∈ 𝕄_q` with the coefficient budgets at level `α`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScoreFamilyIndex {
    pub m: Vec<usize>,
    pub alpha: f64,
    pub eta_radius: f64,
    pub beta_radius: f64,
    /// Bound on `(Σ‖ρ_ij‖²)^{1/2}`.
    pub rho_radius: f64,
    pub gamma_radius: f64,
    pub kappa: f64,
}

impl ScoreFamilyIndex {
    pub fn new(m: Vec<usize>, q: usize, alpha: f64, bundle: &MixtureEnvelopeBundle) -> Result<Self> {
        let total = q.min(bundle.dim * bundle.qstar);
        if m.len() != bundle.qstar || m.iter().sum::<usize>() != total {
            return Err(Error::Shape(format!("composition {m:?} does not sum to {total}")));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::Scale(format!("α = {alpha} must be positive")));
        }
        let c = bundle.cstar;
        let kappa = bundle.kappa(alpha);
        Ok(Self {
            m,
            alpha,
            eta_radius: 1.0 / c + 1.0 / (c * alpha).sqrt(),
            beta_radius: 1.0 / c + 2.0 * bundle.t / (c * alpha).sqrt(),
            rho_radius: 1.0 / c.sqrt(),
            gamma_radius: kappa,
            kappa,
        })
    }

    /// Every composition of `total` into `parts` nonnegative parts, lexicographic.
    pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
        if parts == 0 {
            return if total == 0 { vec![vec![]] } else { vec![] };
        }
        let mut out = Vec::new();
        for first in (0..=total).rev() {
            for mut rest in Self::compositions(total - first, parts - 1) {
                rest.insert(0, first);
                out.push(rest);
            }
        }
        out
    }

    /// Budgets of the index set, with relative slack `tol`.
    pub fn admits(&self, p: &ScoreParams, tol: f64) -> bool {
        let within = |v: f64, r: f64| v <= r * (1.0 + tol);
        let eta: f64 = p.eta.iter().map(|x| x.abs()).sum();
        let beta: f64 = p.beta.iter().map(|b| norm2(b)).sum();
        let rho: f64 = p.rho.iter().flatten().map(|v| norm2(v).powi(2)).sum::<f64>().sqrt();
        let gamma: f64 = p.gamma.iter().map(|x| x.abs()).sum();
        p.composition() == self.m
            && p.gamma.iter().all(|g| *g >= 0.0)
            && within(eta, self.eta_radius)
            && within(beta, self.beta_radius)
            && within(rho, self.rho_radius)
            && within(gamma, self.gamma_radius)
    }

    /// `⦀a − b⦀_{q,m,α}`.
    pub fn tnorm_diff(&self, a: &ScoreParams, b: &ScoreParams, cstar: f64) -> f64 {
        let eta: f64 = a.eta.iter().zip(&b.eta).map(|(x, y)| (x - y).abs()).sum();
        let beta: f64 = a.beta.iter().zip(&b.beta).map(|(x, y)| dist(x, y)).sum();
        let gamma: f64 = a.gamma.iter().zip(&b.gamma).map(|(x, y)| (x - y).abs()).sum();
        let theta = a.theta.iter().zip(&b.theta).map(|(x, y)| dist(x, y)).fold(0.0, f64::max);
        let rho: f64 = a
            .rho
            .iter()
            .flatten()
            .zip(b.rho.iter().flatten())
            .map(|(x, y)| dist(x, y).powi(2))
            .sum::<f64>()
            .sqrt();
        eta + beta + gamma + self.kappa * theta + 2.0 / cstar.sqrt() * rho
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `ℓ = L/‖L‖₂` approximating `(f/f* − 1)/√χ²` for `h(f, f*) ≤ α`.
#[derive(Clone, Debug)]
pub struct ScoreApproximation {
    /// Factor vectors: `rank ρ_i` per region, no padding.
    pub params: ScoreParams,
    /// `ρ_i` as flat `d×d` matrices.
    pub rho_matrices: Vec<Vec<f64>>,
    pub in_j: Vec<bool>,
    pub l_norm: f64,
    pub h: f64,
    pub ell: Vec<f64>,
    pub error_bound: Vec<f64>,
}

impl ScoreApproximation {
    pub fn ranks(&self) -> Vec<usize> {
        self.params.composition()
    }

    /// Pads the factor lists to a composition of `total`, extras on region 0.
    pub fn padded(&self, q: usize, total: usize, center: &[f64]) -> ScoreParams {
        let mut p = self.params.clone();
        let d = center.len();
        let have: usize = p.rho.iter().map(|v| v.len()).sum();
        for _ in have..total {
            p.rho[0].push(vec![0.0; d]);
        }
        while p.gamma.len() < q {
            p.gamma.push(0.0);
            p.theta.push(center.to_vec());
        }
        p
    }
}

fn check_q(q: usize, qstar: usize) -> Result<()> {
    if q > MAX_Q {
        return Err(Error::Precondition(format!("bracket constructions support q ≤ {MAX_Q}, got {q}")));
    }
    if q < qstar {
        return Err(Error::Precondition(format!("q = {q} below q* = {qstar}")));
    }
    Ok(())
}

/// Coefficients of the score approximation and its pointwise error bound.
pub fn score_approximation(ctx: &MixtureContext, f: &Mixture, alpha: f64) -> Result<ScoreApproximation> {
    let model = &ctx.model;
    let bundle = &ctx.bundle;
    let fv = model.mixture_values(f)?;
    let h = hellinger_values(model, &fv, model.fstar());
    if h > alpha {
        return Err(Error::Precondition(format!("h(f, f*) = {h} exceeds α = {alpha}")));
    }
    let d = model.dim();
    let qs = ctx.nbhd.len();
    let c = bundle.cstar;
    let thr = 2.0 * (alpha / c).sqrt();
    let reference = model.reference();
    let mut mass = vec![0.0; qs];
    let mut first = vec![vec![0.0; d]; qs];
    let mut second = vec![vec![0.0; d * d]; qs];
    let mut in_j = vec![false; f.len()];
    let mut members = vec![0usize; qs];
    for j in 0..f.len() {
        let th = f.atom(j);
        if let Some(i) = ctx.nbhd.region_of(th) {
            let v: Vec<f64> = th.iter().zip(ctx.nbhd.center(i)).map(|(a, b)| a - b).collect();
            if norm2(&v).powi(2) <= thr {
                in_j[j] = true;
                members[i] += 1;
                let p = f.weights()[j];
                mass[i] += p;
                for a in 0..d {
                    first[i][a] += p * v[a];
                    for b in 0..d {
                        second[i][a * d + b] += p * v[a] * v[b];
                    }
                }
            }
        }
    }
    let mut raw = ScoreParams {
        eta: (0..qs).map(|i| mass[i] - reference.weights()[i]).collect(),
        beta: first,
        rho: vec![Vec::new(); qs],
        gamma: (0..f.len()).map(|j| if in_j[j] { 0.0 } else { f.weights()[j] }).collect(),
        theta: (0..f.len()).map(|j| f.atom(j).to_vec()).collect(),
    };
    let half: Vec<Vec<f64>> = second.iter().map(|m| m.iter().map(|x| x / 2.0).collect()).collect();
    // L with ρ_i = ½Σπ v vᵀ entered through its factors.
    for i in 0..qs {
        raw.rho[i] = factor_psd(&half[i], d, members[i]);
    }
    let l = ell_from_params(ctx, &raw);
    let l_norm = model.lp_norm_values(&l, 2.0)?;
    if !(l_norm > 0.0) {
        return Err(Error::DegenerateInput("score approximation has zero norm".into()));
    }
    let scale = 1.0 / l_norm;
    let params = ScoreParams {
        eta: raw.eta.iter().map(|x| x * scale).collect(),
        beta: raw.beta.iter().map(|b| b.iter().map(|x| x * scale).collect()).collect(),
        rho: raw
            .rho
            .iter()
            .map(|vs| vs.iter().map(|v| v.iter().map(|x| x * scale.sqrt()).collect()).collect())
            .collect(),
        gamma: raw.gamma.iter().map(|x| x * scale).collect(),
        theta: raw.theta,
    };
    let rho_matrices = half.iter().map(|m| m.iter().map(|x| x * scale).collect()).collect();
    let ell = l.iter().map(|x| x * scale).collect();
    let k = (d as f64).powf(1.5) * 2f64.sqrt() / (3.0 * c.powf(1.25)) * alpha.powf(0.25);
    let error_bound = bundle
        .s
        .s
        .values()
        .iter()
        .zip(bundle.h[3].values())
        .map(|(s, h3)| k * (bundle.norms.h3_2 * s + h3))
        .collect();
    Ok(ScoreApproximation {
        params,
        rho_matrices,
        in_j,
        l_norm,
        h,
        ell,
        error_bound,
    })
}

/// Top `min(d, max_rank)` eigen-factors `√λ u` of a PSD matrix.
fn factor_psd(m: &[f64], d: usize, max_rank: usize) -> Vec<Vec<f64>> {
    let rank = max_rank.min(d);
    if rank == 0 {
        return Vec::new();
    }
    if d == 1 {
        return if m[0] > 0.0 { vec![vec![m[0].sqrt()]] } else { Vec::new() };
    }
    let eig = SymmetricEigen::new(DMatrix::from_row_slice(d, d, m));
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    order
        .into_iter()
        .take(rank)
        .filter(|&k| eig.eigenvalues[k] > 0.0)
        .map(|k| {
            let s = eig.eigenvalues[k].sqrt();
            eig.eigenvectors.column(k).iter().map(|x| x * s).collect()
        })
        .collect()
}

/// `ln(2⌈r/s⌉ + 1)`: points of `sℤ` nearest to some `x ∈ [−r, r]`.
pub fn ln_lattice(r: f64, s: f64) -> f64 {
    let x = r / s;
    if x < 1e15 {
        (2.0 * x.ceil() + 1.0).ln()
    } else {
        (2.0 * x).ln() + (1.0 / (2.0 * x)).ln_1p()
    }
}

/// `ln(⌊r/s⌋ + 1)`: points of `sℤ ∩ [0, r]`.
pub fn ln_floor_lattice(r: f64, s: f64) -> f64 {
    let x = r / s;
    if x < 1e15 {
        (x.floor() + 1.0).ln()
    } else {
        x.ln() + (1.0 / x).ln_1p()
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    (1..=k).map(|i| ((n - k + i) as f64 / i as f64).ln()).sum()
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn nearest(x: f64, s: f64) -> (i64, f64) {
    let k = (x / s).round();
    (k as i64, k * s)
}

fn floored(x: f64, s: f64) -> (i64, f64) {
    let k = (x / s).floor().max(0.0);
    (k as i64, k * s)
}

/// Level `α`, lattice resolutions and resulting bracket widths.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CoverScales {
    pub alpha: f64,
    /// `⦀·⦀` resolution of the near part.
    pub eps_prime: f64,
    /// `⦀·⦀_q` resolution of the far part.
    pub eps_far: f64,
    pub near_size: f64,
    pub far_size: f64,
}

impl CoverScales {
    /// `α = (δ/4‖U‖₂)⁴`, `ε′ = δ/4‖V‖₂`, `ε_far = α²δ²/4‖W‖₂²`.
    pub fn for_delta(delta: f64, bundle: &MixtureEnvelopeBundle) -> Result<Self> {
        if !(delta > 0.0) || delta > bundle.delta_cap() * (1.0 + 1e-12) {
            return Err(Error::Scale(format!(
                "δ = {delta} outside (0, {}] for the α schedule",
                bundle.delta_cap()
            )));
        }
        let n = &bundle.norms;
        let alpha = (delta / (4.0 * n.u2)).powi(4);
        let eps_prime = delta / (4.0 * n.v2);
        let eps_far = alpha * alpha * delta * delta / (4.0 * n.w2 * n.w2);
        Ok(Self::manual(alpha, eps_prime, eps_far, bundle))
    }

    /// Arbitrary resolutions; widths follow from the same bounds.
    pub fn manual(alpha: f64, eps_prime: f64, eps_far: f64, bundle: &MixtureEnvelopeBundle) -> Self {
        let n = &bundle.norms;
        Self {
            alpha,
            eps_prime,
            eps_far,
            near_size: 2.0 * eps_prime * n.v2 + 2.0 * alpha.powf(0.25) * n.u2,
            far_size: 2.0 * eps_far.sqrt() * n.w2 / alpha,
        }
    }

    pub fn scale(&self) -> f64 {
        self.near_size.max(self.far_size)
    }
}

/// Lattice spacings of the near part.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct NearSpacings {
    pub eta: f64,
    pub beta: f64,
    pub rho: f64,
    pub gamma: f64,
    pub theta: f64,
}

/// Which half of the cover produced a witness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CoverPart {
    Near,
    Far,
}

/// Bracket of the cover holding a given `d_f`.
#[derive(Clone, Debug)]
pub struct D0Witness {
    pub part: CoverPart,
    pub key: Vec<i64>,
    pub bracket: Bracket,
    pub target: Vec<f64>,
    pub h: f64,
}

impl D0Witness {
    pub fn contains(&self, tol: f64) -> bool {
        self.bracket.contains(&self.target, tol)
    }

    /// Largest violation `max(l − x, x − u, 0)` over the nodes.
    pub fn excess(&self) -> f64 {
        self.target
            .iter()
            .zip(self.bracket.lower())
            .zip(self.bracket.upper())
            .map(|((x, l), u)| (l - x).max(x - u).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Implicit bracket cover of `𝒟_q = {d_f : f ∈ ℳ_q, f ≠ f*}`.
#[derive(Clone, Debug)]
pub struct MixtureD0Cover<'a> {
    ctx: &'a MixtureContext,
    pub q: usize,
    pub scales: CoverScales,
    pub near: NearSpacings,
    pub far_pi: f64,
    pub far_theta: f64,
    pub ln_count_near: f64,
    pub ln_count_far: f64,
    total_rho: usize,
}

/// Cover of `𝒟_q` at size `δ` with the `α = (δ/4‖U‖₂)⁴` schedule.
pub fn build_d0_brackets_mixture(ctx: &MixtureContext, q: usize, delta: f64) -> Result<MixtureD0Cover<'_>> {
    let scales = CoverScales::for_delta(delta, &ctx.bundle)?;
    MixtureD0Cover::with_scales(ctx, q, scales)
}

impl<'a> MixtureD0Cover<'a> {
    pub fn with_scales(ctx: &'a MixtureContext, q: usize, scales: CoverScales) -> Result<Self> {
        let b = &ctx.bundle;
        check_q(q, b.qstar)?;
        if !(scales.alpha > 0.0 && scales.eps_prime > 0.0 && scales.eps_far > 0.0) {
            return Err(Error::Scale("cover resolutions must be positive".into()));
        }
        let d = b.dim as f64;
        let qs = b.qstar as f64;
        let qf = q as f64;
        let total_rho = q.min(b.dim * b.qstar);
        let mt = total_rho as f64;
        let e = scales.eps_prime;
        let kappa = b.kappa(scales.alpha);
        let near = NearSpacings {
            eta: 2.0 * e / (5.0 * qs),
            beta: 2.0 * e / (5.0 * qs * d.sqrt()),
            rho: e * b.cstar.sqrt() / (5.0 * (mt * d).sqrt().max(1.0)),
            gamma: e / (5.0 * qf),
            theta: 2.0 * e / (5.0 * kappa * d.sqrt()),
        };
        let idx = ScoreFamilyIndex::new(
            {
                let mut m = vec![0; b.qstar];
                m[0] = total_rho;
                m
            },
            q,
            scales.alpha,
            b,
        )?;
        let ln_m = ln_binomial(b.qstar + total_rho - 1, total_rho);
        let ln_count_near = ln_m
            + qs * ln_lattice(idx.eta_radius, near.eta)
            + qs * d * ln_lattice(idx.beta_radius, near.beta)
            + mt * d * ln_lattice(idx.rho_radius, near.rho)
            + qf * ln_floor_lattice(idx.gamma_radius, near.gamma)
            + qf * d * ln_lattice(b.t, near.theta);
        let far_pi = scales.eps_far / (2.0 * qf);
        let far_theta = scales.eps_far / d.sqrt();
        let ln_count_far = qf * ln_floor_lattice(1.0, far_pi) + qf * d * ln_lattice(b.t, far_theta);
        Ok(Self {
            ctx,
            q,
            scales,
            near,
            far_pi,
            far_theta,
            ln_count_near,
            ln_count_far,
            total_rho,
        })
    }

    pub fn ln_count(&self) -> f64 {
        log_sum_exp(&[self.ln_count_near, self.ln_count_far])
    }

    pub fn index(&self, m: Vec<usize>) -> Result<ScoreFamilyIndex> {
        ScoreFamilyIndex::new(m, self.q, self.scales.alpha, &self.ctx.bundle)
    }

    /// Lattice point of the near part nearest to `p`, with its key.
    pub fn round_near(&self, p: &ScoreParams) -> (ScoreParams, Vec<i64>) {
        let s = &self.near;
        let model = &self.ctx.model;
        let radius = 1.0 / self.ctx.bundle.cstar.sqrt();
        let mut key: Vec<i64> = p.composition().iter().map(|&m| m as i64).collect();
        let mut push = |(k, v): (i64, f64)| {
            key.push(k);
            v
        };
        let eta = p.eta.iter().map(|x| push(nearest(*x, s.eta))).collect();
        let beta = p
            .beta
            .iter()
            .map(|b| b.iter().map(|x| push(nearest(*x, s.beta))).collect())
            .collect();
        let rho = p
            .rho
            .iter()
            .map(|vs| {
                vs.iter()
                    .map(|v| {
                        let mut r: Vec<f64> = v.iter().map(|x| push(nearest(*x, s.rho))).collect();
                        let n = norm2(&r);
                        if n > radius {
                            r.iter_mut().for_each(|x| *x *= radius / n);
                        }
                        r
                    })
                    .collect()
            })
            .collect();
        let gamma = p.gamma.iter().map(|x| push(floored(*x, s.gamma))).collect();
        let center = model.domain().center();
        let theta = p
            .theta
            .iter()
            .map(|th| {
                let mut t: Vec<f64> = th
                    .iter()
                    .zip(center)
                    .map(|(x, c)| c + push(nearest(x - c, s.theta)))
                    .collect();
                model.domain().project(&mut t);
                t
            })
            .collect();
        (
            ScoreParams {
                eta,
                beta,
                rho,
                gamma,
                theta,
            },
            key,
        )
    }

    /// Witness bracket for `f`; near part when `h(f, f*) ≤ α`.
    pub fn locate(&self, f: &Mixture) -> Result<D0Witness> {
        if f.len() > self.q {
            return Err(Error::Precondition(format!("mixture of order {} in a q = {} cover", f.len(), self.q)));
        }
        let model = &self.ctx.model;
        let fv = model.mixture_values(f)?;
        let (target, h) = deviation_values(model, &fv)?;
        if h <= self.scales.alpha {
            self.locate_near(f, target, h)
        } else {
            self.locate_far(f, target, h)
        }
    }

    fn locate_near(&self, f: &Mixture, target: Vec<f64>, h: f64) -> Result<D0Witness> {
        let approx = score_approximation(self.ctx, f, self.scales.alpha)?;
        let p = approx.padded(self.q, self.total_rho, self.ctx.model.domain().center());
        let (center, key) = self.round_near(&p);
        let ell = ell_from_params(self.ctx, &center);
        let a4 = self.scales.alpha.powf(0.25);
        let e = self.scales.eps_prime;
        let b = &self.ctx.bundle;
        let width: Vec<f64> = b
            .v
            .values()
            .iter()
            .zip(b.u.values())
            .map(|(v, u)| e * v + a4 * u)
            .collect();
        let lower = ell.iter().zip(&width).map(|(l, w)| l - w).collect();
        let upper = ell.iter().zip(&width).map(|(l, w)| l + w).collect();
        Ok(D0Witness {
            part: CoverPart::Near,
            key,
            bracket: Bracket::new(lower, upper, &self.ctx.norm)?,
            target,
            h,
        })
    }

    /// Rounded far-part center `(π′, θ′)` and its key.
    pub fn round_far(&self, f: &Mixture) -> (Vec<f64>, Vec<Vec<f64>>, Vec<i64>) {
        let model = &self.ctx.model;
        let center = model.domain().center();
        let mut key = Vec::new();
        let mut pis = Vec::with_capacity(self.q);
        let mut thetas = Vec::with_capacity(self.q);
        for j in 0..self.q {
            let (pi, th) = if j < f.len() {
                (f.weights()[j], f.atom(j).to_vec())
            } else {
                (0.0, center.to_vec())
            };
            let (k, p) = floored(pi, self.far_pi);
            key.push(k);
            pis.push(p);
            let mut t: Vec<f64> = th
                .iter()
                .zip(center)
                .map(|(x, c)| {
                    let (k, v) = nearest(x - c, self.far_theta);
                    key.push(k);
                    c + v
                })
                .collect();
            model.domain().project(&mut t);
            thetas.push(t);
        }
        (pis, thetas, key)
    }

    fn locate_far(&self, f: &Mixture, target: Vec<f64>, h: f64) -> Result<D0Witness> {
        let model = &self.ctx.model;
        let (pis, thetas, key) = self.round_far(f);
        let mut fp = vec![0.0; model.len()];
        for (p, th) in pis.iter().zip(&thetas) {
            axpy(*p, &model.atom_values(th), &mut fp);
        }
        let (dc, _) = deviation_values(model, &fp)?;
        let k = self.scales.eps_far.sqrt() / self.scales.alpha;
        let w = self.ctx.bundle.w.values();
        let lower = dc.iter().zip(w).map(|(x, w)| x - k * w).collect();
        let upper = dc.iter().zip(w).map(|(x, w)| x + k * w).collect();
        Ok(D0Witness {
            part: CoverPart::Far,
            key,
            bracket: Bracket::new(lower, upper, &self.ctx.norm)?,
            target,
            h,
        })
    }
}

/// Witnesses for a sample, deduplicated by lattice key, as a certified set.
pub fn witness_set(witnesses: &[D0Witness], scale: f64, norm: &LatticeNorm, provenance: &str) -> Result<BracketSet> {
    let mut seen: BTreeMap<(CoverPart, Vec<i64>), Bracket> = BTreeMap::new();
    for w in witnesses {
        seen.entry((w.part, w.key.clone())).or_insert_with(|| w.bracket.clone());
    }
    BracketSet::new(seen.into_values().collect(), scale, norm.clone(), provenance)
}

/// Direction cover used on one shell of the local construction.
#[derive(Clone, Debug)]
pub enum ShellCover<'a> {
    /// `[−D, D]`, valid once the shell scale reaches `2‖D‖₂`.
    Envelope,
    Mixture(MixtureD0Cover<'a>),
}

impl ShellCover<'_> {
    pub fn ln_count(&self) -> f64 {
        match self {
            ShellCover::Envelope => 0.0,
            ShellCover::Mixture(c) => c.ln_count(),
        }
    }
}

/// Bracket of the local cover holding `√(f/f*)`.
#[derive(Clone, Debug)]
pub struct HqWitness {
    pub shell: usize,
    pub bracket: Bracket,
    pub target: Vec<f64>,
    pub h: f64,
    pub direction: Option<D0Witness>,
}

impl HqWitness {
    pub fn contains(&self, tol: f64) -> bool {
        self.bracket.contains(&self.target, tol)
    }
}

/// Implicit bracket cover of `ℋ_q(ε) = {√(f/f*) : h(f, f*) ≤ ε}` at size `δ`.
#[derive(Clone, Debug)]
pub struct HqLocalCover<'a> {
    ctx: &'a MixtureContext,
    pub q: usize,
    pub eps: f64,
    pub delta: f64,
    pub schedule: SliceSchedule,
    pub shells: Vec<ShellCover<'a>>,
}

/// Slicing of the `𝒟_q` cover with `T = {√(f/f*)}`, `t0 = 1`, envelope `D = 2S`.
pub fn bracket_hq_local(ctx: &MixtureContext, q: usize, eps: f64, delta: f64) -> Result<HqLocalCover<'_>> {
    check_q(q, ctx.bundle.qstar)?;
    if !(delta > 0.0 && eps > 0.0) || delta > eps {
        return Err(Error::Scale(format!("local cover needs 0 < δ ≤ ε (got δ = {delta}, ε = {eps})")));
    }
    let dn = ctx.bundle.norms.d2;
    let schedule = SliceSchedule::new(dn, eps, delta)?;
    let cap = ctx.bundle.delta_cap();
    let mut shells = Vec::with_capacity(schedule.shells);
    for n in 1..=schedule.shells {
        let e = schedule.shell_scale(n);
        if e >= 2.0 * dn {
            shells.push(ShellCover::Envelope);
        } else {
            shells.push(ShellCover::Mixture(build_d0_brackets_mixture(ctx, q, e.min(cap))?));
        }
    }
    Ok(HqLocalCover {
        ctx,
        q,
        eps,
        delta,
        schedule,
        shells,
    })
}

impl HqLocalCover<'_> {
    /// `ln(1 + Σ_n N_n)`.
    pub fn ln_count(&self) -> f64 {
        let mut xs: Vec<f64> = self.shells.iter().map(|s| s.ln_count()).collect();
        xs.push(0.0);
        log_sum_exp(&xs)
    }

    pub fn locate(&self, f: &Mixture) -> Result<HqWitness> {
        let model = &self.ctx.model;
        let fv = model.mixture_values(f)?;
        let target: Vec<f64> = fv.iter().zip(model.fstar()).map(|(a, s)| (a / s).sqrt()).collect();
        let h = hellinger_values(model, &fv, model.fstar());
        let shell = self.schedule.shell_of(h).ok_or_else(|| {
            Error::DomainViolation(format!("h(f, f*) = {h} outside the ball of radius {}", self.eps))
        })?;
        let ones = vec![1.0; model.len()];
        let dv = self.ctx.bundle.s.d.values();
        let (lower, upper, direction) = if shell == 0 {
            let (l, u) = super::slicing::inner_bracket(&self.schedule, dv, &ones);
            (l, u, None)
        } else {
            match &self.shells[shell - 1] {
                ShellCover::Envelope => {
                    let l: Vec<f64> = dv.iter().map(|x| -x).collect();
                    let (lo, hi) = map_shell_bracket(&self.schedule, shell, &l, dv, &ones);
                    (lo, hi, None)
                }
                ShellCover::Mixture(c) => {
                    let w = c.locate(f)?;
                    let (lo, hi) = map_shell_bracket(&self.schedule, shell, w.bracket.lower(), w.bracket.upper(), &ones);
                    (lo, hi, Some(w))
                }
            }
        };
        Ok(HqWitness {
            shell,
            bracket: Bracket::new(lower, upper, &self.ctx.norm)?,
            target,
            h,
            direction,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{EnvelopeOptions, LocationFamily, ParameterDomain, QuadratureGrid};
    use crate::geometry::{build_neighborhoods, NeighborhoodOptions};
    use crate::sampling::sample_local_mixture_at;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx() -> MixtureContext {
        let fam = LocationFamily::fig1(1).unwrap();
        let dom = ParameterDomain::new(vec![0.5], 0.5).unwrap();
        let r = Mixture::point(&[0.5]);
        let g = QuadratureGrid::trapezoid_spacing(&[-3.0], &[4.0], 0.05).unwrap();
        let model = Model::new(fam, dom.clone(), r.clone(), Arc::new(g)).unwrap();
        let nbhd = build_neighborhoods(&r, &dom, 0, &NeighborhoodOptions::default()).unwrap();
        let env = Envelopes::compute(
            &model,
            &EnvelopeOptions {
                theta_grid: 32,
                refine_steps: 10,
            },
        )
        .unwrap();
        MixtureContext::new(model, nbhd, &env, 0.0589).unwrap()
    }

    #[test]
    fn compositions_are_complete() {
        let c = ScoreFamilyIndex::compositions(3, 2);
        assert_eq!(c, vec![vec![3, 0], vec![2, 1], vec![1, 2], vec![0, 3]]);
        assert_eq!(ScoreFamilyIndex::compositions(2, 3).len(), 6);
        assert!((ln_binomial(4, 2) - 6f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn lattice_counts_are_robust() {
        assert!((ln_lattice(1.0, 0.5) - 5f64.ln()).abs() < 1e-12);
        assert!((ln_floor_lattice(1.0, 0.3) - 4f64.ln()).abs() < 1e-12);
        assert!((ln_lattice(1e10, 1e-10) - (2e20f64).ln()).abs() < 1e-9);
    }

    #[test]
    fn delta_above_cap_is_a_scale_error() {
        let c = ctx();
        assert!(matches!(build_d0_brackets_mixture(&c, 2, 2.0), Err(Error::Scale(_))));
        assert!(matches!(build_d0_brackets_mixture(&c, 9, 0.1), Err(Error::Precondition(_))));
    }

    #[test]
    fn production_sizes_equal_delta() {
        let c = ctx();
        let cover = build_d0_brackets_mixture(&c, 2, 0.2).unwrap();
        assert!((cover.scales.near_size - 0.2).abs() < 1e-12);
        assert!((cover.scales.far_size - 0.2).abs() < 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = sample_local_mixture_at(&mut rng, c.model.reference(), c.model.domain(), 1, 0.3).unwrap();
        let w = cover.locate(&f).unwrap();
        assert_eq!(w.part, CoverPart::Far);
        assert!(w.contains(1e-12));
        assert!(w.bracket.size() <= 0.2 * (1.0 + 1e-9));
    }

    #[test]
    fn single_nearby_atom_has_rank_one() {
        let c = ctx();
        let f = Mixture::point(&[0.5 + 1e-3]);
        let a = score_approximation(&c, &f, 0.05).unwrap();
        assert!(a.params.gamma.iter().all(|g| *g == 0.0));
        assert_eq!(a.ranks(), vec![1]);
        assert!((c.model.lp_norm_values(&a.ell, 2.0).unwrap() - 1.0).abs() < 1e-12);
        let far = Mixture::point(&[0.9]);
        assert!(matches!(score_approximation(&c, &far, 1e-4), Err(Error::Precondition(_))));
    }

    #[test]
    fn rounding_stays_within_resolution() {
        let c = ctx();
        let scales = CoverScales::manual(0.05, 0.01, 1e-4, &c.bundle);
        let cover = MixtureD0Cover::with_scales(&c, 2, scales).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..30 {
            let f = sample_local_mixture_at(&mut rng, c.model.reference(), c.model.domain(), 1, 0.02).unwrap();
            let Ok(a) = score_approximation(&c, &f, 0.05) else { continue };
            let p = a.padded(2, 1, c.model.domain().center());
            let idx = cover.index(p.composition()).unwrap();
            assert!(idx.admits(&p, 1e-9));
            let (r, _) = cover.round_near(&p);
            assert!(idx.tnorm_diff(&p, &r, c.bundle.cstar) <= 0.01 * (1.0 + 1e-9));
        }
    }
}
