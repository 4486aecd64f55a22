//! Local brackets from global brackets of the normalized directions.
//!
//! Points `t` with `r^{−n}δ < ‖t − t0‖ ≤ r^{−n+1}δ` are written as
//! `t0 + sδ·d_t` with `d_t` of unit norm; a bracket `[l, u]` of `d_t` at scale
//! `ε_n` is stretched over `s ∈ [r^{−n}, r^{−n+1}]`.

use serde::Serialize;

use super::lattice::{Bracket, BracketSet, LatticeNorm, LatticeVector, SIZE_SLACK};
use crate::error::{Error, Result};
use crate::tol::BRACKET_CAP;

/// Shell geometry for one `(‖d‖, δ, ρ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SliceSchedule {
    pub r: f64,
    pub h: f64,
    pub shells: usize,
    pub d_norm: f64,
    pub delta: f64,
    pub rho: f64,
}

impl SliceSchedule {
    pub fn new(d_norm: f64, delta: f64, rho: f64) -> Result<Self> {
        if !(delta > 0.0 && rho > 0.0 && d_norm > 0.0) || !(delta.is_finite() && rho.is_finite() && d_norm.is_finite()) {
            return Err(Error::Scale(format!(
                "slicing needs positive finite δ, ρ, ‖d‖ (got {delta}, {rho}, {d_norm})"
            )));
        }
        let ratio = rho / delta;
        if !(ratio < 4.0f64.min(2.0 * d_norm)) {
            return Err(Error::Scale(format!(
                "ρ/δ = {ratio} must be below 4 ∧ 2‖d‖ = {}",
                4.0f64.min(2.0 * d_norm)
            )));
        }
        let r = 4.0 / (4.0 - ratio);
        let h = (2.0 * d_norm * delta / rho).ln() / r.ln();
        let shells = h.ceil() as usize;
        Ok(Self {
            r,
            h,
            shells,
            d_norm,
            delta,
            rho,
        })
    }

    /// Global bracket scale for shell `n ≥ 1`.
    pub fn shell_scale(&self, n: usize) -> f64 {
        self.r.powf(n as f64 - self.h - 1.0) * self.d_norm / 4.0
    }

    /// Radius of the inner ball covered by a single bracket.
    pub fn inner_radius(&self) -> f64 {
        self.r.powi(-(self.shells as i32)) * self.delta
    }

    /// `0` for the inner ball, `n` for shell `n`, `None` beyond `δ`.
    pub fn shell_of(&self, dist: f64) -> Option<usize> {
        if dist <= self.inner_radius() {
            return Some(0);
        }
        if dist > self.delta * (1.0 + 1e-12) {
            return None;
        }
        let n = ((self.delta / dist).ln() / self.r.ln()).floor() as usize + 1;
        Some(n.clamp(1, self.shells))
    }

    /// `C = C0 (1 ∨ ‖d‖/4ε0)`.
    pub fn constant(&self, c0: f64, eps0: f64) -> f64 {
        c0 * 1f64.max(self.d_norm / (4.0 * eps0))
    }

    /// `(8Cδ/ρ)^{q+1}`.
    pub fn count_bound(&self, c: f64, q: f64) -> f64 {
        (8.0 * c * self.delta / self.rho).powf(q + 1.0)
    }

    pub fn ln_count_bound(&self, c: f64, q: f64) -> f64 {
        (q + 1.0) * (8.0 * c * self.delta / self.rho).ln()
    }
}

/// Image of a direction bracket `[l, u]` in shell `n`.
pub fn map_shell_bracket(sched: &SliceSchedule, n: usize, l: &[f64], u: &[f64], t0: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let a = sched.r.powi(-(n as i32));
    let b = a * sched.r;
    let lo = l
        .iter()
        .zip(t0)
        .map(|(l, t)| (a * l).min(b * l) * sched.delta + t)
        .collect();
    let hi = u
        .iter()
        .zip(t0)
        .map(|(u, t)| (a * u).max(b * u) * sched.delta + t)
        .collect();
    (lo, hi)
}

/// Inner bracket `t0 ± r^{−⌈H⌉}δ·d`.
pub fn inner_bracket(sched: &SliceSchedule, d_env: &[f64], t0: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let s = sched.inner_radius();
    (
        t0.iter().zip(d_env).map(|(t, d)| t - s * d).collect(),
        t0.iter().zip(d_env).map(|(t, d)| t + s * d).collect(),
    )
}

#[derive(Clone, Debug)]
pub struct SlicedBrackets {
    pub set: BracketSet,
    pub schedule: SliceSchedule,
    /// Global bracket count per shell, index `n − 1`.
    pub shell_counts: Vec<usize>,
    /// Largest shell scale requested from the generator.
    pub eps0: f64,
}

/// Brackets for `T ∩ B(t0, δ)` at size `ρ` from a generator of global
/// direction brackets.
///
/// `global_gen(ε)` must return brackets of size `≤ ε` covering the unit
/// directions `d_t`; `d_env` must dominate `|d_t|`.
pub fn slice_local_brackets<G>(
    mut global_gen: G,
    d_env: &LatticeVector,
    t0: &LatticeVector,
    delta: f64,
    rho: f64,
) -> Result<SlicedBrackets>
where
    G: FnMut(f64) -> Result<BracketSet>,
{
    if d_env.dim() != t0.dim() {
        return Err(Error::Shape("envelope and center differ in dimension".into()));
    }
    if d_env.coords().iter().any(|d| *d < 0.0) {
        return Err(Error::DomainViolation("direction envelope must be nonnegative".into()));
    }
    let norm: LatticeNorm = t0.norm_kind().clone();
    let sched = SliceSchedule::new(d_env.norm(), delta, rho)?;
    let (lo, hi) = inner_bracket(&sched, d_env.coords(), t0.coords());
    let mut brackets = vec![check_size(Bracket::new(lo, hi, &norm)?, rho, "inner")?];
    let mut shell_counts = Vec::with_capacity(sched.shells);
    let mut eps0 = 0.0f64;
    for n in 1..=sched.shells {
        let eps = sched.shell_scale(n);
        eps0 = eps0.max(eps);
        let global = global_gen(eps)?;
        if global.max_size() > eps * (1.0 + SIZE_SLACK) {
            return Err(Error::Certificate(format!(
                "direction bracket of size {} exceeds shell scale {eps}",
                global.max_size()
            )));
        }
        if brackets.len() + global.len() > BRACKET_CAP {
            return Err(Error::CapExceeded(format!(
                "slicing would exceed {BRACKET_CAP} brackets at shell {n}"
            )));
        }
        shell_counts.push(global.len());
        for g in global.brackets() {
            if g.dim() != t0.dim() {
                return Err(Error::Shape("direction bracket dimension differs from center".into()));
            }
            let (lo, hi) = map_shell_bracket(&sched, n, g.lower(), g.upper(), t0.coords());
            brackets.push(check_size(Bracket::new(lo, hi, &norm)?, rho, "shell")?);
        }
    }
    let provenance = format!(
        "slice(delta={delta},rho={rho},r={},H={},shells={},eps0={eps0})",
        sched.r, sched.h, sched.shells
    );
    Ok(SlicedBrackets {
        set: BracketSet::new(brackets, rho, norm, provenance)?,
        schedule: sched,
        shell_counts,
        eps0,
    })
}

fn check_size(b: Bracket, rho: f64, what: &str) -> Result<Bracket> {
    if b.size() > rho * (1.0 + 1e-9) {
        return Err(Error::Certificate(format!(
            "{what} bracket of size {} exceeds ρ = {rho}; direction brackets must meet the unit sphere",
            b.size()
        )));
    }
    Ok(b)
}
