//! Finite-dimensional test classes for slicing: direction generators,
//! polynomial certificates, random instances and the Hilbert-cube example.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::lattice::{verify_bracket_cover, Bracket, BracketSet, CoverReport, LatticeNorm, LatticeVector};
use super::slicing::{slice_local_brackets, SlicedBrackets};
use crate::error::{Error, Result};
use crate::tol::BRACKET_CAP;

/// Lattice cubes meeting the unit sphere of `norm` in `ℝⁿ`, `n ≤ 3`.
///
/// Cubes have side `s` with `‖s·𝟙‖ = ε`, so each has size exactly `ε`.
#[derive(Clone, Debug)]
pub struct SphereCubes {
    pub dim: usize,
    pub norm: LatticeNorm,
}

impl SphereCubes {
    pub fn new(dim: usize, norm: LatticeNorm) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Capability(format!("sphere cubes need 1 ≤ n ≤ 3, got {dim}")));
        }
        if matches!(norm, LatticeNorm::WeightedL2(_)) {
            return Err(Error::Capability("sphere cubes use an unweighted norm".into()));
        }
        Ok(Self { dim, norm })
    }

    fn side(&self, eps: f64) -> f64 {
        eps / self.norm.norm(&vec![1.0; self.dim])
    }

    fn visit<F: FnMut(&[f64], &[f64])>(&self, eps: f64, mut f: F) -> Result<()> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Scale(format!("direction scale {eps} must be positive")));
        }
        let s = self.side(eps);
        let k = (1.0 / s).ceil() as i64;
        let cells = (2 * k) as f64;
        if cells.powi(self.dim as i32) > 64.0 * BRACKET_CAP as f64 {
            return Err(Error::CapExceeded(format!("sphere cubes at scale {eps}")));
        }
        let n = self.dim;
        let mut idx = vec![-k; n];
        let mut lo = vec![0.0; n];
        let mut hi = vec![0.0; n];
        let mut near = vec![0.0; n];
        let mut far = vec![0.0; n];
        loop {
            for a in 0..n {
                lo[a] = idx[a] as f64 * s;
                hi[a] = lo[a] + s;
                near[a] = if lo[a] <= 0.0 && hi[a] >= 0.0 { 0.0 } else { lo[a].abs().min(hi[a].abs()) };
                far[a] = lo[a].abs().max(hi[a].abs());
            }
            if self.norm.norm(&near) <= 1.0 && self.norm.norm(&far) >= 1.0 {
                f(&lo, &hi);
            }
            let mut a = 0;
            while a < n {
                idx[a] += 1;
                if idx[a] < k {
                    break;
                }
                idx[a] = -k;
                a += 1;
            }
            if a == n {
                return Ok(());
            }
        }
    }

    pub fn count(&self, eps: f64) -> Result<usize> {
        let mut c = 0;
        self.visit(eps, |_, _| c += 1)?;
        Ok(c)
    }

    pub fn brackets(&self, eps: f64) -> Result<BracketSet> {
        let mut out = Vec::new();
        let mut err = None;
        self.visit(eps, |lo, hi| {
            if err.is_none() && out.len() >= BRACKET_CAP {
                err = Some(Error::CapExceeded(format!("sphere cubes at scale {eps}")));
            }
            if err.is_none() {
                match Bracket::new(lo.to_vec(), hi.to_vec(), &self.norm) {
                    Ok(b) => out.push(b),
                    Err(e) => err = Some(e),
                }
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        BracketSet::new(out, eps, self.norm.clone(), format!("sphere-cubes(n={},{})", self.dim, self.norm))
    }

    /// Sphere dimension `n − 1`, floored at 1.
    pub fn exponent(&self) -> f64 {
        (self.dim.max(2) - 1) as f64
    }
}

/// `N(ε) ≤ (C0/ε)^q` for every `ε` the certificate was calibrated on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PolyCertificate {
    pub c0: f64,
    pub q: f64,
    pub eps0: f64,
}

impl PolyCertificate {
    /// `C0 = 1 ∨ max ε N(ε)^{1/q}` over `scales` and a dyadic ladder below
    /// their maximum.
    pub fn calibrate<F>(mut count: F, q: f64, scales: &[f64]) -> Result<Self>
    where
        F: FnMut(f64) -> Result<usize>,
    {
        let eps0 = scales.iter().copied().fold(0.0f64, f64::max);
        let eps_min = scales.iter().copied().fold(f64::INFINITY, f64::min);
        if !(eps0 > 0.0) {
            return Err(Error::Scale("certificate needs a positive scale".into()));
        }
        let mut all: Vec<f64> = scales.to_vec();
        let mut e = eps0;
        while e >= eps_min {
            all.push(e);
            e /= 2.0;
        }
        let mut c0 = 1.0f64;
        for eps in all {
            let n = count(eps)? as f64;
            c0 = c0.max(eps * n.powf(1.0 / q));
        }
        Ok(Self { c0, q, eps0 })
    }

    pub fn holds(&self, eps: f64, n: usize) -> bool {
        (n as f64) <= (self.c0 / eps).powf(self.q) * (1.0 + 1e-9)
    }
}

/// Slicing run against a sphere-cube generator with its count check.
#[derive(Clone, Debug)]
pub struct SliceCheck {
    pub sliced: SlicedBrackets,
    pub certificate: PolyCertificate,
    pub c: f64,
    pub count_bound: f64,
}

impl SliceCheck {
    pub fn count(&self) -> usize {
        self.sliced.set.len()
    }

    pub fn within_bound(&self) -> bool {
        (self.count() as f64) <= self.count_bound
    }
}

pub fn slice_with_sphere_cubes(
    cubes: &SphereCubes,
    d_env: &LatticeVector,
    t0: &LatticeVector,
    delta: f64,
    rho: f64,
) -> Result<SliceCheck> {
    let sliced = slice_local_brackets(|eps| cubes.brackets(eps), d_env, t0, delta, rho)?;
    let scales: Vec<f64> = (1..=sliced.schedule.shells).map(|n| sliced.schedule.shell_scale(n)).collect();
    let certificate = PolyCertificate::calibrate(|e| cubes.count(e), cubes.exponent(), &scales)?;
    let c = sliced.schedule.constant(certificate.c0, certificate.eps0);
    let count_bound = sliced.schedule.count_bound(c, certificate.q);
    Ok(SliceCheck {
        sliced,
        certificate,
        c,
        count_bound,
    })
}

/// `T = {t0 + A x : ‖x‖₂ ≤ R}` in `ℝⁿ` under a lattice norm.
#[derive(Clone, Debug, Serialize)]
pub struct EllipsoidClass {
    pub t0: Vec<f64>,
    /// `n × k`, row-major.
    pub a: Vec<f64>,
    pub k: usize,
    pub radius: f64,
    #[serde(skip)]
    pub norm: LatticeNorm,
}

impl EllipsoidClass {
    pub fn dim(&self) -> usize {
        self.t0.len()
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| self.t0[i] + (0..self.k).map(|j| self.a[i * self.k + j] * x[j]).sum::<f64>())
            .collect()
    }

    /// Random class: `n ∈ {2,3}`, rank `1..=n`, random norm.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let n = rng.random_range(2..=3);
        let k = rng.random_range(1..=n);
        let norm = match rng.random_range(0..3) {
            0 => LatticeNorm::L1,
            1 => LatticeNorm::L2,
            _ => LatticeNorm::Sup,
        };
        Self {
            t0: (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            a: (0..n * k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect(),
            k,
            radius: rng.random_range(0.5..1.5),
            norm,
        }
    }

    /// Euclidean unit ball in `ℝ³` centered at the origin.
    pub fn unit_ball(norm: LatticeNorm) -> Self {
        Self {
            t0: vec![0.0; 3],
            a: vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            k: 3,
            radius: 1.0,
            norm,
        }
    }

    /// Points of `T ∩ B(t0, δ)`: half uniform in `x`, half log-radial.
    pub fn sample_local<R: Rng + ?Sized>(&self, rng: &mut R, delta: f64, count: usize) -> Vec<Vec<f64>> {
        let mut out = vec![self.t0.clone()];
        let mut tries = 0usize;
        while out.len() < count && tries < 1000 * count.max(1) {
            tries += 1;
            let mut u: Vec<f64> = (0..self.k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let un = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if un == 0.0 {
                continue;
            }
            u.iter_mut().for_each(|v| *v /= un);
            let dir = self.apply(&u);
            let step: Vec<f64> = dir.iter().zip(&self.t0).map(|(a, b)| a - b).collect();
            let sn = self.norm.norm(&step);
            if sn == 0.0 {
                continue;
            }
            let rmax = self.radius.min(delta / sn);
            let r = if rng.random::<bool>() {
                rmax * rng.random::<f64>().powf(1.0 / self.k as f64)
            } else {
                rmax * 10f64.powf(-6.0 * rng.random::<f64>())
            };
            let x: Vec<f64> = u.iter().map(|v| v * r).collect();
            let t = self.apply(&x);
            let dist = self.norm.norm_diff(&t, &self.t0);
            if dist <= delta {
                out.push(t);
            }
        }
        out
    }
}

/// Slicing check for one ellipsoid class, with sampled coverage.
#[derive(Clone, Debug)]
pub struct InstanceReport {
    pub check: SliceCheck,
    pub cover: CoverReport,
    pub points: usize,
}

pub fn run_instance<R: Rng + ?Sized>(
    rng: &mut R,
    class: &EllipsoidClass,
    delta: f64,
    rho: f64,
    samples: usize,
) -> Result<InstanceReport> {
    let n = class.dim();
    let cubes = SphereCubes::new(n, class.norm.clone())?;
    let t0 = LatticeVector::new(class.t0.clone(), class.norm.clone())?;
    // Unit vectors of these norms have coordinates in [−1, 1].
    let d_env = LatticeVector::new(vec![1.0; n], class.norm.clone())?;
    let check = slice_with_sphere_cubes(&cubes, &d_env, &t0, delta, rho)?;
    let pts = class.sample_local(rng, delta, samples);
    let cover = verify_bracket_cover(&check.sliced.set, &pts, 1e-12)?;
    Ok(InstanceReport {
        check,
        cover,
        points: pts.len(),
    })
}

/// `ρ/δ` drawn inside the precondition for a class under `norm`.
pub fn random_ratio<R: Rng + ?Sized>(rng: &mut R, dim: usize, norm: &LatticeNorm) -> f64 {
    let d = norm.norm(&vec![1.0; dim]);
    let cap = 4f64.min(2.0 * d);
    rng.random_range(0.35 * cap..0.9 * cap)
}

/// `{2^{−j} e_j : 1 ≤ j ≤ K} ∪ {0}` inside the Euclidean ball of radius `2^{−r}`.
pub fn hilbert_points(k_max: usize, r: usize, open: bool) -> Vec<Vec<f64>> {
    let rad = 0.5f64.powi(r as i32);
    let mut out = vec![vec![0.0; k_max]];
    for j in 1..=k_max {
        let v = 0.5f64.powi(j as i32);
        if (open && v < rad) || (!open && v <= rad) {
            let mut p = vec![0.0; k_max];
            p[j - 1] = v;
            out.push(p);
        }
    }
    out
}

/// Direct brackets of size `≤ 2^{−k}`: a point bracket for each `j ≤ k` in
/// the ball and `[0, Σ_{j>k} 2^{−j}e_j]` for the origin and the rest.
pub fn hilbert_local_brackets(k_max: usize, r: usize, k: usize, open: bool) -> Result<BracketSet> {
    let norm = LatticeNorm::L2;
    let pts = hilbert_points(k_max, r, open);
    let zero = vec![0.0; k_max];
    let mut brackets = Vec::new();
    let mut tail = zero.clone();
    for p in pts.iter().skip(1) {
        let j = p.iter().position(|v| *v > 0.0).unwrap() + 1;
        if j <= k {
            brackets.push(Bracket::new(p.clone(), p.clone(), &norm)?);
        } else {
            tail[j - 1] = p[j - 1];
        }
    }
    brackets.push(Bracket::new(zero, tail, &norm)?);
    BracketSet::new(
        brackets,
        0.5f64.powi(k as i32),
        norm,
        format!("hilbert(K={k_max},r={r},k={k},open={open})"),
    )
}

/// Size of a greedy set of points no two of which fit in one bracket of
/// size `≤ ε`, scanned by decreasing norm; a lower bound for the
/// bracketing number of `points`.
pub fn incompatible_lower_bound(points: &[Vec<f64>], eps: f64, norm: &LatticeNorm) -> usize {
    let pair = |a: &[f64], b: &[f64]| {
        let hi: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.max(*y)).collect();
        let lo: Vec<f64> = a.iter().zip(b).map(|(x, y)| x.min(*y)).collect();
        norm.norm_diff(&hi, &lo)
    };
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| norm.norm(&points[b]).total_cmp(&norm.norm(&points[a])));
    let mut chosen: Vec<usize> = Vec::new();
    for i in order {
        if chosen.iter().all(|&c| pair(&points[c], &points[i]) > eps) {
            chosen.push(i);
        }
    }
    chosen.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sphere_cubes_cover_the_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for norm in [LatticeNorm::L1, LatticeNorm::L2, LatticeNorm::Sup] {
            let g = SphereCubes::new(3, norm.clone()).unwrap();
            let set = g.brackets(0.2).unwrap();
            assert_eq!(set.len(), g.count(0.2).unwrap());
            assert!(set.max_size() <= 0.2 * (1.0 + 1e-12));
            let pts: Vec<Vec<f64>> = (0..2000)
                .map(|_| {
                    let v: Vec<f64> = (0..3).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                    let n = norm.norm(&v);
                    v.into_iter().map(|x| x / n).collect()
                })
                .collect();
            assert!(verify_bracket_cover(&set, &pts, 1e-12).unwrap().all_covered());
        }
    }

    #[test]
    fn sphere_count_scales_like_its_dimension() {
        let g = SphereCubes::new(3, LatticeNorm::L2).unwrap();
        let a = g.count(0.1).unwrap() as f64;
        let b = g.count(0.05).unwrap() as f64;
        let slope = (b / a).log2();
        assert!((slope - 2.0).abs() < 0.3, "{slope}");
    }

    #[test]
    fn hilbert_counts_match_lower_bounds() {
        let k_max = 20;
        for r in 1..6 {
            for k in r..15 {
                for open in [false, true] {
                    let pts = hilbert_points(k_max, r, open);
                    let set = hilbert_local_brackets(k_max, r, k, open).unwrap();
                    assert!(verify_bracket_cover(&set, &pts, 0.0).unwrap().all_covered());
                    let lb = incompatible_lower_bound(&pts, set.scale(), &LatticeNorm::L2);
                    assert_eq!(set.len(), lb, "r={r} k={k} open={open}");
                    let expect = if open { k + 1 - r } else { k + 2 - r };
                    assert_eq!(set.len(), expect);
                }
            }
        }
    }
}
