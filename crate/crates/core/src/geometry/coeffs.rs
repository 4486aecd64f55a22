//! The deviation class `𝔇`, its functional `ℓ` and the pseudodistance `N`.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::density::{dist, sample_ball, GridFunction, Mixture, Model, ParameterDomain};
use crate::error::{Error, Result};
use crate::geometry::NeighborhoodSystem;
use crate::tol::{ATOL_SIMPLEX, PSD_TOL};
use nalgebra::{DMatrix, SymmetricEigen};

/// Finitely supported probability measure on `ℝ^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub weights: Vec<f64>,
    pub atoms: Vec<Vec<f64>>,
}

impl DiscreteMeasure {
    pub fn point(theta: &[f64]) -> Self {
        Self {
            weights: vec![1.0],
            atoms: vec![theta.to_vec()],
        }
    }

    /// `∫ θ ν(dθ) − c` and `∫ ‖θ − c‖² ν(dθ)`.
    pub fn moments_about(&self, c: &[f64]) -> (Vec<f64>, f64) {
        let mut m1 = vec![0.0; c.len()];
        let mut m2 = 0.0;
        for (w, a) in self.weights.iter().zip(&self.atoms) {
            for (k, (x, y)) in a.iter().zip(c).enumerate() {
                m1[k] += w * (x - y);
            }
            let r = dist(a, c);
            m2 += w * r * r;
        }
        (m1, m2)
    }
}

/// `(η, β, ρ, τ, ν)`; index 0 of `tau`/`nu` is the outer region `A₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationCoefficients {
    pub eta: Vec<f64>,
    pub beta: Vec<Vec<f64>>,
    /// Row-major `d×d` symmetric matrices.
    pub rho: Vec<Vec<f64>>,
    pub tau: Vec<f64>,
    pub nu: Vec<DiscreteMeasure>,
}

impl DeviationCoefficients {
    /// All-zero coefficients with point masses at default locations.
    pub fn zero(nbhd: &NeighborhoodSystem, domain: &ParameterDomain) -> Self {
        let q = nbhd.len();
        let d = nbhd.dim();
        let mut nu = vec![DiscreteMeasure::point(&nbhd.outside_point(domain))];
        nu.extend((0..q).map(|i| DiscreteMeasure::point(nbhd.center(i))));
        Self {
            eta: vec![0.0; q],
            beta: vec![vec![0.0; d]; q],
            rho: vec![vec![0.0; d * d]; q],
            tau: vec![0.0; q + 1],
            nu,
        }
    }

    /// Shapes, PSD, nonnegativity and support constraints.
    pub fn validate(&self, nbhd: &NeighborhoodSystem) -> Result<()> {
        let q = nbhd.len();
        let d = nbhd.dim();
        if self.eta.len() != q
            || self.beta.len() != q
            || self.rho.len() != q
            || self.tau.len() != q + 1
            || self.nu.len() != q + 1
        {
            return Err(Error::Shape("coefficient blocks do not match q*".into()));
        }
        if self.beta.iter().any(|b| b.len() != d) || self.rho.iter().any(|r| r.len() != d * d) {
            return Err(Error::Shape("coefficient blocks do not match d".into()));
        }
        let all = self
            .eta
            .iter()
            .chain(self.beta.iter().flatten())
            .chain(self.rho.iter().flatten())
            .chain(&self.tau);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite coefficient".into()));
        }
        for r in &self.rho {
            check_psd(r, d)?;
        }
        if self.tau.iter().any(|t| *t < 0.0) {
            return Err(Error::DomainViolation("negative τ".into()));
        }
        for (i, nu) in self.nu.iter().enumerate() {
            if nu.weights.is_empty() || nu.weights.len() != nu.atoms.len() {
                return Err(Error::Shape(format!("ν_{i} has mismatched weights and atoms")));
            }
            if nu.weights.iter().any(|w| *w < 0.0)
                || (nu.weights.iter().sum::<f64>() - 1.0).abs() > ATOL_SIMPLEX * 100.0
            {
                return Err(Error::DomainViolation(format!("ν_{i} is not a probability vector")));
            }
            for a in &nu.atoms {
                if a.len() != d {
                    return Err(Error::Shape(format!("ν_{i} atom has wrong dimension")));
                }
                let region = nbhd.region_of(a).map(|r| r + 1).unwrap_or(0);
                if region != i {
                    return Err(Error::DomainViolation(format!(
                        "atom {a:?} of ν_{i} lies in region {region}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Multiplies `(η, β, ρ, τ)` by `s`; `ν` is unchanged.
    pub fn scaled(&self, s: f64) -> Self {
        let mut c = self.clone();
        c.eta.iter_mut().for_each(|v| *v *= s);
        c.beta.iter_mut().flatten().for_each(|v| *v *= s);
        c.rho.iter_mut().flatten().for_each(|v| *v *= s);
        c.tau.iter_mut().for_each(|v| *v *= s);
        c
    }
}

pub(crate) fn check_psd(r: &[f64], d: usize) -> Result<()> {
    for a in 0..d {
        for b in 0..a {
            if (r[a * d + b] - r[b * d + a]).abs() > PSD_TOL {
                return Err(Error::DomainViolation("ρ is not symmetric".into()));
            }
        }
    }
    let m = DMatrix::from_row_slice(d, d, r);
    let e = SymmetricEigen::new(m);
    if e.eigenvalues.iter().any(|v| *v < -PSD_TOL) {
        return Err(Error::DomainViolation("ρ is not positive semidefinite".into()));
    }
    Ok(())
}

/// `N(η, β, ρ, τ, ν)`.
pub fn pseudo_n(c: &DeviationCoefficients, nbhd: &NeighborhoodSystem) -> f64 {
    let d = nbhd.dim();
    let mut n = c.tau[0];
    for i in 0..nbhd.len() {
        let tau = c.tau[i + 1];
        let (m1, m2) = c.nu[i + 1].moments_about(nbhd.center(i));
        n += (c.eta[i] + tau).abs();
        n += c.beta[i]
            .iter()
            .zip(&m1)
            .map(|(b, m)| (b + tau * m).powi(2))
            .sum::<f64>()
            .sqrt();
        n += (0..d).map(|a| c.rho[i][a * d + a]).sum::<f64>();
        n += 0.5 * tau * m2;
    }
    n
}

/// Reference-atom basis functions `f_{θ_i*}`, `D₁f_{θ_i*}`, `D₂f_{θ_i*}` on the grid.
#[derive(Clone, Debug)]
pub struct LocalBasis {
    pub(crate) f: Vec<Vec<f64>>,
    pub(crate) d1: Vec<Vec<Vec<f64>>>,
    pub(crate) d2: Vec<Vec<Vec<f64>>>,
}

impl LocalBasis {
    pub fn new(model: &Model, nbhd: &NeighborhoodSystem) -> Result<Self> {
        if model.family().smoothness_order() < 2 {
            return Err(Error::Capability("ℓ needs two derivatives".into()));
        }
        let d = model.dim();
        let n = model.len();
        let q = nbhd.len();
        let mut f = vec![vec![0.0; n]; q];
        let mut d1 = vec![vec![vec![0.0; n]; d]; q];
        let mut d2 = vec![vec![vec![0.0; n]; d * d]; q];
        let mut b1 = vec![0.0; d];
        let mut b2 = vec![0.0; d * d];
        for i in 0..q {
            let c = nbhd.center(i);
            for (k, x) in model.grid().nodes().chunks_exact(d).enumerate() {
                f[i][k] = model.family().eval(x, c);
                model.family().theta_derivative(x, c, 1, &mut b1)?;
                model.family().theta_derivative(x, c, 2, &mut b2)?;
                for a in 0..d {
                    d1[i][a][k] = b1[a];
                }
                for a in 0..d * d {
                    d2[i][a][k] = b2[a];
                }
            }
        }
        Ok(Self { f, d1, d2 })
    }
}

/// `ℓ·f*` at the nodes, without validation.
pub fn ell_times_fstar(model: &Model, basis: &LocalBasis, c: &DeviationCoefficients) -> Vec<f64> {
    let d = model.dim();
    let n = model.len();
    let q = basis.f.len();
    let mut out = vec![0.0; n];
    add_measure(model, &c.nu[0], c.tau[0], &mut out);
    for i in 0..q {
        axpy(c.eta[i], &basis.f[i], &mut out);
        for a in 0..d {
            axpy(c.beta[i][a], &basis.d1[i][a], &mut out);
        }
        for a in 0..d * d {
            axpy(c.rho[i][a], &basis.d2[i][a], &mut out);
        }
        add_measure(model, &c.nu[i + 1], c.tau[i + 1], &mut out);
    }
    out
}

fn add_measure(model: &Model, nu: &DiscreteMeasure, tau: f64, out: &mut [f64]) {
    if tau == 0.0 {
        return;
    }
    let d = model.dim();
    for (w, a) in nu.weights.iter().zip(&nu.atoms) {
        let s = tau * w;
        for (o, x) in out.iter_mut().zip(model.grid().nodes().chunks_exact(d)) {
            *o += s * model.family().eval(x, a);
        }
    }
}

#[inline]
pub(crate) fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    if a != 0.0 {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += a * xi;
        }
    }
}

/// `ℓ(η, β, ρ, τ, ν)` on the grid.
pub fn ell(
    model: &Model,
    basis: &LocalBasis,
    nbhd: &NeighborhoodSystem,
    c: &DeviationCoefficients,
) -> Result<GridFunction> {
    c.validate(nbhd)?;
    let v = ell_times_fstar(model, basis, c)
        .into_iter()
        .zip(model.fstar())
        .map(|(a, s)| a / s)
        .collect();
    model.function(v)
}

/// Groups mixture atoms by region so that `ℓ = (f − f*)/f*`.
pub fn mixture_to_coeffs(
    m: &Mixture,
    reference: &Mixture,
    nbhd: &NeighborhoodSystem,
    domain: &ParameterDomain,
) -> DeviationCoefficients {
    let mut c = DeviationCoefficients::zero(nbhd, domain);
    let q = nbhd.len();
    let mut groups: Vec<DiscreteMeasure> = (0..=q)
        .map(|_| DiscreteMeasure {
            weights: vec![],
            atoms: vec![],
        })
        .collect();
    for j in 0..m.len() {
        let w = m.weights()[j];
        if w == 0.0 {
            continue;
        }
        let r = nbhd.region_of(m.atom(j)).map(|r| r + 1).unwrap_or(0);
        groups[r].weights.push(w);
        groups[r].atoms.push(m.atom(j).to_vec());
    }
    for (r, g) in groups.into_iter().enumerate() {
        let mass: f64 = g.weights.iter().sum();
        c.tau[r] = mass;
        if mass > 0.0 {
            c.nu[r] = DiscreteMeasure {
                weights: g.weights.iter().map(|w| w / mass).collect(),
                atoms: g.atoms,
            };
        }
    }
    for i in 0..q {
        c.eta[i] = -reference.weights()[i];
    }
    c
}

/// Knobs of the random sampler over `𝔇`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScaleProfile {
    /// Probability that a coefficient block is nonzero.
    pub activity: f64,
    /// Block magnitudes are log-uniform in `[10^{log10_min}, 1]`.
    pub log10_min: f64,
    /// Probability of drawing `η_i ≈ −τ_i`, `β_i ≈ −τ_i ∫(θ−θ_i*)dν_i`.
    pub cancel: f64,
}

impl Default for ScaleProfile {
    fn default() -> Self {
        Self {
            activity: 0.6,
            log10_min: -3.0,
            cancel: 0.5,
        }
    }
}

/// Random element of `𝔇` normalized to `N = 1`.
pub fn sample_deviation(
    nbhd: &NeighborhoodSystem,
    domain: &ParameterDomain,
    seed: u64,
    profile: &ScaleProfile,
) -> Result<DeviationCoefficients> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_deviation_with(&mut rng, nbhd, domain, profile)
}

pub fn sample_deviation_with<R: Rng + ?Sized>(
    rng: &mut R,
    nbhd: &NeighborhoodSystem,
    domain: &ParameterDomain,
    profile: &ScaleProfile,
) -> Result<DeviationCoefficients> {
    let q = nbhd.len();
    let d = nbhd.dim();
    for _ in 0..100 {
        let mut c = DeviationCoefficients::zero(nbhd, domain);
        let mag = |rng: &mut R| -> f64 {
            if rng.random::<f64>() < profile.activity {
                10f64.powf(rng.random_range(profile.log10_min..=0.0))
            } else {
                0.0
            }
        };
        c.tau[0] = mag(rng) * rng.sample::<f64, _>(Exp1);
        c.nu[0] = sample_outer_measure(rng, nbhd, domain);
        for i in 0..q {
            c.tau[i + 1] = mag(rng) * rng.sample::<f64, _>(Exp1);
            c.nu[i + 1] = sample_inner_measure(rng, nbhd, i);
            let s = mag(rng);
            c.eta[i] = s * rng.sample::<f64, _>(StandardNormal);
            let s = mag(rng);
            for a in 0..d {
                c.beta[i][a] = s * rng.sample::<f64, _>(StandardNormal);
            }
            if rng.random::<f64>() < profile.cancel {
                let (m1, _) = c.nu[i + 1].moments_about(nbhd.center(i));
                c.eta[i] -= c.tau[i + 1];
                for a in 0..d {
                    c.beta[i][a] -= c.tau[i + 1] * m1[a];
                }
            }
            let s = mag(rng).sqrt();
            let amat: Vec<f64> = (0..d * d).map(|_| s * rng.sample::<f64, _>(StandardNormal)).collect();
            c.rho[i] = gram(&amat, d);
        }
        let n = pseudo_n(&c, nbhd);
        if n >= 1e-12 && n.is_finite() {
            return Ok(c.scaled(1.0 / n));
        }
    }
    Err(Error::Numeric("sampler produced only degenerate draws".into()))
}

/// `AᵀA` for row-major `A`.
pub(crate) fn gram(a: &[f64], d: usize) -> Vec<f64> {
    let mut r = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            r[i * d + j] = (0..d).map(|k| a[k * d + i] * a[k * d + j]).sum();
        }
    }
    r
}

fn random_simplex<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub(crate) fn sample_inner_measure<R: Rng + ?Sized>(
    rng: &mut R,
    nbhd: &NeighborhoodSystem,
    i: usize,
) -> DiscreteMeasure {
    let k = rng.random_range(1..=5);
    let r = nbhd.radius() * (1.0 - 1e-9);
    DiscreteMeasure {
        weights: random_simplex(rng, k),
        atoms: (0..k).map(|_| sample_ball(rng, nbhd.center(i), r)).collect(),
    }
}

/// Atoms drawn from `A₀ ∩ Θ` by rejection.
pub(crate) fn sample_outer_measure<R: Rng + ?Sized>(
    rng: &mut R,
    nbhd: &NeighborhoodSystem,
    domain: &ParameterDomain,
) -> DiscreteMeasure {
    let k = rng.random_range(1..=5);
    let atoms = (0..k)
        .map(|_| sample_outer_point(rng, nbhd, domain))
        .collect();
    DiscreteMeasure {
        weights: random_simplex(rng, k),
        atoms,
    }
}

pub(crate) fn sample_outer_point<R: Rng + ?Sized>(
    rng: &mut R,
    nbhd: &NeighborhoodSystem,
    domain: &ParameterDomain,
) -> Vec<f64> {
    for _ in 0..1000 {
        let t = domain.sample(rng);
        if nbhd.region_of(&t).is_none() {
            return t;
        }
    }
    nbhd.outside_point(domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{LocationFamily, QuadratureGrid};
    use crate::geometry::{build_neighborhoods, NeighborhoodOptions};
    use std::sync::Arc;

    fn setup() -> (Model, NeighborhoodSystem, LocalBasis) {
        let fam = LocationFamily::fig1(1).unwrap();
        let dom = ParameterDomain::new(vec![0.5], 0.5).unwrap();
        let r = Mixture::point(&[0.5]);
        let g = QuadratureGrid::trapezoid_spacing(&[-3.0], &[4.0], 0.05).unwrap();
        let m = Model::new(fam, dom.clone(), r.clone(), Arc::new(g)).unwrap();
        let n = build_neighborhoods(&r, &dom, 0, &NeighborhoodOptions::default()).unwrap();
        let b = LocalBasis::new(&m, &n).unwrap();
        (m, n, b)
    }

    #[test]
    fn caption_pseudodistance() {
        let (m, n, _) = setup();
        let f = Mixture::new(vec![0.5, 0.5], vec![vec![0.6], vec![0.4]]).unwrap();
        let c = mixture_to_coeffs(&f, m.reference(), &n, m.domain());
        assert!((pseudo_n(&c, &n) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn first_order_cancellation() {
        let (m, n, _) = setup();
        let mut c = DeviationCoefficients::zero(&n, m.domain());
        c.eta[0] = -0.5;
        c.tau[1] = 0.5;
        assert_eq!(pseudo_n(&c, &n), 0.0);
    }

    #[test]
    fn single_outer_atom_has_unit_mass() {
        let (m, n, b) = setup();
        let mut c = DeviationCoefficients::zero(&n, m.domain());
        c.tau[0] = 1.0;
        c.nu[0] = DiscreteMeasure::point(&[0.0]);
        let l = ell(&m, &b, &n, &c).unwrap();
        let integral = m.lp_norm(&l, 1.0).unwrap();
        assert!((integral - m.family().mass()).abs() < 1e-8);
    }

    #[test]
    fn misplaced_atom_is_domain_violation() {
        let (m, n, b) = setup();
        let mut c = DeviationCoefficients::zero(&n, m.domain());
        c.nu[1] = DiscreteMeasure::point(&[0.0]);
        assert!(matches!(ell(&m, &b, &n, &c), Err(Error::DomainViolation(_))));
    }

    #[test]
    fn non_psd_rho_rejected() {
        let (m, n, b) = setup();
        let mut c = DeviationCoefficients::zero(&n, m.domain());
        c.rho[0] = vec![-1.0];
        assert!(matches!(ell(&m, &b, &n, &c), Err(Error::DomainViolation(_))));
    }

    #[test]
    fn sampler_is_normalized_and_reproducible() {
        let (m, n, _) = setup();
        let p = ScaleProfile::default();
        for seed in 0..50 {
            let c = sample_deviation(&n, m.domain(), seed, &p).unwrap();
            c.validate(&n).unwrap();
            assert!((pseudo_n(&c, &n) - 1.0).abs() < 1e-9);
            assert_eq!(c, sample_deviation(&n, m.domain(), seed, &p).unwrap());
        }
    }
}
