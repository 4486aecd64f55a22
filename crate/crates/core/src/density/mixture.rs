//! Finite mixtures and the parameter domain.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol::{ATOL_DOMAIN, ATOL_SIMPLEX};

/// Closed Euclidean ball `Θ = B(center, radius)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterDomain {
    center: Vec<f64>,
    radius: f64,
}

impl ParameterDomain {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::Config("domain center is empty".into()));
        }
        if !(radius >= 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::Config(format!("invalid domain radius {radius}")));
        }
        Ok(Self { center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim() && dist(theta, &self.center) <= self.radius + ATOL_DOMAIN
    }

    /// Nearest point of the ball.
    pub fn project(&self, theta: &mut [f64]) {
        let r = dist(theta, &self.center);
        if r > self.radius {
            let s = self.radius / r;
            for (t, c) in theta.iter_mut().zip(&self.center) {
                *t = c + (*t - c) * s;
            }
        }
    }

    /// Uniform draw from the ball.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        sample_ball(rng, &self.center, self.radius)
    }
}

/// Uniform draw from `B(center, radius)` in `ℝ^d`.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, center: &[f64], radius: f64) -> Vec<f64> {
    let d = center.len();
    let g: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    center.iter().zip(&g).map(|(c, v)| c + r * v / n).collect()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// `Σ_j π_j δ_{θ_j}` with atoms stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    dim: usize,
    weights: Vec<f64>,
    atoms: Vec<f64>,
}

impl Mixture {
    /// Validates shapes and the simplex constraint.
    pub fn new(weights: Vec<f64>, atoms: Vec<Vec<f64>>) -> Result<Self> {
        let dim = atoms.first().map(|a| a.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::Shape("mixture needs at least one atom".into()));
        }
        if atoms.iter().any(|a| a.len() != dim) {
            return Err(Error::Shape("mixture atoms differ in dimension".into()));
        }
        Self::from_flat(dim, weights, atoms.concat())
    }

    pub fn from_flat(dim: usize, weights: Vec<f64>, atoms: Vec<f64>) -> Result<Self> {
        if dim == 0 || atoms.len() != weights.len() * dim || weights.is_empty() {
            return Err(Error::Shape(format!(
                "{} weights and {} atom coordinates in dimension {dim}",
                weights.len(),
                atoms.len()
            )));
        }
        if weights.iter().chain(&atoms).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite mixture parameter".into()));
        }
        if weights.iter().any(|w| *w < -ATOL_SIMPLEX) {
            return Err(Error::DomainViolation("negative mixture weight".into()));
        }
        let s: f64 = weights.iter().sum();
        if (s - 1.0).abs() > ATOL_SIMPLEX * weights.len().max(1) as f64 * 10.0 {
            return Err(Error::DomainViolation(format!("mixture weights sum to {s}")));
        }
        Ok(Self {
            dim,
            weights: weights.into_iter().map(|w| w.max(0.0)).collect(),
            atoms,
        })
    }

    /// Point mass at `theta`.
    pub fn point(theta: &[f64]) -> Self {
        Self {
            dim: theta.len(),
            weights: vec![1.0],
            atoms: theta.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of atoms `q`.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn atom(&self, j: usize) -> &[f64] {
        &self.atoms[j * self.dim..(j + 1) * self.dim]
    }

    pub fn atoms_flat(&self) -> &[f64] {
        &self.atoms
    }

    /// `Err` unless every atom lies in `domain`.
    pub fn check_domain(&self, domain: &ParameterDomain) -> Result<()> {
        if domain.dim() != self.dim {
            return Err(Error::Shape("mixture and domain dimensions differ".into()));
        }
        for j in 0..self.len() {
            if !domain.contains(self.atom(j)) {
                return Err(Error::DomainViolation(format!(
                    "atom {:?} lies outside the parameter domain",
                    self.atom(j)
                )));
            }
        }
        Ok(())
    }

    /// Distinct atoms with positive weights.
    pub fn check_nondegenerate(&self) -> Result<()> {
        if self.weights.iter().any(|w| *w <= 0.0) {
            return Err(Error::DegenerateInput("reference has a zero weight".into()));
        }
        for i in 0..self.len() {
            for j in 0..i {
                if dist(self.atom(i), self.atom(j)) <= 1e-12 {
                    return Err(Error::DegenerateInput("reference atoms coincide".into()));
                }
            }
        }
        Ok(())
    }

    /// Largest pairwise atom distance.
    pub fn diameter(&self) -> f64 {
        let mut m = 0.0_f64;
        for i in 0..self.len() {
            for j in 0..i {
                m = m.max(dist(self.atom(i), self.atom(j)));
            }
        }
        m
    }
}
