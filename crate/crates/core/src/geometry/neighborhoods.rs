//! Disjoint neighborhoods of the reference atoms with separating directions.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::{dist, Mixture, ParameterDomain};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeighborhoodOptions {
    /// Minimum separation as a fraction of the atom diameter.
    pub margin_factor: f64,
    pub max_attempts: usize,
    /// Radius used when there is a single reference atom; `None` means `T/2`.
    pub radius_cap: Option<f64>,
}

impl Default for NeighborhoodOptions {
    fn default() -> Self {
        Self {
            margin_factor: 1e-3,
            max_attempts: 1000,
            radius_cap: None,
        }
    }
}

/// Open balls `A_i = B(θ_i*, radius)` and directions `u_1..u_d`.
#[derive(Clone, Debug, Serialize)]
pub struct NeighborhoodSystem {
    dim: usize,
    centers: Vec<f64>,
    radius: f64,
    directions: Vec<f64>,
    epsilon: f64,
    attempts: usize,
}

/// Lower bound on `|det(u_1..u_d)|`.
pub const DET_MIN: f64 = 1e-6;

impl NeighborhoodSystem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of reference atoms `q*`.
    pub fn len(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Separation `ε`; infinite for a single atom.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn direction(&self, j: usize) -> &[f64] {
        &self.directions[j * self.dim..(j + 1) * self.dim]
    }

    pub fn attempts(&self) -> usize {
        self.attempts
    }

    /// `Some(i)` if `θ ∈ A_i` (0-based), `None` for `A₀`.
    pub fn region_of(&self, theta: &[f64]) -> Option<usize> {
        (0..self.len()).find(|&i| dist(theta, self.center(i)) < self.radius)
    }

    /// A point of `A₀ ∩ Θ` when one exists, else a point of `A₀` outside `Θ`.
    pub fn outside_point(&self, domain: &ParameterDomain) -> Vec<f64> {
        let d = self.dim;
        let mut candidates: Vec<Vec<f64>> = Vec::new();
        for a in 0..d {
            for s in [-1.0, 1.0] {
                let mut t = domain.center().to_vec();
                t[a] += s * domain.radius();
                candidates.push(t);
            }
        }
        candidates.push(domain.center().to_vec());
        for c in &candidates {
            if self.region_of(c).is_none() {
                return c.clone();
            }
        }
        let mut t = domain.center().to_vec();
        let far = (0..self.len())
            .map(|i| dist(self.center(i), domain.center()))
            .fold(0.0_f64, f64::max)
            + self.radius
            + domain.radius()
            + 1.0;
        t[0] += far;
        t
    }

    /// Checks independence of the directions and interval disjointness.
    pub fn check_invariants(&self) -> Result<()> {
        let d = self.dim;
        let u = DMatrix::from_row_slice(d, d, &self.directions);
        if u.determinant().abs() < DET_MIN {
            return Err(Error::DegenerateInput("separating directions are dependent".into()));
        }
        for j in 0..d {
            let uj = self.direction(j);
            let norm = uj.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut iv: Vec<(f64, f64)> = (0..self.len())
                .map(|i| {
                    let c: f64 = self.center(i).iter().zip(uj).map(|(a, b)| a * b).sum();
                    (c - self.radius * norm, c + self.radius * norm)
                })
                .collect();
            iv.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            for w in iv.windows(2) {
                if w[1].0 < w[0].1 {
                    return Err(Error::DegenerateInput(format!(
                        "projected neighborhoods overlap along direction {j}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Haar-distributed rotation in `SO(d)`, rows are the directions.
pub fn haar_rotation<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![1.0];
    }
    let g = DMatrix::<f64>::from_fn(d, d, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    if q.determinant() < 0.0 {
        for i in 0..d {
            q[(i, 0)] = -q[(i, 0)];
        }
    }
    let mut rows = Vec::with_capacity(d * d);
    for j in 0..d {
        for i in 0..d {
            rows.push(q[(i, j)]);
        }
    }
    rows
}

/// Rejection-samples rotations until all projections separate with margin.
pub fn build_neighborhoods(
    reference: &Mixture,
    domain: &ParameterDomain,
    seed: u64,
    opts: &NeighborhoodOptions,
) -> Result<NeighborhoodSystem> {
    reference.check_nondegenerate()?;
    let d = reference.dim();
    let q = reference.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if q == 1 {
        let radius = opts.radius_cap.unwrap_or(domain.radius() / 2.0);
        if !(radius > 0.0) {
            return Err(Error::Config("single-atom neighborhood radius must be positive".into()));
        }
        return Ok(NeighborhoodSystem {
            dim: d,
            centers: reference.atoms_flat().to_vec(),
            radius,
            directions: haar_rotation(&mut rng, d),
            epsilon: f64::INFINITY,
            attempts: 1,
        });
    }
    let margin = opts.margin_factor * reference.diameter();
    for attempt in 1..=opts.max_attempts {
        let u = haar_rotation(&mut rng, d);
        let mut eps = f64::INFINITY;
        for k in 0..d {
            let uk = &u[k * d..(k + 1) * d];
            for i in 0..q {
                for j in 0..i {
                    let p: f64 = reference
                        .atom(i)
                        .iter()
                        .zip(reference.atom(j))
                        .zip(uk)
                        .map(|((a, b), c)| (a - b) * c)
                        .sum();
                    eps = eps.min(p.abs());
                }
            }
        }
        if eps >= margin && eps > 0.0 {
            let sys = NeighborhoodSystem {
                dim: d,
                centers: reference.atoms_flat().to_vec(),
                radius: eps / 4.0,
                directions: u,
                epsilon: eps,
                attempts: attempt,
            };
            sys.check_invariants()?;
            return Ok(sys);
        }
    }
    Err(Error::Config(format!(
        "no separating rotation found in {} attempts",
        opts.max_attempts
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_atoms_on_the_line() {
        let r = Mixture::new(vec![0.5, 0.5], vec![vec![0.3], vec![0.7]]).unwrap();
        let dom = ParameterDomain::new(vec![0.5], 0.5).unwrap();
        let n = build_neighborhoods(&r, &dom, 1, &NeighborhoodOptions::default()).unwrap();
        assert!((n.epsilon() - 0.4).abs() < 1e-15);
        assert!((n.radius() - 0.1).abs() < 1e-15);
        assert_eq!(n.region_of(&[0.35]), Some(0));
        assert_eq!(n.region_of(&[0.5]), None);
        assert_eq!(n.region_of(&[0.79]), Some(1));
    }

    #[test]
    fn single_atom_uses_cap() {
        let r = Mixture::point(&[0.5]);
        let dom = ParameterDomain::new(vec![0.5], 0.5).unwrap();
        let n = build_neighborhoods(&r, &dom, 1, &NeighborhoodOptions::default()).unwrap();
        assert_eq!(n.radius(), 0.25);
        assert!(n.epsilon().is_infinite());
        let p = n.outside_point(&dom);
        assert!(n.region_of(&p).is_none() && dom.contains(&p));
    }

    #[test]
    fn rotations_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in 1..=3 {
            let u = haar_rotation(&mut rng, d);
            let m = DMatrix::from_row_slice(d, d, &u);
            let id = &m * m.transpose();
            assert!((id - DMatrix::identity(d, d)).norm() < 1e-12);
            assert!((m.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn impossible_margin_is_config_error() {
        let r = Mixture::new(vec![0.5, 0.5], vec![vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let dom = ParameterDomain::new(vec![0.0, 0.0], 2.0).unwrap();
        let opts = NeighborhoodOptions {
            margin_factor: 2.0,
            max_attempts: 10,
            radius_cap: None,
        };
        assert!(matches!(build_neighborhoods(&r, &dom, 0, &opts), Err(Error::Config(_))));
    }
}
