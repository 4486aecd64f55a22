//! Random mixtures near and far from the reference.

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::density::{Mixture, ParameterDomain};
use crate::error::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureSamplerOptions {
    /// Atoms beyond `q*`; the order is `q* + U{0..=extra_atoms}`.
    pub extra_atoms: usize,
    /// Perturbation scales are log-uniform in `[10^{log10_min}, 10^{log10_max}]`.
    pub log10_min: f64,
    pub log10_max: f64,
}

impl Default for MixtureSamplerOptions {
    fn default() -> Self {
        Self {
            extra_atoms: 3,
            log10_min: -3.0,
            log10_max: 0.0,
        }
    }
}

/// Perturbation of the reference at a random log-scale.
///
/// Every reference atom keeps at least one nearby atom; extra atoms either
/// split a reference atom or land anywhere in `Θ` with small weight.
pub fn sample_local_mixture<R: Rng + ?Sized>(
    rng: &mut R,
    reference: &Mixture,
    domain: &ParameterDomain,
    opts: &MixtureSamplerOptions,
) -> Result<Mixture> {
    let s = 10f64.powf(rng.random_range(opts.log10_min..=opts.log10_max));
    sample_local_mixture_at(rng, reference, domain, opts.extra_atoms, s)
}

/// As [`sample_local_mixture`] at perturbation scale `s`.
pub fn sample_local_mixture_at<R: Rng + ?Sized>(
    rng: &mut R,
    reference: &Mixture,
    domain: &ParameterDomain,
    extra_atoms: usize,
    s: f64,
) -> Result<Mixture> {
    let qs = reference.len();
    let extra = rng.random_range(0..=extra_atoms);
    let spread = domain.radius().max(1e-12);
    let mut group = vec![1usize; qs];
    let mut free = 0;
    for _ in 0..extra {
        if rng.random::<bool>() {
            group[rng.random_range(0..qs)] += 1;
        } else {
            free += 1;
        }
    }
    let mut weights = Vec::new();
    let mut atoms = Vec::new();
    for i in 0..qs {
        let split: Vec<f64> = (0..group[i]).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = split.iter().sum();
        for w in split {
            let mut theta: Vec<f64> = reference
                .atom(i)
                .iter()
                .map(|c| c + s * spread * rng.sample::<f64, _>(StandardNormal))
                .collect();
            domain.project(&mut theta);
            let noise: f64 = rng.sample(StandardNormal);
            weights.push((reference.weights()[i] * w / total * (1.0 + s * noise)).max(1e-300));
            atoms.push(theta);
        }
    }
    for _ in 0..free {
        atoms.push(domain.sample(rng));
        weights.push(s * s * rng.random::<f64>());
    }
    let total: f64 = weights.iter().sum();
    let weights = weights.into_iter().map(|w| w / total).collect();
    Mixture::new(weights, atoms)
}

/// Uniform weights on the simplex and uniform atoms in `Θ`.
pub fn sample_uniform_mixture<R: Rng + ?Sized>(
    rng: &mut R,
    domain: &ParameterDomain,
    q: usize,
) -> Result<Mixture> {
    let e: Vec<f64> = (0..q).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = e.iter().sum();
    let atoms = (0..q).map(|_| domain.sample(rng)).collect();
    Mixture::new(e.into_iter().map(|w| w / total).collect(), atoms)
}
