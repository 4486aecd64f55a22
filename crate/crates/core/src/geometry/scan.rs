//! Stratified sampling of `h(f, f*)` against the mixture pseudodistance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{Mixture, Model};
use crate::error::{Error, Result};
use crate::geometry::{mixture_to_coeffs, pseudo_n, NeighborhoodSystem};
use crate::metrics::hellinger_values;
use crate::sampling::{sample_local_mixture, sample_uniform_mixture, MixtureSamplerOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanOptions {
    pub n_samples: usize,
    /// Finite `h` edges between strata; the last stratum lies above the last edge.
    pub bands: Vec<f64>,
    pub mixtures: MixtureSamplerOptions,
    /// Proposal attempts per requested sample before giving up on a stratum.
    pub max_attempts_factor: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            n_samples: 10_000,
            bands: vec![0.02, 0.2],
            mixtures: MixtureSamplerOptions::default(),
            max_attempts_factor: 200,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioRow {
    pub stratum: usize,
    pub h: f64,
    pub n: f64,
    pub ratio: f64,
    #[serde(skip)]
    pub mixture: Mixture,
}

/// Draws mixtures until each stratum holds its share, then records `h`, `N`, `h/N`.
///
/// Stratum `b` is filled from worker stream `b` of `seed`; rows with
/// `N < 1e−10` are excluded.
pub fn ratio_scan(
    model: &Model,
    nbhd: &NeighborhoodSystem,
    opts: &ScanOptions,
    seed: u64,
) -> Result<Vec<RatioRow>> {
    if opts.bands.windows(2).any(|w| !(w[1] > w[0]))
        || opts.bands.iter().any(|b| !(*b > 0.0 && b.is_finite()))
    {
        return Err(Error::Config("strata edges must be positive, finite and increasing".into()));
    }
    let k = opts.bands.len() + 1;
    let fstar = model.fstar();
    let per: Vec<usize> = (0..k)
        .map(|b| opts.n_samples / k + usize::from(b < opts.n_samples % k))
        .collect();
    let strata: Vec<Result<Vec<RatioRow>>> = (0..k)
        .into_par_iter()
        .map(|b| {
            let lo = if b == 0 { 0.0 } else { opts.bands[b - 1] };
            let hi = opts.bands.get(b).copied().unwrap_or(f64::INFINITY);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let mut rows = Vec::with_capacity(per[b]);
            let mut attempts = 0usize;
            // Log-scale window adapted to the stratum's band.
            let mut mopts = opts.mixtures;
            while rows.len() < per[b] {
                attempts += 1;
                if attempts > opts.max_attempts_factor * per[b].max(1) {
                    return Err(Error::Numeric(format!(
                        "stratum ({lo}, {hi}] filled {} of {} samples",
                        rows.len(),
                        per[b]
                    )));
                }
                let m = if hi.is_infinite() && rng.random::<f64>() < 0.5 {
                    let q = rng.random_range(1..=model.reference().len() + mopts.extra_atoms);
                    sample_uniform_mixture(&mut rng, model.domain(), q)?
                } else {
                    if hi.is_finite() {
                        mopts.log10_max = (hi.log10() + 1.0).min(opts.mixtures.log10_max);
                        mopts.log10_min = opts.mixtures.log10_min.min(mopts.log10_max - 1.0);
                    }
                    sample_local_mixture(&mut rng, model.reference(), model.domain(), &mopts)?
                };
                let f = model.mixture_values(&m)?;
                let h = hellinger_values(model, &f, fstar);
                if !(h > lo && h <= hi) {
                    continue;
                }
                let c = mixture_to_coeffs(&m, model.reference(), nbhd, model.domain());
                let n = pseudo_n(&c, nbhd);
                if n < 1e-10 {
                    continue;
                }
                rows.push(RatioRow {
                    stratum: b,
                    h,
                    n,
                    ratio: h / n,
                    mixture: m,
                });
            }
            Ok(rows)
        })
        .collect();
    let mut out = Vec::with_capacity(opts.n_samples);
    for s in strata {
        out.extend(s?);
    }
    Ok(out)
}
