//! Slicing on synthetic classes, the Hilbert example and a mixture class.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{fmt, Outcome, RunContext};
use crate::bracketing::{
    bracket_hq_local, hilbert_local_brackets, hilbert_points, incompatible_lower_bound, random_ratio, run_instance,
    verify_bracket_cover, EllipsoidClass, InstanceReport, LatticeNorm, MixtureContext, SliceSchedule,
};
use crate::density::Envelopes;
use crate::error::{Error, Result};
use crate::metrics::hellinger_values;
use crate::sampling::{sample_local_mixture, sample_uniform_mixture};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InstanceRow {
    pub index: usize,
    pub dim: usize,
    pub rank: usize,
    pub norm: String,
    pub delta: f64,
    pub rho: f64,
    pub samples: usize,
    pub covered: usize,
    pub max_size: f64,
    pub count: usize,
    pub count_bound: f64,
    pub c0: f64,
    pub c: f64,
    pub shells: usize,
}

impl InstanceRow {
    fn from_report(index: usize, class: &EllipsoidClass, delta: f64, rho: f64, r: &InstanceReport) -> Self {
        Self {
            index,
            dim: class.dim(),
            rank: class.k,
            norm: class.norm.tag().into(),
            delta,
            rho,
            samples: r.points,
            covered: r.cover.covered,
            max_size: r.check.sliced.set.max_size(),
            count: r.check.count(),
            count_bound: r.check.count_bound,
            c0: r.check.certificate.c0,
            c: r.check.c,
            shells: r.check.sliced.schedule.shells,
        }
    }

    pub fn sound(&self) -> bool {
        self.covered == self.samples
            && self.max_size <= self.rho * (1.0 + 1e-9)
            && (self.count as f64) <= self.count_bound
    }
}

pub type BallReport = InstanceRow;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HilbertRow {
    pub r: usize,
    pub k: usize,
    pub open: bool,
    pub count: usize,
    pub lower_bound: usize,
    /// `k − r + 1`.
    pub claim: usize,
    pub covered: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MixtureScenario {
    pub q: usize,
    pub eps: f64,
    pub delta: f64,
    pub c_hat: f64,
    pub samples: usize,
    pub covered: usize,
    pub max_size: f64,
    pub ln_count: f64,
    pub shells: usize,
    /// Samples per shell, inner ball first.
    pub shell_hits: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SliceSummary {
    pub ball: BallReport,
    pub instances: Vec<InstanceRow>,
    pub hilbert: Vec<HilbertRow>,
    pub hilbert_k: usize,
    /// Pairwise incompatible unit vectors at `hilbert_eps`: a lower bound for `N_[](D₀)`.
    pub hilbert_d0_lower: usize,
    pub hilbert_eps: f64,
    /// Error raised for `ρ/δ = 4`.
    pub rejected_ratio_error: String,
    pub mixture: Option<MixtureScenario>,
}

fn stream(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

fn mixture_scenario(ctx: &RunContext) -> Result<MixtureScenario> {
    let cfg = &ctx.config.slice;
    let model = ctx.model()?;
    let nbhd = ctx.neighborhoods(&model)?;
    let c_hat = ctx.cstar(&model, &nbhd)?;
    let env = Envelopes::compute(&model, &ctx.config.envelopes)?;
    let mctx = MixtureContext::new(model, nbhd, &env, c_hat)?;
    let cover = bracket_hq_local(&mctx, cfg.mixture_q, cfg.mixture_eps, cfg.mixture_delta)?;
    let model = &mctx.model;
    let mut hits = vec![0usize; cover.schedule.shells + 1];
    let mut covered = 0;
    let mut max_size = 0.0f64;
    let mut taken = 0;
    let mut k = 0u64;
    while taken < cfg.mixture_samples {
        if k > 1000 * cfg.mixture_samples as u64 {
            return Err(Error::Config(format!("too few mixtures within h ≤ {}", cfg.mixture_eps)));
        }
        let mut rng = stream(ctx.seed, 1_000_000 + k);
        k += 1;
        let f = if rng.random::<bool>() {
            let q = rng.random_range(1..=cfg.mixture_q);
            sample_uniform_mixture(&mut rng, model.domain(), q)?
        } else {
            sample_local_mixture(&mut rng, model.reference(), model.domain(), &Default::default())?
        };
        if f.len() > cfg.mixture_q {
            continue;
        }
        let fv = model.mixture_values(&f)?;
        if hellinger_values(model, &fv, model.fstar()) > cfg.mixture_eps {
            continue;
        }
        taken += 1;
        let w = cover.locate(&f)?;
        hits[w.shell] += 1;
        max_size = max_size.max(w.bracket.size());
        if w.contains(1e-9) {
            covered += 1;
        }
    }
    Ok(MixtureScenario {
        q: cfg.mixture_q,
        eps: cfg.mixture_eps,
        delta: cfg.mixture_delta,
        c_hat,
        samples: taken,
        covered,
        max_size,
        ln_count: cover.ln_count(),
        shells: cover.schedule.shells,
        shell_hits: hits,
    })
}

pub fn run_slice(ctx: &RunContext) -> Result<Outcome<SliceSummary>> {
    let cfg = &ctx.config.slice;
    let ball_class = EllipsoidClass::unit_ball(LatticeNorm::Sup);
    let mut rng = stream(ctx.seed, 0);
    let ball = run_instance(&mut rng, &ball_class, cfg.ball_delta, cfg.ball_rho, cfg.ball_samples)?;
    let ball = InstanceRow::from_report(0, &ball_class, cfg.ball_delta, cfg.ball_rho, &ball);

    let instances: Vec<InstanceRow> = (0..cfg.instances)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(ctx.seed, 1 + i as u64);
            let class = EllipsoidClass::random(&mut rng);
            let delta = rng.random_range(0.5..2.0);
            let rho = random_ratio(&mut rng, class.dim(), &class.norm) * delta;
            let rep = run_instance(&mut rng, &class, delta, rho, cfg.instance_samples)?;
            Ok(InstanceRow::from_report(i + 1, &class, delta, rho, &rep))
        })
        .collect::<Result<_>>()?;

    let kmax = cfg.hilbert_k;
    let mut hilbert = Vec::new();
    for r in 1..kmax {
        for k in r..kmax {
            for open in [true, false] {
                let pts = hilbert_points(kmax, r, open);
                let set = hilbert_local_brackets(kmax, r, k, open)?;
                let covered = verify_bracket_cover(&set, &pts, 0.0)?.all_covered();
                hilbert.push(HilbertRow {
                    r,
                    k,
                    open,
                    count: set.len(),
                    lower_bound: incompatible_lower_bound(&pts, set.scale(), &LatticeNorm::L2),
                    claim: k - r + 1,
                    covered,
                });
            }
        }
    }
    let units: Vec<Vec<f64>> = (0..kmax)
        .map(|j| {
            let mut e = vec![0.0; kmax];
            e[j] = 1.0;
            e
        })
        .collect();
    let hilbert_d0_lower = incompatible_lower_bound(&units, cfg.hilbert_eps, &LatticeNorm::L2);
    let rejected_ratio_error = match SliceSchedule::new(3.0, 1.0, 4.0) {
        Err(e @ Error::Scale(_)) => e.to_string(),
        Err(e) => return Err(e),
        Ok(_) => return Err(Error::Certificate("ρ/δ = 4 was accepted".into())),
    };
    let mixture = if cfg.mixture_samples > 0 { Some(mixture_scenario(ctx)?) } else { None };

    let grid = match &mixture {
        Some(_) => {
            let model = ctx.model()?;
            ctx.config.model.grid_label(&model)
        }
        None => "none".into(),
    };
    let prov = ctx.provenance("slice", grid, mixture.as_ref().map(|m| m.c_hat));
    let table: Vec<Vec<String>> = std::iter::once(&ball)
        .chain(&instances)
        .map(|r| {
            vec![
                r.index.to_string(),
                r.dim.to_string(),
                r.rank.to_string(),
                r.norm.clone(),
                fmt(r.delta),
                fmt(r.rho),
                r.samples.to_string(),
                r.covered.to_string(),
                fmt(r.max_size),
                r.count.to_string(),
                fmt(r.count_bound),
            ]
        })
        .collect();
    ctx.emit_csv(
        "slice_instances.csv",
        &prov,
        &["index", "dim", "rank", "norm", "delta", "rho", "samples", "covered", "max_size", "count", "count_bound"],
        &table,
    )?;
    let htable: Vec<Vec<String>> = hilbert
        .iter()
        .map(|h| {
            vec![
                h.r.to_string(),
                h.k.to_string(),
                h.open.to_string(),
                h.count.to_string(),
                h.lower_bound.to_string(),
                h.claim.to_string(),
            ]
        })
        .collect();
    ctx.emit_csv("slice_hilbert.csv", &prov, &["r", "k", "open", "count", "lower_bound", "claim"], &htable)?;
    let summary = SliceSummary {
        ball,
        instances,
        hilbert,
        hilbert_k: kmax,
        hilbert_d0_lower,
        hilbert_eps: cfg.hilbert_eps,
        rejected_ratio_error,
        mixture,
    };
    ctx.finish("slice_summary.json", prov, summary)
}
