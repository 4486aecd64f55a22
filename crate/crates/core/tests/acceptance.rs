//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary so the lines appear in `cargo test` output.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use mixgeo_core::bracketing::{score_approximation, MixtureContext};
use mixgeo_core::config::Config;
use mixgeo_core::density::{default_box, Envelopes, LocationFamily, Mixture, Model, ParameterDomain, QuadratureGrid};
use mixgeo_core::experiments::{run_cstar, run_entropy, run_figure1, run_gauss, run_ratio, run_slice, RunContext};
use mixgeo_core::geometry::{build_neighborhoods, ell, mixture_to_coeffs, pseudo_n, LocalBasis, NeighborhoodOptions};
use mixgeo_core::metrics::{
    chi2_normalization_gap, envelope_s, hellinger_values, normalized_deviation, relative_values,
};
use mixgeo_core::sampling::{sample_local_mixture_at, sample_uniform_mixture};
use mixgeo_core::tol::{ATOL_ENV, ATOL_H, RTOL_ENV};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Jaccard overlap of the two Figure 1 clouds at 64 intervals per axis, recorded once.
const JACCARD_GOLDEN: f64 = 0.7659;
const JACCARD_BAND: f64 = 0.1;
const RATIO_STABILITY: f64 = 0.25;
const CSTAR_SPREAD: f64 = 0.20;
const ELL_TOL: f64 = 1e-10;
const PSEUDO_N_TOL: f64 = 1e-12;
const SLOPE_RTOL: f64 = 1e-9;
const R2_MIN: f64 = 0.95;

struct Verdict {
    id: usize,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn context(file: &str) -> RunContext {
    let loaded = Config::load(&configs().join(file)).expect("checked-in config loads");
    RunContext::new(loaded, None, None).unwrap()
}

fn figure1() -> (bool, String) {
    let ctx = context("fig1.toml");
    let t = Instant::now();
    let s = run_figure1(&ctx).unwrap().summary;
    let secs = t.elapsed().as_secs_f64();
    let band = (s.jaccard - JACCARD_GOLDEN).abs() <= JACCARD_BAND && s.jaccard >= 0.5;
    let pass = s.resolution == 64 && s.sanity_violations == 0 && s.count_h > 0 && s.count_n > 0 && band && secs <= 600.0;
    let detail = format!(
        "{} points, |h≤.05| = {}, |N≤.05| = {}, sanity {}/{} ok, jaccard {:.4} (golden {JACCARD_GOLDEN} ± {JACCARD_BAND}), {secs:.1}s",
        s.points,
        s.count_h,
        s.count_n,
        s.sanity_checked - s.sanity_violations,
        s.sanity_checked,
        s.jaccard
    );
    (pass, detail)
}

fn comparison() -> (bool, String) {
    let base = context("fig1.toml");
    let small = run_ratio(&base).unwrap().summary;
    let mut doubled = base.config.clone();
    doubled.ratio.scan.n_samples *= 2;
    let big = run_ratio(&RunContext::in_memory(doubled, base.seed)).unwrap().summary;
    let rel = |a: f64, b: f64| (b / a - 1.0).abs();
    let stable = rel(small.local_min, big.local_min) <= RATIO_STABILITY
        && rel(small.local_max, big.local_max) <= RATIO_STABILITY;
    let c = run_cstar(&base).unwrap().summary;
    let c_ok = c.c_hats.len() == 5 && c.c_hats.iter().all(|v| *v > 0.0 && *v <= 1.0) && c.spread <= CSTAR_SPREAD;
    let pass = small.local_rows >= 10_000 && small.local_min > 0.0 && stable && c_ok;
    let detail = format!(
        "{} local rows: h/N ∈ [{:.4}, {:.4}]; doubled: [{:.4}, {:.4}]; ĉ over 5 seeds {:?}, spread {:.2e}",
        small.local_rows,
        small.local_min,
        small.local_max,
        big.local_min,
        big.local_max,
        c.c_hats.iter().map(|v| format!("{v:.5}")).collect::<Vec<_>>(),
        c.spread
    );
    (pass, detail)
}

fn gaussian_model(reference: Mixture, center: Vec<f64>, radius: f64, spacing: f64) -> Model {
    let fam = LocationFamily::gaussian(reference.dim()).unwrap();
    let dom = ParameterDomain::new(center, radius).unwrap();
    let (lo, hi) = default_box(&fam, &dom, &reference);
    let grid = QuadratureGrid::trapezoid_spacing(&lo, &hi, spacing).unwrap();
    Model::new(fam, dom, reference, Arc::new(grid)).unwrap()
}

fn fig1_model() -> Model {
    context("fig1.toml").model().unwrap()
}

/// The pseudodistance computed straight from the atoms.
fn display_n(model: &Model, nbhd: &mixgeo_core::geometry::NeighborhoodSystem, f: &Mixture) -> f64 {
    let r = model.reference();
    let d = model.dim();
    let mut total = 0.0;
    let mut mass = vec![0.0; r.len()];
    let mut first = vec![vec![0.0; d]; r.len()];
    let mut second = vec![0.0; r.len()];
    for j in 0..f.len() {
        let (p, th) = (f.weights()[j], f.atom(j));
        match nbhd.region_of(th) {
            None => total += p,
            Some(i) => {
                mass[i] += p;
                for a in 0..d {
                    let v = th[a] - r.atom(i)[a];
                    first[i][a] += p * v;
                    second[i] += p * v * v;
                }
            }
        }
    }
    for i in 0..r.len() {
        total += (mass[i] - r.weights()[i]).abs();
        total += first[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        total += 0.5 * second[i];
    }
    total
}

fn random_mixture<R: Rng>(rng: &mut R, model: &Model, qmax: usize) -> Mixture {
    let qs = model.reference().len();
    if rng.random::<bool>() {
        let s = 10f64.powf(rng.random_range(-4.0..0.0));
        sample_local_mixture_at(rng, model.reference(), model.domain(), qmax - qs, s).unwrap()
    } else {
        let q = rng.random_range(1..=qmax);
        sample_uniform_mixture(rng, model.domain(), q).unwrap()
    }
}

fn identity() -> (bool, String) {
    let models = [
        ("fig1", fig1_model()),
        (
            "gauss-1d-2atom",
            gaussian_model(Mixture::new(vec![0.4, 0.6], vec![vec![-0.8], vec![0.7]]).unwrap(), vec![0.0], 1.5, 0.05),
        ),
        (
            "gauss-2d-2atom",
            gaussian_model(
                Mixture::new(vec![0.5, 0.5], vec![vec![-0.6, 0.2], vec![0.5, -0.3]]).unwrap(),
                vec![0.0, 0.0],
                1.0,
                0.2,
            ),
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, model) in &models {
        let nbhd = build_neighborhoods(model.reference(), model.domain(), 0, &NeighborhoodOptions::default()).unwrap();
        let basis = LocalBasis::new(model, &nbhd).unwrap();
        let qmax = 2 * model.reference().len() + 3;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut worst_ell, mut worst_n, mut top_q) = (0.0f64, 0.0f64, 0);
        for _ in 0..500 {
            let f = random_mixture(&mut rng, model, qmax);
            top_q = top_q.max(f.len());
            let c = mixture_to_coeffs(&f, model.reference(), &nbhd, model.domain());
            let l = ell(model, &basis, &nbhd, &c).unwrap();
            let r = relative_values(model, &model.mixture_values(&f).unwrap());
            let e = l.values().iter().zip(&r).map(|(a, b)| (a - b).abs() / b.abs().max(1.0)).fold(0.0, f64::max);
            worst_ell = worst_ell.max(e);
            worst_n = worst_n.max((pseudo_n(&c, &nbhd) - display_n(model, &nbhd, &f)).abs());
        }
        pass &= worst_ell <= ELL_TOL && worst_n <= PSEUDO_N_TOL && top_q <= qmax;
        parts.push(format!("{name}: max|ℓ−r|/max(1,|r|) {worst_ell:.1e}, max|N−display| {worst_n:.1e}, q ≤ {top_q}"));
    }
    (pass, parts.join("; "))
}

fn envelopes() -> (bool, String) {
    let ctx = context("fig1.toml");
    let model = ctx.model().unwrap();
    let nbhd = ctx.neighborhoods(&model).unwrap();
    let cstar = ctx.cstar(&model, &nbhd).unwrap();
    let env = Envelopes::compute(&model, &ctx.config.envelopes).unwrap();
    let s = envelope_s(&model, &env, cstar).unwrap();
    let sv = s.s.values();
    let within = |v: f64, b: f64| v <= b * (1.0 + RTOL_ENV) + ATOL_ENV;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut env_n, mut env_bad) = (0, 0);
    while env_n < 200 {
        let f = random_mixture(&mut rng, &model, 5);
        let fv = model.mixture_values(&f).unwrap();
        if hellinger_values(&model, &fv, model.fstar()) <= ATOL_H {
            continue;
        }
        env_n += 1;
        let d = normalized_deviation(&model, &f).unwrap();
        let r = relative_values(&model, &fv);
        let r1 = model.lp_norm_values(&r, 1.0).unwrap();
        let ok = d.values().iter().zip(s.d.values()).all(|(x, b)| within(x.abs(), *b))
            && r.iter().zip(sv).all(|(x, b)| within(x.abs() / r1, *b));
        env_bad += usize::from(!ok);
    }
    let (mut chi_n, mut chi_bad) = (0, 0);
    while chi_n < 200 {
        let f = random_mixture(&mut rng, &model, 5);
        let fv = model.mixture_values(&f).unwrap();
        let h = hellinger_values(&model, &fv, model.fstar());
        if h <= ATOL_H || h > 0.3 {
            continue;
        }
        chi_n += 1;
        let g = chi2_normalization_gap(&model, &f, &s).unwrap();
        chi_bad += usize::from(!g.gap.values().iter().zip(g.bound.values()).all(|(x, b)| within(*x, *b)));
    }
    let mctx = MixtureContext::new(model, nbhd, &env, cstar).unwrap();
    let model = &mctx.model;
    let (mut der_n, mut der_bad, mut rank_bad) = (0, 0, 0);
    while der_n < 200 {
        let f = random_mixture(&mut rng, model, 5);
        let fv = model.mixture_values(&f).unwrap();
        let h = hellinger_values(model, &fv, model.fstar());
        if h <= ATOL_H || h > 0.3 {
            continue;
        }
        der_n += 1;
        let a = score_approximation(&mctx, &f, h).unwrap();
        let r = relative_values(model, &fv);
        let chi = model.lp_norm_values(&r, 2.0).unwrap();
        let ok = r.iter().zip(&a.ell).zip(&a.error_bound).all(|((x, l), b)| within((x / chi - l).abs(), *b));
        der_bad += usize::from(!ok);
        let cap = f.len().min(model.dim() * model.reference().len());
        rank_bad += usize::from(a.ranks().iter().sum::<usize>() > cap);
    }
    let pass = env_bad == 0 && chi_bad == 0 && der_bad == 0 && rank_bad == 0;
    let detail = format!(
        "ĉ = {cstar:.5}; S/D envelope violations {env_bad}/{env_n}; chi-square gap violations {chi_bad}/{chi_n}; \
         score bound violations {der_bad}/{der_n}, rank violations {rank_bad}/{der_n}"
    );
    (pass, detail)
}

fn slicing() -> (bool, String) {
    let ctx = context("fig1.toml");
    let t = Instant::now();
    let s = run_slice(&ctx).unwrap().summary;
    let secs = t.elapsed().as_secs_f64();
    let inst_ok = s.instances.len() == 20 && s.instances.iter().all(|r| r.sound());
    let open: Vec<_> = s.hilbert.iter().filter(|h| h.open).collect();
    let closed: Vec<_> = s.hilbert.iter().filter(|h| !h.open).collect();
    let open_ok = open.iter().all(|h| h.covered && h.count <= h.claim && h.count == h.lower_bound);
    let closed_excess = closed.iter().filter(|h| h.count > h.claim).count();
    let mix_ok = s.mixture.as_ref().is_some_and(|m| m.covered == m.samples && m.max_size <= m.delta * (1.0 + 1e-9));
    let pass = s.ball.sound()
        && s.ball.samples == 10_000
        && inst_ok
        && open_ok
        && s.hilbert_d0_lower >= s.hilbert_k
        && s.rejected_ratio_error.contains("ρ/δ")
        && mix_ok
        && secs <= 60.0;
    let detail = format!(
        "ball: {}/{} covered, max size {:.3} ≤ ρ = {}, count {} ≤ bound {:.3e}; 20 instances sound: {inst_ok}; \
         Hilbert K = {} open-ball counts = k−r+1 over {} cases: {open_ok} (closed ball needs k−r+2 in {}/{} cases); \
         D₀ lower bound {} at ε = {}; mixture cover coverage {}; {secs:.1}s",
        s.ball.covered,
        s.ball.samples,
        s.ball.max_size,
        s.ball.rho,
        s.ball.count,
        s.ball.count_bound,
        s.hilbert_k,
        open.len(),
        closed_excess,
        closed.len(),
        s.hilbert_d0_lower,
        s.hilbert_eps,
        s.mixture.as_ref().map_or("missing".into(), |m| format!("{}/{}", m.covered, m.samples)),
    );
    (pass, detail)
}

fn entropy() -> (bool, String) {
    let ctx = context("fig1.toml");
    let t = Instant::now();
    let s = run_entropy(&ctx).unwrap().summary;
    let secs = t.elapsed().as_secs_f64();
    let ladder = s.rows.iter().filter(|r| r.kind == "construction").count();
    let pass = ladder == 4
        && s.q == 2
        && s.construction_slope <= s.exponent_bound * (1.0 + SLOPE_RTOL)
        && s.greedy_slope >= 2.0
        && secs <= 1800.0;
    let detail = format!(
        "construction slope {:.3} ≤ {} (R² {:.4}); greedy slope {:.3} ≥ 2 (R² {:.4}) from {} samples; {secs:.1}s",
        s.construction_slope, s.exponent_bound, s.construction_r2, s.greedy_slope, s.greedy_r2, s.samples
    );
    (pass, detail)
}

fn gauss() -> (bool, String) {
    let ctx = context("gauss.toml");
    let s = run_gauss(&ctx).unwrap().summary;
    let pass = s.all_finite && s.r2.iter().all(|r| *r >= R2_MIN) && s.rows.len() == 5;
    let detail = format!(
        "R² of ln‖H_k‖ vs T²: {:?}; slopes {:?}; increasing in T: {}",
        s.r2.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>(),
        s.slopes.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>(),
        s.increasing
    );
    (pass, detail)
}

type Criterion = (usize, &'static str, fn() -> (bool, String));

fn main() {
    let criteria: [Criterion; 7] = [
        (1, "figure reproduction", figure1),
        (2, "two-sided comparison", comparison),
        (3, "decomposition identity", identity),
        (4, "envelope suite", envelopes),
        (5, "slicing soundness", slicing),
        (6, "entropy slopes", entropy),
        (7, "gaussian envelope scaling", gauss),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut verdicts = Vec::new();
    for (id, name, run) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || f == &id.to_string()) {
            continue;
        }
        let t = Instant::now();
        let (pass, detail) = run();
        let v = Verdict {
            id,
            name,
            pass,
            detail,
            elapsed: t.elapsed(),
        };
        println!(
            "acceptance {} [{}] {}: {} ({:.1}s)",
            v.id,
            if v.pass { "PASS" } else { "FAIL" },
            v.name,
            v.detail,
            v.elapsed.as_secs_f64()
        );
        verdicts.push(v);
    }
    let failed = verdicts.iter().filter(|v| !v.pass).count();
    println!("acceptance: {} of {} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
