//! Divergences between mixtures, normalized deviations and the S envelope.

use crate::density::{Envelopes, GridFunction, Mixture, Model};
use crate::error::{Error, Result};
use crate::tol::ATOL_H;

/// Hellinger distance `(∫(√f−√g)² dμ)^{1/2}`.
pub fn hellinger(model: &Model, f: &Mixture, g: &Mixture) -> Result<f64> {
    let a = model.mixture_values(f)?;
    let b = model.mixture_values(g)?;
    Ok(hellinger_values(model, &a, &b))
}

/// Hellinger distance between two density vectors on the model grid.
pub fn hellinger_values(model: &Model, f: &[f64], g: &[f64]) -> f64 {
    f.iter()
        .zip(g)
        .zip(model.grid().weights())
        .map(|((a, b), w)| {
            let d = a.sqrt() - b.sqrt();
            w * d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Total variation `∫|f−g| dμ`.
pub fn total_variation(model: &Model, f: &Mixture, g: &Mixture) -> Result<f64> {
    let a = model.mixture_values(f)?;
    let b = model.mixture_values(g)?;
    Ok(a.iter()
        .zip(&b)
        .zip(model.grid().weights())
        .map(|((x, y), w)| w * (x - y).abs())
        .sum())
}

/// `χ²(f‖f*) = ‖f/f* − 1‖₂²`.
pub fn chi_square(model: &Model, f: &Mixture) -> Result<f64> {
    let a = model.mixture_values(f)?;
    let r = relative_values(model, &a);
    Ok(model.lp_norm_values(&r, 2.0)?.powi(2))
}

/// `f/f* − 1` at the nodes.
pub fn relative_values(model: &Model, f: &[f64]) -> Vec<f64> {
    f.iter().zip(model.fstar()).map(|(a, s)| a / s - 1.0).collect()
}

/// `d_f` values and `h(f, f*)` from density values.
pub fn deviation_values(model: &Model, f: &[f64]) -> Result<(Vec<f64>, f64)> {
    let root: Vec<f64> = f
        .iter()
        .zip(model.fstar())
        .map(|(a, s)| (a / s).sqrt() - 1.0)
        .collect();
    let h = model.lp_norm_values(&root, 2.0)?;
    if h <= ATOL_H {
        return Err(Error::DegenerateInput(format!(
            "h(f, f*) = {h:e} is below the identity threshold"
        )));
    }
    Ok((root.into_iter().map(|v| v / h).collect(), h))
}

/// `d_f = (√(f/f*) − 1)/‖√(f/f*) − 1‖₂`.
pub fn normalized_deviation(model: &Model, f: &Mixture) -> Result<GridFunction> {
    let a = model.mixture_values(f)?;
    let (d, _) = deviation_values(model, &a)?;
    model.function(d)
}

/// `S = (H₀+H₁+H₂)·d/ĉ*` and `D = 2S`.
#[derive(Clone, Debug)]
pub struct SEnvelope {
    pub s: GridFunction,
    pub d: GridFunction,
    pub cstar: f64,
}

pub fn envelope_s(model: &Model, env: &Envelopes, cstar: f64) -> Result<SEnvelope> {
    if !(cstar > 0.0 && cstar.is_finite()) {
        return Err(Error::Precondition(format!("ĉ* = {cstar} must be positive")));
    }
    let (h0, h1, h2) = (env.get(0)?, env.get(1)?, env.get(2)?);
    let scale = model.dim() as f64 / cstar;
    let s = h0.add(h1)?.add(h2)?.scale(scale);
    if s.fingerprint() != model.fingerprint() {
        return Err(Error::Shape("envelopes computed on another grid".into()));
    }
    let d = s.scale(2.0);
    Ok(SEnvelope { s, d, cstar })
}

/// Pointwise gap between Hellinger and chi-square normalizations, with its bound.
#[derive(Clone, Debug)]
pub struct Chi2Gap {
    pub gap: GridFunction,
    pub bound: GridFunction,
    pub h: f64,
}

/// `|d_f − (f/f*−1)/√χ²|` and `{4‖S‖₄²S + 2S²}·h`.
pub fn chi2_normalization_gap(model: &Model, f: &Mixture, s: &SEnvelope) -> Result<Chi2Gap> {
    let a = model.mixture_values(f)?;
    let (d, h) = deviation_values(model, &a)?;
    let r = relative_values(model, &a);
    let chi = model.lp_norm_values(&r, 2.0)?;
    let s4 = model.lp_norm(&s.s, 4.0)?;
    let gap = d.iter().zip(&r).map(|(x, y)| (x - y / chi).abs()).collect();
    let bound = s
        .s
        .values()
        .iter()
        .map(|v| (4.0 * s4 * s4 * v + 2.0 * v * v) * h)
        .collect();
    Ok(Chi2Gap {
        gap: model.function(gap)?,
        bound: model.function(bound)?,
        h,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{LocationFamily, ParameterDomain, QuadratureGrid};
    use std::sync::Arc;

    fn model() -> Model {
        let fam = LocationFamily::gaussian(1).unwrap();
        let dom = ParameterDomain::new(vec![0.0], 2.0).unwrap();
        let g = QuadratureGrid::trapezoid_spacing(&[-14.0], &[14.0], 0.05).unwrap();
        Model::new(fam, dom, Mixture::point(&[0.0]), Arc::new(g)).unwrap()
    }

    #[test]
    fn gaussian_hellinger_closed_form() {
        let m = model();
        let h = hellinger(&m, &Mixture::point(&[1.0]), &Mixture::point(&[0.0])).unwrap();
        let exact = (2.0 * (1.0 - (-1.0_f64 / 8.0).exp())).sqrt();
        assert!((h - exact).abs() < 1e-6);
    }

    #[test]
    fn gaussian_chi_square_closed_form() {
        let m = model();
        let c = chi_square(&m, &Mixture::point(&[0.1])).unwrap();
        assert!((c - (0.01_f64.exp() - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn identity_is_degenerate() {
        let m = model();
        assert!(matches!(
            normalized_deviation(&m, &Mixture::point(&[0.0])),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn deviation_has_unit_norm() {
        let m = model();
        let f = Mixture::new(vec![0.3, 0.7], vec![vec![-0.5], vec![0.4]]).unwrap();
        let d = normalized_deviation(&m, &f).unwrap();
        assert!((m.lp_norm(&d, 2.0).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn nonpositive_cstar_rejected() {
        let m = model();
        let h = vec![GridFunction::constant(1.0, m.len(), m.fingerprint()); 4];
        let env = Envelopes::from_parts(h).unwrap();
        assert!(matches!(envelope_s(&m, &env, 0.0), Err(Error::Precondition(_))));
        let s = envelope_s(&m, &env, 0.5).unwrap();
        let s2 = envelope_s(&m, &env, 0.25).unwrap();
        assert!(s.s.values().iter().zip(s2.s.values()).all(|(a, b)| (2.0 * a - b).abs() < 1e-15));
    }
}
