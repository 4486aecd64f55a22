//! The fixed setting of a run: family, domain, reference mixture and grid.

use std::sync::Arc;

use crate::density::{
    GridFunction, LocationFamily, Mixture, ParameterDomain, QuadratureGrid,
};
use crate::error::{Error, Result};
use crate::tol::RTOL_QUAD;

/// Family, parameter domain, nondegenerate reference `f*` and the shared grid.
///
/// Caches `f*(x_k)` and the measure weights `w_k f*(x_k)` of `L^p(f* dμ)`.
#[derive(Clone, Debug)]
pub struct Model {
    family: LocationFamily,
    domain: ParameterDomain,
    reference: Mixture,
    grid: Arc<QuadratureGrid>,
    fstar: Vec<f64>,
    measure: Vec<f64>,
}

impl Model {
    pub fn new(
        family: LocationFamily,
        domain: ParameterDomain,
        reference: Mixture,
        grid: Arc<QuadratureGrid>,
    ) -> Result<Self> {
        let d = family.dim();
        if domain.dim() != d || reference.dim() != d || grid.dim() != d {
            return Err(Error::Shape(format!(
                "dimensions differ: family {d}, domain {}, reference {}, grid {}",
                domain.dim(),
                reference.dim(),
                grid.dim()
            )));
        }
        reference.check_domain(&domain)?;
        reference.check_nondegenerate()?;
        let fstar = mixture_on_grid(&family, &reference, &grid);
        if let Some(k) = fstar.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::Numeric(format!(
                "reference density underflows at grid node {:?}; shrink the box",
                grid.node(k)
            )));
        }
        let measure: Vec<f64> = fstar.iter().zip(grid.weights()).map(|(f, w)| f * w).collect();
        let mass: f64 = measure.iter().sum();
        let expect = family.mass();
        if (mass - expect).abs() > RTOL_QUAD * expect {
            return Err(Error::Config(format!(
                "quadrature sanity failed: grid mass {mass} vs family mass {expect}"
            )));
        }
        Ok(Self {
            family,
            domain,
            reference,
            grid,
            fstar,
            measure,
        })
    }

    /// Same setting with a different parameter domain.
    pub fn with_domain(&self, domain: ParameterDomain) -> Result<Self> {
        Self::new(
            self.family.clone(),
            domain,
            self.reference.clone(),
            self.grid.clone(),
        )
    }

    pub fn family(&self) -> &LocationFamily {
        &self.family
    }

    pub fn domain(&self) -> &ParameterDomain {
        &self.domain
    }

    pub fn reference(&self) -> &Mixture {
        &self.reference
    }

    pub fn grid(&self) -> &Arc<QuadratureGrid> {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn fingerprint(&self) -> u64 {
        self.grid.fingerprint()
    }

    /// `f*(x_k)`.
    pub fn fstar(&self) -> &[f64] {
        &self.fstar
    }

    /// `w_k f*(x_k)`: integration weights of `L^p(f* dμ)`.
    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    /// Wraps node values as a grid function on this model's grid.
    pub fn function(&self, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != self.len() {
            return Err(Error::Shape(format!(
                "{} values for {} grid nodes",
                values.len(),
                self.len()
            )));
        }
        GridFunction::new(values, self.fingerprint())
    }

    /// `f_θ(x_k)` for all nodes.
    pub fn atom_values(&self, theta: &[f64]) -> Vec<f64> {
        let d = self.dim();
        self.grid
            .nodes()
            .chunks_exact(d)
            .map(|x| self.family.eval(x, theta))
            .collect()
    }

    /// Mixture density at the nodes; atoms must lie in the domain.
    pub fn mixture_values(&self, m: &Mixture) -> Result<Vec<f64>> {
        m.check_domain(&self.domain)?;
        Ok(mixture_on_grid(&self.family, m, &self.grid))
    }

    /// `(∫ |g|^p f* dμ)^{1/p}`; `p = ∞` gives the max over nodes.
    pub fn lp_norm(&self, g: &GridFunction, p: f64) -> Result<f64> {
        if g.fingerprint() != self.fingerprint() || g.len() != self.len() {
            return Err(Error::Shape("function lives on a different grid".into()));
        }
        self.lp_norm_values(g.values(), p)
    }

    pub fn lp_norm_values(&self, g: &[f64], p: f64) -> Result<f64> {
        if g.len() != self.len() {
            return Err(Error::Shape("value vector length differs from grid".into()));
        }
        if !(p >= 1.0) {
            return Err(Error::Config(format!("norm exponent {p} < 1")));
        }
        let v = if p.is_infinite() {
            g.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
        } else if p == 1.0 {
            g.iter().zip(&self.measure).map(|(v, w)| v.abs() * w).sum()
        } else if p == 2.0 {
            g.iter()
                .zip(&self.measure)
                .map(|(v, w)| v * v * w)
                .sum::<f64>()
                .sqrt()
        } else {
            g.iter()
                .zip(&self.measure)
                .map(|(v, w)| v.abs().powf(p) * w)
                .sum::<f64>()
                .powf(1.0 / p)
        };
        if !v.is_finite() {
            return Err(Error::Numeric(format!("L^{p} norm is not finite")));
        }
        Ok(v)
    }
}

pub(crate) fn mixture_on_grid(family: &LocationFamily, m: &Mixture, grid: &QuadratureGrid) -> Vec<f64> {
    let d = grid.dim();
    grid.nodes()
        .chunks_exact(d)
        .map(|x| {
            (0..m.len())
                .map(|j| m.weights()[j] * family.eval(x, m.atom(j)))
                .sum()
        })
        .collect()
}

/// Mixture density on the grid.
pub fn eval_mixture(model: &Model, m: &Mixture) -> Result<GridFunction> {
    let v = model.mixture_values(m)?;
    model.function(v)
}

/// Entries of the order-`order` θ-derivative tensor of `f_θ`, divided by `f*`.
pub fn eval_derivative_ratio(model: &Model, theta: &[f64], order: usize) -> Result<Vec<GridFunction>> {
    if !model.domain().contains(theta) {
        return Err(Error::DomainViolation(format!("θ = {theta:?} outside the domain")));
    }
    let d = model.dim();
    let len = d.pow(order as u32);
    let mut cols = vec![Vec::with_capacity(model.len()); len];
    let mut buf = vec![0.0; len];
    for (k, x) in model.grid().nodes().chunks_exact(d).enumerate() {
        model.family().theta_derivative(x, theta, order, &mut buf)?;
        for (c, v) in cols.iter_mut().zip(&buf) {
            c.push(v / model.fstar()[k]);
        }
    }
    cols.into_iter().map(|c| model.function(c)).collect()
}

/// Truncation box around `Θ` and the reference atoms, wide enough for envelope tails.
pub fn default_box(
    family: &LocationFamily,
    domain: &ParameterDomain,
    reference: &Mixture,
) -> (Vec<f64>, Vec<f64>) {
    let d = domain.dim();
    let sigma = family.length_scale();
    let reach = (0..reference.len())
        .map(|j| crate::density::mixture::dist(reference.atom(j), domain.center()))
        .fold(0.0_f64, f64::max)
        + domain.radius();
    let pad = 4.0 * reach + 9.0 * sigma;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for a in 0..d {
        let c = domain.center()[a];
        lo[a] = lo[a].min(c - domain.radius());
        hi[a] = hi[a].max(c + domain.radius());
        for j in 0..reference.len() {
            lo[a] = lo[a].min(reference.atom(j)[a]);
            hi[a] = hi[a].max(reference.atom(j)[a]);
        }
        lo[a] -= pad;
        hi[a] += pad;
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian_model(t: f64) -> Model {
        let fam = LocationFamily::gaussian(1).unwrap();
        let dom = ParameterDomain::new(vec![0.0], t).unwrap();
        let reference = Mixture::point(&[0.0]);
        let (lo, hi) = default_box(&fam, &dom, &reference);
        let grid = QuadratureGrid::trapezoid_spacing(&lo, &hi, 0.1).unwrap();
        Model::new(fam, dom, reference, Arc::new(grid)).unwrap()
    }

    #[test]
    fn quadrature_sanity_holds_for_default_box() {
        let m = gaussian_model(1.0);
        let mass: f64 = m.measure().iter().sum();
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn coarse_grid_fails_sanity() {
        let fam = LocationFamily::gaussian(1).unwrap();
        let dom = ParameterDomain::new(vec![0.0], 1.0).unwrap();
        let grid = QuadratureGrid::trapezoid(&[-2.0], &[2.0], &[5]).unwrap();
        let err = Model::new(fam, dom, Mixture::point(&[0.0]), Arc::new(grid)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn fig1_mass_is_not_one() {
        let fam = LocationFamily::fig1(1).unwrap();
        let dom = ParameterDomain::new(vec![0.5], 0.5).unwrap();
        let grid = QuadratureGrid::trapezoid_spacing(&[-4.0], &[5.0], 0.05).unwrap();
        let m = Model::new(fam, dom, Mixture::point(&[0.5]), Arc::new(grid)).unwrap();
        let mass: f64 = m.measure().iter().sum();
        assert!((mass - (std::f64::consts::PI / 2.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn norms_of_constants() {
        let m = gaussian_model(1.0);
        let one = GridFunction::constant(1.0, m.len(), m.fingerprint());
        for p in [1.0, 2.0, 4.0, f64::INFINITY] {
            assert!((m.lp_norm(&one, p).unwrap() - 1.0).abs() < 1e-9);
        }
        let other = GridFunction::constant(1.0, m.len(), m.fingerprint() ^ 1);
        assert!(matches!(m.lp_norm(&other, 2.0), Err(Error::Shape(_))));
    }

    #[test]
    fn mixture_outside_domain_rejected() {
        let m = gaussian_model(1.0);
        let far = Mixture::point(&[1.5]);
        assert!(matches!(eval_mixture(&m, &far), Err(Error::DomainViolation(_))));
        assert!(matches!(
            eval_derivative_ratio(&m, &[1.5], 1),
            Err(Error::DomainViolation(_))
        ));
    }

    #[test]
    fn derivative_ratio_at_reference_is_score() {
        let m = gaussian_model(1.0);
        let r = eval_derivative_ratio(&m, &[0.0], 1).unwrap();
        for (k, x) in m.grid().nodes().iter().enumerate() {
            assert!((r[0].values()[k] - x).abs() < 1e-9 * (1.0 + x.abs()));
        }
    }
}
