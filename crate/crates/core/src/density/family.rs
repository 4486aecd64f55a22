//! Location families `f_θ(x) = f₀(x − θ)` and their parameter derivatives.
//!
//! Derivatives are taken with respect to the location parameter, so
//! `∂^k/∂θ^k f_θ(x) = (−1)^k ∂^k f₀(x − θ)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Base density `f₀`.
#[derive(Clone, Debug)]
pub enum BaseDensity {
    /// `scale · exp(−precision · ‖z‖² / 2)`.
    GaussianKernel { precision: f64, scale: f64 },
    /// One-dimensional tabulated density with linear interpolation.
    Table(Arc<TabulatedDensity>),
}

/// A location family in `ℝ^d`.
#[derive(Clone, Debug)]
pub struct LocationFamily {
    dim: usize,
    base: BaseDensity,
    name: String,
}

impl LocationFamily {
    /// Standard Gaussian `(2π)^{−d/2} e^{−‖x‖²/2}`.
    pub fn gaussian(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            base: BaseDensity::GaussianKernel {
                precision: 1.0,
                scale: (2.0 * PI).powf(-(dim as f64) / 2.0),
            },
            name: "gaussian".into(),
        })
    }

    /// The unnormalized kernel `e^{−2‖x‖²}` used in the two-atom figure setup.
    pub fn fig1(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            base: BaseDensity::GaussianKernel {
                precision: 4.0,
                scale: 1.0,
            },
            name: "fig1".into(),
        })
    }

    pub fn table(table: TabulatedDensity) -> Self {
        Self {
            dim: 1,
            base: BaseDensity::Table(Arc::new(table)),
            name: "table".into(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base(&self) -> &BaseDensity {
        &self.base
    }

    /// Highest available derivative order.
    pub fn smoothness_order(&self) -> usize {
        3
    }

    /// Characteristic length scale of `f₀`, used to size quadrature boxes.
    pub fn length_scale(&self) -> f64 {
        match &self.base {
            BaseDensity::GaussianKernel { precision, .. } => 1.0 / precision.sqrt(),
            BaseDensity::Table(t) => t.std_dev(),
        }
    }

    /// Total mass `∫ f₀ dμ` (1 for proper densities).
    pub fn mass(&self) -> f64 {
        match &self.base {
            BaseDensity::GaussianKernel { precision, scale } => {
                scale * (2.0 * PI / precision).powf(self.dim as f64 / 2.0)
            }
            BaseDensity::Table(t) => t.mass(),
        }
    }

    /// `f₀(z)`.
    pub fn f0(&self, z: &[f64]) -> f64 {
        match &self.base {
            BaseDensity::GaussianKernel { precision, scale } => {
                scale * (-0.5 * precision * norm_sq(z)).exp()
            }
            BaseDensity::Table(t) => t.eval(z[0])[0],
        }
    }

    /// `f_θ(x) = f₀(x − θ)`.
    #[inline]
    pub fn eval(&self, x: &[f64], theta: &[f64]) -> f64 {
        match &self.base {
            BaseDensity::GaussianKernel { precision, scale } => {
                let mut s = 0.0;
                for (a, b) in x.iter().zip(theta) {
                    let z = a - b;
                    s += z * z;
                }
                scale * (-0.5 * precision * s).exp()
            }
            BaseDensity::Table(t) => t.eval(x[0] - theta[0])[0],
        }
    }

    /// Writes the order-`order` θ-derivative tensor of `f_θ(x)` into `out`
    /// (row-major, length `d^order`).
    pub fn theta_derivative(
        &self,
        x: &[f64],
        theta: &[f64],
        order: usize,
        out: &mut [f64],
    ) -> Result<()> {
        if order > self.smoothness_order() {
            return Err(Error::Capability(format!(
                "derivative of order {order} exceeds smoothness order {}",
                self.smoothness_order()
            )));
        }
        let d = self.dim;
        let len = d.pow(order as u32);
        if out.len() != len {
            return Err(Error::Shape(format!(
                "derivative buffer has {} slots, expected {len}",
                out.len()
            )));
        }
        match &self.base {
            BaseDensity::GaussianKernel { precision, scale } => {
                let a = *precision;
                let mut z = [0.0; 3];
                let mut zz = 0.0;
                for i in 0..d {
                    z[i] = x[i] - theta[i];
                    zz += z[i] * z[i];
                }
                let g = scale * (-0.5 * a * zz).exp();
                let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
                match order {
                    0 => out[0] = g,
                    1 => {
                        for i in 0..d {
                            out[i] = a * z[i] * g;
                        }
                    }
                    2 => {
                        for i in 0..d {
                            for j in 0..d {
                                out[i * d + j] = (a * a * z[i] * z[j] - a * delta(i, j)) * g;
                            }
                        }
                    }
                    _ => {
                        for i in 0..d {
                            for j in 0..d {
                                for k in 0..d {
                                    let cubic = a * a * a * z[i] * z[j] * z[k];
                                    let lin = a
                                        * a
                                        * (delta(i, j) * z[k] + delta(i, k) * z[j] + delta(j, k) * z[i]);
                                    out[(i * d + j) * d + k] = (cubic - lin) * g;
                                }
                            }
                        }
                    }
                }
            }
            BaseDensity::Table(t) => {
                let v = t.eval(x[0] - theta[0]);
                let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
                out[0] = sign * v[order];
            }
        }
        Ok(())
    }

    /// Largest absolute entry of the order-`order` θ-derivative tensor.
    pub fn max_abs_derivative(&self, x: &[f64], theta: &[f64], order: usize) -> Result<f64> {
        let len = self.dim.pow(order as u32);
        let mut buf = [0.0; 8];
        self.theta_derivative(x, theta, order, &mut buf[..len])?;
        Ok(buf[..len].iter().fold(0.0_f64, |m, v| m.max(v.abs())))
    }
    /// `max |D_k f_θ(x)|` for `k = 0..=3` in one pass.
    pub fn max_abs_all_orders(&self, x: &[f64], theta: &[f64]) -> [f64; 4] {
        match &self.base {
            BaseDensity::GaussianKernel { precision, scale } => {
                let a = *precision;
                let d = self.dim;
                let mut z = [0.0; 3];
                let mut zz = 0.0;
                for i in 0..d {
                    z[i] = x[i] - theta[i];
                    zz += z[i] * z[i];
                }
                let g = scale * (-0.5 * a * zz).exp();
                let mut m = [g, 0.0, 0.0, 0.0];
                for i in 0..d {
                    m[1] = m[1].max((a * z[i]).abs());
                    for j in 0..d {
                        let dij = if i == j { 1.0 } else { 0.0 };
                        m[2] = m[2].max((a * a * z[i] * z[j] - a * dij).abs());
                        for k in 0..d {
                            let djk = if j == k { 1.0 } else { 0.0 };
                            let dik = if i == k { 1.0 } else { 0.0 };
                            let v = a * a * a * z[i] * z[j] * z[k]
                                - a * a * (dij * z[k] + dik * z[j] + djk * z[i]);
                            m[3] = m[3].max(v.abs());
                        }
                    }
                }
                m[1] *= g;
                m[2] *= g;
                m[3] *= g;
                m
            }
            BaseDensity::Table(t) => {
                let v = t.eval(x[0] - theta[0]);
                [v[0].abs(), v[1].abs(), v[2].abs(), v[3].abs()]
            }
        }
    }
}

impl fmt::Display for LocationFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(d={})", self.name, self.dim)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 || dim > 3 {
        return Err(Error::Config(format!("dimension {dim} not supported (1..=3)")));
    }
    Ok(())
}

#[inline]
pub(crate) fn norm_sq(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum()
}

/// A one-dimensional density given by a table of `(x, f₀(x))` pairs.
///
/// Values and their first three derivatives (by finite differences on the
/// table) are linearly interpolated. Outside the table the density is
/// continued by the exponential matching the end segment in log scale.
#[derive(Clone, Debug)]
pub struct TabulatedDensity {
    xs: Vec<f64>,
    // [value, d1, d2, d3] per node
    derivs: Vec<[f64; 4]>,
    left_slope: f64,
    right_slope: f64,
}

impl TabulatedDensity {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Parse("table columns differ in length".into()));
        }
        if xs.len() < 4 {
            return Err(Error::Parse("table needs at least 4 rows".into()));
        }
        for w in xs.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Parse("table abscissae must be strictly increasing".into()));
            }
        }
        if xs.iter().any(|x| !x.is_finite()) {
            return Err(Error::Parse("non-finite abscissa".into()));
        }
        if ys.iter().any(|y| !(y.is_finite() && *y > 0.0)) {
            return Err(Error::Parse("table values must be finite and positive".into()));
        }
        let n = xs.len();
        let left_slope = (ys[1].ln() - ys[0].ln()) / (xs[1] - xs[0]);
        let right_slope = (ys[n - 1].ln() - ys[n - 2].ln()) / (xs[n - 1] - xs[n - 2]);
        if !(left_slope > 0.0 && right_slope < 0.0) {
            return Err(Error::Parse("tabulated density must decay at both ends".into()));
        }
        let d1 = differentiate(&xs, &ys);
        let d2 = differentiate(&xs, &d1);
        let d3 = differentiate(&xs, &d2);
        let derivs = (0..n).map(|i| [ys[i], d1[i], d2[i], d3[i]]).collect();
        Ok(Self {
            xs,
            derivs,
            left_slope,
            right_slope,
        })
    }

    /// Parses whitespace- or comma-separated `x y` rows; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(Error::Parse(format!(
                    "line {}: expected two columns, found {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            xs.push(parse(fields[0])?);
            ys.push(parse(fields[1])?);
        }
        Self::new(xs, ys)
    }

    /// `[f₀, f₀', f₀'', f₀''']` at `z`.
    pub fn eval(&self, z: f64) -> [f64; 4] {
        let n = self.xs.len();
        if z <= self.xs[0] {
            let v = self.derivs[0][0] * (self.left_slope * (z - self.xs[0])).exp();
            let s = self.left_slope;
            return [v, s * v, s * s * v, s * s * s * v];
        }
        if z >= self.xs[n - 1] {
            let v = self.derivs[n - 1][0] * (self.right_slope * (z - self.xs[n - 1])).exp();
            let s = self.right_slope;
            return [v, s * v, s * s * v, s * s * s * v];
        }
        let i = match self.xs.binary_search_by(|x| x.partial_cmp(&z).unwrap()) {
            Ok(i) => return self.derivs[i],
            Err(i) => i - 1,
        };
        let t = (z - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        let a = self.derivs[i];
        let b = self.derivs[i + 1];
        [
            a[0] + t * (b[0] - a[0]),
            a[1] + t * (b[1] - a[1]),
            a[2] + t * (b[2] - a[2]),
            a[3] + t * (b[3] - a[3]),
        ]
    }

    /// Trapezoid mass over the table plus the exact exponential tails.
    pub fn mass(&self) -> f64 {
        let n = self.xs.len();
        let mut m = 0.0;
        for i in 0..n - 1 {
            m += 0.5 * (self.derivs[i][0] + self.derivs[i + 1][0]) * (self.xs[i + 1] - self.xs[i]);
        }
        m + self.derivs[0][0] / self.left_slope - self.derivs[n - 1][0] / self.right_slope
    }

    fn std_dev(&self) -> f64 {
        let n = self.xs.len();
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for i in 0..n - 1 {
            let w = 0.5 * (self.derivs[i][0] + self.derivs[i + 1][0]) * (self.xs[i + 1] - self.xs[i]);
            let x = 0.5 * (self.xs[i] + self.xs[i + 1]);
            m0 += w;
            m1 += w * x;
            m2 += w * x * x;
        }
        let mean = m1 / m0;
        (m2 / m0 - mean * mean).max(1e-12).sqrt()
    }
}

/// Nonuniform three-point differentiation, one-sided at the ends.
fn differentiate(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut out = vec![0.0; n];
    out[0] = (ys[1] - ys[0]) / (xs[1] - xs[0]);
    out[n - 1] = (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2]);
    for i in 1..n - 1 {
        let h0 = xs[i] - xs[i - 1];
        let h1 = xs[i + 1] - xs[i];
        out[i] = (ys[i + 1] * h0 * h0 - ys[i - 1] * h1 * h1 + ys[i] * (h1 * h1 - h0 * h0))
            / (h0 * h1 * (h0 + h1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn central_fd(family: &LocationFamily, x: &[f64], theta: &[f64], order: usize) -> Vec<f64> {
        // Differentiates the order-(k−1) tensor once more in θ.
        let d = family.dim();
        let h = 1e-5;
        let len = d.pow(order as u32 - 1);
        let mut out = vec![0.0; len * d];
        for a in 0..d {
            let mut tp = theta.to_vec();
            let mut tm = theta.to_vec();
            tp[a] += h;
            tm[a] -= h;
            let mut vp = vec![0.0; len];
            let mut vm = vec![0.0; len];
            family.theta_derivative(x, &tp, order - 1, &mut vp).unwrap();
            family.theta_derivative(x, &tm, order - 1, &mut vm).unwrap();
            for idx in 0..len {
                out[idx * d + a] = (vp[idx] - vm[idx]) / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn gaussian_at_origin() {
        let fam = LocationFamily::gaussian(1).unwrap();
        assert!((fam.eval(&[0.0], &[0.0]) - (2.0 * PI).powf(-0.5)).abs() < 1e-15);
        assert!((fam.mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fig1_kernel_peak_is_one() {
        let fam = LocationFamily::fig1(1).unwrap();
        assert_eq!(fam.eval(&[0.5], &[0.5]), 1.0);
        assert!((fam.mass() - (PI / 2.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn first_derivative_is_odd_at_center() {
        let fam = LocationFamily::gaussian(1).unwrap();
        let mut out = [0.0];
        fam.theta_derivative(&[0.0], &[0.0], 1, &mut out).unwrap();
        assert_eq!(out[0], 0.0);
    }

    #[test]
    fn unit_gaussian_score_matches_finite_difference() {
        let fam = LocationFamily::gaussian(1).unwrap();
        let mut out = [0.0];
        fam.theta_derivative(&[1.0], &[0.0], 1, &mut out).unwrap();
        let h = 1e-5;
        let fd = (fam.eval(&[1.0], &[h]) - fam.eval(&[1.0], &[-h])) / (2.0 * h);
        assert!((out[0] - fd).abs() <= 1e-4 * fd.abs());
        // (x − θ) f₀(x − θ) for unit variance.
        assert!((out[0] - fam.eval(&[1.0], &[0.0])).abs() < 1e-15);
    }

    #[test]
    fn hessian_is_symmetric_in_2d() {
        let fam = LocationFamily::gaussian(2).unwrap();
        let mut out = [0.0; 4];
        for (x, t) in [([0.3, -1.2], [0.1, 0.4]), ([2.0, 0.5], [-0.7, 0.0])] {
            fam.theta_derivative(&x, &t, 2, &mut out).unwrap();
            assert_eq!(out[1], out[2]);
        }
    }

    #[test]
    fn derivatives_agree_with_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for fam in [
            LocationFamily::gaussian(1).unwrap(),
            LocationFamily::gaussian(2).unwrap(),
            LocationFamily::fig1(1).unwrap(),
        ] {
            let d = fam.dim();
            for _ in 0..100 {
                let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
                let t: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                for order in 1..=3 {
                    let len = d.pow(order as u32);
                    let mut exact = vec![0.0; len];
                    fam.theta_derivative(&x, &t, order, &mut exact).unwrap();
                    let fd = central_fd(&fam, &x, &t, order);
                    let scale = exact.iter().fold(1e-3_f64, |m, v| m.max(v.abs()));
                    for (a, b) in exact.iter().zip(&fd) {
                        assert!(
                            (a - b).abs() <= RTOL * scale,
                            "{fam} order {order}: {a} vs {b}"
                        );
                    }
                }
            }
        }
    }
    const RTOL: f64 = crate::tol::RTOL_FD;

    #[test]
    fn order_above_smoothness_is_rejected() {
        let fam = LocationFamily::gaussian(1).unwrap();
        let mut out = [0.0; 1];
        assert!(matches!(
            fam.theta_derivative(&[0.0], &[0.0], 4, &mut out),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn table_reproduces_gaussian() {
        let xs: Vec<f64> = (0..=400).map(|i| -8.0 + 0.04 * i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (-0.5 * x * x).exp() / (2.0 * PI).sqrt()).collect();
        let t = TabulatedDensity::new(xs, ys).unwrap();
        let fam = LocationFamily::table(t);
        assert!((fam.mass() - 1.0).abs() < 1e-6);
        let g = LocationFamily::gaussian(1).unwrap();
        for x in [-1.3, 0.0, 0.77, 2.5] {
            assert!((fam.eval(&[x], &[0.0]) - g.eval(&[x], &[0.0])).abs() < 1e-3);
            let mut a = [0.0];
            let mut b = [0.0];
            fam.theta_derivative(&[x], &[0.0], 1, &mut a).unwrap();
            g.theta_derivative(&[x], &[0.0], 1, &mut b).unwrap();
            assert!((a[0] - b[0]).abs() < 5e-3);
        }
        // Exponential continuation stays positive far out.
        assert!(fam.eval(&[20.0], &[0.0]) > 0.0);
    }

    #[test]
    fn table_parse_errors() {
        assert!(TabulatedDensity::parse("0 1\n1 2\n").is_err());
        assert!(TabulatedDensity::parse("0 1\n0 2\n1 1\n2 0.5\n").is_err());
        assert!(TabulatedDensity::parse("0 1\n1 -2\n2 1\n3 0.5\n").is_err());
        assert!(TabulatedDensity::parse("0 0.1\n1 0.5\n2 0.3\n3 x\n").is_err());
        let ok = TabulatedDensity::parse("# x f\n-2, 0.05\n-1, 0.24\n0, 0.4\n1, 0.24\n2, 0.05\n");
        assert!(ok.is_ok());
    }
}
