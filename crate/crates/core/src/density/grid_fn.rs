//! Functions tabulated on the nodes of a quadrature grid.

use crate::error::{Error, Result};

/// Values at the nodes of the grid identified by `fingerprint`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
    fingerprint: u64,
}

impl GridFunction {
    pub fn new(values: Vec<f64>, fingerprint: u64) -> Result<Self> {
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("non-finite grid value at node {k}")));
        }
        Ok(Self {
            values,
            fingerprint,
        })
    }

    pub fn constant(value: f64, len: usize, fingerprint: u64) -> Self {
        Self {
            values: vec![value; len],
            fingerprint,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if self.fingerprint != other.fingerprint || self.len() != other.len() {
            return Err(Error::Shape("grid functions live on different grids".into()));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            values: self.values.iter().map(|&v| f(v)).collect(),
            fingerprint: self.fingerprint,
        }
    }

    pub fn zip_with(
        &self,
        other: &GridFunction,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<GridFunction> {
        self.check_same_grid(other)?;
        Ok(GridFunction {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            fingerprint: self.fingerprint,
        })
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn mul(&self, other: &GridFunction) -> Result<GridFunction> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, s: f64) -> GridFunction {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}
