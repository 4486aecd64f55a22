//! Finite-dimensional vector lattices with componentwise order.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norm of the lattice.
#[derive(Clone, Debug, PartialEq)]
pub enum LatticeNorm {
    L1,
    L2,
    Sup,
    /// `(Σ w_k v_k²)^{1/2}`, the `L²(f* dμ)` norm on grid functions.
    WeightedL2(Arc<[f64]>),
}

impl LatticeNorm {
    pub fn norm(&self, v: &[f64]) -> f64 {
        match self {
            LatticeNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            LatticeNorm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            LatticeNorm::Sup => v.iter().fold(0.0_f64, |m, x| m.max(x.abs())),
            LatticeNorm::WeightedL2(w) => v
                .iter()
                .zip(w.iter())
                .map(|(x, w)| w * x * x)
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Norm of `hi − lo`.
    pub fn norm_diff(&self, hi: &[f64], lo: &[f64]) -> f64 {
        match self {
            LatticeNorm::L1 => hi.iter().zip(lo).map(|(a, b)| (a - b).abs()).sum(),
            LatticeNorm::L2 => hi.iter().zip(lo).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
            LatticeNorm::Sup => hi.iter().zip(lo).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())),
            LatticeNorm::WeightedL2(w) => hi
                .iter()
                .zip(lo)
                .zip(w.iter())
                .map(|((a, b), w)| w * (a - b).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            LatticeNorm::L1 => "l1",
            LatticeNorm::L2 => "l2",
            LatticeNorm::Sup => "sup",
            LatticeNorm::WeightedL2(_) => "weighted-l2",
        }
    }

    /// Dimension fixed by the norm, if any.
    pub fn fixed_dim(&self) -> Option<usize> {
        match self {
            LatticeNorm::WeightedL2(w) => Some(w.len()),
            _ => None,
        }
    }

    fn same_kind(&self, other: &LatticeNorm) -> bool {
        match (self, other) {
            (LatticeNorm::WeightedL2(a), LatticeNorm::WeightedL2(b)) => Arc::ptr_eq(a, b) || a == b,
            _ => self.tag() == other.tag(),
        }
    }
}

impl fmt::Display for LatticeNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Element of the lattice.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeVector {
    coords: Vec<f64>,
    norm: LatticeNorm,
}

impl LatticeVector {
    pub fn new(coords: Vec<f64>, norm: LatticeNorm) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numeric("non-finite lattice coordinate".into()));
        }
        if let Some(n) = norm.fixed_dim() {
            if n != coords.len() {
                return Err(Error::Shape(format!(
                    "{} coordinates for a {n}-dimensional weighted lattice",
                    coords.len()
                )));
            }
        }
        Ok(Self { coords, norm })
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn norm_kind(&self) -> &LatticeNorm {
        &self.norm
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm(&self) -> f64 {
        self.norm.norm(&self.coords)
    }

    /// Componentwise `≤`.
    pub fn le(&self, other: &LatticeVector) -> bool {
        self.coords.iter().zip(&other.coords).all(|(a, b)| a <= b)
    }
}

/// Order interval `[lower, upper]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bracket {
    lower: Vec<f64>,
    upper: Vec<f64>,
    size: f64,
}

impl Bracket {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, norm: &LatticeNorm) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::Shape("bracket ends differ in dimension".into()));
        }
        if let Some(n) = norm.fixed_dim() {
            if n != lower.len() {
                return Err(Error::Shape("bracket dimension differs from lattice".into()));
            }
        }
        if lower.iter().chain(&upper).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite bracket end".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::DomainViolation("bracket lower end exceeds upper end".into()));
        }
        let size = norm.norm_diff(&upper, &lower);
        Ok(Self { lower, upper, size })
    }

    pub fn from_vectors(lower: &LatticeVector, upper: &LatticeVector) -> Result<Self> {
        if !lower.norm.same_kind(&upper.norm) {
            return Err(Error::Shape("bracket ends live in different lattices".into()));
        }
        Self::new(lower.coords.clone(), upper.coords.clone(), &lower.norm)
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn size(&self) -> f64 {
        self.size
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// `lower ≤ x ≤ upper` up to `tol·(1 + |x_k|)` per coordinate.
    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.lower.len()
            && x.iter().zip(&self.lower).zip(&self.upper).all(|((v, l), u)| {
                let slack = tol * (1.0 + v.abs());
                *v >= l - slack && *v <= u + slack
            })
    }
}

/// Bracket family certified at scale `ε`.
#[derive(Clone, Debug)]
pub struct BracketSet {
    brackets: Vec<Bracket>,
    scale: f64,
    norm: LatticeNorm,
    provenance: String,
}

/// Relative slack when checking bracket sizes against the scale.
pub const SIZE_SLACK: f64 = 1e-12;

impl BracketSet {
    pub fn new(brackets: Vec<Bracket>, scale: f64, norm: LatticeNorm, provenance: impl Into<String>) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Scale(format!("bracket scale {scale} must be positive")));
        }
        for (i, b) in brackets.iter().enumerate() {
            if b.size() > scale * (1.0 + SIZE_SLACK) {
                return Err(Error::Certificate(format!(
                    "bracket {i} has size {} above scale {scale}",
                    b.size()
                )));
            }
        }
        if let Some(d) = brackets.first().map(|b| b.dim()) {
            if brackets.iter().any(|b| b.dim() != d) {
                return Err(Error::Shape("brackets differ in dimension".into()));
            }
        }
        Ok(Self {
            brackets,
            scale,
            norm,
            provenance: provenance.into(),
        })
    }

    pub fn brackets(&self) -> &[Bracket] {
        &self.brackets
    }

    pub fn into_brackets(self) -> Vec<Bracket> {
        self.brackets
    }

    pub fn len(&self) -> usize {
        self.brackets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.brackets.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn norm(&self) -> &LatticeNorm {
        &self.norm
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn max_size(&self) -> f64 {
        self.brackets.iter().fold(0.0_f64, |m, b| m.max(b.size()))
    }
}

/// Result of checking points against a bracket family.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct CoverReport {
    /// Index of a containing bracket for each point.
    pub containing: Vec<Option<usize>>,
    pub covered: usize,
    pub violations: Vec<usize>,
}

impl CoverReport {
    pub fn all_covered(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Uniform hash over the first few coordinates for bracket lookup.
pub struct BracketIndex<'a> {
    set: &'a BracketSet,
    axes: usize,
    cell: f64,
    origin: Vec<f64>,
    table: HashMap<Vec<i64>, Vec<usize>>,
    oversized: Vec<usize>,
}

impl<'a> BracketIndex<'a> {
    pub fn new(set: &'a BracketSet) -> Self {
        let dim = set.brackets.first().map(|b| b.dim()).unwrap_or(0);
        let axes = dim.min(3);
        let mut extents: Vec<f64> = set
            .brackets
            .iter()
            .map(|b| (0..axes).fold(0.0_f64, |m, a| m.max(b.upper[a] - b.lower[a])))
            .collect();
        extents.sort_by(|a, b| a.partial_cmp(b).unwrap());
        // Cells sized to the median extent; much larger brackets are scanned directly.
        let median = extents.get(extents.len() / 2).copied().unwrap_or(1.0);
        let cell = if median > 0.0 { median } else { 1.0 };
        let mut origin = vec![f64::INFINITY; axes];
        for b in &set.brackets {
            for a in 0..axes {
                origin[a] = origin[a].min(b.lower[a]);
            }
        }
        let mut table: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        let mut oversized = Vec::new();
        for (i, b) in set.brackets.iter().enumerate() {
            let lo: Vec<i64> = (0..axes).map(|a| ((b.lower[a] - origin[a]) / cell).floor() as i64).collect();
            let hi: Vec<i64> = (0..axes).map(|a| ((b.upper[a] - origin[a]) / cell).floor() as i64).collect();
            let span: i64 = (0..axes).map(|a| hi[a] - lo[a] + 1).product();
            if span > 64 {
                oversized.push(i);
                continue;
            }
            let mut key = lo.clone();
            loop {
                table.entry(key.clone()).or_default().push(i);
                let mut a = 0;
                while a < axes {
                    key[a] += 1;
                    if key[a] <= hi[a] {
                        break;
                    }
                    key[a] = lo[a];
                    a += 1;
                }
                if a == axes {
                    break;
                }
            }
        }
        Self {
            set,
            axes,
            cell,
            origin,
            table,
            oversized,
        }
    }

    /// Lowest-index bracket containing `x`.
    pub fn locate(&self, x: &[f64], tol: f64) -> Option<usize> {
        let key: Vec<i64> = (0..self.axes)
            .map(|a| ((x[a] - self.origin[a]) / self.cell).floor() as i64)
            .collect();
        let mut best: Option<usize> = None;
        let candidates = self.table.get(&key).map(|v| v.as_slice()).unwrap_or(&[]);
        for &i in candidates.iter().chain(&self.oversized) {
            if best.is_some_and(|b| b <= i) {
                continue;
            }
            if self.set.brackets[i].contains(x, tol) {
                best = Some(i);
            }
        }
        best
    }
}

/// Coverage report: one containing bracket per point or a violation.
pub fn verify_bracket_cover(set: &BracketSet, points: &[Vec<f64>], tol: f64) -> Result<CoverReport> {
    if let Some(b) = set.brackets.first() {
        if let Some(p) = points.iter().find(|p| p.len() != b.dim()) {
            return Err(Error::Shape(format!(
                "point of dimension {} against brackets of dimension {}",
                p.len(),
                b.dim()
            )));
        }
    }
    let index = BracketIndex::new(set);
    let containing: Vec<Option<usize>> = if set.is_empty() {
        vec![None; points.len()]
    } else {
        points.iter().map(|p| index.locate(p, tol)).collect()
    };
    let violations: Vec<usize> = containing
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.is_none().then_some(i))
        .collect();
    Ok(CoverReport {
        covered: points.len() - violations.len(),
        containing,
        violations,
    })
}
