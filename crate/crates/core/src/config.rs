//! Experiment configuration files (TOML or JSON).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::density::{
    default_box, EnvelopeOptions, LocationFamily, Mixture, Model, ParameterDomain, QuadratureGrid, QuadratureScheme,
    TabulatedDensity,
};
use crate::error::{Error, Result};
use crate::geometry::{CstarOptions, NeighborhoodOptions, ScanOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Used when the command line gives no seed.
    #[serde(default)]
    pub seed: u64,
    pub model: ModelConfig,
    #[serde(default)]
    pub envelopes: EnvelopeOptions,
    #[serde(default)]
    pub neighborhoods: NeighborhoodOptions,
    #[serde(default)]
    pub cstar: CstarSection,
    #[serde(default)]
    pub figure1: Figure1Config,
    #[serde(default)]
    pub ratio: RatioConfig,
    #[serde(default)]
    pub entropy: EntropyConfig,
    #[serde(default)]
    pub gauss: GaussConfig,
    #[serde(default)]
    pub slice: SliceConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `"gaussian"`, `"fig1"` or `"table:<path>"`.
    pub base: String,
    pub dim: usize,
    pub domain: DomainConfig,
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub grid: GridConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    pub weights: Vec<f64>,
    pub atoms: Vec<Vec<f64>>,
}

/// Trapezoid box (`lo`, `hi` default to an automatic box) with `spacing`,
/// or a Gauss–Hermite rule of `points` nodes per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub scheme: QuadratureScheme,
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    pub spacing: f64,
    pub points: usize,
    pub center: Option<Vec<f64>>,
    pub scale: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            scheme: QuadratureScheme::Trapezoid,
            lo: None,
            hi: None,
            spacing: 0.05,
            points: 60,
            center: None,
            scale: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct CstarSection {
    /// Fixed `ĉ*`; when absent commands that need it run the search.
    pub value: Option<f64>,
    /// Additional seeds `seed+1, …` run by the `cstar` command.
    pub repeats: usize,
    pub search: CstarOptions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Figure1Config {
    /// Intervals per axis of the `[0,1]³` sweep.
    pub resolution: usize,
    pub threshold: f64,
}

impl Default for Figure1Config {
    fn default() -> Self {
        Self {
            resolution: 64,
            threshold: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioConfig {
    pub scan: ScanOptions,
    /// Ratios are summarized over rows with `h ≤ threshold`.
    pub threshold: f64,
}

impl Default for RatioConfig {
    fn default() -> Self {
        Self {
            scan: ScanOptions::default(),
            threshold: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntropyConfig {
    pub q: usize,
    /// Hellinger radius of the local class.
    pub eps: f64,
    /// Bracket sizes as fractions `δ/ε`.
    pub ladder: Vec<f64>,
    /// Mixtures drawn into the ball for the greedy estimate.
    pub samples: usize,
    /// Greedy centers above this abort the run.
    pub max_centers: usize,
}

impl Default for EntropyConfig {
    fn default() -> Self {
        Self {
            q: 2,
            eps: 0.5,
            ladder: vec![0.5, 0.25, 0.125, 0.0625],
            samples: 20_000,
            max_centers: 20_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaussConfig {
    pub t_ladder: Vec<f64>,
    /// Boundary integrand relative to its peak above this is a truncation error.
    pub truncation_tol: f64,
}

impl Default for GaussConfig {
    fn default() -> Self {
        Self {
            t_ladder: vec![0.5, 1.0, 1.5, 2.0, 2.5],
            truncation_tol: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceConfig {
    pub ball_delta: f64,
    pub ball_rho: f64,
    pub ball_samples: usize,
    pub instances: usize,
    pub instance_samples: usize,
    pub hilbert_k: usize,
    pub hilbert_eps: f64,
    /// Mixture scenario on the configured model; off when `mixture_samples == 0`.
    pub mixture_samples: usize,
    pub mixture_eps: f64,
    pub mixture_delta: f64,
    pub mixture_q: usize,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            ball_delta: 1.0,
            ball_rho: 0.5,
            ball_samples: 10_000,
            instances: 20,
            instance_samples: 2_000,
            hilbert_k: 20,
            hilbert_eps: 0.7,
            mixture_samples: 200,
            mixture_eps: 0.3,
            mixture_delta: 0.15,
            mixture_q: 2,
        }
    }
}

/// A parsed configuration and the directory relative paths resolve against.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: Config,
    pub base_dir: PathBuf,
}

impl Config {
    pub fn parse_toml(text: &str) -> Result<Self> {
        let c: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn parse_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Reads `.json` files as JSON and anything else as TOML.
    pub fn load(path: &Path) -> Result<LoadedConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let config = if json { Self::parse_json(&text)? } else { Self::parse_toml(&text)? };
        let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedConfig { config, base_dir })
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        let d = m.dim;
        if d == 0 {
            return Err(Error::Config("model.dim must be positive".into()));
        }
        if m.domain.center.len() != d {
            return Err(Error::Config(format!("domain center has {} coordinates, dim is {d}", m.domain.center.len())));
        }
        if m.reference.weights.len() != m.reference.atoms.len() || m.reference.weights.is_empty() {
            return Err(Error::Config("reference needs one weight per atom".into()));
        }
        if m.reference.atoms.iter().any(|a| a.len() != d) {
            return Err(Error::Config(format!("reference atoms must have {d} coordinates")));
        }
        for (name, b) in [("lo", &m.grid.lo), ("hi", &m.grid.hi), ("center", &m.grid.center)] {
            if b.as_ref().is_some_and(|v| v.len() != d) {
                return Err(Error::Config(format!("grid.{name} must have {d} coordinates")));
            }
        }
        if m.grid.lo.is_some() != m.grid.hi.is_some() {
            return Err(Error::Config("grid.lo and grid.hi go together".into()));
        }
        if let Some(c) = self.cstar.value {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Config(format!("cstar.value = {c} must be positive")));
            }
        }
        if !(self.figure1.resolution >= 1) || !(self.figure1.threshold > 0.0) {
            return Err(Error::Config("figure1 needs resolution ≥ 1 and a positive threshold".into()));
        }
        let e = &self.entropy;
        if !(e.eps > 0.0) || e.ladder.len() < 2 || e.ladder.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
            return Err(Error::Config("entropy needs eps > 0 and at least two ratios δ/ε in (0, 1]".into()));
        }
        if self.gauss.t_ladder.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(Error::Config("gauss.t_ladder entries must be nonnegative".into()));
        }
        Ok(())
    }
}

impl ModelConfig {
    pub fn family(&self, base_dir: &Path) -> Result<LocationFamily> {
        let fam = match self.base.as_str() {
            "gaussian" => LocationFamily::gaussian(self.dim)?,
            "fig1" => LocationFamily::fig1(self.dim)?,
            other => match other.strip_prefix("table:") {
                Some(rel) => {
                    let path = base_dir.join(rel);
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| Error::Config(format!("cannot read table {}: {e}", path.display())))?;
                    if self.dim != 1 {
                        return Err(Error::Config("tabulated densities are one-dimensional".into()));
                    }
                    LocationFamily::table(TabulatedDensity::parse(&text)?)
                }
                None => return Err(Error::Config(format!("unknown base density {other:?}"))),
            },
        };
        Ok(fam)
    }

    pub fn domain(&self) -> Result<ParameterDomain> {
        ParameterDomain::new(self.domain.center.clone(), self.domain.radius)
    }

    pub fn reference(&self) -> Result<Mixture> {
        Mixture::new(self.reference.weights.clone(), self.reference.atoms.clone())
    }

    pub fn grid(&self, family: &LocationFamily, domain: &ParameterDomain, reference: &Mixture) -> Result<QuadratureGrid> {
        let g = &self.grid;
        match g.scheme {
            QuadratureScheme::Trapezoid => {
                let (lo, hi) = match (&g.lo, &g.hi) {
                    (Some(lo), Some(hi)) => (lo.clone(), hi.clone()),
                    _ => default_box(family, domain, reference),
                };
                QuadratureGrid::trapezoid_spacing(&lo, &hi, g.spacing)
            }
            QuadratureScheme::GaussHermite => {
                let center = g.center.clone().unwrap_or_else(|| domain.center().to_vec());
                let scale = g.scale.unwrap_or(std::f64::consts::SQRT_2 * family.length_scale());
                QuadratureGrid::gauss_hermite(g.points, &center, scale)
            }
        }
    }

    pub fn build(&self, base_dir: &Path) -> Result<Model> {
        self.build_with_domain(base_dir, self.domain()?)
    }

    /// Model on the configured family and reference with domain `domain`;
    /// automatic boxes follow the new domain.
    pub fn build_with_domain(&self, base_dir: &Path, domain: ParameterDomain) -> Result<Model> {
        let family = self.family(base_dir)?;
        let reference = self.reference()?;
        let grid = self.grid(&family, &domain, &reference)?;
        Model::new(family, domain, reference, Arc::new(grid))
    }

    /// Short description of the grid for output headers.
    pub fn grid_label(&self, model: &Model) -> String {
        let g = &self.grid;
        match g.scheme {
            QuadratureScheme::Trapezoid => format!("trapezoid:spacing={}:nodes={}", g.spacing, model.len()),
            QuadratureScheme::GaussHermite => format!("gauss-hermite:points={}:nodes={}", g.points, model.len()),
        }
    }
}
