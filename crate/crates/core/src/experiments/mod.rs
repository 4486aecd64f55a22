//! Seeded experiment drivers behind the command-line subcommands.
//!
//! Each driver returns its summary and, when an output directory is set,
//! writes CSV tables and a JSON summary there. Outputs depend only on the
//! configuration and the seed.

mod cstar;
mod entropy;
mod figure1;
mod gauss;
mod output;
mod ratio;
mod slice;

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::{Config, LoadedConfig};
use crate::density::Model;
use crate::error::Result;
use crate::geometry::{build_neighborhoods, estimate_cstar, NeighborhoodSystem};

pub use cstar::{run_cstar, CstarSummary};
pub use entropy::{greedy_points, run_entropy, EntropyRow, EntropySummary};
pub use figure1::{fig1_pseudo_n, run_figure1, Figure1Summary};
pub use gauss::{run_gauss, GaussRow, GaussSummary};
pub use output::{fmt, summary_json, write_csv, write_csv_file, write_json_file, Provenance};
pub use ratio::{run_ratio, RatioSummary};
pub use slice::{run_slice, BallReport, HilbertRow, InstanceRow, MixtureScenario, SliceSummary};

/// Configuration, seed and output directory of one run.
#[derive(Clone, Debug)]
pub struct RunContext {
    pub config: Config,
    pub base_dir: PathBuf,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    hash: String,
}

/// Summary of a run with the provenance written alongside it.
#[derive(Clone, Debug, Serialize)]
pub struct Outcome<T> {
    pub provenance: Provenance,
    pub summary: T,
}

impl<T: Serialize> Outcome<T> {
    pub fn to_json(&self) -> Result<String> {
        summary_json(&self.provenance, &self.summary)
    }
}

impl RunContext {
    /// `seed` overrides the configured seed; `out_dir` is created if missing.
    pub fn new(loaded: LoadedConfig, seed: Option<u64>, out_dir: Option<PathBuf>) -> Result<Self> {
        if let Some(dir) = &out_dir {
            std::fs::create_dir_all(dir)?;
        }
        let hash = loaded.config.hash();
        Ok(Self {
            seed: seed.unwrap_or(loaded.config.seed),
            config: loaded.config,
            base_dir: loaded.base_dir,
            out_dir,
            hash,
        })
    }

    /// In-memory run with no output files.
    pub fn in_memory(config: Config, seed: u64) -> Self {
        let hash = config.hash();
        Self {
            config,
            base_dir: PathBuf::from("."),
            seed,
            out_dir: None,
            hash,
        }
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn model(&self) -> Result<Model> {
        self.config.model.build(&self.base_dir)
    }

    pub fn neighborhoods(&self, model: &Model) -> Result<NeighborhoodSystem> {
        build_neighborhoods(model.reference(), model.domain(), self.seed, &self.config.neighborhoods)
    }

    /// The configured `ĉ*`, or the search estimate at this seed.
    pub fn cstar(&self, model: &Model, nbhd: &NeighborhoodSystem) -> Result<f64> {
        match self.config.cstar.value {
            Some(c) => Ok(c),
            None => Ok(estimate_cstar(model, nbhd, &self.config.cstar.search, self.seed)?.c_hat),
        }
    }

    pub fn provenance(&self, command: &str, grid: String, c_star: Option<f64>) -> Provenance {
        Provenance {
            command: command.into(),
            config_hash: self.hash.clone(),
            seed: self.seed,
            grid,
            c_star,
        }
    }

    fn path(&self, name: &str) -> Option<PathBuf> {
        self.out_dir.as_deref().map(|d: &Path| d.join(name))
    }

    pub fn emit_csv(&self, name: &str, prov: &Provenance, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
        match self.path(name) {
            Some(p) => write_csv_file(&p, prov, columns, rows),
            None => Ok(()),
        }
    }

    pub fn emit_json<T: Serialize>(&self, name: &str, prov: &Provenance, summary: &T) -> Result<()> {
        match self.path(name) {
            Some(p) => write_json_file(&p, prov, summary),
            None => Ok(()),
        }
    }

    fn finish<T: Serialize>(&self, name: &str, provenance: Provenance, summary: T) -> Result<Outcome<T>> {
        self.emit_json(name, &provenance, &summary)?;
        Ok(Outcome { provenance, summary })
    }
}
