use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vapcast::learners::LearnerSpec;

use crate::args::Stage;
use crate::output::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Run configuration file for `reproduce`. Every key but `schema_version`
/// is optional; flags given on the command line take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub stats: Option<String>,
    pub signal: Option<String>,
    pub train_fraction: Option<f64>,
    pub folds: Option<usize>,
    pub k_neighbors: Option<usize>,
    pub grid: Option<String>,
    pub threshold: Option<f64>,
    pub bootstrap: Option<usize>,
    pub ablate_on_test: Option<bool>,
    pub welch: Option<bool>,
    pub corr_threshold: Option<f64>,
    pub top_k: Option<usize>,
    pub skip: Option<Vec<Stage>>,
    /// Primary model; the fixed boosted-tree parameters when absent.
    pub learner: Option<LearnerSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|m| CliError::Config(format!("{}: {m}", path.display())))
    }

    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            ));
        }
        Ok(cfg)
    }
}

/// Effective settings of one `reproduce` run, written to `run.json`.
/// The output directory and thread count are left out so the file is
/// identical wherever and however the run happened.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub seed: u64,
    #[serde(skip)]
    pub out_dir: PathBuf,
    pub stats: String,
    pub signal: String,
    pub train_fraction: f64,
    pub folds: usize,
    pub k_neighbors: usize,
    pub grid: String,
    pub threshold: f64,
    pub bootstrap: usize,
    pub ablate_on_test: bool,
    pub welch: bool,
    pub corr_threshold: f64,
    pub top_k: usize,
    pub skip: Vec<Stage>,
    pub learner: LearnerSpec,
}

impl Resolved {
    pub fn skips(&self, s: Stage) -> bool {
        self.skip.contains(&s)
    }
}
