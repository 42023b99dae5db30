//! Run configuration: one JSON file, with command-line flags layered on top.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use regret_tree::selective::{default_coverage_grid, validate_grid};
use regret_tree::TreeParams;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetSource {
    /// Standard-normal features with logistic labels.
    Synthetic {
        n: usize,
        d: usize,
        weights: Vec<f64>,
        #[serde(default)]
        intercept: f64,
        seed: u64,
    },
    /// Two well-separated deterministic clusters plus a noisy middle band.
    StableUnstable {
        n: usize,
        stable_fraction: f64,
        unstable_p: f64,
        seed: u64,
    },
    Csv {
        path: PathBuf,
        schema: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub name: String,
    #[serde(flatten)]
    pub source: DatasetSource,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResampleMode {
    Bootstrap,
    LabelRedraw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeConfig {
    pub min_leaf: usize,
    pub max_depth: usize,
    pub min_impurity_decrease: f64,
}

impl Default for TreeConfig {
    fn default() -> Self {
        let p = TreeParams::default();
        Self {
            min_leaf: p.min_leaf,
            max_depth: p.max_depth,
            min_impurity_decrease: p.min_impurity_decrease,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub datasets: Vec<DatasetConfig>,
    #[serde(default)]
    pub tree: TreeConfig,
    /// Label realizations for `validate`.
    #[serde(default = "defaults::realizations")]
    pub realizations: usize,
    /// Replicate trees per structural-regret estimate (`table`, `selective`).
    #[serde(default = "defaults::bootstrap")]
    pub bootstrap: usize,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default = "defaults::test_fraction")]
    pub test_fraction: f64,
    #[serde(default = "defaults::eval_points")]
    pub eval_points: usize,
    #[serde(default = "default_coverage_grid")]
    pub coverage_grid: Vec<f64>,
    #[serde(default = "defaults::sweep_grid")]
    pub sweep_grid: Vec<usize>,
    #[serde(default = "defaults::sweep_realizations")]
    pub sweep_realizations: usize,
    #[serde(default = "defaults::sweep_max_depth")]
    pub sweep_max_depth: usize,
    #[serde(default = "defaults::resample")]
    pub resample: ResampleMode,
    #[serde(default = "defaults::out")]
    pub out: PathBuf,
}

mod defaults {
    use super::ResampleMode;
    use std::path::PathBuf;

    pub fn realizations() -> usize {
        200
    }
    pub fn bootstrap() -> usize {
        100
    }
    pub fn seed() -> u64 {
        42
    }
    pub fn test_fraction() -> f64 {
        0.3
    }
    pub fn eval_points() -> usize {
        50
    }
    pub fn sweep_grid() -> Vec<usize> {
        vec![5, 10, 20, 50, 100, 200]
    }
    pub fn sweep_realizations() -> usize {
        50
    }
    pub fn sweep_max_depth() -> usize {
        12
    }
    pub fn resample() -> ResampleMode {
        ResampleMode::Bootstrap
    }
    pub fn out() -> PathBuf {
        PathBuf::from("out")
    }
}

/// Values given on the command line; `None` keeps the file value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replications: Option<usize>,
    pub min_leaf: Option<usize>,
    pub max_depth: Option<usize>,
    pub out: Option<PathBuf>,
    pub resample: Option<ResampleMode>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    /// Reads and parses a config file. Relative dataset paths resolve
    /// against the config file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for ds in &mut config.datasets {
            if let DatasetSource::Csv { path, schema } = &mut ds.source {
                *path = resolve(base, path);
                *schema = resolve(base, schema);
            }
        }
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(r) = o.replications {
            self.realizations = r;
            self.bootstrap = r;
            self.sweep_realizations = r;
        }
        if let Some(m) = o.min_leaf {
            self.tree.min_leaf = m;
        }
        if let Some(d) = o.max_depth {
            self.tree.max_depth = d;
        }
        if let Some(out) = &o.out {
            self.out = out.clone();
        }
        if let Some(r) = o.resample {
            self.resample = r;
        }
    }

    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            min_leaf: self.tree.min_leaf,
            max_depth: self.tree.max_depth,
            min_impurity_decrease: self.tree.min_impurity_decrease,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.datasets.is_empty() {
            return bad("config lists no datasets".into());
        }
        for ds in &self.datasets {
            if ds.name.is_empty() || ds.name.contains(['/', '\\', ',', '"']) {
                return bad(format!("invalid dataset name {:?}", ds.name));
            }
            match &ds.source {
                DatasetSource::Csv { path, schema } => {
                    for p in [path, schema] {
                        if !p.exists() {
                            return bad(format!("file not found: {}", p.display()));
                        }
                    }
                }
                DatasetSource::Synthetic { n, d, weights, .. } => {
                    if *n == 0 || *d == 0 || weights.len() != *d {
                        return bad(format!(
                            "dataset {}: synthetic dataset needs n > 0 and {} weights",
                            ds.name, d
                        ));
                    }
                }
                DatasetSource::StableUnstable {
                    n,
                    stable_fraction,
                    unstable_p,
                    ..
                } => {
                    if *n == 0
                        || !(0.0..=1.0).contains(stable_fraction)
                        || !(0.0..=1.0).contains(unstable_p)
                    {
                        return bad(format!("dataset {}: invalid stable/unstable dataset", ds.name));
                    }
                }
            }
        }
        let names: std::collections::BTreeSet<_> = self.datasets.iter().map(|d| &d.name).collect();
        if names.len() != self.datasets.len() {
            return bad("dataset names must be unique".into());
        }
        if self.realizations < 2 || self.bootstrap < 2 || self.sweep_realizations < 1 {
            return bad("replication counts must be at least 2".into());
        }
        if self.eval_points == 0 {
            return bad("eval_points must be positive".into());
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!(
                "test_fraction {} outside (0, 1)",
                self.test_fraction
            ));
        }
        if self.sweep_grid.is_empty()
            || self.sweep_grid[0] == 0
            || self.sweep_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return bad("sweep_grid must be positive and strictly increasing".into());
        }
        validate_grid(&self.coverage_grid).map_err(|e| CliError::Config(e.to_string()))?;
        self.tree_params()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
