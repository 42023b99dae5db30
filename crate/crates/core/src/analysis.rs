//! Per-instance regret reports for a fitted tree and held-out instances.

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::Result;
use crate::regret::{leaf_plugin, structural_regret_batch, Resampling};
use crate::selective::RegretScores;
use crate::stats::mean;
use crate::tree::{fit_tree, Tree, TreeParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceRegret {
    pub instance: usize,
    pub leaf_id: usize,
    pub n_leaf: usize,
    pub p_hat: f64,
    pub leaf_regret: f64,
    pub structural_regret: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretReport {
    pub resampling: String,
    pub replications: usize,
    pub seed: u64,
    pub instances: Vec<InstanceRegret>,
    pub mean_leaf: f64,
    pub mean_structural: f64,
    /// `mean_structural / mean_leaf`; infinite when leaf regret vanishes.
    pub ratio: f64,
}

impl RegretReport {
    pub fn scores(&self) -> Result<RegretScores> {
        RegretScores::new(
            self.instances.iter().map(|r| r.leaf_regret).collect(),
            self.instances.iter().map(|r| r.structural_regret).collect(),
        )
    }

    pub fn predictions(&self) -> Vec<f64> {
        self.instances.iter().map(|r| r.p_hat).collect()
    }
}

/// Fits a reference tree on `train` and scores every row of `eval`: plug-in
/// leaf regret at its leaf, and structural regret over `b` replicate trees.
pub fn regret_report(
    train: &Dataset,
    eval: &Dataset,
    params: &TreeParams,
    b: usize,
    seed: u64,
    resampling: Resampling<'_>,
) -> Result<(Tree, RegretReport)> {
    let tree = fit_tree(train, params)?;
    let points: Vec<&[f64]> = eval.rows().collect();
    let structural = structural_regret_batch(train, &points, b, params, seed, resampling)?;
    let mut instances = Vec::with_capacity(points.len());
    for (i, (x, s)) in points.iter().zip(structural).enumerate() {
        let leaf = tree.leaf_for(x)?;
        let leaf_regret = leaf_plugin(leaf);
        instances.push(InstanceRegret {
            instance: i,
            leaf_id: leaf.leaf_id,
            n_leaf: leaf.n,
            p_hat: leaf.p_hat,
            leaf_regret,
            structural_regret: s,
            total: leaf_regret + s,
        });
    }
    let mean_leaf = mean(&instances.iter().map(|r| r.leaf_regret).collect::<Vec<_>>());
    let mean_structural = mean(
        &instances
            .iter()
            .map(|r| r.structural_regret)
            .collect::<Vec<_>>(),
    );
    let report = RegretReport {
        resampling: resampling.name().to_string(),
        replications: b,
        seed,
        instances,
        mean_leaf,
        mean_structural,
        ratio: mean_structural / mean_leaf,
    };
    Ok((tree, report))
}
