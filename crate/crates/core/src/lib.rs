//! Observational multiplicity in decision trees.
//!
//! A tree's prediction at an input varies across equally plausible draws of
//! the training labels. This crate splits that variance into *leaf regret*
//! (label noise inside a fixed leaf, `p(1-p)/n_L`) and *structural regret*
//! (instability of the learned partition), estimates both by Monte Carlo,
//! validates the split against a logistic ground-truth oracle, and uses the
//! scores to abstain in selective prediction.
//!
//! Monte Carlo replicates run on rayon when the `parallel` feature is on
//! (the default). Every replicate draws from its own seeded substream, so
//! results are identical for any thread count and for sequential builds.

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod oracle;
pub mod par;
pub mod regret;
pub mod rng;
pub mod selective;
pub mod stats;
pub mod tree;

pub use analysis::{regret_report, InstanceRegret, RegretReport};
pub use dataset::{
    load_csv, make_stable_unstable, make_synthetic, train_test_split, ColumnKind, ColumnSpec,
    Dataset, Schema,
};
pub use error::{Error, Result};
pub use oracle::{
    fit_logistic, ground_truth_probs, leaf_size_sweep, redraw_labels, validate_decomposition,
    OracleModel, SweepReport, ValidationReport,
};
pub use regret::{
    decompose_variance, leaf_regret_bound, leaf_regret_plugin, leaf_regret_true, mc_leaf_regret,
    mc_structural_regret, Decomposition, LeafRegretEstimate, Resampling,
};
pub use selective::{
    coverage_at_target, rank_by_regret, recall_coverage_curve, RegretScores, SelectiveCurve,
    Strategy,
};
pub use tree::{fit_tree, log_loss, predict_proba, route, Tree, TreeParams};
