//! Leaf regret, structural regret, and the decomposition of predictive
//! variance into the two.
//!
//! Leaf regret is the variance of a leaf's empirical probability when the
//! partition is held fixed: `p(1-p)/n_L`. Structural regret is the variance
//! of the prediction at a fixed input across refitted trees. All sample
//! variances use the `B - 1` (or `R - 1`) divisor.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::par;
use crate::rng;
use crate::stats::{mean, sample_variance};
use crate::tree::{fit_tree_on_rows, fit_tree_with_labels, predict_proba, Leaf, Tree, TreeParams};

fn check_probability(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

fn check_leaf_size(n_leaf: usize) -> Result<()> {
    if n_leaf == 0 {
        Err(Error::ZeroLeafSize)
    } else {
        Ok(())
    }
}

fn check_replications(b: usize) -> Result<()> {
    if b < 2 {
        Err(Error::InsufficientReplications(b))
    } else {
        Ok(())
    }
}

/// Leaf regret under the true leaf probability: `p*(1-p*)/n_L`.
pub fn leaf_regret_true(p_star: f64, n_leaf: usize) -> Result<f64> {
    check_probability(p_star)?;
    check_leaf_size(n_leaf)?;
    Ok(p_star * (1.0 - p_star) / n_leaf as f64)
}

/// `1/(4 n_L)`, the maximum of leaf regret over all leaf probabilities.
pub fn leaf_regret_bound(n_leaf: usize) -> Result<f64> {
    check_leaf_size(n_leaf)?;
    Ok(0.25 / n_leaf as f64)
}

/// Plug-in leaf regret `p̂(1-p̂)/n_L`. `p_hat * n_leaf` must be a count.
pub fn leaf_regret_plugin(p_hat: f64, n_leaf: usize) -> Result<f64> {
    check_probability(p_hat)?;
    check_leaf_size(n_leaf)?;
    let count = p_hat * n_leaf as f64;
    if (count - count.round()).abs() > 1e-6 * (n_leaf as f64).max(1.0) {
        return Err(Error::InvalidProbability(p_hat));
    }
    Ok(p_hat * (1.0 - p_hat) / n_leaf as f64)
}

/// Monte Carlo leaf regret: `B` replicates of `n_L` Bernoulli(`p_hat`)
/// draws, returning the sample variance of the replicate means. Replicate
/// `b` draws from substream `(seed, b)`.
pub fn mc_leaf_regret(p_hat: f64, n_leaf: usize, b: usize, seed: u64) -> Result<f64> {
    check_probability(p_hat)?;
    check_leaf_size(n_leaf)?;
    check_replications(b)?;
    let means = par::map_range(b, |rep| {
        let mut rng = rng::substream(seed, rep as u64);
        let hits = (0..n_leaf)
            .filter(|_| rng::bernoulli(&mut rng, p_hat))
            .count();
        hits as f64 / n_leaf as f64
    });
    Ok(sample_variance(&means))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafRegretEstimate {
    pub leaf_id: usize,
    pub n_leaf: usize,
    pub p_hat: f64,
    pub plugin: f64,
    pub mc: Option<f64>,
    pub bound: f64,
}

impl LeafRegretEstimate {
    pub fn from_leaf(leaf: &Leaf) -> Self {
        Self {
            leaf_id: leaf.leaf_id,
            n_leaf: leaf.n,
            p_hat: leaf.p_hat,
            plugin: leaf_plugin(leaf),
            mc: None,
            bound: 0.25 / leaf.n as f64,
        }
    }

    pub fn with_mc(mut self, b: usize, seed: u64) -> Result<Self> {
        self.mc = Some(mc_leaf_regret(self.p_hat, self.n_leaf, b, seed)?);
        Ok(self)
    }
}

/// Plug-in regret of a fitted leaf.
pub fn leaf_plugin(leaf: &Leaf) -> f64 {
    leaf.p_hat * (1.0 - leaf.p_hat) / leaf.n as f64
}

/// Per-leaf regret estimates for a fitted tree; when `mc` is given as
/// `(B, seed)` leaf `k` also gets a Monte Carlo estimate seeded from
/// `(seed, k)`.
pub fn leaf_estimates(tree: &Tree, mc: Option<(usize, u64)>) -> Result<Vec<LeafRegretEstimate>> {
    tree.leaves()
        .map(|leaf| {
            let est = LeafRegretEstimate::from_leaf(leaf);
            match mc {
                Some((b, seed)) => est.with_mc(b, rng::derive_seed(seed, leaf.leaf_id as u64)),
                None => Ok(est),
            }
        })
        .collect()
}

/// How replicate training sets are generated for structural regret.
#[derive(Debug, Clone, Copy)]
pub enum Resampling<'a> {
    /// `n` rows drawn with replacement.
    Bootstrap,
    /// Same rows, labels redrawn as Bernoulli(`p_star[i]`).
    LabelRedraw { p_star: &'a [f64] },
}

impl Resampling<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Resampling::Bootstrap => "bootstrap",
            Resampling::LabelRedraw { .. } => "label-redraw",
        }
    }
}

/// Tree fitted to replicate `rep` of `train`.
pub fn replicate_tree(
    train: &Dataset,
    params: &TreeParams,
    seed: u64,
    rep: usize,
    resampling: Resampling<'_>,
) -> Result<Tree> {
    let mut rng = rng::substream(seed, rep as u64);
    match resampling {
        Resampling::Bootstrap => {
            let n = train.n();
            let rows = (0..n).map(|_| rng.random_range(0..n)).collect();
            fit_tree_on_rows(train, train.labels(), rows, params)
        }
        Resampling::LabelRedraw { p_star } => {
            if p_star.len() != train.n() {
                return Err(Error::LengthMismatch {
                    left: train.n(),
                    right: p_star.len(),
                });
            }
            let labels = p_star
                .iter()
                .map(|&p| u8::from(rng::bernoulli(&mut rng, p)))
                .collect::<Vec<_>>();
            fit_tree_with_labels(train, &labels, params)
        }
    }
}

/// Predictions at every point for each of `b` replicate trees, indexed
/// `[replicate][point]`.
pub fn replicate_predictions<P: AsRef<[f64]> + Sync>(
    train: &Dataset,
    points: &[P],
    b: usize,
    params: &TreeParams,
    seed: u64,
    resampling: Resampling<'_>,
) -> Result<Vec<Vec<f64>>> {
    check_replications(b)?;
    params.validate()?;
    if train.n() < params.min_leaf {
        return Err(Error::MinLeafExceedsData {
            min_leaf: params.min_leaf,
            n: train.n(),
        });
    }
    if let Resampling::LabelRedraw { p_star } = resampling {
        if let Some(&bad) = p_star.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::InvalidProbability(bad));
        }
    }
    par::map_range(b, |rep| {
        let tree = replicate_tree(train, params, seed, rep, resampling)?;
        points
            .iter()
            .map(|x| predict_proba(&tree, x.as_ref()))
            .collect::<Result<Vec<_>>>()
    })
    .into_iter()
    .collect()
}

/// Structural regret at each point: sample variance over replicate trees.
pub fn structural_regret_batch<P: AsRef<[f64]> + Sync>(
    train: &Dataset,
    points: &[P],
    b: usize,
    params: &TreeParams,
    seed: u64,
    resampling: Resampling<'_>,
) -> Result<Vec<f64>> {
    let preds = replicate_predictions(train, points, b, params, seed, resampling)?;
    let mut column = Vec::with_capacity(b);
    Ok((0..points.len())
        .map(|j| {
            column.clear();
            column.extend(preds.iter().map(|rep| rep[j]));
            sample_variance(&column)
        })
        .collect())
}

/// Bootstrap Monte Carlo structural regret at a single input.
pub fn mc_structural_regret(
    train: &Dataset,
    x: &[f64],
    b: usize,
    params: &TreeParams,
    seed: u64,
) -> Result<f64> {
    mc_structural_regret_with(train, x, b, params, seed, Resampling::Bootstrap)
}

pub fn mc_structural_regret_with(
    train: &Dataset,
    x: &[f64],
    b: usize,
    params: &TreeParams,
    seed: u64,
    resampling: Resampling<'_>,
) -> Result<f64> {
    Ok(structural_regret_batch(train, &[x], b, params, seed, resampling)?[0])
}

/// What one realization's tree says about a fixed input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRealization {
    pub n_leaf: usize,
    pub p_hat: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub point: usize,
    /// Mean over realizations of the plug-in leaf regret at the input's leaf.
    pub expected_leaf: f64,
    /// Variance over realizations of the conditional mean prediction.
    pub structural: f64,
    pub total_estimated: f64,
    /// Direct variance of the prediction over realizations.
    pub total_simulated: f64,
}

impl Decomposition {
    /// `|estimated - simulated| / simulated`; 0 when both vanish.
    pub fn relative_error(&self) -> f64 {
        let diff = (self.total_estimated - self.total_simulated).abs();
        if diff == 0.0 {
            0.0
        } else {
            diff / self.total_simulated
        }
    }
}

/// Splits the variance of the prediction at one input into expected leaf
/// regret plus the variance of the conditional means.
pub fn decompose_variance(
    realizations: &[PointRealization],
    conditional_means: &[f64],
) -> Result<Decomposition> {
    if realizations.len() != conditional_means.len() {
        return Err(Error::LengthMismatch {
            left: realizations.len(),
            right: conditional_means.len(),
        });
    }
    let r = realizations.len();
    if r < 2 {
        return Err(Error::InsufficientRealizations(r));
    }
    let leaf_terms = realizations
        .iter()
        .map(|o| leaf_regret_plugin(o.p_hat, o.n_leaf))
        .collect::<Result<Vec<_>>>()?;
    let predictions: Vec<f64> = realizations.iter().map(|o| o.prediction).collect();
    let expected_leaf = mean(&leaf_terms);
    let structural = sample_variance(conditional_means);
    Ok(Decomposition {
        point: 0,
        expected_leaf,
        structural,
        total_estimated: expected_leaf + structural,
        total_simulated: sample_variance(&predictions),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_forms() {
        assert_relative_eq!(leaf_regret_true(0.5, 100).unwrap(), 0.0025);
        assert_eq!(leaf_regret_true(0.0, 17).unwrap(), 0.0);
        assert_relative_eq!(leaf_regret_true(0.3, 10).unwrap(), 0.021, epsilon = 1e-15);
        assert_eq!(leaf_regret_bound(1).unwrap(), 0.25);
        assert_eq!(leaf_regret_bound(100).unwrap(), 0.0025);
        assert_eq!(
            leaf_regret_true(0.5, 100).unwrap(),
            leaf_regret_bound(100).unwrap()
        );
        assert_eq!(leaf_regret_plugin(0.5, 4).unwrap(), 0.0625);
        assert_eq!(leaf_regret_plugin(0.0, 9).unwrap(), 0.0);
        assert_eq!(leaf_regret_plugin(1.0, 9).unwrap(), 0.0);
    }

    #[test]
    fn argument_errors() {
        assert!(matches!(
            leaf_regret_true(1.5, 3),
            Err(Error::InvalidProbability(_))
        ));
        assert!(matches!(leaf_regret_true(0.5, 0), Err(Error::ZeroLeafSize)));
        assert!(matches!(leaf_regret_bound(0), Err(Error::ZeroLeafSize)));
        assert!(matches!(
            leaf_regret_plugin(-0.1, 3),
            Err(Error::InvalidProbability(_))
        ));
        assert!(matches!(
            leaf_regret_plugin(0.3, 4),
            Err(Error::InvalidProbability(_))
        ));
        assert!(matches!(
            mc_leaf_regret(0.5, 10, 1, 0),
            Err(Error::InsufficientReplications(1))
        ));
    }

    #[test]
    fn mc_leaf_regret_degenerate_and_deterministic() {
        assert_eq!(mc_leaf_regret(0.0, 30, 50, 1).unwrap(), 0.0);
        assert_eq!(mc_leaf_regret(1.0, 30, 50, 1).unwrap(), 0.0);
        let a = mc_leaf_regret(0.4, 25, 200, 77).unwrap();
        let b = mc_leaf_regret(0.4, 25, 200, 77).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn mc_leaf_regret_tracks_plugin() {
        let mc = mc_leaf_regret(0.5, 50, 100_000, 2024).unwrap();
        assert!((mc - 0.005).abs() / 0.005 < 0.02, "mc = {mc}");
    }

    #[test]
    fn decomposition_identical_realizations() {
        let obs = vec![
            PointRealization {
                n_leaf: 10,
                p_hat: 0.3,
                prediction: 0.3
            };
            5
        ];
        let d = decompose_variance(&obs, &[0.25; 5]).unwrap();
        assert_eq!(d.structural, 0.0);
        assert_eq!(d.total_simulated, 0.0);
        assert_relative_eq!(d.expected_leaf, 0.021, epsilon = 1e-15);
        assert_eq!(d.total_estimated, d.expected_leaf + d.structural);
    }

    #[test]
    fn decomposition_errors() {
        let obs = [PointRealization {
            n_leaf: 2,
            p_hat: 0.5,
            prediction: 0.5,
        }];
        assert!(matches!(
            decompose_variance(&obs, &[0.5, 0.5]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(matches!(
            decompose_variance(&obs, &[0.5]),
            Err(Error::InsufficientRealizations(1))
        ));
    }

    #[test]
    fn constant_labels_have_no_structural_regret() {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![i as f64, (i * 7 % 5) as f64])
            .collect();
        let ds = Dataset::from_rows(&rows, vec![1; 40]).unwrap();
        let r = mc_structural_regret(&ds, &[3.0, 1.0], 30, &TreeParams::new(2, 6), 5).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn structural_regret_errors() {
        let ds = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![0, 1]).unwrap();
        assert!(matches!(
            mc_structural_regret(&ds, &[0.0], 1, &TreeParams::new(1, 2), 0),
            Err(Error::InsufficientReplications(1))
        ));
        assert!(matches!(
            mc_structural_regret(&ds, &[0.0], 5, &TreeParams::new(3, 2), 0),
            Err(Error::MinLeafExceedsData { .. })
        ));
    }

    #[test]
    fn leaf_estimates_respect_bound() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![i as f64]).collect();
        let labels = (0..60).map(|i| u8::from(i % 3 == 0 || i > 40)).collect();
        let ds = Dataset::from_rows(&rows, labels).unwrap();
        let tree = crate::tree::fit_tree(&ds, &TreeParams::new(5, 4)).unwrap();
        let ests = leaf_estimates(&tree, Some((200, 3))).unwrap();
        assert_eq!(ests.len(), tree.n_leaves());
        for e in ests {
            assert!(e.plugin <= e.bound);
            assert_relative_eq!(e.plugin, e.p_hat * (1.0 - e.p_hat) / e.n_leaf as f64);
            assert!(e.mc.unwrap() >= 0.0);
        }
    }
}
