//! Logistic ground-truth oracle and the semi-synthetic experiments built on
//! it.
//!
//! The oracle supplies `p*` for every training row. Label vectors are then
//! redrawn from Bernoulli(`p*`) with the features held fixed, a tree is fitted
//! per realization, and the spread of the resulting predictions is compared
//! against the leaf/structural decomposition.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{split_indices, Dataset};
use crate::error::{Error, Result};
use crate::par;
use crate::regret::{decompose_variance, leaf_plugin, Decomposition, PointRealization};
use crate::rng::{self, Rng};
use crate::stats::{mean, median, pearson, sigmoid};
use crate::tree::{fit_tree_with_labels, log_loss, TreeParams};

/// L2 penalty on the standardized weights (intercept unpenalized).
pub const ORACLE_L2: f64 = 1e-4;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    /// Max-norm of the penalized gradient in standardized coordinates.
    pub final_gradient_norm: f64,
    pub iterations: usize,
    /// Set when a Hessian could not be factored and a gradient step was used.
    pub gradient_fallback: bool,
    /// Penalized loss before each iteration and after the last.
    pub loss_history: Vec<f64>,
}

impl OracleModel {
    pub fn probability(&self, x: &[f64]) -> f64 {
        let z: f64 = x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>() + self.intercept;
        sigmoid(z)
    }

    pub fn probs(&self, data: &Dataset) -> Result<Vec<f64>> {
        ground_truth_probs(self, &data.rows().collect::<Vec<_>>())
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

struct Problem {
    /// Standardized design with a leading column of ones.
    design: DMatrix<f64>,
    y: DVector<f64>,
    n: f64,
}

impl Problem {
    fn loss(&self, beta: &DVector<f64>) -> f64 {
        let z = &self.design * beta;
        let ce: f64 = z
            .iter()
            .zip(self.y.iter())
            .map(|(&z, &y)| softplus(z) - y * z)
            .sum::<f64>()
            / self.n;
        let penalty: f64 = beta.iter().skip(1).map(|w| w * w).sum::<f64>();
        ce + 0.5 * ORACLE_L2 * penalty
    }

    fn gradient_hessian(&self, beta: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let z = &self.design * beta;
        let p = z.map(sigmoid);
        let resid = &p - &self.y;
        let mut grad = self.design.tr_mul(&resid) / self.n;
        let w = p.map(|v| v * (1.0 - v));
        let weighted = DMatrix::from_fn(self.design.nrows(), self.design.ncols(), |i, j| {
            self.design[(i, j)] * w[i]
        });
        let mut hess = self.design.tr_mul(&weighted) / self.n;
        for j in 1..beta.len() {
            grad[j] += ORACLE_L2 * beta[j];
            hess[(j, j)] += ORACLE_L2;
        }
        (grad, hess)
    }
}

/// Penalized logistic regression by damped Newton iterations on
/// standardized features, starting from zero. Step halving keeps the
/// penalized loss non-increasing.
pub fn fit_logistic(train: &Dataset, tol: f64, max_iter: usize) -> Result<OracleModel> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let n = train.n();
    let d = train.d();
    if n < 2 {
        return Err(Error::InvalidParameter("need at least 2 rows".into()));
    }
    let positives = train.labels().iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleClassData);
    }

    let mut centers = vec![0.0; d];
    let mut scales = vec![1.0; d];
    for j in 0..d {
        let col: Vec<f64> = (0..n).map(|i| train.value(i, j)).collect();
        let m = mean(&col);
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        centers[j] = m;
        if var > 0.0 {
            scales[j] = var.sqrt();
        }
    }
    let design = DMatrix::from_fn(n, d + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            (train.value(i, j - 1) - centers[j - 1]) / scales[j - 1]
        }
    });
    let y = DVector::from_iterator(n, train.labels().iter().map(|&v| v as f64));
    let problem = Problem {
        design,
        y,
        n: n as f64,
    };

    let mut beta = DVector::zeros(d + 1);
    let mut loss = problem.loss(&beta);
    let mut history = vec![loss];
    let mut fallback = false;
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    let mut iterations = 0;
    for _ in 0..=max_iter {
        let (grad, hess) = problem.gradient_hessian(&beta);
        grad_norm = grad.amax();
        if grad_norm <= tol {
            converged = true;
            break;
        }
        if iterations == max_iter {
            break;
        }
        iterations += 1;
        let direction = match hess.cholesky() {
            Some(chol) => chol.solve(&grad),
            None => {
                fallback = true;
                grad.clone()
            }
        };
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-12 {
            let candidate = &beta - &direction * step;
            let cand_loss = problem.loss(&candidate);
            if cand_loss <= loss {
                beta = candidate;
                loss = cand_loss;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        history.push(loss);
        if !improved {
            break;
        }
    }

    let weights: Vec<f64> = (0..d).map(|j| beta[j + 1] / scales[j]).collect();
    let intercept = beta[0]
        - weights
            .iter()
            .zip(&centers)
            .map(|(w, c)| w * c)
            .sum::<f64>();
    Ok(OracleModel {
        weights,
        intercept,
        converged,
        final_gradient_norm: grad_norm,
        iterations,
        gradient_fallback: fallback,
        loss_history: history,
    })
}

/// `sigmoid(w·x + b)` for every row.
pub fn ground_truth_probs<P: AsRef<[f64]>>(model: &OracleModel, rows: &[P]) -> Result<Vec<f64>> {
    rows.iter()
        .map(|x| {
            let x = x.as_ref();
            if x.len() != model.weights.len() {
                return Err(Error::DimensionMismatch {
                    expected: model.weights.len(),
                    got: x.len(),
                });
            }
            Ok(model.probability(x))
        })
        .collect()
}

fn check_probs(p_star: &[f64]) -> Result<()> {
    match p_star.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        Some(&bad) => Err(Error::InvalidProbability(bad)),
        None => Ok(()),
    }
}

fn redraw_from(p_star: &[f64], rng: &mut Rng) -> Vec<u8> {
    p_star
        .iter()
        .map(|&p| u8::from(rng::bernoulli(rng, p)))
        .collect()
}

/// Independent Bernoulli(`p*_i`) labels.
pub fn redraw_labels(p_star: &[f64], seed: u64) -> Result<Vec<u8>> {
    check_probs(p_star)?;
    Ok(redraw_from(p_star, &mut rng::seeded(seed)))
}

/// One realization's view of every evaluation point.
#[derive(Debug, Clone, PartialEq)]
pub struct RealizationRecord {
    pub points: Vec<PointRealization>,
    /// Mean of `p*` over the training rows sharing the point's leaf.
    pub conditional_means: Vec<f64>,
}

/// Fits one tree per generator and records, for every evaluation point, its
/// leaf and the leaf's conditional mean under `p_star`.
pub fn simulate_realizations<P, F>(
    base: &Dataset,
    p_star: &[f64],
    params: &TreeParams,
    eval_points: &[P],
    realizations: usize,
    stream: F,
) -> Result<Vec<RealizationRecord>>
where
    P: AsRef<[f64]> + Sync,
    F: Fn(usize) -> Rng + Sync,
{
    check_probs(p_star)?;
    if p_star.len() != base.n() {
        return Err(Error::LengthMismatch {
            left: base.n(),
            right: p_star.len(),
        });
    }
    par::map_range(realizations, |r| {
        let labels = redraw_from(p_star, &mut stream(r));
        let tree = fit_tree_with_labels(base, &labels, params)?;
        let mut points = Vec::with_capacity(eval_points.len());
        let mut conditional_means = Vec::with_capacity(eval_points.len());
        for x in eval_points {
            let leaf = tree.leaf_for(x.as_ref())?;
            points.push(PointRealization {
                n_leaf: leaf.n,
                p_hat: leaf.p_hat,
                prediction: leaf.p_hat,
            });
            conditional_means.push(mean(
                &leaf.members.iter().map(|&i| p_star[i]).collect::<Vec<_>>(),
            ));
        }
        Ok(RealizationRecord {
            points,
            conditional_means,
        })
    })
    .into_iter()
    .collect()
}

/// Per-point decompositions from a set of realizations.
pub fn decompose_records(records: &[RealizationRecord]) -> Result<Vec<Decomposition>> {
    let n_points = records.first().map_or(0, |r| r.points.len());
    (0..n_points)
        .map(|j| {
            let obs: Vec<_> = records.iter().map(|r| r.points[j]).collect();
            let cm: Vec<_> = records.iter().map(|r| r.conditional_means[j]).collect();
            let mut d = decompose_variance(&obs, &cm)?;
            d.point = j;
            Ok(d)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub points: Vec<Decomposition>,
    pub correlation: f64,
    pub median_relative_error: f64,
    pub realizations: usize,
    pub seed: u64,
    /// Which structural estimator fills `Decomposition::structural`.
    pub structural_estimator: String,
    pub oracle: OracleModel,
}

impl ValidationReport {
    fn summarize(
        points: Vec<Decomposition>,
        realizations: usize,
        seed: u64,
        oracle: OracleModel,
    ) -> Self {
        let est: Vec<f64> = points.iter().map(|d| d.total_estimated).collect();
        let sim: Vec<f64> = points.iter().map(|d| d.total_simulated).collect();
        let rel: Vec<f64> = points.iter().map(Decomposition::relative_error).collect();
        Self {
            correlation: pearson(&est, &sim),
            median_relative_error: median(&rel),
            points,
            realizations,
            seed,
            structural_estimator: "variance-of-conditional-means".into(),
            oracle,
        }
    }
}

/// Nested Monte Carlo check of the decomposition: fit the oracle on
/// `base`, redraw labels `r` times (realization `k` from substream
/// `(seed, k)`), fit a tree per realization and decompose the prediction
/// variance at each evaluation point.
pub fn validate_decomposition<P: AsRef<[f64]> + Sync>(
    base: &Dataset,
    r: usize,
    params: &TreeParams,
    eval_points: &[P],
    seed: u64,
) -> Result<ValidationReport> {
    if r < 2 {
        return Err(Error::InsufficientRealizations(r));
    }
    if eval_points.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let oracle = fit_logistic(base, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let p_star = oracle.probs(base)?;
    let records = simulate_realizations(base, &p_star, params, eval_points, r, |k| {
        rng::substream(seed, k as u64)
    })?;
    Ok(ValidationReport::summarize(
        decompose_records(&records)?,
        r,
        seed,
        oracle,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub max_depth: usize,
    pub test_fraction: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            max_depth: 12,
            test_fraction: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub min_leaf: usize,
    /// Mean plug-in leaf regret at the held-out points' leaves.
    pub leaf_regret: f64,
    pub log_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub realizations: usize,
    pub seed: u64,
    pub max_depth: usize,
    pub train_size: usize,
    pub test_size: usize,
}

impl SweepReport {
    pub fn grid(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.min_leaf).collect()
    }
}

pub fn leaf_size_sweep(base: &Dataset, grid: &[usize], r: usize, seed: u64) -> Result<SweepReport> {
    leaf_size_sweep_with(base, grid, r, seed, &SweepConfig::default())
}

/// Leaf-size trade-off: `base` is split into train/test, the oracle is fitted
/// on train, and for each `min_leaf` in `grid` the held-out leaf regret and
/// log loss are averaged over `r` label redraws of the training rows. The
/// same redraws are reused across grid values.
pub fn leaf_size_sweep_with(
    base: &Dataset,
    grid: &[usize],
    r: usize,
    seed: u64,
    config: &SweepConfig,
) -> Result<SweepReport> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) || grid[0] == 0 {
        return Err(Error::InvalidGrid(
            "min_leaf grid must be positive and strictly increasing".into(),
        ));
    }
    if r < 1 {
        return Err(Error::InsufficientRealizations(r));
    }
    let (train_idx, test_idx) =
        split_indices(base.n(), config.test_fraction, rng::derive_seed(seed, 0))?;
    let train = base.subset(&train_idx);
    let test = base.subset(&test_idx);
    if let Some(&too_big) = grid.iter().find(|&&g| g > train.n()) {
        return Err(Error::MinLeafExceedsData {
            min_leaf: too_big,
            n: train.n(),
        });
    }
    let oracle = fit_logistic(&train, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let p_star = oracle.probs(&train)?;

    // [realization][grid] -> (regret, loss)
    let per_realization = par::map_range(r, |k| -> Result<Vec<(f64, f64)>> {
        let labels = redraw_from(&p_star, &mut rng::substream(seed, k as u64));
        grid.iter()
            .map(|&min_leaf| {
                let params = TreeParams::new(min_leaf, config.max_depth);
                let tree = fit_tree_with_labels(&train, &labels, &params)?;
                let mut regrets = Vec::with_capacity(test.n());
                for x in test.rows() {
                    regrets.push(leaf_plugin(tree.leaf_for(x)?));
                }
                Ok((mean(&regrets), log_loss(&tree, &test)?))
            })
            .collect()
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let points = grid
        .iter()
        .enumerate()
        .map(|(g, &min_leaf)| {
            let regret: Vec<f64> = per_realization.iter().map(|v| v[g].0).collect();
            let loss: Vec<f64> = per_realization.iter().map(|v| v[g].1).collect();
            SweepPoint {
                min_leaf,
                leaf_regret: mean(&regret),
                log_loss: mean(&loss),
            }
        })
        .collect();
    Ok(SweepReport {
        points,
        realizations: r,
        seed,
        max_depth: config.max_depth,
        train_size: train.n(),
        test_size: test.n(),
    })
}
