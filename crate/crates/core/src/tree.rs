//! Binary classification trees grown greedily with Gini impurity.
//!
//! Candidate thresholds are midpoints between consecutive distinct values
//! of a feature within the node. Among splits with equal impurity decrease
//! the lowest feature index wins, then the lowest threshold. Split quality
//! is compared in exact integer arithmetic so that the tie rule is not at
//! the mercy of rounding. Routing sends `x[feature] <= threshold` left.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Clip applied to probabilities inside [`log_loss`].
pub const LOG_LOSS_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub min_leaf: usize,
    /// 0 means the root is a leaf.
    pub max_depth: usize,
    pub min_impurity_decrease: f64,
    /// Reserved; induction is deterministic and does not consume it.
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            min_leaf: 20,
            max_depth: 8,
            min_impurity_decrease: 0.0,
            seed: 0,
        }
    }
}

impl TreeParams {
    pub fn new(min_leaf: usize, max_depth: usize) -> Self {
        Self {
            min_leaf,
            max_depth,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 {
            return Err(Error::InvalidParameter(
                "min_leaf must be at least 1".into(),
            ));
        }
        if self.min_impurity_decrease.is_nan() || self.min_impurity_decrease < 0.0 {
            return Err(Error::InvalidParameter(
                "min_impurity_decrease must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub leaf_id: usize,
    pub n: usize,
    pub positives: usize,
    pub p_hat: f64,
    /// Training row indices routed here; repeated for bootstrap resamples.
    pub members: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(Leaf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    n_features: usize,
    min_leaf: usize,
    /// Node 0 is the root.
    nodes: Vec<Node>,
    #[serde(skip)]
    leaf_nodes: Vec<usize>,
}

impl Tree {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn min_leaf(&self) -> usize {
        self.min_leaf
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.leaf_nodes.len()
    }

    pub fn leaves(&self) -> impl ExactSizeIterator<Item = &Leaf> + '_ {
        self.leaf_nodes.iter().map(move |&i| match &self.nodes[i] {
            Node::Leaf(leaf) => leaf,
            Node::Split { .. } => unreachable!("leaf index points at a split"),
        })
    }

    pub fn leaf(&self, leaf_id: usize) -> Option<&Leaf> {
        match self.nodes.get(*self.leaf_nodes.get(leaf_id)?) {
            Some(Node::Leaf(leaf)) => Some(leaf),
            _ => None,
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Leaf reached by `x`.
    pub fn leaf_for(&self, x: &[f64]) -> Result<&Leaf> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(leaf) => return Ok(leaf),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    }
                }
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Parses a tree and checks that the node list forms a proper binary
    /// tree rooted at node 0.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut tree: Tree = serde_json::from_str(text)?;
        tree.index_leaves()?;
        Ok(tree)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    fn index_leaves(&mut self) -> Result<()> {
        let bad = |msg: &str| Error::InvalidParameter(format!("malformed tree: {msg}"));
        if self.nodes.is_empty() {
            return Err(bad("no nodes"));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut leaves = Vec::new();
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if std::mem::replace(&mut seen[i], true) {
                return Err(bad("node reachable twice"));
            }
            match &self.nodes[i] {
                Node::Leaf(leaf) => leaves.push((leaf.leaf_id, i)),
                Node::Split {
                    feature,
                    left,
                    right,
                    ..
                } => {
                    if *feature >= self.n_features {
                        return Err(bad("feature index out of range"));
                    }
                    if *left >= self.nodes.len() || *right >= self.nodes.len() {
                        return Err(bad("child id out of range"));
                    }
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(bad("unreachable node"));
        }
        leaves.sort_unstable();
        if leaves.iter().enumerate().any(|(k, (id, _))| *id != k) {
            return Err(bad("leaf ids are not 0..n_leaves"));
        }
        self.leaf_nodes = leaves.into_iter().map(|(_, i)| i).collect();
        Ok(())
    }
}

pub fn fit_tree(train: &Dataset, params: &TreeParams) -> Result<Tree> {
    fit_tree_with_labels(train, train.labels(), params)
}

/// Fits on the features of `data` with replacement labels.
pub fn fit_tree_with_labels(data: &Dataset, labels: &[u8], params: &TreeParams) -> Result<Tree> {
    fit_tree_on_rows(data, labels, (0..data.n()).collect(), params)
}

/// Fits on the multiset `rows` of `data`; leaf members refer to indices of
/// `data`.
pub fn fit_tree_on_rows(
    data: &Dataset,
    labels: &[u8],
    rows: Vec<usize>,
    params: &TreeParams,
) -> Result<Tree> {
    params.validate()?;
    if labels.len() != data.n() {
        return Err(Error::LengthMismatch {
            left: data.n(),
            right: labels.len(),
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if rows.len() < params.min_leaf {
        return Err(Error::MinLeafExceedsData {
            min_leaf: params.min_leaf,
            n: rows.len(),
        });
    }
    let mut builder = Builder {
        data,
        labels,
        params,
        nodes: Vec::new(),
        leaf_nodes: Vec::new(),
        scratch: Vec::with_capacity(rows.len()),
    };
    builder.grow(rows, 0);
    Ok(Tree {
        n_features: data.d(),
        min_leaf: params.min_leaf,
        nodes: builder.nodes,
        leaf_nodes: builder.leaf_nodes,
    })
}

/// Weighted child impurity `pl(nl-pl)/nl + pr(nr-pr)/nr` as an exact
/// fraction. Lower is better.
#[derive(Debug, Clone, Copy)]
struct ChildImpurity {
    num: u128,
    den: u128,
}

impl ChildImpurity {
    fn new(nl: u64, pl: u64, nr: u64, pr: u64) -> Self {
        let (nl, pl, nr, pr) = (nl as u128, pl as u128, nr as u128, pr as u128);
        Self {
            num: pl * (nl - pl) * nr + pr * (nr - pr) * nl,
            den: nl * nr,
        }
    }

    fn cmp(&self, other: &Self) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }

    /// Gini decrease relative to a parent with `n` rows and `p` positives:
    /// `2/n * (p(n-p)/n - self)`.
    fn decrease(&self, n: u64, p: u64) -> f64 {
        let (n, p) = (n as i128, p as i128);
        let numer = p * (n - p) * self.den as i128 - self.num as i128 * n;
        2.0 * numer as f64 / (n as f64 * n as f64 * self.den as f64)
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    impurity: ChildImpurity,
}

struct Builder<'a> {
    data: &'a Dataset,
    labels: &'a [u8],
    params: &'a TreeParams,
    nodes: Vec<Node>,
    leaf_nodes: Vec<usize>,
    scratch: Vec<(f64, u8)>,
}

impl Builder<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let n = rows.len() as u64;
        let positives = rows.iter().filter(|&&i| self.labels[i] == 1).count() as u64;
        let pure = positives == 0 || positives == n;
        let can_split =
            !pure && depth < self.params.max_depth && rows.len() >= 2 * self.params.min_leaf;
        let best = if can_split {
            self.best_split(&rows)
        } else {
            None
        };
        let best =
            best.filter(|c| c.impurity.decrease(n, positives) >= self.params.min_impurity_decrease);

        let id = self.nodes.len();
        match best {
            None => {
                self.leaf_nodes.push(id);
                self.nodes.push(Node::Leaf(Leaf {
                    leaf_id: self.leaf_nodes.len() - 1,
                    n: rows.len(),
                    positives: positives as usize,
                    p_hat: positives as f64 / n as f64,
                    members: rows,
                }));
            }
            Some(c) => {
                // placeholder, children fill in below
                self.nodes.push(Node::Split {
                    feature: c.feature,
                    threshold: c.threshold,
                    left: 0,
                    right: 0,
                });
                let (l, r): (Vec<usize>, Vec<usize>) = rows
                    .into_iter()
                    .partition(|&i| self.data.value(i, c.feature) <= c.threshold);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                if let Node::Split {
                    left: ls,
                    right: rs,
                    ..
                } = &mut self.nodes[id]
                {
                    *ls = left;
                    *rs = right;
                }
            }
        }
        id
    }

    fn best_split(&mut self, rows: &[usize]) -> Option<Candidate> {
        let min_leaf = self.params.min_leaf;
        let m = rows.len();
        let total_pos = rows.iter().filter(|&&i| self.labels[i] == 1).count() as u64;
        let mut best: Option<Candidate> = None;
        for feature in 0..self.data.d() {
            self.scratch.clear();
            self.scratch.extend(
                rows.iter()
                    .map(|&i| (self.data.value(i, feature), self.labels[i])),
            );
            self.scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0u64;
            for k in 0..m - 1 {
                left_pos += self.scratch[k].1 as u64;
                let nl = k + 1;
                if nl < min_leaf {
                    continue;
                }
                if m - nl < min_leaf {
                    break;
                }
                let (lo, hi) = (self.scratch[k].0, self.scratch[k + 1].0);
                if lo == hi {
                    continue;
                }
                let impurity =
                    ChildImpurity::new(nl as u64, left_pos, (m - nl) as u64, total_pos - left_pos);
                if best.is_none_or(|b| impurity.cmp(&b.impurity) == Ordering::Less) {
                    best = Some(Candidate {
                        feature,
                        threshold: lo + (hi - lo) / 2.0,
                        impurity,
                    });
                }
            }
        }
        best
    }
}

/// Stored `p_hat` of the leaf reached by `x`.
pub fn predict_proba(tree: &Tree, x: &[f64]) -> Result<f64> {
    Ok(tree.leaf_for(x)?.p_hat)
}

/// Id of the leaf reached by `x`.
pub fn route(tree: &Tree, x: &[f64]) -> Result<usize> {
    Ok(tree.leaf_for(x)?.leaf_id)
}

/// Mean binary cross-entropy on `eval` with probabilities clipped to
/// `[LOG_LOSS_EPS, 1 - LOG_LOSS_EPS]`.
pub fn log_loss(tree: &Tree, eval: &Dataset) -> Result<f64> {
    if eval.is_empty() {
        return Err(Error::EmptyEvalSet);
    }
    let mut total = 0.0;
    for (x, &y) in eval.rows().zip(eval.labels()) {
        let p = predict_proba(tree, x)?.clamp(LOG_LOSS_EPS, 1.0 - LOG_LOSS_EPS);
        total -= if y == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(total / eval.n() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_d(xs: &[f64], ys: &[u8]) -> Dataset {
        Dataset::from_rows(
            &xs.iter().map(|&x| vec![x]).collect::<Vec<_>>(),
            ys.to_vec(),
        )
        .unwrap()
    }

    #[test]
    fn constant_labels_give_single_leaf() {
        let ds = one_d(&[1.0, 2.0, 3.0], &[1, 1, 1]);
        let tree = fit_tree(&ds, &TreeParams::new(1, 5)).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        let leaf = tree.leaf(0).unwrap();
        assert_eq!((leaf.n, leaf.p_hat), (3, 1.0));
    }

    #[test]
    fn four_point_split() {
        let ds = one_d(&[1.0, 2.0, 3.0, 4.0], &[0, 0, 1, 1]);
        let tree = fit_tree(&ds, &TreeParams::new(1, 5)).unwrap();
        match &tree.nodes()[0] {
            Node::Split {
                feature, threshold, ..
            } => assert_eq!((*feature, *threshold), (0, 2.5)),
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(predict_proba(&tree, &[1.7]).unwrap(), 0.0);
        assert_eq!(predict_proba(&tree, &[3.2]).unwrap(), 1.0);
        assert_eq!(
            predict_proba(&tree, &[2.5]).unwrap(),
            0.0,
            "ties route left"
        );
        assert_eq!(
            route(&tree, &[1.7]).unwrap(),
            tree.leaf_for(&[1.0]).unwrap().leaf_id
        );
        assert!(log_loss(&tree, &ds).unwrap() <= 1.1e-12);
    }

    #[test]
    fn depth_zero_is_mean_leaf() {
        let ds = one_d(&[1.0, 2.0, 3.0, 4.0], &[1, 1, 0, 1]);
        let tree = fit_tree(&ds, &TreeParams::new(1, 0)).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(predict_proba(&tree, &[100.0]).unwrap(), 0.75);
    }

    #[test]
    fn constant_half_gives_ln2() {
        let ds = one_d(&[1.0, 2.0], &[0, 1]);
        let tree = fit_tree(&ds, &TreeParams::new(1, 0)).unwrap();
        approx::assert_relative_eq!(log_loss(&tree, &ds).unwrap(), std::f64::consts::LN_2);
    }

    #[test]
    fn errors() {
        let ds = one_d(&[1.0, 2.0], &[0, 1]);
        assert!(matches!(
            fit_tree(&ds, &TreeParams::new(3, 2)),
            Err(Error::MinLeafExceedsData { .. })
        ));
        let empty = Dataset::from_rows(&[], vec![]).unwrap();
        assert!(matches!(
            fit_tree(&empty, &TreeParams::new(1, 2)),
            Err(Error::EmptyTrainingSet)
        ));
        let tree = fit_tree(&ds, &TreeParams::new(1, 2)).unwrap();
        assert!(matches!(
            predict_proba(&tree, &[1.0, 2.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let empty_eval = one_d(&[], &[]);
        assert!(matches!(
            log_loss(&tree, &empty_eval),
            Err(Error::EmptyEvalSet)
        ));
        assert!(fit_tree(&ds, &TreeParams::new(0, 2)).is_err());
    }

    #[test]
    fn min_leaf_blocks_small_children() {
        let ds = one_d(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0, 1, 1, 1, 1]);
        let tree = fit_tree(&ds, &TreeParams::new(2, 3)).unwrap();
        assert!(tree.leaves().all(|l| l.n >= 2));
    }

    #[test]
    fn min_impurity_decrease_stops_growth() {
        let ds = one_d(&[1.0, 2.0, 3.0, 4.0], &[0, 1, 0, 1]);
        let mut params = TreeParams::new(1, 5);
        params.min_impurity_decrease = 0.5;
        assert_eq!(fit_tree(&ds, &params).unwrap().n_leaves(), 1);
    }

    #[test]
    fn json_round_trip() {
        let ds = one_d(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0, 0, 1, 0, 1, 1]);
        let tree = fit_tree(&ds, &TreeParams::new(1, 4)).unwrap();
        let back = Tree::from_json(&tree.to_json().unwrap()).unwrap();
        assert_eq!(tree, back);
        assert!(Tree::from_json(r#"{"n_features":1,"min_leaf":1,"nodes":[]}"#).is_err());
        let cyclic = r#"{"n_features":1,"min_leaf":1,"nodes":[
            {"type":"split","feature":0,"threshold":0.0,"left":0,"right":0}]}"#;
        assert!(Tree::from_json(cyclic).is_err());
    }
}
