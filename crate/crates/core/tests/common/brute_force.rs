//! Exhaustive reference for greedy CART growth on tiny datasets.
//!
//! Every candidate threshold is scored in plain floating point from scratch;
//! ties (within 1e-12) go to the lowest feature, then the lowest threshold.

#![allow(dead_code, clippy::needless_range_loop)]

use regret_tree::tree::{Node, Tree};
use regret_tree::TreeParams;

#[derive(Debug, Clone, PartialEq)]
pub enum RefNode {
    Leaf {
        rows: Vec<usize>,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<RefNode>,
        right: Box<RefNode>,
    },
}

fn gini(rows: &[usize], y: &[u8]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let p = rows.iter().filter(|&&i| y[i] == 1).count() as f64 / rows.len() as f64;
    2.0 * p * (1.0 - p)
}

/// Best (feature, threshold, decrease), or `None` when no split is allowed.
pub fn best_split(
    x: &[Vec<f64>],
    y: &[u8],
    rows: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64, f64)> {
    let n = rows.len() as f64;
    let parent = gini(rows, y);
    let d = x.first().map_or(0, Vec::len);
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..d {
        let mut values: Vec<f64> = rows.iter().map(|&i| x[i][f]).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][f] <= t);
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            let child = l.len() as f64 / n * gini(&l, y) + r.len() as f64 / n * gini(&r, y);
            let dec = parent - child;
            match best {
                Some((_, _, b)) if dec <= b + 1e-12 => {}
                _ => best = Some((f, t, dec)),
            }
        }
    }
    best
}

pub fn grow(x: &[Vec<f64>], y: &[u8], rows: Vec<usize>, depth: usize, p: &TreeParams) -> RefNode {
    let pos = rows.iter().filter(|&&i| y[i] == 1).count();
    let stop = pos == 0 || pos == rows.len() || depth >= p.max_depth || rows.len() < 2 * p.min_leaf;
    let split = if stop {
        None
    } else {
        best_split(x, y, &rows, p.min_leaf)
    };
    match split {
        Some((f, t, dec)) if dec >= p.min_impurity_decrease - 1e-12 => {
            let (l, r) = rows.iter().partition(|&&i| x[i][f] <= t);
            RefNode::Split {
                feature: f,
                threshold: t,
                left: Box::new(grow(x, y, l, depth + 1, p)),
                right: Box::new(grow(x, y, r, depth + 1, p)),
            }
        }
        _ => RefNode::Leaf { rows },
    }
}

/// First disagreement between a fitted tree and the reference, if any.
pub fn compare(tree: &Tree, node: usize, reference: &RefNode) -> Result<(), String> {
    match (&tree.nodes()[node], reference) {
        (Node::Leaf(leaf), RefNode::Leaf { rows }) => {
            let mut a = leaf.members.clone();
            let mut b = rows.clone();
            a.sort_unstable();
            b.sort_unstable();
            if a == b {
                Ok(())
            } else {
                Err(format!("leaf members {a:?} vs {b:?}"))
            }
        }
        (
            Node::Split {
                feature,
                threshold,
                left,
                right,
            },
            RefNode::Split {
                feature: f,
                threshold: t,
                left: l,
                right: r,
            },
        ) => {
            if feature != f || (threshold - t).abs() > 1e-9 {
                return Err(format!("split ({feature}, {threshold}) vs ({f}, {t})"));
            }
            compare(tree, *left, l)?;
            compare(tree, *right, r)
        }
        (got, want) => Err(format!("node kind differs: {got:?} vs {want:?}")),
    }
}
