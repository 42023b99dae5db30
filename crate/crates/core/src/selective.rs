//! Selective prediction: abstain on the highest-regret instances and track
//! recall on what remains.
//!
//! Recall at a coverage level is computed over the retained instances only,
//! `TP / (TP + FN)` with hard predictions at the 0.5 threshold. A retained
//! set without positive labels has undefined recall (`None`).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Leaf,
    Structural,
    Total,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Leaf, Strategy::Structural, Strategy::Total];

    pub fn as_str(&self) -> &'static str {
        match self {
            Strategy::Leaf => "leaf",
            Strategy::Structural => "structural",
            Strategy::Total => "total",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "leaf" => Ok(Strategy::Leaf),
            "structural" => Ok(Strategy::Structural),
            "total" => Ok(Strategy::Total),
            other => Err(Error::InvalidParameter(format!(
                "unknown strategy {other:?}"
            ))),
        }
    }
}

/// Per-instance regret components; `total` is always `leaf + structural`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretScores {
    leaf: Vec<f64>,
    structural: Vec<f64>,
    total: Vec<f64>,
}

impl RegretScores {
    pub fn new(leaf: Vec<f64>, structural: Vec<f64>) -> Result<Self> {
        if leaf.len() != structural.len() {
            return Err(Error::LengthMismatch {
                left: leaf.len(),
                right: structural.len(),
            });
        }
        if let Some(&bad) = leaf
            .iter()
            .chain(&structural)
            .find(|v| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::InvalidParameter(format!(
                "regret score {bad} is not a finite non-negative value"
            )));
        }
        let total = leaf.iter().zip(&structural).map(|(a, b)| a + b).collect();
        Ok(Self {
            leaf,
            structural,
            total,
        })
    }

    pub fn len(&self) -> usize {
        self.leaf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaf.is_empty()
    }

    pub fn leaf(&self) -> &[f64] {
        &self.leaf
    }

    pub fn structural(&self) -> &[f64] {
        &self.structural
    }

    pub fn total(&self) -> &[f64] {
        &self.total
    }

    pub fn get(&self, strategy: Strategy) -> &[f64] {
        match strategy {
            Strategy::Leaf => &self.leaf,
            Strategy::Structural => &self.structural,
            Strategy::Total => &self.total,
        }
    }
}

/// Instance indices ordered from most to least stable; ties by index.
pub fn rank_by_regret(scores: &RegretScores, strategy: Strategy) -> Result<Vec<usize>> {
    if scores.is_empty() {
        return Err(Error::EmptyScores);
    }
    let s = scores.get(strategy);
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]).then(a.cmp(&b)));
    Ok(order)
}

/// Confidence baseline: descending `|p - 0.5|`, ties by index.
pub fn rank_by_confidence(probabilities: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..probabilities.len()).collect();
    let margin = |i: usize| (probabilities[i] - DECISION_THRESHOLD).abs();
    order.sort_by(|&a, &b| margin(b).total_cmp(&margin(a)).then(a.cmp(&b)));
    order
}

pub fn hard_predictions(probabilities: &[f64]) -> Vec<u8> {
    probabilities
        .iter()
        .map(|&p| u8::from(p >= DECISION_THRESHOLD))
        .collect()
}

/// `ceil(coverage * n)`, robust to representation error such as
/// `0.7 * 10 = 7.000000000000001`.
pub fn retained_count(coverage: f64, n: usize) -> usize {
    (((coverage * n as f64) - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// 100% down to 10% in 5% steps.
pub fn default_coverage_grid() -> Vec<f64> {
    (0..=18).map(|k| (100 - 5 * k) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub coverage: f64,
    pub recall: Option<f64>,
    pub retained: usize,
    pub retained_positives: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectiveCurve {
    pub strategy: Strategy,
    pub points: Vec<CurvePoint>,
}

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if let Some(bad) = grid.iter().find(|c| !(**c > 0.0 && **c <= 1.0)) {
        return Err(Error::InvalidGrid(format!("coverage {bad} outside (0, 1]")));
    }
    if grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidGrid(
            "coverage levels must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// Recall on the `ceil(c * n)` lowest-regret instances for each coverage `c`.
pub fn recall_coverage_curve(
    predictions: &[u8],
    labels: &[u8],
    scores: &RegretScores,
    strategy: Strategy,
    grid: &[f64],
) -> Result<SelectiveCurve> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    validate_grid(grid)?;
    let order = rank_by_regret(scores, strategy)?;
    curve_from_order(predictions, labels, &order, strategy, grid)
}

fn curve_from_order(
    predictions: &[u8],
    labels: &[u8],
    order: &[usize],
    strategy: Strategy,
    grid: &[f64],
) -> Result<SelectiveCurve> {
    let n = labels.len();
    // prefix counts over the ranking: positives and true positives
    let mut pos = vec![0usize; n + 1];
    let mut tp = vec![0usize; n + 1];
    for (k, &i) in order.iter().enumerate() {
        let is_pos = labels[i] == 1;
        pos[k + 1] = pos[k] + usize::from(is_pos);
        tp[k + 1] = tp[k] + usize::from(is_pos && predictions[i] == 1);
    }
    let points = grid
        .iter()
        .map(|&coverage| {
            let retained = retained_count(coverage, n);
            let positives = pos[retained];
            CurvePoint {
                coverage,
                recall: (positives > 0).then(|| tp[retained] as f64 / positives as f64),
                retained,
                retained_positives: positives,
            }
        })
        .collect();
    Ok(SelectiveCurve { strategy, points })
}

/// Largest coverage whose recall reaches `target_recall`.
pub fn coverage_at_target(curve: &SelectiveCurve, target_recall: f64) -> Option<f64> {
    curve
        .points
        .iter()
        .filter(|p| p.recall.is_some_and(|r| r >= target_recall))
        .map(|p| p.coverage)
        .max_by(f64::total_cmp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(leaf: &[f64], structural: &[f64]) -> RegretScores {
        RegretScores::new(leaf.to_vec(), structural.to_vec()).unwrap()
    }

    #[test]
    fn ranking_examples() {
        let s = scores(&[0.2, 0.2, 0.2], &[0.0, 0.0, 0.0]);
        assert_eq!(rank_by_regret(&s, Strategy::Leaf).unwrap(), vec![0, 1, 2]);
        let s = scores(&[0.3, 0.1, 0.2], &[0.0; 3]);
        assert_eq!(rank_by_regret(&s, Strategy::Leaf).unwrap(), vec![1, 2, 0]);
        let s = scores(&[0.0, 0.1], &[0.2, 0.0]);
        assert_eq!(rank_by_regret(&s, Strategy::Total).unwrap(), vec![1, 0]);
        let empty = scores(&[], &[]);
        assert!(matches!(
            rank_by_regret(&empty, Strategy::Total),
            Err(Error::EmptyScores)
        ));
    }

    #[test]
    fn total_is_sum() {
        let s = scores(&[0.1, 0.25], &[0.2, 0.5]);
        assert_eq!(s.total(), &[0.1 + 0.2, 0.25 + 0.5]);
        assert!(RegretScores::new(vec![-1.0], vec![0.0]).is_err());
        assert!(RegretScores::new(vec![0.0], vec![]).is_err());
    }

    #[test]
    fn confidence_ranking() {
        assert_eq!(
            rank_by_confidence(&[0.5, 0.875, 0.25, 0.0]),
            vec![3, 1, 2, 0]
        );
    }

    #[test]
    fn retained_count_is_ceiling() {
        assert_eq!(retained_count(0.7, 10), 7);
        assert_eq!(retained_count(0.71, 10), 8);
        assert_eq!(retained_count(1.0, 10), 10);
        assert_eq!(retained_count(0.05, 10), 1);
    }

    #[test]
    fn default_grid_shape() {
        let g = default_coverage_grid();
        assert_eq!(g.len(), 19);
        assert_eq!(g[0], 1.0);
        assert_eq!(*g.last().unwrap(), 0.1);
        validate_grid(&g).unwrap();
    }

    #[test]
    fn grid_errors() {
        let s = scores(&[0.0], &[0.0]);
        assert!(matches!(
            recall_coverage_curve(&[1], &[1], &s, Strategy::Leaf, &[]),
            Err(Error::EmptyGrid)
        ));
        assert!(matches!(
            recall_coverage_curve(&[1], &[1], &s, Strategy::Leaf, &[0.5, 1.0]),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            recall_coverage_curve(&[1], &[1], &s, Strategy::Leaf, &[1.5]),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            recall_coverage_curve(&[1, 0], &[1], &s, Strategy::Leaf, &[1.0]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn full_coverage_is_plain_recall() {
        let preds = [1, 0, 1, 1, 0];
        let labels = [1, 1, 0, 1, 0];
        let s = scores(&[0.5, 0.1, 0.3, 0.2, 0.0], &[0.0; 5]);
        let c = recall_coverage_curve(&preds, &labels, &s, Strategy::Leaf, &[1.0]).unwrap();
        assert_eq!(c.points[0].recall, Some(2.0 / 3.0));
        assert_eq!(c.points[0].retained, 5);
        assert_eq!(c.points[0].retained_positives, 3);
    }

    #[test]
    fn undefined_recall_without_positives() {
        let preds = [0, 1];
        let labels = [0, 1];
        let s = scores(&[0.0, 1.0], &[0.0, 0.0]);
        let c = recall_coverage_curve(&preds, &labels, &s, Strategy::Leaf, &[1.0, 0.5]).unwrap();
        assert_eq!(c.points[0].recall, Some(1.0));
        assert_eq!(c.points[1].recall, None);
        assert_eq!(c.points[1].retained_positives, 0);
    }

    #[test]
    fn abstention_removes_misclassified_positives() {
        // ids 0..4: stable, correctly classified positives with zero regret;
        // ids 4..8: unstable positives predicted negative
        let preds = [1, 1, 1, 1, 0, 0, 0, 1];
        let labels = [1; 8];
        let s = scores(
            &[0.0, 0.0, 0.0, 0.0, 0.02, 0.03, 0.02, 0.01],
            &[0.0, 0.0, 0.0, 0.0, 0.05, 0.04, 0.06, 0.05],
        );
        let c = recall_coverage_curve(&preds, &labels, &s, Strategy::Total, &[1.0, 0.5]).unwrap();
        assert_eq!(c.points[1].recall, Some(1.0));
        assert!(c.points[0].recall.unwrap() < 1.0);
    }

    #[test]
    fn coverage_at_target_examples() {
        let point = |coverage, recall| CurvePoint {
            coverage,
            recall: Some(recall),
            retained: 0,
            retained_positives: 0,
        };
        let curve = SelectiveCurve {
            strategy: Strategy::Total,
            points: vec![point(1.0, 0.92), point(0.8, 0.97), point(0.6, 1.0)],
        };
        assert_eq!(coverage_at_target(&curve, 0.95), Some(0.8));
        assert_eq!(coverage_at_target(&curve, 0.0), Some(1.0));
        assert_eq!(coverage_at_target(&curve, 1.01), None);
    }

    #[test]
    fn strategy_parse() {
        for s in Strategy::ALL {
            assert_eq!(s.as_str().parse::<Strategy>().unwrap(), s);
        }
        assert!("bogus".parse::<Strategy>().is_err());
    }
}
