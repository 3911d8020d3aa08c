//! Axis-aligned binary regression trees trained with squared-error splitting;
//! the base learner of the boosting loop.
//!
//! Training is deterministic: threshold candidates are the midpoints between
//! consecutive distinct sorted feature values, and ties in total squared
//! error are broken by lower feature index, then lower threshold.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tree growth limits. `min_leaf` is the minimum sample count per leaf;
/// `max_depth` counts split levels below the root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub min_leaf: usize,
    pub max_depth: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        Self {
            min_leaf: 30,
            max_depth: 4,
        }
    }
}

impl TreeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_leaf < 1 {
            return Err(Error::Config("min_leaf must be >= 1".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::Config("max_depth must be >= 1".into()));
        }
        Ok(())
    }
}

/// Arena node; children are indices into the node array.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// A trained regression tree. Routing rule: go left iff
/// `features[feature] <= threshold`. The root is node 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<TreeNode>,
    feature_dim: usize,
}

impl RegressionTree {
    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, TreeNode::Leaf { .. }))
            .count()
    }

    /// A tree with one leaf of the given value.
    pub fn constant(value: f64, feature_dim: usize) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { value }],
            feature_dim,
        }
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        if features.len() != self.feature_dim {
            return Err(Error::Shape(format!(
                "expected {} features, got {}",
                self.feature_dim,
                features.len()
            )));
        }
        Ok(self.predict_unchecked(features))
    }

    pub(crate) fn predict_unchecked(&self, features: &[f64]) -> f64 {
        debug_assert_eq!(features.len(), self.feature_dim);
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if features[feature] <= threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

/// One training point: a borrowed feature row and its regression target.
#[derive(Clone, Copy, Debug)]
pub struct RegressionSample<'a> {
    pub features: &'a [f64],
    pub target: f64,
}

/// Value of `predict_tree` as a free function, mirroring `train_tree`.
pub fn predict_tree(tree: &RegressionTree, features: &[f64]) -> Result<f64> {
    tree.predict(features)
}

/// Greedy top-down CART fit: each split minimizes the summed squared error of
/// the two children's means; leaves hold the mean target. Growth stops at
/// `max_depth`, when a node has fewer than `2 * min_leaf` samples, or when no
/// split strictly reduces squared error.
pub fn train_tree(samples: &[RegressionSample], config: &TreeConfig) -> Result<RegressionTree> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::EmptyData("no regression samples".into()));
    }
    let feature_dim = samples[0].features.len();
    for s in samples {
        if s.features.len() != feature_dim {
            return Err(Error::Shape(format!(
                "sample has {} features, expected {feature_dim}",
                s.features.len()
            )));
        }
        if !s.target.is_finite() || s.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("regression sample".into()));
        }
    }

    let mut builder = TreeBuilder {
        samples,
        config,
        nodes: Vec::new(),
    };
    let indices: Vec<usize> = (0..samples.len()).collect();
    builder.grow(indices, 0);
    Ok(RegressionTree {
        nodes: builder.nodes,
        feature_dim,
    })
}

struct TreeBuilder<'a, 'b> {
    samples: &'a [RegressionSample<'b>],
    config: &'a TreeConfig,
    nodes: Vec<TreeNode>,
}

struct SplitChoice {
    sse: f64,
    feature: usize,
    threshold: f64,
}

impl TreeBuilder<'_, '_> {
    fn grow(&mut self, indices: Vec<usize>, depth: usize) -> usize {
        let n = indices.len() as f64;
        let sum: f64 = indices.iter().map(|&i| self.samples[i].target).sum();
        let mean = sum / n;

        if depth >= self.config.max_depth
            || indices.len() < 2 * self.config.min_leaf
            || self.all_targets_equal(&indices)
        {
            return self.leaf(mean);
        }
        let sumsq: f64 = indices
            .iter()
            .map(|&i| self.samples[i].target * self.samples[i].target)
            .sum();
        let node_sse = sumsq - sum * sum / n;

        let Some(best) = self.best_split(&indices) else {
            return self.leaf(mean);
        };
        if node_sse - best.sse <= 0.0 {
            return self.leaf(mean);
        }

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .into_iter()
            .partition(|&i| self.samples[i].features[best.feature] <= best.threshold);
        debug_assert!(left_idx.len() >= self.config.min_leaf);
        debug_assert!(right_idx.len() >= self.config.min_leaf);

        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: mean }); // placeholder
        let left = self.grow(left_idx, depth + 1);
        let right = self.grow(right_idx, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
        };
        at
    }

    fn leaf(&mut self, value: f64) -> usize {
        self.nodes.push(TreeNode::Leaf { value });
        self.nodes.len() - 1
    }

    fn all_targets_equal(&self, indices: &[usize]) -> bool {
        let first = self.samples[indices[0]].target;
        indices.iter().all(|&i| self.samples[i].target == first)
    }

    /// Best (feature, threshold) over all features; `None` when no candidate
    /// satisfies the min_leaf constraint on both sides.
    fn best_split(&self, indices: &[usize]) -> Option<SplitChoice> {
        let dim = self.samples[indices[0]].features.len();
        let per_feature: Vec<Option<SplitChoice>> = (0..dim)
            .into_par_iter()
            .map(|f| self.best_split_on_feature(indices, f))
            .collect();
        let mut best: Option<SplitChoice> = None;
        for choice in per_feature.into_iter().flatten() {
            // strict < keeps the lowest feature index on ties
            match &best {
                Some(b) if choice.sse >= b.sse => {}
                _ => best = Some(choice),
            }
        }
        best
    }

    fn best_split_on_feature(&self, indices: &[usize], feature: usize) -> Option<SplitChoice> {
        let min_leaf = self.config.min_leaf;
        let n = indices.len();
        let mut order: Vec<usize> = indices.to_vec();
        order.sort_by(|&a, &b| {
            self.samples[a].features[feature]
                .partial_cmp(&self.samples[b].features[feature])
                .unwrap()
                .then(a.cmp(&b))
        });

        // prefix sums of targets over the feature-sorted order
        let mut prefix_sum = vec![0.0f64; n + 1];
        let mut prefix_sumsq = vec![0.0f64; n + 1];
        for (pos, &i) in order.iter().enumerate() {
            let t = self.samples[i].target;
            prefix_sum[pos + 1] = prefix_sum[pos] + t;
            prefix_sumsq[pos + 1] = prefix_sumsq[pos] + t * t;
        }
        let total_sum = prefix_sum[n];
        let total_sumsq = prefix_sumsq[n];

        let mut best: Option<SplitChoice> = None;
        for cut in min_leaf..=(n - min_leaf) {
            let lo = self.samples[order[cut - 1]].features[feature];
            let hi = self.samples[order[cut]].features[feature];
            if lo == hi {
                continue; // only boundaries between distinct values
            }
            let left_n = cut as f64;
            let right_n = (n - cut) as f64;
            let left_sum = prefix_sum[cut];
            let right_sum = total_sum - left_sum;
            let sse = (prefix_sumsq[cut] - left_sum * left_sum / left_n)
                + ((total_sumsq - prefix_sumsq[cut]) - right_sum * right_sum / right_n);
            let better = match &best {
                Some(b) => sse < b.sse, // ascending cut order keeps the lowest threshold on ties
                None => true,
            };
            if better {
                // midpoint threshold; fall back to the left value if rounding
                // would pull the boundary sample across the split
                let mid = 0.5 * (lo + hi);
                let threshold = if mid < hi { mid } else { lo };
                best = Some(SplitChoice {
                    sse,
                    feature,
                    threshold,
                });
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples<'a>(rows: &'a [(Vec<f64>, f64)]) -> Vec<RegressionSample<'a>> {
        rows.iter()
            .map(|(f, t)| RegressionSample {
                features: f,
                target: *t,
            })
            .collect()
    }

    #[test]
    fn constant_targets_make_single_leaf() {
        let rows: Vec<(Vec<f64>, f64)> = (0..40).map(|i| (vec![i as f64], 5.0)).collect();
        let s = samples(&rows);
        let tree = train_tree(&s, &TreeConfig::default()).unwrap();
        assert_eq!(tree.num_leaves(), 1);
        assert_eq!(tree.predict(&[123.0]).unwrap(), 5.0);
    }

    #[test]
    fn one_dimensional_step_recovers_means() {
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for _ in 0..30 {
            rows.push((vec![-1.0], -1.0));
        }
        for _ in 0..30 {
            rows.push((vec![1.0], 1.0));
        }
        let s = samples(&rows);
        let tree = train_tree(
            &s,
            &TreeConfig {
                min_leaf: 30,
                max_depth: 4,
            },
        )
        .unwrap();
        assert_eq!(tree.num_leaves(), 2);
        assert_eq!(tree.predict(&[-1.0]).unwrap(), -1.0);
        assert_eq!(tree.predict(&[1.0]).unwrap(), 1.0);
        // split threshold is the midpoint 0.0
        match tree.nodes()[0] {
            TreeNode::Split {
                feature, threshold, ..
            } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 0.0);
            }
            _ => panic!("expected a split at the root"),
        }
    }

    #[test]
    fn min_leaf_larger_than_n_forces_single_leaf() {
        let rows: Vec<(Vec<f64>, f64)> = (0..10).map(|i| (vec![i as f64], i as f64)).collect();
        let s = samples(&rows);
        let tree = train_tree(
            &s,
            &TreeConfig {
                min_leaf: 11,
                max_depth: 4,
            },
        )
        .unwrap();
        assert_eq!(tree.num_leaves(), 1);
        assert!((tree.predict(&[0.0]).unwrap() - 4.5).abs() < 1e-12);
    }

    #[test]
    fn empty_samples_error() {
        let err = train_tree(&[], &TreeConfig::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyData(_)));
    }

    #[test]
    fn inconsistent_dimensions_error() {
        let rows = vec![(vec![0.0, 1.0], 0.0), (vec![0.0], 1.0)];
        let s = samples(&rows);
        assert!(matches!(
            train_tree(&s, &TreeConfig::default()).unwrap_err(),
            Error::Shape(_)
        ));
    }

    #[test]
    fn predict_routes_and_checks_shape() {
        let tree = RegressionTree {
            nodes: vec![
                TreeNode::Split {
                    feature: 0,
                    threshold: 0.0,
                    left: 1,
                    right: 2,
                },
                TreeNode::Leaf { value: -1.0 },
                TreeNode::Leaf { value: 1.0 },
            ],
            feature_dim: 1,
        };
        assert_eq!(tree.predict(&[-2.0]).unwrap(), -1.0);
        assert_eq!(tree.predict(&[0.5]).unwrap(), 1.0);
        // boundary value routes left
        assert_eq!(tree.predict(&[0.0]).unwrap(), -1.0);
        assert!(matches!(
            tree.predict(&[0.0, 0.0]).unwrap_err(),
            Error::Shape(_)
        ));
        assert_eq!(predict_tree(&tree, &[1.0]).unwrap(), 1.0);
    }

    fn tree_sse(tree: &RegressionTree, s: &[RegressionSample]) -> f64 {
        s.iter()
            .map(|x| {
                let d = tree.predict_unchecked(x.features) - x.target;
                d * d
            })
            .sum()
    }

    #[test]
    fn splits_never_increase_training_sse_and_leaves_respect_min_leaf() {
        // pseudo-random but deterministic data
        let mut x = 0.618;
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for _ in 0..200 {
            let mut f = Vec::new();
            for _ in 0..3 {
                x = (x * 9.7 + 0.3) % 1.0;
                f.push(x);
            }
            x = (x * 9.7 + 0.3) % 1.0;
            rows.push((f, x * 2.0 - 1.0));
        }
        let s = samples(&rows);
        let config = TreeConfig {
            min_leaf: 7,
            max_depth: 5,
        };
        let tree = train_tree(&s, &config).unwrap();

        let n = s.len() as f64;
        let mean = s.iter().map(|r| r.target).sum::<f64>() / n;
        let root_sse: f64 = s.iter().map(|r| (r.target - mean).powi(2)).sum();
        assert!(tree_sse(&tree, &s) <= root_sse + 1e-9);

        // count samples per leaf by routing
        let mut leaf_counts = vec![0usize; tree.nodes().len()];
        for r in &s {
            let mut at = 0;
            loop {
                match tree.nodes()[at] {
                    TreeNode::Leaf { .. } => {
                        leaf_counts[at] += 1;
                        break;
                    }
                    TreeNode::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        at = if r.features[feature] <= threshold {
                            left
                        } else {
                            right
                        };
                    }
                }
            }
        }
        for (i, node) in tree.nodes().iter().enumerate() {
            if matches!(node, TreeNode::Leaf { .. }) {
                assert!(leaf_counts[i] >= config.min_leaf);
            }
        }
    }

    #[test]
    fn training_is_deterministic() {
        let mut x = 0.2;
        let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
        for _ in 0..150 {
            let mut f = Vec::new();
            for _ in 0..4 {
                x = (x * 5.9 + 0.7) % 1.0;
                f.push(x);
            }
            rows.push((f, x));
        }
        let s = samples(&rows);
        let config = TreeConfig {
            min_leaf: 5,
            max_depth: 4,
        };
        let a = train_tree(&s, &config).unwrap();
        let b = train_tree(&s, &config).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
