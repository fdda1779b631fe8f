//! Least-squares regression trees: greedy splits minimizing the summed
//! squared error of the children around their means.

use super::{FeatureMatrix, GbtError};

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    pub root: TreeNode,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if row[*feature] <= *threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    /// True when the tree is one leaf predicting exactly zero — the
    /// boosting loop's "no further improvement" signal.
    pub fn is_zero_leaf(&self) -> bool {
        matches!(self.root, TreeNode::Leaf { value } if value == 0.0)
    }

    pub fn n_leaves(&self) -> usize {
        fn walk(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 1,
                TreeNode::Split { left, right, .. } => walk(left) + walk(right),
            }
        }
        walk(&self.root)
    }

    pub fn depth(&self) -> usize {
        fn walk(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(left).max(walk(right)),
            }
        }
        walk(&self.root)
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    children_sse: f64,
}

/// Best split of the given rows, or `None` when no split produces two
/// children of `min_samples_leaf` rows with a strict error reduction.
/// Thresholds are midpoints between consecutive distinct sorted values;
/// ties break to the lowest feature index, then the smallest threshold.
fn best_split(
    x: &FeatureMatrix,
    targets: &[f64],
    rows: &[usize],
    min_samples_leaf: usize,
) -> Option<Candidate> {
    let n = rows.len();
    if n < 2 * min_samples_leaf {
        return None;
    }
    let total_sum: f64 = rows.iter().map(|&r| targets[r]).sum();
    let total_sq: f64 = rows.iter().map(|&r| targets[r] * targets[r]).sum();
    let parent_sse = total_sq - total_sum * total_sum / n as f64;

    let mut best: Option<Candidate> = None;
    let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
    for feature in 0..x.n_cols {
        pairs.clear();
        pairs.extend(rows.iter().map(|&r| (x.row(r)[feature], targets[r])));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_sum = 0.0;
        let mut left_sq = 0.0;
        for i in 0..n - 1 {
            left_sum += pairs[i].1;
            left_sq += pairs[i].1 * pairs[i].1;
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < min_samples_leaf || n_right < min_samples_leaf {
                continue;
            }
            if pairs[i].0 == pairs[i + 1].0 {
                continue; // no boundary between equal values
            }
            let right_sum = total_sum - left_sum;
            let right_sq = total_sq - left_sq;
            let sse = (left_sq - left_sum * left_sum / n_left as f64)
                + (right_sq - right_sum * right_sum / n_right as f64);
            if sse >= parent_sse {
                continue; // no strict improvement
            }
            let threshold = pairs[i].0 + (pairs[i + 1].0 - pairs[i].0) / 2.0;
            let better = match &best {
                None => true,
                Some(b) => {
                    sse < b.children_sse
                        || (sse == b.children_sse
                            && (feature < b.feature
                                || (feature == b.feature && threshold < b.threshold)))
                }
            };
            if better {
                best = Some(Candidate {
                    feature,
                    threshold,
                    children_sse: sse,
                });
            }
        }
    }
    best
}

fn grow(
    x: &FeatureMatrix,
    targets: &[f64],
    rows: Vec<usize>,
    depth_left: usize,
    min_samples_leaf: usize,
) -> TreeNode {
    let mean = rows.iter().map(|&r| targets[r]).sum::<f64>() / rows.len() as f64;
    if depth_left == 0 {
        return TreeNode::Leaf { value: mean };
    }
    let Some(split) = best_split(x, targets, &rows, min_samples_leaf) else {
        return TreeNode::Leaf { value: mean };
    };
    let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
    for r in rows {
        if x.row(r)[split.feature] <= split.threshold {
            left_rows.push(r);
        } else {
            right_rows.push(r);
        }
    }
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(x, targets, left_rows, depth_left - 1, min_samples_leaf)),
        right: Box::new(grow(
            x,
            targets,
            right_rows,
            depth_left - 1,
            min_samples_leaf,
        )),
    }
}

/// Fits one tree to `residuals` (aligned with the matrix rows).
pub fn fit_tree(
    x: &FeatureMatrix,
    residuals: &[f64],
    max_depth: usize,
    min_samples_leaf: usize,
) -> Result<RegressionTree, GbtError> {
    if x.n_rows == 0 {
        return Err(GbtError::EmptyInput);
    }
    assert!(min_samples_leaf >= 1);
    if residuals.len() != x.n_rows {
        return Err(GbtError::FeatureCountMismatch {
            expected: x.n_rows,
            got: residuals.len(),
        });
    }
    let rows: Vec<usize> = (0..x.n_rows).collect();
    Ok(RegressionTree {
        root: grow(x, residuals, rows, max_depth, min_samples_leaf),
    })
}
