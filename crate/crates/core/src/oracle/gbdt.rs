//! Gradient-boosted decision tree ensembles evaluated from serialized trees.
//!
//! Each tree is a binary tree over axis-aligned splits: `x[feature] <=
//! threshold` descends left, otherwise right. Binary ensembles classify by
//! the sign of the total leaf sum (sum `>= 0` is class 1); multi-class
//! ensembles sum per-class scores and take the argmax.

use super::{Label, OracleError};

#[derive(Clone, Debug, PartialEq)]
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

/// One tree contributing to the score of `class`. Node 0 is the root;
/// children are referenced by index into `nodes`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub class: usize,
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    /// Walks the (validated) tree; never loops because validation proved the
    /// reachable node graph acyclic.
    fn score(&self, x: &[f64]) -> f64 {
        let mut idx = 0;
        loop {
            match &self.nodes[idx] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    fn validate(&self, index: usize, dim: usize, num_classes: usize) -> Result<(), OracleError> {
        let at = |msg: String| OracleError::InvalidModel(format!("gbdt tree {index}: {msg}"));
        if self.class >= num_classes {
            return Err(at(format!(
                "class {} out of range (k = {num_classes})",
                self.class
            )));
        }
        if self.nodes.is_empty() {
            return Err(at("no nodes".into()));
        }
        // Depth-first walk from the root: every reference must resolve, and no
        // node may be reached twice (that would make the structure a DAG or a
        // cycle rather than a tree).
        let mut visited = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            if node >= self.nodes.len() {
                return Err(at(format!("node reference {node} out of range")));
            }
            if visited[node] {
                return Err(at(format!(
                    "node {node} reachable twice (cycle or shared child)"
                )));
            }
            visited[node] = true;
            match &self.nodes[node] {
                TreeNode::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(at(format!("node {node} has non-finite leaf value")));
                    }
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if *feature >= dim {
                        return Err(at(format!(
                            "node {node} splits on feature {feature}, dimension is {dim}"
                        )));
                    }
                    if !threshold.is_finite() {
                        return Err(at(format!("node {node} has non-finite threshold")));
                    }
                    stack.push(*left);
                    stack.push(*right);
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GbdtModel {
    num_classes: usize,
    dim: usize,
    trees: Vec<Tree>,
}

impl GbdtModel {
    pub fn new(num_classes: usize, dim: usize, trees: Vec<Tree>) -> Result<Self, OracleError> {
        if num_classes < 2 {
            return Err(OracleError::InvalidModel(format!(
                "gbdt needs at least 2 classes, got {num_classes}"
            )));
        }
        if dim == 0 {
            return Err(OracleError::InvalidModel(
                "gbdt dimension must be >= 1".into(),
            ));
        }
        if trees.is_empty() {
            return Err(OracleError::InvalidModel("gbdt has no trees".into()));
        }
        for (i, tree) in trees.iter().enumerate() {
            tree.validate(i, dim, num_classes)?;
        }
        Ok(GbdtModel {
            num_classes,
            dim,
            trees,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        if self.num_classes == 2 {
            // Binary ensembles carry a single score pool; sign decides.
            let total: f64 = self.trees.iter().map(|t| t.score(x)).sum();
            Label(usize::from(total >= 0.0))
        } else {
            let mut sums = vec![0.0; self.num_classes];
            for tree in &self.trees {
                sums[tree.class] += tree.score(x);
            }
            let mut best = 0;
            for (i, s) in sums.iter().enumerate().skip(1) {
                if *s > sums[best] {
                    best = i;
                }
            }
            Label(best)
        }
    }
}

/// One axis-aligned stump: `x[feature] <= threshold` scores `left_value`,
/// otherwise `right_value`.
pub fn stump(
    class: usize,
    feature: usize,
    threshold: f64,
    left_value: f64,
    right_value: f64,
) -> Tree {
    Tree {
        class,
        nodes: vec![
            TreeNode::Split {
                feature,
                threshold,
                left: 1,
                right: 2,
            },
            TreeNode::Leaf { value: left_value },
            TreeNode::Leaf { value: right_value },
        ],
    }
}
