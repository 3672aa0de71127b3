//! CART trees (Gini impurity) and bagged forests.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::rng::SeedStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: Some(5),
            min_samples_leaf: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Columns considered per split; `None` means `round(sqrt(width))`.
    pub max_features: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 200,
            max_depth: Some(7),
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        p: f64,
    },
    /// Rows with `x[column] <= threshold` go left.
    Split {
        column: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeHead {
    nodes: Vec<TreeNode>,
}

struct Builder<'a> {
    x: &'a [f64],
    width: usize,
    labels: &'a [u8],
    max_depth: usize,
    min_leaf: usize,
    max_features: usize,
    nodes: Vec<TreeNode>,
}

impl DecisionTreeHead {
    /// A single-leaf tree.
    pub fn leaf(p: f64) -> Self {
        Self {
            nodes: vec![TreeNode::Leaf { p }],
        }
    }

    pub fn from_nodes(nodes: Vec<TreeNode>) -> Self {
        Self { nodes }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { p } => return p,
                TreeNode::Split {
                    column,
                    threshold,
                    left,
                    right,
                } => at = if x[column] <= threshold { left } else { right },
            }
        }
    }

    pub(super) fn validate(&self, width: usize) -> bool {
        let n = self.nodes.len();
        !self.nodes.is_empty()
            && self.nodes.iter().enumerate().all(|(i, node)| match *node {
                TreeNode::Leaf { p } => (0.0..=1.0).contains(&p),
                TreeNode::Split {
                    column,
                    threshold,
                    left,
                    right,
                } => {
                    column < width
                        && threshold.is_finite()
                        && left > i
                        && right > i
                        && left < n
                        && right < n
                }
            })
    }

    /// Deterministic CART: every column is scanned in index order.
    pub(super) fn fit(x: &[f64], width: usize, labels: &[u8], params: &TreeParams) -> Self {
        let rows: Vec<usize> = (0..labels.len()).collect();
        Self::fit_rows(
            x,
            width,
            labels,
            rows,
            params.max_depth,
            params.min_samples_leaf,
            width,
            None,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn fit_rows(
        x: &[f64],
        width: usize,
        labels: &[u8],
        rows: Vec<usize>,
        max_depth: Option<usize>,
        min_leaf: usize,
        max_features: usize,
        rng: Option<&mut crate::rng::Rng>,
    ) -> Self {
        let mut b = Builder {
            x,
            width,
            labels,
            max_depth: max_depth.unwrap_or(usize::MAX),
            min_leaf: min_leaf.max(1),
            max_features: max_features.clamp(1, width.max(1)),
            nodes: Vec::new(),
        };
        b.grow(rows, 0, rng);
        Self { nodes: b.nodes }
    }
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

impl Builder<'_> {
    fn grow(
        &mut self,
        rows: Vec<usize>,
        depth: usize,
        mut rng: Option<&mut crate::rng::Rng>,
    ) -> usize {
        let id = self.nodes.len();
        let n = rows.len();
        let pos = rows.iter().filter(|&&i| self.labels[i] == 1).count();
        let p = pos as f64 / n as f64;
        self.nodes.push(TreeNode::Leaf { p });
        if depth >= self.max_depth || pos == 0 || pos == n || n < 2 * self.min_leaf {
            return id;
        }
        let columns: Vec<usize> = match rng.as_deref_mut() {
            Some(r) if self.max_features < self.width => {
                let mut c = sample(r, self.width, self.max_features).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..self.width).collect(),
        };
        let Some((column, threshold)) = self.best_split(&rows, pos, &columns) else {
            return id;
        };
        let (left, right): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x[i * self.width + column] <= threshold);
        let l = self.grow(left, depth + 1, rng.as_deref_mut());
        let r = self.grow(right, depth + 1, rng);
        self.nodes[id] = TreeNode::Split {
            column,
            threshold,
            left: l,
            right: r,
        };
        id
    }

    /// Lowest weighted child Gini over the given columns; first found wins ties.
    fn best_split(&self, rows: &[usize], pos: usize, columns: &[usize]) -> Option<(usize, f64)> {
        let n = rows.len();
        let parent = gini(pos as f64, n as f64) * n as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted: Vec<(f64, u8)> = Vec::with_capacity(n);
        for &c in columns {
            sorted.clear();
            sorted.extend(
                rows.iter()
                    .map(|&i| (self.x[i * self.width + c], self.labels[i])),
            );
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0usize;
            for k in 0..n - 1 {
                left_pos += usize::from(sorted[k].1);
                let left_n = k + 1;
                if sorted[k].0 == sorted[k + 1].0
                    || left_n < self.min_leaf
                    || n - left_n < self.min_leaf
                {
                    continue;
                }
                let score = gini(left_pos as f64, left_n as f64) * left_n as f64
                    + gini((pos - left_pos) as f64, (n - left_n) as f64) * (n - left_n) as f64;
                if score < parent - 1e-12 && best.is_none_or(|(s, _, _)| score < s) {
                    let threshold = 0.5 * (sorted[k].0 + sorted[k + 1].0);
                    best = Some((score, c, threshold));
                }
            }
        }
        best.map(|(_, c, t)| (c, t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestHead {
    trees: Vec<DecisionTreeHead>,
}

impl RandomForestHead {
    pub fn from_trees(trees: Vec<DecisionTreeHead>) -> Self {
        Self { trees }
    }

    pub fn trees(&self) -> &[DecisionTreeHead] {
        &self.trees
    }

    /// Mean of member-tree probabilities.
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Each tree gets its own bootstrap sample and split-column draws.
    pub(super) fn fit(
        x: &[f64],
        width: usize,
        labels: &[u8],
        params: &ForestParams,
        stream: SeedStream,
    ) -> Self {
        let n = labels.len();
        let max_features = params
            .max_features
            .unwrap_or_else(|| ((width as f64).sqrt().round() as usize).max(1));
        let trees = (0..params.n_trees.max(1))
            .map(|t| {
                let mut rng = stream.fork_index("tree", t as u64).rng();
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                DecisionTreeHead::fit_rows(
                    x,
                    width,
                    labels,
                    rows,
                    params.max_depth,
                    params.min_samples_leaf,
                    max_features,
                    Some(&mut rng),
                )
            })
            .collect();
        Self { trees }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_leaf_tree() {
        assert_eq!(DecisionTreeHead::leaf(0.8).predict(&[1.0, 2.0]), 0.8);
    }

    #[test]
    fn forest_is_mean_of_trees() {
        let f = RandomForestHead::from_trees(vec![
            DecisionTreeHead::leaf(0.2),
            DecisionTreeHead::leaf(0.6),
        ]);
        assert!((f.predict(&[0.0]) - 0.4).abs() < 1e-15);
    }

    #[test]
    fn stump_finds_the_separating_threshold() {
        // column 1 separates perfectly at 0.5; column 0 is noise
        let x = [0.3, 0.0, 0.9, 1.0, 0.1, 0.2, 0.5, 0.8, 0.7, 0.1, 0.2, 0.9];
        let labels = [0, 1, 0, 1, 0, 1];
        let t = DecisionTreeHead::fit(
            &x,
            2,
            &labels,
            &TreeParams {
                max_depth: Some(1),
                min_samples_leaf: 1,
            },
        );
        match t.nodes()[0] {
            TreeNode::Split {
                column, threshold, ..
            } => {
                assert_eq!(column, 1);
                assert!((threshold - 0.5).abs() < 1e-12);
            }
            _ => panic!("expected a split"),
        }
        for (i, &y) in labels.iter().enumerate() {
            assert_eq!(t.predict(&x[2 * i..2 * i + 2]), f64::from(y));
        }
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let labels: Vec<u8> = (0..20).map(|i| u8::from(i % 3 == 0)).collect();
        let t = DecisionTreeHead::fit(
            &x,
            1,
            &labels,
            &TreeParams {
                max_depth: None,
                min_samples_leaf: 4,
            },
        );
        fn leaf_sizes(t: &DecisionTreeHead, x: &[f64]) -> Vec<usize> {
            let mut counts = std::collections::BTreeMap::new();
            for v in x {
                let mut at = 0;
                while let TreeNode::Split {
                    column: _,
                    threshold,
                    left,
                    right,
                } = t.nodes()[at]
                {
                    at = if *v <= threshold { left } else { right };
                }
                *counts.entry(at).or_insert(0) += 1;
            }
            counts.into_values().collect()
        }
        assert!(leaf_sizes(&t, &x).iter().all(|&c| c >= 4));
    }

    #[test]
    fn leaves_hold_probabilities() {
        let x: Vec<f64> = (0..50).map(|i| f64::from(i * 7 % 13)).collect();
        let labels: Vec<u8> = (0..50).map(|i| u8::from(i % 4 == 1)).collect();
        let t = DecisionTreeHead::fit(
            &x,
            1,
            &labels,
            &TreeParams {
                max_depth: Some(3),
                min_samples_leaf: 2,
            },
        );
        assert!(t.validate(1));
    }
}
