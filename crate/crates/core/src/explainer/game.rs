//! Coalition values for one (model, instance, background) triple.

use crate::data::Cell;
use crate::error::Result;
use crate::models::{group_dot, DecisionTreeHead, ModelHead, PipelineModel, TreeNode};

use super::BackgroundSet;

/// Per-head precomputation. Linear and MLP heads store one partial input sum
/// per semantic feature so a hybrid row costs `O(d)` (or `O(d * hidden)`)
/// instead of a full re-encode. The partial sums are combined in feature order,
/// matching [`PipelineModel::predict_encoded`] bit for bit.
enum Fast {
    Logreg {
        bias: f64,
        x_parts: Vec<f64>,
        /// `bg_parts[k * d + g]`
        bg_parts: Vec<f64>,
    },
    Mlp {
        hidden: usize,
        /// `x_parts[g * hidden + u]`
        x_parts: Vec<f64>,
        /// `bg_parts[(k * d + g) * hidden + u]`
        bg_parts: Vec<f64>,
    },
    Trees(TreeDiagrams),
}

/// For every (background row, tree) pair, the tree restricted to the splits
/// where `x` and the background row go different ways. Such a split only
/// depends on whether its feature is present, so evaluating a coalition is a
/// short walk keyed by the mask. Pairs that never diverge reduce to a leaf.
struct TreeDiagrams {
    nodes: Vec<DiagramNode>,
    /// `roots[k * n_trees + t]`
    roots: Vec<u32>,
    n_trees: usize,
    single_tree: bool,
}

#[derive(Clone, Copy)]
enum DiagramNode {
    Leaf(f64),
    Branch {
        group: u32,
        present: u32,
        absent: u32,
    },
}

impl TreeDiagrams {
    fn build(
        trees: &[DecisionTreeHead],
        single_tree: bool,
        x_enc: &[f64],
        bg_enc: &[f64],
        width: usize,
        column_group: &[usize],
        d: usize,
    ) -> Self {
        let mut out = Self {
            nodes: Vec::new(),
            roots: Vec::new(),
            n_trees: trees.len(),
            single_tree,
        };
        // 0 = undecided, 1 = present, 2 = absent along the current path.
        let mut decided = vec![0u8; d];
        for z in bg_enc.chunks(width) {
            for tree in trees {
                let root = out.compile(tree.nodes(), 0, x_enc, z, column_group, &mut decided);
                out.roots.push(root);
            }
        }
        out
    }

    fn push(&mut self, node: DiagramNode) -> u32 {
        self.nodes.push(node);
        (self.nodes.len() - 1) as u32
    }

    fn compile(
        &mut self,
        tree: &[TreeNode],
        mut at: usize,
        x: &[f64],
        z: &[f64],
        column_group: &[usize],
        decided: &mut [u8],
    ) -> u32 {
        loop {
            match tree[at] {
                TreeNode::Leaf { p } => return self.push(DiagramNode::Leaf(p)),
                TreeNode::Split {
                    column,
                    threshold,
                    left,
                    right,
                } => {
                    let x_next = if x[column] <= threshold { left } else { right };
                    let z_next = if z[column] <= threshold { left } else { right };
                    let g = column_group[column];
                    if x_next == z_next || decided[g] == 1 {
                        at = x_next;
                    } else if decided[g] == 2 {
                        at = z_next;
                    } else {
                        decided[g] = 1;
                        let present = self.compile(tree, x_next, x, z, column_group, decided);
                        decided[g] = 2;
                        let absent = self.compile(tree, z_next, x, z, column_group, decided);
                        decided[g] = 0;
                        return self.push(DiagramNode::Branch {
                            group: g as u32,
                            present,
                            absent,
                        });
                    }
                }
            }
        }
    }

    fn eval(&self, mut at: u32, mask: &[bool]) -> f64 {
        loop {
            match self.nodes[at as usize] {
                DiagramNode::Leaf(p) => return p,
                DiagramNode::Branch {
                    group,
                    present,
                    absent,
                } => {
                    at = if mask[group as usize] {
                        present
                    } else {
                        absent
                    };
                }
            }
        }
    }

    /// Sum over background rows of the per-row model output, each row's tree
    /// outputs added in tree order as in [`RandomForestHead::predict`].
    ///
    /// [`RandomForestHead::predict`]: crate::models::RandomForestHead::predict
    fn row_sum(&self, mask: &[bool]) -> f64 {
        let mut sum = 0.0;
        for roots in self.roots.chunks(self.n_trees) {
            let mut acc = 0.0;
            for &r in roots {
                acc += self.eval(r, mask);
            }
            sum += if self.single_tree {
                acc
            } else {
                acc / self.n_trees as f64
            };
        }
        sum
    }

    /// [`Self::row_sum`] for `masks.len() / d` masks at once. Each diagram is
    /// walked for every mask before moving on, which keeps it in cache.
    fn row_sums(&self, masks: &[bool], d: usize) -> Vec<f64> {
        let n = masks.len() / d;
        let mut sums = vec![0.0; n];
        let mut acc = vec![0.0; n];
        for roots in self.roots.chunks(self.n_trees) {
            acc.fill(0.0);
            for &r in roots {
                if let DiagramNode::Leaf(p) = self.nodes[r as usize] {
                    acc.iter_mut().for_each(|a| *a += p);
                } else {
                    for (a, mask) in acc.iter_mut().zip(masks.chunks(d)) {
                        *a += self.eval(r, mask);
                    }
                }
            }
            for (s, a) in sums.iter_mut().zip(&acc) {
                *s += if self.single_tree {
                    *a
                } else {
                    a / self.n_trees as f64
                };
            }
        }
        sums
    }
}

/// Evaluates `v(S) = mean_k f(x_S, z^k_{not S})` for masks over semantic features.
pub struct CoalitionGame<'a> {
    model: &'a PipelineModel,
    d: usize,
    k: usize,
    full_value: f64,
    fast: Fast,
}

impl<'a> CoalitionGame<'a> {
    pub fn new(model: &'a PipelineModel, x: &[Cell], bg: &BackgroundSet) -> Result<Self> {
        model.check_row(x)?;
        for row in bg.rows() {
            model.check_row(row)?;
        }
        let t = model.transform();
        let d = t.dim();
        let width = t.width();
        let k = bg.len();
        let x_enc = t.encode(x);
        let mut bg_enc = vec![0.0; width * k];
        for (row, chunk) in bg.rows().iter().zip(bg_enc.chunks_mut(width)) {
            t.encode_into(row, chunk);
        }
        let mut column_group = vec![0; width];
        for (g, cols) in t.group_map().iter().enumerate() {
            for &c in cols {
                column_group[c] = g;
            }
        }
        let groups = t.group_map();
        let fast = match model.head() {
            ModelHead::Logreg(h) => {
                let parts = |enc: &[f64]| -> Vec<f64> {
                    groups
                        .iter()
                        .map(|g| group_dot(h.weights(), g, enc))
                        .collect()
                };
                Fast::Logreg {
                    bias: h.bias(),
                    x_parts: parts(&x_enc),
                    bg_parts: bg_enc.chunks(width).flat_map(parts).collect(),
                }
            }
            ModelHead::Mlp(h) => {
                let hidden = h.hidden_width();
                let parts = |enc: &[f64]| -> Vec<f64> {
                    let mut out = Vec::with_capacity(d * hidden);
                    for g in groups {
                        for u in 0..hidden {
                            out.push(group_dot(h.input_weights(u), g, enc));
                        }
                    }
                    out
                };
                Fast::Mlp {
                    hidden,
                    x_parts: parts(&x_enc),
                    bg_parts: bg_enc.chunks(width).flat_map(parts).collect(),
                }
            }
            ModelHead::Dtree(t) => Fast::Trees(TreeDiagrams::build(
                std::slice::from_ref(t),
                true,
                &x_enc,
                &bg_enc,
                width,
                &column_group,
                d,
            )),
            ModelHead::Rforest(f) => Fast::Trees(TreeDiagrams::build(
                f.trees(),
                false,
                &x_enc,
                &bg_enc,
                width,
                &column_group,
                d,
            )),
        };
        let full_value = model.predict_encoded(&x_enc);
        Ok(Self {
            model,
            d,
            k,
            full_value,
            fast,
        })
    }

    /// Number of semantic features.
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn background_len(&self) -> usize {
        self.k
    }

    /// `f(x)`.
    pub fn full_value(&self) -> f64 {
        self.full_value
    }

    /// Mean background prediction.
    pub fn empty_value(&self) -> f64 {
        self.value(&vec![false; self.d])
    }

    /// Coalition value; `mask[j]` is true when feature `j` is taken from `x`.
    ///
    /// Panics if `mask.len() != self.dim()`.
    pub fn value(&self, mask: &[bool]) -> f64 {
        assert_eq!(mask.len(), self.d, "mask length");
        if mask.iter().all(|&m| m) {
            return self.full_value;
        }
        let mut sum = 0.0;
        match &self.fast {
            Fast::Logreg {
                bias,
                x_parts,
                bg_parts,
            } => {
                for row in bg_parts.chunks(self.d) {
                    let mut z = *bias;
                    for g in 0..self.d {
                        z += if mask[g] { x_parts[g] } else { row[g] };
                    }
                    sum += crate::models::sigmoid(z);
                }
            }
            Fast::Mlp {
                hidden,
                x_parts,
                bg_parts,
            } => {
                let ModelHead::Mlp(h) = self.model.head() else {
                    unreachable!()
                };
                let mut pre = vec![0.0; *hidden];
                for row in bg_parts.chunks(self.d * hidden) {
                    pre.copy_from_slice(h.hidden_bias());
                    for g in 0..self.d {
                        let src = if mask[g] { x_parts } else { row };
                        let part = &src[g * hidden..(g + 1) * hidden];
                        for (p, v) in pre.iter_mut().zip(part) {
                            *p += v;
                        }
                    }
                    sum += h.predict_from_preactivations(&pre);
                }
            }
            Fast::Trees(diagrams) => sum = diagrams.row_sum(mask),
        }
        sum / self.k as f64
    }

    /// Values of many coalitions, equal to mapping [`Self::value`] over them.
    pub fn values(&self, masks: &[Vec<bool>]) -> Vec<f64> {
        let Fast::Trees(diagrams) = &self.fast else {
            return masks.iter().map(|m| self.value(m)).collect();
        };
        let mut flat = Vec::with_capacity(masks.len() * self.d);
        for m in masks {
            assert_eq!(m.len(), self.d, "mask length");
            flat.extend_from_slice(m);
        }
        diagrams
            .row_sums(&flat, self.d)
            .into_iter()
            .zip(masks)
            .map(|(sum, m)| {
                if m.iter().all(|&b| b) {
                    self.full_value
                } else {
                    sum / self.k as f64
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explainer::testutil::numeric_dataset;
    use crate::models::testutil::with_categorical;
    use crate::models::{train, ForestParams, HyperParams, MlpParams, TreeParams};

    fn hybrid_reference(
        model: &PipelineModel,
        x: &[Cell],
        bg: &BackgroundSet,
        mask: &[bool],
    ) -> f64 {
        if mask.iter().all(|&m| m) {
            return model.predict_proba(x).unwrap();
        }
        let mut sum = 0.0;
        for z in bg.rows() {
            let hybrid: Vec<Cell> = (0..mask.len())
                .map(|j| if mask[j] { x[j] } else { z[j] })
                .collect();
            sum += model.predict_proba(&hybrid).unwrap();
        }
        sum / bg.len() as f64
    }

    fn check_all_masks(model: &PipelineModel, ds: &crate::data::Dataset) {
        let bg_idx: Vec<usize> = (5..17).collect();
        let bg = BackgroundSet::new(
            bg_idx.iter().map(|&i| ds.row(i).to_vec()).collect(),
            bg_idx,
            0,
        )
        .unwrap();
        let d = ds.dim();
        for xi in [0, 1, 30] {
            let x = ds.row(xi);
            let game = CoalitionGame::new(model, x, &bg).unwrap();
            let masks: Vec<Vec<bool>> = (0..(1u32 << d))
                .map(|m| (0..d).map(|j| m >> j & 1 == 1).collect())
                .collect();
            let batch = game.values(&masks);
            for (mask, v) in masks.iter().zip(batch) {
                let want = hybrid_reference(model, x, &bg, mask).to_bits();
                assert_eq!(game.value(mask).to_bits(), want, "mask {mask:?}");
                assert_eq!(v.to_bits(), want, "batched mask {mask:?}");
            }
        }
    }

    #[test]
    fn fast_paths_match_hybrid_rows_bitwise() {
        let ds = with_categorical(80);
        let numeric = numeric_dataset(4, 80);
        for hp in [
            HyperParams::default_for(crate::types::ModelClass::Logreg),
            HyperParams::Mlp(MlpParams {
                hidden: 8,
                epochs: 5,
                ..MlpParams::default()
            }),
            HyperParams::Dtree(TreeParams::default()),
            HyperParams::Rforest(ForestParams {
                n_trees: 7,
                ..ForestParams::default()
            }),
        ] {
            check_all_masks(&train(&ds, &hp, 3).unwrap(), &ds);
            check_all_masks(&train(&numeric, &hp, 3).unwrap(), &numeric);
        }
    }
}
