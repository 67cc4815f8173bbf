//! Second-order gradient boosting of regression trees on the pairwise logistic loss.
//!
//! Features are bucketed once into equal-frequency bins computed from the
//! training documents; candidate thresholds are the bin upper edges. Each
//! tree is grown depth-first to `max_depth`, choosing at every node the split
//! with the largest Newton gain `G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)`.
//! Ties go to the lowest feature index, then the lowest threshold.

use rayon::prelude::*;

use super::loss::{pair_logit_gradients, pair_logit_loss, PairGradients};
use super::model::{RankerModel, TrainingSummary, Tree, TreeNode};
use crate::data::{Label, TrainingPairSet};
use crate::ensemble::{decide_label, PairScores, DEFAULT_DRAW_THRESHOLD};
use crate::error::{Error, Result};
use crate::evaluation::weighted_accuracy;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub n_bins: usize,
    pub min_samples_leaf: usize,
    /// Stop after this many iterations without a new best validation loss; 0 disables.
    pub early_stop_rounds: usize,
    pub l2_leaf_reg: f64,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            n_trees: 1000,
            max_depth: 6,
            learning_rate: 0.1,
            n_bins: 256,
            min_samples_leaf: 20,
            early_stop_rounds: 50,
            l2_leaf_reg: 3.0,
            seed: 42,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.n_trees == 0 {
            return bad("n_trees must be positive");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be positive");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(2..=256).contains(&self.n_bins) {
            return bad("n_bins must lie in [2, 256]");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive");
        }
        if !(self.l2_leaf_reg.is_finite() && self.l2_leaf_reg >= 0.0) {
            return bad("l2_leaf_reg must be non-negative");
        }
        Ok(())
    }
}

/// Snapshot reported after each boosting iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub train_loss: f64,
    pub valid_loss: Option<f64>,
    pub valid_accuracy: Option<f64>,
    pub best_iteration: usize,
}

/// Per-feature bin edges plus the binned training matrix (feature-major).
struct Binned {
    cuts: Vec<Vec<f32>>,
    bins: Vec<Vec<u8>>,
}

fn equal_frequency_cuts(values: &mut [f32], n_bins: usize) -> Vec<f32> {
    values.sort_by(f32::total_cmp);
    let n = values.len();
    let mut cuts: Vec<f32> = Vec::with_capacity(n_bins - 1);
    if n == 0 {
        return cuts;
    }
    let max = values[n - 1];
    for j in 1..n_bins {
        let idx = j * n / n_bins;
        if idx == 0 {
            continue;
        }
        let c = values[idx - 1];
        if c < max && cuts.last().is_none_or(|&last| c > last) {
            cuts.push(c);
        }
    }
    cuts
}

fn bin_features(set: &TrainingPairSet, n_bins: usize) -> Binned {
    let (n, dim) = (set.n_docs(), set.dim);
    let columns: Vec<(Vec<f32>, Vec<u8>)> = (0..dim)
        .into_par_iter()
        .map(|f| {
            let column: Vec<f32> = (0..n).map(|i| set.features[i * dim + f]).collect();
            let cuts = equal_frequency_cuts(&mut column.clone(), n_bins);
            let bins = column.iter().map(|&v| cuts.partition_point(|&c| c < v) as u8).collect();
            (cuts, bins)
        })
        .collect();
    let (cuts, bins) = columns.into_iter().unzip();
    Binned { cuts, bins }
}

#[derive(Clone, Copy, Default)]
struct Bucket {
    grad: f64,
    hess: f64,
    count: usize,
}

struct Split {
    gain: f64,
    feature: usize,
    cut: usize,
}

struct TreeGrower<'a> {
    binned: &'a Binned,
    grads: &'a PairGradients,
    params: &'a HyperParams,
    nodes: Vec<TreeNode>,
}

impl TreeGrower<'_> {
    fn leaf_value(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.params.l2_leaf_reg) * self.params.learning_rate
    }

    fn score_term(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.params.l2_leaf_reg)
    }

    fn best_split(&self, docs: &[u32], g_sum: f64, h_sum: f64) -> Option<Split> {
        let min_leaf = self.params.min_samples_leaf;
        if docs.len() < 2 * min_leaf {
            return None;
        }
        let parent = self.score_term(g_sum, h_sum);
        let per_feature: Vec<Option<Split>> = (0..self.binned.cuts.len())
            .into_par_iter()
            .map(|f| {
                let cuts = &self.binned.cuts[f];
                if cuts.is_empty() {
                    return None;
                }
                let column = &self.binned.bins[f];
                let mut hist = vec![Bucket::default(); cuts.len() + 1];
                for &d in docs {
                    let b = &mut hist[column[d as usize] as usize];
                    b.grad += self.grads.grad[d as usize];
                    b.hess += self.grads.hess[d as usize];
                    b.count += 1;
                }
                let mut best: Option<Split> = None;
                let mut left = Bucket::default();
                for (k, b) in hist[..cuts.len()].iter().enumerate() {
                    left.grad += b.grad;
                    left.hess += b.hess;
                    left.count += b.count;
                    let right_count = docs.len() - left.count;
                    if left.count < min_leaf || right_count < min_leaf {
                        continue;
                    }
                    let gain = self.score_term(left.grad, left.hess)
                        + self.score_term(g_sum - left.grad, h_sum - left.hess)
                        - parent;
                    if gain > best.as_ref().map_or(0.0, |s| s.gain) {
                        best = Some(Split {
                            gain,
                            feature: f,
                            cut: k,
                        });
                    }
                }
                best
            })
            .collect();
        // Strict comparison in feature order keeps the lowest index on ties.
        per_feature
            .into_iter()
            .flatten()
            .fold(None, |best: Option<Split>, s| match best {
                Some(b) if s.gain <= b.gain => Some(b),
                _ => Some(s),
            })
    }

    fn grow(&mut self, docs: Vec<u32>, depth: usize) -> usize {
        let (g, h) = docs.iter().fold((0.0, 0.0), |(g, h), &d| {
            (g + self.grads.grad[d as usize], h + self.grads.hess[d as usize])
        });
        let index = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value: self.leaf_value(g, h),
        });
        if depth >= self.params.max_depth {
            return index;
        }
        let Some(split) = self.best_split(&docs, g, h) else {
            return index;
        };
        let column = &self.binned.bins[split.feature];
        let (left_docs, right_docs): (Vec<u32>, Vec<u32>) = docs
            .into_iter()
            .partition(|&d| column[d as usize] as usize <= split.cut);
        let left = self.grow(left_docs, depth + 1);
        let right = self.grow(right_docs, depth + 1);
        self.nodes[index] = TreeNode::Split {
            feature: split.feature,
            threshold: f64::from(self.binned.cuts[split.feature][split.cut]),
            left,
            right,
        };
        index
    }
}

fn pair_accuracy(scores: &[f64], pairs: &[(usize, usize)]) -> Option<f64> {
    if pairs.is_empty() {
        return None;
    }
    // Pairs are oriented positive-first, so the gold label is always Left.
    let gold = vec![Label::Left; pairs.len()];
    let pred: Vec<Label> = pairs
        .iter()
        .map(|&(p, n)| {
            decide_label(
                PairScores {
                    r_left: scores[p],
                    r_right: scores[n],
                },
                DEFAULT_DRAW_THRESHOLD,
            )
        })
        .collect();
    weighted_accuracy(&gold, &pred).ok()
}

pub fn train(train_set: &TrainingPairSet, valid_set: &TrainingPairSet, params: &HyperParams) -> Result<RankerModel> {
    train_with_progress(train_set, valid_set, params, |_| {})
}

/// Train, calling `progress` after every iteration.
pub fn train_with_progress(
    train_set: &TrainingPairSet,
    valid_set: &TrainingPairSet,
    params: &HyperParams,
    mut progress: impl FnMut(&IterationLog),
) -> Result<RankerModel> {
    params.validate()?;
    if train_set.pairs.is_empty() {
        return Err(Error::NoPairs);
    }
    if valid_set.dim != train_set.dim {
        return Err(Error::DimMismatch {
            expected: train_set.dim,
            found: valid_set.dim,
        });
    }
    if train_set.n_docs() > u32::MAX as usize {
        return Err(Error::InvalidArgument("too many training documents".into()));
    }

    let binned = bin_features(train_set, params.n_bins);
    let mut model = RankerModel::empty(train_set.dim, params.learning_rate);
    let mut train_scores = vec![model.base_score; train_set.n_docs()];
    let mut valid_scores = vec![model.base_score; valid_set.n_docs()];
    let has_valid = !valid_set.pairs.is_empty();
    let mut summary = TrainingSummary::default();
    let mut best = (0usize, f64::INFINITY);

    for it in 0..params.n_trees {
        let grads = pair_logit_gradients(&train_scores, &train_set.pairs);
        let mut grower = TreeGrower {
            binned: &binned,
            grads: &grads,
            params,
            nodes: Vec::new(),
        };
        grower.grow((0..train_set.n_docs() as u32).collect(), 0);
        let tree = Tree::new(grower.nodes, train_set.dim)?;

        for (i, s) in train_scores.iter_mut().enumerate() {
            *s += tree.predict(train_set.row(i));
        }
        for (i, s) in valid_scores.iter_mut().enumerate() {
            *s += tree.predict(valid_set.row(i));
        }
        model.trees.push(tree);

        summary
            .train_loss
            .push(pair_logit_loss(&train_scores, &train_set.pairs));
        let (valid_loss, valid_accuracy) = if has_valid {
            let loss = pair_logit_loss(&valid_scores, &valid_set.pairs);
            let acc = pair_accuracy(&valid_scores, &valid_set.pairs).unwrap_or(0.0);
            summary.valid_loss.push(loss);
            summary.valid_accuracy.push(acc);
            if loss < best.1 {
                best = (it, loss);
            }
            (Some(loss), Some(acc))
        } else {
            best.0 = it;
            (None, None)
        };

        progress(&IterationLog {
            iteration: it,
            train_loss: summary.train_loss[it],
            valid_loss,
            valid_accuracy,
            best_iteration: best.0,
        });

        if has_valid && params.early_stop_rounds > 0 && it - best.0 >= params.early_stop_rounds {
            break;
        }
    }

    model.trees.truncate(best.0 + 1);
    model.best_iteration = best.0;
    model.summary = summary;
    Ok(model)
}
