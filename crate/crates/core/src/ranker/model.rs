use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_VERSION: u32 = 1;

/// One node of a regression tree. Children always have larger indices than
/// their parent and the root is node 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TreeNode {
    /// Route to `left` iff `x[feature] <= threshold`.
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

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn new(nodes: Vec<TreeNode>, dim: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Schema("tree has no nodes".into()));
        }
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= dim {
                        return Err(Error::Schema(format!("node {i}: feature {feature} >= dim {dim}")));
                    }
                    if !threshold.is_finite() {
                        return Err(Error::Schema(format!("node {i}: non-finite threshold")));
                    }
                    for child in [left, right] {
                        if child <= i || child >= nodes.len() {
                            return Err(Error::Schema(format!("node {i}: invalid child index {child}")));
                        }
                    }
                }
                TreeNode::Leaf { value } => {
                    if !value.is_finite() {
                        return Err(Error::Schema(format!("node {i}: non-finite leaf value")));
                    }
                }
            }
        }
        Ok(Tree { nodes })
    }

    pub fn leaf(value: f64) -> Self {
        Tree {
            nodes: vec![TreeNode::Leaf { value }],
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn predict(&self, x: &[f32]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if f64::from(x[feature]) <= threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }
}

/// Per-iteration record kept from training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingSummary {
    pub train_loss: Vec<f64>,
    pub valid_loss: Vec<f64>,
    /// Weighted accuracy of three-way labels on validation pairs.
    pub valid_accuracy: Vec<f64>,
}

/// Additive tree scorer. Leaf values already include the learning rate.
#[derive(Debug, Clone, PartialEq)]
pub struct RankerModel {
    pub dim: usize,
    pub base_score: f64,
    pub learning_rate: f64,
    pub best_iteration: usize,
    pub trees: Vec<Tree>,
    pub summary: TrainingSummary,
}

impl RankerModel {
    pub fn empty(dim: usize, learning_rate: f64) -> Self {
        RankerModel {
            dim,
            base_score: 0.0,
            learning_rate,
            best_iteration: 0,
            trees: Vec::new(),
            summary: TrainingSummary::default(),
        }
    }

    /// Score without input validation. `x.len()` must equal `self.dim`.
    pub(crate) fn score_unchecked(&self, x: &[f32]) -> f64 {
        self.trees.iter().fold(self.base_score, |acc, t| acc + t.predict(x))
    }

    pub fn score(&self, x: &[f32]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("score input".into()));
        }
        Ok(self.score_unchecked(x))
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            version: MODEL_VERSION,
            dim: self.dim,
            base_score: self.base_score,
            learning_rate: self.learning_rate,
            best_iteration: self.best_iteration,
            trees: self
                .trees
                .iter()
                .map(|t| t.nodes.iter().map(RawNode::from).collect())
                .collect(),
            metadata: Some(self.summary.clone()),
        };
        serde_json::to_string(&file).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if file.version != MODEL_VERSION {
            return Err(Error::UnsupportedVersion {
                what: "model",
                version: file.version.into(),
            });
        }
        if file.dim == 0 {
            return Err(Error::Schema("dim must be positive".into()));
        }
        if !file.base_score.is_finite() || !file.learning_rate.is_finite() {
            return Err(Error::Schema("non-finite base_score or learning_rate".into()));
        }
        let trees = file
            .trees
            .into_iter()
            .map(|nodes| Tree::new(nodes.into_iter().map(TreeNode::from).collect(), file.dim))
            .collect::<Result<Vec<_>>>()?;
        Ok(RankerModel {
            dim: file.dim,
            base_score: file.base_score,
            learning_rate: file.learning_rate,
            best_iteration: file.best_iteration,
            trees,
            summary: file.metadata.unwrap_or_default(),
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    dim: usize,
    base_score: f64,
    learning_rate: f64,
    best_iteration: usize,
    trees: Vec<Vec<RawNode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<TrainingSummary>,
}

/// `[feature, threshold, left, right]` or `[null, value]`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawNode {
    Split(usize, f64, usize, usize),
    Leaf(Option<()>, f64),
}

impl From<&TreeNode> for RawNode {
    fn from(n: &TreeNode) -> Self {
        match *n {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => RawNode::Split(feature, threshold, left, right),
            TreeNode::Leaf { value } => RawNode::Leaf(None, value),
        }
    }
}

impl From<RawNode> for TreeNode {
    fn from(n: RawNode) -> Self {
        match n {
            RawNode::Split(feature, threshold, left, right) => TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            },
            RawNode::Leaf(_, value) => TreeNode::Leaf { value },
        }
    }
}

pub fn save_model(model: &RankerModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = model.to_json()?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<RankerModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes).map_err(|_| Error::Format(format!("{} is not UTF-8 text", path.display())))?;
    RankerModel::from_json(&text)
}
