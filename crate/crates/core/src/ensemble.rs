//! Rank averaging over several (model, embedding) members and the
//! thresholded left/right/draw decision.

use std::collections::HashMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{EmbeddingStore, Label, PairDataset, PairRecord};
use crate::error::{Error, Result};
use crate::ranker::RankerModel;

pub const DEFAULT_DRAW_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    None,
    #[default]
    ZScore,
}

impl Normalization {
    pub fn as_str(self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::ZScore => "zscore",
        }
    }
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "zscore" => Ok(Normalization::ZScore),
            other => Err(Error::InvalidArgument(format!("unknown normalization {other:?}"))),
        }
    }
}

/// Incremental mean; returns exactly `x` when every input equals `x`.
fn running_mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut mean = 0.0;
    for (k, v) in values.into_iter().enumerate() {
        mean += (v - mean) / (k + 1) as f64;
    }
    mean
}

pub fn normalize_scores(scores: &[f64], method: Normalization) -> Result<Vec<f64>> {
    if scores.is_empty() {
        return Err(Error::InvalidArgument("cannot normalize an empty score list".into()));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores".into()));
    }
    match method {
        Normalization::None => Ok(scores.to_vec()),
        Normalization::ZScore => {
            let mu = running_mean(scores.iter().copied());
            let var = scores.iter().map(|s| (s - mu) * (s - mu)).sum::<f64>() / scores.len() as f64;
            let sigma = var.sqrt();
            if sigma == 0.0 {
                return Ok(vec![0.0; scores.len()]);
            }
            Ok(scores.iter().map(|s| (s - mu) / sigma).collect())
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlendMember {
    pub model: RankerModel,
    pub store: EmbeddingStore,
}

#[derive(Debug, Clone)]
pub struct BlendSpec {
    members: Vec<BlendMember>,
    pub normalization: Normalization,
    pub draw_threshold: f64,
}

impl BlendSpec {
    pub fn new(members: Vec<BlendMember>, normalization: Normalization, draw_threshold: f64) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument("a blend needs at least one member".into()));
        }
        for (i, m) in members.iter().enumerate() {
            if m.model.dim != m.store.dim() {
                return Err(Error::InvalidArgument(format!(
                    "member {i}: model dim {} != embedding dim {}",
                    m.model.dim,
                    m.store.dim()
                )));
            }
        }
        if !(draw_threshold.is_finite() && draw_threshold >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "draw threshold must be a non-negative number, got {draw_threshold}"
            )));
        }
        Ok(BlendSpec {
            members,
            normalization,
            draw_threshold,
        })
    }

    pub fn members(&self) -> &[BlendMember] {
        &self.members
    }

    /// Blended rank of every headline in `pool`, in pool order.
    pub fn pool_ranks(&self, pool: &[String]) -> Result<Vec<f64>> {
        if pool.is_empty() {
            return Ok(Vec::new());
        }
        let per_member = self
            .members
            .iter()
            .enumerate()
            .map(|(mi, m)| {
                let raw = pool
                    .par_iter()
                    .map(|id| {
                        let x = m.store.get(id).ok_or_else(|| Error::MissingMemberEmbedding {
                            member: mi,
                            id: id.clone(),
                        })?;
                        m.model.score(x)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                normalize_scores(&raw, self.normalization)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((0..pool.len())
            .map(|i| running_mean(per_member.iter().map(|scores| scores[i])))
            .collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairScores {
    pub r_left: f64,
    pub r_right: f64,
}

pub fn blend_pair(spec: &BlendSpec, left_id: &str, right_id: &str, eval_pool: &[String]) -> Result<PairScores> {
    let find = |id: &str| {
        eval_pool
            .iter()
            .position(|p| p == id)
            .ok_or_else(|| Error::InvalidArgument(format!("headline {id:?} is not in the evaluation pool")))
    };
    let (li, ri) = (find(left_id)?, find(right_id)?);
    let ranks = spec.pool_ranks(eval_pool)?;
    Ok(PairScores {
        r_left: ranks[li],
        r_right: ranks[ri],
    })
}

/// Draw when `|r_right − r_left| <= threshold`, otherwise the higher rank wins.
pub fn decide_label(scores: PairScores, draw_threshold: f64) -> Label {
    let d = scores.r_right - scores.r_left;
    if d.abs() <= draw_threshold {
        Label::Draw
    } else if d < 0.0 {
        Label::Left
    } else {
        Label::Right
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub record: PairRecord,
    pub scores: PairScores,
    pub label: Label,
}

/// Predict every record (bad-labelled ones included), using all distinct
/// headlines of the dataset as the normalization pool.
pub fn predict_dataset(spec: &BlendSpec, dataset: &PairDataset) -> Result<Vec<Prediction>> {
    let pool = dataset.distinct_ids();
    let ranks = spec.pool_ranks(&pool)?;
    let rank_of: HashMap<&str, f64> = pool.iter().map(String::as_str).zip(ranks).collect();
    Ok(dataset
        .records
        .iter()
        .map(|rec| {
            let scores = PairScores {
                r_left: rank_of[rec.left_id.as_str()],
                r_right: rank_of[rec.right_id.as_str()],
            };
            Prediction {
                record: rec.clone(),
                scores,
                label: decide_label(scores, spec.draw_threshold),
            }
        })
        .collect())
}

#[derive(Serialize, Deserialize)]
struct PredictionLine {
    left_url: String,
    right_url: String,
    r_left: f64,
    r_right: f64,
    pred: Label,
}

pub fn write_predictions(predictions: &[Prediction], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for p in predictions {
        let line = PredictionLine {
            left_url: p.record.left_id.clone(),
            right_url: p.record.right_id.clone(),
            r_left: p.scores.r_left,
            r_right: p.scores.r_right,
            pred: p.label,
        };
        out.push_str(&serde_json::to_string(&line).map_err(|e| Error::Format(e.to_string()))?);
        out.push('\n');
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Read a predictions file. The returned records carry the predicted label.
pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |message: String| Error::MalformedLine { line: i + 1, message };
        let raw: PredictionLine = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        if raw.pred == Label::Bad {
            return Err(malformed("predicted label cannot be \"bad\"".into()));
        }
        let record = PairRecord::new(raw.left_url, raw.right_url, raw.pred).map_err(|e| malformed(e.to_string()))?;
        out.push(Prediction {
            record,
            scores: PairScores {
                r_left: raw.r_left,
                r_right: raw.r_right,
            },
            label: raw.pred,
        });
    }
    Ok(out)
}
