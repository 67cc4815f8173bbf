//! Headline pairs, sentence-embedding stores and training-pair construction.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::binfmt::{self, Reader};
use crate::error::{Error, Result};

pub const HSE1_MAGIC: &[u8; 4] = b"HSE1";

/// Markup tag of a headline pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Left,
    Right,
    Draw,
    /// The pair was flagged as a clustering error; never predicted, never scored.
    Bad,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Left => "left",
            Label::Right => "right",
            Label::Draw => "draw",
            Label::Bad => "bad",
        }
    }

    /// Label of the same pair read right-to-left.
    pub fn mirror(self) -> Label {
        match self {
            Label::Left => Label::Right,
            Label::Right => Label::Left,
            other => other,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(Label::Left),
            "right" => Ok(Label::Right),
            "draw" => Ok(Label::Draw),
            "bad" => Ok(Label::Bad),
            other => Err(Error::InvalidLabel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub left_id: String,
    pub right_id: String,
    pub label: Label,
}

impl PairRecord {
    pub fn new(left_id: impl Into<String>, right_id: impl Into<String>, label: Label) -> Result<Self> {
        let (left_id, right_id) = (left_id.into(), right_id.into());
        if left_id.is_empty() || right_id.is_empty() {
            return Err(Error::InvalidArgument("headline ids must be non-empty".into()));
        }
        if left_id == right_id {
            return Err(Error::InvalidArgument(format!(
                "pair compares headline {left_id:?} with itself"
            )));
        }
        Ok(PairRecord {
            left_id,
            right_id,
            label,
        })
    }
}

/// Pair records in source order. Duplicates are kept.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PairDataset {
    pub records: Vec<PairRecord>,
}

impl PairDataset {
    pub fn new(records: Vec<PairRecord>) -> Self {
        PairDataset { records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }

    /// Distinct headline ids in order of first appearance.
    pub fn distinct_ids(&self) -> Vec<String> {
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        for r in &self.records {
            for id in [&r.left_id, &r.right_id] {
                if seen.insert(id.as_str()) {
                    out.push(id.clone());
                }
            }
        }
        out
    }
}

#[derive(Deserialize)]
struct RawPair {
    left_url: String,
    right_url: String,
    label: String,
}

/// Parse a JSON Lines pairs file. Blank lines are skipped; line numbers are 1-based.
pub fn parse_pairs(text: &str) -> Result<PairDataset> {
    let mut records = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPair = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        let label = raw.label.parse::<Label>().map_err(|_| Error::UnknownLabel {
            line: line_no,
            label: raw.label.clone(),
        })?;
        let record = PairRecord::new(raw.left_url, raw.right_url, label).map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(PairDataset { records })
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<PairDataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_pairs(&text)
}

pub fn write_pairs(dataset: &PairDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    for r in &dataset.records {
        let line = serde_json::json!({
            "left_url": r.left_id,
            "right_url": r.right_id,
            "label": r.label.as_str(),
        });
        out.push_str(&line.to_string());
        out.push('\n');
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// ID-keyed row-major matrix of sentence vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    dim: usize,
    ids: Vec<String>,
    data: Vec<f32>,
    index: HashMap<String, usize>,
}

impl EmbeddingStore {
    pub fn new(dim: usize, ids: Vec<String>, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("embedding dim must be positive".into()));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::InvalidArgument(format!(
                "{} values for {} rows of dim {dim}",
                data.len(),
                ids.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("embedding row {:?}", ids[pos / dim])));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        Ok(EmbeddingStore { dim, ids, data, index })
    }

    pub fn empty(dim: usize) -> Result<Self> {
        Self::new(dim, Vec::new(), Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.position(id).map(|i| self.row(i))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(20 + self.data.len() * 4);
        binfmt::encode_header(&mut out, HSE1_MAGIC, self.dim, &self.ids)?;
        binfmt::put_f32s(&mut out, &self.data);
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let header = r.header(HSE1_MAGIC)?;
        let n = header
            .count
            .checked_mul(header.dim)
            .ok_or_else(|| Error::Format("payload size overflow".into()))?;
        let data = r.f32s(n, "embedding payload")?;
        r.finish()?;
        EmbeddingStore::new(header.dim, header.ids, data).map_err(|e| match e {
            Error::InvalidArgument(m) => Error::Format(m),
            other => other,
        })
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingStore> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingStore::from_bytes(&buf)
}

pub fn write_embeddings(store: &EmbeddingStore, path: impl AsRef<Path>) -> Result<()> {
    // Stores built through `new` are always finite; check again so a file is never half-valid.
    if store.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embedding store".into()));
    }
    let bytes = store.to_bytes()?;
    let path = path.as_ref();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// How draw-labelled pairs enter training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DrawPolicy {
    #[default]
    Exclude,
    /// Emit both (left, right) and (right, left).
    BothDirections,
}

impl FromStr for DrawPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exclude" => Ok(DrawPolicy::Exclude),
            "duplicate-both-directions" | "both" => Ok(DrawPolicy::BothDirections),
            other => Err(Error::InvalidArgument(format!("unknown draw policy {other:?}"))),
        }
    }
}

/// Feature rows of every headline a pair refers to, plus (positive, negative)
/// row-index pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPairSet {
    pub dim: usize,
    pub ids: Vec<String>,
    pub features: Vec<f32>,
    pub pairs: Vec<(usize, usize)>,
}

impl TrainingPairSet {
    pub fn new(dim: usize, ids: Vec<String>, features: Vec<f32>, pairs: Vec<(usize, usize)>) -> Result<Self> {
        if dim == 0 || features.len() != ids.len() * dim {
            return Err(Error::InvalidArgument(format!(
                "{} feature values for {} documents of dim {dim}",
                features.len(),
                ids.len()
            )));
        }
        for &(p, n) in &pairs {
            if p >= ids.len() || n >= ids.len() || p == n {
                return Err(Error::InvalidArgument(format!("invalid pair ({p}, {n})")));
            }
        }
        Ok(TrainingPairSet {
            dim,
            ids,
            features,
            pairs,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.ids.len()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }
}

pub fn build_training_pairs(
    dataset: &PairDataset,
    store: &EmbeddingStore,
    draw_policy: DrawPolicy,
) -> Result<TrainingPairSet> {
    let dim = store.dim();
    let mut rows: HashMap<String, usize> = HashMap::new();
    let mut ids = Vec::new();
    let mut features = Vec::new();
    let mut pairs = Vec::new();

    let mut row_of = |id: &'_ str| -> Result<usize> {
        if let Some(&r) = rows.get(id) {
            return Ok(r);
        }
        let v = store.get(id).ok_or_else(|| Error::MissingEmbedding(id.to_string()))?;
        let r = ids.len();
        ids.push(id.to_string());
        features.extend_from_slice(v);
        rows.insert(id.to_string(), r);
        Ok(r)
    };

    for rec in &dataset.records {
        match (rec.label, draw_policy) {
            (Label::Bad, _) | (Label::Draw, DrawPolicy::Exclude) => continue,
            _ => {}
        }
        let l = row_of(&rec.left_id)?;
        let r = row_of(&rec.right_id)?;
        match rec.label {
            Label::Left => pairs.push((l, r)),
            Label::Right => pairs.push((r, l)),
            Label::Draw => {
                pairs.push((l, r));
                pairs.push((r, l));
            }
            Label::Bad => unreachable!(),
        }
    }
    TrainingPairSet::new(dim, ids, features, pairs)
}

/// Uniform pair-level split into (train, valid), both in source order.
pub fn split_validation(dataset: &PairDataset, valid_fraction: f64, seed: u64) -> Result<(PairDataset, PairDataset)> {
    if !(valid_fraction > 0.0 && valid_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "validation fraction must lie in (0, 1), got {valid_fraction}"
        )));
    }
    if dataset.is_empty() {
        return Err(Error::InvalidArgument("cannot split an empty dataset".into()));
    }
    let n = dataset.len();
    let n_valid = (valid_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut in_valid = vec![false; n];
    for &i in &order[..n_valid] {
        in_valid[i] = true;
    }
    let (mut train, mut valid) = (Vec::with_capacity(n - n_valid), Vec::with_capacity(n_valid));
    for (rec, v) in dataset.records.iter().zip(in_valid) {
        if v {
            valid.push(rec.clone());
        } else {
            train.push(rec.clone());
        }
    }
    Ok((PairDataset::new(train), PairDataset::new(valid)))
}
