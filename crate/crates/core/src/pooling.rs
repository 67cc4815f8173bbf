//! Token-level hidden states (HST1 files) and their reduction to sentence vectors.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::binfmt::{self, Reader};
use crate::data::{write_embeddings, EmbeddingStore};
use crate::error::{Error, Result};

pub const HST1_MAGIC: &[u8; 4] = b"HST1";

#[derive(Debug, Clone, PartialEq)]
pub struct TokenEmbeddingSequence {
    pub id: String,
    pub dim: usize,
    /// Row-major `n_tokens × dim`.
    pub tokens: Vec<f32>,
}

impl TokenEmbeddingSequence {
    pub fn new(id: impl Into<String>, dim: usize, tokens: Vec<f32>) -> Result<Self> {
        let id = id.into();
        if dim == 0 || !tokens.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument(format!(
                "sequence {id:?}: {} values do not form rows of dim {dim}",
                tokens.len()
            )));
        }
        if tokens.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("token sequence {id:?}")));
        }
        Ok(TokenEmbeddingSequence { id, dim, tokens })
    }

    /// Build from explicit token rows.
    pub fn from_rows(id: impl Into<String>, rows: &[Vec<f32>]) -> Result<Self> {
        let id = id.into();
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidArgument(format!("sequence {id:?} has ragged token rows")));
        }
        Self::new(id, dim.max(1), rows.concat())
    }

    pub fn n_tokens(&self) -> usize {
        self.tokens.len() / self.dim
    }

    pub fn token(&self, i: usize) -> &[f32] {
        &self.tokens[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolingMethod {
    #[default]
    MeanOverTokens,
    /// Hidden state of the first token (`[CLS]` for BERT-style models).
    FirstToken,
}

impl PoolingMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            PoolingMethod::MeanOverTokens => "mean",
            PoolingMethod::FirstToken => "cls",
        }
    }
}

impl FromStr for PoolingMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(PoolingMethod::MeanOverTokens),
            "cls" | "first" => Ok(PoolingMethod::FirstToken),
            other => Err(Error::InvalidArgument(format!("unknown pooling method {other:?}"))),
        }
    }
}

pub fn mean_pool(seq: &TokenEmbeddingSequence) -> Result<Vec<f32>> {
    let n = seq.n_tokens();
    if n == 0 {
        return Err(Error::EmptySequence(seq.id.clone()));
    }
    let mut acc = vec![0f64; seq.dim];
    for row in seq.tokens.chunks_exact(seq.dim) {
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += f64::from(v);
        }
    }
    let inv = n as f64;
    Ok(acc.into_iter().map(|a| (a / inv) as f32).collect())
}

pub fn first_token_pool(seq: &TokenEmbeddingSequence) -> Result<Vec<f32>> {
    if seq.n_tokens() == 0 {
        return Err(Error::EmptySequence(seq.id.clone()));
    }
    Ok(seq.token(0).to_vec())
}

pub fn pool(seq: &TokenEmbeddingSequence, method: PoolingMethod) -> Result<Vec<f32>> {
    match method {
        PoolingMethod::MeanOverTokens => mean_pool(seq),
        PoolingMethod::FirstToken => first_token_pool(seq),
    }
}

/// Contents of one HST1 file.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenFile {
    dim: usize,
    sequences: Vec<TokenEmbeddingSequence>,
}

impl TokenFile {
    pub fn new(dim: usize, sequences: Vec<TokenEmbeddingSequence>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("token dim must be positive".into()));
        }
        for s in &sequences {
            if s.dim != dim {
                return Err(Error::DimMismatch {
                    expected: dim,
                    found: s.dim,
                });
            }
            if s.n_tokens() == 0 {
                return Err(Error::EmptySequence(s.id.clone()));
            }
        }
        Ok(TokenFile { dim, sequences })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sequences(&self) -> &[TokenEmbeddingSequence] {
        &self.sequences
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let ids: Vec<String> = self.sequences.iter().map(|s| s.id.clone()).collect();
        let mut out = Vec::new();
        binfmt::encode_header(&mut out, HST1_MAGIC, self.dim, &ids)?;
        for s in &self.sequences {
            let n = u32::try_from(s.n_tokens()).map_err(|_| Error::Format(format!("sequence {:?} too long", s.id)))?;
            binfmt::put_u32(&mut out, n);
            binfmt::put_f32s(&mut out, &s.tokens);
        }
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader::new(buf);
        let header = r.header(HST1_MAGIC)?;
        let mut sequences = Vec::with_capacity(header.count);
        for id in header.ids {
            let n = r.u32("token count")? as usize;
            if n == 0 {
                return Err(Error::EmptySequence(id));
            }
            let tokens = r.f32s(n * header.dim, "token payload")?;
            sequences.push(TokenEmbeddingSequence::new(id, header.dim, tokens)?);
        }
        r.finish()?;
        TokenFile::new(header.dim, sequences)
    }

    /// Pool every sequence into one sentence vector, preserving order.
    pub fn pool(&self, method: PoolingMethod) -> Result<EmbeddingStore> {
        let rows: Vec<Vec<f32>> = self
            .sequences
            .par_iter()
            .map(|s| pool(s, method))
            .collect::<Result<_>>()?;
        let ids = self.sequences.iter().map(|s| s.id.clone()).collect();
        EmbeddingStore::new(self.dim, ids, rows.concat())
    }
}

pub fn load_tokens(path: impl AsRef<Path>) -> Result<TokenFile> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| Error::io(path, e))?;
    TokenFile::from_bytes(&buf)
}

pub fn write_tokens(file: &TokenFile, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, file.to_bytes()?).map_err(|e| Error::io(path, e))
}

/// Pool an HST1 file into an HSE1 file. Returns `(n_rows, dim)`.
pub fn pool_file(token_file: impl AsRef<Path>, method: PoolingMethod, out: impl AsRef<Path>) -> Result<(usize, usize)> {
    let tokens = load_tokens(token_file)?;
    let store = tokens.pool(method)?;
    write_embeddings(&store, out)?;
    Ok((store.len(), store.dim()))
}
