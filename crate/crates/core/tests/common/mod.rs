//! Synthetic fixtures shared by the integration and acceptance suites.
#![allow(dead_code)]

use headline_rank::data::{EmbeddingStore, Label, PairDataset, PairRecord};
use headline_rank::ensemble::{decide_label, normalize_scores, Normalization, PairScores};
use headline_rank::pooling::{TokenEmbeddingSequence, TokenFile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn doc_id(i: usize) -> String {
    format!("https://news.example/{i}")
}

/// Documents with a hidden linear quality score.
pub struct LinearWorld {
    pub dim: usize,
    pub features: Vec<Vec<f32>>,
    pub true_score: Vec<f64>,
    pub noisy_score: Vec<f64>,
}

impl LinearWorld {
    /// `x ~ N(0, I)`, `w ~ N(0, I)`, true score `w·x`, observed score adds
    /// Gaussian noise with `noise_frac` of the true-score standard deviation.
    pub fn new(n_docs: usize, dim: usize, noise_frac: f64, seed: u64) -> Self {
        let mut r = rng(seed);
        let w: Vec<f64> = (0..dim).map(|_| gaussian(&mut r)).collect();
        let features: Vec<Vec<f32>> = (0..n_docs)
            .map(|_| (0..dim).map(|_| gaussian(&mut r) as f32).collect())
            .collect();
        let true_score: Vec<f64> = features
            .iter()
            .map(|x| x.iter().zip(&w).map(|(&a, b)| f64::from(a) * b).sum())
            .collect();
        let mean = true_score.iter().sum::<f64>() / n_docs as f64;
        let std = (true_score.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n_docs as f64).sqrt();
        let noisy_score = true_score
            .iter()
            .map(|t| t + noise_frac * std * gaussian(&mut r))
            .collect();
        LinearWorld {
            dim,
            features,
            true_score,
            noisy_score,
        }
    }

    pub fn store(&self) -> EmbeddingStore {
        let ids = (0..self.features.len()).map(doc_id).collect();
        EmbeddingStore::new(self.dim, ids, self.features.concat()).unwrap()
    }

    /// Random distinct document pairs.
    pub fn random_pairs(&self, n: usize, seed: u64) -> Vec<(usize, usize)> {
        let mut r = rng(seed);
        let m = self.features.len();
        (0..n)
            .map(|_| loop {
                let (a, b) = (r.gen_range(0..m), r.gen_range(0..m));
                if a != b {
                    break (a, b);
                }
            })
            .collect()
    }

    /// Pairs labelled left/right by the noisy observed score.
    pub fn labelled_by_noisy(&self, pairs: &[(usize, usize)]) -> PairDataset {
        PairDataset::new(
            pairs
                .iter()
                .map(|&(a, b)| {
                    let label = if self.noisy_score[a] >= self.noisy_score[b] {
                        Label::Left
                    } else {
                        Label::Right
                    };
                    PairRecord::new(doc_id(a), doc_id(b), label).unwrap()
                })
                .collect(),
        )
    }

    /// Noise-free three-way labels: true scores z-normalized over the distinct
    /// documents of `pairs`, then the thresholded difference rule.
    pub fn gold_three_way(&self, pairs: &[(usize, usize)], threshold: f64) -> Vec<Label> {
        let mut pool: Vec<usize> = Vec::new();
        for &(a, b) in pairs {
            for d in [a, b] {
                if !pool.contains(&d) {
                    pool.push(d);
                }
            }
        }
        let raw: Vec<f64> = pool.iter().map(|&d| self.true_score[d]).collect();
        let z = normalize_scores(&raw, Normalization::ZScore).unwrap();
        let zs = |d: usize| z[pool.iter().position(|&p| p == d).unwrap()];
        pairs
            .iter()
            .map(|&(a, b)| {
                decide_label(
                    PairScores {
                        r_left: zs(a),
                        r_right: zs(b),
                    },
                    threshold,
                )
            })
            .collect()
    }
}

/// Token file whose sequences are noisy token clouds around each sentence
/// vector of `world` (`signal = true`), or pure noise (`signal = false`).
pub fn token_layer(world: &LinearWorld, signal: bool, seed: u64) -> TokenFile {
    let mut r = rng(seed);
    let sequences = world
        .features
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let n_tokens = r.gen_range(1..6);
            let mut tokens = Vec::with_capacity(n_tokens * world.dim);
            for _ in 0..n_tokens {
                for &v in x {
                    let noise = 0.1 * gaussian(&mut r) as f32;
                    tokens.push(if signal { v + noise } else { gaussian(&mut r) as f32 });
                }
            }
            TokenEmbeddingSequence::new(doc_id(i), world.dim, tokens).unwrap()
        })
        .collect();
    TokenFile::new(world.dim, sequences).unwrap()
}

/// Random token file with `n` sequences, for format tests.
pub fn random_token_file(n: usize, dim: usize, seed: u64) -> TokenFile {
    let mut r = rng(seed);
    let sequences = (0..n)
        .map(|i| {
            let n_tokens = r.gen_range(1..8);
            let tokens = (0..n_tokens * dim).map(|_| r.gen_range(-4.0f32..4.0)).collect();
            TokenEmbeddingSequence::new(format!("seq-{i}"), dim, tokens).unwrap()
        })
        .collect();
    TokenFile::new(dim, sequences).unwrap()
}

pub fn random_store(n: usize, dim: usize, seed: u64) -> EmbeddingStore {
    let mut r = rng(seed);
    let ids = (0..n).map(|i| format!("row-{i}")).collect();
    let data = (0..n * dim).map(|_| r.gen_range(-10.0f32..10.0)).collect();
    EmbeddingStore::new(dim, ids, data).unwrap()
}
