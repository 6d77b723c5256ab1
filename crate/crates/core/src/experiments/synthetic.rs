//! Synthetic checkpoint generators with known structure.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::embed_io::{EmbeddingKind, EmbeddingMatrix};
use crate::error::Result;

/// Row-major `rows x cols` values uniform in `[-1, 1)`.
pub fn random_values(rows: usize, cols: usize, seed: u64) -> Vec<f64> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> EmbeddingMatrix {
    EmbeddingMatrix::from_f64(rows, cols, random_values(rows, cols, seed), EmbeddingKind::Input)
        .expect("finite by construction")
}

/// Cluster id of each row in [`clustered_values`]: `row % clusters`.
pub fn cluster_of(row: usize, clusters: usize) -> usize {
    row % clusters
}

/// Rows scattered around `clusters` random centres with the given noise
/// amplitude.
pub fn clustered_values(rows: usize, cols: usize, clusters: usize, noise: f64, seed: u64) -> Vec<f64> {
    let centres = random_values(clusters, cols, seed ^ 0xC1u64);
    let jitter = random_values(rows, cols, seed ^ 0x5Eu64);
    (0..rows * cols)
        .map(|k| {
            let (r, c) = (k / cols, k % cols);
            centres[cluster_of(r, clusters) * cols + c] + noise * jitter[k]
        })
        .collect()
}

/// Per-row blend `(1 - a_r) * from + a_r * to`.
pub fn blend_rows(from: &[f64], to: &[f64], cols: usize, alpha: impl Fn(usize) -> f64) -> Vec<f64> {
    from.iter()
        .zip(to)
        .enumerate()
        .map(|(k, (x, y))| {
            let a = alpha(k / cols);
            (1.0 - a) * x + a * y
        })
        .collect()
}

/// Matrices `G(a) = (1 - a) R + a S` for each `a` in `alphas`, where `R` is
/// uniform noise and `S` has `clusters` planted clusters.
///
/// The clusters are weak relative to their jitter and `R` is scaled to match
/// the spread of `S`. With well-separated clusters the grouping correlation
/// would saturate halfway along the path instead of rising to the end.
pub fn interpolation(
    rows: usize,
    cols: usize,
    clusters: usize,
    alphas: &[f64],
    seed: u64,
) -> Result<Vec<EmbeddingMatrix>> {
    const JITTER: f64 = 2.0;
    let r: Vec<f64> = random_values(rows, cols, seed).iter().map(|v| JITTER * v).collect();
    let s = clustered_values(rows, cols, clusters, JITTER, seed.wrapping_add(1));
    alphas
        .iter()
        .map(|&a| {
            EmbeddingMatrix::from_f64(rows, cols, blend_rows(&r, &s, cols, |_| a), EmbeddingKind::Input)
        })
        .collect()
}
