//! Condensed representational dissimilarity matrices.
//!
//! Pair `(i, j)` with `i > j` lives at index `i(i-1)/2 + j`. Pairwise sweeps run
//! over square tiles of rows; every pair is computed independently from cached
//! per-row preparations, so results do not depend on the tile size or on the
//! number of worker threads.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_xoshiro::SplitMix64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed_io::{read_npy, write_npy, EmbeddingKind, EmbeddingMatrix, NpyData, TokenSubset};
use crate::error::{Error, Result};
use crate::metrics::{kendall_tau_b, rank_into, Metric};

/// Number of pairs among `n` items.
pub fn pair_count(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

/// Condensed index of pair `(i, j)`, `i > j`.
#[inline]
pub fn condensed_index(i: usize, j: usize) -> usize {
    debug_assert!(i > j);
    i * (i - 1) / 2 + j
}

/// Condensed index of an unordered pair of distinct positions.
#[inline]
pub fn pair_index(a: usize, b: usize) -> usize {
    if a > b {
        condensed_index(a, b)
    } else {
        condensed_index(b, a)
    }
}

/// Expands condensed values into a full symmetric matrix with zero diagonal.
pub fn to_square(values: &[f64], n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n]; n];
    for i in 1..n {
        for j in 0..i {
            let v = values[condensed_index(i, j)];
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

/// Tiling for pairwise sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SweepOptions {
    pub tile: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions { tile: 256 }
    }
}

/// A model RDM over an ordered token subset.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedRdm {
    subset: TokenSubset,
    metric: Metric,
    values: Vec<f64>,
}

impl CondensedRdm {
    pub fn from_parts(subset: TokenSubset, metric: Metric, values: Vec<f64>) -> Result<Self> {
        if values.len() != pair_count(subset.len()) {
            return Err(Error::Shape(format!(
                "{} values for {} tokens; expected {}",
                values.len(),
                subset.len(),
                pair_count(subset.len())
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Invalid(format!(
                "rdm entry {i} is {}; entries must be finite and nonnegative",
                values[i]
            )));
        }
        Ok(CondensedRdm {
            subset,
            metric,
            values,
        })
    }

    pub fn subset(&self) -> &TokenSubset {
        &self.subset
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.subset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subset.is_empty()
    }

    /// Dissimilarity between positions `a` and `b`; zero on the diagonal.
    pub fn get(&self, a: usize, b: usize) -> f64 {
        if a == b {
            0.0
        } else {
            self.values[pair_index(a, b)]
        }
    }

    pub fn to_square(&self) -> Vec<Vec<f64>> {
        to_square(&self.values, self.len())
    }
}

/// Rows of a matrix prepared once for repeated pair evaluation.
///
/// Spearman rows hold centered ranks, cosine and Euclidean rows the raw values;
/// `sumsq` holds each row's self dot product, computed with the same kernel as
/// the pair dot products so identical rows give a distance of exactly zero.
pub(crate) struct PreparedRows {
    metric: Metric,
    dim: usize,
    data: Vec<f64>,
    sumsq: Vec<f64>,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            let d = x[k] - y[k];
            acc[k] += d * d;
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl PreparedRows {
    pub(crate) fn new(m: &EmbeddingMatrix, rows: &[u32], metric: Metric) -> Result<Self> {
        let dim = m.cols();
        if let Some(bad) = rows.iter().find(|r| **r as usize >= m.rows()) {
            return Err(Error::Invalid(format!(
                "token row {bad} out of range for a matrix with {} rows",
                m.rows()
            )));
        }
        if metric == Metric::SpearmanDistance && dim < 2 {
            return Err(Error::Degenerate(
                "spearman distance needs at least 2 dimensions".into(),
            ));
        }
        let mut data = vec![0.0; rows.len() * dim];
        data.par_chunks_mut(dim)
            .zip(rows.par_iter())
            .for_each_init(
                || (vec![0.0; dim], Vec::with_capacity(dim)),
                |(raw, scratch), (out, &r)| {
                    if metric == Metric::SpearmanDistance {
                        m.copy_row(r as usize, raw);
                        rank_into(raw, out, scratch);
                        let mean = (dim as f64 + 1.0) / 2.0;
                        for v in out.iter_mut() {
                            *v -= mean;
                        }
                    } else {
                        m.copy_row(r as usize, out);
                    }
                },
            );
        let sumsq: Vec<f64> = data.par_chunks(dim).map(|r| dot(r, r)).collect();
        if metric != Metric::EuclideanDistance {
            if let Some(p) = sumsq.iter().position(|s| *s == 0.0) {
                let what = if metric == Metric::SpearmanDistance {
                    "constant"
                } else {
                    "zero"
                };
                return Err(Error::Degenerate(format!(
                    "token {} has a {what} embedding row under {metric} distance",
                    rows[p]
                )));
            }
        }
        Ok(PreparedRows {
            metric,
            dim,
            data,
            sumsq,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.sumsq.len()
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub(crate) fn distance(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.row(i), self.row(j));
        match self.metric {
            Metric::SpearmanDistance | Metric::CosineDistance => {
                let r = dot(a, b) / (self.sumsq[i] * self.sumsq[j]).sqrt();
                (1.0 - r).clamp(0.0, 2.0)
            }
            Metric::EuclideanDistance => squared_euclidean(a, b).sqrt(),
        }
    }

    /// Distance between row `i` here and row `i` of `other`.
    pub(crate) fn distance_to(&self, i: usize, other: &PreparedRows, j: usize) -> f64 {
        let (a, b) = (self.row(i), other.row(j));
        match self.metric {
            Metric::SpearmanDistance | Metric::CosineDistance => {
                let r = dot(a, b) / (self.sumsq[i] * other.sumsq[j]).sqrt();
                (1.0 - r).clamp(0.0, 2.0)
            }
            Metric::EuclideanDistance => squared_euclidean(a, b).sqrt(),
        }
    }
}

/// Visits every pair of a row block `[i0, i1)` in tile order.
fn for_each_pair_in_block(i0: usize, i1: usize, tile: usize, mut f: impl FnMut(usize, usize)) {
    let mut jt = 0;
    while jt < i1 {
        let jt_end = (jt + tile).min(i1);
        for i in i0.max(jt + 1)..i1 {
            for j in jt..jt_end.min(i) {
                f(i, j);
            }
        }
        jt = jt_end;
    }
}

/// Row blocks of the condensed vector with the slices they own.
fn row_blocks(values: &mut [f64], n: usize, tile: usize) -> Vec<(usize, usize, &mut [f64])> {
    let mut blocks = Vec::new();
    let mut rest = values;
    let mut i0 = 0;
    while i0 < n {
        let i1 = (i0 + tile).min(n);
        let len = pair_count(i1) - pair_count(i0);
        let (head, tail) = rest.split_at_mut(len);
        blocks.push((i0, i1, head));
        rest = tail;
        i0 = i1;
    }
    blocks
}

pub(crate) fn sweep(rows: &PreparedRows, opts: &SweepOptions) -> Vec<f64> {
    let n = rows.len();
    let tile = opts.tile.max(1);
    let mut values = vec![0.0; pair_count(n)];
    row_blocks(&mut values, n, tile)
        .into_par_iter()
        .for_each(|(i0, i1, out)| {
            let base = pair_count(i0);
            for_each_pair_in_block(i0, i1, tile, |i, j| {
                out[condensed_index(i, j) - base] = rows.distance(i, j);
            });
        });
    values
}

pub fn compute_rdm(m: &EmbeddingMatrix, subset: &TokenSubset, metric: Metric) -> Result<CondensedRdm> {
    compute_rdm_with(m, subset, metric, &SweepOptions::default())
}

pub fn compute_rdm_with(
    m: &EmbeddingMatrix,
    subset: &TokenSubset,
    metric: Metric,
    opts: &SweepOptions,
) -> Result<CondensedRdm> {
    if subset.len() < 2 {
        return Err(Error::Insufficient(format!(
            "an RDM needs at least 2 tokens, got {}",
            subset.len()
        )));
    }
    let prepared = PreparedRows::new(m, subset.rows(), metric)?;
    let values = sweep(&prepared, opts);
    Ok(CondensedRdm {
        subset: subset.clone(),
        metric,
        values,
    })
}

/// Condensed values restricted to `positions`, in that order.
/// Dissimilarities for an explicit list of token-row pairs, preparing each
/// distinct row once.
pub fn pair_distances(m: &EmbeddingMatrix, pairs: &[(u32, u32)], metric: Metric) -> Result<Vec<f64>> {
    let mut rows: Vec<u32> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    rows.sort_unstable();
    rows.dedup();
    let prepared = PreparedRows::new(m, &rows, metric)?;
    let pos = |r: u32| rows.binary_search(&r).expect("row collected above");
    Ok(pairs
        .par_iter()
        .map(|&(a, b)| prepared.distance(pos(a), pos(b)))
        .collect())
}

pub fn select_condensed(values: &[f64], n: usize, positions: &[usize]) -> Result<Vec<f64>> {
    let mut seen = vec![false; n];
    for &p in positions {
        if p >= n {
            return Err(Error::Invalid(format!(
                "position {p} out of range for {n} items"
            )));
        }
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::Invalid(format!("position {p} selected twice")));
        }
    }
    let mut out = Vec::with_capacity(pair_count(positions.len()));
    for a in 1..positions.len() {
        for b in 0..a {
            out.push(values[pair_index(positions[a], positions[b])]);
        }
    }
    Ok(out)
}

pub fn sub_rdm(full: &CondensedRdm, positions: &[usize]) -> Result<CondensedRdm> {
    let values = select_condensed(&full.values, full.len(), positions)?;
    Ok(CondensedRdm {
        subset: full.subset.select(positions)?,
        metric: full.metric,
        values,
    })
}

/// Seeded uniform subsampling of condensed entries for rank correlation.
///
/// When a condensed vector has more than `threshold` entries, `sample_size`
/// distinct entry indices are drawn without replacement by
/// `rand::seq::index::sample` driven by a SplitMix64 generator seeded with
/// `seed` (state advances by `0x9E3779B97F4A7C15`; output mixing uses the
/// multipliers `0xBF58476D1CE4E5B9` and `0x94D049BB133111EB`). The same
/// indices are applied to both vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSampler {
    pub threshold: usize,
    pub sample_size: usize,
    pub seed: u64,
}

impl Default for PairSampler {
    fn default() -> Self {
        PairSampler {
            threshold: 10_000_000,
            sample_size: 10_000_000,
            seed: 0,
        }
    }
}

impl PairSampler {
    pub fn disabled() -> Self {
        PairSampler {
            threshold: usize::MAX,
            sample_size: usize::MAX,
            seed: 0,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        PairSampler { seed, ..self }
    }

    /// Sorted entry indices to keep, or `None` to use every entry.
    pub fn indices(&self, len: usize) -> Option<Vec<usize>> {
        if len <= self.threshold || self.sample_size >= len {
            return None;
        }
        let mut rng = SplitMix64::seed_from_u64(self.seed);
        let mut idx = rand::seq::index::sample(&mut rng, len, self.sample_size).into_vec();
        idx.sort_unstable();
        Some(idx)
    }
}

/// A rank correlation together with the number of entries it used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation {
    pub tau: f64,
    pub n_pairs: usize,
}

/// Kendall tau-b between two paired vectors, subsampled per `sampler`.
pub fn correlate(a: &[f64], b: &[f64], sampler: &PairSampler) -> Result<Correlation> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "cannot correlate {} entries with {}",
            a.len(),
            b.len()
        )));
    }
    match sampler.indices(a.len()) {
        None => Ok(Correlation {
            tau: kendall_tau_b(a, b)?,
            n_pairs: a.len(),
        }),
        Some(idx) => {
            let sa: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
            let sb: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
            Ok(Correlation {
                tau: kendall_tau_b(&sa, &sb)?,
                n_pairs: idx.len(),
            })
        }
    }
}

pub fn rdm_correlation(a: &CondensedRdm, b: &CondensedRdm, sampler: &PairSampler) -> Result<f64> {
    rdm_correlation_detailed(a, b, sampler).map(|c| c.tau)
}

pub fn rdm_correlation_detailed(
    a: &CondensedRdm,
    b: &CondensedRdm,
    sampler: &PairSampler,
) -> Result<Correlation> {
    if a.subset.rows() != b.subset.rows() {
        return Err(Error::Shape(
            "RDMs are defined over different token subsets".into(),
        ));
    }
    correlate(&a.values, &b.values, sampler)
}

/// Change in dissimilarity of one pair between two checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDelta {
    pub word_a: String,
    pub word_b: String,
    pub token_a: u32,
    pub token_b: u32,
    /// Later distance minus earlier distance.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaExtremes {
    /// Most negative deltas (pairs moving closer), most extreme first.
    pub closing: Vec<PairDelta>,
    /// Most positive deltas (pairs moving apart), most extreme first.
    pub opening: Vec<PairDelta>,
}

/// Heap key ordering candidates best-first: by `score`, then by smaller row,
/// then by smaller column.
#[derive(Debug, Clone, Copy)]
struct Ranked {
    score: f64,
    i: u32,
    j: u32,
    delta: f64,
}

impl Ranked {
    fn key_cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then(self.i.cmp(&other.i))
            .then(self.j.cmp(&other.j))
    }
}

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Ranked {}

impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

/// Keeps the `k` smallest keys; the heap top is the worst one kept.
struct BoundedBest {
    k: usize,
    heap: BinaryHeap<Ranked>,
}

impl BoundedBest {
    fn new(k: usize) -> Self {
        BoundedBest {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, item: Ranked) {
        if self.heap.len() < self.k {
            self.heap.push(item);
        } else if let Some(top) = self.heap.peek() {
            if item < *top {
                self.heap.pop();
                self.heap.push(item);
            }
        }
    }

    fn merge(mut self, other: BoundedBest) -> Self {
        for item in other.heap {
            self.offer(item);
        }
        self
    }

    fn into_sorted(self) -> Vec<Ranked> {
        self.heap.into_sorted_vec()
    }
}

/// The `k` pairs whose dissimilarity falls most and rises most between two
/// checkpoints, computed tile by tile without materialising either RDM.
///
/// Ties on delta are broken by smaller row position, then smaller column
/// position (pair `(i, j)` with `i > j` in subset order).
pub fn top_k_deltas(
    early: &EmbeddingMatrix,
    fin: &EmbeddingMatrix,
    subset: &TokenSubset,
    metric: Metric,
    k: usize,
) -> Result<DeltaExtremes> {
    top_k_deltas_with(early, fin, subset, metric, k, &SweepOptions::default())
}

pub fn top_k_deltas_with(
    early: &EmbeddingMatrix,
    fin: &EmbeddingMatrix,
    subset: &TokenSubset,
    metric: Metric,
    k: usize,
    opts: &SweepOptions,
) -> Result<DeltaExtremes> {
    if k == 0 {
        return Err(Error::Invalid("k must be at least 1".into()));
    }
    if early.rows() != fin.rows() {
        return Err(Error::Shape(format!(
            "checkpoints disagree on vocabulary size: {} vs {}",
            early.rows(),
            fin.rows()
        )));
    }
    if subset.len() < 2 {
        return Err(Error::Insufficient("need at least 2 tokens".into()));
    }
    let pe = PreparedRows::new(early, subset.rows(), metric)?;
    let pf = PreparedRows::new(fin, subset.rows(), metric)?;
    let n = subset.len();
    let tile = opts.tile.max(1);
    let blocks: Vec<(usize, usize)> = (0..n)
        .step_by(tile)
        .map(|i0| (i0, (i0 + tile).min(n)))
        .collect();
    let (closing, opening) = blocks
        .into_par_iter()
        .fold(
            || (BoundedBest::new(k), BoundedBest::new(k)),
            |(mut lo, mut hi), (i0, i1)| {
                for_each_pair_in_block(i0, i1, tile, |i, j| {
                    let delta = pf.distance(i, j) - pe.distance(i, j) + 0.0;
                    let (i, j) = (i as u32, j as u32);
                    lo.offer(Ranked {
                        score: delta,
                        i,
                        j,
                        delta,
                    });
                    hi.offer(Ranked {
                        score: -delta + 0.0,
                        i,
                        j,
                        delta,
                    });
                });
                (lo, hi)
            },
        )
        .reduce(
            || (BoundedBest::new(k), BoundedBest::new(k)),
            |(a_lo, a_hi), (b_lo, b_hi)| (a_lo.merge(b_lo), a_hi.merge(b_hi)),
        );
    let to_delta = |r: Ranked| PairDelta {
        word_a: subset.labels()[r.i as usize].clone(),
        word_b: subset.labels()[r.j as usize].clone(),
        token_a: subset.rows()[r.i as usize],
        token_b: subset.rows()[r.j as usize],
        delta: r.delta,
    };
    Ok(DeltaExtremes {
        closing: closing.into_sorted().into_iter().map(to_delta).collect(),
        opening: opening.into_sorted().into_iter().map(to_delta).collect(),
    })
}

/// Sidecar manifest stored next to a cached condensed RDM.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RdmManifest {
    pub metric: Metric,
    pub token_ids: Vec<u32>,
    pub source_step: u64,
    pub kind: EmbeddingKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

pub fn manifest_path(npy_path: &Path) -> PathBuf {
    npy_path.with_extension("json")
}

/// Writes `rdm` as a 1-D float64 npy file plus its JSON manifest.
pub fn save_rdm(path: impl AsRef<Path>, rdm: &CondensedRdm, source_step: u64, kind: EmbeddingKind) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_npy(&mut w, &[rdm.values.len()], &NpyData::F64(rdm.values.clone()))?;
    w.flush().map_err(|e| Error::io(path, e))?;
    let manifest = RdmManifest {
        metric: rdm.metric,
        token_ids: rdm.subset.rows().to_vec(),
        source_step,
        kind,
        labels: Some(rdm.subset.labels().to_vec()),
    };
    let mpath = manifest_path(path);
    let text = serde_json::to_string_pretty(&manifest)?;
    std::fs::write(&mpath, text).map_err(|e| Error::io(&mpath, e))
}

pub fn load_rdm(path: impl AsRef<Path>) -> Result<(CondensedRdm, RdmManifest)> {
    let path = path.as_ref();
    let mpath = manifest_path(path);
    let text = std::fs::read_to_string(&mpath).map_err(|e| Error::io(&mpath, e))?;
    let manifest: RdmManifest = serde_json::from_str(&text)?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let arr = read_npy(&mut BufReader::new(file))?;
    let values = match (arr.shape.as_slice(), arr.data) {
        ([_], NpyData::F64(v)) => v,
        (shape, _) => {
            return Err(Error::Npy(format!(
                "{}: cached RDM must be 1-D float64, found shape {shape:?}",
                path.display()
            )))
        }
    };
    let subset = match &manifest.labels {
        Some(labels) => TokenSubset::new(manifest.token_ids.clone(), labels.clone())?,
        None => TokenSubset::from_rows(manifest.token_ids.clone())?,
    };
    let rdm = CondensedRdm::from_parts(subset, manifest.metric, values)?;
    Ok((rdm, manifest))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::vector_dissimilarity;
    use rand::Rng;

    fn random_matrix(seed: u64, rows: usize, cols: usize) -> EmbeddingMatrix {
        let mut rng = SplitMix64::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.random::<f64>() - 0.5).collect();
        EmbeddingMatrix::from_f64(rows, cols, data, EmbeddingKind::Input).unwrap()
    }

    #[test]
    fn index_is_a_bijection() {
        for n in 2..=100 {
            let mut seen = vec![false; pair_count(n)];
            for i in 1..n {
                for j in 0..i {
                    let k = condensed_index(i, j);
                    assert!(k < seen.len());
                    assert!(!seen[k]);
                    seen[k] = true;
                }
            }
            assert!(seen.iter().all(|s| *s));
        }
    }

    #[test]
    fn identical_rows_give_zero() {
        let m = EmbeddingMatrix::from_f64(2, 3, vec![1.0, 5.0, 2.0, 1.0, 5.0, 2.0], EmbeddingKind::Input)
            .unwrap();
        for metric in [Metric::SpearmanDistance, Metric::CosineDistance, Metric::EuclideanDistance] {
            let rdm = compute_rdm(&m, &TokenSubset::range(2), metric).unwrap();
            assert_eq!(rdm.values(), &[0.0]);
        }
    }

    #[test]
    fn matches_naive_pair_loop_for_small_tiles() {
        let m = random_matrix(3, 64, 16);
        let subset = TokenSubset::range(64);
        for metric in [Metric::SpearmanDistance, Metric::CosineDistance, Metric::EuclideanDistance] {
            let rdm = compute_rdm_with(&m, &subset, metric, &SweepOptions { tile: 7 }).unwrap();
            for i in 1..64 {
                for j in 0..i {
                    let naive = vector_dissimilarity(&m.row(i), &m.row(j), metric).unwrap();
                    assert!((rdm.get(i, j) - naive).abs() < 1e-12);
                }
            }
            let default = compute_rdm(&m, &subset, metric).unwrap();
            assert_eq!(default.values(), rdm.values());
        }
    }

    #[test]
    fn square_form_is_symmetric_with_zero_diagonal() {
        let rdm = compute_rdm(&random_matrix(9, 12, 5), &TokenSubset::range(12), Metric::CosineDistance)
            .unwrap();
        let sq = rdm.to_square();
        for (i, row) in sq.iter().enumerate() {
            assert_eq!(row[i], 0.0);
            for (j, v) in row.iter().enumerate() {
                assert_eq!(*v, sq[j][i]);
            }
        }
    }

    #[test]
    fn constant_row_is_degenerate_with_token_id() {
        let mut data = vec![0.0; 3 * 4];
        data[..4].copy_from_slice(&[1.0, 2.0, 3.0, 4.0]);
        data[4..8].copy_from_slice(&[0.5; 4]);
        data[8..].copy_from_slice(&[4.0, 3.0, 2.0, 1.0]);
        let m = EmbeddingMatrix::from_f64(3, 4, data, EmbeddingKind::Input).unwrap();
        let err = compute_rdm(&m, &TokenSubset::range(3), Metric::SpearmanDistance).unwrap_err();
        assert!(matches!(&err, Error::Degenerate(msg) if msg.contains("token 1")), "{err}");
    }

    #[test]
    fn out_of_range_row_is_rejected() {
        let m = random_matrix(1, 4, 3);
        let subset = TokenSubset::from_rows(vec![0, 9]).unwrap();
        assert!(compute_rdm(&m, &subset, Metric::CosineDistance).is_err());
    }

    #[test]
    fn sub_rdm_identity_and_index_arithmetic() {
        let m = random_matrix(4, 3, 6);
        let full = compute_rdm(&m, &TokenSubset::range(3), Metric::SpearmanDistance).unwrap();
        assert_eq!(sub_rdm(&full, &[0, 1, 2]).unwrap(), full);
        let s = sub_rdm(&full, &[2, 0]).unwrap();
        assert_eq!(s.values(), &[full.get(2, 0)]);
        assert_eq!(s.subset().rows(), &[2, 0]);
        assert!(sub_rdm(&full, &[0, 3]).is_err());
        assert!(sub_rdm(&full, &[1, 1]).is_err());
    }

    #[test]
    fn correlation_self_and_affine() {
        let m = random_matrix(8, 30, 10);
        let a = compute_rdm(&m, &TokenSubset::range(30), Metric::SpearmanDistance).unwrap();
        assert_eq!(rdm_correlation(&a, &a, &PairSampler::disabled()).unwrap(), 1.0);
        let b = CondensedRdm::from_parts(
            a.subset().clone(),
            a.metric(),
            a.values().iter().map(|v| 2.0 * v + 1.0).collect(),
        )
        .unwrap();
        assert_eq!(rdm_correlation(&a, &b, &PairSampler::disabled()).unwrap(), 1.0);
        let other = compute_rdm(&m, &TokenSubset::from_rows((1..31).map(|r| r % 30).collect()).unwrap(), Metric::SpearmanDistance).unwrap();
        assert!(rdm_correlation(&a, &other, &PairSampler::disabled()).is_err());
    }

    #[test]
    fn sampler_is_seeded_and_bounded() {
        let s = PairSampler {
            threshold: 10,
            sample_size: 5,
            seed: 3,
        };
        assert_eq!(s.indices(10), None);
        let a = s.indices(100).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a, s.indices(100).unwrap());
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_ne!(a, s.with_seed(4).indices(100).unwrap());
    }

    #[test]
    fn identical_checkpoints_give_zero_deltas_in_index_order() {
        let m = random_matrix(5, 10, 8);
        let out = top_k_deltas(&m, &m, &TokenSubset::range(10), Metric::SpearmanDistance, 3).unwrap();
        let pairs: Vec<(u32, u32)> = out.closing.iter().map(|d| (d.token_a, d.token_b)).collect();
        assert_eq!(pairs, vec![(1, 0), (2, 0), (2, 1)]);
        assert!(out.closing.iter().chain(&out.opening).all(|d| d.delta == 0.0));
        assert!(top_k_deltas(&m, &m, &TokenSubset::range(10), Metric::SpearmanDistance, 0).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.npy");
        let m = random_matrix(6, 9, 4);
        let rdm = compute_rdm(&m, &TokenSubset::range(9), Metric::EuclideanDistance).unwrap();
        save_rdm(&path, &rdm, 1000, EmbeddingKind::Output).unwrap();
        let (back, manifest) = load_rdm(&path).unwrap();
        assert_eq!(back, rdm);
        assert_eq!(manifest.source_step, 1000);
        assert_eq!(manifest.kind, EmbeddingKind::Output);
    }
}
