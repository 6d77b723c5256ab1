//! Experiment runners over checkpoint sequences.
//!
//! Every runner evaluates checkpoints on a bounded worker pool and returns
//! series in step order; results do not depend on pool widths.

mod cache;
mod manifest;
mod plot;
mod series;
pub mod synthetic;

use std::collections::HashMap;
use std::path::PathBuf;

use log::{info, warn};
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::{Deserialize, Serialize};

pub use cache::RdmCache;
pub use manifest::{CheckpointEntry, CheckpointManifest, CheckpointStore, FileCheck, MemoryCheckpoints};
pub use plot::render_svg;
pub use series::{
    load_series_json, save_series, write_series_csv, CorrelationPoint, CorrelationSeries, ValueKind,
};

use crate::embed_io::{resolve_words, EmbeddingKind, MatchPolicy, TokenSubset, VocabMap};
use crate::error::{Error, Result};
use crate::hypotheses::{subsample_positions, GroupingTable, HypothesisRdm, PairDataset, ScoreKind};
use crate::metrics::Metric;
use crate::rdm::{
    compute_rdm_with, correlate, pair_count, pair_distances, top_k_deltas_with, CondensedRdm,
    PairDelta, PairSampler, PreparedRows, SweepOptions,
};

/// Universal POS tags treated as closed-class.
pub const FUNCTIONAL_UPOS: &[&str] = &[
    "PRON", "ADP", "AUX", "CCONJ", "SCONJ", "DET", "NUM", "PART", "PUNCT",
];
/// Universal POS tags treated as open-class.
pub const LEXICAL_UPOS: &[&str] = &["NOUN", "VERB", "PROPN", "ADJ", "ADV"];

/// Smallest token (or pair) count a hypothesis or subset may resolve to.
pub const DEFAULT_MIN_ITEMS: usize = 10;

/// Shared execution settings.
pub struct Runner {
    compute: ThreadPool,
    checkpoints: ThreadPool,
    sampler: PairSampler,
    sweep: SweepOptions,
    cache: Option<RdmCache>,
    min_items: usize,
}

fn pool(threads: usize, name: &'static str) -> Result<ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .thread_name(move |i| format!("{name}-{i}"))
        .build()
        .map_err(|e| Error::Invalid(format!("cannot start worker pool: {e}")))
}

impl Runner {
    /// `threads` sizes the pool used inside a checkpoint (0 = logical cores);
    /// `checkpoint_workers` bounds how many checkpoints are held in memory and
    /// evaluated at once.
    pub fn new(threads: usize, checkpoint_workers: usize) -> Result<Self> {
        Ok(Runner {
            compute: pool(threads, "rdm")?,
            checkpoints: pool(checkpoint_workers.max(1), "ckpt")?,
            sampler: PairSampler::default(),
            sweep: SweepOptions::default(),
            cache: None,
            min_items: DEFAULT_MIN_ITEMS,
        })
    }

    pub fn with_sampler(mut self, sampler: PairSampler) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn with_sweep(mut self, sweep: SweepOptions) -> Self {
        self.sweep = sweep;
        self
    }

    pub fn with_cache(mut self, dir: impl Into<PathBuf>) -> Self {
        self.cache = Some(RdmCache::new(dir));
        self
    }

    pub fn with_min_items(mut self, min_items: usize) -> Self {
        self.min_items = min_items;
        self
    }

    pub fn sampler(&self) -> &PairSampler {
        &self.sampler
    }

    pub fn min_items(&self) -> usize {
        self.min_items
    }

    fn map_checkpoints<T, F>(&self, indices: &[usize], f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync,
    {
        self.checkpoints.install(|| {
            indices
                .par_iter()
                .map(|&i| self.compute.install(|| f(i)))
                .collect()
        })
    }

    fn require_size(&self, what: &str, n: usize) -> Result<()> {
        if n < self.min_items {
            return Err(Error::Insufficient(format!(
                "{what} has {n} tokens, at least {} required",
                self.min_items
            )));
        }
        Ok(())
    }

    /// Model RDMs of one checkpoint for each subset, served from the cache
    /// where possible. The matrix is loaded only if something is missing.
    fn model_rdms(
        &self,
        store: &dyn CheckpointStore,
        index: usize,
        kind: EmbeddingKind,
        metric: Metric,
        subsets: &[&TokenSubset],
    ) -> Result<Vec<CondensedRdm>> {
        let step = store.steps()[index];
        let source = self
            .cache
            .as_ref()
            .and_then(|_| store.source_id(index, kind));
        let mut out: Vec<Option<CondensedRdm>> = vec![None; subsets.len()];
        if let (Some(cache), Some(src)) = (&self.cache, &source) {
            for (slot, s) in out.iter_mut().zip(subsets) {
                *slot = cache.get(src, step, kind, metric, s)?;
            }
        }
        if out.iter().any(Option::is_none) {
            let m = store.load(index, kind)?;
            for (slot, s) in out.iter_mut().zip(subsets) {
                if slot.is_none() {
                    let rdm = compute_rdm_with(&m, s, metric, &self.sweep)?;
                    if let (Some(cache), Some(src)) = (&self.cache, &source) {
                        cache.put(src, step, kind, &rdm)?;
                    }
                    *slot = Some(rdm);
                }
            }
        }
        Ok(out.into_iter().map(|r| r.expect("filled above")).collect())
    }
}

fn point(step: u64, value: f64, n_pairs: usize) -> CorrelationPoint {
    CorrelationPoint {
        step,
        x_rescaled: None,
        value: value + 0.0,
        n_pairs,
        std: None,
    }
}

/// Mean and sample standard deviation (`None` below two values).
fn mean_std(values: &[f64]) -> (f64, Option<f64>) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, None);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, Some(var.sqrt()))
}

fn all_indices(store: &dyn CheckpointStore) -> Vec<usize> {
    (0..store.len()).collect()
}

// ---------------------------------------------------------------------------
// Hypothesis RSA

/// An annotation-derived target before vocabulary resolution.
#[derive(Debug, Clone)]
pub enum Hypothesis {
    Rdm(HypothesisRdm),
    Pairs(PairDataset),
}

/// A hypothesis resolved to token rows.
#[derive(Debug, Clone, PartialEq)]
pub enum PreparedHypothesis {
    /// Condensed hypothesis values over `subset`, compared with `+tau`.
    Rdm {
        name: String,
        subset: TokenSubset,
        values: Vec<f64>,
    },
    /// Sparse pair scores; `sign` is -1 for similarity scores and +1 for
    /// distances.
    Pairs {
        name: String,
        pairs: Vec<(u32, u32)>,
        labels: Vec<(String, String)>,
        scores: Vec<f64>,
        sign: f64,
    },
}

impl PreparedHypothesis {
    pub fn rdm(name: impl Into<String>, subset: TokenSubset, values: Vec<f64>) -> Result<Self> {
        if values.len() != pair_count(subset.len()) {
            return Err(Error::Shape(format!(
                "{} hypothesis values for {} tokens",
                values.len(),
                subset.len()
            )));
        }
        Ok(PreparedHypothesis::Rdm {
            name: name.into(),
            subset,
            values,
        })
    }

    pub fn name(&self) -> &str {
        match self {
            PreparedHypothesis::Rdm { name, .. } | PreparedHypothesis::Pairs { name, .. } => name,
        }
    }

    /// Tokens for an RDM hypothesis, pairs for a pair dataset.
    pub fn n_items(&self) -> usize {
        match self {
            PreparedHypothesis::Rdm { subset, .. } => subset.len(),
            PreparedHypothesis::Pairs { pairs, .. } => pairs.len(),
        }
    }
}

/// Resolves hypothesis words to tokens. Unresolvable words are dropped
/// row-wise (RDMs) or pair-wise (pair datasets); fewer than `min_items`
/// survivors is an error.
pub fn prepare_hypothesis(
    hypothesis: &Hypothesis,
    vocab: &VocabMap,
    policy: &MatchPolicy,
    min_items: usize,
) -> Result<PreparedHypothesis> {
    match hypothesis {
        Hypothesis::Rdm(h) => {
            let res = resolve_words(vocab, h.words(), policy)?;
            info!(
                "hypothesis {}: {} of {} words resolved ({} unresolved, {} collisions)",
                h.provenance(),
                res.subset.len(),
                h.len(),
                res.unresolved.len(),
                res.collisions.len()
            );
            if res.subset.len() < min_items {
                return Err(Error::Insufficient(format!(
                    "hypothesis {} resolves to {} tokens, at least {min_items} required",
                    h.provenance(),
                    res.subset.len()
                )));
            }
            let values = h.select(&res.word_positions)?.values().to_vec();
            PreparedHypothesis::rdm(h.provenance(), res.subset, values)
        }
        Hypothesis::Pairs(d) => {
            let words = d.words();
            let res = resolve_words(vocab, &words, policy)?;
            let token: HashMap<&str, u32> = res
                .subset
                .labels()
                .iter()
                .map(String::as_str)
                .zip(res.subset.rows().iter().copied())
                .collect();
            let (mut pairs, mut labels, mut scores) = (Vec::new(), Vec::new(), Vec::new());
            for p in &d.pairs {
                if let (Some(&ta), Some(&tb)) = (token.get(p.a.as_str()), token.get(p.b.as_str())) {
                    pairs.push((ta, tb));
                    labels.push((p.a.clone(), p.b.clone()));
                    scores.push(p.score);
                }
            }
            info!(
                "pair dataset {}: {} of {} pairs resolved",
                d.name,
                pairs.len(),
                d.len()
            );
            if pairs.len() < min_items {
                return Err(Error::Insufficient(format!(
                    "pair dataset {} resolves to {} pairs, at least {min_items} required",
                    d.name,
                    pairs.len()
                )));
            }
            let sign = match d.score_kind {
                ScoreKind::Similarity => -1.0,
                ScoreKind::Distance => 1.0,
            };
            Ok(PreparedHypothesis::Pairs {
                name: d.name.clone(),
                pairs,
                labels,
                scores,
                sign,
            })
        }
    }
}

/// Correlation between the model and a hypothesis at every checkpoint.
pub fn hypothesis_rsa(
    runner: &Runner,
    store: &dyn CheckpointStore,
    hypothesis: &PreparedHypothesis,
    kind: EmbeddingKind,
    metric: Metric,
) -> Result<CorrelationSeries> {
    runner.require_size(hypothesis.name(), hypothesis.n_items())?;
    let steps = store.steps();
    let points = match hypothesis {
        PreparedHypothesis::Rdm { subset, values, .. } => {
            runner.map_checkpoints(&all_indices(store), |i| {
                let model = runner.model_rdms(store, i, kind, metric, &[subset])?;
                let c = correlate(model[0].values(), values, &runner.sampler)?;
                Ok(point(steps[i], c.tau, c.n_pairs))
            })?
        }
        PreparedHypothesis::Pairs {
            pairs,
            scores,
            sign,
            ..
        } => runner.map_checkpoints(&all_indices(store), |i| {
            let m = store.load(i, kind)?;
            let d = pair_distances(&m, pairs, metric)?;
            let c = correlate(scores, &d, &PairSampler::disabled())?;
            Ok(point(steps[i], sign * c.tau, c.n_pairs))
        })?,
    };
    Ok(CorrelationSeries {
        name: hypothesis.name().to_string(),
        value_kind: ValueKind::Correlation,
        points,
    })
}

/// Hypothesis RSA on `sample_size`-token subsamples, one per seed; points
/// carry the mean and sample standard deviation over seeds.
pub fn hypothesis_rsa_subsampled(
    runner: &Runner,
    store: &dyn CheckpointStore,
    hypothesis: &PreparedHypothesis,
    sample_size: usize,
    seeds: &[u64],
    kind: EmbeddingKind,
    metric: Metric,
) -> Result<CorrelationSeries> {
    let PreparedHypothesis::Rdm {
        name,
        subset,
        values,
    } = hypothesis
    else {
        return Err(Error::Invalid(
            "subsampling applies to RDM hypotheses only".into(),
        ));
    };
    if seeds.is_empty() {
        return Err(Error::Invalid("at least one seed is required".into()));
    }
    let n = subset.len();
    let k = sample_size.min(n);
    runner.require_size(name, k)?;
    let draws = seeds
        .iter()
        .map(|&seed| {
            let pos = subsample_positions(n, k, seed);
            let sub = subset.select(&pos)?;
            let vals = crate::rdm::select_condensed(values, n, &pos)?;
            Ok((sub, vals))
        })
        .collect::<Result<Vec<_>>>()?;
    let subsets: Vec<&TokenSubset> = draws.iter().map(|d| &d.0).collect();
    let steps = store.steps();
    let points = runner.map_checkpoints(&all_indices(store), |i| {
        let model = runner.model_rdms(store, i, kind, metric, &subsets)?;
        let mut taus = Vec::with_capacity(seeds.len());
        let mut n_pairs = 0;
        for (rdm, (_, vals)) in model.iter().zip(&draws) {
            let c = correlate(rdm.values(), vals, &runner.sampler)?;
            taus.push(c.tau);
            n_pairs = c.n_pairs;
        }
        let (mean, std) = mean_std(&taus);
        Ok(CorrelationPoint {
            std,
            ..point(steps[i], mean, n_pairs)
        })
    })?;
    Ok(CorrelationSeries {
        name: format!("{name} (n={k}, {} seeds)", seeds.len()),
        value_kind: ValueKind::Correlation,
        points,
    })
}

// ---------------------------------------------------------------------------
// Convergence RSA

/// Convergence series for several named subsets, sharing checkpoint loads.
pub fn convergence_many(
    runner: &Runner,
    store: &dyn CheckpointStore,
    subsets: &[(String, TokenSubset)],
    kind: EmbeddingKind,
    metric: Metric,
) -> Result<Vec<CorrelationSeries>> {
    for (name, s) in subsets {
        runner.require_size(name, s.len())?;
    }
    let refs: Vec<&TokenSubset> = subsets.iter().map(|s| &s.1).collect();
    let last = store.final_index();
    let finals = runner
        .compute
        .install(|| runner.model_rdms(store, last, kind, metric, &refs))?;
    let steps = store.steps();
    let rows = runner.map_checkpoints(&all_indices(store), |i| {
        let owned;
        let rdms = if i == last {
            &finals
        } else {
            owned = runner.model_rdms(store, i, kind, metric, &refs)?;
            &owned
        };
        rdms.iter()
            .zip(&finals)
            .map(|(r, f)| {
                let c = correlate(r.values(), f.values(), &runner.sampler)?;
                Ok(point(steps[i], c.tau, c.n_pairs))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(subsets
        .iter()
        .enumerate()
        .map(|(s, (name, _))| CorrelationSeries {
            name: name.clone(),
            value_kind: ValueKind::Correlation,
            points: rows.iter().map(|r| r[s].clone()).collect(),
        })
        .collect())
}

/// Correlation of each checkpoint's sub-RDM with the final checkpoint's.
pub fn convergence_rsa(
    runner: &Runner,
    store: &dyn CheckpointStore,
    subset: &TokenSubset,
    kind: EmbeddingKind,
    metric: Metric,
) -> Result<CorrelationSeries> {
    let mut out = convergence_many(
        runner,
        store,
        &[("convergence".to_string(), subset.clone())],
        kind,
        metric,
    )?;
    Ok(out.remove(0))
}

/// Maps training steps to expected exposures per frequency bucket:
/// `x = step * tokens_per_step * bucket_share`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExposureRescale {
    pub bucket_share: Vec<f64>,
    pub tokens_per_step: u64,
}

impl ExposureRescale {
    pub fn new(bucket_share: Vec<f64>, tokens_per_step: u64) -> Result<Self> {
        if tokens_per_step == 0 {
            return Err(Error::Invalid("tokens_per_step must be positive".into()));
        }
        if let Some(s) = bucket_share.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(Error::Invalid(format!("bucket share {s} is not positive")));
        }
        Ok(ExposureRescale {
            bucket_share,
            tokens_per_step,
        })
    }

    /// Uses the store's `tokens_per_step`, which must be present.
    pub fn for_store(store: &dyn CheckpointStore, bucket_share: Vec<f64>) -> Result<Self> {
        let tps = store.tokens_per_step().ok_or_else(|| {
            Error::Invalid("exposure rescaling needs tokens_per_step in the manifest".into())
        })?;
        Self::new(bucket_share, tps)
    }

    pub fn x(&self, bucket: usize, step: u64) -> f64 {
        step as f64 * self.tokens_per_step as f64 * self.bucket_share[bucket]
    }
}

/// One convergence series per frequency bucket (`bucket_1` most frequent).
pub fn frequency_convergence(
    runner: &Runner,
    store: &dyn CheckpointStore,
    buckets: &[TokenSubset],
    rescale: Option<&ExposureRescale>,
    kind: EmbeddingKind,
    metric: Metric,
) -> Result<Vec<CorrelationSeries>> {
    if let Some(r) = rescale {
        if r.bucket_share.len() != buckets.len() {
            return Err(Error::Shape(format!(
                "{} bucket shares for {} buckets",
                r.bucket_share.len(),
                buckets.len()
            )));
        }
    }
    let named: Vec<(String, TokenSubset)> = buckets
        .iter()
        .enumerate()
        .map(|(b, s)| (format!("bucket_{}", b + 1), s.clone()))
        .collect();
    let mut series = convergence_many(runner, store, &named, kind, metric)?;
    if let Some(r) = rescale {
        for (b, s) in series.iter_mut().enumerate() {
            for p in &mut s.points {
                p.x_rescaled = Some(r.x(b, p.step));
            }
        }
    }
    Ok(series)
}

/// Convergence averaged within the closed-class and open-class POS groups.
#[derive(Debug, Clone, PartialEq)]
pub struct PosConvergence {
    pub functional: CorrelationSeries,
    pub lexical: CorrelationSeries,
    /// The per-tag series that were averaged.
    pub per_tag: Vec<CorrelationSeries>,
}

pub fn pos_class_convergence(
    runner: &Runner,
    store: &dyn CheckpointStore,
    vocab: &VocabMap,
    pos: &GroupingTable,
    policy: &MatchPolicy,
    kind: EmbeddingKind,
    metric: Metric,
) -> Result<PosConvergence> {
    let mut named = Vec::new();
    let mut group_of = Vec::new();
    for (group, tags) in [(0, FUNCTIONAL_UPOS), (1, LEXICAL_UPOS)] {
        for tag in tags.iter() {
            let words = pos.words_with_label(tag);
            if words.is_empty() {
                continue;
            }
            let res = resolve_words(vocab, &words, policy)?;
            if res.subset.len() < runner.min_items {
                warn!(
                    "skipping {tag}: {} resolvable words, {} required",
                    res.subset.len(),
                    runner.min_items
                );
                continue;
            }
            named.push((tag.to_string(), res.subset));
            group_of.push(group);
        }
    }
    for (group, name) in [(0, "functional"), (1, "lexical")] {
        if !group_of.contains(&group) {
            return Err(Error::Insufficient(format!(
                "no {name} POS tag resolves to at least {} tokens",
                runner.min_items
            )));
        }
    }
    let per_tag = convergence_many(runner, store, &named, kind, metric)?;
    let average = |group: usize, name: &str| {
        let members: Vec<&CorrelationSeries> = per_tag
            .iter()
            .zip(&group_of)
            .filter(|(_, g)| **g == group)
            .map(|(s, _)| s)
            .collect();
        let points = (0..store.len())
            .map(|i| {
                let vals: Vec<f64> = members.iter().map(|s| s.points[i].value).collect();
                let (mean, std) = mean_std(&vals);
                CorrelationPoint {
                    std,
                    ..point(
                        store.steps()[i],
                        mean,
                        members.iter().map(|s| s.points[i].n_pairs).sum(),
                    )
                }
            })
            .collect();
        CorrelationSeries {
            name: name.to_string(),
            value_kind: ValueKind::Correlation,
            points,
        }
    };
    Ok(PosConvergence {
        functional: average(0, "functional"),
        lexical: average(1, "lexical"),
        per_tag,
    })
}

// ---------------------------------------------------------------------------
// Drift, input/output agreement and pairwise change

/// Mean dissimilarity between sampled token rows and the same rows at the
/// final checkpoint. Points carry the standard deviation over tokens.
pub fn drift_to_final(
    runner: &Runner,
    store: &dyn CheckpointStore,
    sample_size: usize,
    seed: u64,
    kind: EmbeddingKind,
    metric: Metric,
) -> Result<CorrelationSeries> {
    let last = store.final_index();
    let fin = store.load(last, kind)?;
    if sample_size == 0 || sample_size > fin.rows() {
        return Err(Error::Invalid(format!(
            "sample size {sample_size} must be between 1 and the vocabulary size {}",
            fin.rows()
        )));
    }
    let rows: Vec<u32> = subsample_positions(fin.rows(), sample_size, seed)
        .into_iter()
        .map(|r| r as u32)
        .collect();
    let pf = runner
        .compute
        .install(|| PreparedRows::new(&fin, &rows, metric))?;
    let vocab_size = fin.rows();
    drop(fin);
    let steps = store.steps();
    let points = runner.map_checkpoints(&all_indices(store), |i| {
        let m = store.load(i, kind)?;
        if m.rows() != vocab_size {
            return Err(Error::Shape(format!(
                "checkpoint at step {} has {} rows, the final one {vocab_size}",
                steps[i],
                m.rows()
            )));
        }
        let p = PreparedRows::new(&m, &rows, metric)?;
        let d: Vec<f64> = (0..rows.len())
            .into_par_iter()
            .map(|t| p.distance_to(t, &pf, t))
            .collect();
        let (mean, std) = mean_std(&d);
        Ok(CorrelationPoint {
            std,
            ..point(steps[i], mean, rows.len())
        })
    })?;
    Ok(CorrelationSeries {
        name: format!("drift (n={sample_size}, seed={seed})"),
        value_kind: ValueKind::Distance,
        points,
    })
}

/// Correlation between the input-embedding and output-embedding RDMs of the
/// same checkpoint, one series per named subset.
pub fn in_out_correlation(
    runner: &Runner,
    store: &dyn CheckpointStore,
    subsets: &[(String, TokenSubset)],
    metric: Metric,
) -> Result<Vec<CorrelationSeries>> {
    if let Some(i) = (0..store.len()).find(|&i| !store.has_kind(i, EmbeddingKind::Output)) {
        return Err(Error::Invalid(format!(
            "checkpoint at step {} has no output matrix",
            store.steps()[i]
        )));
    }
    for (name, s) in subsets {
        runner.require_size(name, s.len())?;
    }
    let refs: Vec<&TokenSubset> = subsets.iter().map(|s| &s.1).collect();
    let steps = store.steps();
    let rows = runner.map_checkpoints(&all_indices(store), |i| {
        let a = runner.model_rdms(store, i, EmbeddingKind::Input, metric, &refs)?;
        let b = runner.model_rdms(store, i, EmbeddingKind::Output, metric, &refs)?;
        a.iter()
            .zip(&b)
            .map(|(x, y)| {
                let c = correlate(x.values(), y.values(), &runner.sampler)?;
                Ok(point(steps[i], c.tau, c.n_pairs))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(subsets
        .iter()
        .enumerate()
        .map(|(s, (name, _))| CorrelationSeries {
            name: name.clone(),
            value_kind: ValueKind::Correlation,
            points: rows.iter().map(|r| r[s].clone()).collect(),
        })
        .collect())
}

/// Pairs whose dissimilarity changed most between an early checkpoint and
/// the final one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub early_step: u64,
    pub final_step: u64,
    pub metric: Metric,
    pub kind: EmbeddingKind,
    pub n_tokens: usize,
    /// Largest decrease in dissimilarity (0 if no pair moved closer).
    pub max_closing: f64,
    /// Largest increase in dissimilarity (0 if no pair moved apart).
    pub max_opening: f64,
    pub closing: Vec<PairDelta>,
    pub opening: Vec<PairDelta>,
}

pub fn qualitative_diff(
    runner: &Runner,
    store: &dyn CheckpointStore,
    early_step: u64,
    subset: &TokenSubset,
    k: usize,
    kind: EmbeddingKind,
    metric: Metric,
) -> Result<DeltaReport> {
    let early = store.index_of_step(early_step).ok_or_else(|| {
        Error::Invalid(format!("step {early_step} is not in the manifest"))
    })?;
    let last = store.final_index();
    let (me, mf) = (store.load(early, kind)?, store.load(last, kind)?);
    let ext = runner
        .compute
        .install(|| top_k_deltas_with(&me, &mf, subset, metric, k, &runner.sweep))?;
    Ok(DeltaReport {
        early_step,
        final_step: store.steps()[last],
        metric,
        kind,
        n_tokens: subset.len(),
        max_closing: ext.closing.first().map_or(0.0, |d| (-d.delta).max(0.0)),
        max_opening: ext.opening.first().map_or(0.0, |d| d.delta.max(0.0)),
        closing: ext.closing,
        opening: ext.opening,
    })
}
