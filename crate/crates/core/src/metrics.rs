//! Rank transforms, vector dissimilarities and correlation coefficients.
//!
//! All kernels are pure functions over `f64` slices. Inputs are expected to be
//! finite; NaN is rejected wherever ordering matters.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dissimilarity between two embedding vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// `1 - spearman_rho(u, v)`, in `[0, 2]`.
    #[default]
    #[serde(alias = "spearman")]
    SpearmanDistance,
    /// `1 - cos(u, v)`, in `[0, 2]`.
    #[serde(alias = "cosine")]
    CosineDistance,
    #[serde(alias = "euclidean")]
    EuclideanDistance,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::SpearmanDistance => "spearman",
            Metric::CosineDistance => "cosine",
            Metric::EuclideanDistance => "euclidean",
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spearman" | "spearman_distance" => Ok(Metric::SpearmanDistance),
            "cosine" | "cosine_distance" => Ok(Metric::CosineDistance),
            "euclidean" | "euclidean_distance" => Ok(Metric::EuclideanDistance),
            other => Err(Error::Invalid(format!("unknown metric {other:?}"))),
        }
    }
}

/// 1-based ranks with ties sharing the mean of their positions.
#[derive(Debug, Clone, PartialEq)]
pub struct RankVector(Vec<f64>);

impl RankVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn check_finite(v: &[f64], what: &str) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(i) => Err(Error::Invalid(format!("{what} has a non-finite value at {i}"))),
        None => Ok(()),
    }
}

pub fn rank_transform(v: &[f64]) -> Result<RankVector> {
    if v.len() < 2 {
        return Err(Error::Insufficient(format!(
            "rank transform needs at least 2 values, got {}",
            v.len()
        )));
    }
    check_finite(v, "rank input")?;
    let mut ranks = vec![0.0; v.len()];
    rank_into(v, &mut ranks, &mut Vec::with_capacity(v.len()));
    Ok(RankVector(ranks))
}

/// Averaged 1-based ranks of finite `v`, written into `out`. `scratch` is
/// reused across calls to avoid reallocating the index buffer.
pub(crate) fn rank_into(v: &[f64], out: &mut [f64], scratch: &mut Vec<usize>) {
    scratch.clear();
    scratch.extend(0..v.len());
    scratch.sort_unstable_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(Ordering::Equal));
    let mut start = 0;
    while start < scratch.len() {
        let mut end = start + 1;
        while end < scratch.len() && v[scratch[end]] == v[scratch[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let rank = (start + 1 + end) as f64 / 2.0;
        for &idx in &scratch[start..end] {
            out[idx] = rank;
        }
        start = end;
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "length mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::Insufficient(format!(
            "need at least 2 observations, got {}",
            x.len()
        )));
    }
    check_finite(x, "x")?;
    check_finite(y, "y")
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation(
            "pearson correlation of a constant vector".into(),
        ));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let rx = rank_transform(x)?;
    let ry = rank_transform(y)?;
    pearson_r(rx.as_slice(), ry.as_slice())
}

pub fn vector_dissimilarity(u: &[f64], v: &[f64], metric: Metric) -> Result<f64> {
    check_pair(u, v)?;
    match metric {
        Metric::SpearmanDistance => match spearman_rho(u, v) {
            Ok(rho) => Ok(1.0 - rho),
            Err(Error::UndefinedCorrelation(_)) => Err(Error::Degenerate(
                "spearman distance of a constant vector".into(),
            )),
            Err(e) => Err(e),
        },
        Metric::CosineDistance => {
            let (mut uv, mut uu, mut vv) = (0.0, 0.0, 0.0);
            for (a, b) in u.iter().zip(v) {
                uv += a * b;
                uu += a * a;
                vv += b * b;
            }
            if uu == 0.0 || vv == 0.0 {
                return Err(Error::Degenerate("cosine distance of a zero vector".into()));
            }
            Ok((1.0 - uv / (uu * vv).sqrt()).clamp(0.0, 2.0))
        }
        Metric::EuclideanDistance => Ok(u
            .iter()
            .zip(v)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()),
    }
}

fn pairs_of_ties(group: u64) -> u64 {
    group * group.saturating_sub(1) / 2
}

/// Sum of `t(t-1)/2` over runs of equal adjacent values.
fn tied_pairs<T: PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += pairs_of_ties(run);
            run = 1;
        }
    }
    total + pairs_of_ties(run)
}

/// Bottom-up merge sort of `v`, returning the number of strict inversions.
fn sort_counting_inversions(v: &mut Vec<f64>) -> u64 {
    let n = v.len();
    let mut buf = vec![0.0; n];
    let mut swaps = 0u64;
    let mut width = 1;
    while width < n {
        let mut lo = 0;
        while lo < n {
            let mid = (lo + width).min(n);
            let hi = (lo + 2 * width).min(n);
            let (mut i, mut j, mut k) = (lo, mid, lo);
            while i < mid && j < hi {
                if v[i] > v[j] {
                    buf[k] = v[j];
                    swaps += (mid - i) as u64;
                    j += 1;
                } else {
                    buf[k] = v[i];
                    i += 1;
                }
                k += 1;
            }
            buf[k..k + (mid - i)].copy_from_slice(&v[i..mid]);
            k += mid - i;
            buf[k..k + (hi - j)].copy_from_slice(&v[j..hi]);
            lo = hi;
        }
        std::mem::swap(v, &mut buf);
        width *= 2;
    }
    swaps
}

const PAR_SORT_MIN: usize = 1 << 16;

/// Kendall's tau-b in `O(n log n)` (Knight's merge-sort algorithm).
///
/// `tau_b = (C - D) / sqrt((T - T_x) (T - T_y))` with `T = n(n-1)/2` and
/// `T_x`, `T_y` the tied pairs in each argument. Undefined, and reported as an
/// error, when either argument is constant.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as u64;
    // +0.0 folds -0.0 into 0.0 so that equal values sort adjacently
    let mut pairs: Vec<(f64, f64)> = x.iter().zip(y).map(|(a, b)| (a + 0.0, b + 0.0)).collect();
    let by_xy = |a: &(f64, f64), b: &(f64, f64)| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1));
    if pairs.len() >= PAR_SORT_MIN {
        pairs.par_sort_unstable_by(by_xy);
    } else {
        pairs.sort_unstable_by(by_xy);
    }

    let total = n * (n - 1) / 2;
    let mut x_ties = 0;
    let mut joint_ties = 0;
    let mut x_run = 1u64;
    let mut xy_run = 1u64;
    for w in pairs.windows(2) {
        if w[0].0 == w[1].0 {
            x_run += 1;
            if w[0].1 == w[1].1 {
                xy_run += 1;
            } else {
                joint_ties += pairs_of_ties(xy_run);
                xy_run = 1;
            }
        } else {
            x_ties += pairs_of_ties(x_run);
            joint_ties += pairs_of_ties(xy_run);
            x_run = 1;
            xy_run = 1;
        }
    }
    x_ties += pairs_of_ties(x_run);
    joint_ties += pairs_of_ties(xy_run);

    let mut ys: Vec<f64> = pairs.into_iter().map(|p| p.1).collect();
    let swaps = sort_counting_inversions(&mut ys);
    let y_ties = tied_pairs(&ys);

    let a = total - x_ties;
    let b = total - y_ties;
    if a == 0 || b == 0 {
        return Err(Error::UndefinedCorrelation(
            "kendall tau of a constant vector".into(),
        ));
    }
    let numerator = total as i128 - x_ties as i128 - y_ties as i128 + joint_ties as i128
        - 2 * swaps as i128;
    let denom = if a == b {
        a as f64
    } else {
        (a as f64).sqrt() * (b as f64).sqrt()
    };
    Ok((numerator as f64 / denom).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::SplitMix64;

    /// For each i: 1 + #less + (#equal - 1) / 2.
    fn rank_oracle(v: &[f64]) -> Vec<f64> {
        v.iter()
            .map(|a| {
                let less = v.iter().filter(|b| *b < a).count() as f64;
                let equal = v.iter().filter(|b| *b == a).count() as f64;
                1.0 + less + (equal - 1.0) / 2.0
            })
            .collect()
    }

    fn tau_b_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let (mut c, mut d, mut tx, mut ty) = (0i64, 0i64, 0i64, 0i64);
        for i in 0..n {
            for j in i + 1..n {
                let dx = x[i] - x[j];
                let dy = y[i] - y[j];
                if dx == 0.0 && dy == 0.0 {
                    tx += 1;
                    ty += 1;
                } else if dx == 0.0 {
                    tx += 1;
                } else if dy == 0.0 {
                    ty += 1;
                } else if (dx > 0.0) == (dy > 0.0) {
                    c += 1;
                } else {
                    d += 1;
                }
            }
        }
        let t = (n * (n - 1) / 2) as f64;
        (c - d) as f64 / ((t - tx as f64) * (t - ty as f64)).sqrt()
    }

    fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let sx: f64 = x.iter().sum();
        let sy: f64 = y.iter().sum();
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
    }

    fn tied_vector(rng: &mut SplitMix64, n: usize, levels: u32) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(0..levels) as f64).collect()
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank_transform(&[10.0, 30.0, 20.0]).unwrap().as_slice(), &[1.0, 3.0, 2.0]);
        assert_eq!(rank_transform(&[5.0, 5.0, 1.0]).unwrap().as_slice(), &[2.5, 2.5, 1.0]);
        assert!(rank_transform(&[1.0]).is_err());
    }

    #[test]
    fn rank_matches_counting_oracle() {
        let mut rng = SplitMix64::seed_from_u64(11);
        let v = tied_vector(&mut rng, 1000, 300);
        assert_eq!(rank_transform(&v).unwrap().as_slice(), rank_oracle(&v).as_slice());
        let w: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
        assert_eq!(rank_transform(&w).unwrap().as_slice(), rank_oracle(&w).as_slice());
    }

    #[test]
    fn dissimilarity_identity_and_reversal() {
        let u = [0.3, -1.2, 4.0, 2.2, 0.0];
        for m in [Metric::SpearmanDistance, Metric::CosineDistance, Metric::EuclideanDistance] {
            assert_eq!(vector_dissimilarity(&u, &u, m).unwrap(), 0.0, "{m}");
        }
        let ranks = rank_transform(&u).unwrap().into_inner();
        let rev: Vec<f64> = ranks.iter().map(|r| 6.0 - r).collect();
        assert_eq!(
            vector_dissimilarity(&u, &rev, Metric::SpearmanDistance).unwrap(),
            2.0
        );
    }

    #[test]
    fn dissimilarity_degenerate_inputs() {
        let c = [1.0, 1.0, 1.0];
        let u = [1.0, 2.0, 3.0];
        assert!(matches!(
            vector_dissimilarity(&c, &u, Metric::SpearmanDistance),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(
            vector_dissimilarity(&[0.0; 3], &u, Metric::CosineDistance),
            Err(Error::Degenerate(_))
        ));
        assert!(vector_dissimilarity(&[0.0; 3], &u, Metric::EuclideanDistance).is_ok());
    }

    #[test]
    fn spearman_distance_matches_composed_oracle() {
        let mut rng = SplitMix64::seed_from_u64(5);
        for _ in 0..20 {
            let u: Vec<f64> = (0..64).map(|_| rng.random::<f64>() - 0.5).collect();
            let v: Vec<f64> = (0..64).map(|_| rng.random::<f64>() - 0.5).collect();
            let expected = 1.0 - pearson_oracle(&rank_oracle(&u), &rank_oracle(&v));
            let got = vector_dissimilarity(&u, &v, Metric::SpearmanDistance).unwrap();
            assert!((got - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn correlation_examples() {
        assert_eq!(pearson_r(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap(), 1.0);
        assert_eq!(spearman_rho(&[1.0, 2.0, 3.0], &[1.0, 4.0, 9.0]).unwrap(), 1.0);
        assert!(matches!(
            pearson_r(&[1.0, 1.0], &[1.0, 2.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
    }

    #[test]
    fn correlations_match_textbook_formulas() {
        let mut rng = SplitMix64::seed_from_u64(17);
        let x: Vec<f64> = (0..500).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|a| a * 0.3 + rng.random::<f64>()).collect();
        assert!((pearson_r(&x, &y).unwrap() - pearson_oracle(&x, &y)).abs() < 1e-12);
        let (rx, ry) = (rank_oracle(&x), rank_oracle(&y));
        // no ties: rho = 1 - 6 sum d^2 / (n (n^2 - 1))
        let n = 500.0;
        let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
        let textbook = 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
        assert!((spearman_rho(&x, &y).unwrap() - textbook).abs() < 1e-12);
    }

    #[test]
    fn tau_examples() {
        let x: Vec<f64> = (0..100).map(f64::from).collect();
        let y: Vec<f64> = x.iter().rev().copied().collect();
        assert_eq!(kendall_tau_b(&x, &x).unwrap(), 1.0);
        assert_eq!(kendall_tau_b(&x, &y).unwrap(), -1.0);
        assert!(matches!(
            kendall_tau_b(&[2.0; 5], &[3.0; 5]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(kendall_tau_b(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn tau_matches_pair_counting_with_ties() {
        let mut rng = SplitMix64::seed_from_u64(2024);
        let n = 2000;
        // ~30% of entries repeat an earlier value
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            if i > 0 && rng.random_bool(0.3) {
                x.push(x[rng.random_range(0..i)]);
                y.push(y[rng.random_range(0..i)]);
            } else {
                x.push(rng.random::<f64>());
                y.push(rng.random::<f64>() + 0.5 * x[i]);
            }
        }
        let got = kendall_tau_b(&x, &y).unwrap();
        assert!((got - tau_b_oracle(&x, &y)).abs() < 1e-12);
    }

    #[test]
    fn tau_handles_negative_zero() {
        let x = [-0.0, 0.0, 1.0, 2.0];
        let y = [5.0, 1.0, 2.0, 3.0];
        assert!((kendall_tau_b(&x, &y).unwrap() - tau_b_oracle(&x, &y)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn tau_equals_oracle(
            pairs in proptest::collection::vec((0u8..6, 0u8..6), 2..80)
        ) {
            let x: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
            let y: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
            match kendall_tau_b(&x, &y) {
                Ok(t) => prop_assert!((t - tau_b_oracle(&x, &y)).abs() < 1e-12),
                Err(_) => {
                    let cx = x.iter().all(|v| *v == x[0]);
                    let cy = y.iter().all(|v| *v == y[0]);
                    prop_assert!(cx || cy);
                }
            }
        }

        #[test]
        fn tau_invariant_under_increasing_maps(
            v in proptest::collection::vec((-50i32..50, -50i32..50), 3..60)
        ) {
            let x: Vec<f64> = v.iter().map(|p| f64::from(p.0)).collect();
            let y: Vec<f64> = v.iter().map(|p| f64::from(p.1)).collect();
            let fx: Vec<f64> = x.iter().map(|a| a.powi(3) + 7.0).collect();
            let gy: Vec<f64> = y.iter().map(|b| (b / 10.0).exp()).collect();
            if let (Ok(a), Ok(b)) = (kendall_tau_b(&x, &y), kendall_tau_b(&fx, &gy)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn dissimilarity_is_symmetric(
            v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2..40)
        ) {
            let u: Vec<f64> = v.iter().map(|p| p.0).collect();
            let w: Vec<f64> = v.iter().map(|p| p.1).collect();
            for m in [Metric::SpearmanDistance, Metric::CosineDistance, Metric::EuclideanDistance] {
                if let Ok(d) = vector_dissimilarity(&u, &w, m) {
                    prop_assert_eq!(d, vector_dissimilarity(&w, &u, m).unwrap());
                    if m != Metric::EuclideanDistance {
                        prop_assert!((0.0..=2.0).contains(&d));
                    }
                }
            }
        }

        #[test]
        fn spearman_distance_ignores_monotone_maps(
            v in proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 3..40)
        ) {
            let u: Vec<f64> = v.iter().map(|p| p.0).collect();
            let w: Vec<f64> = v.iter().map(|p| p.1).collect();
            let fu: Vec<f64> = u.iter().map(|a| a.exp() * 3.0 - 1.0).collect();
            if let Ok(d) = vector_dissimilarity(&u, &w, Metric::SpearmanDistance) {
                let d2 = vector_dissimilarity(&fu, &w, Metric::SpearmanDistance).unwrap();
                prop_assert!((d - d2).abs() < 1e-12);
            }
        }

        #[test]
        fn rank_sum_is_triangular(v in proptest::collection::vec(0u8..10, 2..200)) {
            let x: Vec<f64> = v.iter().map(|a| f64::from(*a)).collect();
            let n = x.len() as f64;
            let s: f64 = rank_transform(&x).unwrap().as_slice().iter().sum();
            prop_assert!((s - n * (n + 1.0) / 2.0).abs() < 1e-9);
        }
    }
}
