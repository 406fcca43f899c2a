//! Parameter-free anomaly detection for sparse depth points.
//!
//! Every point carries a sensor depth `d`, a relative depth `r` from a
//! monocular model and a normalized image position `p`. Two inconsistency
//! scores are combined:
//!
//! * a global rank score `G` comparing where the point sits in the ordering of
//!   all sensor depths against where it sits in the ordering of all relative
//!   depths, squashed with `tanh`;
//! * a region score `S` averaging, over all other points, the disagreement of
//!   the scale-invariant depth differences `|a - b| / (a + b + eps)`, weighted
//!   by `exp(-alpha * |p_i - p_j|)`.
//!
//! The total score `A = S + G` is thresholded with Otsu's method, blended
//! with a top-k percentile threshold depending on how well the two depth
//! orderings agree overall (Spearman correlation). Frames whose orderings
//! agree strongly are treated as reliable and nothing is flagged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::SparsePointSet;

/// How the final threshold is chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// Spearman-gated blend of the Otsu and percentile thresholds.
    #[default]
    Adaptive,
    /// Plain Otsu threshold, ignoring the correlation gate.
    OtsuOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    /// Smoothing of the rank inconsistency inside `tanh`.
    pub delta: f64,
    /// Spatial decay of the region weight.
    pub alpha: f64,
    /// Division guard for the scale-invariant differences.
    pub epsilon: f64,
    /// Fraction of points used by the top-k threshold.
    pub p: f64,
    /// Sigmoid steepness of the blend weight.
    pub k: f64,
    /// Sigmoid center of the blend weight.
    pub u: f64,
    /// Above this correlation nothing is flagged.
    pub gamma_hi: f64,
    /// At or below this correlation the Otsu threshold is used alone.
    pub gamma_lo: f64,
    pub otsu_bins: usize,
    pub mode: ThresholdMode,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            delta: 0.5,
            alpha: 15.0,
            epsilon: 1e-6,
            p: 0.04,
            k: 40.0,
            u: 0.9,
            gamma_hi: 0.95,
            gamma_lo: 0.85,
            otsu_bins: 256,
            mode: ThresholdMode::Adaptive,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta > 0.0
            && self.alpha >= 0.0
            && self.epsilon > 0.0
            && self.p > 0.0
            && self.p < 1.0
            && self.k > 0.0
            && self.u.is_finite()
            && self.gamma_lo > 0.0
            && self.gamma_lo < self.gamma_hi
            && self.gamma_hi < 1.0
            && self.otsu_bins >= 2;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "detector parameters out of range: {self:?}"
            )))
        }
    }
}

/// Per-point scores, thresholds and the resulting inlier mask.
#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyResult {
    /// Global rank inconsistency, in `[0, 1)`.
    pub g: Vec<f64>,
    /// Region inconsistency, `>= 0`.
    pub s: Vec<f64>,
    /// Total score `s + g`.
    pub a: Vec<f64>,
    pub gamma: f64,
    pub t_otsu: f64,
    pub t_stat: f64,
    pub t: f64,
    /// `true` for kept points (`a <= t`).
    pub inlier: Vec<bool>,
}

impl AnomalyResult {
    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn flagged(&self) -> Vec<bool> {
        self.inlier.iter().map(|&k| !k).collect()
    }

    pub fn flagged_count(&self) -> usize {
        self.inlier.iter().filter(|&&k| !k).count()
    }
}

/// Thresholds derived from a score vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub t_otsu: f64,
    pub t_stat: f64,
    pub t: f64,
}

/// `(1/N) * sum_j sgn(v_i - v_j)` for every `i`, via sorting.
///
/// The sign sum equals `#{v_j < v_i} - #{v_j > v_i}`, an integer, so this is
/// bit-identical to the double loop.
pub fn rank_sign_means(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    values
        .iter()
        .map(|&v| {
            let less = sorted.partition_point(|&x| x < v);
            let not_greater = sorted.partition_point(|&x| x <= v);
            let greater = n - not_greater;
            (less as f64 - greater as f64) / n as f64
        })
        .collect()
}

/// Global rank inconsistency `G` for every point.
pub fn global_rank_scores(pts: &SparsePointSet, cfg: &DetectorConfig) -> Result<Vec<f64>> {
    if pts.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let d: Vec<f64> = pts.iter().map(|p| p.d).collect();
    let r: Vec<f64> = pts.iter().map(|p| p.r).collect();
    let g_abs = rank_sign_means(&d);
    let g_rel = rank_sign_means(&r);
    Ok(g_abs
        .iter()
        .zip(&g_rel)
        .map(|(a, b)| ((a - b).abs() / cfg.delta).tanh())
        .collect())
}

/// Region inconsistency `S` for every point.
///
/// Each row is accumulated with `j` ascending, including the zero diagonal
/// term, so results do not depend on how rows are scheduled.
pub fn region_similarity_scores(pts: &SparsePointSet, cfg: &DetectorConfig) -> Result<Vec<f64>> {
    if pts.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let pts = pts.points();
    let n = pts.len() as f64;
    let eps = cfg.epsilon;
    let alpha = cfg.alpha;
    Ok(pts
        .iter()
        .map(|pi| {
            let mut acc = 0.0;
            for pj in pts {
                let v_abs = (pi.d - pj.d).abs() / (pi.d + pj.d + eps);
                let v_rel = (pi.r - pj.r).abs() / (pi.r + pj.r + eps);
                let dx = pi.p[0] - pj.p[0];
                let dy = pi.p[1] - pj.p[1];
                let w = (-alpha * (dx * dx + dy * dy).sqrt()).exp();
                acc += w * (v_abs - v_rel).abs();
            }
            acc / n
        })
        .collect())
}

/// Average ranks (1-based), ties share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end (0-based) -> ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Spearman correlation of two samples with average-rank ties.
///
/// Fewer than two samples, or two constant samples, give 1. A constant
/// sample paired with a varying one gives 0.
pub fn spearman_corr(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman inputs differ in length");
    if x.len() < 2 {
        return 1.0;
    }
    let rx = average_ranks(x);
    let ry = average_ranks(y);
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    match (sxx > 0.0, syy > 0.0) {
        (false, false) => 1.0,
        (true, true) => (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0),
        _ => 0.0,
    }
}

/// Spearman correlation between sensor and relative depths.
pub fn spearman(pts: &SparsePointSet) -> f64 {
    let d: Vec<f64> = pts.iter().map(|p| p.d).collect();
    let r: Vec<f64> = pts.iter().map(|p| p.r).collect();
    spearman_corr(&d, &r)
}

/// Otsu threshold over a `bins`-bin histogram spanning `[min, max]`.
///
/// Candidate thresholds are the interior bin edges. The between-class
/// variance uses the exact per-bin value sums. Ties keep the lowest edge.
/// Constant input returns that constant.
pub fn otsu_threshold(scores: &[f64], bins: usize) -> f64 {
    assert!(bins >= 2, "otsu needs at least two bins");
    let (lo, hi) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if scores.is_empty() || !(hi > lo) {
        return hi;
    }
    let width = (hi - lo) / bins as f64;
    let mut count = vec![0usize; bins];
    let mut sum = vec![0.0f64; bins];
    for &v in scores {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        count[b] += 1;
        sum[b] += v;
    }
    let total_n = scores.len() as f64;
    let total_s: f64 = sum.iter().sum();

    let mut best = f64::NEG_INFINITY;
    let mut best_edge = 1;
    let (mut n0, mut s0) = (0.0, 0.0);
    for edge in 1..bins {
        n0 += count[edge - 1] as f64;
        s0 += sum[edge - 1];
        let n1 = total_n - n0;
        if n0 == 0.0 || n1 == 0.0 {
            continue;
        }
        let m0 = s0 / n0;
        let m1 = (total_s - s0) / n1;
        let between = n0 * n1 * (m0 - m1) * (m0 - m1);
        if between > best {
            best = between;
            best_edge = edge;
        }
    }
    lo + best_edge as f64 * width
}

/// `m`-th largest score with `m = floor(p * N)`; `+inf` when `m == 0`.
pub fn top_k_threshold(scores: &[f64], p: f64) -> f64 {
    let m = (p * scores.len() as f64).floor() as usize;
    if m == 0 || scores.is_empty() {
        return f64::INFINITY;
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted[m - 1]
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Final threshold as a piecewise function of the correlation `gamma`.
///
/// When the percentile threshold is infinite (too few points for one top-k
/// element) the blend is infinite as well.
pub fn adaptive_threshold(scores: &[f64], gamma: f64, cfg: &DetectorConfig) -> Thresholds {
    let t_otsu = otsu_threshold(scores, cfg.otsu_bins);
    let t_stat = top_k_threshold(scores, cfg.p);
    let t = match cfg.mode {
        ThresholdMode::OtsuOnly => t_otsu,
        ThresholdMode::Adaptive if gamma > cfg.gamma_hi => f64::INFINITY,
        ThresholdMode::Adaptive if gamma > cfg.gamma_lo => {
            let w = sigmoid(cfg.k * (gamma - cfg.u));
            if t_stat.is_infinite() {
                f64::INFINITY
            } else {
                w * t_stat + (1.0 - w) * t_otsu
            }
        }
        ThresholdMode::Adaptive => t_otsu,
    };
    Thresholds { t_otsu, t_stat, t }
}

/// Scores every point and flags those with `A > t`.
pub fn detect(pts: &SparsePointSet, cfg: &DetectorConfig) -> Result<AnomalyResult> {
    cfg.validate()?;
    let g = global_rank_scores(pts, cfg)?;
    let s = region_similarity_scores(pts, cfg)?;
    let a: Vec<f64> = s.iter().zip(&g).map(|(s, g)| s + g).collect();
    let gamma = spearman(pts);
    let Thresholds { t_otsu, t_stat, t } = adaptive_threshold(&a, gamma, cfg);
    let inlier = a.iter().map(|&v| !(v > t)).collect();
    Ok(AnomalyResult {
        g,
        s,
        a,
        gamma,
        t_otsu,
        t_stat,
        t,
        inlier,
    })
}

/// Drops flagged points, preserving order.
pub fn mask_points(pts: &SparsePointSet, result: &AnomalyResult) -> Result<SparsePointSet> {
    pts.retain_mask(&result.inlier)
}
