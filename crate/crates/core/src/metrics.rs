//! Dense depth evaluation and detector scoring.
//!
//! EWMAE here weights each pixel by `1 + g / mean(g)`, with `g` the
//! central-difference gradient magnitude of the ground truth. Numbers are
//! comparable only with other results computed by this module.

use crate::error::{Error, Result};
use crate::sim::PointLabel;
use crate::types::DenseDepthMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    All,
    Mask,
    Complement,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::All => "all",
            Region::Mask => "mask",
            Region::Complement => "complement",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub rel: f64,
    pub rmse: f64,
    pub mae: f64,
    pub log10: f64,
    pub ewmae: f64,
    pub n_pixels: usize,
    pub region: Region,
}

/// Pixels evaluated: valid ground truth inside the optional mask.
fn eval_set(pred: &DenseDepthMap, gt: &DenseDepthMap, mask: Option<&[bool]>) -> Result<Vec<usize>> {
    if (pred.height(), pred.width()) != (gt.height(), gt.width()) {
        return Err(Error::InvalidInput(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    if let Some(m) = mask {
        if m.len() != gt.values().len() {
            return Err(Error::LengthMismatch {
                expected: gt.values().len(),
                actual: m.len(),
            });
        }
    }
    let idx: Vec<usize> = (0..gt.values().len())
        .filter(|&i| gt.valid()[i] && mask.is_none_or(|m| m[i]))
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let w = gt.width();
    for &i in &idx {
        let y = pred.values()[i];
        if !pred.valid()[i] || !(y > 0.0) {
            return Err(Error::NonPositiveDepth {
                which: "predicted",
                value: y as f64,
                row: i / w,
                col: i % w,
            });
        }
    }
    Ok(idx)
}

/// Gradient magnitude of the ground truth by central differences with
/// replicated borders. Invalid neighbors are replaced by the center value.
pub fn gradient_magnitude(gt: &DenseDepthMap) -> Vec<f64> {
    let (h, w) = (gt.height(), gt.width());
    let v = gt.values();
    let ok = gt.valid();
    let at = |r: usize, c: usize, center: f64| {
        let i = r * w + c;
        if ok[i] {
            v[i] as f64
        } else {
            center
        }
    };
    let mut g = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let center = v[r * w + c] as f64;
            let gx = (at(r, (c + 1).min(w - 1), center) - at(r, c.saturating_sub(1), center)) / 2.0;
            let gy = (at((r + 1).min(h - 1), c, center) - at(r.saturating_sub(1), c, center)) / 2.0;
            g[r * w + c] = (gx * gx + gy * gy).sqrt();
        }
    }
    g
}

fn ewmae_over(pred: &DenseDepthMap, gt: &DenseDepthMap, idx: &[usize]) -> f64 {
    let g = gradient_magnitude(gt);
    let mean_g = idx.iter().map(|&i| g[i]).sum::<f64>() / idx.len() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for &i in idx {
        let w = if mean_g > 0.0 { 1.0 + g[i] / mean_g } else { 1.0 };
        num += w * (pred.values()[i] as f64 - gt.values()[i] as f64).abs();
        den += w;
    }
    num / den
}

/// Edge-weighted mean absolute error.
pub fn ewmae(pred: &DenseDepthMap, gt: &DenseDepthMap, mask: Option<&[bool]>) -> Result<f64> {
    let idx = eval_set(pred, gt, mask)?;
    Ok(ewmae_over(pred, gt, &idx))
}

pub fn evaluate(pred: &DenseDepthMap, gt: &DenseDepthMap, mask: Option<&[bool]>) -> Result<EvalReport> {
    evaluate_region(pred, gt, mask, if mask.is_some() { Region::Mask } else { Region::All })
}

/// Evaluates on the complement of `mask` (within valid ground truth).
pub fn evaluate_complement(
    pred: &DenseDepthMap,
    gt: &DenseDepthMap,
    mask: &[bool],
) -> Result<EvalReport> {
    let inv: Vec<bool> = mask.iter().map(|&m| !m).collect();
    evaluate_region(pred, gt, Some(&inv), Region::Complement)
}

fn evaluate_region(
    pred: &DenseDepthMap,
    gt: &DenseDepthMap,
    mask: Option<&[bool]>,
    region: Region,
) -> Result<EvalReport> {
    let idx = eval_set(pred, gt, mask)?;
    let n = idx.len() as f64;
    let thresholds = [1.25f64, 1.25 * 1.25, 1.25 * 1.25 * 1.25];
    let mut hits = [0usize; 3];
    let (mut rel, mut sq, mut abs, mut lg) = (0.0, 0.0, 0.0, 0.0);
    for &i in &idx {
        let y = pred.values()[i] as f64;
        let t = gt.values()[i] as f64;
        let ratio = (y / t).max(t / y);
        for (h, th) in hits.iter_mut().zip(&thresholds) {
            if ratio < *th {
                *h += 1;
            }
        }
        let e = y - t;
        rel += e.abs() / t;
        sq += e * e;
        abs += e.abs();
        lg += (y.log10() - t.log10()).abs();
    }
    Ok(EvalReport {
        delta1: hits[0] as f64 / n,
        delta2: hits[1] as f64 / n,
        delta3: hits[2] as f64 / n,
        rel: rel / n,
        rmse: (sq / n).sqrt(),
        mae: abs / n,
        log10: lg / n,
        ewmae: ewmae_over(pred, gt, &idx),
        n_pixels: idx.len(),
        region,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 of flagged points against simulator labels.
/// Only `error` labels count as positives.
pub fn detector_prf(flagged: &[bool], labels: &[PointLabel]) -> Result<Prf> {
    if flagged.len() != labels.len() {
        return Err(Error::LengthMismatch {
            expected: labels.len(),
            actual: flagged.len(),
        });
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&f, &l) in flagged.iter().zip(labels) {
        let pos = l == PointLabel::Error;
        match (f, pos) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 {
        1.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fneg == 0 {
        1.0
    } else {
        tp as f64 / (tp + fneg) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(Prf {
        precision,
        recall,
        f1,
    })
}
