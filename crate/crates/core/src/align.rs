//! Affine alignment of relative depth to sparse metric points, and dense
//! completion from the fitted map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{normalize_coords, DenseDepthMap, RelativeDepthMap, SensorSpec, SparsePointSet};

const HUBER_ROUNDS: usize = 5;
const HUBER_K: f64 = 1.345;
const NEIGHBORS: usize = 8;

/// Space in which the affine map is fitted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitDomain {
    /// `d ~ a * r + b` with `r` depth-like.
    Depth,
    /// `1/d ~ a * v + b` with `v` inverse-oriented.
    #[default]
    InverseDepth,
}

impl FitDomain {
    fn x_at(self, rel: &RelativeDepthMap, row: usize, col: usize) -> f64 {
        match self {
            FitDomain::Depth => rel.depth_like(row, col),
            FitDomain::InverseDepth => rel.inverse_like(row, col),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FitDomain::Depth => "depth",
            FitDomain::InverseDepth => "inverse_depth",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AffineFit {
    pub a: f64,
    pub b: f64,
    pub domain: FitDomain,
    /// Depth residual RMSE over the support points, meters.
    pub rmse_fit: f64,
    pub support: usize,
}

impl AffineFit {
    /// Fitted value in the fit domain.
    pub fn apply(&self, x: f64) -> f64 {
        self.a * x + self.b
    }

    /// Metric depth for a domain value; `None` when the inverse-depth model
    /// is not positive.
    pub fn depth(&self, x: f64) -> Option<f64> {
        let y = self.apply(x);
        match self.domain {
            FitDomain::Depth => Some(y),
            FitDomain::InverseDepth => (y > 0.0).then(|| 1.0 / y),
        }
    }
}

/// Weighted least squares line through `(x, y)`.
fn weighted_line(x: &[f64], y: &[f64], w: &[f64]) -> Result<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    let mx = x.iter().zip(w).map(|(x, w)| w * x).sum::<f64>() / sw;
    let my = y.iter().zip(w).map(|(y, w)| w * y).sum::<f64>() / sw;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for ((xi, yi), wi) in x.iter().zip(y).zip(w) {
        sxx += wi * (xi - mx) * (xi - mx);
        sxy += wi * (xi - mx) * (yi - my);
    }
    if !(sxx > 0.0) {
        return Err(Error::RankDeficient {
            count: x.len(),
            value: x[0],
        });
    }
    let a = sxy / sxx;
    Ok((a, my - a * mx))
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Fits `y = a x + b` between relative values and sensor depths.
///
/// With `robust`, five rounds of Huber reweighting follow the ordinary
/// fit, with the Huber threshold at 1.345 times the residual MAD.
pub fn fit_affine(
    pts: &SparsePointSet,
    rel: &RelativeDepthMap,
    domain: FitDomain,
    robust: bool,
) -> Result<AffineFit> {
    if pts.len() < 2 {
        return Err(Error::InsufficientPoints {
            needed: 2,
            got: pts.len(),
        });
    }
    let mut x = Vec::with_capacity(pts.len());
    let mut y = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        if p.row >= rel.height() || p.col >= rel.width() {
            return Err(Error::OutOfBounds {
                index: i,
                row: p.row,
                col: p.col,
                height: rel.height(),
                width: rel.width(),
            });
        }
        let xi = domain.x_at(rel, p.row, p.col);
        if !xi.is_finite() {
            return Err(Error::InvalidInput(format!(
                "relative value at ({}, {}) is not finite",
                p.row, p.col
            )));
        }
        x.push(xi);
        y.push(match domain {
            FitDomain::Depth => p.d,
            FitDomain::InverseDepth => 1.0 / p.d,
        });
    }
    if x.iter().all(|&v| v == x[0]) {
        return Err(Error::RankDeficient {
            count: x.len(),
            value: x[0],
        });
    }

    let mut w = vec![1.0; x.len()];
    let (mut a, mut b) = weighted_line(&x, &y, &w)?;
    if robust {
        for _ in 0..HUBER_ROUNDS {
            let res: Vec<f64> = x.iter().zip(&y).map(|(xi, yi)| yi - (a * xi + b)).collect();
            let med = median(&mut res.clone());
            let mad = median(&mut res.iter().map(|r| (r - med).abs()).collect::<Vec<_>>());
            if !(mad > 0.0) {
                break;
            }
            let c = HUBER_K * mad;
            for (wi, r) in w.iter_mut().zip(&res) {
                *wi = if r.abs() <= c { 1.0 } else { c / r.abs() };
            }
            (a, b) = weighted_line(&x, &y, &w)?;
        }
    }

    let mut fit = AffineFit {
        a,
        b,
        domain,
        rmse_fit: 0.0,
        support: x.len(),
    };
    let sq: f64 = x
        .iter()
        .zip(pts.iter())
        .map(|(&xi, p)| {
            // A non-positive inverse prediction means "infinitely far".
            let pred = fit.depth(xi).unwrap_or(f64::INFINITY);
            (pred - p.d).powi(2)
        })
        .sum();
    fit.rmse_fit = (sq / x.len() as f64).sqrt();
    Ok(fit)
}

fn clamp_depth(fit: &AffineFit, x: f64, spec: &SensorSpec) -> f64 {
    fit.depth(x)
        .unwrap_or(spec.d_max)
        .clamp(spec.d_min, spec.d_max)
}

/// Dense metric depth from the global fit, clamped to the sensor range.
pub fn complete(rel: &RelativeDepthMap, fit: &AffineFit, spec: &SensorSpec) -> DenseDepthMap {
    let (h, w) = (rel.height(), rel.width());
    let values = (0..h * w)
        .map(|i| clamp_depth(fit, fit.domain.x_at(rel, i / w, i % w), spec) as f32)
        .collect();
    DenseDepthMap::from_values(h, w, values).expect("clamped depths are positive")
}

/// Uniform bucket grid over normalized coordinates for k-nearest queries.
struct PointGrid {
    cells: usize,
    buckets: Vec<Vec<usize>>,
    coords: Vec<[f64; 2]>,
}

impl PointGrid {
    fn new(coords: Vec<[f64; 2]>) -> Self {
        let cells = ((coords.len() as f64 / 2.0).sqrt().ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); cells * cells];
        for (i, p) in coords.iter().enumerate() {
            let (bx, by) = Self::bucket_of(cells, *p);
            buckets[by * cells + bx].push(i);
        }
        Self {
            cells,
            buckets,
            coords,
        }
    }

    fn bucket_of(cells: usize, p: [f64; 2]) -> (usize, usize) {
        let f = |v: f64| ((v * cells as f64) as usize).min(cells - 1);
        (f(p[0]), f(p[1]))
    }

    /// The `k` nearest points as `(distance, index)`, nearest first, ties by
    /// index.
    fn nearest(&self, q: [f64; 2], k: usize, out: &mut Vec<(f64, usize)>) {
        out.clear();
        let n = self.cells as isize;
        let (qx, qy) = Self::bucket_of(self.cells, q);
        let (qx, qy) = (qx as isize, qy as isize);
        let cell_size = 1.0 / self.cells as f64;
        let mut ring = 0isize;
        loop {
            for by in (qy - ring)..=(qy + ring) {
                for bx in (qx - ring)..=(qx + ring) {
                    let on_ring = (by - qy).abs() == ring || (bx - qx).abs() == ring;
                    if !on_ring || bx < 0 || by < 0 || bx >= n || by >= n {
                        continue;
                    }
                    for &i in &self.buckets[(by * n + bx) as usize] {
                        let p = self.coords[i];
                        let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                        out.push((d, i));
                    }
                }
            }
            out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            out.truncate(k);
            let covered = ring >= n;
            // Anything beyond this ring is at least `ring * cell_size` away.
            if covered || (out.len() == k && out[k - 1].0 <= ring as f64 * cell_size) {
                return;
            }
            ring += 1;
        }
    }
}

/// Global fit plus an interpolated field of per-point residuals.
///
/// The residual field uses inverse-square-distance weights over the eight
/// nearest points in normalized coordinates, reproduces a point's residual
/// exactly on its own pixel, and fades with `1 / (1 + (d_nn / h)^2)` where
/// `d_nn` is the distance to the nearest point and `h = 1 / sqrt(N)` is the
/// mean point spacing. Far from all points the output tends to the global
/// fit.
pub fn complete_with_residuals(
    rel: &RelativeDepthMap,
    fit: &AffineFit,
    pts: &SparsePointSet,
    spec: &SensorSpec,
) -> Result<DenseDepthMap> {
    if pts.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let (h, w) = (rel.height(), rel.width());
    let base = complete(rel, fit, spec);
    let mut coords = Vec::with_capacity(pts.len());
    let mut residuals = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        if p.row >= h || p.col >= w {
            return Err(Error::OutOfBounds {
                index: i,
                row: p.row,
                col: p.col,
                height: h,
                width: w,
            });
        }
        coords.push(normalize_coords(p.row, p.col, h, w));
        residuals.push(p.d - base.values()[p.row * w + p.col] as f64);
    }
    let spacing = 1.0 / (pts.len() as f64).sqrt();
    let grid = PointGrid::new(coords);
    let k = NEIGHBORS.min(pts.len());

    let mut values = Vec::with_capacity(h * w);
    let mut nn = Vec::with_capacity(4 * k);
    for row in 0..h {
        for col in 0..w {
            let q = normalize_coords(row, col, h, w);
            grid.nearest(q, k, &mut nn);
            let correction = if nn[0].0 == 0.0 {
                residuals[nn[0].1]
            } else {
                let (mut num, mut den) = (0.0, 0.0);
                for &(d, i) in nn.iter() {
                    let wt = 1.0 / (d * d);
                    num += wt * residuals[i];
                    den += wt;
                }
                let fade = 1.0 / (1.0 + (nn[0].0 / spacing).powi(2));
                fade * num / den
            };
            let v = base.values()[row * w + col] as f64 + correction;
            values.push(v.clamp(spec.d_min, spec.d_max) as f32);
        }
    }
    DenseDepthMap::from_values(h, w, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{pair_points, Orientation};

    fn line_rel(h: usize, w: usize) -> RelativeDepthMap {
        let values = (0..h * w).map(|i| 0.5 + (i % w) as f32 * 0.25 + (i / w) as f32).collect();
        RelativeDepthMap::new(h, w, values, Orientation::DepthLike).unwrap()
    }

    fn points_with(rel: &RelativeDepthMap, f: impl Fn(f64) -> f64, every: usize) -> SparsePointSet {
        let w = rel.width();
        let samples = (0..rel.height() * w)
            .step_by(every)
            .map(|i| (i / w, i % w, f(rel.raw(i / w, i % w))));
        pair_points(
            &SparsePointSet::from_depths(samples, rel.height(), w).unwrap(),
            rel,
        )
        .unwrap()
    }

    #[test]
    fn identity_fit() {
        let rel = line_rel(4, 4);
        let pts = points_with(&rel, |r| r, 1);
        let fit = fit_affine(&pts, &rel, FitDomain::Depth, false).unwrap();
        assert!((fit.a - 1.0).abs() < 1e-12 && fit.b.abs() < 1e-12);
        assert!(fit.rmse_fit < 1e-12);
        assert_eq!(fit.support, 16);
    }

    #[test]
    fn recovers_known_line() {
        let rel = line_rel(2, 5);
        let pts = points_with(&rel, |r| 2.0 * r + 0.5, 1);
        assert_eq!(pts.len(), 10);
        let fit = fit_affine(&pts, &rel, FitDomain::Depth, false).unwrap();
        assert!((fit.a - 2.0).abs() < 1e-9);
        assert!((fit.b - 0.5).abs() < 1e-9);
    }

    #[test]
    fn inverse_domain_fit() {
        let values = (0..12).map(|i| 0.2 + i as f32 * 0.1).collect();
        let rel = RelativeDepthMap::new(3, 4, values, Orientation::Inverse).unwrap();
        let samples = (0..12).map(|i| (i / 4, i % 4, 1.0 / (3.0 * rel.raw(i / 4, i % 4) + 0.1)));
        let pts = SparsePointSet::from_depths(samples, 3, 4).unwrap();
        let fit = fit_affine(&pts, &rel, FitDomain::InverseDepth, false).unwrap();
        assert!((fit.a - 3.0).abs() < 1e-6 && (fit.b - 0.1).abs() < 1e-6);
    }

    #[test]
    fn fit_errors() {
        let rel = line_rel(2, 2);
        let one = points_with(&rel, |r| r, 4);
        assert!(matches!(
            fit_affine(&one, &rel, FitDomain::Depth, false),
            Err(Error::InsufficientPoints { needed: 2, got: 1 })
        ));
        let flat = RelativeDepthMap::new(2, 2, vec![1.0; 4], Orientation::DepthLike).unwrap();
        let pts = SparsePointSet::from_depths([(0, 0, 1.0), (1, 1, 2.0)], 2, 2).unwrap();
        assert!(matches!(
            fit_affine(&pts, &flat, FitDomain::Depth, false),
            Err(Error::RankDeficient { .. })
        ));
    }

    #[test]
    fn normal_equations_hold() {
        let rel = line_rel(5, 5);
        let pts = points_with(&rel, |r| 1.3 * r + 0.2 + 0.05 * (r * 7.0).sin(), 1);
        let fit = fit_affine(&pts, &rel, FitDomain::Depth, false).unwrap();
        let (mut ga, mut gb) = (0.0, 0.0);
        for p in pts.iter() {
            let e = fit.a * p.r + fit.b - p.d;
            ga += e * p.r;
            gb += e;
        }
        assert!(ga.abs() < 1e-9 && gb.abs() < 1e-9, "{ga} {gb}");
    }

    #[test]
    fn complete_cases() {
        let spec = SensorSpec::default();
        let rel = line_rel(3, 3);
        let fit = AffineFit {
            a: 1.0,
            b: 0.0,
            domain: FitDomain::Depth,
            rmse_fit: 0.0,
            support: 2,
        };
        let out = complete(&rel, &fit, &spec);
        for (o, r) in out.values().iter().zip(rel.values()) {
            assert_eq!(*o, r.clamp(spec.d_min as f32, spec.d_max as f32));
        }

        let inv = RelativeDepthMap::new(2, 2, vec![0.5; 4], Orientation::Inverse).unwrap();
        let fit = AffineFit {
            domain: FitDomain::InverseDepth,
            ..fit
        };
        assert!(complete(&inv, &fit, &spec).values().iter().all(|&v| v == 2.0));

        let far = RelativeDepthMap::new(1, 1, vec![25.0], Orientation::DepthLike).unwrap();
        let fit = AffineFit {
            domain: FitDomain::Depth,
            ..fit
        };
        assert_eq!(complete(&far, &fit, &spec).values(), &[10.0]);
    }

    #[test]
    fn residuals_zero_matches_global() {
        let spec = SensorSpec::default();
        let rel = line_rel(12, 16);
        let pts = points_with(&rel, |r| 0.5 * r + 0.2, 7);
        let fit = fit_affine(&pts, &rel, FitDomain::Depth, false).unwrap();
        let base = complete(&rel, &fit, &spec);
        let res = complete_with_residuals(&rel, &fit, &pts, &spec).unwrap();
        for (a, b) in base.values().iter().zip(res.values()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn single_residual_decays() {
        let spec = SensorSpec::default();
        let rel = RelativeDepthMap::new(1, 64, vec![2.0; 64], Orientation::DepthLike).unwrap();
        let fit = AffineFit {
            a: 1.0,
            b: 0.0,
            domain: FitDomain::Depth,
            rmse_fit: 0.0,
            support: 2,
        };
        let pts = SparsePointSet::from_depths([(0, 10, 2.5)], 1, 64).unwrap();
        let out = complete_with_residuals(&rel, &fit, &pts, &spec).unwrap();
        let corr: Vec<f64> = out.values().iter().map(|&v| v as f64 - 2.0).collect();
        assert!((corr[10] - 0.5).abs() < 1e-6);
        for c in 10..63 {
            assert!(corr[c + 1] < corr[c]);
        }
        for c in (1..=10).rev() {
            assert!(corr[c - 1] < corr[c]);
        }
    }

    #[test]
    fn residual_field_reproduces_points() {
        let spec = SensorSpec::default();
        let rel = line_rel(20, 24);
        let pts = points_with(&rel, |r| 0.3 * r + 0.3 + 0.1 * (r * 3.0).cos(), 5);
        let fit = fit_affine(&pts, &rel, FitDomain::Depth, false).unwrap();
        let out = complete_with_residuals(&rel, &fit, &pts, &spec).unwrap();
        for p in pts.iter() {
            let v = out.get(p.row, p.col).unwrap() as f64;
            assert!((v - p.d).abs() <= 1e-6, "{v} vs {}", p.d);
        }
    }

    #[test]
    fn knn_matches_brute_force() {
        let coords: Vec<[f64; 2]> = (0..97)
            .map(|i| {
                let t = i as f64 * 0.618_033_988_75;
                [t.fract(), (t * 1.7 + 0.3).fract()]
            })
            .collect();
        let grid = PointGrid::new(coords.clone());
        let mut out = Vec::new();
        for q in [[0.0, 0.0], [0.5, 0.5], [0.99, 0.01], [0.3, 0.8]] {
            grid.nearest(q, 8, &mut out);
            let mut brute: Vec<(f64, usize)> = coords
                .iter()
                .enumerate()
                .map(|(i, p)| (((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt(), i))
                .collect();
            brute.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            brute.truncate(8);
            assert_eq!(out, brute);
        }
    }
}
