//! Shared domain types and coordinate conventions.
//!
//! Pixel indices are `(row, col)`. Normalized coordinates are
//! `(x, y) = (col / width, row / height)`, so only the Euclidean distance
//! between two normalized points carries meaning.

use crate::error::{Error, Result};

/// Guard added to inverse-depth values before taking the reciprocal.
pub const INVERSE_EPS: f64 = 1e-6;

/// Dense metric depth grid. Invalid pixels hold `0.0` and `valid == false`.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseDepthMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
    valid: Vec<bool>,
}

impl DenseDepthMap {
    /// Builds a map from raw values; pixels that are non-finite or `<= 0`
    /// become invalid.
    pub fn from_values(height: usize, width: usize, values: Vec<f32>) -> Result<Self> {
        check_shape(height, width, values.len())?;
        let mut values = values;
        let valid = values
            .iter_mut()
            .map(|v| {
                if v.is_finite() && *v > 0.0 {
                    true
                } else {
                    *v = 0.0;
                    false
                }
            })
            .collect();
        Ok(Self {
            height,
            width,
            values,
            valid,
        })
    }

    /// Builds a map with an explicit mask. Masked-out pixels are zeroed.
    pub fn with_mask(
        height: usize,
        width: usize,
        mut values: Vec<f32>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        check_shape(height, width, values.len())?;
        check_shape(height, width, valid.len())?;
        for (v, &ok) in values.iter_mut().zip(&valid) {
            if ok {
                if !(v.is_finite() && *v > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "valid depth pixel holds non-positive value {v}"
                    )));
                }
            } else {
                *v = 0.0;
            }
        }
        Ok(Self {
            height,
            width,
            values,
            valid,
        })
    }

    pub fn filled(height: usize, width: usize, depth: f32) -> Result<Self> {
        Self::from_values(height, width, vec![depth; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    /// Depth at a pixel, `None` when invalid or out of bounds.
    pub fn get(&self, row: usize, col: usize) -> Option<f32> {
        if row >= self.height || col >= self.width {
            return None;
        }
        let i = self.index(row, col);
        self.valid[i].then_some(self.values[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Applies `f` to every valid pixel, invalidating results that are not
    /// strictly positive.
    pub fn map_valid(&self, f: impl Fn(f32) -> f32) -> Self {
        let mut out = self.clone();
        for i in 0..out.values.len() {
            if out.valid[i] {
                let v = f(out.values[i]);
                if v.is_finite() && v > 0.0 {
                    out.values[i] = v;
                } else {
                    out.values[i] = 0.0;
                    out.valid[i] = false;
                }
            }
        }
        out
    }
}

/// Orientation of a relative depth map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Larger value is farther.
    DepthLike,
    /// Larger value is nearer (disparity-style MDE output).
    Inverse,
}

/// Unitless relative depth, typically the output of a monocular model.
#[derive(Clone, Debug, PartialEq)]
pub struct RelativeDepthMap {
    height: usize,
    width: usize,
    values: Vec<f32>,
    orientation: Orientation,
}

impl RelativeDepthMap {
    pub fn new(
        height: usize,
        width: usize,
        values: Vec<f32>,
        orientation: Orientation,
    ) -> Result<Self> {
        check_shape(height, width, values.len())?;
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "relative depth at pixel {} ({}, {}) is {}; values must be finite and >= 0",
                i,
                i / width,
                i % width,
                values[i]
            )));
        }
        Ok(Self {
            height,
            width,
            values,
            orientation,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn raw(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col] as f64
    }

    /// Value at a pixel in depth-like orientation.
    pub fn depth_like(&self, row: usize, col: usize) -> f64 {
        to_depth_like(self.raw(row, col), self.orientation)
    }

    /// Value at a pixel in inverse orientation.
    pub fn inverse_like(&self, row: usize, col: usize) -> f64 {
        match self.orientation {
            Orientation::Inverse => self.raw(row, col),
            Orientation::DepthLike => 1.0 / (self.raw(row, col) + INVERSE_EPS),
        }
    }
}

/// Converts a relative value to depth-like orientation.
pub fn to_depth_like(value: f64, orientation: Orientation) -> f64 {
    match orientation {
        Orientation::DepthLike => value,
        Orientation::Inverse => 1.0 / (value + INVERSE_EPS),
    }
}

/// Normalized image coordinate `(col / width, row / height)`.
pub fn normalize_coords(row: usize, col: usize, height: usize, width: usize) -> [f64; 2] {
    debug_assert!(row < height && col < width);
    [col as f64 / width as f64, row as f64 / height as f64]
}

/// A single sparse depth sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthPoint {
    pub row: usize,
    pub col: usize,
    /// Sensor depth in meters.
    pub d: f64,
    /// Relative depth, depth-like orientation.
    pub r: f64,
    /// Normalized image coordinate.
    pub p: [f64; 2],
}

/// Sparse points in row-major order with unique pixel coordinates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparsePointSet {
    points: Vec<DepthPoint>,
    source_height: usize,
    source_width: usize,
}

impl SparsePointSet {
    /// Sorts `points` row-major and rejects duplicates or out-of-range
    /// coordinates. `p` is recomputed from the pixel indices.
    pub fn new(mut points: Vec<DepthPoint>, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidInput(format!(
                "point set source shape {height}x{width} is empty"
            )));
        }
        for (i, pt) in points.iter_mut().enumerate() {
            if pt.row >= height || pt.col >= width {
                return Err(Error::OutOfBounds {
                    index: i,
                    row: pt.row,
                    col: pt.col,
                    height,
                    width,
                });
            }
            if !(pt.d.is_finite() && pt.d > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "point {i} at ({}, {}) has depth {}",
                    pt.row, pt.col, pt.d
                )));
            }
            if !(pt.r.is_finite() && pt.r >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "point {i} at ({}, {}) has relative depth {}",
                    pt.row, pt.col, pt.r
                )));
            }
            pt.p = normalize_coords(pt.row, pt.col, height, width);
        }
        points.sort_by_key(|pt| (pt.row, pt.col));
        if let Some(w) = points
            .windows(2)
            .find(|w| (w[0].row, w[0].col) == (w[1].row, w[1].col))
        {
            return Err(Error::DuplicatePoint {
                row: w[0].row,
                col: w[0].col,
            });
        }
        Ok(Self {
            points,
            source_height: height,
            source_width: width,
        })
    }

    /// Builds points from `(row, col, depth)` triples with `r = 0`.
    pub fn from_depths(
        samples: impl IntoIterator<Item = (usize, usize, f64)>,
        height: usize,
        width: usize,
    ) -> Result<Self> {
        let points = samples
            .into_iter()
            .map(|(row, col, d)| DepthPoint {
                row,
                col,
                d,
                r: 0.0,
                p: [0.0, 0.0],
            })
            .collect();
        Self::new(points, height, width)
    }

    pub fn points(&self) -> &[DepthPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn source_height(&self) -> usize {
        self.source_height
    }

    pub fn source_width(&self) -> usize {
        self.source_width
    }

    pub fn iter(&self) -> impl Iterator<Item = &DepthPoint> {
        self.points.iter()
    }

    /// Keeps the points for which `keep` is true, preserving order.
    pub fn retain_mask(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.points.len() {
            return Err(Error::LengthMismatch {
                expected: self.points.len(),
                actual: keep.len(),
            });
        }
        let points = self
            .points
            .iter()
            .zip(keep)
            .filter(|(_, &k)| k)
            .map(|(pt, _)| *pt)
            .collect();
        Ok(Self {
            points,
            source_height: self.source_height,
            source_width: self.source_width,
        })
    }
}

/// Pairs sensor points with relative depth sampled at the same pixels.
///
/// The sensor raster must share the relative map's shape. Values are
/// converted to depth-like orientation.
pub fn pair_points(points: &SparsePointSet, rel: &RelativeDepthMap) -> Result<SparsePointSet> {
    let mut paired = Vec::with_capacity(points.len());
    for (i, pt) in points.iter().enumerate() {
        if pt.row >= rel.height() || pt.col >= rel.width() {
            return Err(Error::OutOfBounds {
                index: i,
                row: pt.row,
                col: pt.col,
                height: rel.height(),
                width: rel.width(),
            });
        }
        paired.push(DepthPoint {
            r: rel.depth_like(pt.row, pt.col),
            ..*pt
        });
    }
    SparsePointSet::new(paired, rel.height(), rel.width())
}

/// Extracts every valid pixel of a sparse raster as a point.
pub fn points_from_raster(raster: &DenseDepthMap) -> Result<SparsePointSet> {
    let w = raster.width();
    let samples = raster
        .values()
        .iter()
        .zip(raster.valid())
        .enumerate()
        .filter(|(_, (_, &ok))| ok)
        .map(|(i, (&v, _))| (i / w, i % w, v as f64));
    SparsePointSet::from_depths(samples, raster.height(), raster.width())
}

/// Sensor geometry and corruption rates.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorSpec {
    pub dtof_rows: usize,
    pub dtof_cols: usize,
    /// Fraction of the image covered per axis, centered.
    pub fov_fraction: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub noise_rate: f64,
    pub blank_rate: f64,
    /// Percentile in (0, 100) separating background from foreground.
    pub background_percentile: f64,
    /// Maximum calibration shift, in dToF cells.
    pub max_shift_dtof_px: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            dtof_rows: 30,
            dtof_cols: 40,
            fov_fraction: 1.0,
            d_min: 0.1,
            d_max: 10.0,
            noise_rate: 0.05,
            blank_rate: 0.05,
            background_percentile: 70.0,
            max_shift_dtof_px: 2.0,
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.dtof_rows == 0 || self.dtof_cols == 0 {
            return bad(format!(
                "sensor grid {}x{} is empty",
                self.dtof_rows, self.dtof_cols
            ));
        }
        if !(self.fov_fraction > 0.0 && self.fov_fraction <= 1.0) {
            return bad(format!("fov_fraction {} not in (0, 1]", self.fov_fraction));
        }
        if !(self.d_min > 0.0 && self.d_min < self.d_max && self.d_max.is_finite()) {
            return bad(format!(
                "detection range [{}, {}] must satisfy 0 < d_min < d_max",
                self.d_min, self.d_max
            ));
        }
        for (name, v) in [("noise_rate", self.noise_rate), ("blank_rate", self.blank_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} {v} not in [0, 1]"));
            }
        }
        if self.noise_rate + self.blank_rate > 1.0 {
            return bad(format!(
                "noise_rate + blank_rate = {} exceeds 1",
                self.noise_rate + self.blank_rate
            ));
        }
        if !(self.background_percentile > 0.0 && self.background_percentile < 100.0) {
            return bad(format!(
                "background_percentile {} not in (0, 100)",
                self.background_percentile
            ));
        }
        if !(self.max_shift_dtof_px >= 0.0 && self.max_shift_dtof_px.is_finite()) {
            return bad(format!(
                "max_shift_dtof_px {} must be >= 0",
                self.max_shift_dtof_px
            ));
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.dtof_rows * self.dtof_cols
    }
}

fn check_shape(height: usize, width: usize, len: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::InvalidInput(format!(
            "map shape {height}x{width} is empty"
        )));
    }
    if len != height * width {
        return Err(Error::LengthMismatch {
            expected: height * width,
            actual: len,
        });
    }
    Ok(())
}
