//! Sparse dToF measurement simulation from dense ground truth.
//!
//! A frame is produced in four stages, each a public function so it can be
//! exercised on its own:
//!
//! 1. [`sample_grid`]: one sample per sensor cell. The ground truth is
//!    read through a small random rigid transform (sub-cell translation and
//!    at most one degree of rotation), and each sample position is jittered
//!    inside its cell.
//! 2. [`inject_region_anomalies`]: irregular blobs in cell space, each
//!    either removing its points (absence) or replacing their depths (error).
//! 3. [`inject_calibration_error`]: background points, those deeper than a
//!    ground-truth percentile, are re-read at a location displaced by one
//!    per-frame vector of up to `max_shift_dtof_px` cells.
//! 4. [`inject_random_noise`]: independent per-point noise and blank draws.
//!
//! Every stage draws from its own ChaCha8 stream derived from the seed, so
//! the output is a pure function of `(gt, cfg)`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DenseDepthMap, SensorSpec, SparsePointSet};

const MAX_ROTATION_DEG: f64 = 1.0;

const STREAM_GRID: u64 = 1;
const STREAM_REGIONS: u64 = 2;
const STREAM_CALIBRATION: u64 = 3;
const STREAM_NOISE: u64 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointLabel {
    Clean,
    Error,
    Shifted,
}

impl PointLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PointLabel::Clean => "clean",
            PointLabel::Error => "error",
            PointLabel::Shifted => "shifted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "clean" => Some(PointLabel::Clean),
            "error" => Some(PointLabel::Error),
            "shifted" => Some(PointLabel::Shifted),
            _ => None,
        }
    }
}

/// Position of a sensor cell in the dToF grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CellIndex {
    pub row: usize,
    pub col: usize,
}

/// Pixel rectangle covered by the sensor, end-exclusive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FovRect {
    pub top: usize,
    pub left: usize,
    pub bottom: usize,
    pub right: usize,
}

impl FovRect {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        (self.top..self.bottom).contains(&row) && (self.left..self.right).contains(&col)
    }
}

/// Depth assigned to points inside error regions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErrorPolicy {
    /// Uniform redraw in `[d_min, d_max]`.
    Uniform,
    /// Multiply the true depth by a factor drawn from `[min, max]`, capped at
    /// `d_max`. Mimics transparent surfaces returning the background.
    Multiplicative { min: f64, max: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub spec: SensorSpec,
    pub seed: u64,
    /// Inclusive range for the number of anomaly blobs.
    pub region_count_range: [usize; 2],
    /// Inclusive range for one blob's area as a fraction of the sensor cells.
    pub region_area_range: [f64; 2],
    pub error_policy: ErrorPolicy,
    /// Probability that a blob is an error region rather than an absence.
    pub error_region_probability: f64,
    /// Per-cell sample jitter, as a fraction of the cell size.
    pub jitter: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            spec: SensorSpec::default(),
            seed: 0,
            region_count_range: [1, 3],
            region_area_range: [0.02, 0.1],
            error_policy: ErrorPolicy::Uniform,
            error_region_probability: 0.5,
            jitter: 0.1,
        }
    }
}

impl SimConfig {
    /// A configuration that only samples the grid.
    pub fn clean(spec: SensorSpec, seed: u64) -> Self {
        Self {
            spec: SensorSpec {
                noise_rate: 0.0,
                blank_rate: 0.0,
                max_shift_dtof_px: 0.0,
                ..spec
            },
            seed,
            region_count_range: [0, 0],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        let [cmin, cmax] = self.region_count_range;
        if cmin > cmax {
            return bad(format!("region_count_range [{cmin}, {cmax}] is reversed"));
        }
        let [amin, amax] = self.region_area_range;
        if !(amin > 0.0 && amin <= amax && amax <= 0.5) {
            return bad(format!(
                "region_area_range [{amin}, {amax}] must lie within (0, 0.5]"
            ));
        }
        if !(0.0..=1.0).contains(&self.error_region_probability) {
            return bad(format!(
                "error_region_probability {} not in [0, 1]",
                self.error_region_probability
            ));
        }
        if !(0.0..=0.5).contains(&self.jitter) {
            return bad(format!("jitter {} not in [0, 0.5]", self.jitter));
        }
        if let ErrorPolicy::Multiplicative { min, max } = self.error_policy {
            if !(min > 0.0 && min <= max && max.is_finite()) {
                return bad(format!("multiplicative error range [{min}, {max}] is invalid"));
            }
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// One emitted sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimSample {
    pub cell: CellIndex,
    pub row: usize,
    pub col: usize,
    pub depth: f64,
    pub label: PointLabel,
    /// Continuous ground-truth location `(y, x)` the depth was read from.
    pub source: [f64; 2],
}

/// Bookkeeping for each corruption stage.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimStats {
    pub grid_dropped: usize,
    pub region_blobs: usize,
    pub region_error_points: usize,
    pub region_absent_points: usize,
    pub background_threshold: Option<f64>,
    /// Calibration displacement in cell units `(dy, dx)`.
    pub shift_cells: [f64; 2],
    pub shifted: usize,
    pub calibration_dropped: usize,
    pub noise: usize,
    pub blank: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOutput {
    height: usize,
    width: usize,
    /// Row-major by pixel, unique pixels.
    samples: Vec<SimSample>,
    /// Cells without a return, sorted.
    dropped: Vec<CellIndex>,
    fov_rect: FovRect,
    stats: SimStats,
}

impl SimOutput {
    pub fn samples(&self) -> &[SimSample] {
        &self.samples
    }

    pub fn dropped(&self) -> &[CellIndex] {
        &self.dropped
    }

    pub fn fov_rect(&self) -> FovRect {
        self.fov_rect
    }

    pub fn stats(&self) -> &SimStats {
        &self.stats
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn labels(&self) -> Vec<PointLabel> {
        self.samples.iter().map(|s| s.label).collect()
    }

    /// Row-major pixel mask covering the footprint of every listed cell
    /// under the nominal (untransformed) lattice.
    pub fn cell_pixel_mask(
        &self,
        spec: &SensorSpec,
        cells: impl IntoIterator<Item = CellIndex>,
    ) -> Vec<bool> {
        let lat = Lattice::new(spec, self.height, self.width);
        let mut mask = vec![false; self.height * self.width];
        for cell in cells {
            let r0 = lat.y0 + cell.row as f64 * lat.cell_h;
            let c0 = lat.x0 + cell.col as f64 * lat.cell_w;
            let rows = pixel_of(r0, 0, self.height)..pixel_of((r0 + lat.cell_h).ceil(), 0, self.height + 1);
            let cols = pixel_of(c0, 0, self.width)..pixel_of((c0 + lat.cell_w).ceil(), 0, self.width + 1);
            for r in rows {
                mask[r * self.width + cols.start..r * self.width + cols.end].fill(true);
            }
        }
        mask
    }

    /// Pixel mask of the cells whose samples carry `label`.
    pub fn label_pixel_mask(&self, spec: &SensorSpec, label: PointLabel) -> Vec<bool> {
        self.cell_pixel_mask(
            spec,
            self.samples.iter().filter(|s| s.label == label).map(|s| s.cell),
        )
    }

    /// Emitted points without relative depth (`r = 0`).
    pub fn points(&self) -> SparsePointSet {
        SparsePointSet::from_depths(
            self.samples.iter().map(|s| (s.row, s.col, s.depth)),
            self.height,
            self.width,
        )
        .expect("simulator emits unique in-bounds points")
    }

    fn finish(&mut self) {
        self.samples.sort_by_key(|s| (s.row, s.col));
        self.dropped.sort();
    }
}

/// Sensor lattice placed over the image.
#[derive(Clone, Copy, Debug)]
struct Lattice {
    y0: f64,
    x0: f64,
    cell_h: f64,
    cell_w: f64,
    rect: FovRect,
}

impl Lattice {
    fn new(spec: &SensorSpec, height: usize, width: usize) -> Self {
        let (h, w) = (height as f64, width as f64);
        let fh = spec.fov_fraction * h;
        let fw = spec.fov_fraction * w;
        let y0 = (h - fh) / 2.0;
        let x0 = (w - fw) / 2.0;
        let rect = FovRect {
            top: y0.floor() as usize,
            left: x0.floor() as usize,
            bottom: ((y0 + fh).ceil() as usize).min(height),
            right: ((x0 + fw).ceil() as usize).min(width),
        };
        Self {
            y0,
            x0,
            cell_h: fh / spec.dtof_rows as f64,
            cell_w: fw / spec.dtof_cols as f64,
            rect,
        }
    }
}

fn pixel_of(v: f64, lo: usize, hi: usize) -> usize {
    (v.floor().max(lo as f64) as usize).min(hi - 1)
}

/// Ground-truth lookup at a continuous location; `None` outside or invalid.
fn gt_at(gt: &DenseDepthMap, y: f64, x: f64) -> Option<f64> {
    if !(y >= 0.0 && x >= 0.0 && y < gt.height() as f64 && x < gt.width() as f64) {
        return None;
    }
    gt.get(y as usize, x as usize).map(f64::from)
}

/// Samples one point per sensor cell.
pub fn sample_grid(gt: &DenseDepthMap, cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let spec = &cfg.spec;
    let (height, width) = (gt.height(), gt.width());
    let lat = Lattice::new(spec, height, width);
    let rect = lat.rect;

    let fov_has_depth = (rect.top..rect.bottom)
        .any(|r| (rect.left..rect.right).any(|c| gt.get(r, c).is_some()));
    if !fov_has_depth {
        return Err(Error::EmptyFov);
    }

    let mut rng = cfg.rng(STREAM_GRID);
    let ty = rng.gen_range(-0.5..=0.5) * lat.cell_h;
    let tx = rng.gen_range(-0.5..=0.5) * lat.cell_w;
    let theta = rng.gen_range(-MAX_ROTATION_DEG..=MAX_ROTATION_DEG).to_radians();
    let (sin_t, cos_t) = theta.sin_cos();
    let (cy, cx) = (height as f64 / 2.0, width as f64 / 2.0);
    // Source reads are clamped to the image so border cells still return.
    let max_y = height as f64 - 1e-9;
    let max_x = width as f64 - 1e-9;

    let mut out = SimOutput {
        height,
        width,
        samples: Vec::with_capacity(spec.cell_count()),
        dropped: Vec::new(),
        fov_rect: rect,
        stats: SimStats::default(),
    };
    let mut occupied = HashSet::with_capacity(spec.cell_count());
    for i in 0..spec.dtof_rows {
        for j in 0..spec.dtof_cols {
            let cell = CellIndex { row: i, col: j };
            let jy = rng.gen_range(-1.0..=1.0) * cfg.jitter * lat.cell_h;
            let jx = rng.gen_range(-1.0..=1.0) * cfg.jitter * lat.cell_w;
            let y = lat.y0 + (i as f64 + 0.5) * lat.cell_h + jy;
            let x = lat.x0 + (j as f64 + 0.5) * lat.cell_w + jx;
            let row = pixel_of(y, rect.top, rect.bottom);
            let col = pixel_of(x, rect.left, rect.right);

            let (ry, rx) = (y - cy, x - cx);
            let sy = (cy + sin_t * rx + cos_t * ry + ty).clamp(0.0, max_y);
            let sx = (cx + cos_t * rx - sin_t * ry + tx).clamp(0.0, max_x);

            match gt_at(gt, sy, sx) {
                Some(depth) if occupied.insert((row, col)) => out.samples.push(SimSample {
                    cell,
                    row,
                    col,
                    depth,
                    label: PointLabel::Clean,
                    source: [sy, sx],
                }),
                _ => {
                    out.dropped.push(cell);
                    out.stats.grid_dropped += 1;
                }
            }
        }
    }
    out.finish();
    Ok(out)
}

/// Cells of one irregular blob: the `target` cells with the smallest
/// normalized distance to a union of random ellipses.
fn draw_blob(rng: &mut ChaCha8Rng, rows: usize, cols: usize, target: usize) -> HashSet<CellIndex> {
    let n_ellipses = rng.gen_range(2..=5);
    let cy = rng.gen_range(0.0..rows as f64);
    let cx = rng.gen_range(0.0..cols as f64);
    let radius = (target as f64 / std::f64::consts::PI).sqrt().max(0.5);
    let ellipses: Vec<[f64; 5]> = (0..n_ellipses)
        .map(|_| {
            let off_r = rng.gen_range(0.0..=0.6) * radius;
            let off_a = rng.gen_range(0.0..std::f64::consts::TAU);
            let a = rng.gen_range(0.5..=1.0) * radius;
            let b = rng.gen_range(0.5..=1.0) * radius;
            let phi = rng.gen_range(0.0..std::f64::consts::PI);
            [cy + off_r * off_a.sin(), cx + off_r * off_a.cos(), a, b, phi]
        })
        .collect();

    let mut field: Vec<(f64, usize)> = (0..rows * cols)
        .map(|idx| {
            let y = (idx / cols) as f64 + 0.5;
            let x = (idx % cols) as f64 + 0.5;
            let f = ellipses
                .iter()
                .map(|&[ey, ex, a, b, phi]| {
                    let (s, c) = phi.sin_cos();
                    let (dy, dx) = (y - ey, x - ex);
                    let u = c * dx + s * dy;
                    let v = -s * dx + c * dy;
                    (u / a).powi(2) + (v / b).powi(2)
                })
                .fold(f64::INFINITY, f64::min);
            (f, idx)
        })
        .collect();
    field.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    field
        .iter()
        .take(target)
        .map(|&(_, idx)| CellIndex {
            row: idx / cols,
            col: idx % cols,
        })
        .collect()
}

fn error_depth(rng: &mut ChaCha8Rng, policy: ErrorPolicy, depth: f64, spec: &SensorSpec) -> f64 {
    match policy {
        ErrorPolicy::Uniform => spec.d_min + (spec.d_max - spec.d_min) * rng.gen::<f64>(),
        ErrorPolicy::Multiplicative { min, max } => {
            (depth * rng.gen_range(min..=max)).min(spec.d_max)
        }
    }
}

/// Adds absence and error blobs.
pub fn inject_region_anomalies(
    sim: &SimOutput,
    _gt: &DenseDepthMap,
    cfg: &SimConfig,
) -> Result<SimOutput> {
    cfg.validate()?;
    let spec = &cfg.spec;
    let mut out = sim.clone();
    let [cmin, cmax] = cfg.region_count_range;
    if cmax == 0 {
        return Ok(out);
    }
    let mut rng = cfg.rng(STREAM_REGIONS);
    let count = rng.gen_range(cmin..=cmax);
    let total = spec.cell_count();
    for _ in 0..count {
        let [amin, amax] = cfg.region_area_range;
        let area = rng.gen_range(amin..=amax);
        let target = ((area * total as f64).round() as usize).clamp(1, total);
        let blob = draw_blob(&mut rng, spec.dtof_rows, spec.dtof_cols, target);
        let is_error = rng.gen::<f64>() < cfg.error_region_probability;
        out.stats.region_blobs += 1;
        if is_error {
            for s in out.samples.iter_mut().filter(|s| blob.contains(&s.cell)) {
                s.depth = error_depth(&mut rng, cfg.error_policy, s.depth, spec);
                s.label = PointLabel::Error;
                out.stats.region_error_points += 1;
            }
        } else {
            let before = out.samples.len();
            let mut removed = Vec::new();
            out.samples.retain(|s| {
                let hit = blob.contains(&s.cell);
                if hit {
                    removed.push(s.cell);
                }
                !hit
            });
            out.stats.region_absent_points += before - out.samples.len();
            out.dropped.extend(removed);
        }
    }
    out.finish();
    Ok(out)
}

/// Linear-interpolation percentile of an ascending slice, `q` in `[0, 100]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Displaces background points by one per-frame calibration vector.
pub fn inject_calibration_error(
    sim: &SimOutput,
    gt: &DenseDepthMap,
    cfg: &SimConfig,
) -> Result<SimOutput> {
    cfg.validate()?;
    let spec = &cfg.spec;
    let mut out = sim.clone();
    if spec.max_shift_dtof_px == 0.0 {
        return Ok(out);
    }
    let lat = Lattice::new(spec, gt.height(), gt.width());
    let rect = lat.rect;
    let mut fov_depths: Vec<f64> = (rect.top..rect.bottom)
        .flat_map(|r| (rect.left..rect.right).filter_map(move |c| gt.get(r, c)))
        .map(f64::from)
        .collect();
    if fov_depths.is_empty() {
        return Err(Error::EmptyFov);
    }
    fov_depths.sort_by(f64::total_cmp);
    let tau = percentile(&fov_depths, spec.background_percentile);

    let mut rng = cfg.rng(STREAM_CALIBRATION);
    let magnitude = rng.gen_range(0.0..=spec.max_shift_dtof_px);
    let angle = rng.gen_range(0.0..std::f64::consts::TAU);
    let (dy_cells, dx_cells) = (magnitude * angle.sin(), magnitude * angle.cos());
    let dy = dy_cells * lat.cell_h;
    let dx = dx_cells * lat.cell_w;
    out.stats.background_threshold = Some(tau);
    out.stats.shift_cells = [dy_cells, dx_cells];

    let mut dropped = Vec::new();
    out.samples.retain_mut(|s| {
        if s.label != PointLabel::Clean || !(s.depth > tau) {
            return true;
        }
        let [sy, sx] = [s.source[0] + dy, s.source[1] + dx];
        match gt_at(gt, sy, sx) {
            Some(depth) => {
                s.depth = depth;
                s.source = [sy, sx];
                s.label = PointLabel::Shifted;
                true
            }
            None => {
                dropped.push(s.cell);
                false
            }
        }
    });
    out.stats.shifted = out
        .samples
        .iter()
        .filter(|s| s.label == PointLabel::Shifted)
        .count();
    out.stats.calibration_dropped = dropped.len();
    out.dropped.extend(dropped);
    out.finish();
    Ok(out)
}

/// Turns each point into a noise point or a blank independently.
pub fn inject_random_noise(sim: &SimOutput, cfg: &SimConfig) -> Result<SimOutput> {
    cfg.validate()?;
    let spec = &cfg.spec;
    let mut out = sim.clone();
    if spec.noise_rate == 0.0 && spec.blank_rate == 0.0 {
        return Ok(out);
    }
    let mut rng = cfg.rng(STREAM_NOISE);
    let mut dropped = Vec::new();
    let (mut noise, mut blank) = (0, 0);
    out.samples.retain_mut(|s| {
        let u: f64 = rng.gen();
        if u < spec.noise_rate {
            s.depth = spec.d_min + (spec.d_max - spec.d_min) * rng.gen::<f64>();
            s.label = PointLabel::Error;
            noise += 1;
            true
        } else if u < spec.noise_rate + spec.blank_rate {
            dropped.push(s.cell);
            blank += 1;
            false
        } else {
            true
        }
    });
    out.stats.noise = noise;
    out.stats.blank = blank;
    out.dropped.extend(dropped);
    out.finish();
    Ok(out)
}

/// Full simulation: grid, regions, calibration, random noise.
pub fn simulate(gt: &DenseDepthMap, cfg: &SimConfig) -> Result<SimOutput> {
    let out = sample_grid(gt, cfg)?;
    let out = inject_region_anomalies(&out, gt, cfg)?;
    let out = inject_calibration_error(&out, gt, cfg)?;
    inject_random_noise(&out, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(rows: usize, cols: usize) -> SensorSpec {
        SensorSpec {
            dtof_rows: rows,
            dtof_cols: cols,
            ..Default::default()
        }
    }

    fn ramp(h: usize, w: usize) -> DenseDepthMap {
        let values = (0..h * w)
            .map(|i| 1.0 + 4.0 * (i % w) as f32 / w as f32 + (i / w) as f32 / h as f32)
            .collect();
        DenseDepthMap::from_values(h, w, values).unwrap()
    }

    fn conserved(out: &SimOutput, cells: usize) -> bool {
        out.len() + out.dropped().len() == cells
    }

    #[test]
    fn constant_field_grid() {
        let gt = DenseDepthMap::filled(64, 64, 2.0).unwrap();
        let cfg = SimConfig {
            jitter: 0.0,
            ..SimConfig::clean(spec(8, 8), 3)
        };
        let out = sample_grid(&gt, &cfg).unwrap();
        assert_eq!(out.len(), 64);
        assert!(out.samples().iter().all(|s| s.depth == 2.0));
    }

    #[test]
    fn cell_masks_tile_the_fov() {
        let gt = DenseDepthMap::filled(48, 64, 2.0).unwrap();
        let sp = spec(6, 8);
        let out = sample_grid(&gt, &SimConfig::clean(sp.clone(), 1)).unwrap();
        let one = out.cell_pixel_mask(&sp, [CellIndex { row: 1, col: 2 }]);
        assert_eq!(one.iter().filter(|&&m| m).count(), 64);
        assert!(one[8 * 64 + 16] && one[15 * 64 + 23] && !one[16 * 64 + 16]);
        let all = out.cell_pixel_mask(
            &sp,
            (0..6).flat_map(|row| (0..8).map(move |col| CellIndex { row, col })),
        );
        assert!(all.iter().all(|&m| m));
        assert!(out.label_pixel_mask(&sp, PointLabel::Error).iter().all(|&m| !m));
    }

    #[test]
    fn grid_points_stay_in_their_cells() {
        let gt = ramp(480, 640);
        let cfg = SimConfig {
            jitter: 0.0,
            ..SimConfig::clean(spec(30, 40), 11)
        };
        let out = sample_grid(&gt, &cfg).unwrap();
        assert_eq!(out.len(), 1200);
        for s in out.samples() {
            assert_eq!(s.row / 16, s.cell.row);
            assert_eq!(s.col / 16, s.cell.col);
        }
        let cfg = SimConfig {
            jitter: 0.4,
            ..cfg
        };
        for s in sample_grid(&gt, &cfg).unwrap().samples() {
            assert_eq!(s.row / 16, s.cell.row);
            assert_eq!(s.col / 16, s.cell.col);
        }
    }

    #[test]
    fn grid_is_deterministic() {
        let gt = ramp(120, 160);
        let cfg = SimConfig::clean(spec(30, 40), 99);
        assert_eq!(sample_grid(&gt, &cfg).unwrap(), sample_grid(&gt, &cfg).unwrap());
    }

    #[test]
    fn empty_fov_rejected() {
        let gt = DenseDepthMap::from_values(16, 16, vec![0.0; 256]).unwrap();
        let cfg = SimConfig::clean(spec(4, 4), 0);
        assert!(matches!(sample_grid(&gt, &cfg), Err(Error::EmptyFov)));
    }

    #[test]
    fn narrow_fov_contains_points() {
        let gt = ramp(120, 160);
        let cfg = SimConfig {
            spec: SensorSpec {
                fov_fraction: 0.5,
                ..spec(8, 8)
            },
            ..SimConfig::clean(spec(8, 8), 1)
        };
        let cfg = SimConfig {
            spec: SensorSpec {
                noise_rate: 0.0,
                blank_rate: 0.0,
                max_shift_dtof_px: 0.0,
                ..cfg.spec
            },
            ..cfg
        };
        let out = simulate(&gt, &cfg).unwrap();
        let rect = out.fov_rect();
        assert_eq!(rect, FovRect { top: 30, left: 40, bottom: 90, right: 120 });
        assert!(out.samples().iter().all(|s| rect.contains(s.row, s.col)));
    }

    #[test]
    fn zero_regions_is_noop() {
        let gt = ramp(120, 160);
        let cfg = SimConfig::clean(spec(30, 40), 5);
        let base = sample_grid(&gt, &cfg).unwrap();
        assert_eq!(inject_region_anomalies(&base, &gt, &cfg).unwrap(), base);
    }

    #[test]
    fn absence_blob_removes_exact_area() {
        let gt = ramp(480, 640);
        let cfg = SimConfig {
            region_count_range: [1, 1],
            region_area_range: [0.1, 0.1],
            error_region_probability: 0.0,
            ..SimConfig::clean(spec(30, 40), 21)
        };
        let base = sample_grid(&gt, &cfg).unwrap();
        let out = inject_region_anomalies(&base, &gt, &cfg).unwrap();
        assert_eq!(base.len() - out.len(), 120);
        assert!(out.labels().iter().all(|&l| l == PointLabel::Clean));
        assert!(conserved(&out, 1200));
    }

    #[test]
    fn error_blob_uniform_redraw() {
        let gt = ramp(480, 640);
        let cfg = SimConfig {
            region_count_range: [1, 1],
            region_area_range: [0.1, 0.1],
            error_region_probability: 1.0,
            ..SimConfig::clean(spec(30, 40), 22)
        };
        let base = sample_grid(&gt, &cfg).unwrap();
        let out = inject_region_anomalies(&base, &gt, &cfg).unwrap();
        let errors: Vec<_> = out
            .samples()
            .iter()
            .filter(|s| s.label == PointLabel::Error)
            .collect();
        assert_eq!(errors.len(), 120);
        let (lo, hi) = (cfg.spec.d_min, cfg.spec.d_max);
        assert!(errors.iter().all(|s| (lo..=hi).contains(&s.depth)));
    }

    #[test]
    fn multiplicative_policy_caps_at_range() {
        let gt = DenseDepthMap::filled(60, 80, 6.0).unwrap();
        let cfg = SimConfig {
            region_count_range: [1, 1],
            region_area_range: [0.2, 0.2],
            error_region_probability: 1.0,
            error_policy: ErrorPolicy::Multiplicative { min: 1.5, max: 3.0 },
            ..SimConfig::clean(spec(30, 40), 2)
        };
        let out = simulate(&gt, &cfg).unwrap();
        for s in out.samples().iter().filter(|s| s.label == PointLabel::Error) {
            assert!(s.depth >= 9.0 && s.depth <= cfg.spec.d_max);
        }
    }

    #[test]
    fn calibration_noop_cases() {
        let gt = ramp(120, 160);
        let cfg = SimConfig::clean(spec(30, 40), 4);
        let base = sample_grid(&gt, &cfg).unwrap();
        assert_eq!(inject_calibration_error(&base, &gt, &cfg).unwrap(), base);

        let flat = DenseDepthMap::filled(120, 160, 3.0).unwrap();
        let cfg = SimConfig {
            spec: SensorSpec {
                max_shift_dtof_px: 2.0,
                ..cfg.spec
            },
            ..cfg
        };
        let base = sample_grid(&flat, &cfg).unwrap();
        let out = inject_calibration_error(&base, &flat, &cfg).unwrap();
        assert_eq!(out.samples(), base.samples());
        assert_eq!(out.stats().shifted, 0);
    }

    #[test]
    fn calibration_shift_bounded() {
        let gt = ramp(480, 640);
        for seed in 0..20 {
            let mut cfg = SimConfig::clean(spec(30, 40), seed);
            cfg.spec.max_shift_dtof_px = 2.0;
            let base = sample_grid(&gt, &cfg).unwrap();
            let out = inject_calibration_error(&base, &gt, &cfg).unwrap();
            let [dy, dx] = out.stats().shift_cells;
            assert!((dy * dy + dx * dx).sqrt() <= 2.0 + 1e-12);
            let before: std::collections::HashMap<_, _> =
                base.samples().iter().map(|s| (s.cell, *s)).collect();
            for s in out.samples().iter().filter(|s| s.label == PointLabel::Shifted) {
                let b = before[&s.cell];
                let disp = ((s.source[0] - b.source[0]).powi(2)
                    + (s.source[1] - b.source[1]).powi(2))
                .sqrt();
                assert!(disp <= 32.0 + 1e-9);
                assert_eq!((s.row, s.col), (b.row, b.col));
            }
            assert!(conserved(&out, 1200));
        }
    }

    #[test]
    fn noise_identity_and_saturation() {
        let gt = ramp(120, 160);
        let cfg = SimConfig::clean(spec(30, 40), 8);
        let base = sample_grid(&gt, &cfg).unwrap();
        assert_eq!(inject_random_noise(&base, &cfg).unwrap(), base);

        let mut sat = cfg.clone();
        sat.spec.noise_rate = 1.0;
        let out = inject_random_noise(&base, &sat).unwrap();
        assert_eq!(out.len(), base.len());
        let (lo, hi) = (sat.spec.d_min, sat.spec.d_max);
        assert!(out
            .samples()
            .iter()
            .all(|s| s.label == PointLabel::Error && (lo..=hi).contains(&s.depth)));
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(percentile(&v, 50.0), 3.0);
        assert_eq!(percentile(&v, 70.0), 3.8);
        assert_eq!(percentile(&[2.5; 4], 70.0), 2.5);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.region_area_range = [0.2, 0.6];
        assert!(cfg.validate().is_err());
        cfg = SimConfig {
            jitter: 0.8,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
