//! Procedural indoor scenes for tests, benchmarks and fixtures.
//!
//! A scene is a back wall, a floor receding to a horizon and a handful of
//! box-shaped occluders, paired with an inverse relative depth map that
//! stands in for a monocular model: an affine function of inverse depth
//! with a mild smooth distortion.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::types::{DenseDepthMap, Orientation, RelativeDepthMap};

#[derive(Clone, Debug)]
pub struct Scene {
    pub gt: DenseDepthMap,
    /// Inverse-oriented relative depth.
    pub rel: RelativeDepthMap,
}

pub fn synthetic_scene(height: usize, width: usize, seed: u64) -> Result<Scene> {
    synthetic_scene_with_warp(height, width, seed, 0.02)
}

/// Same scenes as [`synthetic_scene`] with a chosen distortion amplitude.
/// With `warp = 0` the relative map is strictly decreasing in depth.
pub fn synthetic_scene_with_warp(
    height: usize,
    width: usize,
    seed: u64,
    warp: f64,
) -> Result<Scene> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (height as f64, width as f64);

    let back = rng.gen_range(4.0..7.0);
    let tilt = rng.gen_range(-1.0..1.0);
    let horizon = h * rng.gen_range(0.45..0.6);
    let floor_c = rng.gen_range(0.3..0.6);
    let n_boxes = rng.gen_range(3..=6);
    let boxes: Vec<[f64; 6]> = (0..n_boxes)
        .map(|_| {
            let bh = h * rng.gen_range(0.15..0.45);
            let bw = w * rng.gen_range(0.1..0.3);
            let top = rng.gen_range(0.0..(h - bh));
            let left = rng.gen_range(0.0..(w - bw));
            let depth = rng.gen_range(1.0..(back - 0.5));
            let slope = rng.gen_range(-0.5..0.5);
            [top, left, bh, bw, depth, slope]
        })
        .collect();

    let mut values = Vec::with_capacity(height * width);
    for row in 0..height {
        for col in 0..width {
            let (y, x) = (row as f64 + 0.5, col as f64 + 0.5);
            let mut d = back + tilt * (x / w - 0.5);
            if y > horizon {
                d = d.min(floor_c / ((y - horizon) / h));
            }
            for &[top, left, bh, bw, depth, slope] in &boxes {
                if y >= top && y < top + bh && x >= left && x < left + bw {
                    d = d.min(depth + slope * (x - left) / bw);
                }
            }
            values.push(d.clamp(0.3, 9.5) as f32);
        }
    }
    let gt = DenseDepthMap::from_values(height, width, values)?;

    let scale = rng.gen_range(0.5..2.0);
    let shift = rng.gen_range(0.0..0.2);
    let (fx, fy) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let rel_values = gt
        .values()
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let (y, x) = ((i / width) as f64 / h, (i % width) as f64 / w);
            let warp = 1.0
                + warp
                    * (std::f64::consts::TAU * fx * x + phase).sin()
                    * (std::f64::consts::TAU * fy * y).cos();
            ((scale / d as f64 + shift) * warp) as f32
        })
        .collect();
    let rel = RelativeDepthMap::new(height, width, rel_values, Orientation::Inverse)?;
    Ok(Scene { gt, rel })
}
