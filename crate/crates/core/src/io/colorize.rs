//! Depth visualization through a fixed 256-entry color table.

use std::path::Path;

use crate::error::{Error, Result};
use crate::types::DenseDepthMap;

const LUT_TEXT: &str = include_str!("../../assets/turbo.lut");

/// The shipped color table, low to high.
pub fn lut() -> [[u8; 3]; 256] {
    let mut table = [[0u8; 3]; 256];
    let rows = LUT_TEXT
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let mut n = 0;
    for (entry, line) in table.iter_mut().zip(rows) {
        for (c, tok) in entry.iter_mut().zip(line.split_whitespace()) {
            *c = tok.parse().expect("color table holds bytes");
        }
        n += 1;
    }
    assert_eq!(n, 256, "color table must have 256 entries");
    table
}

/// RGB bytes, row-major. Invalid pixels are black.
pub fn colorize(map: &DenseDepthMap, min: f64, max: f64) -> Result<Vec<u8>> {
    if !(min < max) || !min.is_finite() || !max.is_finite() {
        return Err(Error::InvalidInput(format!(
            "color range [{min}, {max}] must satisfy min < max"
        )));
    }
    let table = lut();
    let mut out = Vec::with_capacity(map.values().len() * 3);
    for (&v, &ok) in map.values().iter().zip(map.valid()) {
        if !ok {
            out.extend_from_slice(&[0, 0, 0]);
            continue;
        }
        let t = ((v as f64 - min) / (max - min)).clamp(0.0, 1.0);
        out.extend_from_slice(&table[(t * 255.0).round() as usize]);
    }
    Ok(out)
}

pub fn write_colorized(path: &Path, map: &DenseDepthMap, min: f64, max: f64) -> Result<()> {
    let rgb = colorize(map, min, max)?;
    let png = super::depth::encode_png_rgb(map.height(), map.width(), &rgb)?;
    super::depth::write_bytes(path, &png)
}
