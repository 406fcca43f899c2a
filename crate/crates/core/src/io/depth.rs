//! Dense depth codecs.
//!
//! * `.pfm`: single-channel portable float map (`Pf`), little-endian
//!   (negative scale), rows stored bottom to top, meters. Lossless.
//! * `.png`: 16-bit grayscale, millimeters, `0` marks an invalid pixel.

use std::fs;
use std::io::{BufReader, Cursor, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{DenseDepthMap, Orientation, RelativeDepthMap};

/// Raw single-channel float grid, row-major top to bottom.
#[derive(Clone, Debug, PartialEq)]
pub struct FloatImage {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f32>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Pfm,
    Png,
}

fn format_of(path: &Path) -> Result<Format> {
    match path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .as_deref()
    {
        Some("pfm") => Ok(Format::Pfm),
        Some("png") => Ok(Format::Png),
        other => Err(Error::UnsupportedFormat(format!(
            "extension {:?}; expected .pfm or .png",
            other.unwrap_or("")
        ))),
    }
}

/// Splits the next whitespace-delimited header token.
fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::MalformedHeader("header ends early".into()));
    }
    std::str::from_utf8(&bytes[start..*pos])
        .map_err(|_| Error::MalformedHeader("header is not ASCII".into()))
}

pub fn decode_pfm(bytes: &[u8]) -> Result<FloatImage> {
    let mut pos = 0;
    let magic = header_token(bytes, &mut pos)?;
    match magic {
        "Pf" => {}
        "PF" => return Err(Error::UnsupportedChannels(3)),
        other => {
            return Err(Error::MalformedHeader(format!(
                "magic {other:?}, expected \"Pf\""
            )))
        }
    }
    let parse_dim = |tok: &str, what: &str| -> Result<usize> {
        match tok.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(Error::MalformedHeader(format!("bad {what} {tok:?}"))),
        }
    };
    let width = parse_dim(header_token(bytes, &mut pos)?, "width")?;
    let height = parse_dim(header_token(bytes, &mut pos)?, "height")?;
    let scale_tok = header_token(bytes, &mut pos)?;
    let scale: f32 = scale_tok
        .parse()
        .ok()
        .filter(|s: &f32| s.is_finite() && *s != 0.0)
        .ok_or_else(|| Error::MalformedHeader(format!("bad scale {scale_tok:?}")))?;
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::MalformedHeader("missing newline after scale".into()));
    }
    pos += 1;

    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::MalformedHeader("dimensions overflow".into()))?;
    let payload = &bytes[pos..];
    if payload.len() < expected {
        return Err(Error::TruncatedPayload {
            expected,
            found: payload.len(),
        });
    }
    let little = scale < 0.0;
    let mut values = vec![0f32; width * height];
    for (k, chunk) in payload[..expected].chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (file_row, col) = (k / width, k % width);
        values[(height - 1 - file_row) * width + col] = v;
    }
    Ok(FloatImage {
        height,
        width,
        values,
    })
}

pub fn encode_pfm(img: &FloatImage) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", img.width, img.height).into_bytes();
    out.reserve(img.values.len() * 4);
    for row in (0..img.height).rev() {
        for &v in &img.values[row * img.width..(row + 1) * img.width] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

/// Decodes a 16-bit grayscale PNG into raw sample values.
pub fn decode_png16(bytes: &[u8]) -> Result<(usize, usize, Vec<u16>)> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::MalformedHeader(format!("png: {e}")))?;
    let info = reader.info();
    let channels = info.color_type.samples();
    if channels != 1 {
        return Err(Error::UnsupportedChannels(channels));
    }
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Sixteen {
        return Err(Error::UnsupportedFormat(format!(
            "png {:?} at {:?} bits; expected 16-bit grayscale",
            info.color_type, info.bit_depth
        )));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; width * height * 2];
    reader.next_frame(&mut buf).map_err(|e| match e {
        png::DecodingError::IoError(io) => Error::Io(io),
        other => Error::CorruptPayload(format!("png: {other}")),
    })?;
    let values = buf
        .chunks_exact(2)
        .map(|c| u16::from_be_bytes([c[0], c[1]]))
        .collect();
    Ok((height, width, values))
}

pub fn encode_png16(height: usize, width: usize, values: &[u16]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut writer = enc.write_header().map_err(png_write_err)?;
        let data: Vec<u8> = values.iter().flat_map(|v| v.to_be_bytes()).collect();
        writer.write_image_data(&data).map_err(png_write_err)?;
        writer.finish().map_err(png_write_err)?;
    }
    Ok(out)
}

/// 8-bit RGB PNG.
pub fn encode_png_rgb(height: usize, width: usize, rgb: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(png_write_err)?;
        writer.write_image_data(rgb).map_err(png_write_err)?;
        writer.finish().map_err(png_write_err)?;
    }
    Ok(out)
}

fn png_write_err(e: png::EncodingError) -> Error {
    match e {
        png::EncodingError::IoError(io) => Error::Io(io),
        other => Error::InvalidInput(format!("png encoding: {other}")),
    }
}

/// Converts meters to the millimeter PNG encoding.
pub fn depth_to_mm(map: &DenseDepthMap) -> Result<Vec<u16>> {
    map.values()
        .iter()
        .zip(map.valid())
        .enumerate()
        .map(|(i, (&v, &ok))| {
            if !ok {
                return Ok(0);
            }
            let mm = (v as f64 * 1000.0).round();
            if !(1.0..=u16::MAX as f64).contains(&mm) {
                return Err(Error::InvalidInput(format!(
                    "depth {v} m at ({}, {}) does not fit a 16-bit millimeter PNG",
                    i / map.width(),
                    i % map.width()
                )));
            }
            Ok(mm as u16)
        })
        .collect()
}

pub fn mm_to_depth(height: usize, width: usize, mm: &[u16]) -> Result<DenseDepthMap> {
    let values = mm.iter().map(|&v| v as f32 / 1000.0).collect();
    DenseDepthMap::from_values(height, width, values)
}

pub fn read_float_image(path: &Path) -> Result<FloatImage> {
    let bytes = fs::read(path).map_err(|e| Error::Io(e).at_path(path))?;
    decode_pfm(&bytes).map_err(|e| e.at_path(path))
}

pub fn write_float_image(path: &Path, img: &FloatImage) -> Result<()> {
    write_bytes(path, &encode_pfm(img))
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::Io(e).at_path(path))?;
    f.write_all(bytes).map_err(|e| Error::Io(e).at_path(path))
}

/// Reads a dense depth map, format chosen by extension.
pub fn read_dense_depth(path: &Path) -> Result<DenseDepthMap> {
    match format_of(path)? {
        Format::Pfm => {
            let img = read_float_image(path)?;
            DenseDepthMap::from_values(img.height, img.width, img.values)
                .map_err(|e| e.at_path(path))
        }
        Format::Png => {
            let f = fs::File::open(path).map_err(|e| Error::Io(e).at_path(path))?;
            let mut bytes = Vec::new();
            std::io::Read::read_to_end(&mut BufReader::new(f), &mut bytes)
                .map_err(|e| Error::Io(e).at_path(path))?;
            let (h, w, mm) = decode_png16(&bytes).map_err(|e| e.at_path(path))?;
            mm_to_depth(h, w, &mm).map_err(|e| e.at_path(path))
        }
    }
}

/// Writes a dense depth map, format chosen by extension. Invalid pixels are
/// written as `0`.
pub fn write_dense_depth(path: &Path, map: &DenseDepthMap) -> Result<()> {
    let bytes = match format_of(path)? {
        Format::Pfm => encode_pfm(&FloatImage {
            height: map.height(),
            width: map.width(),
            values: map.values().to_vec(),
        }),
        Format::Png => {
            let mm = depth_to_mm(map).map_err(|e| e.at_path(path))?;
            encode_png16(map.height(), map.width(), &mm)?
        }
    };
    write_bytes(path, &bytes)
}

/// Reads a relative depth map. PNG samples are taken as raw unitless values.
pub fn read_relative_depth(path: &Path, orientation: Orientation) -> Result<RelativeDepthMap> {
    let (h, w, values) = match format_of(path)? {
        Format::Pfm => {
            let img = read_float_image(path)?;
            (img.height, img.width, img.values)
        }
        Format::Png => {
            let bytes = fs::read(path).map_err(|e| Error::Io(e).at_path(path))?;
            let (h, w, raw) = decode_png16(&bytes).map_err(|e| e.at_path(path))?;
            (h, w, raw.into_iter().map(f32::from).collect())
        }
    };
    RelativeDepthMap::new(h, w, values, orientation).map_err(|e| e.at_path(path))
}

pub fn write_relative_depth(path: &Path, rel: &RelativeDepthMap) -> Result<()> {
    match format_of(path)? {
        Format::Pfm => write_float_image(
            path,
            &FloatImage {
                height: rel.height(),
                width: rel.width(),
                values: rel.values().to_vec(),
            },
        ),
        Format::Png => Err(Error::UnsupportedFormat(
            "relative depth is written as .pfm only".into(),
        )),
    }
}
