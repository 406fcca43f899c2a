//! Sparse point CSV: header `row,col,depth_m` with an optional `label`
//! column. Rows are written row-major.

use std::path::Path;

use crate::error::{Error, Result};
use crate::sim::PointLabel;
use crate::types::SparsePointSet;

const HEADER: [&str; 3] = ["row", "col", "depth_m"];
const MIN_SIGNIFICANT: usize = 6;

/// Shortest round-trip decimal, padded with zeros to at least six
/// significant digits.
pub fn format_depth(v: f64) -> String {
    let s = v.to_string();
    let digits = s.trim_start_matches('-').replace('.', "");
    let significant = digits.trim_start_matches('0').len().max(1);
    if significant >= MIN_SIGNIFICANT {
        return s;
    }
    let decimals = s.split_once('.').map_or(0, |(_, f)| f.len());
    format!("{:.*}", decimals + MIN_SIGNIFICANT - significant, v)
}

/// Points read from CSV; `labels` is present when the file had the column.
#[derive(Clone, Debug, PartialEq)]
pub struct PointsFile {
    pub points: SparsePointSet,
    pub labels: Option<Vec<PointLabel>>,
}

pub fn encode_points(pts: &SparsePointSet, labels: Option<&[PointLabel]>) -> Result<String> {
    if let Some(l) = labels {
        if l.len() != pts.len() {
            return Err(Error::LengthMismatch {
                expected: pts.len(),
                actual: l.len(),
            });
        }
    }
    let mut out = String::from(if labels.is_some() {
        "row,col,depth_m,label\n"
    } else {
        "row,col,depth_m\n"
    });
    for (i, p) in pts.iter().enumerate() {
        out.push_str(&format!("{},{},{}", p.row, p.col, format_depth(p.d)));
        if let Some(l) = labels {
            out.push(',');
            out.push_str(l[i].as_str());
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses point CSV for an image of `height` x `width`.
pub fn decode_points(text: &str, height: usize, width: usize) -> Result<PointsFile> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(rec) => rec.map_err(|e| csv_err(e, 1))?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    let fields: Vec<&str> = header.iter().collect();
    let with_labels = match fields.as_slice() {
        [r, c, d] if [*r, *c, *d] == HEADER => false,
        [r, c, d, "label"] if [*r, *c, *d] == HEADER => true,
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!(
                    "bad header {:?}; expected row,col,depth_m[,label]",
                    fields.join(",")
                ),
            })
        }
    };

    let ncols = if with_labels { 4 } else { 3 };
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut seen = std::collections::HashMap::new();
    for rec in records {
        let rec = rec.map_err(|e| csv_err(e, 0))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| Error::Parse { line, message };
        if rec.len() != ncols {
            return Err(bad(format!("expected {ncols} fields, found {}", rec.len())));
        }
        let row: usize = rec[0]
            .parse()
            .map_err(|_| bad(format!("row {:?} is not a non-negative integer", &rec[0])))?;
        let col: usize = rec[1]
            .parse()
            .map_err(|_| bad(format!("col {:?} is not a non-negative integer", &rec[1])))?;
        let d: f64 = rec[2]
            .parse()
            .ok()
            .filter(|d: &f64| d.is_finite() && *d > 0.0)
            .ok_or_else(|| bad(format!("depth {:?} is not a positive number", &rec[2])))?;
        if row >= height || col >= width {
            return Err(bad(format!(
                "point ({row}, {col}) lies outside a {height}x{width} image"
            )));
        }
        if let Some(first) = seen.insert((row, col), line) {
            return Err(bad(format!(
                "duplicate coordinates ({row}, {col}); first seen on line {first}"
            )));
        }
        if with_labels {
            let label = PointLabel::parse(&rec[3])
                .ok_or_else(|| bad(format!("unknown label {:?}", &rec[3])))?;
            labels.push(((row, col), label));
        }
        samples.push((row, col, d));
    }
    let points = SparsePointSet::from_depths(samples, height, width)?;
    let labels = with_labels.then(|| {
        labels.sort_by_key(|(rc, _)| *rc);
        labels.into_iter().map(|(_, l)| l).collect()
    });
    Ok(PointsFile { points, labels })
}

fn csv_err(e: csv::Error, fallback_line: usize) -> Error {
    let line = e
        .position()
        .map_or(fallback_line, |p| p.line() as usize);
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

pub fn write_points(path: &Path, pts: &SparsePointSet, labels: Option<&[PointLabel]>) -> Result<()> {
    super::depth::write_bytes(path, encode_points(pts, labels)?.as_bytes())
}

pub fn read_points(path: &Path, height: usize, width: usize) -> Result<PointsFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(e).at_path(path))?;
    decode_points(&text, height, width).map_err(|e| e.at_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_formatting() {
        assert_eq!(format_depth(2.0), "2.00000");
        assert_eq!(format_depth(1.234), "1.23400");
        assert_eq!(format_depth(0.05), "0.0500000");
        assert_eq!(format_depth(1.2345678901), "1.2345678901");
        for v in [2.0, 1.234, 0.05, 9.87654321, 3.0000001, 0.1 + 0.2] {
            assert_eq!(format_depth(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn empty_set_round_trip() {
        let pts = SparsePointSet::new(vec![], 4, 4).unwrap();
        let text = encode_points(&pts, None).unwrap();
        assert_eq!(text, "row,col,depth_m\n");
        assert!(decode_points(&text, 4, 4).unwrap().points.is_empty());
    }

    #[test]
    fn labels_round_trip() {
        let pts = SparsePointSet::from_depths([(0, 1, 1.5), (2, 0, 3.25)], 3, 3).unwrap();
        let labels = [PointLabel::Clean, PointLabel::Shifted];
        let text = encode_points(&pts, Some(&labels)).unwrap();
        let back = decode_points(&text, 3, 3).unwrap();
        assert_eq!(back.points, pts);
        assert_eq!(back.labels.unwrap(), labels);
    }

    #[test]
    fn rejects_malformed_input() {
        let dup = "row,col,depth_m\n0,0,1.0\n1,1,2.0\n0,0,3.0\n";
        match decode_points(dup, 4, 4) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 4);
                assert!(message.contains("duplicate"));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            decode_points("r,c,d\n", 4, 4),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            decode_points("row,col,depth_m\n0,x,1.0\n", 4, 4),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(decode_points("row,col,depth_m\n0,0,-1\n", 4, 4).is_err());
        assert!(decode_points("row,col,depth_m,label\n0,0,1,weird\n", 4, 4).is_err());
        assert!(decode_points("row,col,depth_m\n9,0,1\n", 4, 4).is_err());
        assert!(decode_points("", 4, 4).is_err());
    }
}
