//! Flat `key=value` reports, one entry per line in insertion order.

use std::fmt::Display;
use std::path::Path;

use crate::anomaly::AnomalyResult;
use crate::error::{Error, Result};
use crate::metrics::EvalReport;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        let key = key.into();
        debug_assert!(!key.contains('=') && !key.contains('\n'));
        self.entries.push((key, value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_f64(&self, key: &str) -> Option<f64> {
        self.get(key)?.parse().ok()
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn add_anomaly(&mut self, prefix: &str, res: &AnomalyResult) -> &mut Self {
        self.push(format!("{prefix}.n_points"), res.len())
            .push(format!("{prefix}.n_flagged"), res.flagged_count())
            .push(format!("{prefix}.gamma"), res.gamma)
            .push(format!("{prefix}.t_otsu"), res.t_otsu)
            .push(format!("{prefix}.t_stat"), res.t_stat)
            .push(format!("{prefix}.t"), res.t)
    }

    pub fn add_eval(&mut self, prefix: &str, ev: &EvalReport) -> &mut Self {
        self.push(format!("{prefix}.region"), ev.region.as_str())
            .push(format!("{prefix}.n_pixels"), ev.n_pixels)
            .push(format!("{prefix}.delta1"), ev.delta1)
            .push(format!("{prefix}.delta2"), ev.delta2)
            .push(format!("{prefix}.delta3"), ev.delta3)
            .push(format!("{prefix}.rel"), ev.rel)
            .push(format!("{prefix}.rmse"), ev.rmse)
            .push(format!("{prefix}.mae"), ev.mae)
            .push(format!("{prefix}.log10"), ev.log10)
            .push(format!("{prefix}.ewmae"), ev.ewmae)
    }

    pub fn encode(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }

    pub fn decode(text: &str) -> Result<Self> {
        let mut report = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: i + 1,
                message: format!("expected key=value, found {line:?}"),
            })?;
            report.entries.push((k.to_string(), v.to_string()));
        }
        Ok(report)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        super::depth::write_bytes(path, self.encode().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(e).at_path(path))?;
        Self::decode(&text).map_err(|e| e.at_path(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_is_order_stable() {
        let mut r = Report::new();
        r.push("b", 1).push("a", f64::INFINITY).push("c", 0.1 + 0.2);
        let text = r.encode();
        assert_eq!(text, "b=1\na=inf\nc=0.30000000000000004\n");
        let back = Report::decode(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.get_f64("a"), Some(f64::INFINITY));
        assert!(Report::decode("novalue\n").is_err());
    }
}
