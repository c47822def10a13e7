//! Plain-text `key = value` documents with a version header line and `#`
//! comments, shared by the plan, scenario and config formats.

use crate::error::{parse_err, Result};

#[derive(Debug, Clone, Default)]
pub struct KvDoc {
    /// `(line number, key, value)` in document order; keys may repeat.
    pub entries: Vec<(usize, String, String)>,
}

impl KvDoc {
    /// Parses a document. When `header` is given, the first meaningful line
    /// must equal it.
    pub fn parse(text: &str, header: Option<&str>) -> Result<Self> {
        let mut entries = Vec::new();
        let mut want_header = header;
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(k) => &raw[..k],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = want_header.take() {
                if line != h {
                    return Err(parse_err(i + 1, format!("expected header {h:?}, got {line:?}")));
                }
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| parse_err(i + 1, format!("expected key=value, got {line:?}")))?;
            entries.push((i + 1, k.trim().to_string(), v.trim().to_string()));
        }
        if let Some(h) = want_header {
            return Err(parse_err(1, format!("missing header {h:?}")));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<(usize, &str)> {
        self.entries
            .iter()
            .rev()
            .find(|(_, k, _)| k == key)
            .map(|(l, _, v)| (*l, v.as_str()))
    }

    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = (usize, &'a str)> + 'a {
        self.entries
            .iter()
            .filter(move |(_, k, _)| k == key)
            .map(|(l, _, v)| (*l, v.as_str()))
    }

    pub fn require(&self, key: &str) -> Result<(usize, &str)> {
        self.get(key)
            .ok_or_else(|| parse_err(0, format!("missing required key {key:?}")))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        let (line, v) = self.require(key)?;
        parse_f64(line, v)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            Some((line, v)) => parse_f64(line, v),
            None => Ok(default),
        }
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>> {
        let (line, v) = self.require(key)?;
        parse_list(line, v)
    }
}

pub fn parse_f64(line: usize, v: &str) -> Result<f64> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| parse_err(line, format!("bad number {v:?}")))
}

pub fn parse_list(line: usize, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|t| parse_f64(line, t)).collect()
}

/// Formats a float so that parsing it back yields the same bits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}
