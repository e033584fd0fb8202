//! Named IOI parameter tables and their text format.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{DistSpec, Family};
use crate::error::{Error, Result};

pub const DEFAULT_PARAMS_TEXT: &str = include_str!("defaults.cfg");
const FORMAT_TAG: &str = "# ioi-params v";
const FORMAT_VERSION: u32 = 1;
pub const REQUIRED: [&str; 7] = [
    "chord",
    "trill",
    "short_app",
    "arpeggio",
    "skip",
    "insertion",
    "prediction_noise",
];

/// Ordered table of named distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IoiParams {
    pub entries: Vec<(String, DistSpec)>,
}

impl IoiParams {
    pub fn get(&self, name: &str) -> Option<&DistSpec> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    /// Inserts or replaces an entry.
    pub fn set(&mut self, name: &str, spec: DistSpec) {
        match self.entries.iter_mut().find(|(n, _)| n == name) {
            Some(e) => e.1 = spec,
            None => self.entries.push((name.to_string(), spec)),
        }
    }

    pub fn require(&self, name: &str) -> Result<DistSpec> {
        self.get(name)
            .copied()
            .ok_or_else(|| Error::input(format!("IOI parameter `{name}` missing")))
    }

    /// Overlays `other` onto a copy of `self`.
    pub fn merged(&self, other: &IoiParams) -> IoiParams {
        let mut out = self.clone();
        for (n, d) in &other.entries {
            out.set(n, *d);
        }
        out
    }
}

pub fn default_params() -> IoiParams {
    parse_params(DEFAULT_PARAMS_TEXT).expect("bundled IOI parameters parse")
}

pub fn parse_params(text: &str) -> Result<IoiParams> {
    let mut entries: Vec<(String, DistSpec)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let trimmed = raw.trim();
        if let Some(v) = trimmed.strip_prefix(FORMAT_TAG) {
            let v: u32 = v
                .trim()
                .parse()
                .map_err(|_| Error::parse(line_no, "bad format version"))?;
            if v != FORMAT_VERSION {
                return Err(Error::parse(line_no, format!("unsupported format version {v}")));
            }
            continue;
        }
        let line = trimmed.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if !(4..=5).contains(&f.len()) {
            return Err(Error::parse(line_no, "expected `name family location width [floor]`"));
        }
        let family = Family::from_name(f[1])
            .ok_or_else(|| Error::parse(line_no, format!("unknown family `{}`", f[1])))?;
        let num = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::parse(line_no, format!("bad number `{s}`")))
        };
        let floor = f.get(4).map(|s| num(s)).transpose()?;
        let spec = DistSpec::with_floor(family, num(f[2])?, num(f[3])?, floor)
            .map_err(|e| Error::parse(line_no, e.to_string()))?;
        if entries.iter().any(|(name, _)| name == f[0]) {
            return Err(Error::parse(line_no, format!("duplicate entry `{}`", f[0])));
        }
        entries.push((f[0].to_string(), spec));
    }
    Ok(IoiParams { entries })
}

pub fn write_params(params: &IoiParams) -> String {
    let mut out = format!("{FORMAT_TAG}{FORMAT_VERSION}\n# name family location width [floor]\n");
    for (name, d) in &params.entries {
        let _ = write!(out, "{name} {} {} {}", d.family.name(), d.location, d.width);
        if let Some(f) = d.floor {
            let _ = write!(out, " {f}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_have_required_entries() {
        let p = default_params();
        for name in REQUIRED {
            assert!(p.get(name).is_some(), "{name}");
        }
        let noise = p.get("prediction_noise").unwrap();
        assert_eq!((noise.family, noise.location, noise.width), (Family::Cauchy, 0.0, 0.0264));
        assert_eq!(p.get("skip").unwrap().floor, Some(0.3));
        assert_eq!(p.get("chord").unwrap().family, Family::HalfExponential);
    }

    #[test]
    fn round_trip() {
        let p = default_params();
        assert_eq!(parse_params(&write_params(&p)).unwrap(), p);
    }

    #[test]
    fn rejects_bad_lines() {
        assert!(parse_params("x gaussian 0").is_err());
        assert!(parse_params("x gamma 0 1").is_err());
        assert!(parse_params("x gaussian 0 -1").is_err());
        assert!(parse_params("# ioi-params v9\n").is_err());
    }
}
