//! Experiment configuration: INI-style `key = value` file with `[section]` headers.

use std::fmt;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Halfplane,
    Block,
    Temperleyan,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub delta: f64,
    /// macroscopic sizes; the lattice size is size/δ
    pub half_width: f64,
    pub height: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: String,
    pub domain: DomainSpec,
    /// macroscopic coordinates
    pub points: Vec<[f64; 2]>,
    /// Im v for the half-plane determinant commands (the half-plane is infinite, so only Im v/δ matters)
    pub det_height: f64,
    pub eps: i32,
    pub s_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    pub deltas: Vec<f64>,
    pub depths: Vec<f64>,
    pub separations: Vec<i32>,
    pub n_samples: usize,
    pub seed: u64,
    pub law: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            command: String::new(),
            domain: DomainSpec { kind: DomainKind::Halfplane, delta: 1.0 / 64.0, half_width: 1.0, height: 1.0, width: 1.0 },
            points: vec![[0.0, 0.25]],
            det_height: 1.0,
            eps: 1,
            s_grid: vec![0.05, 0.1, 0.2],
            t_grid: vec![0.3, 1.0],
            lambda_grid: vec![0.5, 1.0, 2.0],
            deltas: vec![1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0, 1.0 / 512.0],
            depths: (1..=8).map(|k| 10.0 * k as f64).collect(),
            separations: vec![4, 8, 16, 32, 64],
            n_samples: 2000,
            seed: 0,
            law: "calibrated".into(),
        }
    }
}

impl ExperimentConfig {
    /// SHA-256 of the canonical JSON form; thread count and output directory are not part of it.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("serializable");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// A real number, optionally written as a fraction p/q.
pub fn parse_real(s: &str) -> Result<f64, String> {
    let s = s.trim();
    let v = match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
            let q: f64 = q.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
            if q == 0.0 {
                return Err(format!("zero denominator in {s:?}"));
            }
            p / q
        }
        None => s.parse().map_err(|_| format!("not a number: {s:?}"))?,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not finite: {s:?}"))
    }
}

pub fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(item).collect()
}

fn parse_int<T: std::str::FromStr>(s: &str) -> Result<T, String> {
    s.trim().parse().map_err(|_| format!("not an integer: {s:?}"))
}

fn parse_points(s: &str) -> Result<Vec<[f64; 2]>, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let xy = parse_list(p, parse_real)?;
            match xy.as_slice() {
                [x, y] => Ok([*x, *y]),
                _ => Err(format!("a point needs two coordinates, got {p:?}")),
            }
        })
        .collect()
}

/// Apply `key = value` lines to `cfg`. Comments start with `#` or `;`.
pub fn apply_config_text(cfg: &mut ExperimentConfig, text: &str) -> Result<(), ConfigError> {
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| ConfigError { line, message };
        let l = raw.trim();
        if l.is_empty() || l.starts_with('#') || l.starts_with(';') {
            continue;
        }
        if let Some(rest) = l.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| err(format!("unterminated section header {l:?}")))?;
            section = name.trim().to_string();
            if !["domain", "points", "grids", "sampling", "cle"].contains(&section.as_str()) {
                return Err(err(format!("unknown section [{section}]")));
            }
            continue;
        }
        let (key, value) = l.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got {l:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        let r: Result<(), String> = match (section.as_str(), key) {
            ("domain", "kind") => match value {
                "halfplane" => Ok(cfg.domain.kind = DomainKind::Halfplane),
                "block" => Ok(cfg.domain.kind = DomainKind::Block),
                "temperleyan" => Ok(cfg.domain.kind = DomainKind::Temperleyan),
                other => Err(format!("unknown domain kind {other:?}")),
            },
            ("domain", "delta") => parse_real(value).and_then(|v| if v > 0.0 && v <= 1.0 { Ok(cfg.domain.delta = v) } else { Err(format!("delta {v} outside (0, 1]")) }),
            ("domain", "half_width") => parse_real(value).map(|v| cfg.domain.half_width = v),
            ("domain", "height") => parse_real(value).map(|v| cfg.domain.height = v),
            ("domain", "width") => parse_real(value).map(|v| cfg.domain.width = v),
            ("points", "points") => parse_points(value).map(|v| cfg.points = v),
            ("points", "det_height") => parse_real(value).map(|v| cfg.det_height = v),
            ("points", "eps") => parse_int(value).map(|v| cfg.eps = v),
            ("grids", "s") => parse_list(value, parse_real).map(|v| cfg.s_grid = v),
            ("grids", "t") => parse_list(value, parse_real).map(|v| cfg.t_grid = v),
            ("grids", "lambda") => parse_list(value, parse_real).map(|v| cfg.lambda_grid = v),
            ("grids", "deltas") => parse_list(value, parse_real).map(|v| cfg.deltas = v),
            ("grids", "depths") => parse_list(value, parse_real).map(|v| cfg.depths = v),
            ("grids", "separations") => parse_list(value, parse_int).map(|v| cfg.separations = v),
            ("sampling", "n") => parse_int(value).map(|v| cfg.n_samples = v),
            ("sampling", "seed") => parse_int(value).map(|v| cfg.seed = v),
            ("cle", "law") => Ok(cfg.law = value.to_string()),
            ("", _) => Err(format!("key {key:?} outside any section")),
            (s, k) => Err(format!("unknown key {k:?} in [{s}]")),
        };
        r.map_err(err)?;
    }
    Ok(())
}
