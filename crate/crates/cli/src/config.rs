//! Options files and flag parsing helpers.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use semismooth::bundle::SolveOptions;
use semismooth::sampling::DEFAULT_SEED;

/// Contents of a `--config` file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub solver: Option<SolveOptions>,
}

impl ConfigFile {
    /// Reads JSON when the extension is `.json`, TOML otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let cfg = if is_json {
            serde_json::from_str(&text).with_context(|| format!("parsing JSON config {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing TOML config {}", path.display()))?
        };
        Ok(cfg)
    }
}

/// Flag values that override the config file.
#[derive(Debug, Clone, Default)]
pub struct SolveOverrides {
    pub tol: Option<f64>,
    pub max_iterations: Option<usize>,
    pub max_oracle_calls: Option<usize>,
    pub seed: Option<u64>,
}

/// Flags, then file, then defaults.
pub fn resolve(file: Option<&ConfigFile>, flags: &SolveOverrides) -> (SolveOptions, u64) {
    let mut opts = file.and_then(|f| f.solver.clone()).unwrap_or_default();
    if let Some(t) = flags.tol {
        opts.tol = t;
    }
    if let Some(m) = flags.max_iterations {
        opts.max_iterations = m;
    }
    if let Some(m) = flags.max_oracle_calls {
        opts.max_oracle_calls = m;
    }
    let seed = flags
        .seed
        .or_else(|| file.and_then(|f| f.seed))
        .unwrap_or(DEFAULT_SEED);
    (opts, seed)
}

/// Comma-separated floats, e.g. `5,-1`.
pub fn parse_vector(text: &str) -> Result<Vec<f64>> {
    let out: Result<Vec<f64>> = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .with_context(|| format!("'{s}' is not a number"))
        })
        .collect();
    let out = out?;
    if out.iter().any(|v| !v.is_finite()) {
        bail!("vector '{text}' has non-finite entries");
    }
    Ok(out)
}

/// Seed in decimal or `0x` hexadecimal.
pub fn parse_seed(text: &str) -> Result<u64> {
    let t = text.trim();
    let parsed = match t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => t.parse(),
    };
    parsed.with_context(|| format!("invalid seed '{text}'"))
}

/// `lo,hi` for every coordinate, or `lo1,hi1,…,lon,hin`.
pub fn parse_box(text: &str, dim: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let v = parse_vector(text)?;
    let (lo, hi): (Vec<f64>, Vec<f64>) = if v.len() == 2 {
        (vec![v[0]; dim], vec![v[1]; dim])
    } else if v.len() == 2 * dim {
        v.chunks(2).map(|c| (c[0], c[1])).unzip()
    } else {
        bail!("box needs 2 or {} numbers, got {}", 2 * dim, v.len());
    };
    if lo.iter().zip(&hi).any(|(l, h)| l >= h) {
        bail!("box has an empty side");
    }
    Ok((lo, hi))
}
