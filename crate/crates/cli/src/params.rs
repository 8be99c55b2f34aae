//! Flag parsing and JSON config merging.
//!
//! Every subcommand takes `--config FILE`, a JSON object whose keys are the
//! subcommand's long flags in snake case. Flags given on the command line
//! override the file; unknown keys are rejected.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use hmcf::surface::snapshot;
use hmcf::{perturbed_sphere, Grid, Mode, ModelSpace, RadialSurface};

/// Problems with the invocation itself, mapped to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(UsageError(msg.into()))
}

/// Overlay the set flags onto the config file and deserialize the result.
pub fn resolve<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T> {
    let mut merged = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            match serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))? {
                Value::Object(m) => m,
                _ => return Err(usage(format!("config {} must be a JSON object", path.display()))),
            }
        }
        None => Map::new(),
    };
    if let Value::Object(set) = serde_json::to_value(flags)? {
        merged.extend(set.into_iter().filter(|(_, v)| !v.is_null()));
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| usage(format!("invalid configuration: {e}")))
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| usage(format!("bad number {x:?} in {s:?}: {e}"))))
        .collect()
}

/// `NTHETAxNPHI`, e.g. `64x128`.
pub fn parse_grid(s: &str) -> Result<[usize; 2]> {
    let (a, b) = s.split_once('x').ok_or_else(|| usage(format!("grid must look like 64x128, got {s:?}")))?;
    let n = |x: &str| x.trim().parse::<usize>().map_err(|e| usage(format!("bad grid size {x:?}: {e}")));
    Ok([n(a)?, n(b)?])
}

/// `l,m,amplitude` triples separated by `;`.
pub fn parse_modes(s: &str) -> Result<Vec<Mode>> {
    s.split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let parts: Vec<&str> = t.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                bail!(UsageError(format!("mode must be l,m,amplitude, got {t:?}")));
            }
            let bad = |e: &dyn std::fmt::Display| usage(format!("bad mode {t:?}: {e}"));
            Ok(Mode::new(
                parts[0].parse().map_err(|e| bad(&e))?,
                parts[1].parse().map_err(|e| bad(&e))?,
                parts[2].parse().map_err(|e| bad(&e))?,
            ))
        })
        .collect()
}

/// Perturbed sphere from `a, rho, modes, grid`, or a snapshot from `input`.
pub struct SurfaceSource<'a> {
    pub a: Option<f64>,
    pub rho: Option<f64>,
    pub modes: Option<&'a str>,
    pub grid: Option<&'a str>,
    pub input: Option<&'a PathBuf>,
    pub default_grid: [usize; 2],
}

impl SurfaceSource<'_> {
    pub fn build(&self) -> Result<RadialSurface> {
        if let Some(path) = self.input {
            if self.a.is_some() || self.rho.is_some() || self.modes.is_some() || self.grid.is_some() {
                return Err(usage("input snapshot cannot be combined with a, rho, modes or grid"));
            }
            return snapshot::load(path).with_context(|| format!("loading {}", path.display()));
        }
        let space = ModelSpace::new(self.a.unwrap_or(0.0))?;
        let [nt, np] = match self.grid {
            Some(g) => parse_grid(g)?,
            None => self.default_grid,
        };
        let grid = Arc::new(Grid::legendre(nt, np)?);
        let modes = match self.modes {
            Some(m) => parse_modes(m)?,
            None => Vec::new(),
        };
        Ok(perturbed_sphere(space, space.origin(), self.rho.unwrap_or(1.0), &modes, grid)?)
    }
}
