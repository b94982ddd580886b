//! Run configuration: versioned defaults, then an optional flat
//! `key = value` config file, then command-line flags, in increasing
//! precedence. Serializing a parsed config and re-parsing it yields an
//! identical config.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

use fnlw_core::grid::GridSpec;
use fnlw_core::wick::WickContext;

pub const DEFAULTS: &str = include_str!("../defaults.cfg");

#[derive(Debug, Clone)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}
impl std::error::Error for ConfigError {}

/// Flat key/value view of a config source.
pub fn parse_flat(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("line {}: expected `key = value`", lineno + 1)))?;
        out.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(out)
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub nonlin: u32,
    pub cutoff: u32,
    pub grid_size: u32,
    pub seed: u64,
    pub samples: usize,
    pub t_final: f64,
    pub dt: f64,
    pub dt_quad: f64,
    /// Execution detail, not provenance: results are identical at any
    /// worker count, so reports omit it.
    #[serde(skip_serializing)]
    pub workers: usize,
    pub beta: f64,
    pub burnin: usize,
    pub thin: usize,
    pub wick_degree_l: u32,
    pub product_k1: u32,
    pub product_k: u32,
    pub product_k2: u32,
    pub strichartz_p: f64,
    pub strichartz_q: f64,
    pub sobolev_s: f64,
    pub lambda_grid: Vec<f64>,
    pub window_lo: u32,
    pub window_edge_margin: u32,
    pub tol_exact: f64,
    pub tol_bound: f64,
    pub tol_product: f64,
    pub defaults_version: u32,
    pub quick: bool,
}

impl RunConfig {
    pub fn grid(&self) -> Result<GridSpec, ConfigError> {
        GridSpec::new(self.cutoff, self.grid_size, self.alpha, self.nonlin)
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn wick_context(&self) -> WickContext {
        WickContext::new(self.alpha, self.nonlin, self.cutoff)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid()?;
        if self.dt <= 0.0 || self.dt_quad <= 0.0 {
            return Err(ConfigError("dt and dt-quad must be positive".into()));
        }
        if self.t_final < 0.0 {
            return Err(ConfigError("T must be nonnegative".into()));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(ConfigError("beta must lie in (0, 1]".into()));
        }
        Ok(())
    }

    /// Flat `key = value` rendering; `parse` of this text reproduces the
    /// config exactly.
    pub fn to_flat(&self) -> String {
        let mut s = String::new();
        let mut push = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        push("alpha", format!("{:?}", self.alpha));
        push("m", self.nonlin.to_string());
        push("n", self.cutoff.to_string());
        push("grid", self.grid_size.to_string());
        push("seed", self.seed.to_string());
        push("samples", self.samples.to_string());
        push("t", format!("{:?}", self.t_final));
        push("dt", format!("{:?}", self.dt));
        push("dt_quad", format!("{:?}", self.dt_quad));
        push("workers", self.workers.to_string());
        push("beta", format!("{:?}", self.beta));
        push("burnin", self.burnin.to_string());
        push("thin", self.thin.to_string());
        push("l", self.wick_degree_l.to_string());
        push("k1", self.product_k1.to_string());
        push("k", self.product_k.to_string());
        push("k2", self.product_k2.to_string());
        push("p", format!("{:?}", self.strichartz_p));
        push("q", format!("{:?}", self.strichartz_q));
        push("s", format!("{:?}", self.sobolev_s));
        push(
            "lambda_grid",
            self.lambda_grid.iter().map(|v| format!("{v:?}")).collect::<Vec<_>>().join(","),
        );
        push("window_lo", self.window_lo.to_string());
        push("window_edge_margin", self.window_edge_margin.to_string());
        push("tol_exact", format!("{:?}", self.tol_exact));
        push("tol_bound", format!("{:?}", self.tol_bound));
        push("tol_product", format!("{:?}", self.tol_product));
        push("defaults_version", self.defaults_version.to_string());
        push("quick", self.quick.to_string());
        s
    }
}

/// Unresolved overlay of option values from one source.
#[derive(Debug, Default, Clone)]
pub struct ConfigOverlay {
    pub values: BTreeMap<String, String>,
}

impl ConfigOverlay {
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        Ok(ConfigOverlay { values: parse_flat(text)? })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn merge(&mut self, higher: &ConfigOverlay) {
        for (k, v) in &higher.values {
            self.values.insert(k.clone(), v.clone());
        }
    }
}

fn get<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, ConfigError> {
    match map.get(key) {
        None => Ok(default),
        Some(raw) => raw
            .parse::<T>()
            .map_err(|_| ConfigError(format!("invalid value `{raw}` for key `{key}`"))),
    }
}

/// Resolve: defaults file, then the merged overlays.
pub fn resolve(overlay: &ConfigOverlay) -> Result<RunConfig, ConfigError> {
    let mut merged = parse_flat(DEFAULTS)?;
    for (k, v) in &overlay.values {
        merged.insert(k.clone(), v.clone());
    }
    let alpha: f64 = get(&merged, "alpha", 0.9)?;
    let nonlin: u32 = get(&merged, "m", 1)?;
    let cutoff: u32 = get(&merged, "n", 8)?;
    let grid_size: u32 =
        get(&merged, "grid", GridSpec::min_grid_size(cutoff, nonlin.max(1)))?;
    let dt: f64 = get(&merged, "dt", 1e-3)?;
    let dt_quad_factor: f64 = get(&merged, "dt_quad_factor", 1.0)?;
    let dt_quad: f64 = get(&merged, "dt_quad", dt * dt_quad_factor)?;
    let lambda_raw: String = get(&merged, "lambda_grid", String::new())?;
    let lambda_grid: Vec<f64> = if lambda_raw.trim().is_empty() {
        vec![2.0, 5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 320.0]
    } else {
        lambda_raw
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| ConfigError(format!("invalid lambda entry `{v}`")))
            })
            .collect::<Result<_, _>>()?
    };
    let config = RunConfig {
        alpha,
        nonlin,
        cutoff,
        grid_size,
        seed: get(&merged, "seed", 0)?,
        samples: get(&merged, "samples", 1000)?,
        t_final: get(&merged, "t", 1.0)?,
        dt,
        dt_quad,
        workers: get(&merged, "workers", 0)?,
        beta: get(&merged, "beta", 0.2)?,
        burnin: get(&merged, "burnin", 1000)?,
        thin: get(&merged, "thin", 0)?,
        wick_degree_l: get(&merged, "l", 0)?,
        product_k1: get(&merged, "k1", 1)?,
        product_k: get(&merged, "k", 2 * nonlin + 1)?,
        product_k2: get(&merged, "k2", 1)?,
        strichartz_p: get(&merged, "p", 4.0)?,
        strichartz_q: get(&merged, "q", 4.0)?,
        sobolev_s: get(&merged, "s", 0.7)?,
        lambda_grid,
        window_lo: get(&merged, "window_lo", 3)?,
        window_edge_margin: get(&merged, "window_edge_margin", 2)?,
        tol_exact: get(&merged, "tol_exact", 0.1)?,
        tol_bound: get(&merged, "tol_bound", 0.15)?,
        tol_product: get(&merged, "tol_product", 0.2)?,
        defaults_version: get(&merged, "defaults_version", 1)?,
        quick: get(&merged, "quick", false)?,
    };
    config.validate()?;
    Ok(config)
}
