// SPDX-License-Identifier: Apache-2.0

//! Run configuration: a flat `key=value` file, overridden key by key from the
//! command line. The cache root defaults to `$LDERIV_CACHE_DIR`.

use crate::error::{Error, Result};
use crate::lfunc::EngineConfig;
use crate::zeros::{NuPolicy, RealScan};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const CACHE_ENV: &str = "LDERIV_CACHE_DIR";

/// Tag written into every output header and cache entry. Bump the suffix when
/// a change alters cached values.
pub const CODE_VERSION: &str = concat!("lderiv/", env!("CARGO_PKG_VERSION"), "+c1");

/// Settings of one run. Fields that cannot change any computed value (paths,
/// thread count, cache checking) are left out of the serialized form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub x_list: Vec<f64>,
    pub nu: NuPolicy,
    pub sample_size: usize,
    pub seed: u64,
    pub eps_target: f64,
    pub z: f64,
    pub mc_samples: usize,
    pub moment_y: u64,
    pub moment_k: u32,
    pub grid_step: f64,
    pub refine_tol: f64,
    pub near_split: bool,
    pub t_max: f64,
    pub fekete_grid: usize,
    #[serde(skip)]
    pub threads: Option<usize>,
    #[serde(skip)]
    pub out_dir: PathBuf,
    #[serde(skip)]
    pub cache_dir: Option<PathBuf>,
    #[serde(skip)]
    pub verify_cache: bool,
    #[serde(skip)]
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            x_list: vec![1e3, 1e4, 1e5],
            nu: NuPolicy::Auto,
            sample_size: 200,
            seed: 2024,
            eps_target: EngineConfig::default().eps_target,
            z: 0.9,
            mc_samples: 100_000,
            moment_y: 10,
            moment_k: 3,
            grid_step: RealScan::default().grid_step,
            refine_tol: RealScan::default().refine_tol,
            near_split: false,
            t_max: 50.0,
            fekete_grid: 4096,
            threads: None,
            out_dir: PathBuf::from("out"),
            cache_dir: std::env::var_os(CACHE_ENV).map(PathBuf::from),
            verify_cache: false,
            strict: false,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Usage(format!("bad value for {key}: {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Usage(format!("bad value for {key}: {value:?}"))),
    }
}

impl RunConfig {
    /// Set one key. Keys use underscores; hyphens are accepted too.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let key = key.trim().replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "x_list" | "x" => {
                let xs = v.split(',').map(|t| parse::<f64>("x_list", t)).collect::<Result<Vec<_>>>()?;
                if xs.is_empty() || xs.iter().any(|x| !(*x >= 2.0 && x.is_finite())) {
                    return Err(Error::Usage(format!("x_list needs finite values >= 2, got {v:?}")));
                }
                self.x_list = xs;
            }
            "nu" => self.nu = NuPolicy::parse(v).map_err(|e| Error::Usage(e.to_string()))?,
            "sample_size" | "sample" => self.sample_size = parse(&key, v)?,
            "seed" => self.seed = parse(&key, v)?,
            "eps_target" => self.eps_target = parse(&key, v)?,
            "z" => self.z = parse(&key, v)?,
            "mc_samples" => self.mc_samples = parse(&key, v)?,
            "moment_y" => self.moment_y = parse(&key, v)?,
            "moment_k" => self.moment_k = parse(&key, v)?,
            "grid_step" => self.grid_step = parse(&key, v)?,
            "refine_tol" => self.refine_tol = parse(&key, v)?,
            "near_split" => self.near_split = parse_bool(&key, v)?,
            "t_max" => self.t_max = parse(&key, v)?,
            "fekete_grid" => self.fekete_grid = parse(&key, v)?,
            "threads" => self.threads = Some(parse(&key, v)?),
            "out_dir" | "out" => self.out_dir = PathBuf::from(v),
            "cache_dir" => self.cache_dir = Some(PathBuf::from(v)),
            "verify_cache" => self.verify_cache = parse_bool(&key, v)?,
            "strict" => self.strict = parse_bool(&key, v)?,
            _ => return Err(Error::Usage(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// Apply a `key=value` text; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Usage(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
            self.apply(k, v)?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn engine(&self) -> EngineConfig {
        EngineConfig { eps_target: self.eps_target, ..EngineConfig::default() }
    }

    pub fn scan(&self) -> RealScan {
        RealScan { grid_step: self.grid_step, refine_tol: self.refine_tol }
    }

    /// `# <version> <config json>`: the first line of every output file.
    pub fn provenance(&self, experiment: &str) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("# {CODE_VERSION} {experiment} {json}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_overrides_defaults() {
        let mut c = RunConfig::default();
        c.apply_text("# sweep\nx_list = 1000, 2000\nnu=hyp\nseed=7 # fixed\nnear-split=true\n").unwrap();
        assert_eq!(c.x_list, vec![1000.0, 2000.0]);
        assert_eq!(c.nu, NuPolicy::Hyp);
        assert_eq!(c.seed, 7);
        assert!(c.near_split);
        c.apply("nu", "1.5").unwrap();
        assert_eq!(c.nu, NuPolicy::Explicit(1.5));
    }

    #[test]
    fn malformed_lines_are_usage_errors() {
        let mut c = RunConfig::default();
        assert!(matches!(c.apply_text("seed 7"), Err(Error::Usage(_))));
        assert!(matches!(c.apply("colour", "red"), Err(Error::Usage(_))));
        assert!(matches!(c.apply("seed", "-1"), Err(Error::Usage(_))));
        assert!(matches!(c.apply("x_list", "1"), Err(Error::Usage(_))));
    }

    #[test]
    fn provenance_ignores_threads_and_paths() {
        let mut a = RunConfig::default();
        let mut b = RunConfig::default();
        a.threads = Some(1);
        b.threads = Some(8);
        b.out_dir = PathBuf::from("elsewhere");
        assert_eq!(a.provenance("x"), b.provenance("x"));
        b.seed += 1;
        assert_ne!(a.provenance("x"), b.provenance("x"));
    }
}
