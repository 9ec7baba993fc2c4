//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! problem.file = qp1.txt
//! schemes = implicit, semi_apd
//! gamma0 = 1
//! max_iter = 200
//! output.dir = out/qp1
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{ApdError, Result};
use crate::harness::fit::FitMode;
use crate::solvers::Scheme;

/// How the problem of an experiment is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    File(PathBuf),
    /// Planted instance with a known saddle point.
    Planted {
        n: usize,
        m: usize,
        mu: f64,
        /// Weight of an `ℓ1` term; 0 for none.
        l1: f64,
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub problem: ProblemSource,
    pub schemes: Vec<Scheme>,
    pub gamma0: f64,
    pub beta: Option<f64>,
    pub max_iter: usize,
    pub stop_tol: f64,
    pub alpha: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub jobs: usize,
    pub timing: bool,
    pub fit_window: f64,
    pub fit_mode: Option<FitMode>,
}

const KEYS: [&str; 20] = [
    "name",
    "problem.file",
    "problem.generator",
    "problem.n",
    "problem.m",
    "problem.mu",
    "problem.l1",
    "problem.seed",
    "schemes",
    "gamma0",
    "beta",
    "max_iter",
    "stop_tol",
    "step.alpha",
    "seed",
    "output.dir",
    "jobs",
    "timing",
    "fit.window",
    "fit.mode",
];

fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| ApdError::Parse { position: i + 1, message };
        let (k, v) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(err(format!("unknown key {k:?}")));
        }
        if map.insert(k.to_string(), v.to_string()).is_some() {
            return Err(err(format!("duplicate key {k:?}")));
        }
    }
    Ok(map)
}

fn value<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match map.get(key) {
        None => Ok(default),
        Some(s) => s
            .parse()
            .map_err(|_| ApdError::InvalidInput(format!("bad value {s:?} for {key}"))),
    }
}

impl ExperimentConfig {
    /// Parses `text`; relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let map = parse_pairs(text)?;
        let generator = map.get("problem.generator").map(String::as_str);
        let problem = match (map.get("problem.file"), generator) {
            (Some(f), None) => ProblemSource::File(base.join(f)),
            (None, Some("planted")) => ProblemSource::Planted {
                n: value(&map, "problem.n", 50)?,
                m: value(&map, "problem.m", 20)?,
                mu: value(&map, "problem.mu", 0.0)?,
                l1: value(&map, "problem.l1", 0.0)?,
                seed: value(&map, "problem.seed", 0)?,
            },
            (None, Some(g)) => return Err(ApdError::InvalidInput(format!("unknown generator {g:?}"))),
            (Some(_), Some(_)) => {
                return Err(ApdError::InvalidInput("give problem.file or problem.generator, not both".into()))
            }
            (None, None) => return Err(ApdError::InvalidInput("config needs problem.file or problem.generator".into())),
        };
        let schemes = match map.get("schemes") {
            None => Scheme::ALL.to_vec(),
            Some(list) => list
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| Scheme::parse(s).ok_or_else(|| ApdError::InvalidInput(format!("unknown scheme {s:?}"))))
                .collect::<Result<_>>()?,
        };
        let beta = match map.get("beta") {
            None => None,
            Some(_) => Some(value(&map, "beta", 0.0)?),
        };
        let fit_mode = match map.get("fit.mode") {
            None => None,
            Some(s) => Some(FitMode::parse(s).ok_or_else(|| ApdError::InvalidInput(format!("unknown fit mode {s:?}")))?),
        };
        let cfg = Self {
            name: map.get("name").cloned().unwrap_or_else(|| "experiment".into()),
            problem,
            schemes,
            gamma0: value(&map, "gamma0", 1.0)?,
            beta,
            max_iter: value(&map, "max_iter", 200)?,
            stop_tol: value(&map, "stop_tol", 0.0)?,
            alpha: value(&map, "step.alpha", 1.0)?,
            seed: value(&map, "seed", 0)?,
            output_dir: base.join(map.get("output.dir").map(String::as_str).unwrap_or("out")),
            jobs: value(&map, "jobs", 1)?,
            timing: value(&map, "timing", false)?,
            fit_window: value(&map, "fit.window", 0.5)?,
            fit_mode,
        };
        if cfg.jobs == 0 {
            return Err(ApdError::InvalidInput("jobs must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }
}
