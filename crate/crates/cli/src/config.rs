//! Flat key=value config files with dotted section prefixes.
//!
//! One key per line (`model.beta=0.595`), `#` starts a comment, blank lines
//! are fine. Unknown keys are rejected so typos fail loudly instead of
//! silently running defaults. Derived numerical quantities (dx, dt) have no
//! keys on purpose: they are always recomputed from box size, grid count,
//! and the time-step factor.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rotor_core::runner::RunPolicy;
use rotor_core::solver::PinningSpec;
use rotor_core::sweep::SeedState;
use rotor_core::{make_numerics, ModelParams, NumericalParams};

/// Every key any command understands. Shared sections first, then one block
/// per command, so a single file can drive several commands.
const KNOWN_KEYS: &[&str] = &[
    "model.beta",
    "model.gamma",
    "model.epsilon",
    "model.d11",
    "model.d12",
    "model.d21",
    "model.d22",
    "numerics.box_size",
    "numerics.n",
    "numerics.ts",
    "pin.i0",
    "pin.j0",
    "pin.i_inc",
    "pin.j_inc",
    "pin.u_star",
    "pin.v_star",
    "policy.tol",
    "policy.max_steps",
    "policy.min_samples",
    "policy.check_every",
    "policy.min_periods",
    "policy.stationary_tol",
    "policy.decay_min_arcs",
    "policy.decay_frac",
    "out.dir",
    "simulate.seed",
    "simulate.steps",
    "sweep.beta_start",
    "sweep.beta_end",
    "sweep.dbeta",
    "sweep.seed",
    "shock.rw_snapshot",
    "shock.mrw_snapshot",
    "shock.amplitudes",
    "shock.at_step",
    "convergence.variant",
    "convergence.values",
];

#[derive(Debug)]
pub struct ConfigError(pub String);

impl Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

pub type Result<T> = std::result::Result<T, ConfigError>;

/// Parsed config file: raw key-value pairs plus the path for messages.
pub struct Config {
    path: PathBuf,
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError(format!(
                    "{}:{}: expected key=value, got {raw:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(ConfigError(format!(
                    "{}:{}: unknown key {key:?}",
                    path.display(),
                    lineno + 1
                )));
            }
            if values.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(ConfigError(format!(
                    "{}:{}: duplicate key {key:?}",
                    path.display(),
                    lineno + 1
                )));
            }
        }
        Ok(Config { path: path.to_path_buf(), values })
    }

    fn parse<T: FromStr>(&self, key: &str, raw: &str) -> Result<T>
    where
        T::Err: Display,
    {
        raw.parse().map_err(|e| {
            ConfigError(format!("{}: key {key}: cannot parse {raw:?}: {e}", self.path.display()))
        })
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            Some(raw) => self.parse(key, raw),
            None => Ok(default),
        }
    }

    pub fn get_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            Some(raw) => self.parse(key, raw).map(Some),
            None => Ok(None),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        match self.values.get(key) {
            Some(raw) => self.parse(key, raw),
            None => {
                Err(ConfigError(format!("{}: missing required key {key}", self.path.display())))
            }
        }
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Comma-separated list of floats, e.g. `shock.amplitudes=0.1,0.5,1.0`.
    pub fn get_f64_list(&self, key: &str) -> Result<Vec<f64>> {
        let Some(raw) = self.values.get(key) else {
            return Ok(Vec::new());
        };
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| self.parse(key, s))
            .collect()
    }

    pub fn out_dir(&self, flag: Option<&Path>) -> Result<PathBuf> {
        if let Some(dir) = flag {
            return Ok(dir.to_path_buf());
        }
        if let Some(dir) = self.get_str("out.dir") {
            return Ok(PathBuf::from(dir));
        }
        Err(ConfigError(format!(
            "{}: no output directory: set out.dir or pass --out",
            self.path.display()
        )))
    }

    pub fn numerics(&self) -> Result<NumericalParams> {
        let box_size: f64 = self.get("numerics.box_size", 30.0)?;
        let n: usize = self.get("numerics.n", 150)?;
        let ts: f64 = self.get("numerics.ts", 0.1)?;
        make_numerics(box_size, n, ts).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn diffusion(&self) -> Result<[[f64; 2]; 2]> {
        Ok([
            [self.get("model.d11", 1.0)?, self.get("model.d12", 0.0)?],
            [self.get("model.d21", 0.0)?, self.get("model.d22", 0.0)?],
        ])
    }

    /// Full kinetics; `model.beta` is required here, so only commands that
    /// actually start fresh dynamics demand it.
    pub fn model(&self) -> Result<ModelParams> {
        let beta: f64 = self.require("model.beta")?;
        let gamma: f64 = self.get("model.gamma", 0.5)?;
        let epsilon: f64 = self.get("model.epsilon", 0.2)?;
        ModelParams::new(beta, gamma, epsilon, self.diffusion()?)
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn pin(&self, n: usize) -> Result<PinningSpec> {
        let centered = PinningSpec::centered(n);
        let pin = PinningSpec {
            i0: self.get("pin.i0", centered.i0)?,
            j0: self.get("pin.j0", centered.j0)?,
            i_inc: self.get("pin.i_inc", centered.i_inc)?,
            j_inc: self.get("pin.j_inc", centered.j_inc)?,
            u_star: self.get("pin.u_star", centered.u_star)?,
            v_star: self.get("pin.v_star", centered.v_star)?,
        };
        pin.validate(n).map_err(|e| ConfigError(e.to_string()))?;
        Ok(pin)
    }

    pub fn policy(&self, max_steps_flag: Option<u64>) -> Result<RunPolicy> {
        let d = RunPolicy::default();
        let mut policy = RunPolicy {
            tol: self.get("policy.tol", d.tol)?,
            max_steps: self.get("policy.max_steps", d.max_steps)?,
            min_samples: self.get("policy.min_samples", d.min_samples)?,
            check_every: self.get("policy.check_every", d.check_every)?,
            min_periods: self.get("policy.min_periods", d.min_periods)?,
            stationary_tol: self.get("policy.stationary_tol", d.stationary_tol)?,
            decay_min_arcs: self.get("policy.decay_min_arcs", d.decay_min_arcs)?,
            decay_frac: self.get("policy.decay_frac", d.decay_frac)?,
        };
        if let Some(cap) = max_steps_flag {
            policy.max_steps = cap;
        }
        Ok(policy)
    }

    /// Seed for a command that accepts `fresh` or a snapshot path.
    pub fn seed(&self, key: &str) -> SeedState {
        match self.get_str(key) {
            None | Some("fresh") => SeedState::Fresh,
            Some(path) => SeedState::Snapshot(PathBuf::from(path)),
        }
    }
}
