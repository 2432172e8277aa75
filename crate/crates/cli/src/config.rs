//! Flat `key = value` experiment configuration.
//!
//! Blank lines and lines starting with `#` are ignored. Command-line flags
//! override file values. Unknown keys are rejected and `seed` is mandatory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;
use tomochaos_core::dynamics::{CHAOTIC_LAMBDA, DEFAULT_ALPHA, DEFAULT_DELTA_LAMBDA};
use tomochaos_core::rmt::EnsembleKind;
use tomochaos_core::tomography::DEFAULT_NOISE_SPREAD;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("unknown configuration key `{key}`{}", at.as_ref().map(|(p, l)| format!(" at {p}:{l}")).unwrap_or_default())]
    UnknownKey { key: String, at: Option<(String, usize)> },
    #[error("missing required key `seed`")]
    MissingSeed,
    #[error("missing subcommand")]
    MissingSubcommand,
    #[error("invalid value for `{key}`: {msg}")]
    Invalid { key: String, msg: String },
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Tomography,
    Rmt,
    Otoc,
    Echo,
    Krylov,
    Sweep,
}

impl Subcommand {
    pub const ALL: [Subcommand; 6] = [
        Subcommand::Tomography,
        Subcommand::Rmt,
        Subcommand::Otoc,
        Subcommand::Echo,
        Subcommand::Krylov,
        Subcommand::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Tomography => "tomography",
            Subcommand::Rmt => "rmt",
            Subcommand::Otoc => "otoc",
            Subcommand::Echo => "echo",
            Subcommand::Krylov => "krylov",
            Subcommand::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObservableKind {
    Jx,
    Jy,
    Jz,
    RandomHermitian,
}

impl ObservableKind {
    pub fn name(self) -> &'static str {
        match self {
            ObservableKind::Jx => "Jx",
            ObservableKind::Jy => "Jy",
            ObservableKind::Jz => "Jz",
            ObservableKind::RandomHermitian => "random-hermitian",
        }
    }
}

impl FromStr for ObservableKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "Jx" | "jx" => Ok(ObservableKind::Jx),
            "Jy" | "jy" => Ok(ObservableKind::Jy),
            "Jz" | "jz" => Ok(ObservableKind::Jz),
            "random-hermitian" | "random" => Ok(ObservableKind::RandomHermitian),
            _ => Err(format!("expected one of Jx, Jy, Jz, random-hermitian, got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub subcommand: Subcommand,
    pub j: f64,
    pub lambda: Vec<f64>,
    pub alpha: f64,
    pub n_steps: usize,
    pub noise_spread: f64,
    /// Tikhonov constant; `None` means relative to the Gram trace.
    pub epsilon: Option<f64>,
    pub seed: u64,
    pub n_states: usize,
    pub observable: ObservableKind,
    pub output_dir: PathBuf,
    /// Random-matrix ensemble for `rmt`.
    pub ensemble: EnsembleKind,
    /// Matrix dimension for `rmt`.
    pub dim: usize,
    /// Ensemble members for `rmt`.
    pub samples: usize,
    /// Histogram bins for `rmt`.
    pub bins: usize,
    /// Perturbation `δλ` for `echo` and `sweep`.
    pub delta: f64,
    /// Metric evaluation stride for `tomography`; the final step is always included.
    pub stride: usize,
}

/// Canonical key names, in the order they are echoed.
pub const KEYS: [&str; 17] = [
    "subcommand",
    "j",
    "lambda",
    "alpha",
    "n_steps",
    "noise_spread",
    "epsilon",
    "seed",
    "n_states",
    "observable",
    "output_dir",
    "ensemble",
    "dim",
    "samples",
    "bins",
    "delta",
    "stride",
];

/// Maps flag-style aliases onto canonical keys.
pub fn canonical_key(key: &str) -> Option<&'static str> {
    let k = match key {
        "steps" => "n_steps",
        "noise" => "noise_spread",
        "states" => "n_states",
        "out" => "output_dir",
        other => other,
    };
    KEYS.iter().copied().find(|&c| c == k)
}

/// Key/value pairs with the place each value came from.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    values: BTreeMap<&'static str, String>,
}

impl RawConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((k, v)) = trimmed.split_once('=') else {
                return Err(ConfigError::Parse {
                    path: path.to_string(),
                    line: line_no,
                    msg: format!("expected `key = value`, got `{trimmed}`"),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(ConfigError::Parse {
                    path: path.to_string(),
                    line: line_no,
                    msg: "empty key or value".into(),
                });
            }
            let key = canonical_key(k).ok_or_else(|| ConfigError::UnknownKey {
                key: k.to_string(),
                at: Some((path.to_string(), line_no)),
            })?;
            raw.values.insert(key, v.to_string());
        }
        Ok(raw)
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        let key = canonical_key(key).ok_or_else(|| ConfigError::UnknownKey {
            key: key.to_string(),
            at: None,
        })?;
        self.values.insert(key, value.into());
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e: T::Err| ConfigError::Invalid {
                key: key.to_string(),
                msg: format!("`{v}`: {e}"),
            }),
        }
    }

    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let invalid = |key: &str, msg: String| ConfigError::Invalid {
            key: key.to_string(),
            msg,
        };
        let subcommand = match self.get("subcommand") {
            Some(s) => s.parse().map_err(|e| invalid("subcommand", e))?,
            None => return Err(ConfigError::MissingSubcommand),
        };
        let seed: u64 = match self.get("seed") {
            None => return Err(ConfigError::MissingSeed),
            Some(v) => v.parse().map_err(|e| invalid("seed", format!("`{v}`: {e}")))?,
        };
        let lambda = match self.get("lambda") {
            None => vec![CHAOTIC_LAMBDA],
            Some(v) => v
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|e| invalid("lambda", format!("`{s}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?,
        };
        let epsilon = match self.get("epsilon") {
            None => None,
            Some(v) => Some(v.parse::<f64>().map_err(|e| invalid("epsilon", format!("`{v}`: {e}")))?),
        };
        let cfg = ExperimentConfig {
            subcommand,
            j: self.parsed("j", 10.0)?,
            lambda,
            alpha: self.parsed("alpha", DEFAULT_ALPHA)?,
            n_steps: self.parsed("n_steps", 100)?,
            noise_spread: self.parsed("noise_spread", DEFAULT_NOISE_SPREAD)?,
            epsilon,
            seed,
            n_states: self.parsed("n_states", 20)?,
            observable: self.parsed("observable", ObservableKind::Jz)?,
            output_dir: self.parsed("output_dir", PathBuf::from("tomochaos-out"))?,
            ensemble: self.parsed("ensemble", EnsembleKind::Coe)?,
            dim: self.parsed("dim", 100)?,
            samples: self.parsed("samples", 20)?,
            bins: self.parsed("bins", 40)?,
            delta: self.parsed("delta", DEFAULT_DELTA_LAMBDA)?,
            stride: self.parsed("stride", 1)?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |key: &str, msg: &str| {
            Err(ConfigError::Invalid {
                key: key.to_string(),
                msg: msg.to_string(),
            })
        };
        let twice_j = 2.0 * self.j;
        if !(self.j > 0.0 && twice_j.is_finite() && (twice_j - twice_j.round()).abs() < 1e-12) {
            return bad("j", "must be a positive integer or half-integer");
        }
        if self.lambda.is_empty() || self.lambda.iter().any(|l| !l.is_finite()) {
            return bad("lambda", "must be a nonempty list of finite numbers");
        }
        if !self.alpha.is_finite() {
            return bad("alpha", "must be finite");
        }
        if self.n_steps == 0 {
            return bad("n_steps", "must be at least 1");
        }
        if !(self.noise_spread >= 0.0 && self.noise_spread.is_finite()) {
            return bad("noise_spread", "must be finite and nonnegative");
        }
        if let Some(e) = self.epsilon {
            if !(e >= 0.0 && e.is_finite()) {
                return bad("epsilon", "must be finite and nonnegative");
            }
        }
        if self.n_states == 0 {
            return bad("n_states", "must be at least 1");
        }
        if self.dim < 2 {
            return bad("dim", "must be at least 2");
        }
        if self.samples == 0 {
            return bad("samples", "must be at least 1");
        }
        if self.bins == 0 {
            return bad("bins", "must be at least 1");
        }
        if !self.delta.is_finite() {
            return bad("delta", "must be finite");
        }
        if self.stride == 0 {
            return bad("stride", "must be at least 1");
        }
        Ok(())
    }

    /// Resolved values as `(key, value)` strings in [`KEYS`] order.
    pub fn echo(&self) -> Vec<(&'static str, String)> {
        let lambda = self.lambda.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",");
        vec![
            ("subcommand", self.subcommand.to_string()),
            ("j", self.j.to_string()),
            ("lambda", lambda),
            ("alpha", self.alpha.to_string()),
            ("n_steps", self.n_steps.to_string()),
            ("noise_spread", self.noise_spread.to_string()),
            ("epsilon", self.epsilon.map_or("relative".into(), |e| e.to_string())),
            ("seed", self.seed.to_string()),
            ("n_states", self.n_states.to_string()),
            ("observable", self.observable.name().to_string()),
            ("output_dir", self.output_dir.display().to_string()),
            ("ensemble", self.ensemble.to_string()),
            ("dim", self.dim.to_string()),
            ("samples", self.samples.to_string()),
            ("bins", self.bins.to_string()),
            ("delta", self.delta.to_string()),
            ("stride", self.stride.to_string()),
        ]
    }
}

/// Reads the optional file, then applies `overrides` in order.
pub fn load_config(path: Option<&Path>, overrides: &[(&str, String)]) -> Result<ExperimentConfig, ConfigError> {
    let mut raw = match path {
        Some(p) => RawConfig::read(p)?,
        None => RawConfig::default(),
    };
    for (k, v) in overrides {
        raw.set(k, v.clone())?;
    }
    raw.resolve()
}
