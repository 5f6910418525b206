//! INI-style scenario files.
//!
//! ```text
//! [array]
//! n_t = 2
//! n_r = 16
//! [pilot]
//! q = 12
//! [kernel]
//! family = laplace
//! eta = 3
//! [run]
//! method = 2dif, dft-mmse
//! ```
//!
//! Blank lines and lines starting with `#` or `;` are ignored. Missing keys
//! take the defaults of [`ScenarioConfig`]; unknown sections and keys are errors.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use densemimo::hybrid::HybridOptions;
use densemimo::kernels::{KernelFamily, TraceNormalization};
use densemimo::sim::ScenarioConfig;
use thiserror::Error;

/// `η` used when a Laplace or Bessel family is given without one.
pub const DEFAULT_ETA: f64 = 3.0;

const KEYS: &[(&str, &[&str])] = &[
    ("array", &["n_t", "n_r", "n_rf", "spacing_over_lambda"]),
    ("pilot", &["q", "p", "snr_db"]),
    (
        "kernel",
        &[
            "family",
            "eta",
            "coupling_tx",
            "coupling_rx",
            "training_samples",
            "normalization",
        ],
    ),
    ("run", &["method", "trials", "seed"]),
    ("hybrid", &["max_iters", "tol", "analog_precoder"]),
];

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("invalid `{key}`: {message}")]
    Validation { key: String, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn invalid(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Raw `section.key = value` entries, before typing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
    /// Directory that relative coupling paths are resolved against.
    base_dir: PathBuf,
}

fn check_key(section: &str, key: &str) -> Result<(), String> {
    match KEYS.iter().find(|(s, _)| *s == section) {
        None => Err(format!("unknown section `[{section}]`")),
        Some((_, keys)) if !keys.contains(&key) => {
            Err(format!("unknown key `{key}` in section `[{section}]`"))
        }
        Some(_) => Ok(()),
    }
}

impl RawConfig {
    pub fn parse(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        let mut out = RawConfig::default();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let err = |message: String| ConfigError::Parse {
                source_name: source_name.to_string(),
                line,
                message,
            };
            let content = raw.trim();
            if content.is_empty() || content.starts_with('#') || content.starts_with(';') {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("unterminated section header `{content}`")))?
                    .trim()
                    .to_ascii_lowercase();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(invalid(
                        &name,
                        format!("unknown section `[{name}]` at line {line}"),
                    ));
                }
                section = Some(name);
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{content}`")))?;
            let key = key.trim().to_ascii_lowercase();
            let sec = section
                .as_deref()
                .ok_or_else(|| err(format!("key `{key}` outside any section")))?;
            let full = format!("{sec}.{key}");
            check_key(sec, &key).map_err(|m| invalid(&full, format!("{m} at line {line}")))?;
            if out
                .entries
                .insert(full.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(err(format!("duplicate key `{full}`")));
            }
        }
        Ok(out)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut raw = Self::parse(&text, &path.display().to_string())?;
        raw.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(raw)
    }

    /// Applies a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| invalid(assignment, "override must look like section.key=value"))?;
        let key = key.trim().to_ascii_lowercase();
        let (section, name) = key
            .split_once('.')
            .ok_or_else(|| invalid(&key, "override key must look like section.key"))?;
        check_key(section, name).map_err(|m| invalid(&key, m))?;
        self.entries.insert(key, value.trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .get(key)
            .map(String::as_str)
            .filter(|v| !v.is_empty())
    }

    fn parsed<T: std::str::FromStr>(
        &self,
        key: &str,
        what: &str,
    ) -> Result<Option<T>, ConfigError> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| invalid(key, format!("expected {what}, got `{v}`")))
            })
            .transpose()
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key)
            .map(|v| {
                parse_real(v).ok_or_else(|| invalid(key, format!("expected a number, got `{v}`")))
            })
            .transpose()
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.parsed::<usize>(key, "a non-negative integer")? {
            Some(0) => Err(invalid(key, "must be at least 1")),
            other => Ok(other),
        }
    }

    fn matrix(&self, key: &str) -> Result<Option<densemimo::numkit::CMatrix>, ConfigError> {
        self.get(key)
            .map(|v| {
                let path = self.base_dir.join(v);
                densemimo::cmt::read(&path)
                    .map_err(|e| invalid(key, format!("{}: {e}", path.display())))
            })
            .transpose()
    }

    /// Typed scenario; every value is checked and errors name the key.
    pub fn to_scenario(&self) -> Result<ScenarioConfig, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        let d = &mut cfg;
        d.n_t = self.count("array.n_t")?.unwrap_or(d.n_t);
        d.n_r = self.count("array.n_r")?.unwrap_or(d.n_r);
        d.n_rf = self.count("array.n_rf")?.unwrap_or(d.n_rf);
        if d.n_rf > d.n_r {
            return Err(invalid(
                "array.n_rf",
                format!("{} RF chains exceed {} receive antennas", d.n_rf, d.n_r),
            ));
        }
        d.spacing_over_lambda = self
            .real("array.spacing_over_lambda")?
            .unwrap_or(d.spacing_over_lambda);
        if !(d.spacing_over_lambda > 0.0) {
            return Err(invalid("array.spacing_over_lambda", "must be positive"));
        }

        d.pilots = self.count("pilot.q")?.unwrap_or(d.pilots);
        d.power = self.real("pilot.p")?.unwrap_or(d.power);
        if !(d.power > 0.0) {
            return Err(invalid("pilot.p", "must be positive"));
        }
        d.snr_db = self.real("pilot.snr_db")?.unwrap_or(d.snr_db);

        if let Some(name) = self.get("kernel.family") {
            d.family = name
                .parse()
                .map_err(|e| invalid("kernel.family", format!("{e}")))?;
        }
        let eta = self.real("kernel.eta")?;
        d.family = match (d.family, eta) {
            (f @ (KernelFamily::Laplace { .. } | KernelFamily::Bessel { .. }), e) => {
                let e = e.unwrap_or(DEFAULT_ETA);
                if !(e > 0.0) {
                    return Err(invalid("kernel.eta", "must be positive"));
                }
                f.with_eta(e)
            }
            (f, Some(_)) => {
                return Err(invalid(
                    "kernel.eta",
                    format!("family `{}` has no hyperparameter", f.name()),
                ));
            }
            (f, None) => f,
        };
        d.coupling_tx = self.matrix("kernel.coupling_tx")?;
        d.coupling_rx = self.matrix("kernel.coupling_rx")?;
        for (key, m, n) in [
            ("kernel.coupling_tx", &d.coupling_tx, d.n_t),
            ("kernel.coupling_rx", &d.coupling_rx, d.n_r),
        ] {
            if let Some(m) = m {
                if m.shape() != (n, n) {
                    return Err(invalid(
                        key,
                        format!("matrix is {}x{}, expected {n}x{n}", m.nrows(), m.ncols()),
                    ));
                }
            }
        }
        d.training_samples = self
            .count("kernel.training_samples")?
            .unwrap_or(d.training_samples);
        if let Some(v) = self.get("kernel.normalization") {
            d.normalization = match v.to_ascii_lowercase().as_str() {
                "none" => TraceNormalization::None,
                "energy" => TraceNormalization::MatchEnergy,
                _ => {
                    return Err(invalid(
                        "kernel.normalization",
                        format!("expected `none` or `energy`, got `{v}`"),
                    ))
                }
            };
        }

        if let Some(list) = self.get("run.method") {
            d.methods = list
                .split(',')
                .map(|m| m.trim().to_ascii_lowercase())
                .filter(|m| !m.is_empty())
                .collect();
            if d.methods.is_empty() {
                return Err(invalid("run.method", "no method given"));
            }
        }
        let registry = densemimo::schemes::SchemeRegistry::default();
        for m in &d.methods {
            registry
                .get(m)
                .map_err(|e| invalid("run.method", e.to_string()))?;
        }
        d.trials = self.count("run.trials")?.unwrap_or(d.trials);
        d.seed = self
            .parsed("run.seed", "an unsigned integer")?
            .unwrap_or(d.seed);

        let h = HybridOptions::default();
        d.hybrid = HybridOptions {
            max_iters: self.count("hybrid.max_iters")?.unwrap_or(h.max_iters),
            tol: self.real("hybrid.tol")?.unwrap_or(h.tol),
            analog_precoder: self
                .parsed("hybrid.analog_precoder", "true or false")?
                .unwrap_or(h.analog_precoder),
        };

        cfg.validate()
            .map_err(|e| invalid("config", e.to_string()))?;
        Ok(cfg)
    }
}

/// Decimal number or a fraction such as `1/8`.
pub fn parse_real(text: &str) -> Option<f64> {
    let text = text.trim();
    let value = match text.split_once('/') {
        Some((num, den)) => num.trim().parse::<f64>().ok()? / den.trim().parse::<f64>().ok()?,
        None => text.parse().ok()?,
    };
    value.is_finite().then_some(value)
}

/// Comma-separated numbers, or `start:step:stop` inclusive.
pub fn parse_values(text: &str) -> Result<Vec<f64>, ConfigError> {
    let bad = |m: String| invalid("--values", m);
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() == 3 {
        let num = |s: &str| parse_real(s).ok_or_else(|| bad(format!("`{s}` is not a number")));
        let (start, step, stop) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
        if !(step > 0.0) || stop < start {
            return Err(bad("range needs a positive step and stop >= start".into()));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| start + i as f64 * step).collect());
    }
    let values: Vec<f64> = text
        .split(',')
        .map(|s| parse_real(s).ok_or_else(|| bad(format!("`{}` is not a number", s.trim()))))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(bad("no values given".into()));
    }
    Ok(values)
}
