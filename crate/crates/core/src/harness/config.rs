//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! source.tau_g = 30
//! filter.model = lorentzian
//! filter.tau_fp = 600
//! run.backend = both
//! ```
//!
//! Unknown keys are rejected. Every key has a default, so an empty document
//! is the reference experiment.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backends::{Backend, DEFAULT_TAIL_LIFETIMES};
use crate::cavity::{airy_response, lorentzian_response, SpectralFilter, MIN_LIFETIMES};
use crate::events::EventFormat;
use crate::source::{SourceParams, DEFAULT_HIERARCHY_FACTOR};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("unknown key `{key}`")]
    UnknownKey { key: String },

    #[error("key `{key}` given twice (lines {first} and {second})")]
    DuplicateKey {
        key: String,
        first: usize,
        second: usize,
    },

    #[error("missing field `{0}`")]
    MissingField(String),

    #[error("bad value for `{key}`: {message}")]
    BadValue { key: String, message: String },

    #[error(
        "timescale hierarchy tau_s << tau_g << tau_FP violated: {0} \
         (pass --allow-weak-hierarchy to run anyway)"
    )]
    Hierarchy(String),
}

/// Keys accepted in a configuration document.
pub const KEYS: &[&str] = &[
    "source.tau_s",
    "source.tau_g",
    "source.pair_probability",
    "filter.model",
    "filter.kappa",
    "filter.tau_fp",
    "filter.reflectivity",
    "filter.fsr",
    "filter.center",
    "grid.dt",
    "grid.span_gates",
    "grid.tail_lifetimes",
    "run.backend",
    "run.n_triggers",
    "run.seed",
    "output.dir",
    "output.format",
    "units.tau_s_seconds",
    "allow_weak_hierarchy",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterModel {
    Lorentzian { kappa: f64 },
    Airy { reflectivity: f64, fsr: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendChoice {
    Standard,
    Collapse,
    Both,
}

impl BackendChoice {
    pub fn backends(&self) -> &'static [Backend] {
        match self {
            BackendChoice::Standard => &[Backend::Standard],
            BackendChoice::Collapse => &[Backend::Collapse],
            BackendChoice::Both => &[Backend::Standard, Backend::Collapse],
        }
    }
}

impl fmt::Display for BackendChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackendChoice::Standard => "standard",
            BackendChoice::Collapse => "collapse",
            BackendChoice::Both => "both",
        })
    }
}

impl std::str::FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "standard" => Ok(BackendChoice::Standard),
            "collapse" => Ok(BackendChoice::Collapse),
            "both" => Ok(BackendChoice::Both),
            other => Err(format!(
                "expected standard, collapse or both, got `{other}`"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub dt: f64,
    /// Half-width of the source grid in gate widths.
    pub span_gates: f64,
    /// Arm-1 room after the source grid, in filter lifetimes.
    pub tail_lifetimes: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub backend: BackendChoice,
    pub n_triggers: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: EventFormat,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: SourceParams,
    pub filter: FilterModel,
    pub center: f64,
    pub grid: GridConfig,
    pub run: RunConfig,
    pub output: OutputConfig,
    /// Display-only conversion of `tau_s` to seconds.
    pub tau_s_seconds: Option<f64>,
    pub allow_weak_hierarchy: bool,
    /// Non-fatal remarks gathered during validation.
    pub warnings: Vec<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        parse_config("").expect("defaults are valid")
    }
}

/// Raw key/value pairs with their line numbers.
#[derive(Debug, Clone, Default)]
pub struct ConfigDocument {
    entries: BTreeMap<String, (String, usize)>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut doc = ConfigDocument::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                message: format!("expected `key = value`, got `{content}`"),
            })?;
            let key = key.trim();
            let value = value.trim().trim_matches('"');
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line,
                    message: "empty key".into(),
                });
            }
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey { key: key.into() });
            }
            if let Some((_, first)) = doc.entries.get(key) {
                return Err(ConfigError::DuplicateKey {
                    key: key.into(),
                    first: *first,
                    second: line,
                });
            }
            doc.entries.insert(key.into(), (value.into(), line));
        }
        Ok(doc)
    }

    /// Set or replace a key (command-line overrides).
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey { key: key.into() });
        }
        self.entries.insert(key.into(), (value.into(), 0));
        Ok(())
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        self.raw(key)
            .map(|v| {
                v.parse::<T>().map_err(|e| ConfigError::BadValue {
                    key: key.into(),
                    message: format!("`{v}`: {e}"),
                })
            })
            .transpose()
    }

    fn real(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.get::<f64>(key)?.unwrap_or(default);
        if !v.is_finite() {
            return Err(bad(key, "must be finite"));
        }
        Ok(v)
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        let v = self.real(key, default)?;
        if v <= 0.0 {
            return Err(bad(key, format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn count(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.raw(key) {
            None => Ok(default),
            // accept 1e5-style counts
            Some(v) => v.parse::<u64>().or_else(|_| match v.parse::<f64>() {
                Ok(x) if x >= 0.0 && x.fract() == 0.0 && x < 1.8e19 => Ok(x as u64),
                _ => Err(bad(key, format!("`{v}` is not a non-negative integer"))),
            }),
        }
    }

    /// Fill defaults and validate.
    pub fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let allow_weak = self.get::<bool>("allow_weak_hierarchy")?.unwrap_or(false);
        let tau_s = self.positive("source.tau_s", 1.0)?;
        let tau_g = self.positive("source.tau_g", 30.0)?;
        let pair_probability = self.real("source.pair_probability", 1.0)?;
        if !(0.0..=1.0).contains(&pair_probability) {
            return Err(bad(
                "source.pair_probability",
                format!("must lie in [0, 1], got {pair_probability}"),
            ));
        }

        let model = self.raw("filter.model").unwrap_or("lorentzian");
        let filter = match model {
            "lorentzian" => {
                let kappa = match (self.raw("filter.kappa"), self.raw("filter.tau_fp")) {
                    (Some(_), Some(_)) => {
                        return Err(bad("filter.kappa", "give kappa or tau_fp, not both"))
                    }
                    (Some(_), None) => self.positive("filter.kappa", 0.0)?,
                    (None, Some(_)) => self.positive("filter.tau_fp", 0.0)?.recip(),
                    (None, None) => 1.0 / 600.0,
                };
                if self.raw("filter.reflectivity").is_some() || self.raw("filter.fsr").is_some() {
                    return Err(bad(
                        "filter.model",
                        "reflectivity/fsr only apply to filter.model = airy",
                    ));
                }
                FilterModel::Lorentzian { kappa }
            }
            "airy" => {
                if self.raw("filter.kappa").is_some() || self.raw("filter.tau_fp").is_some() {
                    return Err(bad(
                        "filter.model",
                        "the airy model is set by filter.reflectivity and filter.fsr",
                    ));
                }
                let reflectivity = self
                    .get::<f64>("filter.reflectivity")?
                    .ok_or_else(|| ConfigError::MissingField("filter.reflectivity".into()))?;
                if !(reflectivity > 0.0 && reflectivity < 1.0) {
                    return Err(bad(
                        "filter.reflectivity",
                        format!("must lie in (0, 1), got {reflectivity}"),
                    ));
                }
                if self.raw("filter.fsr").is_none() {
                    return Err(ConfigError::MissingField("filter.fsr".into()));
                }
                let fsr = self.positive("filter.fsr", 0.0)?;
                FilterModel::Airy { reflectivity, fsr }
            }
            other => {
                return Err(bad(
                    "filter.model",
                    format!("expected lorentzian or airy, got `{other}`"),
                ))
            }
        };
        let center = self.real("filter.center", 0.0)?;

        let grid = GridConfig {
            dt: self.positive("grid.dt", 0.25)?,
            span_gates: self.positive("grid.span_gates", 6.0)?,
            tail_lifetimes: self.positive("grid.tail_lifetimes", DEFAULT_TAIL_LIFETIMES)?,
        };
        if grid.span_gates < 5.0 {
            return Err(bad("grid.span_gates", "must be at least 5 gate widths"));
        }
        if grid.tail_lifetimes < MIN_LIFETIMES {
            return Err(bad(
                "grid.tail_lifetimes",
                format!("must be at least {MIN_LIFETIMES}"),
            ));
        }
        if grid.dt > 0.5 * tau_s {
            return Err(bad(
                "grid.dt",
                format!("dt = {} does not resolve tau_s = {tau_s}", grid.dt),
            ));
        }

        let run = RunConfig {
            backend: self.get("run.backend")?.unwrap_or(BackendChoice::Both),
            n_triggers: self.count("run.n_triggers", 100_000)?,
            seed: self.count("run.seed", 42)?,
        };
        if run.n_triggers == 0 {
            return Err(bad("run.n_triggers", "must be at least 1"));
        }
        let output = OutputConfig {
            dir: PathBuf::from(self.raw("output.dir").unwrap_or("etsim-out")),
            format: self.get("output.format")?.unwrap_or(EventFormat::Binary),
        };
        let tau_s_seconds = match self.raw("units.tau_s_seconds") {
            Some(_) => Some(self.positive("units.tau_s_seconds", 0.0)?),
            None => None,
        };

        let mut cfg = ExperimentConfig {
            source: SourceParams {
                tau_s,
                tau_g,
                pair_probability,
            },
            filter,
            center,
            grid,
            run,
            output,
            tau_s_seconds,
            allow_weak_hierarchy: allow_weak,
            warnings: Vec::new(),
        };
        cfg.check_hierarchy()?;
        if let FilterModel::Airy { fsr, .. } = cfg.filter {
            if 1.0 / tau_s > 0.5 * fsr {
                cfg.warnings.push(format!(
                    "source bandwidth 1/tau_s = {} exceeds fsr/2 = {}; neighbouring \
                     resonances transmit part of the spectrum",
                    1.0 / tau_s,
                    0.5 * fsr
                ));
            }
        }
        Ok(cfg)
    }
}

fn bad(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::BadValue {
        key: key.into(),
        message: message.into(),
    }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    ConfigDocument::parse(text)?.resolve()
}

impl ExperimentConfig {
    /// The spectral filter this configuration describes.
    pub fn spectral_filter(&self) -> SpectralFilter {
        match self.filter {
            FilterModel::Lorentzian { kappa } => lorentzian_response(kappa, self.center),
            FilterModel::Airy { reflectivity, fsr } => {
                airy_response(reflectivity, fsr, self.center)
            }
        }
        .expect("filter parameters are validated on parse")
    }

    /// Filter intensity lifetime `tau_FP`.
    pub fn tau_fp(&self) -> f64 {
        self.spectral_filter().lifetime()
    }

    fn check_hierarchy(&self) -> Result<(), ConfigError> {
        if self.allow_weak_hierarchy {
            return Ok(());
        }
        let (tau_s, tau_g, tau_fp) = (self.source.tau_s, self.source.tau_g, self.tau_fp());
        let k = DEFAULT_HIERARCHY_FACTOR;
        if tau_g < k * tau_s {
            return Err(ConfigError::Hierarchy(format!(
                "tau_g = {tau_g} is less than {k} x tau_s = {}",
                k * tau_s
            )));
        }
        if tau_fp < k * tau_g {
            return Err(ConfigError::Hierarchy(format!(
                "tau_FP = {tau_fp} is less than {k} x tau_g = {}",
                k * tau_g
            )));
        }
        Ok(())
    }

    /// Canonical `key = value` rendering of every resolved setting.
    ///
    /// Reals are written with round-trip precision, so parsing the
    /// rendering reproduces the configuration exactly.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("source.tau_s", real(self.source.tau_s));
        put("source.tau_g", real(self.source.tau_g));
        put(
            "source.pair_probability",
            real(self.source.pair_probability),
        );
        match self.filter {
            FilterModel::Lorentzian { kappa } => {
                put("filter.model", "lorentzian".into());
                put("filter.kappa", real(kappa));
            }
            FilterModel::Airy { reflectivity, fsr } => {
                put("filter.model", "airy".into());
                put("filter.reflectivity", real(reflectivity));
                put("filter.fsr", real(fsr));
            }
        }
        put("filter.center", real(self.center));
        put("grid.dt", real(self.grid.dt));
        put("grid.span_gates", real(self.grid.span_gates));
        put("grid.tail_lifetimes", real(self.grid.tail_lifetimes));
        put("run.backend", self.run.backend.to_string());
        put("run.n_triggers", self.run.n_triggers.to_string());
        put("run.seed", self.run.seed.to_string());
        put("output.dir", self.output.dir.display().to_string());
        put("output.format", self.output.format.to_string());
        if let Some(s) = self.tau_s_seconds {
            put("units.tau_s_seconds", real(s));
        }
        put(
            "allow_weak_hierarchy",
            self.allow_weak_hierarchy.to_string(),
        );
        out
    }

    /// SHA-256 of the canonical rendering, hex encoded.
    ///
    /// The output directory is excluded so that the same experiment written
    /// to two places hashes identically.
    pub fn hash(&self) -> String {
        let text: String = self
            .canonical()
            .lines()
            .filter(|l| !l.starts_with("output.dir"))
            .flat_map(|l| [l, "\n"])
            .collect();
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Source parameters checked against the configured hierarchy factor.
    pub fn source_params(&self) -> crate::Result<SourceParams> {
        let factor = if self.allow_weak_hierarchy {
            0.0
        } else {
            DEFAULT_HIERARCHY_FACTOR
        };
        let s = &self.source;
        // zero pair probability is a legal experiment (only triggers)
        SourceParams::with_hierarchy(
            s.tau_s,
            s.tau_g,
            s.pair_probability.max(f64::MIN_POSITIVE),
            factor,
        )
        .map(|p| SourceParams {
            pair_probability: s.pair_probability,
            ..p
        })
    }
}

fn real(x: f64) -> String {
    format!("{x:?}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_is_the_default_experiment() {
        let cfg = parse_config("").unwrap();
        assert_eq!(cfg.source.tau_s, 1.0);
        assert_eq!(cfg.source.tau_g, 30.0);
        assert_eq!(cfg.filter, FilterModel::Lorentzian { kappa: 1.0 / 600.0 });
        assert_eq!(cfg.grid.dt, 0.25);
        assert_eq!(cfg.run.n_triggers, 100_000);
        assert_eq!(cfg.run.seed, 42);
        assert_eq!(cfg.run.backend, BackendChoice::Both);
        assert!((cfg.tau_fp() - 600.0).abs() < 1e-9);
    }

    #[test]
    fn comments_blank_lines_and_quotes() {
        let cfg = parse_config(
            "# header\n\nsource.tau_g = 40   # wider gate\noutput.dir = \"out dir\"\nrun.n_triggers = 1e4\n",
        )
        .unwrap();
        assert_eq!(cfg.source.tau_g, 40.0);
        assert_eq!(cfg.output.dir, PathBuf::from("out dir"));
        assert_eq!(cfg.run.n_triggers, 10_000);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse_config("filter.kapa = 1").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                key: "filter.kapa".into()
            }
        );
        assert!(err.to_string().contains("filter.kapa"));
    }

    #[test]
    fn narrow_gate_violates_hierarchy() {
        let err = parse_config("source.tau_g = 5").unwrap_err();
        assert!(matches!(err, ConfigError::Hierarchy(_)), "{err}");
        assert!(err.to_string().contains("tau_s << tau_g << tau_FP"));
        let cfg = parse_config("source.tau_g = 5\nallow_weak_hierarchy = true").unwrap();
        assert_eq!(cfg.source.tau_g, 5.0);
        assert!(cfg.source_params().is_ok());
    }

    #[test]
    fn short_cavity_violates_hierarchy() {
        let err = parse_config("filter.tau_fp = 100").unwrap_err();
        assert!(matches!(err, ConfigError::Hierarchy(_)));
    }

    #[test]
    fn airy_needs_reflectivity_and_fsr() {
        assert_eq!(
            parse_config("filter.model = airy").unwrap_err(),
            ConfigError::MissingField("filter.reflectivity".into())
        );
        assert_eq!(
            parse_config("filter.model = airy\nfilter.reflectivity = 0.99").unwrap_err(),
            ConfigError::MissingField("filter.fsr".into())
        );
        let cfg = parse_config("filter.model = airy\nfilter.reflectivity = 0.9999\nfilter.fsr = 3")
            .unwrap();
        assert!(matches!(cfg.filter, FilterModel::Airy { .. }));
        assert_eq!(cfg.warnings.len(), 0);
    }

    #[test]
    fn airy_warns_when_source_is_broader_than_half_fsr() {
        let cfg =
            parse_config("filter.model = airy\nfilter.reflectivity = 0.99999\nfilter.fsr = 1")
                .unwrap();
        assert_eq!(cfg.warnings.len(), 1);
    }

    #[test]
    fn syntax_and_duplicates() {
        assert_eq!(
            parse_config("source.tau_s 1").unwrap_err(),
            ConfigError::Syntax {
                line: 1,
                message: "expected `key = value`, got `source.tau_s 1`".into()
            }
        );
        assert!(matches!(
            parse_config("run.seed = 1\nrun.seed = 2").unwrap_err(),
            ConfigError::DuplicateKey {
                first: 1,
                second: 2,
                ..
            }
        ));
        assert!(matches!(
            parse_config("run.seed = -1").unwrap_err(),
            ConfigError::BadValue { .. }
        ));
    }

    #[test]
    fn canonical_rendering_round_trips() {
        let cfg = parse_config("filter.kappa = 0.0017\nrun.seed = 7\nunits.tau_s_seconds = 1e-12")
            .unwrap();
        let again = parse_config(&cfg.canonical()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
        assert_eq!(cfg.hash().len(), 64);
        assert_ne!(cfg.hash(), parse_config("").unwrap().hash());
    }

    #[test]
    fn overrides_replace_document_values() {
        let mut doc = ConfigDocument::parse("run.seed = 1").unwrap();
        doc.set("run.seed", "9").unwrap();
        assert_eq!(doc.resolve().unwrap().run.seed, 9);
        assert!(doc.set("nope", "1").is_err());
    }
}
