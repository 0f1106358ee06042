//! Experiment configuration and `key=value` overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use shrimp_core::{Method, TargetFunction};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Synthetic,
    Csv,
}

/// How the weight variance is chosen for each order `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sigma2Rule {
    InvQ,
    Fixed(f64),
}

impl Sigma2Rule {
    pub fn value(self, q: usize) -> f64 {
        match self {
            Sigma2Rule::InvQ => 1.0 / q as f64,
            Sigma2Rule::Fixed(v) => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub function: Option<TargetFunction>,
    #[serde(default)]
    pub data_path: Option<PathBuf>,
    #[serde(default)]
    pub test_path: Option<PathBuf>,
    /// Target column name, or its zero-based index.
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub noise: f64,
    pub q: Vec<usize>,
    /// Prune rates in percent.
    pub p: Vec<f64>,
    #[serde(default = "default_n")]
    pub n_features: usize,
    #[serde(default = "default_sigma2")]
    pub sigma2: Sigma2Rule,
    pub seeds: Vec<u64>,
    pub methods: Vec<Method>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub max_steps: Option<usize>,
    /// Also write spectrum and support CSVs for pruning traces.
    #[serde(default)]
    pub diagnostics: bool,
}

fn default_true() -> bool {
    true
}
fn default_m() -> usize {
    140
}
fn default_d() -> usize {
    10
}
fn default_n() -> usize {
    10_000
}
fn default_sigma2() -> Sigma2Rule {
    Sigma2Rule::InvQ
}
fn default_out() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    /// A synthetic config with the low-dimensional defaults.
    pub fn synthetic(function: TargetFunction, q: Vec<usize>, methods: Vec<Method>) -> Self {
        Self {
            mode: Mode::Synthetic,
            function: Some(function),
            data_path: None,
            test_path: None,
            target: None,
            standardize: true,
            m: default_m(),
            d: default_d(),
            noise: 0.0,
            q,
            p: vec![20.0],
            n_features: default_n(),
            sigma2: Sigma2Rule::InvQ,
            seeds: vec![0],
            methods,
            out: default_out(),
            max_steps: None,
            diagnostics: false,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply `key=value` overrides; values parse as JSON when they can, else as strings.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        for item in overrides {
            let (key, raw) = item.split_once('=').with_context(|| format!("override '{item}' is not key=value"))?;
            let value = serde_json::from_str::<Value>(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            let obj = doc.as_object_mut().expect("config serializes to an object");
            if !obj.contains_key(key) {
                bail!("unknown config key '{key}'");
            }
            obj.insert(key.to_string(), value);
        }
        let cfg: Self = serde_json::from_value(doc).context("applying overrides")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q.is_empty() || self.p.is_empty() || self.seeds.is_empty() || self.methods.is_empty() {
            bail!("q, p, seeds and methods must all be nonempty");
        }
        if let Some(p) = self.p.iter().find(|p| !(**p > 0.0 && **p < 100.0)) {
            bail!("prune rate {p}% is outside (0, 100)");
        }
        if self.q.contains(&0) {
            bail!("q must be at least 1");
        }
        if self.n_features == 0 {
            bail!("n_features must be positive");
        }
        if let Sigma2Rule::Fixed(v) = self.sigma2 {
            if !(v > 0.0 && v.is_finite()) {
                bail!("fixed sigma2 must be positive");
            }
        }
        match self.mode {
            Mode::Synthetic => {
                let f = self.function.context("synthetic mode needs a function")?;
                if self.d < f.d_min() {
                    bail!("{f} needs d >= {}", f.d_min());
                }
                if self.m < 10 {
                    bail!("m must be at least 10");
                }
                if let Some(q) = self.q.iter().find(|q| **q > self.d) {
                    bail!("q={q} exceeds d={}", self.d);
                }
            }
            Mode::Csv => {
                if self.data_path.is_none() {
                    bail!("csv mode needs data_path");
                }
            }
        }
        Ok(())
    }

    /// Label for the `function` column of results.
    pub fn label(&self) -> String {
        match (self.mode, self.function, &self.data_path) {
            (Mode::Synthetic, Some(f), _) => f.name().to_string(),
            (_, _, Some(path)) => path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
            _ => "data".into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::synthetic(TargetFunction::F3, vec![2], vec![Method::Shrimp])
    }

    #[test]
    fn json_roundtrip() {
        let cfg = base();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn minimal_json_fills_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"mode":"synthetic","function":"f2","q":[1],"p":[20],"seeds":[0,1],"methods":["shrimp","salsa"],
                "sigma2":{"fixed":100.0}}"#,
        )
        .unwrap();
        assert_eq!((cfg.m, cfg.d, cfg.n_features), (140, 10, 10_000));
        assert_eq!(cfg.sigma2.value(3), 100.0);
        cfg.validate().unwrap();
    }

    #[test]
    fn overrides_parse_json_values() {
        let cfg = base()
            .with_overrides(&["m=200".into(), "q=[1,2]".into(), "function=f7".into(), "sigma2=\"inv_q\"".into()])
            .unwrap();
        assert_eq!(cfg.m, 200);
        assert_eq!(cfg.q, vec![1, 2]);
        assert_eq!(cfg.function, Some(TargetFunction::F7));
        assert!(base().with_overrides(&["bogus=1".into()]).is_err());
        assert!(base().with_overrides(&["m".into()]).is_err());
    }

    #[test]
    fn validation_rejects_bad_grids() {
        let mut cfg = base();
        cfg.p = vec![100.0];
        assert!(cfg.validate().is_err());
        let mut cfg = base();
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = base();
        cfg.q = vec![11];
        assert!(cfg.validate().is_err());
        let mut cfg = base();
        cfg.mode = Mode::Csv;
        assert!(cfg.validate().is_err());
    }
}
