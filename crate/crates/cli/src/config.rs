use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use relu_align::data::Point;
use relu_align::flow::{IntegratorConfig, Method, Mode};
use relu_align::model::LossKind;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

const PRESETS: &[(&str, &str)] = &[
    ("toy2d", include_str!("../presets/toy2d.json")),
    ("toy2d-gd", include_str!("../presets/toy2d-gd.json")),
    ("mnist01", include_str!("../presets/mnist01.json")),
    ("mu-sweep", include_str!("../presets/mu-sweep.json")),
    ("orthogonal", include_str!("../presets/orthogonal.json")),
    ("large-eps", include_str!("../presets/large-eps.json")),
];

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Synthetic,
    AnglePair,
    Idx,
    File,
    Inline,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Balanced,
    Gaussian,
}

/// How ε is chosen for a balanced init.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsRule {
    /// Use `eps` as given.
    Fixed,
    /// eps_factor × the computed threshold.
    Threshold,
}

/// Flat run configuration. Every key is optional in the file; defaults fill
/// the rest and unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub preset: Option<String>,

    pub dataset: DatasetKind,
    pub dim: usize,
    pub n_plus: usize,
    pub n_minus: usize,
    pub target_mu: f64,
    pub data_seed: u64,
    pub theta: f64,
    pub idx_images: Option<PathBuf>,
    pub idx_labels: Option<PathBuf>,
    pub digit_pos: u8,
    pub digit_neg: u8,
    pub max_per_class: usize,
    pub center: bool,
    pub dataset_file: Option<PathBuf>,
    pub points: Vec<Point<f64>>,

    pub h: usize,
    pub init: InitKind,
    pub eps_rule: EpsRule,
    pub eps: f64,
    pub eps_factor: f64,
    pub alpha_init: f64,
    pub seed: u64,
    pub leaky_alpha: f64,

    pub loss: LossKind,
    pub method: Method,
    pub mode: Mode,
    pub step: f64,
    pub max_time: f64,
    pub iterations: usize,
    pub event_tolerance: f64,
    pub freeze_dead: bool,
    pub snapshot_every: f64,
    pub reference: bool,

    pub margin_samples: usize,
    pub slack: f64,
    pub out: PathBuf,

    pub sweep_theta: Vec<f64>,
    pub sweep_seeds: Vec<u64>,
    pub sweep_threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            preset: None,
            dataset: DatasetKind::Synthetic,
            dim: 2,
            n_plus: 2,
            n_minus: 1,
            target_mu: 0.8,
            data_seed: 1,
            theta: 0.1,
            idx_images: None,
            idx_labels: None,
            digit_pos: 0,
            digit_neg: 1,
            max_per_class: 100,
            center: false,
            dataset_file: None,
            points: Vec::new(),
            h: 8,
            init: InitKind::Balanced,
            eps_rule: EpsRule::Threshold,
            eps: 1e-6,
            eps_factor: 1.0,
            alpha_init: 1e-6,
            seed: 0,
            leaky_alpha: 0.0,
            loss: LossKind::Logistic,
            method: Method::Rk4,
            mode: Mode::GradientFlow,
            step: 0.02,
            max_time: 0.0,
            iterations: 1000,
            event_tolerance: 1e-9,
            freeze_dead: true,
            snapshot_every: 0.1,
            reference: false,
            margin_samples: 20000,
            slack: 0.05,
            out: PathBuf::from("runs/out"),
            sweep_theta: Vec::new(),
            sweep_seeds: Vec::new(),
            sweep_threads: 0,
        }
    }
}

fn preset_value(name: &str) -> Result<Value> {
    let (_, text) = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .with_context(|| format!("unknown preset {name:?}; available: {}", preset_names().join(", ")))?;
    serde_json::from_str(text).with_context(|| format!("preset {name} is not valid JSON"))
}

fn as_object(v: Value, what: &str) -> Result<Map<String, Value>> {
    match v {
        Value::Object(m) => Ok(m),
        _ => bail!("{what} must be a JSON object"),
    }
}

/// Layers: defaults < preset < config file. A preset named inside the file is
/// used when `preset` is not given on the command line.
pub fn resolve(preset: Option<&str>, config: Option<&Path>) -> Result<RunConfig> {
    let file = match config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
            let v: Value = serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?;
            Some(as_object(v, "config")?)
        }
        None => None,
    };
    let name = preset
        .map(str::to_string)
        .or_else(|| file.as_ref().and_then(|m| m.get("preset")).and_then(|v| v.as_str()).map(str::to_string));
    let mut merged = match &name {
        Some(n) => as_object(preset_value(n)?, "preset")?,
        None => Map::new(),
    };
    if let Some(m) = file {
        merged.extend(m);
    }
    if let Some(n) = name {
        merged.insert("preset".into(), Value::String(n));
    }
    let cfg: RunConfig = serde_json::from_value(Value::Object(merged)).context("invalid configuration")?;
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        match self.dataset {
            DatasetKind::Synthetic => {
                if self.dim < 2 {
                    bail!("dim must be at least 2");
                }
                if self.n_plus + self.n_minus == 0 {
                    bail!("n_plus + n_minus must be positive");
                }
                if !(self.target_mu > 0.0 && self.target_mu <= 1.0) {
                    bail!("target_mu must lie in (0,1]");
                }
            }
            DatasetKind::AnglePair => {
                if !(self.theta > 0.0 && self.theta < std::f64::consts::FRAC_PI_2) {
                    bail!("theta must lie in (0, π/2)");
                }
            }
            DatasetKind::Idx => {
                if self.idx_images.is_none() || self.idx_labels.is_none() {
                    bail!("dataset \"idx\" needs idx_images and idx_labels");
                }
                if self.digit_pos == self.digit_neg || self.digit_pos > 9 || self.digit_neg > 9 {
                    bail!("digit_pos and digit_neg must be distinct digits");
                }
            }
            DatasetKind::File => {
                if self.dataset_file.is_none() {
                    bail!("dataset \"file\" needs dataset_file");
                }
            }
            DatasetKind::Inline => {
                if self.points.is_empty() {
                    bail!("dataset \"inline\" needs a non-empty points array");
                }
            }
        }
        if self.h == 0 {
            bail!("h must be positive");
        }
        let positive = |name: &str, v: f64| -> Result<()> {
            if !(v > 0.0 && v.is_finite()) {
                bail!("{name} must be positive and finite, got {v}");
            }
            Ok(())
        };
        match (self.init, self.eps_rule) {
            (InitKind::Balanced, EpsRule::Fixed) => positive("eps", self.eps)?,
            (InitKind::Balanced, EpsRule::Threshold) => positive("eps_factor", self.eps_factor)?,
            (InitKind::Gaussian, _) => positive("alpha_init", self.alpha_init)?,
        }
        if !(0.0..=1.0).contains(&self.leaky_alpha) {
            bail!("leaky_alpha must lie in [0,1]");
        }
        positive("step", self.step)?;
        positive("snapshot_every", self.snapshot_every)?;
        if !(self.max_time >= 0.0 && self.max_time.is_finite()) {
            bail!("max_time must be non-negative (0 means derive from the bounds)");
        }
        if self.mode == Mode::GradientDescent && self.iterations == 0 {
            bail!("iterations must be positive in gradient-descent mode");
        }
        if !(self.slack >= 0.0) {
            bail!("slack must be non-negative");
        }
        if self.margin_samples == 0 {
            bail!("margin_samples must be positive");
        }
        Ok(())
    }

    pub fn integrator(&self, max_time: f64) -> IntegratorConfig<f64> {
        match self.mode {
            Mode::GradientFlow => {
                let mut c = IntegratorConfig::rk4(self.step, max_time);
                c.method = self.method;
                c.event_tolerance = self.event_tolerance;
                c.freeze_dead = self.freeze_dead;
                c
            }
            Mode::GradientDescent => IntegratorConfig::gradient_descent(self.step, self.iterations),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_resolves() {
        for name in preset_names() {
            let c = resolve(Some(name), None).unwrap_or_else(|e| panic!("{name}: {e:#}"));
            assert_eq!(c.preset.as_deref(), Some(name));
        }
    }

    #[test]
    fn unknown_key_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"h": 4, "hh": 3}"#).unwrap();
        let err = resolve(None, Some(&p)).unwrap_err();
        assert!(format!("{err:#}").contains("hh"));
    }

    #[test]
    fn file_overrides_preset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"preset": "toy2d", "h": 3}"#).unwrap();
        let c = resolve(None, Some(&p)).unwrap();
        assert_eq!(c.h, 3);
        assert_eq!(c.preset.as_deref(), Some("toy2d"));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        for bad in [r#"{"h": 0}"#, r#"{"step": -1}"#, r#"{"dataset": "idx"}"#, r#"{"leaky_alpha": 2}"#] {
            std::fs::write(&p, bad).unwrap();
            assert!(resolve(None, Some(&p)).is_err(), "{bad}");
        }
    }
}
