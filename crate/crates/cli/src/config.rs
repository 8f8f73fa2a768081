//! Run configuration: a JSON file, command-line overrides, and validation.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sphereqc::LossWeights;

/// What the task loss matches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Landmarks,
    Intensity,
    Hybrid,
    IdentityCheck,
}

/// Names accepted by `--field name=path`.
pub const FIELD_NAMES: [&str; 4] = ["moving", "fixed", "moving_labels", "fixed_labels"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Mode,
    pub moving: PathBuf,
    #[serde(default)]
    pub fixed: Option<PathBuf>,
    #[serde(default)]
    pub landmarks: Option<PathBuf>,
    #[serde(default)]
    pub fields: BTreeMap<String, PathBuf>,
    #[serde(default)]
    pub weights: LossWeights,
    #[serde(default = "default_rings")]
    pub rings: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    /// Recorded for provenance; the optimizer itself is deterministic.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_rings() -> usize {
    24
}

fn default_max_iters() -> usize {
    3000
}

fn default_lr() -> f64 {
    1e-2
}

/// Values given on the command line; each one set replaces the file value.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub moving: Option<PathBuf>,
    pub fixed: Option<PathBuf>,
    pub landmarks: Option<PathBuf>,
    pub fields: Vec<String>,
    pub weights: Option<String>,
    pub rings: Option<usize>,
    pub max_iters: Option<usize>,
    pub lr: Option<f64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut cfg.moving);
        cfg.fixed.as_mut().map(fix);
        cfg.landmarks.as_mut().map(fix);
        cfg.out.as_mut().map(fix);
        cfg.fields.values_mut().for_each(fix);
        Ok(cfg)
    }

    /// Builds the config from an optional file plus overrides, then
    /// validates it.
    pub fn resolve(file: Option<&Path>, o: Overrides) -> Result<Self> {
        let mut cfg = match file {
            Some(p) => Some(Self::from_file(p)?),
            None => None,
        };
        if cfg.is_none() {
            let (Some(mode), Some(moving)) = (o.mode, o.moving.clone()) else {
                bail!("--mode and --moving are required without --config");
            };
            cfg = Some(RunConfig {
                mode,
                moving,
                fixed: None,
                landmarks: None,
                fields: BTreeMap::new(),
                weights: LossWeights::default(),
                rings: default_rings(),
                max_iters: default_max_iters(),
                lr: default_lr(),
                seed: 0,
                out: None,
            });
        }
        let mut cfg = cfg.expect("set above");
        if let Some(v) = o.mode {
            cfg.mode = v;
        }
        if let Some(v) = o.moving {
            cfg.moving = v;
        }
        if let Some(v) = o.fixed {
            cfg.fixed = Some(v);
        }
        if let Some(v) = o.landmarks {
            cfg.landmarks = Some(v);
        }
        for item in &o.fields {
            let Some((name, path)) = item.split_once('=') else {
                bail!("--field expects name=path, got {item:?}");
            };
            cfg.fields.insert(name.trim().to_string(), PathBuf::from(path.trim()));
        }
        if let Some(text) = &o.weights {
            cfg.weights = cfg.weights.parse_overrides(text)?;
        }
        if let Some(v) = o.rings {
            cfg.rings = v;
        }
        if let Some(v) = o.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = o.lr {
            cfg.lr = v;
        }
        if let Some(v) = o.seed {
            cfg.seed = v;
        }
        if let Some(v) = o.out {
            cfg.out = Some(v);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if self.rings < 3 {
            bail!("rings must be at least 3, got {}", self.rings);
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            bail!("lr must be a positive number, got {}", self.lr);
        }
        for name in self.fields.keys() {
            if !FIELD_NAMES.contains(&name.as_str()) {
                bail!("unknown field name {name:?}; expected one of {FIELD_NAMES:?}");
            }
        }
        let has = |n: &str| self.fields.contains_key(n);
        let intensity = has("moving") || has("fixed");
        let labels = has("moving_labels") || has("fixed_labels");
        if intensity && !(has("moving") && has("fixed")) {
            bail!("intensity matching needs both 'moving' and 'fixed' fields");
        }
        if labels && !(has("moving_labels") && has("fixed_labels")) {
            bail!("label matching needs both 'moving_labels' and 'fixed_labels' fields");
        }
        let needs_landmarks = matches!(self.mode, Mode::Landmarks | Mode::Hybrid);
        let needs_fields = matches!(self.mode, Mode::Intensity | Mode::Hybrid);
        if needs_landmarks && self.landmarks.is_none() {
            bail!("mode {:?} needs a landmark spec (--landmarks)", self.mode);
        }
        if needs_fields && !(intensity || labels) {
            bail!("mode {:?} needs fields (--field moving=... --field fixed=...)", self.mode);
        }
        if (intensity || labels) && self.fixed.is_none() {
            bail!("field matching needs the fixed mesh (--fixed)");
        }
        if self.mode == Mode::IdentityCheck && (self.landmarks.is_some() || intensity || labels) {
            bail!("identity-check takes no landmarks or fields");
        }
        Ok(())
    }
}
