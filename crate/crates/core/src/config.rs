//! Experiment configuration: a flat TOML table plus command-line overrides.
//!
//! ```toml
//! task = "classify-synth"
//! model = "mlp-small"
//! mode = "tftb"
//! alpha = 0.3
//! budget_seconds = 30.0
//! seeds = [0, 1, 2]
//! ```
//!
//! Unknown keys are rejected with the list of accepted ones. Overrides given
//! on the command line are applied after the file, so flags win.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::data::{
    load_cifar10, ChannelNorm, Dataset, Split, SynthClassification, SynthCounting,
};
use crate::error::{Error, Result};
use crate::importance::AdaptiveAlpha;
use crate::model::Architecture;
use crate::trainer::{ExperimentEcho, Mode, RunManifest, TrainConfig};

/// Every accepted configuration key.
pub const KEYS: &[&str] = &[
    "task",
    "model",
    "mode",
    "alpha",
    "alphas",
    "warmup_epochs",
    "batch_size",
    "lr",
    "budget_seconds",
    "max_epochs",
    "rerank_period",
    "lambda_var",
    "window",
    "stratified",
    "early_stop_patience",
    "seed",
    "seeds",
    "output_dir",
    "val_fraction",
    "threads",
    "ledger_dump",
    "refresh_excluded_every",
    "data_dir",
    "n_per_class",
    "num_classes",
    "easy_fraction",
    "n_images",
    "image_size",
    "max_objects",
    "sigma",
    "adaptive_alpha",
    "adaptive_window",
    "eps_slow",
    "eps_fast",
    "delta_alpha",
    "alpha_min",
    "alpha_max",
];

pub const TASKS: &[&str] = &["classify-synth", "classify-cifar10", "count-synth"];
pub const MODELS: &[&str] = &["mlp-linear", "mlp-small", "mlp-medium", "conv-tiny", "conv-small"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TaskSpec {
    ClassifySynth {
        n_per_class: usize,
        num_classes: usize,
        easy_fraction: f64,
    },
    ClassifyCifar10 {
        data_dir: PathBuf,
    },
    CountSynth {
        n_images: usize,
        image_size: usize,
        max_objects: usize,
        sigma: f64,
    },
}

impl TaskSpec {
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::ClassifySynth { .. } => "classify-synth",
            TaskSpec::ClassifyCifar10 { .. } => "classify-cifar10",
            TaskSpec::CountSynth { .. } => "count-synth",
        }
    }

    pub fn is_classification(&self) -> bool {
        !matches!(self, TaskSpec::CountSynth { .. })
    }
}

/// Loaded task data. `val` is carved from the training split.
pub struct TaskData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub normalization: Option<ChannelNorm>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub task: TaskSpec,
    pub model: String,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub alphas: Vec<f64>,
    pub output_dir: PathBuf,
    pub val_fraction: f64,
    pub threads: usize,
    explicit: BTreeSet<String>,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            task: TaskSpec::ClassifySynth {
                n_per_class: 400,
                num_classes: 10,
                easy_fraction: 0.6,
            },
            model: "mlp-small".to_string(),
            train: TrainConfig::default(),
            seeds: vec![0],
            alphas: vec![0.0, 0.1, 0.2, 0.3, 0.4],
            output_dir: PathBuf::from("runs"),
            val_fraction: 0.1,
            threads: 1,
            explicit: BTreeSet::new(),
        }
    }
}

fn unknown_choice(key: &str, got: &str, allowed: &[&str]) -> Error {
    Error::Config(format!(
        "{key} = {got:?} is not recognised; expected one of: {}",
        allowed.join(", ")
    ))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Float(f) => Ok(*f),
        Value::Integer(i) => Ok(*i as f64),
        _ => Err(Error::Config(format!("{key} must be a number, got {v}"))),
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(Error::Config(format!("{key} must be a non-negative integer, got {v}"))),
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| Error::Config(format!("{key} must be true or false, got {v}")))
}

fn as_str<'v>(key: &str, v: &'v Value) -> Result<&'v str> {
    v.as_str()
        .ok_or_else(|| Error::Config(format!("{key} must be a string, got {v}")))
}

fn as_list<T>(key: &str, v: &Value, f: impl Fn(&str, &Value) -> Result<T>) -> Result<Vec<T>> {
    match v {
        Value::Array(items) => items.iter().map(|i| f(key, i)).collect(),
        single => Ok(vec![f(key, single)?]),
    }
}

impl ExperimentSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut spec = ExperimentSpec::default();
        // task first so task-specific keys land in the right variant
        if let Some(v) = table.get("task") {
            spec.set("task", v)?;
        }
        for (k, v) in &table {
            if k != "task" {
                spec.set(k, v)?;
            }
        }
        spec.finalize()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    /// Apply a `key=value` override; the value is read as TOML and falls back
    /// to a bare string.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, raw) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override {assignment:?} is not key=value")))?;
        let (k, raw) = (k.trim(), raw.trim());
        let value = format!("v = {raw}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        self.set(k, &value)?;
        self.finalize()
    }

    pub fn set(&mut self, key: &str, v: &Value) -> Result<()> {
        let t = &mut self.train;
        match key {
            "task" => {
                let name = as_str(key, v)?;
                self.task = match name {
                    "classify-synth" => TaskSpec::ClassifySynth {
                        n_per_class: 400,
                        num_classes: 10,
                        easy_fraction: 0.6,
                    },
                    "classify-cifar10" => TaskSpec::ClassifyCifar10 {
                        data_dir: PathBuf::from("data/cifar-10-batches-bin"),
                    },
                    "count-synth" => TaskSpec::CountSynth {
                        n_images: 300,
                        image_size: 16,
                        max_objects: 12,
                        sigma: 1.5,
                    },
                    other => return Err(unknown_choice(key, other, TASKS)),
                };
                if !self.explicit.contains("model") {
                    self.model = if name == "count-synth" { "conv-tiny" } else { "mlp-small" }.into();
                }
            }
            "model" => {
                let m = as_str(key, v)?;
                if !MODELS.contains(&m) {
                    return Err(unknown_choice(key, m, MODELS));
                }
                self.model = m.to_string();
            }
            "mode" => {
                t.mode = match as_str(key, v)? {
                    "tftb" => Mode::Tftb,
                    "baseline" => Mode::Baseline,
                    other => return Err(unknown_choice(key, other, &["tftb", "baseline"])),
                }
            }
            "alpha" => t.alpha = as_f64(key, v)?,
            "alphas" => self.alphas = as_list(key, v, as_f64)?,
            "warmup_epochs" => t.warmup_epochs = as_usize(key, v)?,
            "batch_size" => t.batch_size = as_usize(key, v)?,
            "lr" => t.lr = as_f64(key, v)?,
            "budget_seconds" => {
                let b = as_f64(key, v)?;
                t.budget_seconds = (b > 0.0 && b.is_finite()).then_some(b);
                if b < 0.0 {
                    return Err(Error::Config(format!("budget_seconds must be >= 0, got {b}")));
                }
            }
            "max_epochs" => t.max_epochs = as_usize(key, v)?,
            "rerank_period" => t.rerank_period = as_usize(key, v)?,
            "lambda_var" => t.lambda_var = as_f64(key, v)?,
            "window" => t.window = as_usize(key, v)?,
            "stratified" => t.stratified = as_bool(key, v)?,
            "early_stop_patience" => t.early_stop_patience = as_usize(key, v)?,
            "seed" => self.seeds = vec![as_usize(key, v)? as u64],
            "seeds" => self.seeds = as_list(key, v, |k, x| as_usize(k, x).map(|s| s as u64))?,
            "output_dir" => self.output_dir = PathBuf::from(as_str(key, v)?),
            "val_fraction" => self.val_fraction = as_f64(key, v)?,
            "threads" => self.threads = as_usize(key, v)?,
            "ledger_dump" => t.ledger_dump = as_bool(key, v)?,
            "refresh_excluded_every" => {
                let n = as_usize(key, v)?;
                t.refresh_excluded_every = (n > 0).then_some(n);
            }
            "adaptive_alpha" => {
                t.adaptive_alpha = if as_bool(key, v)? {
                    Some(t.adaptive_alpha.clone().unwrap_or_default())
                } else {
                    None
                }
            }
            "adaptive_window" | "eps_slow" | "eps_fast" | "delta_alpha" | "alpha_min"
            | "alpha_max" => {
                let a = t.adaptive_alpha.get_or_insert_with(AdaptiveAlpha::default);
                match key {
                    "adaptive_window" => a.window = as_usize(key, v)?,
                    "eps_slow" => a.eps_slow = as_f64(key, v)?,
                    "eps_fast" => a.eps_fast = as_f64(key, v)?,
                    "delta_alpha" => a.delta_alpha = as_f64(key, v)?,
                    "alpha_min" => a.alpha_min = as_f64(key, v)?,
                    _ => a.alpha_max = as_f64(key, v)?,
                }
            }
            "data_dir" | "n_per_class" | "num_classes" | "easy_fraction" | "n_images"
            | "image_size" | "max_objects" | "sigma" => self.set_task_key(key, v)?,
            other => {
                return Err(Error::Config(format!(
                    "unknown key {other:?}; accepted keys: {}",
                    KEYS.join(", ")
                )))
            }
        }
        self.explicit.insert(key.to_string());
        Ok(())
    }

    fn set_task_key(&mut self, key: &str, v: &Value) -> Result<()> {
        let task = self.task.name();
        let misplaced = || {
            Error::Config(format!("{key} does not apply to task {task}"))
        };
        match (&mut self.task, key) {
            (TaskSpec::ClassifySynth { n_per_class, .. }, "n_per_class") => *n_per_class = as_usize(key, v)?,
            (TaskSpec::ClassifySynth { num_classes, .. }, "num_classes") => *num_classes = as_usize(key, v)?,
            (TaskSpec::ClassifySynth { easy_fraction, .. }, "easy_fraction") => {
                *easy_fraction = as_f64(key, v)?
            }
            (TaskSpec::ClassifyCifar10 { data_dir }, "data_dir") => *data_dir = PathBuf::from(as_str(key, v)?),
            (TaskSpec::CountSynth { n_images, .. }, "n_images") => *n_images = as_usize(key, v)?,
            (TaskSpec::CountSynth { image_size, .. }, "image_size") => *image_size = as_usize(key, v)?,
            (TaskSpec::CountSynth { max_objects, .. }, "max_objects") => *max_objects = as_usize(key, v)?,
            (TaskSpec::CountSynth { sigma, .. }, "sigma") => *sigma = as_f64(key, v)?,
            _ => return Err(misplaced()),
        }
        Ok(())
    }

    /// Fill task-dependent defaults and validate.
    pub fn finalize(&mut self) -> Result<()> {
        if !self.explicit.contains("lr") {
            self.train.lr = if self.task.is_classification() { 1e-2 } else { 1e-3 };
        }
        let conv = self.model.starts_with("conv");
        if conv == self.task.is_classification() {
            return Err(Error::Config(format!(
                "model {} does not fit task {}",
                self.model,
                self.task.name()
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        if !(0.0..0.9).contains(&self.val_fraction) {
            return Err(Error::Config(format!(
                "val_fraction must be in [0, 0.9), got {}",
                self.val_fraction
            )));
        }
        for a in &self.alphas {
            if !(0.0..1.0).contains(a) {
                return Err(Error::Config(format!("alphas entries must be in [0, 1), got {a}")));
            }
        }
        self.threads = self.threads.max(1);
        self.train.validate()
    }

    /// The data-side settings recorded in each run's manifest.
    pub fn echo(&self) -> ExperimentEcho {
        ExperimentEcho {
            task: self.task.clone(),
            model_preset: self.model.clone(),
            val_fraction: self.val_fraction,
        }
    }

    /// Rebuild the single-seed spec a manifest was produced from.
    pub fn from_manifest(manifest: &RunManifest) -> Result<Self> {
        let echo = manifest.experiment.as_ref().ok_or_else(|| {
            Error::Config("manifest has no experiment echo; it was not produced by a command".into())
        })?;
        let mut spec = ExperimentSpec {
            task: echo.task.clone(),
            model: echo.model_preset.clone(),
            train: manifest.config.clone(),
            seeds: vec![manifest.config.seed],
            val_fraction: echo.val_fraction,
            ..Default::default()
        };
        spec.explicit.extend(["lr".to_string(), "model".to_string()]);
        spec.finalize()?;
        Ok(spec)
    }

    /// Training config for one seed.
    pub fn config_for_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            seed,
            ..self.train.clone()
        }
    }

    /// Load train/val/test for `seed`. Synthetic tasks derive the data from
    /// the seed; CIFAR-10 is read from `data_dir`.
    pub fn load_data(&self, seed: u64) -> Result<TaskData> {
        let (train, test, normalization) = match &self.task {
            TaskSpec::ClassifySynth {
                n_per_class,
                num_classes,
                easy_fraction,
            } => {
                let g = SynthClassification::new(seed, *n_per_class, *num_classes, *easy_fraction);
                (g.generate(Split::Train)?, g.generate(Split::Test)?, None)
            }
            TaskSpec::ClassifyCifar10 { data_dir } => {
                let c = load_cifar10(data_dir)?;
                (c.train, c.test, Some(c.normalization))
            }
            TaskSpec::CountSynth {
                n_images,
                image_size,
                max_objects,
                sigma,
            } => {
                let g = SynthCounting::new(seed, *n_images, *image_size, *max_objects, *sigma);
                let test = SynthCounting {
                    n_images: (*n_images / 3).max(1),
                    ..g.clone()
                };
                (g.generate(Split::Train)?, test.generate(Split::Test)?, None)
            }
        };
        let (train, val) = train.carve(self.val_fraction, seed, Split::Val)?;
        Ok(TaskData {
            train,
            val,
            test,
            normalization,
        })
    }

    /// Resolve the model preset against the data's feature shape.
    pub fn architecture(&self, train: &Dataset) -> Result<Architecture> {
        let shape = train.feature_shape();
        let input_dim: usize = shape.iter().product();
        let mlp = |hidden: Vec<usize>| Architecture::Mlp {
            input_dim,
            hidden,
            num_classes: train.num_classes(),
        };
        let conv = |c: [usize; 2]| -> Result<Architecture> {
            match shape {
                [cin, h, w] => Ok(Architecture::DensityConv {
                    in_channels: *cin,
                    height: *h,
                    width: *w,
                    channels: c,
                    kernel: 3,
                }),
                _ => Err(Error::Config(format!("conv models need (C, H, W) inputs, got {shape:?}"))),
            }
        };
        let arch = match self.model.as_str() {
            "mlp-linear" => mlp(vec![]),
            "mlp-small" => mlp(vec![32]),
            "mlp-medium" => mlp(vec![64, 32]),
            "conv-tiny" => conv([4, 4])?,
            "conv-small" => conv([8, 8])?,
            other => return Err(unknown_choice("model", other, MODELS)),
        };
        arch.validate()?;
        Ok(arch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_table() {
        let spec = ExperimentSpec::from_toml_str(
            r#"
            task = "classify-synth"
            n_per_class = 50
            alpha = 0.4
            budget_seconds = 12.5
            seeds = [3, 4]
            stratified = false
            "#,
        )
        .unwrap();
        assert_eq!(spec.train.alpha, 0.4);
        assert_eq!(spec.train.budget_seconds, Some(12.5));
        assert_eq!(spec.seeds, vec![3, 4]);
        assert!(!spec.train.stratified);
        assert_eq!(spec.train.lr, 1e-2);
        assert!(matches!(spec.task, TaskSpec::ClassifySynth { n_per_class: 50, .. }));
    }

    #[test]
    fn unknown_key_lists_allowed() {
        let err = ExperimentSpec::from_toml_str("alpah = 0.3").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("alpah") && msg.contains("alpha") && msg.contains("budget_seconds"));
        assert_eq!(err.exit_code(), 2);
        let err = ExperimentSpec::from_toml_str("task = \"mnist\"").unwrap_err();
        assert!(err.to_string().contains("count-synth"));
    }

    #[test]
    fn overrides_win_and_validate() {
        let mut spec = ExperimentSpec::from_toml_str("alpha = 0.2").unwrap();
        spec.apply_override("alpha=0.35").unwrap();
        assert_eq!(spec.train.alpha, 0.35);
        spec.apply_override("mode=baseline").unwrap();
        assert_eq!(spec.train.mode, Mode::Baseline);
        assert!(spec.apply_override("alpha=1.5").is_err());
        assert!(spec.apply_override("alpha").is_err());
    }

    #[test]
    fn task_keys_must_match_task() {
        let err = ExperimentSpec::from_toml_str("task = \"count-synth\"\nn_per_class = 4").unwrap_err();
        assert!(err.to_string().contains("n_per_class"));
        let spec = ExperimentSpec::from_toml_str("task = \"count-synth\"\nimage_size = 20").unwrap();
        assert_eq!(spec.model, "conv-tiny");
        assert_eq!(spec.train.lr, 1e-3);
        assert!(ExperimentSpec::from_toml_str("task = \"count-synth\"\nmodel = \"mlp-small\"").is_err());
    }

    #[test]
    fn architecture_from_data() {
        let spec = ExperimentSpec::from_toml_str("n_per_class = 10\nmodel = \"mlp-medium\"").unwrap();
        let data = spec.load_data(0).unwrap();
        let arch = spec.architecture(&data.train).unwrap();
        assert_eq!(
            arch,
            Architecture::Mlp {
                input_dim: 16,
                hidden: vec![64, 32],
                num_classes: 10
            }
        );
        assert_eq!(data.train.len() + data.val.len(), 100);
        assert!(data.val.ids().iter().all(|id| !data.train.contains(*id)));
    }
}
