//! The run manifest: config echo, per-epoch reports, budget trace, final metrics.
//!
//! Serialized as pretty-printed JSON. The `schema` field is versioned; readers
//! reject manifests with a different schema string. Nothing wall-clock-dated is
//! stored, so two runs under the same virtual clock produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mode, TrainConfig};
use crate::budget::BudgetTrace;
use crate::config::TaskSpec;
use crate::data::ChannelNorm;
use crate::error::{Error, Result};
use crate::metrics::Evaluation;
use crate::model::Architecture;

pub const MANIFEST_SCHEMA: &str = "tftb-run-manifest/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    /// Full-dataset epoch that also seeds the importance ledger.
    Warmup,
    /// Baseline epoch over the full, shuffled dataset.
    Full,
    /// Epoch-equivalent drawn from the active subset.
    Subset,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    BudgetExhausted,
    PlannedIterations,
    EarlyStopping,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochReport {
    /// 1-based; warm-up epochs count.
    pub epoch: usize,
    pub phase: Phase,
    pub mean_train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_metric: Option<f64>,
    pub subset_size: usize,
    pub alpha: f64,
    pub samples_seen: u64,
    pub batches: u64,
    pub wall_seconds: f64,
    pub consumed_seconds: f64,
    /// Set when the budget cut the epoch short.
    pub partial: bool,
}

/// Data-side settings of a run launched from an experiment spec. With the
/// echoed `config` they are enough to rerun it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentEcho {
    pub task: TaskSpec,
    pub model_preset: String,
    pub val_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub mode: Mode,
    /// Absent for runs driven directly through the library.
    pub experiment: Option<ExperimentEcho>,
    pub config: TrainConfig,
    pub model: Architecture,
    pub parameter_count: usize,
    pub train_size: usize,
    pub val_size: usize,
    pub train_fingerprint: String,
    pub val_fingerprint: Option<String>,
    pub test_fingerprint: Option<String>,
    pub normalization: Option<ChannelNorm>,
    pub epochs: Vec<EpochReport>,
    pub budget: BudgetTrace,
    pub stop_reason: StopReason,
    pub val_metric_name: Option<String>,
    /// Test-split metrics keyed `test_<metric>`, plus `test_loss`.
    pub final_metrics: BTreeMap<String, f64>,
    /// Present when training aborted.
    pub error: Option<String>,
}

impl RunManifest {
    pub fn label(&self) -> String {
        match self.mode {
            Mode::Baseline => format!("baseline/seed{}", self.config.seed),
            Mode::Tftb => format!("tftb-a{}/seed{}", self.config.alpha, self.config.seed),
        }
    }

    pub fn record_test(&mut self, eval: &Evaluation, fingerprint: String) {
        self.final_metrics
            .insert("test_loss".to_string(), eval.mean_loss);
        for (k, v) in &eval.metrics {
            self.final_metrics.insert(format!("test_{k}"), *v);
        }
        self.test_fingerprint = Some(fingerprint);
    }

    pub fn total_samples_seen(&self) -> u64 {
        self.epochs.iter().map(|e| e.samples_seen).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        let found = v
            .get("schema")
            .and_then(|s| s.as_str())
            .unwrap_or("<missing>")
            .to_string();
        if found != MANIFEST_SCHEMA {
            return Err(Error::SchemaMismatch {
                expected: MANIFEST_SCHEMA.to_string(),
                found,
            });
        }
        Ok(serde_json::from_value(v)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// `epoch,split,loss` rows: the train loss of every epoch and the
    /// validation loss where one was measured.
    pub fn loss_curve_csv(&self) -> String {
        let mut s = String::from("epoch,split,loss\n");
        for e in &self.epochs {
            let _ = writeln!(s, "{},train,{}", e.epoch, e.mean_train_loss);
            if let Some(v) = e.val_loss {
                let _ = writeln!(s, "{},val,{}", e.epoch, v);
            }
        }
        s
    }
}
