//! Task metrics and run-to-run comparison.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Split};
use crate::error::{Error, Result};
use crate::loss::{self, LossKind, Targets};
use crate::model::ModelParams;
use crate::tensor::Tensor;
use crate::trainer::manifest::{RunManifest, MANIFEST_SCHEMA};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub split: Split,
    pub metric: String,
    pub value: f64,
    pub n_samples: usize,
}

/// Fraction of predictions equal to their target.
pub fn accuracy(predictions: &[usize], targets: &[usize]) -> Result<f64> {
    if predictions.len() != targets.len() || predictions.is_empty() {
        return Err(Error::invalid(format!(
            "accuracy needs equal non-empty lengths, got {} and {}",
            predictions.len(),
            targets.len()
        )));
    }
    let correct = predictions.iter().zip(targets).filter(|(p, t)| p == t).count();
    Ok(correct as f64 / predictions.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountingErrors {
    pub mae: f64,
    /// Mean of squared count errors, not its root.
    pub mse: f64,
    /// `sqrt(mse)`, the figure counting benchmarks usually label "MSE".
    pub rmse: f64,
}

pub fn counting_errors(estimated: &[f64], truth: &[f64]) -> Result<CountingErrors> {
    if estimated.len() != truth.len() || estimated.is_empty() {
        return Err(Error::invalid(format!(
            "counting errors need equal non-empty lengths, got {} and {}",
            estimated.len(),
            truth.len()
        )));
    }
    let n = estimated.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    for (e, g) in estimated.iter().zip(truth) {
        let d = e - g;
        abs += d.abs();
        sq += d * d;
    }
    let mse = sq / n;
    Ok(CountingErrors {
        mae: abs / n,
        mse,
        rmse: mse.sqrt(),
    })
}

/// Row-wise argmax of `(batch, classes)` logits; ties go to the lowest index.
pub fn argmax_rows(logits: &Tensor) -> Vec<usize> {
    (0..logits.rows())
        .map(|i| {
            logits
                .row(i)
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best })
                .0
        })
        .collect()
}

/// Count per map: the sum of each `(H, W)` slice, clipped below at 0.
pub fn predicted_counts(maps: &Tensor) -> Vec<f64> {
    (0..maps.rows()).map(|i| maps.row(i).iter().sum::<f64>().max(0.0)).collect()
}

/// Loss and task metrics of a model over a whole dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub split: Split,
    pub n_samples: usize,
    pub mean_loss: f64,
    pub metrics: BTreeMap<String, f64>,
}

impl Evaluation {
    /// Headline metric: accuracy for classification, MAE for counting.
    pub fn headline(&self) -> Option<(&str, f64)> {
        ["accuracy", "mae"]
            .iter()
            .find_map(|k| self.metrics.get(*k).map(|v| (*k, *v)))
    }

    pub fn results(&self) -> Vec<EvalResult> {
        self.metrics
            .iter()
            .map(|(k, v)| EvalResult {
                split: self.split,
                metric: k.clone(),
                value: *v,
                n_samples: self.n_samples,
            })
            .collect()
    }
}

pub fn evaluate(params: &ModelParams, data: &Dataset, chunk: usize) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let kind = data.loss_kind();
    let ids = data.ids();
    let mut losses = Vec::with_capacity(ids.len());
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    let mut est = Vec::new();
    let mut truth = Vec::new();
    for part in ids.chunks(chunk.max(1)) {
        let (x, t) = data.gather(part)?;
        let out = params.forward(&x)?;
        match (&t, kind) {
            (Targets::Classes(c), LossKind::CrossEntropy) => {
                preds.extend(argmax_rows(&out));
                labels.extend_from_slice(c);
            }
            (Targets::Maps(m), LossKind::PixelwiseL2) => {
                est.extend(predicted_counts(&out));
                truth.extend((0..m.rows()).map(|i| m.row(i).iter().sum::<f64>()));
            }
            _ => unreachable!("dataset targets follow its loss kind"),
        }
        losses.extend(loss::per_sample_losses(params, &x, &t, kind)?);
    }
    let mut metrics = BTreeMap::new();
    match kind {
        LossKind::CrossEntropy => {
            metrics.insert("accuracy".to_string(), accuracy(&preds, &labels)?);
        }
        LossKind::PixelwiseL2 => {
            let e = counting_errors(&est, &truth)?;
            metrics.insert("mae".to_string(), e.mae);
            metrics.insert("mse".to_string(), e.mse);
            metrics.insert("rmse".to_string(), e.rmse);
        }
    }
    Ok(Evaluation {
        split: data.split(),
        n_samples: data.len(),
        mean_loss: loss::mean(&losses),
        metrics,
    })
}

/// Whether larger values of `metric` are better.
pub fn higher_is_better(metric: &str) -> bool {
    metric.contains("accuracy")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Winner {
    A,
    B,
    Tie,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricDelta {
    pub metric: String,
    pub a: f64,
    pub b: f64,
    /// `b - a`.
    pub delta: f64,
    pub winner: Winner,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: usize,
    pub samples_seen_a: u64,
    pub samples_seen_b: u64,
    pub train_loss_a: f64,
    pub train_loss_b: f64,
    pub val_loss_a: Option<f64>,
    pub val_loss_b: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveTail {
    pub run: Winner,
    pub epoch: usize,
    pub samples_seen: u64,
    pub train_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub label_a: String,
    pub label_b: String,
    pub deltas: Vec<MetricDelta>,
    /// Epochs both runs completed, matched by cumulative samples seen.
    pub aligned: Vec<CurvePoint>,
    /// Epochs only the longer run completed.
    pub remainder: Vec<CurveTail>,
}

/// Compare run `b` against reference run `a`.
pub fn compare_runs(a: &RunManifest, b: &RunManifest) -> Result<Comparison> {
    for m in [a, b] {
        if m.schema != MANIFEST_SCHEMA {
            return Err(Error::SchemaMismatch {
                expected: MANIFEST_SCHEMA.to_string(),
                found: m.schema.clone(),
            });
        }
    }
    if a.test_fingerprint != b.test_fingerprint {
        return Err(Error::FingerprintMismatch {
            a: a.test_fingerprint.clone().unwrap_or_default(),
            b: b.test_fingerprint.clone().unwrap_or_default(),
        });
    }
    let mut deltas = Vec::new();
    for (metric, &va) in &a.final_metrics {
        let Some(&vb) = b.final_metrics.get(metric) else {
            continue;
        };
        let delta = vb - va;
        let winner = if delta == 0.0 {
            Winner::Tie
        } else if (delta > 0.0) == higher_is_better(metric) {
            Winner::B
        } else {
            Winner::A
        };
        deltas.push(MetricDelta {
            metric: metric.clone(),
            a: va,
            b: vb,
            delta,
            winner,
        });
    }
    let cumulative = |m: &RunManifest| -> Vec<u64> {
        m.epochs
            .iter()
            .scan(0u64, |acc, e| {
                *acc += e.samples_seen;
                Some(*acc)
            })
            .collect()
    };
    let (ca, cb) = (cumulative(a), cumulative(b));
    let common = a.epochs.len().min(b.epochs.len());
    let aligned = (0..common)
        .map(|i| CurvePoint {
            epoch: a.epochs[i].epoch,
            samples_seen_a: ca[i],
            samples_seen_b: cb[i],
            train_loss_a: a.epochs[i].mean_train_loss,
            train_loss_b: b.epochs[i].mean_train_loss,
            val_loss_a: a.epochs[i].val_loss,
            val_loss_b: b.epochs[i].val_loss,
        })
        .collect();
    let (longer, tag, cum) = if a.epochs.len() > common {
        (a, Winner::A, &ca)
    } else {
        (b, Winner::B, &cb)
    };
    let remainder = (common..longer.epochs.len())
        .map(|i| CurveTail {
            run: tag,
            epoch: longer.epochs[i].epoch,
            samples_seen: cum[i],
            train_loss: longer.epochs[i].mean_train_loss,
        })
        .collect();
    Ok(Comparison {
        label_a: a.label(),
        label_b: b.label(),
        deltas,
        aligned,
        remainder,
    })
}

impl Comparison {
    /// `metric,a,b,delta,winner` rows, one per shared final metric.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("reference,candidate,metric,reference_value,candidate_value,delta,winner\n");
        for d in &self.deltas {
            let w = match d.winner {
                Winner::A => self.label_a.as_str(),
                Winner::B => self.label_b.as_str(),
                Winner::Tie => "tie",
            };
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                self.label_a, self.label_b, d.metric, d.a, d.b, d.delta, w
            );
        }
        s
    }

    /// Aligned plain-text table of the metric deltas and the loss curves.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "reference: {}", self.label_a);
        let _ = writeln!(s, "candidate: {}", self.label_b);
        let _ = writeln!(
            s,
            "{:<12} {:>12} {:>12} {:>12}  winner",
            "metric", "reference", "candidate", "delta"
        );
        for d in &self.deltas {
            let w = match d.winner {
                Winner::A => "reference",
                Winner::B => "candidate",
                Winner::Tie => "tie",
            };
            let _ = writeln!(
                s,
                "{:<12} {:>12.4} {:>12.4} {:>+12.4}  {}",
                d.metric, d.a, d.b, d.delta, w
            );
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "{:>6} {:>12} {:>12} {:>12}",
            "epoch", "samples", "ref loss", "cand loss"
        );
        for p in &self.aligned {
            let _ = writeln!(
                s,
                "{:>6} {:>12} {:>12.5} {:>12.5}",
                p.epoch, p.samples_seen_a, p.train_loss_a, p.train_loss_b
            );
        }
        for t in &self.remainder {
            let who = if t.run == Winner::A { "reference" } else { "candidate" };
            let _ = writeln!(
                s,
                "{:>6} {:>12} {:>12.5}  ({who} only)",
                t.epoch, t.samples_seen, t.train_loss
            );
        }
        s
    }
}
