//! The budgeted training loop and the random-sampling baseline.
//!
//! TFTB mode runs in three stages:
//!
//! 1. **Warm-up.** `warmup_epochs` shuffled passes over the full training set.
//!    Every per-sample loss is recorded in the importance ledger and the
//!    elapsed time gives the first batch-time estimate `tb`.
//! 2. **Selection.** Effective scores are ranked and the top `(1 - alpha)`
//!    fraction (per class when stratified) becomes the active subset.
//! 3. **Subset epochs.** Each epoch-equivalent draws exactly as many samples as
//!    one full pass, cycling the reshuffled subset. Losses are recorded, and
//!    every `rerank_period` epochs the subset and the excluded samples are
//!    merged and re-ranked. The loop ends when the budget cannot fit another
//!    batch, the planned iterations run out, early stopping fires or
//!    `max_epochs` is reached.
//!
//! Baseline mode shuffles the full dataset every epoch and otherwise shares the
//! optimiser, evaluation, early stopping and budget enforcement.
//!
//! Time is tiled: every interval between two readings of the time source is
//! charged to the budget clock either as batch time or as overhead.

pub mod manifest;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::budget::{BudgetClock, MonotonicClock, TimeSource, WorkEvent};
use crate::data::{Dataset, SampleId};
use crate::error::{Error, Result};
use crate::importance::{
    adapt_alpha, merge_and_reselect, select_subset, AdaptiveAlpha, ImportanceLedger, SubsetPlan,
};
use crate::loss::{self, LossKind};
use crate::metrics::{self, Evaluation};
use crate::model::ModelParams;
use crate::optim::{adam_step, AdamState};

pub use manifest::{EpochReport, ExperimentEcho, Phase, RunManifest, StopReason, MANIFEST_SCHEMA};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Baseline,
    Tftb,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mode: Mode,
    /// Fraction of the training set excluded from the active subset.
    pub alpha: f64,
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Must match the dataset's task when set.
    pub loss_kind: Option<LossKind>,
    /// Wall-clock budget `T`; `None` runs unbounded.
    pub budget_seconds: Option<f64>,
    /// Cap on epochs (warm-up included).
    pub max_epochs: usize,
    pub rerank_period: usize,
    pub lambda_var: f64,
    /// Loss history length per sample.
    pub window: usize,
    pub stratified: bool,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub adaptive_alpha: Option<AdaptiveAlpha>,
    /// Re-score excluded samples with a forward pass every this many epochs.
    pub refresh_excluded_every: Option<usize>,
    /// Collect a ledger CSV snapshot after every selection.
    pub ledger_dump: bool,
    /// Evaluation chunk size (does not affect training).
    pub eval_batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mode: Mode::Tftb,
            alpha: 0.3,
            warmup_epochs: 1,
            batch_size: 32,
            lr: 1e-3,
            loss_kind: None,
            budget_seconds: None,
            max_epochs: 20,
            rerank_period: 1,
            lambda_var: 1.0,
            window: 5,
            stratified: true,
            early_stop_patience: 5,
            seed: 0,
            adaptive_alpha: None,
            refresh_excluded_every: None,
            ledger_dump: false,
            eval_batch_size: 256,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(0.0..1.0).contains(&self.alpha) {
            return fail(format!("alpha must be in [0, 1), got {}", self.alpha));
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.early_stop_patience == 0 {
            return fail("early_stop_patience must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be positive, got {}", self.lr));
        }
        if self.max_epochs == 0 || self.rerank_period == 0 || self.window == 0 {
            return fail("max_epochs, rerank_period and window must be at least 1".into());
        }
        if self.mode == Mode::Tftb && self.warmup_epochs == 0 {
            return fail("warmup_epochs must be at least 1 in tftb mode".into());
        }
        if !(self.lambda_var >= 0.0 && self.lambda_var.is_finite()) {
            return fail(format!("lambda_var must be >= 0, got {}", self.lambda_var));
        }
        if let Some(t) = self.budget_seconds {
            if !(t > 0.0) {
                return fail(format!("budget_seconds must be positive, got {t}"));
            }
        }
        if self.refresh_excluded_every == Some(0) {
            return fail("refresh_excluded_every must be at least 1".into());
        }
        if let Some(a) = &self.adaptive_alpha {
            a.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// Batches in one epoch-equivalent: `ceil(dataset_size / batch_size)`.
pub fn epoch_equivalent_batches(dataset_size: usize, batch_size: usize) -> usize {
    dataset_size.div_ceil(batch_size.max(1))
}

/// True iff the best validation loss has not improved by more than `1e-9`
/// for `patience` consecutive epochs.
pub fn early_stop_check(val_losses: &[f64], patience: usize) -> bool {
    let mut best = f64::INFINITY;
    let mut since = 0usize;
    for &v in val_losses {
        if v < best - 1e-9 {
            best = v;
            since = 0;
        } else {
            since += 1;
        }
    }
    since >= patience.max(1)
}

/// Fill `len` slots by cycling reshuffled copies of `subset`.
pub fn epoch_stream(subset: &[SampleId], len: usize, rng: &mut ChaCha8Rng) -> Vec<SampleId> {
    let mut out = Vec::with_capacity(len);
    if subset.is_empty() {
        return out;
    }
    while out.len() < len {
        let mut perm = subset.to_vec();
        perm.shuffle(rng);
        let take = (len - out.len()).min(perm.len());
        out.extend_from_slice(&perm[..take]);
    }
    out
}

pub struct TrainOutcome {
    pub params: ModelParams,
    pub manifest: RunManifest,
    /// Importance ledger at exit (TFTB mode only).
    pub ledger: Option<ImportanceLedger>,
    pub final_plan: Option<SubsetPlan>,
    /// Times each training id appeared in a batch.
    pub exposure: BTreeMap<SampleId, u64>,
    pub ledger_csv: Option<String>,
}

/// TFTB training on the process monotonic clock.
pub fn train_tftb(
    params: ModelParams,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if cfg.mode != Mode::Tftb {
        return Err(Error::Config("train_tftb needs mode = tftb".into()));
    }
    train_with_clock(params, train, val, cfg, &mut MonotonicClock::new())
}

/// Random-sampling baseline on the process monotonic clock.
pub fn train_baseline(
    params: ModelParams,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    if cfg.mode != Mode::Baseline {
        return Err(Error::Config("train_baseline needs mode = baseline".into()));
    }
    train_with_clock(params, train, val, cfg, &mut MonotonicClock::new())
}

/// Train in `cfg.mode` against an explicit time source.
pub fn train_with_clock(
    params: ModelParams,
    train: &Dataset,
    val: Option<&Dataset>,
    cfg: &TrainConfig,
    time: &mut dyn TimeSource,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    let kind = train.loss_kind();
    if let Some(k) = cfg.loss_kind {
        if k != kind {
            return Err(Error::Config(format!(
                "loss_kind {} does not match the dataset ({})",
                k.name(),
                kind.name()
            )));
        }
    }
    if let Some(v) = val {
        if v.ids().iter().any(|id| train.contains(*id)) {
            return Err(Error::invalid("validation ids overlap the training set"));
        }
    }
    let clock = match cfg.budget_seconds {
        Some(t) => BudgetClock::new(t)?,
        None => BudgetClock::unbounded(),
    };
    let mut engine = Engine {
        cfg,
        train,
        val: val.filter(|v| !v.is_empty()),
        adam: AdamState::new(&params),
        params,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        mark: time.now(),
        time,
        clock,
        kind,
        reports: Vec::new(),
        val_losses: Vec::new(),
        eval_cost: None,
        selection_cost: None,
        exposure: BTreeMap::new(),
        ledger: None,
        plan: None,
        ledger_csv: cfg.ledger_dump.then(String::new),
        alpha: cfg.alpha,
    };
    let stop = match cfg.mode {
        Mode::Baseline => engine.run_baseline(),
        Mode::Tftb => engine.run_tftb(),
    };
    match stop {
        Ok(reason) => Ok(engine.finish(reason)),
        Err(e @ (Error::BudgetTooSmall { .. } | Error::Config(_))) => Err(e),
        Err(e) => {
            let detail = e.to_string();
            let mut outcome = engine.finish(StopReason::BudgetExhausted);
            outcome.manifest.error = Some(detail);
            Err(Error::TrainingAborted {
                source: Box::new(e),
                manifest: Box::new(outcome.manifest),
            })
        }
    }
}

/// How the batch loop accounts time.
#[derive(Clone, Copy)]
enum Accounting {
    /// Warm-up: time accumulates from `start` and is measured in one piece.
    Warmup { start: f64, batches_before: u64 },
    /// Every batch and gap is charged to the clock as it happens.
    Charged,
}

struct BatchStats {
    loss_sum: f64,
    samples: u64,
    batches: u64,
    stop: Option<StopReason>,
}

struct Engine<'a> {
    cfg: &'a TrainConfig,
    train: &'a Dataset,
    val: Option<&'a Dataset>,
    params: ModelParams,
    adam: AdamState,
    rng: ChaCha8Rng,
    time: &'a mut dyn TimeSource,
    mark: f64,
    clock: BudgetClock,
    kind: LossKind,
    reports: Vec<EpochReport>,
    val_losses: Vec<f64>,
    eval_cost: Option<f64>,
    selection_cost: Option<f64>,
    exposure: BTreeMap<SampleId, u64>,
    ledger: Option<ImportanceLedger>,
    plan: Option<SubsetPlan>,
    ledger_csv: Option<String>,
    alpha: f64,
}

impl Engine<'_> {
    /// Seconds since the previous tick.
    fn tick(&mut self) -> f64 {
        let now = self.time.now();
        let dt = (now - self.mark).max(0.0);
        self.mark = now;
        dt
    }

    fn charge_gap(&mut self) -> Result<()> {
        let dt = self.tick();
        self.clock.charge(dt)
    }

    fn run_batches(
        &mut self,
        order: &[SampleId],
        epoch: usize,
        accounting: Accounting,
        planned: &mut Option<u64>,
    ) -> Result<BatchStats> {
        let mut stats = BatchStats {
            loss_sum: 0.0,
            samples: 0,
            batches: 0,
            stop: None,
        };
        for ids in order.chunks(self.cfg.batch_size) {
            match accounting {
                Accounting::Charged => {
                    self.charge_gap()?;
                    if self.clock.should_stop() {
                        stats.stop = Some(StopReason::BudgetExhausted);
                        break;
                    }
                    if *planned == Some(0) {
                        stats.stop = Some(StopReason::PlannedIterations);
                        break;
                    }
                }
                Accounting::Warmup {
                    start,
                    batches_before,
                } => {
                    let elapsed = self.time.now() - start;
                    let done = batches_before + stats.batches;
                    if done > 0 {
                        let avg = elapsed / done as f64;
                        if self.clock.would_overrun(elapsed + avg) {
                            stats.stop = Some(StopReason::BudgetExhausted);
                            break;
                        }
                    }
                }
            }
            let (x, t) = self.train.gather(ids)?;
            let r = loss::loss_and_grad(&self.params, &x, &t, self.kind).map_err(|e| match e {
                Error::NonFiniteLoss { position } => Error::NonFiniteSampleLoss {
                    sample: ids[position],
                },
                other => other,
            })?;
            adam_step(&mut self.params, &r.gradients, &mut self.adam, self.cfg.lr)?;
            self.time.note(WorkEvent::Batch);
            let dt = self.tick();
            match accounting {
                Accounting::Charged => {
                    self.clock.charge_batch(dt)?;
                    if let Some(p) = planned.as_mut() {
                        *p = p.saturating_sub(1);
                    }
                }
                Accounting::Warmup { .. } => self.clock.observe_batch_duration(dt),
            }
            if let Some(ledger) = self.ledger.as_mut() {
                let obs: Vec<(SampleId, f64)> = ids
                    .iter()
                    .copied()
                    .zip(r.per_sample_losses.iter().copied())
                    .collect();
                ledger.record_losses(&obs, epoch)?;
            }
            for id in ids {
                *self.exposure.entry(*id).or_insert(0) += 1;
            }
            stats.loss_sum += r.per_sample_losses.iter().sum::<f64>();
            stats.samples += ids.len() as u64;
            stats.batches += 1;
        }
        Ok(stats)
    }

    /// Validation pass. In charged mode it is skipped (returning `None`) when
    /// the last measured evaluation cost no longer fits the budget.
    fn validate(&mut self, charged: bool) -> Result<Option<Evaluation>> {
        let Some(val) = self.val else {
            return Ok(None);
        };
        if charged {
            self.charge_gap()?;
            if let Some(est) = self.eval_cost {
                if self.clock.would_overrun(est) {
                    return Ok(None);
                }
            }
        }
        let eval = metrics::evaluate(&self.params, val, self.cfg.eval_batch_size)?;
        self.time.note(WorkEvent::Evaluation { samples: val.len() });
        if charged {
            let dt = self.tick();
            self.clock.charge(dt)?;
            self.eval_cost = Some(self.eval_cost.map_or(dt, |c| c.max(dt)));
        }
        Ok(Some(eval))
    }

    #[allow(clippy::too_many_arguments)]
    fn report(
        &mut self,
        epoch: usize,
        phase: Phase,
        stats: &BatchStats,
        eval: Option<&Evaluation>,
        subset_size: usize,
        epoch_start: f64,
        consumed: f64,
    ) {
        let (val_loss, val_metric) = match eval {
            Some(e) => (Some(e.mean_loss), e.headline().map(|h| h.1)),
            None => (None, None),
        };
        let full = self.train.len() as u64;
        self.reports.push(EpochReport {
            epoch,
            phase,
            mean_train_loss: if stats.samples > 0 {
                stats.loss_sum / stats.samples as f64
            } else {
                0.0
            },
            val_loss,
            val_metric,
            subset_size,
            alpha: if phase == Phase::Subset { self.alpha } else { 0.0 },
            samples_seen: stats.samples,
            batches: stats.batches,
            wall_seconds: self.time.now() - epoch_start,
            consumed_seconds: consumed,
            partial: stats.samples < full,
        });
    }

    /// Record validation loss; true when early stopping fires.
    fn early_stop(&mut self, eval: Option<&Evaluation>) -> bool {
        match eval {
            Some(e) => {
                self.val_losses.push(e.mean_loss);
                early_stop_check(&self.val_losses, self.cfg.early_stop_patience)
            }
            None => false,
        }
    }

    fn run_baseline(&mut self) -> Result<StopReason> {
        let all = self.train.ids();
        let mut planned = None;
        for epoch in 1..=self.cfg.max_epochs {
            let epoch_start = self.time.now();
            let mut order = all.clone();
            order.shuffle(&mut self.rng);
            let stats = self.run_batches(&order, epoch, Accounting::Charged, &mut planned)?;
            if stats.batches == 0 {
                return Ok(stats.stop.unwrap_or(StopReason::BudgetExhausted));
            }
            let eval = if stats.stop.is_none() {
                self.validate(true)?
            } else {
                None
            };
            let consumed = self.clock.consumed();
            self.report(epoch, Phase::Full, &stats, eval.as_ref(), all.len(), epoch_start, consumed);
            if let Some(reason) = stats.stop {
                return Ok(reason);
            }
            if eval.is_none() && self.val.is_some() {
                return Ok(StopReason::BudgetExhausted);
            }
            if self.early_stop(eval.as_ref()) {
                return Ok(StopReason::EarlyStopping);
            }
        }
        Ok(StopReason::MaxEpochs)
    }

    /// One forward+backward on the first batch, without an update, to check
    /// that the warm-up fits the budget at all.
    fn probe_warmup(&mut self) -> Result<()> {
        let Some(total) = self.cfg.budget_seconds else {
            return Ok(());
        };
        self.charge_gap()?;
        let ids: Vec<SampleId> = self.train.ids().into_iter().take(self.cfg.batch_size).collect();
        let (x, t) = self.train.gather(&ids)?;
        loss::loss_and_grad(&self.params, &x, &t, self.kind)?;
        self.time.note(WorkEvent::Batch);
        let dt = self.tick();
        self.clock.charge(dt)?;
        let batches = epoch_equivalent_batches(self.train.len(), self.cfg.batch_size);
        let warm = self.cfg.warmup_epochs.min(self.cfg.max_epochs);
        let estimate = dt * (batches * warm) as f64;
        if self.clock.would_overrun(estimate) {
            return Err(Error::BudgetTooSmall {
                budget: total,
                estimate: estimate + self.clock.consumed(),
            });
        }
        Ok(())
    }

    fn select(&mut self, epoch: usize) -> Result<bool> {
        self.charge_gap()?;
        if let Some(est) = self.selection_cost {
            if self.clock.would_overrun(est) {
                return Ok(false);
            }
        }
        let population = self.train.population();
        let ledger = self.ledger.as_mut().expect("ledger exists in tftb mode");
        let plan = match &self.plan {
            None => {
                let scores = ledger.refresh(self.cfg.lambda_var)?;
                select_subset(&scores, &population, self.alpha, self.cfg.stratified, epoch)?
            }
            Some(prev) => merge_and_reselect(
                ledger,
                prev,
                &population,
                self.alpha,
                self.cfg.lambda_var,
                self.cfg.stratified,
            )?,
        };
        if let Some(csv) = self.ledger_csv.as_mut() {
            let mut buf = Vec::new();
            ledger
                .write_csv(&mut buf, epoch, Some(&plan), csv.is_empty())
                .map_err(|e| Error::io("<ledger csv>", e))?;
            csv.push_str(&String::from_utf8_lossy(&buf));
        }
        self.plan = Some(plan);
        self.time.note(WorkEvent::Selection {
            samples: population.len(),
        });
        let dt = self.tick();
        self.clock.charge(dt)?;
        self.selection_cost = Some(self.selection_cost.map_or(dt, |c| c.max(dt)));
        Ok(true)
    }

    /// Forward-only losses for the excluded samples.
    fn refresh_excluded(&mut self, epoch: usize) -> Result<bool> {
        let excluded = match &self.plan {
            Some(p) if !p.excluded.is_empty() => p.excluded.clone(),
            _ => return Ok(true),
        };
        self.charge_gap()?;
        if let Some(est) = self.eval_cost {
            let per_sample = est / self.val.map_or(1, |v| v.len().max(1)) as f64;
            if self.clock.would_overrun(per_sample * excluded.len() as f64) {
                return Ok(false);
            }
        }
        let mut obs = Vec::with_capacity(excluded.len());
        for part in excluded.chunks(self.cfg.eval_batch_size.max(1)) {
            let (x, t) = self.train.gather(part)?;
            let losses = loss::per_sample_losses(&self.params, &x, &t, self.kind)?;
            obs.extend(part.iter().copied().zip(losses));
        }
        self.ledger
            .as_mut()
            .expect("ledger exists in tftb mode")
            .record_losses(&obs, epoch)?;
        self.time.note(WorkEvent::Evaluation {
            samples: excluded.len(),
        });
        let dt = self.tick();
        self.clock.charge(dt)?;
        Ok(true)
    }

    fn run_tftb(&mut self) -> Result<StopReason> {
        self.probe_warmup()?;
        self.ledger = Some(ImportanceLedger::new(self.train.ids(), self.cfg.window)?);
        let all = self.train.ids();
        let n = all.len();
        let warm_epochs = self.cfg.warmup_epochs.min(self.cfg.max_epochs);

        // warm-up on the full dataset
        self.charge_gap()?;
        let warm_start = self.mark;
        let mut warm_batches = 0u64;
        let mut stop = None;
        let mut no_plan = None;
        for epoch in 1..=warm_epochs {
            let epoch_start = self.time.now();
            let mut order = all.clone();
            order.shuffle(&mut self.rng);
            let stats = self.run_batches(
                &order,
                epoch,
                Accounting::Warmup {
                    start: warm_start,
                    batches_before: warm_batches,
                },
                &mut no_plan,
            )?;
            warm_batches += stats.batches;
            if stats.batches == 0 {
                stop = stats.stop;
                break;
            }
            let eval = if stats.stop.is_none() {
                self.validate(false)?
            } else {
                None
            };
            let consumed = self.clock.consumed() + (self.time.now() - warm_start);
            self.report(epoch, Phase::Warmup, &stats, eval.as_ref(), n, epoch_start, consumed);
            if stats.stop.is_some() {
                stop = stats.stop;
                break;
            }
            if self.early_stop(eval.as_ref()) {
                stop = Some(StopReason::EarlyStopping);
                break;
            }
        }
        let now = self.time.now();
        let warm_elapsed = (now - warm_start).max(0.0);
        self.mark = now;
        if warm_batches > 0 && warm_elapsed > 0.0 {
            self.clock.measure_warmup(warm_batches, warm_elapsed)?;
        } else {
            self.clock.charge(warm_elapsed)?;
        }
        if let Some(reason) = stop {
            return Ok(reason);
        }
        if warm_epochs == self.cfg.max_epochs {
            return Ok(StopReason::MaxEpochs);
        }

        if !self.select(warm_epochs)? {
            return Ok(StopReason::BudgetExhausted);
        }
        let mut planned = self.clock.tb().map(|_| self.clock.plan_iterations()).transpose()?;

        for epoch in warm_epochs + 1..=self.cfg.max_epochs {
            let epoch_start = self.time.now();
            let subset = self.plan.as_ref().expect("selected above").selected.clone();
            let order = epoch_stream(&subset, n, &mut self.rng);
            let stats = self.run_batches(&order, epoch, Accounting::Charged, &mut planned)?;
            if stats.batches == 0 {
                return Ok(stats.stop.unwrap_or(StopReason::BudgetExhausted));
            }
            let eval = if stats.stop.is_none() {
                self.validate(true)?
            } else {
                None
            };
            let consumed = self.clock.consumed();
            self.report(epoch, Phase::Subset, &stats, eval.as_ref(), subset.len(), epoch_start, consumed);
            if let Some(reason) = stats.stop {
                return Ok(reason);
            }
            if eval.is_none() && self.val.is_some() {
                return Ok(StopReason::BudgetExhausted);
            }
            if self.early_stop(eval.as_ref()) {
                return Ok(StopReason::EarlyStopping);
            }
            if epoch == self.cfg.max_epochs {
                break;
            }
            let since_warmup = epoch - warm_epochs;
            if let Some(cfg) = &self.cfg.adaptive_alpha {
                let history: Vec<f64> = self.reports.iter().map(|r| r.mean_train_loss).collect();
                if history.len() >= cfg.window {
                    self.alpha = adapt_alpha(self.alpha, &history, cfg)?;
                }
            }
            if let Some(every) = self.cfg.refresh_excluded_every {
                if since_warmup.is_multiple_of(every) && !self.refresh_excluded(epoch)? {
                    return Ok(StopReason::BudgetExhausted);
                }
            }
            if since_warmup.is_multiple_of(self.cfg.rerank_period) && !self.select(epoch)? {
                return Ok(StopReason::BudgetExhausted);
            }
            planned = Some(self.clock.plan_iterations()?);
        }
        Ok(StopReason::MaxEpochs)
    }

    fn finish(mut self, reason: StopReason) -> TrainOutcome {
        let _ = self.charge_gap();
        let manifest = RunManifest {
            schema: MANIFEST_SCHEMA.to_string(),
            mode: self.cfg.mode,
            experiment: None,
            config: self.cfg.clone(),
            model: self.params.architecture().clone(),
            parameter_count: self.params.parameter_count(),
            train_size: self.train.len(),
            val_size: self.val.map_or(0, |v| v.len()),
            train_fingerprint: self.train.fingerprint(),
            val_fingerprint: self.val.map(|v| v.fingerprint()),
            test_fingerprint: None,
            normalization: None,
            epochs: std::mem::take(&mut self.reports),
            budget: self.clock.trace(),
            stop_reason: reason,
            val_metric_name: self.val.map(|_| {
                match self.kind {
                    LossKind::CrossEntropy => "accuracy",
                    LossKind::PixelwiseL2 => "mae",
                }
                .to_string()
            }),
            final_metrics: BTreeMap::new(),
            error: None,
        };
        TrainOutcome {
            params: self.params,
            manifest,
            ledger: self.ledger,
            final_plan: self.plan,
            exposure: self.exposure,
            ledger_csv: self.ledger_csv,
        }
    }
}
