//! Wall-clock budget accounting.
//!
//! [`BudgetClock`] is pure bookkeeping over seconds handed to it; where those
//! seconds come from is a [`TimeSource`]. Production runs use
//! [`MonotonicClock`]; tests inject a [`VirtualClock`] whose time only moves
//! when the trainer reports work, so budget behaviour is exactly reproducible.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smoothing factor for the post-warm-up batch-time average.
pub const TB_EMA_BETA: f64 = 0.9;

/// Work the trainer reports to its time source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WorkEvent {
    /// One optimiser step on one mini-batch.
    Batch,
    /// Forward-only loss evaluation over `samples` examples.
    Evaluation { samples: usize },
    /// Scoring, ranking and subset selection over `samples` ids.
    Selection { samples: usize },
}

pub trait TimeSource: Send {
    /// Seconds since an arbitrary fixed origin; never decreases.
    fn now(&mut self) -> f64;

    /// Called right after the trainer finishes a unit of work.
    fn note(&mut self, _event: WorkEvent) {}
}

pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        MonotonicClock {
            origin: Instant::now(),
        }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl TimeSource for MonotonicClock {
    fn now(&mut self) -> f64 {
        self.origin.elapsed().as_secs_f64()
    }
}

/// Scripted time: batches cost `batch_costs[i % len]`, evaluation and
/// selection cost a fixed amount per sample.
#[derive(Clone, Debug, PartialEq)]
pub struct VirtualClock {
    now: f64,
    batch_costs: Vec<f64>,
    next_batch: usize,
    pub eval_cost_per_sample: f64,
    pub selection_cost_per_sample: f64,
}

impl VirtualClock {
    pub fn constant(batch_cost: f64) -> Self {
        Self::scripted(vec![batch_cost])
    }

    pub fn scripted(batch_costs: Vec<f64>) -> Self {
        assert!(
            !batch_costs.is_empty() && batch_costs.iter().all(|c| *c >= 0.0),
            "batch costs must be non-empty and non-negative"
        );
        VirtualClock {
            now: 0.0,
            batch_costs,
            next_batch: 0,
            eval_cost_per_sample: 0.0,
            selection_cost_per_sample: 0.0,
        }
    }

    pub fn with_overheads(mut self, eval_per_sample: f64, selection_per_sample: f64) -> Self {
        self.eval_cost_per_sample = eval_per_sample;
        self.selection_cost_per_sample = selection_per_sample;
        self
    }

    pub fn advance(&mut self, seconds: f64) {
        self.now += seconds.max(0.0);
    }
}

impl TimeSource for VirtualClock {
    fn now(&mut self) -> f64 {
        self.now
    }

    fn note(&mut self, event: WorkEvent) {
        match event {
            WorkEvent::Batch => {
                self.now += self.batch_costs[self.next_batch % self.batch_costs.len()];
                self.next_batch += 1;
            }
            WorkEvent::Evaluation { samples } => {
                self.now += self.eval_cost_per_sample * samples as f64;
            }
            WorkEvent::Selection { samples } => {
                self.now += self.selection_cost_per_sample * samples as f64;
            }
        }
    }
}

/// Time budget `T`, consumed seconds and the measured per-batch cost `tb`.
#[derive(Clone, Debug, PartialEq)]
pub struct BudgetClock {
    total: f64,
    consumed: f64,
    tb: Option<f64>,
    tb_initial: Option<f64>,
    tb_max: f64,
    warmup_seconds: f64,
    warmup_batches: u64,
    batch_seconds: f64,
    overhead_seconds: f64,
    batches: u64,
    remaining_iterations: Option<u64>,
    first_plan: Option<u64>,
}

impl BudgetClock {
    /// `total` may be `f64::INFINITY` for an unbounded run.
    pub fn new(total: f64) -> Result<Self> {
        if !(total > 0.0) {
            return Err(Error::invalid(format!("time budget must be positive, got {total}")));
        }
        Ok(BudgetClock {
            total,
            consumed: 0.0,
            tb: None,
            tb_initial: None,
            tb_max: 0.0,
            warmup_seconds: 0.0,
            warmup_batches: 0,
            batch_seconds: 0.0,
            overhead_seconds: 0.0,
            batches: 0,
            remaining_iterations: None,
            first_plan: None,
        })
    }

    pub fn unbounded() -> Self {
        Self::new(f64::INFINITY).expect("infinity is positive")
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn consumed(&self) -> f64 {
        self.consumed
    }

    pub fn remaining(&self) -> f64 {
        (self.total - self.consumed).max(0.0)
    }

    pub fn tb(&self) -> Option<f64> {
        self.tb
    }

    pub fn tb_max(&self) -> f64 {
        self.tb_max
    }

    pub fn remaining_iterations(&self) -> Option<u64> {
        self.remaining_iterations
    }

    /// `tb = elapsed / batches_processed`, and the warm-up time is consumed.
    pub fn measure_warmup(&mut self, batches_processed: u64, elapsed: f64) -> Result<()> {
        if batches_processed == 0 {
            return Err(Error::invalid("warm-up processed no batches"));
        }
        if !(elapsed > 0.0 && elapsed.is_finite()) {
            return Err(Error::invalid(format!("warm-up elapsed must be positive, got {elapsed}")));
        }
        let tb = elapsed / batches_processed as f64;
        self.tb = Some(tb);
        self.tb_initial = Some(tb);
        self.warmup_seconds += elapsed;
        self.warmup_batches += batches_processed;
        self.batches += batches_processed;
        self.consumed += elapsed;
        Ok(())
    }

    /// Record the duration of a warm-up batch for the `tb_max` statistic only.
    pub fn observe_batch_duration(&mut self, seconds: f64) {
        self.tb_max = self.tb_max.max(seconds);
    }

    /// `floor((T - consumed) / tb)`, at least 0. Also stored on the clock.
    pub fn plan_iterations(&mut self) -> Result<u64> {
        let tb = self
            .tb
            .filter(|t| *t > 0.0)
            .ok_or_else(|| Error::invalid("batch time not measured yet"))?;
        let remaining = self.total - self.consumed;
        let n = if remaining <= 0.0 {
            0
        } else if remaining.is_infinite() {
            u64::MAX
        } else {
            (remaining / tb).floor() as u64
        };
        self.remaining_iterations = Some(n);
        self.first_plan.get_or_insert(n);
        Ok(n)
    }

    /// True iff the next batch, at the current `tb` estimate, would overrun `T`.
    pub fn should_stop(&self) -> bool {
        self.consumed + self.tb.unwrap_or(0.0) > self.total || self.consumed >= self.total
    }

    /// Same rule for an arbitrary upcoming cost.
    pub fn would_overrun(&self, upcoming: f64) -> bool {
        self.consumed + upcoming > self.total
    }

    /// Non-batch work (scoring, ranking, selection, evaluation).
    pub fn charge(&mut self, seconds: f64) -> Result<()> {
        if !(seconds >= 0.0 && seconds.is_finite()) {
            return Err(Error::invalid(format!("cannot charge {seconds} seconds")));
        }
        self.consumed += seconds;
        self.overhead_seconds += seconds;
        Ok(())
    }

    /// One mini-batch; refreshes `tb` as an exponential moving average.
    pub fn charge_batch(&mut self, seconds: f64) -> Result<()> {
        if !(seconds >= 0.0 && seconds.is_finite()) {
            return Err(Error::invalid(format!("cannot charge {seconds} seconds")));
        }
        self.consumed += seconds;
        self.batch_seconds += seconds;
        self.batches += 1;
        self.tb_max = self.tb_max.max(seconds);
        self.tb = Some(match self.tb {
            Some(tb) => TB_EMA_BETA * tb + (1.0 - TB_EMA_BETA) * seconds,
            None => seconds,
        });
        if let Some(r) = self.remaining_iterations.as_mut() {
            *r = r.saturating_sub(1);
        }
        Ok(())
    }

    pub fn trace(&self) -> BudgetTrace {
        BudgetTrace {
            budget_seconds: self.total.is_finite().then_some(self.total),
            warmup_seconds: self.warmup_seconds,
            warmup_batches: self.warmup_batches,
            tb_initial: self.tb_initial,
            tb_final: self.tb,
            tb_max: self.tb_max,
            planned_batches: self.first_plan.filter(|&p| p != u64::MAX),
            executed_batches: self.batches,
            batch_seconds: self.batch_seconds,
            overhead_seconds: self.overhead_seconds,
            consumed_seconds: self.consumed,
        }
    }
}

/// Epoch-equivalents covered by `batches` when one pass over the subset takes
/// `ceil(subset_len / batch_size)` batches.
pub fn epoch_equivalents(batches: u64, subset_len: usize, batch_size: usize) -> f64 {
    let per_pass = subset_len.div_ceil(batch_size.max(1)).max(1);
    batches as f64 / per_pass as f64
}

/// Budget summary recorded in the run manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetTrace {
    pub budget_seconds: Option<f64>,
    pub warmup_seconds: f64,
    pub warmup_batches: u64,
    pub tb_initial: Option<f64>,
    pub tb_final: Option<f64>,
    pub tb_max: f64,
    pub planned_batches: Option<u64>,
    pub executed_batches: u64,
    pub batch_seconds: f64,
    pub overhead_seconds: f64,
    pub consumed_seconds: f64,
}
