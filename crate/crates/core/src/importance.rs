//! Per-sample importance from observed losses, ranking, and subset selection.
//!
//! A sample's effective score is `mean + lambda * std` over the last `W`
//! losses observed for it, so samples whose loss is high, or swings a lot
//! between epochs, rank ahead of ones the model has settled on. Samples that
//! are excluded from training receive no new losses and keep their last
//! score until they are trained on (or explicitly refreshed) again.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::data::{ClassTag, Population, SampleId};
use crate::error::{Error, Result};

pub type Scores = BTreeMap<SampleId, f64>;

#[derive(Clone, Debug, Default, PartialEq)]
struct Entry {
    history: VecDeque<f64>,
    last_epoch: Option<usize>,
    effective: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImportanceLedger {
    window: usize,
    entries: BTreeMap<SampleId, Entry>,
}

/// Population mean and standard deviation (two-pass).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

impl ImportanceLedger {
    pub fn new(ids: impl IntoIterator<Item = SampleId>, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("score window must be at least 1"));
        }
        Ok(ImportanceLedger {
            window,
            entries: ids.into_iter().map(|id| (id, Entry::default())).collect(),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn history(&self, id: SampleId) -> Option<Vec<f64>> {
        self.entries.get(&id).map(|e| e.history.iter().copied().collect())
    }

    pub fn last_observed_epoch(&self, id: SampleId) -> Option<usize> {
        self.entries.get(&id).and_then(|e| e.last_epoch)
    }

    /// Effective score cached by the last [`refresh`](Self::refresh).
    pub fn effective(&self, id: SampleId) -> Option<f64> {
        self.entries.get(&id).and_then(|e| e.effective)
    }

    /// Ids with no observation yet.
    pub fn unobserved(&self) -> Vec<SampleId> {
        self.entries
            .iter()
            .filter(|(_, e)| e.history.is_empty())
            .map(|(id, _)| *id)
            .collect()
    }

    /// Append one loss per observation, evicting the oldest beyond the window.
    ///
    /// The whole batch is validated first; on error the ledger is unchanged.
    pub fn record_losses(&mut self, observations: &[(SampleId, f64)], epoch: usize) -> Result<()> {
        for &(id, loss) in observations {
            if !self.entries.contains_key(&id) {
                return Err(Error::UnknownSample(id));
            }
            if !(loss.is_finite() && loss >= 0.0) {
                return Err(Error::invalid(format!(
                    "loss {loss} for sample {id} must be finite and non-negative"
                )));
            }
        }
        for &(id, loss) in observations {
            let e = self.entries.get_mut(&id).expect("validated above");
            if e.history.len() == self.window {
                e.history.pop_front();
            }
            e.history.push_back(loss);
            e.last_epoch = Some(epoch);
        }
        Ok(())
    }

    /// `mean + lambda * std` of every id's loss window.
    pub fn effective_scores(&self, lambda_var: f64) -> Result<Scores> {
        if !(lambda_var >= 0.0 && lambda_var.is_finite()) {
            return Err(Error::invalid(format!("lambda_var must be >= 0, got {lambda_var}")));
        }
        self.entries
            .iter()
            .map(|(&id, e)| {
                if e.history.is_empty() {
                    return Err(Error::EmptyHistory(id));
                }
                let h: Vec<f64> = e.history.iter().copied().collect();
                let (m, s) = mean_std(&h);
                Ok((id, m + lambda_var * s))
            })
            .collect()
    }

    /// Recompute and cache effective scores; call before any ranking that uses them.
    pub fn refresh(&mut self, lambda_var: f64) -> Result<Scores> {
        let scores = self.effective_scores(lambda_var)?;
        for (id, s) in &scores {
            self.entries.get_mut(id).expect("same key set").effective = Some(*s);
        }
        Ok(scores)
    }

    /// One CSV row per sample: `epoch,sample_id,mean,std,effective_score,selected`.
    pub fn write_csv<W: Write>(
        &self,
        out: &mut W,
        epoch: usize,
        plan: Option<&SubsetPlan>,
        header: bool,
    ) -> std::io::Result<()> {
        if header {
            writeln!(out, "epoch,sample_id,mean,std,effective_score,selected")?;
        }
        let selected: std::collections::HashSet<SampleId> = plan
            .map(|p| p.selected.iter().copied().collect())
            .unwrap_or_default();
        for (id, e) in &self.entries {
            let h: Vec<f64> = e.history.iter().copied().collect();
            let (m, s) = mean_std(&h);
            let eff = e.effective.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{epoch},{id},{m},{s},{eff},{}",
                u8::from(selected.contains(id))
            )?;
        }
        Ok(())
    }
}

/// Descending by score; ties by ascending id.
pub fn rank(scores: &Scores) -> Result<Vec<SampleId>> {
    if scores.is_empty() {
        return Err(Error::invalid("cannot rank an empty score map"));
    }
    if let Some((&id, _)) = scores.iter().find(|(_, s)| s.is_nan()) {
        return Err(Error::NanScore(id));
    }
    let mut ids: Vec<(SampleId, f64)> = scores.iter().map(|(&i, &s)| (i, s)).collect();
    ids.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ids.into_iter().map(|(i, _)| i).collect())
}

/// The active subset and its complement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetPlan {
    /// Retained ids, ascending.
    pub selected: Vec<SampleId>,
    /// Excluded ids, ascending.
    pub excluded: Vec<SampleId>,
    pub alpha: f64,
    pub epoch: usize,
    pub per_class: BTreeMap<String, usize>,
}

impl SubsetPlan {
    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Check that the plan partitions `population` exactly.
    pub fn check_partition(&self, population: &Population) -> Result<()> {
        let mut all: Vec<SampleId> = self.selected.iter().chain(&self.excluded).copied().collect();
        all.sort();
        let expected: Vec<SampleId> = population.ids().collect();
        if all != expected {
            return Err(Error::invalid(
                "subset plan does not partition the dataset ids".to_string(),
            ));
        }
        Ok(())
    }
}

fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(0.0) as usize
}

/// `round((1 - alpha) * n)`, halves rounded up.
pub fn retained_count(n: usize, alpha: f64) -> usize {
    round_half_up((1.0 - alpha) * n as f64)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!("alpha {alpha} not in [0, 1)")));
    }
    Ok(())
}

fn tag_label(tag: ClassTag) -> String {
    match tag {
        ClassTag::Class(c) => c.to_string(),
        ClassTag::Unstratified => "all".to_string(),
    }
}

/// Per-stratum quotas summing to `retained_count(N, alpha)`.
///
/// Each stratum starts at its own rounded share; the difference to the global
/// total is then spread one sample at a time over the largest strata whose
/// rounding went the other way, so every quota stays within 1 of exact.
pub fn stratum_quotas(sizes: &BTreeMap<ClassTag, usize>, alpha: f64) -> Result<BTreeMap<ClassTag, usize>> {
    check_alpha(alpha)?;
    let total: usize = sizes.values().sum();
    let target = retained_count(total, alpha);
    let mut quotas = BTreeMap::new();
    for (&tag, &n) in sizes {
        let q = retained_count(n, alpha);
        if q == 0 && n > 0 {
            return Err(Error::ClassTooSmall {
                class: match tag {
                    ClassTag::Class(c) => c,
                    ClassTag::Unstratified => 0,
                },
                size: n,
                alpha,
            });
        }
        quotas.insert(tag, q);
    }
    let mut order: Vec<ClassTag> = sizes.keys().copied().collect();
    order.sort_by(|a, b| sizes[b].cmp(&sizes[a]).then(a.cmp(b)));
    let exact = |tag: &ClassTag| (1.0 - alpha) * sizes[tag] as f64;
    let mut assigned: usize = quotas.values().sum();
    while assigned < target {
        let pick = order
            .iter()
            .find(|t| (quotas[*t] as f64) < exact(t) && quotas[*t] < sizes[*t])
            .or_else(|| order.iter().find(|t| quotas[*t] < sizes[*t]))
            .copied()
            .ok_or_else(|| Error::invalid("cannot reach retained total"))?;
        *quotas.get_mut(&pick).unwrap() += 1;
        assigned += 1;
    }
    if target < sizes.values().filter(|n| **n > 0).count() {
        return Err(Error::invalid(format!(
            "stratified selection at alpha {alpha} keeps {target} samples, fewer than one per class"
        )));
    }
    while assigned > target {
        let pick = order
            .iter()
            .find(|t| (quotas[*t] as f64) > exact(t) && quotas[*t] > 1)
            .or_else(|| order.iter().find(|t| quotas[*t] > 1))
            .copied()
            .expect("target covers one sample per class");
        *quotas.get_mut(&pick).unwrap() -= 1;
        assigned -= 1;
    }
    Ok(quotas)
}

/// Keep the top `(1 - alpha)` fraction of `population` by score.
///
/// In stratified mode ranking and retention happen within each class tag.
/// `alpha == 0` selects everything.
pub fn select_subset(
    scores: &Scores,
    population: &Population,
    alpha: f64,
    stratified: bool,
    epoch: usize,
) -> Result<SubsetPlan> {
    check_alpha(alpha)?;
    if population.is_empty() {
        return Err(Error::invalid("cannot select from an empty dataset"));
    }
    let strata: BTreeMap<ClassTag, Vec<SampleId>> = if stratified {
        population.strata()
    } else {
        BTreeMap::from([(ClassTag::Unstratified, population.ids().collect())])
    };
    let sizes: BTreeMap<ClassTag, usize> = strata.iter().map(|(t, v)| (*t, v.len())).collect();
    let quotas = stratum_quotas(&sizes, alpha)?;

    let mut selected = Vec::with_capacity(retained_count(population.len(), alpha));
    let mut per_class = BTreeMap::new();
    for (tag, ids) in &strata {
        let local: Scores = ids
            .iter()
            .map(|id| {
                scores
                    .get(id)
                    .map(|s| (*id, *s))
                    .ok_or_else(|| Error::invalid(format!("no score for sample {id}")))
            })
            .collect::<Result<_>>()?;
        let ranked = rank(&local)?;
        let q = quotas[tag];
        selected.extend_from_slice(&ranked[..q]);
        per_class.insert(tag_label(*tag), q);
    }
    selected.sort();
    let chosen: std::collections::HashSet<SampleId> = selected.iter().copied().collect();
    let excluded = population.ids().filter(|id| !chosen.contains(id)).collect();
    Ok(SubsetPlan {
        selected,
        excluded,
        alpha,
        epoch,
        per_class,
    })
}

/// Merge the active subset with the excluded samples, re-rank the whole
/// population on fresh effective scores, and select the next subset.
pub fn merge_and_reselect(
    ledger: &mut ImportanceLedger,
    previous: &SubsetPlan,
    population: &Population,
    alpha: f64,
    lambda_var: f64,
    stratified: bool,
) -> Result<SubsetPlan> {
    previous.check_partition(population)?;
    let scores = ledger.refresh(lambda_var)?;
    select_subset(&scores, population, alpha, stratified, previous.epoch + 1)
}

/// Convergence-driven alpha control; off unless configured.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveAlpha {
    /// Number of trailing loss values the relative improvement spans.
    pub window: usize,
    pub eps_slow: f64,
    pub eps_fast: f64,
    pub delta_alpha: f64,
    pub alpha_min: f64,
    pub alpha_max: f64,
}

impl Default for AdaptiveAlpha {
    fn default() -> Self {
        AdaptiveAlpha {
            window: 3,
            eps_slow: 0.01,
            eps_fast: 0.10,
            delta_alpha: 0.05,
            alpha_min: 0.0,
            alpha_max: 0.6,
        }
    }
}

impl AdaptiveAlpha {
    pub fn validate(&self) -> Result<()> {
        let ok = self.window >= 2
            && self.eps_slow <= self.eps_fast
            && self.delta_alpha >= 0.0
            && 0.0 <= self.alpha_min
            && self.alpha_min <= self.alpha_max
            && self.alpha_max < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid adaptive alpha settings {self:?}")))
        }
    }
}

/// Relative loss improvement over the trailing window, `(old - new) / |old|`.
pub fn relative_improvement(loss_history: &[f64], window: usize) -> Option<f64> {
    if window < 2 || loss_history.len() < window {
        return None;
    }
    let old = loss_history[loss_history.len() - window];
    let new = *loss_history.last()?;
    Some(if old == 0.0 { 0.0 } else { (old - new) / old.abs() })
}

/// Slow convergence lowers alpha (more diversity), fast convergence raises it.
pub fn adapt_alpha(current_alpha: f64, loss_history: &[f64], cfg: &AdaptiveAlpha) -> Result<f64> {
    cfg.validate()?;
    check_alpha(current_alpha)?;
    let r = relative_improvement(loss_history, cfg.window).ok_or_else(|| {
        Error::invalid(format!(
            "need at least {} loss values, got {}",
            cfg.window,
            loss_history.len()
        ))
    })?;
    let next = if r < cfg.eps_slow {
        current_alpha - cfg.delta_alpha
    } else if r > cfg.eps_fast {
        current_alpha + cfg.delta_alpha
    } else {
        current_alpha
    };
    Ok(next.clamp(cfg.alpha_min, cfg.alpha_max))
}
