//! The `train`, `compare` and `sweep` commands behind the `tftb` binary.
//!
//! Each run writes a directory holding `manifest.json`, `loss_curve.csv`,
//! `checkpoint.bin` and, when `ledger_dump` is set, `ledger.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use crate::budget::{MonotonicClock, TimeSource};
use crate::checkpoint;
use crate::config::ExperimentSpec;
use crate::error::{Error, Result};
use crate::importance::mean_std;
use crate::metrics::{compare_runs, evaluate, Comparison};
use crate::model::ModelParams;
use crate::trainer::{train_with_clock, Mode, RunManifest, TrainConfig};

/// Finished run: its manifest, trained parameters and optional ledger CSV.
pub struct RunArtifacts {
    pub manifest: RunManifest,
    pub params: ModelParams,
    pub ledger_csv: Option<String>,
}

/// Train one configuration on one seed, then evaluate on the test split.
///
/// The model is initialised from the seed, so baseline and TFTB runs sharing a
/// seed start from the same weights and see the same data.
pub fn run_single(
    spec: &ExperimentSpec,
    cfg: &TrainConfig,
    time: &mut dyn TimeSource,
) -> Result<RunArtifacts> {
    let data = spec.load_data(cfg.seed)?;
    let arch = spec.architecture(&data.train)?;
    let params = ModelParams::init(arch, cfg.seed)?;
    let tag = |m: &mut RunManifest| {
        m.experiment = Some(spec.echo());
        m.normalization = data.normalization;
    };
    let outcome = match train_with_clock(params, &data.train, Some(&data.val), cfg, time) {
        Ok(o) => o,
        Err(Error::TrainingAborted {
            source,
            mut manifest,
        }) => {
            tag(&mut manifest);
            return Err(Error::TrainingAborted { source, manifest });
        }
        Err(e) => return Err(e),
    };
    let mut manifest = outcome.manifest;
    tag(&mut manifest);
    let test = evaluate(&outcome.params, &data.test, cfg.eval_batch_size)?;
    manifest.record_test(&test, data.test.fingerprint());
    Ok(RunArtifacts {
        manifest,
        params: outcome.params,
        ledger_csv: outcome.ledger_csv,
    })
}

/// Write a run's files into `dir`, creating it if needed.
pub fn write_run(dir: &Path, run: &RunArtifacts) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest_path = dir.join("manifest.json");
    run.manifest.save(&manifest_path)?;
    let curve = dir.join("loss_curve.csv");
    fs::write(&curve, run.manifest.loss_curve_csv()).map_err(|e| Error::io(&curve, e))?;
    checkpoint::save(&run.params, &dir.join("checkpoint.bin"))?;
    if let Some(csv) = &run.ledger_csv {
        let p = dir.join("ledger.csv");
        fs::write(&p, csv).map_err(|e| Error::io(&p, e))?;
    }
    Ok(manifest_path)
}

fn run_and_write(spec: &ExperimentSpec, cfg: &TrainConfig, dir: &Path) -> Result<PathBuf> {
    match run_single(spec, cfg, &mut MonotonicClock::new()) {
        Ok(run) => write_run(dir, &run),
        Err(Error::TrainingAborted { source, manifest }) => {
            // keep the diagnostic manifest next to where the run would have gone
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            manifest.save(&dir.join("manifest.json"))?;
            Err(Error::TrainingAborted { source, manifest })
        }
        Err(e) => Err(e),
    }
}

fn mode_dir(mode: Mode) -> &'static str {
    match mode {
        Mode::Baseline => "baseline",
        Mode::Tftb => "tftb",
    }
}

/// Which arms `train` runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainArms {
    /// The mode named in the config.
    Configured,
    /// Baseline and TFTB on every seed.
    Both,
}

/// Train every seed; returns the manifest paths in run order.
///
/// Layout: `<output_dir>/<mode>/seed<N>/`.
pub fn cmd_train(spec: &ExperimentSpec, arms: TrainArms) -> Result<Vec<PathBuf>> {
    let modes = match arms {
        TrainArms::Configured => vec![spec.train.mode],
        TrainArms::Both => vec![Mode::Baseline, Mode::Tftb],
    };
    let mut out = Vec::new();
    for &seed in &spec.seeds {
        for &mode in &modes {
            let cfg = TrainConfig {
                mode,
                ..spec.config_for_seed(seed)
            };
            let dir = spec.output_dir.join(mode_dir(mode)).join(format!("seed{seed}"));
            out.push(run_and_write(spec, &cfg, &dir)?);
        }
    }
    Ok(out)
}

/// Compare every manifest against the first; writes `comparison.csv` and
/// `comparison.txt` into `out_dir` when given.
pub fn cmd_compare(manifests: &[PathBuf], out_dir: Option<&Path>) -> Result<Vec<Comparison>> {
    if manifests.len() < 2 {
        return Err(Error::Usage("compare needs at least two manifests".into()));
    }
    let runs = manifests
        .iter()
        .map(|p| RunManifest::load(p))
        .collect::<Result<Vec<_>>>()?;
    let comparisons = runs[1..]
        .iter()
        .map(|b| compare_runs(&runs[0], b))
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut csv = String::new();
        let mut txt = String::new();
        for (i, c) in comparisons.iter().enumerate() {
            let body = c.to_csv();
            csv.push_str(if i == 0 { &body } else { body.split_once('\n').map_or("", |x| x.1) });
            txt.push_str(&c.to_table());
            txt.push('\n');
        }
        let p = dir.join("comparison.csv");
        fs::write(&p, csv).map_err(|e| Error::io(&p, e))?;
        let p = dir.join("comparison.txt");
        fs::write(&p, txt).map_err(|e| Error::io(&p, e))?;
    }
    Ok(comparisons)
}

/// One row of the sweep summary.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub runs: usize,
}

/// Run TFTB at every alpha for every seed, then summarise each final metric
/// as mean and population std over seeds.
///
/// Runs go to `<output_dir>/sweep/alpha<A>/seed<N>/`; the summary to
/// `<output_dir>/sweep/summary.csv`. Alpha 0 keeps the whole training set, so
/// it doubles as the reference arm. `threads > 1` runs jobs concurrently,
/// which shares the CPU between them and therefore only suits unbudgeted runs.
pub fn cmd_sweep(spec: &ExperimentSpec) -> Result<Vec<SweepRow>> {
    if spec.alphas.is_empty() {
        return Err(Error::Usage("sweep needs at least one alpha".into()));
    }
    let root = spec.output_dir.join("sweep");
    let mut jobs: Vec<(f64, u64)> = Vec::new();
    for &seed in &spec.seeds {
        for &a in &spec.alphas {
            jobs.push((a, seed));
        }
    }
    let run_job = |(alpha, seed): (f64, u64)| -> Result<RunManifest> {
        let cfg = TrainConfig {
            mode: Mode::Tftb,
            alpha,
            ..spec.config_for_seed(seed)
        };
        let dir = root.join(format!("alpha{alpha}")).join(format!("seed{seed}"));
        let path = run_and_write(spec, &cfg, &dir)?;
        RunManifest::load(&path)
    };

    let results: Vec<Result<RunManifest>> = if spec.threads <= 1 {
        jobs.iter().map(|j| run_job(*j)).collect()
    } else {
        let next = Mutex::new(0usize);
        let slots: Mutex<Vec<Option<Result<RunManifest>>>> =
            Mutex::new((0..jobs.len()).map(|_| None).collect());
        std::thread::scope(|s| {
            for _ in 0..spec.threads.min(jobs.len()) {
                s.spawn(|| loop {
                    let i = {
                        let mut n = next.lock().expect("job counter");
                        let i = *n;
                        *n += 1;
                        i
                    };
                    if i >= jobs.len() {
                        break;
                    }
                    let r = run_job(jobs[i]);
                    slots.lock().expect("result slots")[i] = Some(r);
                });
            }
        });
        slots
            .into_inner()
            .expect("result slots")
            .into_iter()
            .map(|r| r.expect("every job ran"))
            .collect()
    };

    let mut manifests = Vec::with_capacity(results.len());
    for r in results {
        manifests.push(r?);
    }
    let mut rows = Vec::new();
    for &alpha in &spec.alphas {
        let group: Vec<&RunManifest> = jobs
            .iter()
            .zip(&manifests)
            .filter(|((a, _), _)| *a == alpha)
            .map(|(_, m)| m)
            .collect();
        let Some(first) = group.first() else { continue };
        for metric in first.final_metrics.keys() {
            let values: Vec<f64> = group
                .iter()
                .filter_map(|m| m.final_metrics.get(metric).copied())
                .collect();
            let (mean, std) = mean_std(&values);
            rows.push(SweepRow {
                alpha,
                metric: metric.clone(),
                mean,
                std,
                runs: values.len(),
            });
        }
    }
    fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    let p = root.join("summary.csv");
    fs::write(&p, sweep_csv(&rows)).map_err(|e| Error::io(&p, e))?;
    Ok(rows)
}

/// `alpha,metric,mean,std,runs` rows.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("alpha,metric,mean,std,runs\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.alpha, r.metric, r.mean, r.std, r.runs);
    }
    s
}
