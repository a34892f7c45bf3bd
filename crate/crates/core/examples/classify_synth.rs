//! Baseline vs TFTB on the synthetic classification task, same seed, same
//! initial weights, same number of samples per epoch.
//!
//!     cargo run --release --example classify_synth -- [alpha] [seed]

use tftb::data::{Split, SynthClassification};
use tftb::metrics::evaluate;
use tftb::model::{Architecture, ModelParams};
use tftb::trainer::{train_baseline, train_tftb, Mode, TrainConfig};

fn main() -> tftb::Result<()> {
    let mut args = std::env::args().skip(1);
    let alpha: f64 = args.next().map_or(0.3, |a| a.parse().expect("alpha"));
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed"));

    let task = SynthClassification::new(seed, 400, 10, 0.6);
    let (train, val) = task.generate(Split::Train)?.carve(0.1, seed, Split::Val)?;
    let test = task.generate(Split::Test)?;
    let arch = Architecture::Mlp {
        input_dim: 16,
        hidden: vec![32],
        num_classes: 10,
    };
    let cfg = TrainConfig {
        alpha,
        lr: 1e-2,
        max_epochs: 15,
        early_stop_patience: 15,
        seed,
        ..Default::default()
    };

    let base = train_baseline(
        ModelParams::init(arch.clone(), seed)?,
        &train,
        Some(&val),
        &TrainConfig { mode: Mode::Baseline, ..cfg.clone() },
    )?;
    let tftb = train_tftb(ModelParams::init(arch, seed)?, &train, Some(&val), &cfg)?;

    for (name, run) in [("baseline", &base), ("tftb", &tftb)] {
        let eval = evaluate(&run.params, &test, 512)?;
        println!(
            "{name:>8}: test accuracy {:.4}, {} samples seen, {:.2}s",
            eval.metrics["accuracy"],
            run.manifest.total_samples_seen(),
            run.manifest.budget.consumed_seconds
        );
    }
    let plan = tftb.final_plan.expect("tftb selects a subset");
    println!("final subset: {} of {} samples, per class {:?}", plan.len(), train.len(), plan.per_class);
    Ok(())
}
