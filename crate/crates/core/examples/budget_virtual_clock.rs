//! A budgeted run against a scripted clock: every batch costs a fixed
//! number of virtual seconds, so the plan and the stopping point are exact
//! and repeatable.
//!
//!     cargo run --example budget_virtual_clock -- [budget_seconds]

use tftb::budget::VirtualClock;
use tftb::data::{Split, SynthClassification};
use tftb::model::{Architecture, ModelParams};
use tftb::trainer::{epoch_equivalent_batches, train_with_clock, TrainConfig};

fn main() -> tftb::Result<()> {
    let budget: f64 = std::env::args().nth(1).map_or(60.0, |s| s.parse().expect("budget"));
    let train = SynthClassification::new(1, 100, 4, 0.6).generate(Split::Train)?;
    let arch = Architecture::Mlp {
        input_dim: 16,
        hidden: vec![16],
        num_classes: 4,
    };
    let cfg = TrainConfig {
        budget_seconds: Some(budget),
        max_epochs: 1000,
        ..Default::default()
    };
    // 0.5 s per batch, 1 ms per scored sample
    let mut clock = VirtualClock::constant(0.5).with_overheads(0.0, 1e-3);
    let out = train_with_clock(ModelParams::init(arch, 1)?, &train, None, &cfg, &mut clock)?;

    let b = &out.manifest.budget;
    println!(
        "{} batches per epoch-equivalent",
        epoch_equivalent_batches(train.len(), cfg.batch_size)
    );
    println!(
        "warm-up {:.2}s over {} batches, tb = {:.3}s, planned {} more batches",
        b.warmup_seconds,
        b.warmup_batches,
        b.tb_initial.unwrap_or(0.0),
        b.planned_batches.unwrap_or(0)
    );
    for e in &out.manifest.epochs {
        println!(
            "epoch {:>2} {:?}: {} batches, consumed {:.2}s{}",
            e.epoch,
            e.phase,
            e.batches,
            e.consumed_seconds,
            if e.partial { " (partial)" } else { "" }
        );
    }
    println!(
        "stopped: {:?} at {:.3}s of {budget}s (batches {:.2}s + overhead {:.3}s + warm-up {:.2}s)",
        out.manifest.stop_reason, b.consumed_seconds, b.batch_seconds, b.overhead_seconds, b.warmup_seconds
    );
    Ok(())
}
