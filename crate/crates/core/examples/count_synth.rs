//! Density-map counting: a small conv net regresses Gaussian density maps
//! and counts are read off as map sums.
//!
//!     cargo run --release --example count_synth

use tftb::data::{Split, SynthCounting};
use tftb::metrics::evaluate;
use tftb::model::{Architecture, ModelParams};
use tftb::trainer::{train_tftb, TrainConfig};

fn main() -> tftb::Result<()> {
    let task = SynthCounting::new(7, 300, 16, 12, 1.5);
    let (train, val) = task.generate(Split::Train)?.carve(0.1, 7, Split::Val)?;
    let test = SynthCounting { n_images: 100, ..task }.generate(Split::Test)?;
    let arch = Architecture::DensityConv {
        in_channels: 1,
        height: 16,
        width: 16,
        channels: [8, 8],
        kernel: 3,
    };
    let cfg = TrainConfig {
        alpha: 0.3,
        lr: 1e-3,
        batch_size: 16,
        max_epochs: 12,
        stratified: false,
        ..Default::default()
    };
    let out = train_tftb(ModelParams::init(arch, 7)?, &train, Some(&val), &cfg)?;
    for e in &out.manifest.epochs {
        println!(
            "epoch {:>2} {:?}: train loss {:.5}, val MAE {:.3}",
            e.epoch,
            e.phase,
            e.mean_train_loss,
            e.val_metric.unwrap_or(f64::NAN)
        );
    }
    let eval = evaluate(&out.params, &test, 64)?;
    println!(
        "test MAE {:.3}, MSE {:.3}, RMSE {:.3}",
        eval.metrics["mae"], eval.metrics["mse"], eval.metrics["rmse"]
    );
    Ok(())
}
