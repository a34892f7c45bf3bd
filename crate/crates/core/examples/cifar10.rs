//! Load the CIFAR-10 binary batches and report what was read.
//!
//!     cargo run --release --example cifar10 -- path/to/cifar-10-batches-bin

use std::path::PathBuf;

use tftb::data::load_cifar10;

fn main() {
    let dir = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "data/cifar-10-batches-bin".to_string()),
    );
    match load_cifar10(&dir) {
        Ok(c) => {
            println!("train {} samples, test {} samples", c.train.len(), c.test.len());
            println!("feature shape {:?}", c.train.feature_shape());
            println!("channel mean {:?}", c.normalization.mean);
            println!("channel std  {:?}", c.normalization.std);
            println!("class sizes {:?}", c.train.class_sizes());
        }
        Err(e) => {
            eprintln!("could not load {}: {e}", dir.display());
            eprintln!("expected data_batch_1.bin .. data_batch_5.bin and test_batch.bin");
            std::process::exit(e.exit_code());
        }
    }
}
