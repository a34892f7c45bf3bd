//! Train both arms, save their run directories, and compare the manifests
//! the way `tftb compare` does.
//!
//!     cargo run --release --example compare_runs

use tftb::budget::MonotonicClock;
use tftb::commands::{cmd_compare, run_single, write_run};
use tftb::config::ExperimentSpec;
use tftb::trainer::{Mode, TrainConfig};

fn main() -> tftb::Result<()> {
    let spec = ExperimentSpec::from_toml_str("n_per_class = 200\nmax_epochs = 10\nalpha = 0.3")?;
    let out = std::env::temp_dir().join("tftb-compare-example");
    let mut manifests = Vec::new();
    for mode in [Mode::Baseline, Mode::Tftb] {
        let cfg = TrainConfig { mode, ..spec.config_for_seed(3) };
        let run = run_single(&spec, &cfg, &mut MonotonicClock::new())?;
        let dir = out.join(format!("{mode:?}").to_lowercase());
        manifests.push(write_run(&dir, &run)?);
    }
    for c in cmd_compare(&manifests, Some(&out))? {
        print!("{}", c.to_table());
    }
    println!("files under {}", out.display());
    Ok(())
}
