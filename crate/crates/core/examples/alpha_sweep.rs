//! Sweep alpha over a few seeds; prints the summary CSV.
//!
//!     cargo run --release --example alpha_sweep

use tftb::commands::{cmd_sweep, sweep_csv};
use tftb::config::ExperimentSpec;

fn main() -> tftb::Result<()> {
    let mut spec = ExperimentSpec::from_toml_str(
        r#"
        n_per_class = 150
        max_epochs = 10
        seeds = [0, 1, 2]
        alphas = [0.0, 0.2, 0.4, 0.6]
        "#,
    )?;
    spec.output_dir = std::env::temp_dir().join("tftb-sweep-example");
    print!("{}", sweep_csv(&cmd_sweep(&spec)?));
    Ok(())
}
