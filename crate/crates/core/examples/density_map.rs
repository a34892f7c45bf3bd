//! Ground-truth density map from point annotations, printed as ASCII.
//!
//!     cargo run --example density_map -- [sigma]

use tftb::data::{density_map, DotMap};

fn main() -> tftb::Result<()> {
    let sigma: f64 = std::env::args().nth(1).map_or(1.5, |s| s.parse().expect("sigma"));
    // one point on the border keeps its full unit mass after renormalisation
    let dots = DotMap::new(24, 12, vec![(4.0, 3.0), (5.5, 4.0), (16.0, 8.0), (23.5, 0.2)])?;
    let map = density_map(&dots, sigma)?;
    let peak = map.data().iter().cloned().fold(0.0, f64::max);
    let shades = [' ', '.', ':', '-', '=', '+', '*', '#', '%', '@'];
    for row in 0..dots.height {
        let line: String = map
            .row(row)
            .iter()
            .map(|v| shades[((v / peak) * 9.0).round() as usize])
            .collect();
        println!("|{line}|");
    }
    println!("{} points, map sum {:.9}", dots.count(), map.sum());
    Ok(())
}
