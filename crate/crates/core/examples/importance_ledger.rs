//! Per-sample loss windows, variance-weighted scores and subset selection,
//! without a model: the losses are made up.
//!
//!     cargo run --example importance_ledger

use tftb::data::{ClassTag, Population, SampleId};
use tftb::importance::{select_subset, ImportanceLedger};

fn main() -> tftb::Result<()> {
    let ids: Vec<SampleId> = (0..8).map(SampleId).collect();
    let mut ledger = ImportanceLedger::new(ids.iter().copied(), 3)?;
    // sample 5 is consistently hard, sample 6 is erratic, the rest get easier
    for epoch in 1..=4 {
        let obs: Vec<(SampleId, f64)> = ids
            .iter()
            .map(|&id| {
                let loss = match id.0 {
                    5 => 2.0,
                    6 => if epoch % 2 == 0 { 3.0 } else { 0.1 },
                    k => 1.0 / (epoch as f64 + k as f64),
                };
                (id, loss)
            })
            .collect();
        ledger.record_losses(&obs, epoch)?;
    }
    let scores = ledger.refresh(1.0)?;
    let population = Population::new(ids.iter().map(|&id| (id, ClassTag::Class((id.0 % 2) as usize))).collect())?;
    let plan = select_subset(&scores, &population, 0.5, true, 4)?;
    let mut csv = Vec::new();
    ledger.write_csv(&mut csv, 4, Some(&plan), true).expect("in-memory write");
    print!("{}", String::from_utf8_lossy(&csv));
    println!("kept {:?}", plan.selected);
    Ok(())
}
