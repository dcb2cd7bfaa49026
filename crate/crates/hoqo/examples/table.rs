// Reproduces the two-slot qubit rows of the transposition and inversion tables,
// with results cached on disk by instance, seed, formulation and tolerance.

use hoqo::sdp::{reproduce_table, Quantity, TableInstance, TableOptions, TableRow};
use hoqo::task::{Strategy, Target};

pub fn run_example() -> hoqo::Result<Vec<TableRow>> {
    let cache = std::env::temp_dir().join("hoqo-example-cache");
    let opts = TableOptions { cache_dir: Some(cache), ..Default::default() };
    let mut rows = Vec::new();
    println!("{:<22} {:>9} {:>9} {:>10}  method", "instance", "value", "reference", "diff");
    for task in [Target::Trans, Target::Inv] {
        for quantity in [Quantity::P, Quantity::F] {
            for strategy in Strategy::ALL {
                let row = reproduce_table(&TableInstance::new(task, quantity, 2, 2, strategy), &opts)?;
                println!(
                    "{:<22} {:>9.6} {:>9.4} {:>+10.2e}  {}{}",
                    row.instance.label(),
                    row.value,
                    row.reference.unwrap_or(f64::NAN),
                    row.diff.unwrap_or(f64::NAN),
                    row.method,
                    if row.cached { " (cached)" } else { "" }
                );
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

#[allow(dead_code)]
fn main() -> hoqo::Result<()> {
    run_example().map(|_| ())
}
