//! Sweeps the Petrovskiĭ constant for the heat equation and prints the CSV table.

use pparabolic::regularity::{petrovskii_sweep, sweep_csv, ClassifyConfig};

fn main() -> pparabolic::error::Result<()> {
    let rows = petrovskii_sweep(2.0, 1, &[2.0, 4.0, 8.0, 16.0, 64.0], &ClassifyConfig::default())?;
    print!("{}", sweep_csv(&rows));
    Ok(())
}
