//! Small coverage study. The default grid with 1000 replications is one
//! `jumpvol coverage` call away; this runs a reduced version.
//!
//!     cargo run --release --example coverage_grid -- [reps]

use jumpvol::mc_harness::{run_coverage, write_coverage_csv, CoverageConfig};

fn main() -> jumpvol::Result<()> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let config = CoverageConfig { lambda_grid: vec![4.0, 16.0], tau_grid: vec![2.0, 8.0], reps, ..Default::default() };
    let rows = run_coverage(&config, None)?;
    write_coverage_csv(&rows, std::io::stdout().lock())
}
