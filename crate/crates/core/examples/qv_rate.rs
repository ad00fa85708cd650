//! Mean absolute error of the threshold estimator against n, with the
//! fitted log-log slope.

use jumpvol::{qv_error_rate, DiffusionSpec, JumpSpec, ThresholdRule};

fn main() -> jumpvol::Result<()> {
    let report = qv_error_rate(
        &DiffusionSpec::default(),
        &JumpSpec::default(),
        ThresholdRule::default(),
        &[1000, 4000, 16000],
        300,
        5,
        None,
    )?;
    for p in &report.points {
        println!("n = {:>6}: mae {:.5} +/- {:.5}", p.n, p.mae, p.mae_stderr);
    }
    match report.slope {
        Some(s) => println!("slope {s:.3}"),
        None => println!("no jumps, no slope"),
    }
    Ok(())
}
