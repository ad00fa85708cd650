//! Threshold estimate of the jump quadratic variation against the simulated
//! truth, for a few multipliers of the interquartile range.

use jumpvol::{estimate_jump_qv, interquartile_threshold, simulate_path, DiffusionSpec, JumpSpec};

fn main() -> jumpvol::Result<()> {
    let path = simulate_path(&DiffusionSpec::default(), &JumpSpec::default(), 5000, 11)?;
    let truth = path.truth.as_ref().unwrap();
    println!("true [J] = {:.4}, true windows = {:?}", truth.jump_qv, truth.jump_windows);

    for c in [2.0, 3.0, 5.0, 8.0] {
        let eta = interquartile_threshold(&path.increments, c)?;
        let est = estimate_jump_qv(&path.increments, eta)?;
        let shown: Vec<usize> = est.flagged.iter().copied().take(8).collect();
        println!("c = {c}: eta = {eta:.4}, J_hat = {:.4}, {} flagged, first {shown:?}", est.jump_qv_hat, est.flagged.len());
    }
    Ok(())
}
