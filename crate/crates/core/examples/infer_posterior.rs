//! Full pipeline on one simulated path: tempered posterior, shift, credible
//! interval and a coarse text rendering of the density.

use jumpvol::{infer, simulate_path, DiffusionSpec, InferenceSettings, JumpSpec};

fn main() -> jumpvol::Result<()> {
    let diff = DiffusionSpec::default();
    let path = simulate_path(&diff, &JumpSpec::default(), 5000, 1)?;
    let inf = infer(&path.increments, path.horizon, &InferenceSettings::default())?;

    println!("theta_hat      = {:.4}", inf.theta_hat);
    println!("J_hat          = {:.4} (true {:.4})", inf.qv.jump_qv_hat, path.truth.as_ref().unwrap().jump_qv);
    println!("kappa          = {:.6}", inf.kappa);
    println!("posterior      = IG({:.2}, {:.2}) shifted by {:.4}", inf.posterior.base.ig.shape, inf.posterior.base.ig.rate, inf.posterior.shift);
    println!("95% interval   = [{:.4}, {:.4}]  (truth {})", inf.interval.lo, inf.interval.hi, diff.theta_star);
    println!("normal approx  = N({:.4}, {:.4})", inf.bvm.mean, inf.bvm.variance);

    let (lo, hi) = (inf.posterior.quantile(0.0005)?, inf.posterior.quantile(0.9995)?);
    let peak = inf.posterior.pdf(inf.posterior.base.ig.mode() - inf.posterior.shift);
    for k in 0..=20 {
        let theta = lo + (hi - lo) * k as f64 / 20.0;
        let bar = (60.0 * inf.posterior.pdf(theta) / peak).round() as usize;
        println!("{theta:8.3} {}", "#".repeat(bar));
    }
    Ok(())
}
