//! Total-variation distance between the posteriors and their normal limits
//! as the sample size grows.

use jumpvol::diagnostics::{bvm_convergence_check, BvmCheckConfig};
use jumpvol::{DiffusionSpec, InferenceSettings, JumpSpec};

fn main() -> jumpvol::Result<()> {
    let cfg = BvmCheckConfig {
        diffusion: DiffusionSpec::default(),
        jumps: JumpSpec::default(),
        n_grid: vec![500, 1000, 4000, 16000],
        reps: 100,
        seed: 3,
        settings: InferenceSettings::default(),
    };
    println!("{:>6} {:>12} {:>12}", "n", "tempered", "modified");
    for row in bvm_convergence_check(&cfg, None)? {
        println!("{:>6} {:>12.6} {:>12.6}", row.n, row.tempered_tv_mean, row.modified_tv_mean);
    }
    Ok(())
}
