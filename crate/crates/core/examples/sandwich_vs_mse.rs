//! Holds one jump realization fixed, redraws the Brownian part and compares
//! the spread of theta_hat with the sandwich variance and with the leading
//! term `2 theta* theta_dagger / n`.

use jumpvol::diagnostics::mse_oracle;
use jumpvol::{simulate_jumps, DiffusionSpec, JumpSpec};

fn main() -> jumpvol::Result<()> {
    let diff = DiffusionSpec::default();
    let jumps = simulate_jumps(&JumpSpec::default(), diff.horizon, 2)?;
    println!("jump times {:?}, sizes {:?}", jumps.times, jumps.sizes);
    for n in [1000, 5000, 20000] {
        let m = mse_oracle(&diff, &jumps, n, 2000, 9, None)?;
        println!(
            "n = {n:>5}: empirical mse {:.5} (+/- {:.5}), sandwich {:.5}, 2 theta* theta_dagger / n {:.5}",
            m.empirical_mse, m.mse_stderr, m.sandwich, m.mse_formula
        );
    }
    Ok(())
}
