//! Simulates one path at the default configuration and prints the first rows
//! of the path CSV together with its ground truth.
//!
//!     cargo run --example simulate_path -- [seed]

use jumpvol::io::write_path_csv;
use jumpvol::{simulate_path, DiffusionSpec, JumpSpec};

fn main() -> jumpvol::Result<()> {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(1);
    let path = simulate_path(&DiffusionSpec::default(), &JumpSpec::default(), 5000, seed)?;
    let truth = path.truth.as_ref().expect("simulated paths carry truth");

    println!("n = {}, delta = {}, jumps = {}", path.n, path.delta, truth.jumps.len());
    println!("jump windows (0-based): {:?}", truth.jump_windows);
    println!("[J] = {:.4}", truth.jump_qv);

    let mut buf = Vec::new();
    write_path_csv(&path, &mut buf, true)?;
    for line in String::from_utf8_lossy(&buf).lines().take(6) {
        println!("{line}");
    }
    Ok(())
}
