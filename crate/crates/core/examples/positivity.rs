//! How often is the martingale limit near zero? Estimates
//! `P(W_N < eps)` from one, two and three initial particles; without
//! extinction these should behave like `omega, omega^2, omega^3`.
//!
//!     cargo run --release --example positivity

use bmc::lab::presets::t3_geometric;
use bmc::lab::{positivity_study, PositivityParams};

fn main() -> bmc::error::Result<()> {
    let mut exp = t3_geometric(3)?;
    exp.horizon = 12;
    exp.trajectories = 3000;
    let params = PositivityParams { eps: 0.02, ..PositivityParams::default() };
    let (estimates, report) = positivity_study(&exp, &params)?;
    for e in &estimates {
        println!(
            "k = {}: {}/{} below {} -> omega = {:.4} in [{:.4}, {:.4}]",
            e.multiple, e.below, e.total, e.eps, e.omega, e.lo, e.hi
        );
    }
    println!("min W_N from one particle: {:.3e}", report.scalars["min_w_N_k1"]);
    println!("all verdicts pass: {}", report.passed());
    Ok(())
}
