//! Expected discounted visits under branching. The number of particles at
//! the root at time n, discounted by rho^n, sums to the Green function in
//! expectation: `E sum_n rho^-n M_n(o) = G(o,o)`. Running the radial chain
//! of `T_3` keeps the population compact.
//!
//!     cargo run --release --example disappearance

use bmc::lab::presets::radial_geometric;
use bmc::lab::{disappear_study, DisappearParams};

fn main() -> bmc::error::Result<()> {
    let exp = radial_geometric(12)?;
    let r = disappear_study(&exp, &DisappearParams::new(vec![0, 1]))?;
    for y in ["0", "1"] {
        println!(
            "radius {y}: mean sum = {:.4} (se {:.4}), Green value {:.4}",
            r.scalars[&format!("mean_S_N({y})")],
            r.scalars[&format!("se_S_N({y})")],
            r.scalars[&format!("green({y})")],
        );
    }
    let share = &r.curves["share(0)"];
    println!("median share of particles at the root:");
    for s in share.iter().step_by(5) {
        println!("  n = {:>2}: {:.2e}", s.n, s.median);
    }
    Ok(())
}
