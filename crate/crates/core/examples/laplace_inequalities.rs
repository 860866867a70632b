//! The Laplace-transform bounds that control `W`: the exact one-step
//! inequality for small populations, and the telescoped bound on
//! `E exp(-s W_N)` compared with simulation.
//!
//!     cargo run --release --example laplace_inequalities

use std::sync::Arc;

use bmc::branching::{BranchingLaw, LaplaceToolkit, OffspringPmf};
use bmc::lab::{inequality_checks, Experiment, InequalityParams};
use bmc::population::Population;
use bmc::state_space::StateSpace;

fn main() -> bmc::error::Result<()> {
    let pmf = OffspringPmf::explicit(vec![1, 2, 3], vec![0.3, 0.4, 0.3])?;
    let tk = LaplaceToolkit::new(pmf.clone());
    println!("R(s) and R(s)/s for {}:", pmf.describe());
    for k in [-6, -4, -2, 0, 2] {
        let s = 2f64.powi(k);
        println!("  s = {s:<8} R = {:.6e}  R/s = {:.6e}", tk.r(s), tk.r(s) / s);
    }

    let law = BranchingLaw::independent(Arc::new(StateSpace::simple_tree(3)?), pmf)?;
    let exp = Experiment::new(law, Population::singleton(1), 10, 5000, 4);
    let r = inequality_checks(&exp, &InequalityParams::default())?;
    println!("\ns0 = {:.4}", r.scalars["s0"]);
    for s in [0.05, 0.1, 0.2] {
        println!(
            "s = {s}: E exp(-s W_N) ~ {:.5} (se {:.1e}) <= bound {:.5}",
            r.scalars[&format!("laplace_mc(s={s})")],
            r.scalars[&format!("laplace_se(s={s})")],
            r.scalars[&format!("laplace_bound(s={s})")],
        );
    }
    for v in &r.verdicts {
        println!("[{}] {}", if v.passed { "ok" } else { "--" }, v.name);
    }
    Ok(())
}
