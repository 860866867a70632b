//! Boundary averages of a branching walk on `T_3`. For the indicator of
//! the depth-2 cylinder through `ab`:
//!   a_n  harmonic martingale  rho^-n <M_n, h>, converging with mean h(o) = 1/6
//!   b_n  empirical average of the cone extension
//!   c_n  a_n / W_n
//! b_n and c_n approach the same random limit.
//!
//!     cargo run --release --example boundary_convergence

use bmc::lab::presets::{depth2_cylinder, t3_geometric};
use bmc::lab::boundary_limit_study;

fn main() -> bmc::error::Result<()> {
    let mut exp = t3_geometric(8)?;
    exp.trajectories = 2000;
    let r = boundary_limit_study(&exp, &depth2_cylinder()?)?;
    for key in ["a", "b", "c"] {
        let curve = &r.curves[key];
        let last = curve.last().unwrap();
        println!("{key}: mean at N = {} is {:.4} (se {:.4}), q05..q95 = {:.3}..{:.3}", last.n, last.mean, last.se, last.q05, last.q95);
    }
    for v in &r.verdicts {
        println!("[{}] {} = {:.4} {} {:.4}", if v.passed { "ok" } else { "--" }, v.name, v.statistic, v.comparison, v.threshold);
    }
    Ok(())
}
