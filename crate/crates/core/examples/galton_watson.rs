//! Galton-Watson limit `W` and its coordinate `rho^{frac(log_rho W)}` in
//! `[1, rho)`. Shifting the tree by one generation multiplies `W` by rho,
//! so the coordinate is what survives of `W` on the boundary.
//!
//!     cargo run --release --example galton_watson

use std::sync::Arc;

use bmc::branching::{BranchingLaw, OffspringPmf};
use bmc::lab::{gw_boundary_study, Experiment, GwParams};
use bmc::population::Population;
use bmc::state_space::StateSpace;

fn main() -> bmc::error::Result<()> {
    let pmf = OffspringPmf::explicit(vec![1, 2, 3, 6], vec![0.4, 0.3, 0.2, 0.1])?;
    let law = BranchingLaw::independent(Arc::new(StateSpace::Singleton), pmf)?;
    let exp = Experiment::new(law, Population::singleton(0), 18, 20_000, 99);
    let r = gw_boundary_study(&exp, &GwParams { w_range: (0.2, 2.2), bins: 10 })?;
    println!("rho = {}", r.scalars["rho"]);
    for (name, h) in &r.histograms {
        println!("{name}:");
        for (i, c) in h.counts.iter().enumerate() {
            println!("  [{:.3}, {:.3})  {:>6}  {}", h.edges[i], h.edges[i + 1], c, "#".repeat((*c as usize) / 100));
        }
    }
    println!("shift identity gap: {:e}", r.verdict("shift_identity").unwrap().statistic);
    Ok(())
}
