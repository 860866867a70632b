//! Branching random walk on the 3-regular tree: per-step population size,
//! martingale `W_n` and how many distinct sites are occupied.
//!
//!     cargo run --release --example simulate_population

use std::sync::Arc;

use bmc::branching::{BranchingLaw, OffspringPmf};
use bmc::population::Population;
use bmc::simulator::{run, RunSpec};
use bmc::state_space::StateSpace;

fn main() -> bmc::error::Result<()> {
    let space = Arc::new(StateSpace::simple_tree(3)?);
    let law = BranchingLaw::independent(space.clone(), OffspringPmf::explicit(vec![1, 2, 3], vec![0.25, 0.5, 0.25])?)?;
    let mut spec = RunSpec::new(Population::singleton(space.root()), 12, 200, 42);
    spec.watched = vec![space.root(), space.parse_vertex("a")?];
    spec.snapshot_steps = vec![4];
    let out = run(&law, &spec)?;

    println!("{:>3} {:>12} {:>10} {:>10} {:>8}", "n", "mean size", "mean W", "sites", "M(o)");
    for n in 0..=spec.horizon {
        let k = out.trajectories.len() as f64;
        let mean = |f: &dyn Fn(&bmc::simulator::StepRecord) -> f64| {
            out.trajectories.iter().map(|t| f(&t.steps[n])).sum::<f64>() / k
        };
        println!(
            "{n:>3} {:>12.1} {:>10.4} {:>10.1} {:>8.3}",
            mean(&|s| s.pop_size as f64),
            mean(&|s| s.w),
            mean(&|s| s.distinct as f64),
            mean(&|s| s.watched[0] as f64),
        );
    }

    // A population snapshot in the `vertex_string,count` format.
    let (n, m) = &out.trajectories[0].snapshots[0];
    println!("\ntrajectory 0 at n = {n}:");
    m.write_csv(&space, std::io::stdout())?;
    Ok(())
}
