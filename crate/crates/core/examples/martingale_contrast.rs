//! The population martingale under a finite and a divergent `k log k`
//! moment. With geometric offspring `E W_N` stays at 1; with the heavy
//! tail the median of `W_n` drifts toward 0 while rare huge families keep
//! the mean up.
//!
//!     cargo run --release --example martingale_contrast

use bmc::lab::presets::heavy_tail_gw;
use bmc::lab::{martingale_study, Experiment, MartingaleParams};

fn show(name: &str, exp: &Experiment) -> bmc::error::Result<()> {
    let r = martingale_study(exp, &MartingaleParams::default())?;
    let w = &r.curves["w"];
    println!("{name}: llogl {}, {} trajectories, {} capped", r.flags["llogl"], r.trajectories, r.truncated);
    for s in w.iter().step_by(5) {
        println!("  n = {:>2}  mean {:.4} (se {:.4})  median {:.4}", s.n, s.mean, s.se, s.median);
    }
    for v in &r.verdicts {
        let mark = match (v.passed, v.gating) {
            (true, _) => "ok",
            (false, true) => "FAIL",
            (false, false) => "info",
        };
        println!("  [{mark}] {} = {:.4} {} {:.4}", v.name, v.statistic, v.comparison, v.threshold);
    }
    Ok(())
}

fn main() -> bmc::error::Result<()> {
    let mut heavy = heavy_tail_gw(5)?;
    heavy.trajectories = 4000;
    let mut geometric = heavy.clone();
    geometric.law = bmc::branching::BranchingLaw::independent(
        geometric.law.space_arc(),
        bmc::branching::OffspringPmf::geometric(0.5)?,
    )?;
    show("geometric(1/2)", &geometric)?;
    show("heavy tail, mean 2", &heavy)?;
    Ok(())
}
