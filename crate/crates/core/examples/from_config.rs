//! Drive a study from a JSON config the way the `bmc` binary does, and
//! print the resolved config that every report echoes.
//!
//!     cargo run --release --example from_config

use bmc::cli::run_study;
use bmc::config::{parse, Built};

const CONFIG: &str = r#"{
  "state_space": {"type": "tree", "degree": 4, "step_law": {"toward_root": 0.4}},
  "branching": {
    "mode": "mixture",
    "lambda": 0.5,
    "offspring": {"kind": "geometric", "q": 0.5},
    "overrides": [{"from": 0, "to": 1, "offspring": {"kind": "delta", "k": 2}}],
    "rho": 2.0
  },
  "experiment": {"horizon": 10, "trajectories": 1000},
  "seed": 2024
}"#;

fn main() -> bmc::error::Result<()> {
    let resolved = parse(CONFIG)?.resolve("martingale")?;
    let built = Built::new(&resolved)?;
    let report = run_study("martingale", &built)?;
    println!("{}", serde_json::to_string_pretty(&resolved.echo())?);
    for v in &report.verdicts {
        println!("[{}] {} = {:.4}", if v.passed { "ok" } else { "--" }, v.name, v.statistic);
    }
    Ok(())
}
