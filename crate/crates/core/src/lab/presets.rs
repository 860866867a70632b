//! Standard experiments shared by the examples, the pilot calibration and
//! the acceptance tests.

use std::sync::Arc;

use super::{BoundaryParams, Experiment};
use crate::boundary::{Cylinder, TestFunction};
use crate::branching::{BranchingLaw, OffspringPmf};
use crate::error::Result;
use crate::population::Population;
use crate::state_space::StateSpace;

/// Geometric(1/2) offspring (mean 2) on the simple walk on `T_3`, one
/// particle at the root, `N = 15`, `10^4` trajectories, cap `10^6`.
pub fn t3_geometric(seed: u64) -> Result<Experiment> {
    let space = Arc::new(StateSpace::simple_tree(3)?);
    let law = BranchingLaw::independent(space, OffspringPmf::geometric(0.5)?)?;
    let mut e = Experiment::new(law, Population::singleton(1), 15, 10_000, seed);
    e.cap = 1_000_000;
    Ok(e)
}

/// Indicator of the cylinder through `ab`, a depth-2 shadow of `T_3`.
pub fn depth2_cylinder() -> Result<BoundaryParams> {
    let space = StateSpace::simple_tree(3)?;
    let a = space.as_cayley().expect("tree").alphabet();
    let c = Cylinder::new(a, space.parse_vertex("ab")?)?;
    Ok(BoundaryParams::new(TestFunction::indicator(c)))
}

/// Heavy-tailed offspring with mean 2 and divergent `sum k log k pi(k)`,
/// as a Galton-Watson process, `N = 20`, `10^4` trajectories.
pub fn heavy_tail_gw(seed: u64) -> Result<Experiment> {
    let law = BranchingLaw::independent(Arc::new(StateSpace::Singleton), OffspringPmf::heavy_tail(2.0, 2, 1 << 32)?)?;
    Ok(Experiment::new(law, Population::singleton(0), 20, 10_000, seed))
}

/// Geometric(1/2) offspring on the radial chain of `T_3`, `N = 25`,
/// `10^4` trajectories, cap `10^12`.
pub fn radial_geometric(seed: u64) -> Result<Experiment> {
    let law = BranchingLaw::independent(Arc::new(StateSpace::radial(3)?), OffspringPmf::geometric(0.5)?)?;
    let mut e = Experiment::new(law, Population::singleton(0), 25, 10_000, seed);
    e.cap = 1_000_000_000_000;
    Ok(e)
}
