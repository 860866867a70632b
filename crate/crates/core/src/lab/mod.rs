//! Studies: each runs the branching chain (or an exact oracle) and turns
//! a mathematical claim into verdicts with explicit thresholds.

pub mod boundary_limit;
pub mod disappear;
pub mod green;
pub mod gw;
pub mod inequalities;
pub mod martingale;
pub mod presets;
pub mod report;

pub use boundary_limit::{boundary_limit_study, BoundaryParams};
pub use disappear::{disappear_study, finite_horizon_green, DisappearParams};
pub use green::{green_study, GreenParams};
pub use gw::{gw_boundary_study, poisson_coordinate, GwParams};
pub use inequalities::{inequality_checks, InequalityParams};
pub use martingale::{martingale_study, positivity_study, MartingaleParams, OmegaEstimate, PositivityParams};
pub use report::{Histogram, StudyReport, Summary, Verdict};

use crate::branching::{envelope, BranchingLaw, Llogl, OffspringPmf, DEFAULT_PARTIAL_SUM_BOUND};
use crate::error::{BmcError, Result};
use crate::population::Population;
use crate::simulator::{run, Functional, RunOutput, RunSpec, Trajectory};
use crate::state_space::Vertex;

/// Statistical bands are `z` standard errors wide unless stated otherwise.
pub const DEFAULT_Z: f64 = 3.0;
pub const DEFAULT_MAX_TRUNCATED: f64 = 0.05;

/// What every simulation study needs.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub law: BranchingLaw,
    pub initial: Population,
    pub horizon: usize,
    pub trajectories: usize,
    pub cap: u64,
    pub seed: u64,
    pub threads: Option<usize>,
    pub z: f64,
    /// Largest tolerated fraction of capped trajectories.
    pub max_truncated: f64,
}

impl Experiment {
    pub fn new(law: BranchingLaw, initial: Population, horizon: usize, trajectories: usize, seed: u64) -> Self {
        Experiment {
            law,
            initial,
            horizon,
            trajectories,
            cap: crate::simulator::DEFAULT_CAP,
            seed,
            threads: None,
            z: DEFAULT_Z,
            max_truncated: DEFAULT_MAX_TRUNCATED,
        }
    }

    pub fn with_initial(&self, initial: Population, seed: u64) -> Self {
        Experiment { initial, seed, ..self.clone() }
    }

    pub fn run(&self, watched: Vec<Vertex>, functionals: Vec<Functional>) -> Result<RunOutput> {
        if self.horizon == 0 {
            return Err(BmcError::config("experiment.horizon", "must be at least 1"));
        }
        if self.trajectories < 2 {
            return Err(BmcError::config("experiment.trajectories", "need at least 2 trajectories"));
        }
        let mut spec = RunSpec::new(self.initial.clone(), self.horizon, self.trajectories, self.seed);
        spec.cap = self.cap;
        spec.watched = watched;
        spec.functionals = functionals;
        spec.threads = self.threads;
        let out = run(&self.law, &spec)?;
        let fraction = out.truncated_count() as f64 / self.trajectories as f64;
        if fraction > self.max_truncated {
            return Err(BmcError::TooManyTruncated { fraction, limit: self.max_truncated });
        }
        Ok(out)
    }

    pub(crate) fn report(&self, study: &str, out: &RunOutput) -> StudyReport {
        let mut r = StudyReport::new(study, self.seed, self.horizon);
        r.trajectories = out.trajectories.len();
        r.truncated = out.truncated_count();
        r.scalar("rho", self.law.rho());
        r.scalar("initial_size", self.initial.size() as f64);
        if r.truncated > 0 {
            r.notes.push(format!(
                "{} capped trajectories (cap {}) are excluded from means; order statistics of W count them as larger than every completed value",
                r.truncated, self.cap
            ));
        }
        r
    }
}

/// L log L status of the family's dominating envelope.
pub(crate) fn envelope_status(law: &BranchingLaw) -> (Option<OffspringPmf>, String, Option<f64>) {
    match envelope(&law.family(), DEFAULT_PARTIAL_SUM_BOUND) {
        Ok(env) => match env.moments().llogl {
            Llogl::Finite(v) => (Some(env), "finite".into(), Some(v)),
            Llogl::Divergent => (Some(env), "divergent".into(), None),
        },
        Err(_) => (None, "envelope_failure".into(), None),
    }
}

/// Per-step values over completed trajectories.
pub(crate) fn per_step(out: &RunOutput, f: impl Fn(&Trajectory, usize) -> f64) -> Vec<Vec<f64>> {
    (0..=out.horizon).map(|n| out.complete().map(|t| f(t, n)).collect()).collect()
}

/// `W_n` for every trajectory, `+inf` after a trajectory was capped (its
/// true value then exceeds `cap / rho^n`, above any median of interest).
pub(crate) fn w_order_stats(out: &RunOutput) -> Vec<Vec<f64>> {
    (0..=out.horizon)
        .map(|n| out.trajectories.iter().map(|t| t.steps.get(n).map_or(f64::INFINITY, |s| s.w)).collect())
        .collect()
}
