//! The branching Markov chain: one-step transition, trajectory runner, and
//! exact one-step expectations for small cases.

mod enumerate;

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::branching::BranchingLaw;
use crate::error::{BmcError, Result};
use crate::population::Population;
use crate::rng::StreamRng;
use crate::state_space::Vertex;
pub use enumerate::{enumerate_branch, enumerate_step, exact_step_expectation, StepExpectation};

/// Default particle cap per trajectory.
pub const DEFAULT_CAP: u64 = 10_000_000;

/// How a registered functional is normalised at step `n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scaling {
    /// `rho^-n <M_n, f>`, a martingale when `f` is harmonic.
    Martingale,
    /// `<M_n, f> / ||M_n||`.
    Empirical,
}

pub type VertexFn = Arc<dyn Fn(Vertex) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct Functional {
    pub name: String,
    pub scaling: Scaling,
    pub f: VertexFn,
}

impl Functional {
    pub fn new(name: impl Into<String>, scaling: Scaling, f: impl Fn(Vertex) -> f64 + Send + Sync + 'static) -> Self {
        Functional { name: name.into(), scaling, f: Arc::new(f) }
    }
}

impl std::fmt::Debug for Functional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Functional").field("name", &self.name).field("scaling", &self.scaling).finish()
    }
}

#[derive(Clone, Debug)]
pub struct RunSpec {
    pub initial: Population,
    pub horizon: usize,
    pub trajectories: usize,
    pub cap: u64,
    pub watched: Vec<Vertex>,
    pub functionals: Vec<Functional>,
    pub seed: u64,
    /// Steps at which the full population is kept.
    pub snapshot_steps: Vec<usize>,
    /// Worker count; `BMC_THREADS` overrides, `None` uses all cores.
    pub threads: Option<usize>,
}

impl RunSpec {
    pub fn new(initial: Population, horizon: usize, trajectories: usize, seed: u64) -> Self {
        RunSpec {
            initial,
            horizon,
            trajectories,
            cap: DEFAULT_CAP,
            watched: Vec::new(),
            functionals: Vec::new(),
            seed,
            snapshot_steps: Vec::new(),
            threads: None,
        }
    }
}

/// One recorded step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub n: usize,
    pub pop_size: u64,
    pub w: f64,
    pub distinct: usize,
    pub watched: Vec<u64>,
    pub functionals: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub id: usize,
    pub steps: Vec<StepRecord>,
    /// The cap was hit; `steps` stops before the breach.
    pub truncated: bool,
    pub snapshots: Vec<(usize, Population)>,
}

impl Trajectory {
    pub fn last(&self) -> &StepRecord {
        self.steps.last().expect("step 0 is always recorded")
    }

    /// Value of `W_n` for each recorded step.
    pub fn w(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.w).collect()
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub rho: f64,
    pub horizon: usize,
    pub watched: Vec<Vertex>,
    pub functional_names: Vec<String>,
    pub trajectories: Vec<Trajectory>,
}

impl RunOutput {
    pub fn truncated_count(&self) -> usize {
        self.trajectories.iter().filter(|t| t.truncated).count()
    }

    /// Trajectories that reached the horizon.
    pub fn complete(&self) -> impl Iterator<Item = &Trajectory> {
        self.trajectories.iter().filter(|t| !t.truncated)
    }

    /// Per-step CSV: `run_id, trajectory_id, n, pop_size, w_n,
    /// distinct_sites, truncated`, then watched states and functionals.
    pub fn write_csv(&self, run_id: u64, watched_names: &[String], out: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let mut header: Vec<String> =
            ["run_id", "trajectory_id", "n", "pop_size", "w_n", "distinct_sites", "truncated"]
                .iter()
                .map(|s| s.to_string())
                .collect();
        header.extend(watched_names.iter().map(|s| format!("M({s})")));
        header.extend(self.functional_names.iter().cloned());
        w.write_record(&header)?;
        for t in &self.trajectories {
            for s in &t.steps {
                let mut row = vec![
                    run_id.to_string(),
                    t.id.to_string(),
                    s.n.to_string(),
                    s.pop_size.to_string(),
                    s.w.to_string(),
                    s.distinct.to_string(),
                    (t.truncated as u8).to_string(),
                ];
                row.extend(s.watched.iter().map(|c| c.to_string()));
                row.extend(s.functionals.iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Result of one transition.
#[derive(Clone, Debug, PartialEq)]
pub enum StepOutcome {
    Next(Population),
    /// The cap was exceeded; carries the children produced so far.
    Truncated(Population),
}

/// Reusable buffers for [`step_with`].
#[derive(Default)]
pub struct Scratch {
    children: Vec<(Vertex, u64)>,
    /// Children with a smaller handle than their parent.
    up: Vec<(Vertex, u64)>,
    row: Vec<(Vertex, f64)>,
}

/// One transition `M_n -> M_{n+1}`: every particle branches independently.
pub fn step(m: &Population, law: &BranchingLaw, rng: &mut StreamRng, cap: u64) -> Result<StepOutcome> {
    step_with(m, law, rng, cap, &mut Scratch::default())
}

pub fn step_with(
    m: &Population,
    law: &BranchingLaw,
    rng: &mut StreamRng,
    cap: u64,
    scratch: &mut Scratch,
) -> Result<StepOutcome> {
    if m.is_empty() {
        return Err(BmcError::EmptyPopulation);
    }
    scratch.children.clear();
    scratch.up.clear();
    let mut total: u64 = 0;
    for (x, c) in m.iter() {
        let start = scratch.children.len();
        let k = law.branch_into(x, c, rng, &mut scratch.children, &mut scratch.row)?;
        // On trees, moves toward the root and moves away from it each come
        // out in increasing handle order; keeping them apart leaves two
        // sorted runs for the merge.
        let mut keep = start;
        for i in start..scratch.children.len() {
            let e = scratch.children[i];
            if e.0 < x {
                scratch.up.push(e);
            } else {
                scratch.children[keep] = e;
                keep += 1;
            }
        }
        scratch.children.truncate(keep);
        total = total.checked_add(k).ok_or(BmcError::CountOverflow)?;
        if total > cap {
            scratch.children.append(&mut scratch.up);
            return Ok(StepOutcome::Truncated(Population::from_unsorted(&mut scratch.children)?));
        }
    }
    scratch.children.append(&mut scratch.up);
    Ok(StepOutcome::Next(Population::from_unsorted(&mut scratch.children)?))
}

/// Worker count: `BMC_THREADS`, else the requested count, else all cores.
pub fn resolve_threads(requested: Option<usize>) -> usize {
    std::env::var("BMC_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .or(requested.filter(|&n| n > 0))
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn record(n: usize, m: &Population, rho: f64, spec: &RunSpec) -> StepRecord {
    let scale = rho.powi(n as i32);
    let size = m.size();
    StepRecord {
        n,
        pop_size: size,
        w: size as f64 / scale,
        distinct: m.distinct(),
        watched: spec.watched.iter().map(|&y| m.count(y)).collect(),
        functionals: spec
            .functionals
            .iter()
            .map(|fun| {
                let raw = m.pair(|x| (fun.f)(x));
                match fun.scaling {
                    Scaling::Martingale => raw / scale,
                    Scaling::Empirical => raw / size as f64,
                }
            })
            .collect(),
    }
}

/// Run trajectory `id` of `spec`. Trajectory `i` draws from the stream
/// `(spec.seed, i)`, so results do not depend on scheduling.
pub fn run_trajectory(law: &BranchingLaw, spec: &RunSpec, id: usize) -> Result<Trajectory> {
    let mut rng = StreamRng::new(spec.seed, id as u64);
    let rho = law.rho();
    let mut m = spec.initial.clone();
    let mut steps = Vec::with_capacity(spec.horizon + 1);
    let mut snapshots = Vec::new();
    let mut scratch = Scratch::default();
    steps.push(record(0, &m, rho, spec));
    if spec.snapshot_steps.contains(&0) {
        snapshots.push((0, m.clone()));
    }
    for n in 1..=spec.horizon {
        match step_with(&m, law, &mut rng, spec.cap, &mut scratch)? {
            StepOutcome::Next(next) => m = next,
            StepOutcome::Truncated(_) => {
                return Ok(Trajectory { id, steps, truncated: true, snapshots });
            }
        }
        steps.push(record(n, &m, rho, spec));
        if spec.snapshot_steps.contains(&n) {
            snapshots.push((n, m.clone()));
        }
    }
    Ok(Trajectory { id, steps, truncated: false, snapshots })
}

/// Run all trajectories over a worker pool; output is in trajectory order
/// and identical for any worker count.
pub fn run(law: &BranchingLaw, spec: &RunSpec) -> Result<RunOutput> {
    if spec.initial.is_empty() {
        return Err(BmcError::config("initial", "initial population is empty"));
    }
    for (x, _) in spec.initial.iter() {
        law.space().validate(x).map_err(|e| BmcError::config("initial", e.to_string()))?;
    }
    for &y in &spec.watched {
        law.space().validate(y).map_err(|e| BmcError::config("watched", e.to_string()))?;
    }
    let threads = resolve_threads(spec.threads);
    let go = || (0..spec.trajectories).into_par_iter().map(|i| run_trajectory(law, spec, i)).collect();
    let trajectories: Result<Vec<Trajectory>> = if threads == 1 {
        (0..spec.trajectories).map(|i| run_trajectory(law, spec, i)).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| BmcError::config("threads", e.to_string()))?
            .install(go)
    };
    Ok(RunOutput {
        rho: law.rho(),
        horizon: spec.horizon,
        watched: spec.watched.clone(),
        functional_names: spec.functionals.iter().map(|f| f.name.clone()).collect(),
        trajectories: trajectories?,
    })
}

/// Path of the underlying chain from `x` (no branching).
pub fn base_chain(law: &BranchingLaw, x: Vertex, steps: usize, seed: u64, stream: u64) -> Result<Vec<Vertex>> {
    let mut rng = StreamRng::new(seed, stream);
    let mut path = vec![x];
    let mut cur = x;
    for _ in 0..steps {
        cur = law.space().sample_step(cur, &mut rng)?;
        path.push(cur);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branching::OffspringPmf;
    use crate::state_space::StateSpace;
    use crate::stats::Welford;

    fn law(pmf: OffspringPmf) -> BranchingLaw {
        BranchingLaw::independent(Arc::new(StateSpace::simple_tree(3).unwrap()), pmf).unwrap()
    }

    #[test]
    fn deterministic_sizes() {
        let mut rng = StreamRng::new(1, 0);
        let m = Population::from_counts([(1, 3), (2, 2)]).unwrap();
        let StepOutcome::Next(a) = step(&m, &law(OffspringPmf::Delta(1)), &mut rng, 100).unwrap() else { panic!() };
        assert_eq!(a.size(), 5);
        let StepOutcome::Next(b) = step(&m, &law(OffspringPmf::Delta(2)), &mut rng, 100).unwrap() else { panic!() };
        assert_eq!(b.size(), 10);
        assert!(matches!(step(&m, &law(OffspringPmf::Delta(2)), &mut rng, 9).unwrap(), StepOutcome::Truncated(_)));
    }

    #[test]
    fn doubling_gives_constant_martingale() {
        let spec = RunSpec::new(Population::singleton(1), 20, 5, 3);
        let out = run(&law(OffspringPmf::Delta(2)), &spec).unwrap();
        assert!(out.trajectories.iter().all(|t| t.steps.iter().all(|s| s.w == 1.0)));
    }

    #[test]
    fn parallel_equals_serial() {
        let l = law(OffspringPmf::Geometric(0.5));
        let mut spec = RunSpec::new(Population::singleton(1), 8, 16, 99);
        spec.threads = Some(1);
        let serial = run(&l, &spec).unwrap();
        spec.threads = Some(4);
        let parallel = run(&l, &spec).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        serial.write_csv(0, &[], &mut a).unwrap();
        parallel.write_csv(0, &[], &mut b).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn growth_ratio_matches_rho() {
        let l = law(OffspringPmf::Geometric(0.5));
        let spec = RunSpec::new(Population::singleton(1), 10, 4000, 5);
        let out = run(&l, &spec).unwrap();
        for n in 1..=10 {
            let w = Welford::from_slice(&out.trajectories.iter().map(|t| t.steps[n].w).collect::<Vec<_>>());
            assert!((w.mean - 1.0).abs() < 4.0 * w.se(), "n={n} mean={} se={}", w.mean, w.se());
        }
    }

    #[test]
    fn csv_layout() {
        let l = law(OffspringPmf::Delta(2));
        let mut spec = RunSpec::new(Population::singleton(1), 1, 1, 0);
        spec.watched = vec![1];
        spec.functionals = vec![Functional::new("one", Scaling::Empirical, |_| 1.0)];
        let out = run(&l, &spec).unwrap();
        let mut buf = Vec::new();
        out.write_csv(7, &["o".into()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "run_id,trajectory_id,n,pop_size,w_n,distinct_sites,truncated,M(o),one");
        assert_eq!(lines.next().unwrap(), "7,0,0,1,1,1,0,1,1");
    }
}
