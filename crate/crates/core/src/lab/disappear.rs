//! Occupation of a fixed state: `rho^-n M_n(y)` is summable with mean
//! `G(x, y)`, so the empirical share of any state vanishes.

use std::collections::HashMap;

use super::{per_step, Experiment, StudyReport, Verdict};
use crate::boundary::green::DEFAULT_GREEN_RADIUS;
use crate::boundary::Green;
use crate::error::Result;
use crate::population::Population;
use crate::state_space::{StateSpace, Vertex};
use crate::stats::median;

/// Largest support tracked by the exact finite-horizon propagation.
const MAX_PROPAGATION_STATES: usize = 2_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct DisappearParams {
    pub watched: Vec<Vertex>,
    /// Relative tolerance against the full Green function.
    pub rel_tol: f64,
    /// Truncation radius for spaces without first-passage tables.
    pub green_radius: usize,
}

impl DisappearParams {
    pub fn new(watched: Vec<Vertex>) -> Self {
        DisappearParams { watched, rel_tol: 0.05, green_radius: DEFAULT_GREEN_RADIUS }
    }
}

/// `sum_x m(x) sum_{n <= N} p^(n)(x, y)`, the exact mean of `S_N(y)`.
/// Isotropic trees started at the root go through the radial chain;
/// otherwise the distribution is propagated state by state, and `None`
/// is returned if it outgrows the tracking bound.
pub fn finite_horizon_green(space: &StateSpace, m: &Population, y: Vertex, horizon: usize) -> Result<Option<f64>> {
    if let StateSpace::Cayley(t) = space {
        if t.is_isotropic() && m.iter().all(|(x, _)| x == 1) {
            let radial = space.radial_reduction()?;
            let r = space.radius(y);
            let d = t.alphabet().size() as f64;
            let sphere = if r == 0 { 1.0 } else { d * (d - 1.0).powi(r as i32 - 1) };
            let lumped = Population::with_count(0, m.size());
            return Ok(finite_horizon_green(&radial, &lumped, r, horizon)?.map(|g| g / sphere));
        }
    }
    propagate(space, m, y, horizon)
}

fn propagate(space: &StateSpace, m: &Population, y: Vertex, horizon: usize) -> Result<Option<f64>> {
    let mut dist: HashMap<Vertex, f64> = m.iter().map(|(x, k)| (x, k as f64)).collect();
    let mut total = dist.get(&y).copied().unwrap_or(0.0);
    let mut row = Vec::new();
    for _ in 0..horizon {
        let mut next: HashMap<Vertex, f64> = HashMap::with_capacity(dist.len() * 2);
        let mut keys: Vec<_> = dist.keys().copied().collect();
        keys.sort_unstable();
        for x in keys {
            let mass = dist[&x];
            space.neighbors_into(x, &mut row)?;
            for &(z, p) in &row {
                *next.entry(z).or_insert(0.0) += mass * p;
            }
        }
        if next.len() > MAX_PROPAGATION_STATES {
            return Ok(None);
        }
        dist = next;
        total += dist.get(&y).copied().unwrap_or(0.0);
    }
    Ok(Some(total))
}

pub fn disappear_study(exp: &Experiment, params: &DisappearParams) -> Result<StudyReport> {
    let space = exp.law.space();
    let green = Green::new(space, params.green_radius)?;
    let out = exp.run(params.watched.clone(), Vec::new())?;
    let mut r = exp.report("disappear", &out);
    let rho = exp.law.rho();
    let n_max = exp.horizon;
    for (j, &y) in params.watched.iter().enumerate() {
        let name = space.format_vertex(y);
        let scaled = per_step(&out, |t, n| t.steps[n].watched[j] as f64 / rho.powi(n as i32));
        let share = per_step(&out, |t, n| t.steps[n].watched[j] as f64 / t.steps[n].pop_size as f64);
        let sums: Vec<f64> = (0..scaled[0].len()).map(|i| scaled.iter().map(|v| v[i]).sum()).collect();
        r.curve(&format!("scaled_count({name})"), &scaled);
        r.curve(&format!("share({name})"), &share);
        let s = super::Summary::of(n_max, &sums);
        let count = sums.len();

        let mut g = 0.0;
        for (x, k) in exp.initial.iter() {
            g += k as f64 * green.green(x, y)?;
        }
        r.scalar(&format!("green({name})"), g);
        r.scalar(&format!("mean_S_N({name})"), s.mean);
        r.scalar(&format!("se_S_N({name})"), s.se);
        r.push(
            Verdict::check(format!("green_identity({name})"), (s.mean - g).abs(), "<=", params.rel_tol * g, count)
                .detail(format!("|mean S_{n_max}(y) - G(x,y)| within {} relative", params.rel_tol)),
        );
        if let Some(gn) = finite_horizon_green(space, &exp.initial, y, n_max)? {
            r.scalar(&format!("green_truncated({name})"), gn);
            r.scalar(&format!("green_tail({name})"), g - gn);
            r.push(
                Verdict::check(format!("finite_horizon_identity({name})"), (s.mean - gn).abs(), "<=", (exp.z * s.se).max(1e-12 * gn), count)
                    .detail(format!("|mean S_N(y) - sum_(n<=N) p^(n)(x,y)| against {} standard errors", exp.z)),
            );
        }
        let early = share[..=2.min(n_max)].iter().map(|v| median(v)).fold(f64::NEG_INFINITY, f64::max);
        let last = median(&share[n_max]);
        r.push(
            Verdict::check(format!("share_decays({name})"), last, "<", early, count)
                .detail("median share at N against the largest median share over n <= 2"),
        );
        r.terminal.insert(format!("S_N({name})"), sums);
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::branching::{BranchingLaw, OffspringPmf};

    #[test]
    fn propagation_matches_radial() {
        let t3 = StateSpace::simple_tree(3).unwrap();
        let a = t3.parse_vertex("a").unwrap();
        let direct = propagate(&t3, &Population::singleton(1), a, 8).unwrap().unwrap();
        let radial = finite_horizon_green(&StateSpace::radial(3).unwrap(), &Population::singleton(0), 1, 8).unwrap().unwrap() / 3.0;
        assert!((direct - radial).abs() < 1e-14);
        let b = t3.parse_vertex("b").unwrap();
        let off_root = finite_horizon_green(&t3, &Population::singleton(b), a, 6).unwrap().unwrap();
        assert!(off_root > 0.0 && off_root < 1.0);
    }

    #[test]
    fn no_branching_is_visit_count() {
        let space = Arc::new(StateSpace::radial(3).unwrap());
        let law = BranchingLaw::independent(space, OffspringPmf::Delta(1)).unwrap();
        let mut e = Experiment::new(law, Population::singleton(0), 25, 2000, 4);
        e.threads = Some(1);
        let r = disappear_study(&e, &DisappearParams::new(vec![0])).unwrap();
        assert!(r.verdict("finite_horizon_identity(0)").unwrap().passed);
        assert!(r.scalars["green_tail(0)"] > 0.0);
    }
}
