//! Galton-Watson processes: the limit `W` as a boundary coordinate.

use super::{per_step, Experiment, Histogram, StudyReport, Verdict};
use crate::branching::OffspringPmf;
use crate::error::{BmcError, Result};
use crate::state_space::StateSpace;

#[derive(Clone, Debug, PartialEq)]
pub struct GwParams {
    /// Range split into `bins` equal cells for the `W_N` histogram.
    pub w_range: (f64, f64),
    pub bins: usize,
}

impl Default for GwParams {
    fn default() -> Self {
        GwParams { w_range: (0.1, 3.0), bins: 10 }
    }
}

/// The unique `c` in `[1, rho)` with `w = c rho^k` for an integer `k`.
pub fn poisson_coordinate(w: f64, rho: f64) -> f64 {
    let k = (w.ln() / rho.ln()).floor();
    let mut c = w / rho.powf(k);
    // Repair rounding at the cell edges.
    while c >= rho {
        c /= rho;
    }
    while c < 1.0 {
        c *= rho;
    }
    c
}

pub fn gw_boundary_study(exp: &Experiment, params: &GwParams) -> Result<StudyReport> {
    if !matches!(exp.law.space(), StateSpace::Singleton) {
        return Err(BmcError::config("state_space.type", "the Galton-Watson study needs the singleton space"));
    }
    if params.bins == 0 || !(params.w_range.0 < params.w_range.1) {
        return Err(BmcError::config("experiment.w_range", "need lo < hi and at least one bin"));
    }
    let out = exp.run(Vec::new(), Vec::new())?;
    let mut r = exp.report("gw", &out);
    let rho = exp.law.rho();
    let n_max = exp.horizon;
    let w = per_step(&out, |t, n| t.steps[n].w);
    r.curve("w", &w);

    // The process seen from generation one is again a branching process;
    // its martingale is ||M_{n+1}|| / rho^n.
    let mut shift_gap: f64 = 0.0;
    let mut checked = 0usize;
    for t in &out.trajectories {
        for pair in t.steps.windows(2) {
            let (s, next) = (&pair[0], &pair[1]);
            let shifted = next.pop_size as f64 / rho.powi(s.n as i32);
            let gap = (shifted - rho * next.w).abs() / shifted;
            shift_gap = shift_gap.max(gap);
            checked += 1;
        }
    }
    let exact = rho.log2().fract() == 0.0;
    let tol = if exact { 0.0 } else { 4.0 * f64::EPSILON };
    r.push(
        Verdict::check("shift_identity", shift_gap, "<=", tol, checked)
            .detail("largest relative gap between W_n of the shifted path and rho W_(n+1); exact for powers of two"),
    );

    let terminal = w[n_max].clone();
    let count = terminal.len();
    let min_w = terminal.iter().copied().fold(f64::INFINITY, f64::min);
    r.push(Verdict::check("w_N_positive", min_w, ">", 0.0, count));

    let coords: Vec<f64> = terminal.iter().map(|&x| poisson_coordinate(x, rho)).collect();
    let outside = coords.iter().filter(|&&c| !(1.0..rho).contains(&c)).count();
    r.push(Verdict::check("coordinate_in_fundamental_interval", outside as f64, "<=", 0.0, count));

    let degenerate = matches!(exp.law.base(), OffspringPmf::Delta(_));
    if degenerate {
        r.notes.push("point-mass offspring: W is constant, so the histogram verdicts are informational".into());
    }
    let hist = Histogram::new(&terminal, params.w_range.0, params.w_range.1, params.bins);
    let empty = hist.counts.iter().filter(|&&c| c == 0).count();
    r.push(
        Verdict::check("w_histogram_cells_occupied", empty as f64, "<=", 0.0, count)
            .gating(!degenerate)
            .detail(format!("empty cells among {} on [{}, {})", params.bins, params.w_range.0, params.w_range.1)),
    );
    let chist = Histogram::new(&coords, 1.0, rho, 10);
    let cempty = chist.counts.iter().filter(|&&c| c == 0).count();
    r.push(
        Verdict::check("coordinate_deciles_occupied", cempty as f64, "<=", 0.0, count)
            .gating(!degenerate)
            .detail("empty deciles of [1, rho)"),
    );
    r.histograms.insert("w_N".into(), hist);
    r.histograms.insert("coordinate".into(), chist);
    r.terminal.insert("w_N".into(), terminal);
    r.terminal.insert("coordinate".into(), coords);
    Ok(r)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::branching::BranchingLaw;
    use crate::population::Population;

    fn exp(pmf: OffspringPmf, trajectories: usize) -> Experiment {
        let law = BranchingLaw::independent(Arc::new(StateSpace::Singleton), pmf).unwrap();
        let mut e = Experiment::new(law, Population::singleton(0), 12, trajectories, 7);
        e.threads = Some(1);
        e
    }

    #[test]
    fn coordinates() {
        assert_eq!(poisson_coordinate(1.0, 2.0), 1.0);
        assert_eq!(poisson_coordinate(3.0, 2.0), 1.5);
        assert_eq!(poisson_coordinate(0.375, 2.0), 1.5);
        let c = poisson_coordinate(7.0, 3.0);
        assert!((1.0..3.0).contains(&c));
    }

    #[test]
    fn doubling() {
        let r = gw_boundary_study(&exp(OffspringPmf::Delta(2), 10), &GwParams::default()).unwrap();
        assert!(r.passed());
        assert!(r.terminal["coordinate"].iter().all(|&c| c == 1.0));
    }

    #[test]
    fn geometric() {
        let r = gw_boundary_study(&exp(OffspringPmf::geometric(0.5).unwrap(), 20_000), &GwParams::default()).unwrap();
        assert!(r.passed(), "{:?}", r.verdicts);
    }

    #[test]
    fn needs_singleton() {
        let law = BranchingLaw::independent(Arc::new(StateSpace::simple_tree(3).unwrap()), OffspringPmf::Delta(2)).unwrap();
        let e = Experiment::new(law, Population::singleton(1), 3, 3, 0);
        assert!(matches!(gw_boundary_study(&e, &GwParams::default()), Err(BmcError::Config { .. })));
    }
}
