//! The Laplace-transform inequalities behind uniform integrability: the
//! one-step bound, checked exactly, and its telescoped form, checked by
//! Monte Carlo.

use super::{envelope_status, Experiment, StudyReport, Verdict};
use crate::branching::LaplaceToolkit;
use crate::error::{BmcError, Result};
use crate::population::Population;
use crate::simulator::enumerate_step;
use crate::stats::Welford;

#[derive(Clone, Debug, PartialEq)]
pub struct InequalityParams {
    pub s_grid: Vec<f64>,
    /// Populations for the exact one-step check; empty means a default set
    /// around the initial state.
    pub populations: Vec<Population>,
}

impl Default for InequalityParams {
    fn default() -> Self {
        InequalityParams { s_grid: vec![0.05, 0.1, 0.2], populations: Vec::new() }
    }
}

fn describe(space: &crate::state_space::StateSpace, m: &Population) -> String {
    m.iter().map(|(x, k)| format!("{k}*{}", space.format_vertex(x))).collect::<Vec<_>>().join("+")
}

pub fn inequality_checks(exp: &Experiment, params: &InequalityParams) -> Result<StudyReport> {
    let law = &exp.law;
    let space = law.space();
    let rho = law.rho();
    let (env, llogl, _) = envelope_status(law);
    let theta = env.ok_or_else(|| BmcError::EnvelopeFailure("offspring family has no summable envelope".into()))?;
    let tk = LaplaceToolkit::new(theta);
    let s0 = tk.s0(rho);
    for &s in &params.s_grid {
        if !(s > 0.0 && s <= s0) {
            return Err(BmcError::config("experiment.s_grid", format!("{s} lies outside (0, s0] with s0 = {s0}")));
        }
    }
    let populations = if params.populations.is_empty() {
        let x = exp.initial.iter().next().map(|e| e.0).unwrap_or(space.root());
        let y = space.neighbors(x)?.into_iter().map(|e| e.0).find(|&y| y != x);
        let mut v = vec![Population::singleton(x), Population::with_count(x, 2), Population::with_count(x, 3)];
        if let Some(y) = y {
            v.push(Population::from_counts([(x, 1), (y, 1)])?);
        }
        v
    } else {
        params.populations.clone()
    };

    let out = exp.run(Vec::new(), Vec::new())?;
    let mut r = exp.report("inequalities", &out);
    r.flag("llogl", llogl);
    r.scalar("s0", s0);

    // One step, exactly: G_{Pi_m}(s) = prod_x G_{pi_x}(s)^{m(x)}.
    let lhs = |m: &Population, s: f64| -> f64 {
        m.iter().map(|(x, k)| LaplaceToolkit::new(law.offspring_at(x).clone()).g(s).powi(k as i32)).product()
    };
    let rhs = |m: &Population, s: f64| (-rho * s * m.size() as f64).exp() + m.size() as f64 * tk.r(s);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut enum_gap: Option<f64> = None;
    let mut cases = 0;
    for m in &populations {
        let name = describe(space, m);
        let dist = match enumerate_step(law, m) {
            Ok(d) => Some(d),
            Err(BmcError::UnboundedSupport(_)) => None,
            Err(e) => return Err(e),
        };
        for &s in &params.s_grid {
            let (l, rr) = (lhs(m, s), rhs(m, s));
            if let Some(d) = &dist {
                let e: f64 = d.iter().map(|(mm, p)| p * (-s * mm.size() as f64).exp()).sum();
                enum_gap = Some(enum_gap.unwrap_or(0.0).max((e - l).abs()));
            }
            r.scalar(&format!("pipe_lhs[{name}](s={s})"), l);
            r.scalar(&format!("pipe_rhs[{name}](s={s})"), rr);
            worst = worst.max(l - rr);
            cases += 1;
        }
    }
    r.push(
        Verdict::check("pipe_inequality", worst, "<=", 0.0, cases)
            .detail("max over populations and grid of G_(Pi_m)(s) - (e^(-rho s ||m||) + ||m|| R(s))"),
    );
    if let Some(g) = enum_gap {
        r.push(
            Verdict::check("pipe_enumeration_agrees", g, "<=", 1e-12, cases)
                .detail("product formula against exhaustive enumeration of Pi_m"),
        );
    }
    let tiny = 1e-9;
    let near_zero = populations
        .iter()
        .map(|m| (lhs(m, tiny) - 1.0).abs().max((rhs(m, tiny) - 1.0).abs()))
        .fold(0.0, f64::max);
    r.push(Verdict::check("continuity_at_zero", near_zero, "<=", 1e-6, populations.len()).detail("both sides at s = 1e-9"));

    // Telescoped bound for E exp(-s W_N).
    let size = exp.initial.size() as f64;
    let complete: Vec<f64> = out.complete().map(|t| t.last().w).collect();
    for &s in &params.s_grid {
        let w = Welford::from_slice(&complete.iter().map(|&x| (-s * x).exp()).collect::<Vec<_>>());
        let bound = (-s * size).exp() + size * (tk.telescoped_bound(s, rho)? - (-s).exp());
        r.scalar(&format!("laplace_mc(s={s})"), w.mean);
        r.scalar(&format!("laplace_se(s={s})"), w.se());
        r.scalar(&format!("laplace_bound(s={s})"), bound);
        r.push(
            Verdict::check(format!("telescoped_bound(s={s})"), w.mean, "<=", bound + exp.z * w.se(), complete.len())
                .detail(format!("Monte Carlo E exp(-s W_N) against the quadrature bound plus {} standard errors", exp.z)),
        );
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::branching::{BranchingLaw, OffspringPmf};
    use crate::state_space::StateSpace;

    fn exp(pmf: OffspringPmf) -> Experiment {
        let law = BranchingLaw::independent(Arc::new(StateSpace::simple_tree(3).unwrap()), pmf).unwrap();
        let mut e = Experiment::new(law, Population::singleton(1), 8, 500, 2);
        e.threads = Some(1);
        e
    }

    #[test]
    fn doubling_is_strict() {
        let r = inequality_checks(&exp(OffspringPmf::Delta(2)), &InequalityParams::default()).unwrap();
        assert!(r.passed(), "{:?}", r.verdicts);
        let v = r.verdict("pipe_inequality").unwrap();
        assert!(v.statistic < 0.0);
        assert!(r.verdict("pipe_enumeration_agrees").is_some());
    }

    #[test]
    fn geometric_passes_and_grid_is_checked() {
        let e = exp(OffspringPmf::geometric(0.5).unwrap());
        assert!(inequality_checks(&e, &InequalityParams::default()).unwrap().passed());
        let bad = InequalityParams { s_grid: vec![5.0], ..Default::default() };
        assert!(matches!(inequality_checks(&e, &bad), Err(BmcError::Config { .. })));
    }
}
