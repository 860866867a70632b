//! Convergence of `rho^-n kappa_{M_n}` and of the empirical pairings
//! against a cylinder test function.

use std::sync::Arc;

use super::{envelope_status, per_step, Experiment, StudyReport, Verdict};
use crate::boundary::{Boundary, TestFunction};
use crate::error::{BmcError, Result};
use crate::simulator::{Functional, Scaling};
use crate::stats::{quantile_sorted, sorted};

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryParams {
    pub phi: TestFunction,
    /// Cauchy gap window at the end of the run.
    pub window: usize,
    /// `|b_N - c_N| < bc_tol` is required for a fraction `bc_fraction`.
    pub bc_tol: f64,
    pub bc_fraction: f64,
    /// Committed band for the 95th percentile of the Cauchy gap.
    pub cauchy_band: Option<f64>,
}

impl BoundaryParams {
    pub fn new(phi: TestFunction) -> Self {
        BoundaryParams { phi, window: 5, bc_tol: 0.05, bc_fraction: 0.95, cauchy_band: None }
    }
}

/// Records per trajectory and step
/// `a_n = rho^-n sum_x M_n(x) f(x)` with `f = <kappa_., phi>`,
/// `b_n = <M_n, phi> / ||M_n||` with `phi` extended through cones, and
/// `c_n = a_n / W_n`, the normalised pairing of `kappa_{M_n}` with `phi`.
pub fn boundary_limit_study(exp: &Experiment, params: &BoundaryParams) -> Result<StudyReport> {
    let boundary = Arc::new(Boundary::new(exp.law.space())?);
    let alphabet = boundary.alphabet();
    let depth = params.phi.max_depth(alphabet);
    if depth > boundary.max_depth() {
        return Err(BmcError::DepthTooLarge { depth, bound: boundary.max_depth() });
    }
    if params.window == 0 || params.window > exp.horizon {
        return Err(BmcError::config("experiment.window", "must lie in 1..=horizon"));
    }
    let (_, llogl, _) = envelope_status(&exp.law);
    let finite = llogl == "finite";

    let (b1, phi1, phi2) = (boundary.clone(), params.phi.clone(), params.phi.clone());
    let functionals = vec![
        Functional::new("a", Scaling::Martingale, move |x| b1.harmonic(&phi1, x)),
        Functional::new("b", Scaling::Empirical, move |x| phi2.cone_extension(alphabet, x)),
    ];
    let out = exp.run(Vec::new(), functionals)?;
    let mut r = exp.report("boundary", &out);
    r.flag("llogl", llogl);
    let n_max = exp.horizon;

    let a = per_step(&out, |t, n| t.steps[n].functionals[0]);
    let b = per_step(&out, |t, n| t.steps[n].functionals[1]);
    let w = per_step(&out, |t, n| t.steps[n].w);
    let c: Vec<Vec<f64>> = a.iter().zip(&w).map(|(an, wn)| an.iter().zip(wn).map(|(x, y)| x / y).collect()).collect();
    let bc: Vec<Vec<f64>> = b.iter().zip(&c).map(|(bn, cn)| bn.iter().zip(cn).map(|(x, y)| (x - y).abs()).collect()).collect();
    r.curve("a", &a);
    r.curve("b", &b);
    r.curve("c", &c);
    r.curve("w", &w);
    r.curve("abs_b_minus_c", &bc);
    let count = a[n_max].len();

    // Exact bookkeeping identities.
    let (lo, hi) = params.phi.range(alphabet);
    let sup = lo.abs().max(hi.abs());
    let slack = 1e-12;
    let mut dom: f64 = 0.0;
    let mut c_out: f64 = 0.0;
    for n in 0..=n_max {
        for i in 0..count {
            dom = dom.max(a[n][i].abs() - w[n][i] * sup - slack * w[n][i]);
            c_out = c_out.max(lo - slack - c[n][i]).max(c[n][i] - hi - slack);
        }
    }
    r.push(Verdict::check("a_dominated_by_w", dom, "<=", 0.0, count).detail("|a_n| <= W_n sup|phi| at every step"));
    r.push(Verdict::check("c_within_phi_range", c_out, "<=", 0.0, count).detail("c_n in [min phi, max phi] at every step"));

    // (i) Cauchy behaviour over the last steps.
    let gaps: Vec<f64> = (0..count)
        .map(|i| (n_max - params.window..n_max).map(|n| (a[n][i] - a[n_max][i]).abs()).fold(0.0, f64::max))
        .collect();
    let gap95 = quantile_sorted(&sorted(&gaps), 0.95);
    r.scalar("cauchy_gap_median", quantile_sorted(&sorted(&gaps), 0.5));
    r.scalar("cauchy_gap_q95", gap95);
    if let Some(band) = params.cauchy_band {
        r.push(
            Verdict::check("cauchy_gap_within_pilot_band", gap95, "<=", band, count)
                .gating(finite)
                .detail(format!("95th percentile of max_(N-{}<=n<N) |a_n - a_N|", params.window)),
        );
    }

    // (ii) The mean of a_N is the barycentre value <kappa_{M_0}, phi>.
    let target: f64 = exp.initial.iter().map(|(x, k)| k as f64 * boundary.harmonic(&params.phi, x)).sum();
    let s = &r.curves["a"][n_max];
    let (mean, se) = (s.mean, s.se);
    r.scalar("a_target", target);
    r.push(
        Verdict::check("mean_a_N_within_z_se", (mean - target).abs(), "<=", (exp.z * se).max(1e-12), count)
            .gating(finite)
            .detail(format!("|mean(a_{n_max}) - <kappa_(M_0), phi>| against {} standard errors", exp.z)),
    );

    // (iii) Empirical and normalised boundary pairings merge.
    let close = bc[n_max].iter().filter(|&&d| d < params.bc_tol).count() as f64 / count.max(1) as f64;
    r.scalar("fraction_b_c_close", close);
    r.scalar("median_abs_b_minus_c_window_start", r.curves["abs_b_minus_c"][n_max - params.window].median);
    r.scalar("median_abs_b_minus_c_terminal", r.curves["abs_b_minus_c"][n_max].median);
    r.push(
        Verdict::check("b_c_close_fraction", close, ">=", params.bc_fraction, count)
            .gating(finite)
            .detail(format!("fraction of trajectories with |b_N - c_N| < {}", params.bc_tol)),
    );
    r.terminal.insert("a_N".into(), a[n_max].clone());
    r.terminal.insert("b_N".into(), b[n_max].clone());
    r.terminal.insert("c_N".into(), c[n_max].clone());
    r.terminal.insert("w_N".into(), w[n_max].clone());
    r.terminal.insert("cauchy_gap".into(), gaps);
    Ok(r)
}
