//! The population martingale `W_n = ||M_n|| / rho^n`: integrability and
//! positivity of its limit.

use serde::Serialize;

use super::{envelope_status, per_step, w_order_stats, Experiment, StudyReport, Verdict};
use crate::branching::OffspringPmf;
use crate::error::{BmcError, Result};
use crate::population::Population;
use crate::rng::derive_seed;
use crate::stats::{median, wilson};

#[derive(Clone, Debug, PartialEq)]
pub struct MartingaleParams {
    /// Threshold for the "small W" fraction.
    pub eps: f64,
    /// Early step against which the median trend is judged.
    pub early: usize,
}

impl Default for MartingaleParams {
    fn default() -> Self {
        MartingaleParams { eps: 1e-3, early: 5 }
    }
}

/// Mean actually realised by the sampler, which differs from the analytic
/// mean only for the truncated heavy-tail family.
fn sampling_mean(pmf: &OffspringPmf) -> f64 {
    match pmf {
        OffspringPmf::HeavyTail(h) => h.truncated_mean(),
        other => other.mean(),
    }
}

pub fn martingale_study(exp: &Experiment, params: &MartingaleParams) -> Result<StudyReport> {
    if params.early > exp.horizon {
        return Err(BmcError::config("experiment.early", "must not exceed the horizon"));
    }
    let (_, llogl, llogl_value) = envelope_status(&exp.law);
    let finite = llogl == "finite";
    let out = exp.run(Vec::new(), Vec::new())?;
    let mut r = exp.report("martingale", &out);
    r.flag("llogl", llogl.clone());
    if let Some(v) = llogl_value {
        r.scalar("envelope_llogl", v);
    }
    let n_max = exp.horizon;
    let w = per_step(&out, |t, n| t.steps[n].w);
    r.curve("w", &w);
    let ordered = w_order_stats(&out);
    r.curve("w_order_stats", &ordered);
    let terminal = w[n_max].clone();
    let count = terminal.len();
    let w0 = exp.initial.size() as f64;

    let summary = &r.curves["w"][n_max];
    let (mean, se) = (summary.mean, summary.se);
    let band = if se > 0.0 { exp.z * se } else { 1e-12 * w0 };
    r.push(
        Verdict::check("mean_w_N_within_z_se", (mean - w0).abs(), "<=", band, count)
            .gating(finite)
            .detail(format!("|mean(W_{n_max}) - W_0| against {} standard errors", exp.z)),
    );
    let min_w = terminal.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = w0 / exp.law.rho().powi(n_max as i32);
    r.push(
        Verdict::check("min_w_N_positive", min_w, ">=", floor, count)
            .detail("no extinction: W_N >= ||M_0|| rho^-N on every trajectory"),
    );

    let below = |n: usize| ordered[n].iter().filter(|&&x| x < params.eps).count() as f64 / ordered[n].len() as f64;
    r.scalar("fraction_below_eps_early", below(params.early));
    r.scalar("fraction_below_eps_terminal", below(n_max));
    r.scalar("eps", params.eps);

    let med_early = median(&ordered[params.early]);
    let med_final = median(&ordered[n_max]);
    r.scalar("median_w_early", med_early);
    r.scalar("median_w_terminal", med_final);
    r.push(
        Verdict::check("median_w_decreasing", med_final, "<", med_early, ordered[n_max].len())
            .gating(!finite)
            .detail(format!("median W_{n_max} against median W_{}", params.early)),
    );
    // Same comparison with the realised growth rate; informational.
    let rho_eff = sampling_mean(exp.law.base());
    let scale = (exp.law.rho() / rho_eff).powi((n_max - params.early) as i32);
    r.scalar("rho_effective", rho_eff);
    r.scalar("median_ratio_effective", med_final / med_early * scale);
    r.terminal.insert("w_N".into(), terminal);
    Ok(r)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PositivityParams {
    pub eps: f64,
    pub multiples: Vec<u64>,
    /// Committed upper band for the fraction of `W_N < eps` from `delta_x`.
    pub pilot_band: Option<f64>,
}

impl Default for PositivityParams {
    fn default() -> Self {
        PositivityParams { eps: 1e-3, multiples: vec![1, 2, 3], pilot_band: None }
    }
}

/// `omega_hat = P(W_N < eps)` from `k delta_x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OmegaEstimate {
    pub state: String,
    pub multiple: u64,
    pub eps: f64,
    pub horizon: usize,
    pub below: u64,
    pub total: u64,
    pub omega: f64,
    pub lo: f64,
    pub hi: f64,
}

pub fn positivity_study(exp: &Experiment, params: &PositivityParams) -> Result<(Vec<OmegaEstimate>, StudyReport)> {
    let x = match exp.initial.entries() {
        [(x, 1)] => *x,
        _ => return Err(BmcError::config("initial", "positivity study starts from a single particle")),
    };
    if params.multiples.first() != Some(&1) {
        return Err(BmcError::config("experiment.multiples", "must start with 1"));
    }
    let (_, llogl, _) = envelope_status(&exp.law);
    let finite = llogl == "finite";
    let rho = exp.law.rho();
    let n_max = exp.horizon;
    let state = exp.law.space().format_vertex(x);
    let mut estimates = Vec::new();
    let mut report = None;
    for &k in &params.multiples {
        let seed = if k == 1 { exp.seed } else { derive_seed(exp.seed, k) };
        let sub = exp.with_initial(Population::with_count(x, k), seed);
        let out = sub.run(Vec::new(), Vec::new())?;
        // A capped run has W_N >= cap rho^-N; only count it when that
        // already decides the comparison with eps.
        let capped_decided = exp.cap as f64 / rho.powi(n_max as i32) >= params.eps;
        let mut below = 0u64;
        let mut total = 0u64;
        let mut min_w = f64::INFINITY;
        for t in &out.trajectories {
            if t.truncated {
                total += capped_decided as u64;
                continue;
            }
            let w = t.last().w;
            min_w = min_w.min(w);
            total += 1;
            below += (w < params.eps) as u64;
        }
        let (lo, hi) = wilson(below, total, exp.z);
        estimates.push(OmegaEstimate {
            state: state.clone(),
            multiple: k,
            eps: params.eps,
            horizon: n_max,
            below,
            total,
            omega: below as f64 / total.max(1) as f64,
            lo,
            hi,
        });
        let r = report.get_or_insert_with(|| {
            let mut r = exp.report("positivity", &out);
            r.flag("llogl", llogl.clone());
            r.scalar("eps", params.eps);
            r
        });
        r.scalar(&format!("min_w_N_k{k}"), min_w);
        r.push(
            Verdict::check(format!("min_w_N_positive_k{k}"), min_w, ">=", k as f64 / rho.powi(n_max as i32), total as usize)
                .detail("no extinction forces W_N >= k rho^-N"),
        );
        if k == 1 {
            r.curve("w", &per_step(&out, |t, n| t.steps[n].w));
            r.terminal.insert("w_N".into(), out.complete().map(|t| t.last().w).collect());
        }
    }
    let mut r = report.expect("at least one multiple");
    let base = estimates[0].clone();
    for e in &estimates {
        r.scalar(&format!("omega_k{}", e.multiple), e.omega);
        r.scalar(&format!("omega_k{}_lo", e.multiple), e.lo);
        r.scalar(&format!("omega_k{}_hi", e.multiple), e.hi);
        if e.multiple == 1 {
            continue;
        }
        // omega(k delta_x) = omega(delta_x)^k: the two intervals must meet.
        let k = e.multiple as i32;
        let (plo, phi) = (base.lo.powi(k), base.hi.powi(k));
        let gap = (e.lo - phi).max(plo - e.hi).max(0.0);
        r.push(
            Verdict::check(format!("multiplicative_k{}", e.multiple), gap, "<=", 0.0, e.total as usize)
                .gating(finite)
                .detail("distance between the interval for omega(k delta_x) and the k-th power of the interval for omega(delta_x)"),
        );
        r.push(
            Verdict::check(format!("monotone_k{}", e.multiple), e.omega, "<=", base.hi, e.total as usize)
                .gating(finite)
                .detail("more initial mass cannot raise omega beyond the single-particle interval"),
        );
    }
    if let Some(band) = params.pilot_band {
        r.push(
            Verdict::check("fraction_below_eps_within_pilot_band", base.omega, "<=", band, base.total as usize)
                .gating(finite)
                .detail("committed pilot band"),
        );
    }
    Ok((estimates, r))
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::branching::BranchingLaw;
    use crate::state_space::StateSpace;

    fn exp(pmf: OffspringPmf, n: usize, trajectories: usize) -> Experiment {
        let law = BranchingLaw::independent(Arc::new(StateSpace::simple_tree(3).unwrap()), pmf).unwrap();
        let mut e = Experiment::new(law, Population::singleton(1), n, trajectories, 11);
        e.threads = Some(1);
        e
    }

    #[test]
    fn doubling_is_exact() {
        let r = martingale_study(&exp(OffspringPmf::Delta(2), 10, 20), &MartingaleParams::default()).unwrap();
        assert!(r.passed());
        let last = &r.curves["w"][10];
        assert_eq!((last.mean, last.variance), (1.0, 0.0));
        let (om, r) = positivity_study(&exp(OffspringPmf::Delta(2), 10, 20), &PositivityParams::default()).unwrap();
        assert!(om.iter().all(|o| o.omega == 0.0));
        assert!(r.passed());
    }

    #[test]
    fn geometric_small_run() {
        let e = exp(OffspringPmf::geometric(0.5).unwrap(), 8, 400);
        let r = martingale_study(&e, &MartingaleParams::default()).unwrap();
        assert_eq!(r.flags["llogl"], "finite");
        assert!(r.verdict("mean_w_N_within_z_se").unwrap().passed);
        let (om, _) = positivity_study(&e, &PositivityParams { eps: 0.05, ..Default::default() }).unwrap();
        assert_eq!(om.len(), 3);
        assert!(om[2].omega <= om[0].hi);
    }
}
