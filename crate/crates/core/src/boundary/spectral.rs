//! Spectral radius `r(P) = limsup p^(n)(o,o)^(1/n)` from exact return
//! probabilities.

use serde::Serialize;

use crate::error::{BmcError, Result};
use crate::quadrature::golden_min;
use crate::state_space::StateSpace;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralEstimate {
    /// `p^(2n)(o,o)^(1/2n)` at `n = n_max`.
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_max: usize,
}

/// `ln p^(2n)(0,0)` for `n = 0..=n_max` by exact propagation with
/// rescaling. `rows[i]` lists `(j, p)`; state 0 is the reference point.
fn log_even_returns(n_states: usize, rows: &dyn Fn(usize, &mut Vec<(usize, f64)>), n_max: usize) -> Vec<f64> {
    let mut v = vec![0.0; n_states];
    let mut next = vec![0.0; n_states];
    v[0] = 1.0;
    let mut log_scale = 0.0;
    let mut out = vec![0.0];
    let mut row = Vec::new();
    for step in 1..=2 * n_max {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, &mass) in v.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            rows(i, &mut row);
            for &(j, p) in &row {
                next[j] += mass * p;
            }
        }
        std::mem::swap(&mut v, &mut next);
        let total: f64 = v.iter().sum();
        v.iter_mut().for_each(|x| *x /= total);
        log_scale += total.ln();
        if step % 2 == 0 {
            out.push(log_scale + v[0].ln());
        }
    }
    out
}

/// Estimate with a two-sided bracket. Isotropic tree kernels use their
/// radial chain; explicit spaces use their own finite matrix.
pub fn spectral_radius(space: &StateSpace, n_max: usize, tolerance: f64) -> Result<SpectralEstimate> {
    if n_max == 0 {
        return Err(BmcError::OutOfRange("n_max must be at least 1".into()));
    }
    let (logs, lower_extra, upper) = match space {
        StateSpace::Explicit(e) => {
            let m = e.matrix();
            let rows = |i: usize, out: &mut Vec<(usize, f64)>| {
                out.clear();
                out.extend(m[i].iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(j, &p)| (j, p)));
            };
            (log_even_returns(m.len(), &rows, n_max), f64::NEG_INFINITY, 1.0)
        }
        StateSpace::Singleton => return Ok(SpectralEstimate { estimate: 1.0, lower: 1.0, upper: 1.0, n_max }),
        _ => {
            let StateSpace::Radial { down: q, .. } = space.radial_reduction()? else { unreachable!() };
            // Propagate the symmetrised kernel sqrt(pi_i / pi_j) p(i,j) for
            // the reversible measure pi. Return probabilities at 0 are
            // unchanged, but mass no longer drifts off to large radii, so
            // p^(2n)(0,0) stays representable after rescaling.
            let (edge0, edge) = (q.sqrt(), (q * (1.0 - q)).sqrt());
            let rows = |i: usize, out: &mut Vec<(usize, f64)>| {
                out.clear();
                match i {
                    0 => out.push((1, edge0)),
                    1 => out.extend([(0, edge0), (2, edge)]),
                    _ => out.extend([(i - 1, edge), (i + 1, edge)]),
                }
            };
            let logs = log_even_returns(2 * n_max + 2, &rows, n_max);
            // Birth-death chains are reversible, so consecutive ratios of
            // even return probabilities increase to r^2.
            let ratio = ((logs[n_max] - logs[n_max - 1]) / 2.0).exp();
            // f(k) = t^k gives P f <= max(t, q/t + (1-q) t) f.
            let bound = |t: f64| t.max(q / t + (1.0 - q) * t);
            let (_, upper) = golden_min(bound, 1e-6, 1.0, 1e-12);
            (logs, ratio, upper.min(1.0))
        }
    };
    let root = (logs[n_max] / (2 * n_max) as f64).exp();
    let lower = root.max(lower_extra);
    if upper - lower > tolerance {
        return Err(BmcError::BracketTooWide { lower, upper, tolerance });
    }
    Ok(SpectralEstimate { estimate: root, lower, upper, n_max })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_space::StepLaw;

    #[test]
    fn simple_trees() {
        let r3 = spectral_radius(&StateSpace::simple_tree(3).unwrap(), 2000, 0.01).unwrap();
        let exact = 2.0 * 2f64.sqrt() / 3.0;
        assert!((r3.estimate - exact).abs() < 0.01);
        assert!(r3.lower <= exact + 1e-12 && exact <= r3.upper + 1e-12);
        let r4 = spectral_radius(&StateSpace::simple_tree(4).unwrap(), 2000, 0.01).unwrap();
        assert!((r4.estimate - 3f64.sqrt() / 2.0).abs() < 0.01);
        // Return probabilities far below the smallest double.
        let r10 = spectral_radius(&StateSpace::simple_tree(10).unwrap(), 2000, 0.01).unwrap();
        assert!((r10.estimate - 0.6).abs() < 0.01);
        let f3 = spectral_radius(&StateSpace::free_group(3, StepLaw::Simple).unwrap(), 2000, 0.01).unwrap();
        assert!((f3.estimate - 2.0 * 5f64.sqrt() / 6.0).abs() < 0.01);
    }

    #[test]
    fn bracket_and_errors() {
        let s = StateSpace::simple_tree(3).unwrap();
        assert!(matches!(spectral_radius(&s, 3, 1e-6), Err(BmcError::BracketTooWide { .. })));
        let skew = StateSpace::tree(3, StepLaw::Weights(vec![0.5, 0.3, 0.2])).unwrap();
        assert!(spectral_radius(&skew, 100, 0.1).is_err());
        let e = StateSpace::explicit(vec!["u".into(), "v".into()], vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!((spectral_radius(&e, 10, 1e-9).unwrap().estimate - 1.0).abs() < 1e-12);
    }
}
