//! Green function, Martin kernel and spectral radius of the base chain.

use super::{StudyReport, Verdict};
use crate::boundary::{green_oracle, spectral_radius, Green};
use crate::error::{BmcError, Result};
use crate::state_space::{StateSpace, StepLaw, Vertex};

#[derive(Clone, Debug, PartialEq)]
pub struct GreenParams {
    pub pairs: Vec<(Vertex, Vertex)>,
    /// Truncation radius for spaces without first-passage tables.
    pub radius: usize,
    pub n_max: usize,
    pub spectral_tolerance: f64,
    /// Agreement required between the Green value and its oracle.
    pub oracle_tol: f64,
}

impl GreenParams {
    pub fn new(pairs: Vec<(Vertex, Vertex)>) -> Self {
        GreenParams {
            pairs,
            radius: crate::boundary::green::DEFAULT_GREEN_RADIUS,
            n_max: 2000,
            spectral_tolerance: 0.01,
            oracle_tol: 1e-8,
        }
    }
}

/// `2 sqrt(d-1) / d` for the simple walk on the `d`-regular tree.
fn simple_tree_radius(space: &StateSpace) -> Option<f64> {
    let t = space.as_cayley()?;
    let simple = match t.law() {
        StepLaw::Simple => true,
        StepLaw::Weights(w) => w.iter().all(|&x| x == w[0]),
        StepLaw::TowardRoot(_) => false,
    };
    let d = t.alphabet().size() as f64;
    simple.then(|| 2.0 * (d - 1.0).sqrt() / d)
}

pub fn green_study(space: &StateSpace, params: &GreenParams, seed: u64) -> Result<StudyReport> {
    if params.pairs.is_empty() {
        return Err(BmcError::config("experiment.pairs", "name at least one pair"));
    }
    let mut r = StudyReport::new("green", seed, 0);
    let green = Green::new(space, params.radius)?;
    let o = space.root();
    for &(x, y) in &params.pairs {
        let key = format!("{}|{}", space.format_vertex(x), space.format_vertex(y));
        let gm = green.green_martin(x, y, o)?;
        r.scalar(&format!("G({key})"), gm.g);
        r.scalar(&format!("K({key})"), gm.k);
        if space.as_cayley().is_some() {
            let oracle = green_oracle(space, x, y)?;
            r.scalar(&format!("G_oracle({key})"), oracle);
            r.push(
                Verdict::check(format!("green_oracle({key})"), (gm.g - oracle).abs(), "<=", params.oracle_tol, 1)
                    .detail("first-passage product against deepening truncation solves"),
            );
        }
    }
    match spectral_radius(space, params.n_max, params.spectral_tolerance) {
        Ok(s) => {
            r.scalar("spectral_estimate", s.estimate);
            r.scalar("spectral_lower", s.lower);
            r.scalar("spectral_upper", s.upper);
            r.scalar("spectral_n_max", s.n_max as f64);
            r.push(Verdict::check("spectral_bracket_width", s.upper - s.lower, "<=", params.spectral_tolerance, s.n_max));
            if let Some(exact) = simple_tree_radius(space) {
                r.scalar("spectral_closed_form", exact);
                r.push(Verdict::check(
                    "spectral_closed_form",
                    (s.estimate - exact).abs(),
                    "<=",
                    params.spectral_tolerance,
                    s.n_max,
                ));
            }
        }
        Err(BmcError::BracketTooWide { lower, upper, tolerance }) => {
            r.scalar("spectral_lower", lower);
            r.scalar("spectral_upper", upper);
            r.push(Verdict::check("spectral_bracket_width", upper - lower, "<=", tolerance, params.n_max));
        }
        Err(BmcError::Unsupported(what)) => r.notes.push(format!("spectral radius skipped: needs {what}")),
        Err(e) => return Err(e),
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn t3_values() {
        let s = StateSpace::simple_tree(3).unwrap();
        let a = s.parse_vertex("a").unwrap();
        let r = green_study(&s, &GreenParams::new(vec![(1, 1), (1, a)]), 0).unwrap();
        assert!(r.passed());
        assert!((r.scalars["G(o|o)"] - 2.0).abs() < 1e-12);
        assert!((r.scalars["G(o|a)"] - 1.0).abs() < 1e-12);
        assert!((r.scalars["spectral_estimate"] - 8f64.sqrt() / 3.0).abs() < 1e-2);
    }

    #[test]
    fn radial_space_has_no_oracle() {
        let s = StateSpace::radial(3).unwrap();
        let r = green_study(&s, &GreenParams::new(vec![(0, 0)]), 0).unwrap();
        assert!((r.scalars["G(0|0)"] - 2.0).abs() < 1e-6);
        assert!(r.verdicts.iter().all(|v| !v.name.starts_with("green_oracle")));
    }
}
