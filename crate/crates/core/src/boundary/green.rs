//! Green function `G(x,y)` and Martin kernel `K_o(x,y) = G(x,y)/G(o,y)`.

use serde::Serialize;

use super::first_passage::FirstPassage;
use super::solver::TreeProblem;
use crate::error::{BmcError, Result};
use crate::state_space::{StateSpace, Vertex};

/// Default truncation radius for spaces without first-passage tables.
pub const DEFAULT_GREEN_RADIUS: usize = 64;
/// Ball size bound for truncation solves.
pub const GREEN_MAX_VERTICES: usize = 4096;
/// Relative change between radius `R` and `2R` above which a truncated
/// Green value is reported as not converged.
const TRUNCATION_STABILITY: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GreenMartin {
    pub g: f64,
    pub k: f64,
}

#[derive(Clone, Debug)]
enum Method {
    Tree(FirstPassage),
    Truncated(usize),
}

#[derive(Clone, Debug)]
pub struct Green {
    space: StateSpace,
    method: Method,
}

impl Green {
    /// Trees use first-passage products; other spaces are solved on a ball
    /// of `radius` with absorbing fronts.
    pub fn new(space: &StateSpace, radius: usize) -> Result<Self> {
        let method = match space {
            StateSpace::Cayley(t) => {
                let fp = FirstPassage::new(t)?;
                fp.require_transient()?;
                Method::Tree(fp)
            }
            StateSpace::Singleton => return Err(BmcError::NotTransient { return_probability: 1.0 }),
            _ => Method::Truncated(radius.max(2)),
        };
        Ok(Green { space: space.clone(), method })
    }

    fn truncated(&self, radius: usize, x: Vertex, y: Vertex) -> Result<f64> {
        let ball = self.space.truncate(radius - 1, 1, GREEN_MAX_VERTICES)?;
        let col = ball.green_column(y)?;
        let i = ball
            .index_of(x)
            .ok_or_else(|| BmcError::OutOfRange(format!("{} lies outside the truncation", self.space.format_vertex(x))))?;
        Ok(col[i])
    }

    pub fn green(&self, x: Vertex, y: Vertex) -> Result<f64> {
        self.space.validate(x)?;
        self.space.validate(y)?;
        match &self.method {
            Method::Tree(fp) => Ok(fp.path(x, y) / (1.0 - fp.return_probability(y))),
            Method::Truncated(r) => {
                let g = self.truncated(*r, x, y)?;
                let g2 = self.truncated(2 * r, x, y)?;
                if (g2 - g).abs() > TRUNCATION_STABILITY * g2.abs().max(1.0) {
                    return Err(BmcError::NotTransient { return_probability: 1.0 - 1.0 / g2 });
                }
                Ok(g2)
            }
        }
    }

    pub fn green_martin(&self, x: Vertex, y: Vertex, o: Vertex) -> Result<GreenMartin> {
        let g = self.green(x, y)?;
        Ok(GreenMartin { g, k: g / self.green(o, y)? })
    }
}

/// Green value on a tree by deepening truncation solves, independent of the
/// first-passage tables.
pub fn green_oracle(space: &StateSpace, x: Vertex, y: Vertex) -> Result<f64> {
    let t = space.as_cayley().ok_or_else(|| BmcError::Unsupported("a tree or free-group state space".into()))?;
    let problem = TreeProblem::new(t, [x, y], |_| 0.0, |u| if u == y { 1.0 } else { 0.0 });
    let (h, _) = problem.solve()?;
    Ok(h[&x])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_space::StepLaw;

    #[test]
    fn simple_t3_values() {
        let s = StateSpace::simple_tree(3).unwrap();
        let g = Green::new(&s, 0).unwrap();
        let a = s.parse_vertex("a").unwrap();
        assert!((g.green(1, 1).unwrap() - 2.0).abs() < 1e-12);
        assert!((g.green(1, a).unwrap() - 1.0).abs() < 1e-12);
        assert!((green_oracle(&s, 1, 1).unwrap() - 2.0).abs() < 1e-10);
        assert!((green_oracle(&s, 1, a).unwrap() - 1.0).abs() < 1e-10);
        assert!((g.green_martin(1, a, 1).unwrap().k - 1.0).abs() < 1e-15);
    }

    #[test]
    fn symmetric_for_simple_walk() {
        let s = StateSpace::free_group(2, StepLaw::Simple).unwrap();
        let g = Green::new(&s, 0).unwrap();
        let x = s.parse_vertex("ab").unwrap();
        let y = s.parse_vertex("B").unwrap();
        assert!((g.green(x, y).unwrap() - g.green(y, x).unwrap()).abs() < 1e-12);
        assert!((g.green(x, y).unwrap() - green_oracle(&s, x, y).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn anisotropic_against_oracle() {
        let s = StateSpace::tree(3, StepLaw::TowardRoot(0.2)).unwrap();
        let g = Green::new(&s, 0).unwrap();
        for (x, y) in [("", ""), ("ab", ""), ("", "ab"), ("ac", "ab"), ("abc", "abc")] {
            let (x, y) = (s.parse_vertex(x).unwrap(), s.parse_vertex(y).unwrap());
            assert!((g.green(x, y).unwrap() - green_oracle(&s, x, y).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn radial_truncation_matches_tree() {
        let g = Green::new(&StateSpace::radial(3).unwrap(), 40).unwrap();
        assert!((g.green(0, 0).unwrap() - 2.0).abs() < 1e-9);
        // Radius-1 mass is spread over three neighbours.
        assert!((g.green(0, 1).unwrap() / 3.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn closed_finite_chain_is_not_transient() {
        let s = StateSpace::explicit(vec!["u".into(), "v".into()], vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(Green::new(&s, 4).unwrap().green(0, 0), Err(BmcError::NotTransient { .. })));
        assert!(Green::new(&StateSpace::tree(3, StepLaw::TowardRoot(0.5)).unwrap(), 0).is_err());
    }
}
