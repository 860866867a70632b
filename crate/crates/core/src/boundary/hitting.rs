//! Hitting measures `kappa_x` of the end boundary and harmonic extensions.

use std::collections::BTreeMap;

use super::cylinder::{anchors_at, BoundaryMeasureTable, Cylinder, TestFunction};
use super::first_passage::FirstPassage;
use super::solver::TreeProblem;
use crate::error::{BmcError, Result};
use crate::population::Population;
use crate::state_space::{Alphabet, CayleyTree, StateSpace, Vertex};

/// Default bound on cylinder-table depth.
pub const DEFAULT_MAX_DEPTH: usize = 12;

/// The end boundary of a transient nearest-neighbour walk on a Cayley tree.
#[derive(Clone, Debug)]
pub struct Boundary {
    tree: CayleyTree,
    fp: FirstPassage,
    max_depth: usize,
}

impl Boundary {
    pub fn new(space: &StateSpace) -> Result<Self> {
        let tree = space
            .as_cayley()
            .ok_or_else(|| BmcError::Unsupported("a tree or free-group state space".into()))?
            .clone();
        let fp = FirstPassage::new(&tree)?;
        fp.require_transient()?;
        Ok(Boundary { tree, fp, max_depth: DEFAULT_MAX_DEPTH })
    }

    pub fn with_max_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn alphabet(&self) -> Alphabet {
        self.tree.alphabet()
    }

    pub fn tree(&self) -> &CayleyTree {
        &self.tree
    }

    pub fn first_passage(&self) -> &FirstPassage {
        &self.fp
    }

    /// `kappa_x(C)`: from outside the cone the walk must first reach the
    /// anchor; from inside it either never climbs to the anchor's parent or
    /// does and comes back.
    pub fn kappa(&self, x: Vertex, c: Cylinder) -> f64 {
        let a = self.alphabet();
        let v = c.anchor;
        let pv = v / a.base();
        let up = self.fp.up(v);
        let down = self.fp.down(pv, a.last(v).expect("non-root anchor"));
        let kv = (1.0 - up) / (1.0 - up * down);
        if c.cone_contains(a, x) {
            1.0 - self.fp.path(x, pv) * (1.0 - down * kv)
        } else {
            self.fp.path(x, v) * kv
        }
    }

    /// `f^phi(x) = <kappa_x, phi>`.
    pub fn harmonic(&self, phi: &TestFunction, x: Vertex) -> f64 {
        phi.constant + phi.terms.iter().map(|&(c, w)| w * self.kappa(x, c)).sum::<f64>()
    }

    /// `sum_y p(x,y) f^phi(y)`.
    pub fn harmonic_mean_value(&self, phi: &TestFunction, x: Vertex) -> Result<f64> {
        let a = self.alphabet();
        let mut total = 0.0;
        for l in 0..a.size() {
            total += self.tree.letter_prob(x, l) * self.harmonic(phi, a.mul_letter(x, l)?);
        }
        Ok(total)
    }

    /// Independent value of `f^phi` at each of `xs` by deepening truncation solves.
    pub fn harmonic_oracle(&self, phi: &TestFunction, xs: &[Vertex]) -> Result<Vec<f64>> {
        let a = self.alphabet();
        let keys = phi.terms.iter().map(|(c, _)| c.anchor).chain(xs.iter().copied());
        let problem = TreeProblem::new(&self.tree, keys, |u| phi.cone_extension(a, u), |_| 0.0);
        let (h, _) = problem.solve()?;
        Ok(xs.iter().map(|x| h[x]).collect())
    }

    pub fn kappa_oracle(&self, x: Vertex, c: Cylinder) -> Result<f64> {
        Ok(self.harmonic_oracle(&TestFunction::indicator(c), &[x])?[0])
    }

    /// `kappa_m` on all cylinders to `depth`; the total is the sum of the
    /// depth-1 masses, which equals `||m||` up to rounding.
    pub fn kappa_population(&self, m: &Population, depth: usize) -> Result<BoundaryMeasureTable> {
        if m.is_empty() {
            return Err(BmcError::EmptyPopulation);
        }
        if depth > self.max_depth {
            return Err(BmcError::DepthTooLarge { depth, bound: self.max_depth });
        }
        let a = self.alphabet();
        let mut masses = BTreeMap::new();
        for k in 1..=depth {
            for v in anchors_at(a, k) {
                let c = Cylinder { anchor: v };
                let mass: f64 = m.iter().map(|(x, n)| n as f64 * self.kappa(x, c)).sum();
                masses.insert(v, mass);
            }
        }
        let total = anchors_at(a, 1).iter().map(|v| masses.get(v).copied().unwrap_or(0.0)).sum();
        Ok(BoundaryMeasureTable { depth, masses, total })
    }

    pub fn kappa_table(&self, x: Vertex, depth: usize) -> Result<BoundaryMeasureTable> {
        self.kappa_population(&Population::singleton(x), depth)
    }

    /// `|kappa_x(C) - sum_y p(x,y) kappa_y(C)|`.
    pub fn stationarity_residual(&self, x: Vertex, c: Cylinder) -> Result<f64> {
        let phi = TestFunction::indicator(c);
        Ok((self.kappa(x, c) - self.harmonic_mean_value(&phi, x)?).abs())
    }
}
