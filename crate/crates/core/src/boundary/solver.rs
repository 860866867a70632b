//! Exact solves of Dirichlet problems on a Cayley tree cut at depth `R`.
//!
//! Only finitely many "special" vertices carry data (anchors, query points,
//! sources and all their prefixes). Every other subtree sees a constant
//! front value, so its response to the parent is summarised by two numbers
//! `alpha, beta` that depend only on the subtree's class and depth:
//! `h(u) = alpha * c + beta * h(parent u)`. The special tree is then
//! eliminated leaf-first. Cost is linear in `R` and in the special set, so
//! `R` can go far beyond any ball that fits in memory.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{BmcError, Result};
use crate::state_space::{CayleyTree, Vertex};

/// Stop deepening when successive solves differ by less than this.
pub const DEEPENING_TOL: f64 = 1e-12;
const DEEPENING_STEP: usize = 4;
const MAX_RADIUS: usize = 20_000;

/// A harmonic problem `h = P h + source` inside the ball, `h = front` at
/// depth `R`. `front(u)` must be constant on the subtree of every
/// non-special vertex, and `source` must vanish off the special set.
pub struct TreeProblem<'a> {
    tree: &'a CayleyTree,
    special: BTreeSet<Vertex>,
    front: Box<dyn Fn(Vertex) -> f64 + 'a>,
    source: Box<dyn Fn(Vertex) -> f64 + 'a>,
}

impl<'a> TreeProblem<'a> {
    /// `keys` are closed under prefixes here.
    pub fn new(
        tree: &'a CayleyTree,
        keys: impl IntoIterator<Item = Vertex>,
        front: impl Fn(Vertex) -> f64 + 'a,
        source: impl Fn(Vertex) -> f64 + 'a,
    ) -> Self {
        let a = tree.alphabet();
        let mut special = BTreeSet::from([1u64]);
        for mut v in keys {
            while special.insert(v) {
                match a.parent(v) {
                    Some(p) => v = p,
                    None => break,
                }
            }
        }
        TreeProblem { tree, special, front: Box::new(front), source: Box::new(source) }
    }

    fn max_depth(&self) -> usize {
        let a = self.tree.alphabet();
        self.special.iter().map(|&v| a.len(v)).max().unwrap_or(0)
    }

    /// Classes of subtrees: the last letter for group-invariant laws, one
    /// class for the toward-root law.
    fn class_of(&self, u: Vertex) -> usize {
        if self.tree.is_group_invariant() {
            self.tree.alphabet().last(u).expect("non-root") as usize
        } else {
            0
        }
    }

    /// `alpha[c][k], beta[c][k]` for subtrees rooted at depth `k` (1..=R).
    fn subtree_tables(&self, radius: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let a = self.tree.alphabet();
        let d = a.size();
        let classes = if self.tree.is_group_invariant() { d as usize } else { 1 };
        let mut alpha = vec![vec![0.0; radius + 1]; classes];
        let mut beta = vec![vec![0.0; radius + 1]; classes];
        for c in 0..classes {
            alpha[c][radius] = 1.0;
        }
        for k in (1..radius).rev() {
            for c in 0..classes {
                let rep = a.base() + c as u64;
                let back = a.inverse(c as u8);
                let mut denom = 1.0;
                let mut num = 0.0;
                for l in 0..d {
                    if l == back {
                        continue;
                    }
                    let p = self.tree.letter_prob(rep, l);
                    let cc = if classes == 1 { 0 } else { l as usize };
                    denom -= p * beta[cc][k + 1];
                    num += p * alpha[cc][k + 1];
                }
                alpha[c][k] = num / denom;
                beta[c][k] = self.tree.letter_prob(rep, back) / denom;
            }
        }
        (alpha, beta)
    }

    /// Solution at every special vertex for the cut at depth `radius`.
    pub fn solve_at(&self, radius: usize) -> Result<BTreeMap<Vertex, f64>> {
        if radius <= self.max_depth() {
            return Err(BmcError::OutOfRange(format!(
                "cut depth {radius} must exceed the deepest key {}",
                self.max_depth()
            )));
        }
        let a = self.tree.alphabet();
        let (alpha, beta) = self.subtree_tables(radius);
        // Leaf-first: longer words have larger handles within a level, and
        // every child handle exceeds its parent's.
        let mut coef: BTreeMap<Vertex, (f64, f64)> = BTreeMap::new();
        for &s in self.special.iter().rev() {
            let mut diag = 1.0;
            let mut rhs = (self.source)(s);
            let mut parent_coef = 0.0;
            let last_back = a.last(s).map(|l| a.inverse(l));
            for l in 0..a.size() {
                let p = self.tree.letter_prob(s, l);
                if Some(l) == last_back {
                    parent_coef = p;
                    continue;
                }
                let w = s * a.base() + l as u64;
                if let Some(&(aw, bw)) = coef.get(&w) {
                    rhs += p * aw;
                    diag -= p * bw;
                } else {
                    let k = a.len(w);
                    let c = self.class_of(w);
                    rhs += p * alpha[c][k] * (self.front)(w);
                    diag -= p * beta[c][k];
                }
            }
            if !(diag > 0.0) {
                return Err(BmcError::NotTransient { return_probability: 1.0 - diag });
            }
            coef.insert(s, (rhs / diag, parent_coef / diag));
        }
        let mut h = BTreeMap::new();
        for (&s, &(aa, bb)) in &coef {
            let hp = a.parent(s).map(|p| h[&p]).unwrap_or(0.0);
            h.insert(s, aa + bb * hp);
        }
        Ok(h)
    }

    /// Deepen the cut in steps of 4 until successive solutions agree on
    /// every special vertex. Returns the solution and the final depth.
    pub fn solve(&self) -> Result<(BTreeMap<Vertex, f64>, usize)> {
        let mut radius = self.max_depth() + DEEPENING_STEP;
        let mut prev = self.solve_at(radius)?;
        while radius < MAX_RADIUS {
            radius += DEEPENING_STEP;
            let next = self.solve_at(radius)?;
            let gap = prev.iter().map(|(k, v)| (next[k] - v).abs()).fold(0.0, f64::max);
            prev = next;
            if gap < DEEPENING_TOL {
                return Ok((prev, radius));
            }
        }
        Err(BmcError::NonConvergence { iterations: MAX_RADIUS / DEEPENING_STEP })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::cylinder::{Cylinder, TestFunction};
    use crate::state_space::{StateSpace, StepLaw};

    #[test]
    fn cylinder_on_t3() {
        let s = StateSpace::simple_tree(3).unwrap();
        let t = s.as_cayley().unwrap();
        let a = t.alphabet();
        let c = Cylinder::new(a, a.parse("ab").unwrap()).unwrap();
        let phi = TestFunction::indicator(c);
        let p = TreeProblem::new(t, [c.anchor], |u| phi.cone_extension(a, u), |_| 0.0);
        let (h, _) = p.solve().unwrap();
        assert!((h[&1] - 1.0 / 6.0).abs() < 1e-10);
    }

    #[test]
    fn matches_dense_truncation() {
        // Same cut, two solvers.
        let s = StateSpace::free_group(2, StepLaw::Weights(vec![0.1, 0.2, 0.3, 0.4])).unwrap();
        let t = s.as_cayley().unwrap();
        let a = t.alphabet();
        let anchor = a.parse("aB").unwrap();
        let x = a.parse("b").unwrap();
        let phi = TestFunction::indicator(Cylinder::new(a, anchor).unwrap());
        let p = TreeProblem::new(t, [anchor, x], |u| phi.cone_extension(a, u), |_| 0.0);
        let r = 5;
        let fast = p.solve_at(r).unwrap();
        let ball = s.truncate(r - 1, 1, 100_000).unwrap();
        let dense = ball.solve(|_| 0.0, |u| phi.cone_extension(a, u)).unwrap();
        for v in [1, x, anchor] {
            let i = ball.index_of(v).unwrap();
            assert!((fast[&v] - dense[i]).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn green_with_source() {
        let s = StateSpace::tree(3, StepLaw::TowardRoot(0.25)).unwrap();
        let t = s.as_cayley().unwrap();
        let y = t.alphabet().parse("ac").unwrap();
        let p = TreeProblem::new(t, [y], |_| 0.0, |u| if u == y { 1.0 } else { 0.0 });
        let r = 5;
        let fast = p.solve_at(r).unwrap();
        let ball = s.truncate(r - 1, 1, 100_000).unwrap();
        let dense = ball.green_column(y).unwrap();
        let i = ball.index_of(1).unwrap();
        assert!((fast[&1] - dense[i]).abs() < 1e-12);
    }
}
