//! First-passage probabilities `F(x -> y)` for nearest-neighbour tree walks.

use crate::error::{BmcError, Result};
use crate::state_space::{Alphabet, CayleyTree, StepLaw, Vertex};

/// Increment below which the monotone iteration stops.
pub const FP_TOL: f64 = 1e-13;
pub const FP_BUDGET: usize = 50_000_000;
/// `1 - U(o)` below this flags the walk as not transient.
pub const TRANSIENCE_GAP: f64 = 1e-5;
/// Depth-indexed tables extend this far.
const MAX_DEPTH: usize = 64;

#[derive(Clone, Debug)]
enum Table {
    /// Group-invariant law: `f[l]` is the probability to ever step from `x`
    /// to `x l`, the same for all `x`.
    Invariant { mu: Vec<f64>, f: Vec<f64> },
    /// Toward-root law: `up` from any non-root vertex to its parent,
    /// `down[j]` from depth `j` to a given child at depth `j + 1`.
    TowardRoot { p: f64, up: f64, down: Vec<f64> },
}

#[derive(Clone, Debug)]
pub struct FirstPassage {
    alphabet: Alphabet,
    table: Table,
    iterations: usize,
}

/// Iterate `x <- g(x)` from zero until the increment drops below `FP_TOL`.
fn monotone_fixed_point(mut g: impl FnMut(&[f64]) -> Vec<f64>, n: usize) -> Result<(Vec<f64>, usize)> {
    let mut x = vec![0.0; n];
    for it in 1..=FP_BUDGET {
        let next = g(&x);
        let delta = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = next;
        if delta < FP_TOL {
            return Ok((x, it));
        }
    }
    Err(BmcError::NonConvergence { iterations: FP_BUDGET })
}

impl FirstPassage {
    pub fn new(tree: &CayleyTree) -> Result<Self> {
        let a = tree.alphabet();
        let d = a.size() as usize;
        match tree.law() {
            StepLaw::TowardRoot(p) => {
                let p = *p;
                let (up, iterations) = monotone_fixed_point(|x| vec![p + (1.0 - p) * x[0] * x[0]], 1)?;
                let up = up[0];
                let c = (1.0 - p) / (d as f64 - 1.0);
                let b = c * (d as f64 - 2.0);
                let mut down = vec![(1.0 / d as f64) / (1.0 - (d as f64 - 1.0) / d as f64 * up)];
                for j in 1..MAX_DEPTH {
                    let prev = down[j - 1];
                    down.push(c / (1.0 - b * up - p * prev));
                }
                Ok(FirstPassage { alphabet: a, table: Table::TowardRoot { p, up, down }, iterations })
            }
            _ => {
                let mu: Vec<f64> = (0..d as u8).map(|l| tree.letter_prob(1, l)).collect();
                let (f, iterations) = monotone_fixed_point(
                    |f| {
                        (0..d)
                            .map(|l| {
                                let loops: f64 = (0..d)
                                    .filter(|&h| h != l)
                                    .map(|h| mu[h] * f[a.inverse(h as u8) as usize])
                                    .sum();
                                (mu[l] + loops * f[l]).min(1.0)
                            })
                            .collect()
                    },
                    d,
                )?;
                Ok(FirstPassage { alphabet: a, table: Table::Invariant { mu, f }, iterations })
            }
        }
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Isotropic scalar `F` for group-invariant laws with equal weights.
    pub fn scalar(&self) -> Option<f64> {
        match &self.table {
            Table::Invariant { mu, f } if mu.iter().all(|&m| m == mu[0]) => Some(f[0]),
            _ => None,
        }
    }

    /// Letter probabilities of a group-invariant law.
    pub fn letter_probs(&self) -> Option<&[f64]> {
        match &self.table {
            Table::Invariant { mu, .. } => Some(mu),
            _ => None,
        }
    }

    /// `F(x -> parent(x))` for a non-root `x`.
    #[inline]
    pub fn up(&self, x: Vertex) -> f64 {
        match &self.table {
            Table::Invariant { f, .. } => {
                let last = self.alphabet.last(x).expect("non-root");
                f[self.alphabet.inverse(last) as usize]
            }
            Table::TowardRoot { up, .. } => *up,
        }
    }

    /// `F(x -> x l)` where `x l` is a child of `x` (so `l` does not cancel).
    #[inline]
    pub fn down(&self, x: Vertex, l: u8) -> f64 {
        match &self.table {
            Table::Invariant { f, .. } => f[l as usize],
            Table::TowardRoot { down, .. } => {
                let depth = self.alphabet.len(x);
                down[depth.min(down.len() - 1)]
            }
        }
    }

    /// `F(x -> y)` for adjacent `x`, `y`.
    pub fn edge(&self, x: Vertex, y: Vertex) -> Result<f64> {
        let a = self.alphabet;
        if a.parent(x) == Some(y) {
            Ok(self.up(x))
        } else if a.parent(y) == Some(x) {
            Ok(self.down(x, a.last(y).expect("child")))
        } else {
            Err(BmcError::OutOfRange(format!(
                "{} and {} are not neighbours",
                a.format(x),
                a.format(y)
            )))
        }
    }

    /// `F(x -> y)` for any pair: product of edge values along the geodesic.
    pub fn path(&self, x: Vertex, y: Vertex) -> f64 {
        let a = self.alphabet;
        let b = a.base();
        let (mut lx, mut ly) = (a.len(x), a.len(y));
        let (mut u, mut v) = (x, y);
        let mut prod = 1.0;
        // Climb from x to the meeting point; collect the descent to y.
        let mut descent: [u64; 72] = [0; 72];
        let mut nd = 0;
        while lx > ly {
            prod *= self.up(u);
            u /= b;
            lx -= 1;
        }
        while ly > lx {
            descent[nd] = v;
            nd += 1;
            v /= b;
            ly -= 1;
        }
        while u != v {
            prod *= self.up(u);
            u /= b;
            descent[nd] = v;
            nd += 1;
            v /= b;
        }
        for &w in descent[..nd].iter().rev() {
            prod *= self.down(w / b, (w % b) as u8);
        }
        prod
    }

    /// `U(y) = sum_w p(y, w) F(w -> y)`, the return probability to `y`.
    pub fn return_probability(&self, y: Vertex) -> f64 {
        let a = self.alphabet;
        match &self.table {
            Table::Invariant { mu, f } => {
                (0..a.size()).map(|l| mu[l as usize] * f[a.inverse(l) as usize]).sum()
            }
            Table::TowardRoot { p, up, down } => {
                let depth = a.len(y);
                if depth == 0 {
                    *up
                } else {
                    p * down[(depth - 1).min(down.len() - 1)] + (1.0 - p) * up
                }
            }
        }
    }

    pub fn is_transient(&self) -> bool {
        1.0 - self.return_probability(1) >= TRANSIENCE_GAP
    }

    pub fn require_transient(&self) -> Result<()> {
        if self.is_transient() {
            Ok(())
        } else {
            Err(BmcError::NotTransient { return_probability: self.return_probability(1) })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state_space::StateSpace;

    fn fp(space: &StateSpace) -> FirstPassage {
        FirstPassage::new(space.as_cayley().unwrap()).unwrap()
    }

    #[test]
    fn scalar_values() {
        let t3 = fp(&StateSpace::simple_tree(3).unwrap());
        assert!((t3.scalar().unwrap() - 0.5).abs() < 1e-12);
        let t4 = fp(&StateSpace::simple_tree(4).unwrap());
        assert!((t4.scalar().unwrap() - 1.0 / 3.0).abs() < 1e-12);
        // F_2 simple walk is the 4-regular tree.
        let f2 = fp(&StateSpace::free_group(2, StepLaw::Simple).unwrap());
        assert!((f2.scalar().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn near_critical_is_flagged() {
        let s = StateSpace::tree(3, StepLaw::TowardRoot(0.5)).unwrap();
        let f = fp(&s);
        assert!(1.0 - f.up(s.parse_vertex("a").unwrap()) < 1e-5);
        assert!(!f.is_transient());
        assert!(fp(&StateSpace::tree(3, StepLaw::TowardRoot(0.3)).unwrap()).is_transient());
    }

    #[test]
    fn toward_root_matches_closed_form() {
        let s = StateSpace::tree(3, StepLaw::TowardRoot(0.3)).unwrap();
        let f = fp(&s);
        let a = s.parse_vertex("ab").unwrap();
        assert!((f.up(a) - 0.3 / 0.7).abs() < 1e-12);
        // With p = 1/3 the law is the simple walk away from the root.
        let s = StateSpace::tree(3, StepLaw::TowardRoot(1.0 / 3.0)).unwrap();
        let f = fp(&s);
        let x = s.parse_vertex("abc").unwrap();
        assert!((f.down(x, 0) - 0.5).abs() < 1e-12);
        assert!((f.down(1, 0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn path_products() {
        let s = StateSpace::simple_tree(3).unwrap();
        let f = fp(&s);
        let x = s.parse_vertex("abc").unwrap();
        let y = s.parse_vertex("acb").unwrap();
        assert!((f.path(x, y) - 0.5f64.powi(4)).abs() < 1e-12);
        assert_eq!(f.path(x, x), 1.0);
        assert!(f.edge(x, y).is_err());
    }
}
