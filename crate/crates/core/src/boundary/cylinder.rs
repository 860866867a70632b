//! Cylinders (shadows) of the end boundary and measures given on them.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{BmcError, Result};
use crate::state_space::{Alphabet, Vertex};

/// Ends passing through `anchor`; the anchor is never the root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cylinder {
    pub anchor: Vertex,
}

impl Cylinder {
    pub fn new(alphabet: Alphabet, anchor: Vertex) -> Result<Self> {
        if !alphabet.is_valid(anchor) || anchor == 1 {
            return Err(BmcError::MalformedVertex(format!(
                "cylinder anchor `{}` must be a non-root vertex",
                alphabet.format(anchor)
            )));
        }
        Ok(Cylinder { anchor })
    }

    pub fn depth(&self, alphabet: Alphabet) -> usize {
        alphabet.len(self.anchor)
    }

    /// `x` lies in the cone below the anchor (anchor included).
    #[inline]
    pub fn cone_contains(&self, alphabet: Alphabet, x: Vertex) -> bool {
        is_prefix(alphabet, self.anchor, x)
    }
}

/// `v` is a prefix of `x`.
#[inline]
pub fn is_prefix(alphabet: Alphabet, v: Vertex, x: Vertex) -> bool {
    let b = alphabet.base();
    let (lv, lx) = (alphabet.len(v), alphabet.len(x));
    if lx < lv {
        return false;
    }
    let mut y = x;
    for _ in 0..(lx - lv) {
        y /= b;
    }
    y == v
}

/// All anchors at exactly `depth`, in handle order.
pub fn anchors_at(alphabet: Alphabet, depth: usize) -> Vec<Vertex> {
    let mut level = vec![1u64];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(level.len() * alphabet.size() as usize);
        for &v in &level {
            for l in 0..alphabet.size() {
                if alphabet.last(v) != Some(alphabet.inverse(l)) {
                    next.push(v * alphabet.base() + l as u64);
                }
            }
        }
        level = next;
    }
    level
}

/// `phi = constant + sum_i coeff_i 1_{C_i}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    pub terms: Vec<(Cylinder, f64)>,
    pub constant: f64,
}

impl TestFunction {
    pub fn new(terms: Vec<(Cylinder, f64)>) -> Self {
        TestFunction { terms, constant: 0.0 }
    }

    pub fn indicator(c: Cylinder) -> Self {
        TestFunction::new(vec![(c, 1.0)])
    }

    /// The constant `c`, extended as `c` to every vertex including the root.
    pub fn constant(c: f64) -> Self {
        TestFunction { terms: Vec::new(), constant: c }
    }

    /// The constant 1 on the boundary, written as the sum of depth-1
    /// cylinders (its cone extension vanishes at the root).
    pub fn full(alphabet: Alphabet) -> Self {
        TestFunction::new(anchors_at(alphabet, 1).into_iter().map(|v| (Cylinder { anchor: v }, 1.0)).collect())
    }

    pub fn max_depth(&self, alphabet: Alphabet) -> usize {
        self.terms.iter().map(|(c, _)| c.depth(alphabet)).max().unwrap_or(0)
    }

    /// Value on any end through `x`, given `x` is deep enough to decide
    /// every cylinder.
    pub fn value_at_end_through(&self, alphabet: Alphabet, x: Vertex) -> f64 {
        self.cone_extension(alphabet, x)
    }

    /// Extension to vertices through cones: `constant + sum coeff [x in cone]`.
    #[inline]
    pub fn cone_extension(&self, alphabet: Alphabet, x: Vertex) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .filter(|(c, _)| c.cone_contains(alphabet, x))
                .map(|(_, w)| w)
                .sum::<f64>()
    }

    /// Extreme values of `phi` on the boundary.
    pub fn range(&self, alphabet: Alphabet) -> (f64, f64) {
        let depth = self.max_depth(alphabet).max(1);
        let vals: Vec<f64> =
            anchors_at(alphabet, depth).into_iter().map(|v| self.cone_extension(alphabet, v)).collect();
        (vals.iter().copied().fold(f64::INFINITY, f64::min), vals.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    pub fn sup_norm(&self, alphabet: Alphabet) -> f64 {
        let (lo, hi) = self.range(alphabet);
        lo.abs().max(hi.abs())
    }

    /// `<mu, phi>` against a cylinder table.
    pub fn integrate(&self, alphabet: Alphabet, table: &BoundaryMeasureTable) -> Result<f64> {
        let mut total = self.constant * table.total;
        for (c, w) in &self.terms {
            if c.depth(alphabet) > table.depth {
                return Err(BmcError::DepthTooLarge { depth: c.depth(alphabet), bound: table.depth });
            }
            total += w * table.mass(c.anchor);
        }
        Ok(total)
    }
}

/// A finite measure on the boundary given by its cylinder masses to `depth`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryMeasureTable {
    pub depth: usize,
    pub masses: BTreeMap<Vertex, f64>,
    pub total: f64,
}

impl BoundaryMeasureTable {
    pub fn mass(&self, anchor: Vertex) -> f64 {
        self.masses.get(&anchor).copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        BoundaryMeasureTable {
            depth: self.depth,
            masses: self.masses.iter().map(|(&v, &m)| (v, m * factor)).collect(),
            total: self.total * factor,
        }
    }

    /// Largest `|mass(v) - sum mass(children)|` and `|total - sum depth-1|`.
    pub fn consistency_residual(&self, alphabet: Alphabet) -> f64 {
        let mut worst: f64 = 0.0;
        let top: f64 = anchors_at(alphabet, 1).iter().map(|&v| self.mass(v)).sum();
        worst = worst.max((top - self.total).abs());
        for (&v, &m) in &self.masses {
            if alphabet.len(v) < self.depth {
                let children: f64 = (0..alphabet.size())
                    .filter(|&l| alphabet.last(v) != Some(alphabet.inverse(l)))
                    .map(|l| self.mass(v * alphabet.base() + l as u64))
                    .sum();
                worst = worst.max((m - children).abs());
            }
        }
        worst
    }

    /// Rows `anchor_word, depth, mass`.
    pub fn write_csv(&self, alphabet: Alphabet, out: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["anchor_word", "depth", "mass"])?;
        for (&v, &m) in &self.masses {
            w.write_record([alphabet.format(v), alphabet.len(v).to_string(), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchors_partition() {
        let t3 = Alphabet::Involutions(3);
        assert_eq!(anchors_at(t3, 1).len(), 3);
        assert_eq!(anchors_at(t3, 3).len(), 12);
        let f2 = Alphabet::FreeGroup(2);
        assert_eq!(anchors_at(f2, 2).len(), 12);
        assert!(anchors_at(t3, 2).windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn cones() {
        let t3 = Alphabet::Involutions(3);
        let c = Cylinder::new(t3, t3.parse("ab").unwrap()).unwrap();
        assert!(c.cone_contains(t3, t3.parse("abca").unwrap()));
        assert!(c.cone_contains(t3, t3.parse("ab").unwrap()));
        assert!(!c.cone_contains(t3, t3.parse("a").unwrap()));
        assert!(!c.cone_contains(t3, t3.parse("ac").unwrap()));
        assert!(Cylinder::new(t3, 1).is_err());
    }

    #[test]
    fn test_function_range() {
        let t3 = Alphabet::Involutions(3);
        let a = Cylinder::new(t3, t3.parse("a").unwrap()).unwrap();
        let b = Cylinder::new(t3, t3.parse("b").unwrap()).unwrap();
        let phi = TestFunction::new(vec![(a, 1.0), (b, -1.0)]);
        assert_eq!(phi.range(t3), (-1.0, 1.0));
        assert_eq!(TestFunction::full(t3).range(t3), (1.0, 1.0));
    }
}
