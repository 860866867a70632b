//! Finite populations: sparse multisets of vertices with positive counts.

use std::io::{Read, Write};

use num_rational::Ratio;

use crate::error::{BmcError, Result};
use crate::state_space::{StateSpace, Vertex};

/// Multiset over vertices, stored sorted by handle with no zero counts.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Population {
    entries: Vec<(Vertex, u64)>,
    size: u64,
}

impl Population {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(x: Vertex) -> Self {
        Self::with_count(x, 1)
    }

    /// `count` particles at `x`.
    pub fn with_count(x: Vertex, count: u64) -> Self {
        if count == 0 {
            return Self::new();
        }
        Population { entries: vec![(x, count)], size: count }
    }

    /// Build from arbitrary `(vertex, count)` pairs; duplicates are added.
    pub fn from_counts(pairs: impl IntoIterator<Item = (Vertex, u64)>) -> Result<Self> {
        let mut raw: Vec<(Vertex, u64)> = pairs.into_iter().collect();
        Self::from_unsorted(&mut raw)
    }

    /// Sort and coalesce a scratch buffer. A stable sort detects presorted
    /// runs, so buffers built from a few sorted streams merge in linear time.
    pub fn from_unsorted(raw: &mut Vec<(Vertex, u64)>) -> Result<Self> {
        raw.sort_by_key(|e| e.0);
        let mut entries: Vec<(Vertex, u64)> = Vec::with_capacity(raw.len());
        let mut size: u64 = 0;
        for &(x, c) in raw.iter() {
            if c == 0 {
                continue;
            }
            size = size.checked_add(c).ok_or(BmcError::CountOverflow)?;
            match entries.last_mut() {
                Some(last) if last.0 == x => last.1 += c,
                _ => entries.push((x, c)),
            }
        }
        Ok(Population { entries, size })
    }

    /// `||m||`, the augmentation.
    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Number of distinct occupied vertices.
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Vertex, u64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn entries(&self) -> &[(Vertex, u64)] {
        &self.entries
    }

    pub fn count(&self, x: Vertex) -> u64 {
        self.entries.binary_search_by_key(&x, |e| e.0).map(|i| self.entries[i].1).unwrap_or(0)
    }

    /// Empirical distribution `m / ||m||`.
    pub fn empirical(&self) -> Result<Vec<(Vertex, f64)>> {
        if self.is_empty() {
            return Err(BmcError::EmptyPopulation);
        }
        let n = self.size as f64;
        Ok(self.entries.iter().map(|&(x, c)| (x, c as f64 / n)).collect())
    }

    /// Empirical distribution with exact rational masses.
    pub fn empirical_exact(&self) -> Result<Vec<(Vertex, Ratio<u64>)>> {
        if self.is_empty() {
            return Err(BmcError::EmptyPopulation);
        }
        Ok(self.entries.iter().map(|&(x, c)| (x, Ratio::new(c, self.size))).collect())
    }

    /// `<m, f> = sum_x m(x) f(x)`; `f` returns `None` where undefined.
    pub fn lift(&self, f: impl Fn(Vertex) -> Option<f64>) -> Result<f64> {
        let mut total = 0.0;
        for &(x, c) in &self.entries {
            let v = f(x).ok_or_else(|| BmcError::UndefinedFunction(format!("handle {x}")))?;
            total += c as f64 * v;
        }
        Ok(total)
    }

    /// `<m, f>` for an everywhere-defined `f`.
    pub fn pair(&self, f: impl Fn(Vertex) -> f64) -> f64 {
        self.entries.iter().map(|&(x, c)| c as f64 * f(x)).sum()
    }

    /// Pointwise sum.
    pub fn merge(&self, other: &Population) -> Result<Population> {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push(b[j]);
                j += 1;
            } else {
                out.push((a[i].0, a[i].1.checked_add(b[j].1).ok_or(BmcError::CountOverflow)?));
                i += 1;
                j += 1;
            }
        }
        let size = self.size.checked_add(other.size).ok_or(BmcError::CountOverflow)?;
        Ok(Population { entries: out, size })
    }

    /// Write `vertex_string,count` rows with a header.
    pub fn write_csv(&self, space: &StateSpace, out: impl Write) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(["vertex_string", "count"])?;
        for &(x, c) in &self.entries {
            w.write_record([space.format_vertex(x), c.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(space: &StateSpace, input: impl Read) -> Result<Population> {
        let mut r = csv::Reader::from_reader(input);
        let mut pairs = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let x = space.parse_vertex(rec.get(0).unwrap_or(""))?;
            let c: u64 = rec
                .get(1)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| BmcError::config("population.count", format!("bad row {rec:?}")))?;
            pairs.push((x, c));
        }
        Population::from_counts(pairs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pop(pairs: &[(Vertex, u64)]) -> Population {
        Population::from_counts(pairs.iter().copied()).unwrap()
    }

    #[test]
    fn empirical_examples() {
        let m = pop(&[(1, 2), (2, 1)]);
        assert_eq!(m.empirical().unwrap(), vec![(1, 2.0 / 3.0), (2, 1.0 / 3.0)]);
        assert_eq!(pop(&[(4, 1)]).empirical().unwrap(), vec![(4, 1.0)]);
        let five = pop(&[(1, 1), (2, 1), (3, 1), (4, 1), (5, 1)]);
        assert!(five.empirical().unwrap().iter().all(|&(_, p)| p == 0.2));
        let exact: Ratio<u64> = five.empirical_exact().unwrap().iter().map(|e| e.1).sum();
        assert_eq!(exact, Ratio::from_integer(1));
        assert!(matches!(Population::new().empirical(), Err(BmcError::EmptyPopulation)));
    }

    #[test]
    fn lift_examples() {
        let m = pop(&[(1, 2), (2, 1)]);
        let f = |x: Vertex| Some(x as f64 * 10.0);
        assert_eq!(m.lift(f).unwrap(), 2.0 * 10.0 + 20.0);
        // Brute force over particles.
        let particles = [1, 1, 2];
        assert_eq!(m.lift(f).unwrap(), particles.iter().map(|&x| f(x).unwrap()).sum::<f64>());
        assert!(m.lift(|x| (x == 1).then_some(1.0)).is_err());
        assert_eq!(Population::singleton(7).lift(f).unwrap(), 70.0);
    }

    #[test]
    fn merge_examples() {
        assert_eq!(Population::singleton(3).merge(&Population::singleton(3)).unwrap(), pop(&[(3, 2)]));
    }

    #[test]
    fn csv_round_trip() {
        let space = StateSpace::simple_tree(3).unwrap();
        let m = pop(&[(1, 2), (space.parse_vertex("ab").unwrap(), 5)]);
        let mut buf = Vec::new();
        m.write_csv(&space, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "vertex_string,count\no,2\nab,5\n");
        assert_eq!(Population::read_csv(&space, &buf[..]).unwrap(), m);
    }

    fn arb_pop() -> impl Strategy<Value = Population> {
        proptest::collection::vec((0u64..20, 1u64..50), 1..10)
            .prop_map(|v| Population::from_counts(v).unwrap())
    }

    proptest! {
        #[test]
        fn augmentation_is_additive(a in arb_pop(), b in arb_pop(), c in arb_pop()) {
            let ab = a.merge(&b).unwrap();
            prop_assert_eq!(ab.size(), a.size() + b.size());
            prop_assert_eq!(&ab, &b.merge(&a).unwrap());
            prop_assert_eq!(ab.merge(&c).unwrap(), a.merge(&b.merge(&c).unwrap()).unwrap());
            let f = |x: Vertex| (x as f64).sin();
            prop_assert!((ab.pair(f) - a.pair(f) - b.pair(f)).abs() < 1e-9);
            prop_assert_eq!(a.pair(|_| 1.0), a.size() as f64);
            let total: f64 = a.empirical().unwrap().iter().map(|e| e.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn lift_is_linear(a in arb_pop(), s in -3.0f64..3.0) {
            let f = |x: Vertex| x as f64;
            let g = |x: Vertex| (x * x) as f64;
            let lhs = a.pair(|x| s * f(x) + g(x));
            prop_assert!((lhs - (s * a.pair(f) + a.pair(g))).abs() < 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
