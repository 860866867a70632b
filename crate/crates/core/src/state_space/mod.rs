//! Countable state spaces with finite-support transition kernels.
//!
//! Vertices are `u64` handles. On Cayley trees they are packed words (see
//! [`words`]); on explicit spaces they are row indices; on the radial
//! reduction they are distances from the root.

mod truncation;
pub mod words;

use std::collections::{HashMap, VecDeque};

use num_rational::Ratio;

use crate::error::{BmcError, Result};
use crate::rng::StreamRng;
pub use truncation::TruncatedSpace;
pub use words::Alphabet;

pub type Vertex = u64;

/// Tolerance on outgoing probability mass.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Nearest-neighbour step law on a Cayley tree.
#[derive(Clone, Debug, PartialEq)]
pub enum StepLaw {
    /// Uniform over all neighbours.
    Simple,
    /// Group-invariant: letter `l` is used with probability `weights[l]`.
    Weights(Vec<f64>),
    /// Step to the parent with probability `p`, else uniformly to one of the
    /// other neighbours. Uniform at the root.
    TowardRoot(f64),
}

#[derive(Clone, Debug)]
pub struct CayleyTree {
    alphabet: Alphabet,
    law: StepLaw,
    letter_probs: Vec<f64>,
}

impl CayleyTree {
    pub fn new(alphabet: Alphabet, law: StepLaw) -> Result<Self> {
        let n = alphabet.size() as usize;
        let letter_probs = match &law {
            StepLaw::Simple => vec![1.0 / n as f64; n],
            StepLaw::Weights(w) => {
                if w.len() != n {
                    return Err(BmcError::InvalidKernel(format!(
                        "expected {n} letter weights, got {}",
                        w.len()
                    )));
                }
                if w.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
                    return Err(BmcError::InvalidKernel(
                        "letter weights must be finite and strictly positive".into(),
                    ));
                }
                let total: f64 = w.iter().sum();
                if (total - 1.0).abs() > ROW_SUM_TOL {
                    return Err(BmcError::InvalidKernel(format!(
                        "letter weights sum to {total}, not 1"
                    )));
                }
                w.clone()
            }
            StepLaw::TowardRoot(p) => {
                if !(*p > 0.0 && *p < 1.0) {
                    return Err(BmcError::InvalidKernel(format!(
                        "toward-root probability must lie in (0,1), got {p}"
                    )));
                }
                vec![1.0 / n as f64; n]
            }
        };
        Ok(CayleyTree { alphabet, law, letter_probs })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn law(&self) -> &StepLaw {
        &self.law
    }

    /// The step law does not depend on the vertex.
    pub fn is_group_invariant(&self) -> bool {
        !matches!(self.law, StepLaw::TowardRoot(_))
    }

    /// Invariant under all tree automorphisms fixing the root, so hitting
    /// probabilities depend only on distances.
    pub fn is_isotropic(&self) -> bool {
        match &self.law {
            StepLaw::Simple => true,
            StepLaw::Weights(w) => w.iter().all(|&x| x == w[0]),
            StepLaw::TowardRoot(_) => true,
        }
    }

    /// Probability of appending letter `l` at vertex `v`.
    #[inline]
    pub fn letter_prob(&self, v: Vertex, l: u8) -> f64 {
        match self.law {
            StepLaw::TowardRoot(p) => match self.alphabet.last(v) {
                None => self.letter_probs[l as usize],
                Some(last) if self.alphabet.inverse(last) == l => p,
                Some(_) => (1.0 - p) / (self.alphabet.size() - 1) as f64,
            },
            _ => self.letter_probs[l as usize],
        }
    }

    #[inline]
    fn sample_letter(&self, v: Vertex, rng: &mut StreamRng) -> u8 {
        let n = self.alphabet.size();
        match &self.law {
            StepLaw::Simple => rng.below(n as u64) as u8,
            StepLaw::Weights(w) => {
                let u = rng.uniform();
                let mut acc = 0.0;
                for (l, &p) in w.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        return l as u8;
                    }
                }
                n - 1
            }
            StepLaw::TowardRoot(p) => match self.alphabet.last(v) {
                None => rng.below(n as u64) as u8,
                Some(last) => {
                    let back = self.alphabet.inverse(last);
                    if rng.bernoulli(*p) {
                        back
                    } else {
                        let k = rng.below((n - 1) as u64) as u8;
                        if k >= back {
                            k + 1
                        } else {
                            k
                        }
                    }
                }
            },
        }
    }
}

/// Finite kernel given as a dense matrix over named states.
#[derive(Clone, Debug)]
pub struct ExplicitSpace {
    names: Vec<String>,
    index: HashMap<String, Vertex>,
    rows: Vec<Vec<(Vertex, f64)>>,
}

impl ExplicitSpace {
    pub fn new(names: Vec<String>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        let n = names.len();
        if n == 0 {
            return Err(BmcError::InvalidKernel("explicit space has no states".into()));
        }
        if matrix.len() != n {
            return Err(BmcError::InvalidKernel(format!(
                "matrix has {} rows for {n} states",
                matrix.len()
            )));
        }
        let mut index = HashMap::new();
        for (i, s) in names.iter().enumerate() {
            if index.insert(s.clone(), i as Vertex).is_some() {
                return Err(BmcError::InvalidKernel(format!("duplicate state name `{s}`")));
            }
        }
        let mut rows = Vec::with_capacity(n);
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != n {
                return Err(BmcError::InvalidKernel(format!("row {i} has {} entries", row.len())));
            }
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(BmcError::InvalidKernel(format!("row {i} has a negative entry")));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_SUM_TOL {
                return Err(BmcError::InvalidKernel(format!("row {i} sums to {total}")));
            }
            rows.push(
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(j, &p)| (j as Vertex, p))
                    .collect(),
            );
        }
        Ok(ExplicitSpace { names, index, rows })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Dense matrix, entries exactly as configured.
    pub fn matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; n];
                for &(j, p) in row {
                    dense[j as usize] = p;
                }
                dense
            })
            .collect()
    }
}

/// A countable state space together with its transition kernel.
#[derive(Clone, Debug)]
pub enum StateSpace {
    Cayley(CayleyTree),
    Explicit(ExplicitSpace),
    /// Distance-from-root chain of a nearest-neighbour walk on `T_degree`:
    /// `0 -> 1` surely, `k -> k-1` with probability `down`, else `k -> k+1`.
    Radial { degree: u8, down: f64 },
    /// One state; the branching chain is a Galton-Watson process.
    Singleton,
}

impl StateSpace {
    pub fn tree(degree: u8, law: StepLaw) -> Result<Self> {
        Ok(StateSpace::Cayley(CayleyTree::new(Alphabet::new_tree(degree)?, law)?))
    }

    pub fn free_group(rank: u8, law: StepLaw) -> Result<Self> {
        Ok(StateSpace::Cayley(CayleyTree::new(Alphabet::new_free_group(rank)?, law)?))
    }

    pub fn simple_tree(degree: u8) -> Result<Self> {
        Self::tree(degree, StepLaw::Simple)
    }

    pub fn explicit(names: Vec<String>, matrix: Vec<Vec<f64>>) -> Result<Self> {
        Ok(StateSpace::Explicit(ExplicitSpace::new(names, matrix)?))
    }

    /// Radial reduction of the simple walk on `T_degree`.
    pub fn radial(degree: u8) -> Result<Self> {
        if degree < 2 {
            return Err(BmcError::InvalidKernel(format!("tree degree {degree} < 2")));
        }
        Ok(StateSpace::Radial { degree, down: 1.0 / degree as f64 })
    }

    /// Radial reduction of this space's kernel, when it is isotropic.
    pub fn radial_reduction(&self) -> Result<StateSpace> {
        match self {
            StateSpace::Cayley(t) if t.is_isotropic() => {
                let d = t.alphabet().size();
                let down = match t.law() {
                    StepLaw::TowardRoot(p) => *p,
                    _ => 1.0 / d as f64,
                };
                Ok(StateSpace::Radial { degree: d, down })
            }
            StateSpace::Radial { .. } => Ok(self.clone()),
            _ => Err(BmcError::Unsupported("an isotropic tree kernel".into())),
        }
    }

    pub fn root(&self) -> Vertex {
        match self {
            StateSpace::Cayley(_) => 1,
            _ => 0,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            StateSpace::Cayley(t) => match t.alphabet() {
                Alphabet::Involutions(_) => "tree",
                Alphabet::FreeGroup(_) => "free_group",
            },
            StateSpace::Explicit(_) => "explicit",
            StateSpace::Radial { .. } => "tree_radial",
            StateSpace::Singleton => "singleton",
        }
    }

    pub fn as_cayley(&self) -> Option<&CayleyTree> {
        match self {
            StateSpace::Cayley(t) => Some(t),
            _ => None,
        }
    }

    pub fn is_valid(&self, x: Vertex) -> bool {
        match self {
            StateSpace::Cayley(t) => t.alphabet().is_valid(x),
            StateSpace::Explicit(e) => (x as usize) < e.len(),
            StateSpace::Radial { .. } => x < u64::MAX,
            StateSpace::Singleton => x == 0,
        }
    }

    pub fn validate(&self, x: Vertex) -> Result<()> {
        if self.is_valid(x) {
            Ok(())
        } else {
            Err(BmcError::MalformedVertex(format!("handle {x} in a {} space", self.kind())))
        }
    }

    /// Maximum number of neighbours of any vertex.
    pub fn max_degree(&self) -> usize {
        match self {
            StateSpace::Cayley(t) => t.alphabet().size() as usize,
            StateSpace::Explicit(e) => e.rows.iter().map(Vec::len).max().unwrap_or(0),
            StateSpace::Radial { .. } => 2,
            StateSpace::Singleton => 1,
        }
    }

    /// Support of `p_x` with probabilities.
    pub fn neighbors(&self, x: Vertex) -> Result<Vec<(Vertex, f64)>> {
        self.validate(x)?;
        let mut out = Vec::new();
        self.neighbors_into(x, &mut out)?;
        Ok(out)
    }

    /// Like [`neighbors`](Self::neighbors) but reuses a buffer and skips
    /// word validation.
    #[inline]
    pub fn neighbors_into(&self, x: Vertex, out: &mut Vec<(Vertex, f64)>) -> Result<()> {
        out.clear();
        match self {
            StateSpace::Cayley(t) => {
                let a = t.alphabet();
                for l in 0..a.size() {
                    out.push((a.mul_letter(x, l)?, t.letter_prob(x, l)));
                }
            }
            StateSpace::Explicit(e) => {
                let row = e
                    .rows
                    .get(x as usize)
                    .ok_or_else(|| BmcError::MalformedVertex(x.to_string()))?;
                out.extend_from_slice(row);
            }
            StateSpace::Radial { down, .. } => {
                if x == 0 {
                    out.push((1, 1.0));
                } else {
                    out.push((x - 1, *down));
                    out.push((x + 1, 1.0 - *down));
                }
            }
            StateSpace::Singleton => out.push((0, 1.0)),
        }
        Ok(())
    }

    /// One step of the underlying chain.
    pub fn sample_step(&self, x: Vertex, rng: &mut StreamRng) -> Result<Vertex> {
        self.validate(x)?;
        self.step_unchecked(x, rng)
    }

    #[inline]
    pub fn step_unchecked(&self, x: Vertex, rng: &mut StreamRng) -> Result<Vertex> {
        match self {
            StateSpace::Cayley(t) => {
                let l = t.sample_letter(x, rng);
                t.alphabet().mul_letter(x, l)
            }
            StateSpace::Explicit(e) => {
                let row = &e.rows[x as usize];
                let u = rng.uniform();
                let mut acc = 0.0;
                for &(y, p) in row {
                    acc += p;
                    if u < acc {
                        return Ok(y);
                    }
                }
                Ok(row.last().expect("rows are nonempty").0)
            }
            StateSpace::Radial { down, .. } => {
                if x == 0 || !rng.bernoulli(*down) {
                    Ok(x + 1)
                } else {
                    Ok(x - 1)
                }
            }
            StateSpace::Singleton => Ok(0),
        }
    }

    /// Distance from the root (word length on trees).
    #[inline]
    pub fn radius(&self, x: Vertex) -> u64 {
        match self {
            StateSpace::Cayley(t) => t.alphabet().len(x) as u64,
            StateSpace::Explicit(_) => self.distance(self.root(), x).unwrap_or(u64::MAX),
            StateSpace::Radial { .. } => x,
            StateSpace::Singleton => 0,
        }
    }

    /// Graph distance. Word metric on Cayley trees, breadth-first search on
    /// the (undirected) support graph of explicit kernels.
    pub fn distance(&self, x: Vertex, y: Vertex) -> Result<u64> {
        self.validate(x)?;
        self.validate(y)?;
        match self {
            StateSpace::Cayley(t) => {
                let a = t.alphabet();
                let (wx, wy) = (a.unpack(x), a.unpack(y));
                let c = a.common_prefix(&wx, &wy);
                Ok((wx.len() + wy.len() - 2 * c) as u64)
            }
            StateSpace::Explicit(e) => {
                let n = e.len();
                let mut adj = vec![Vec::new(); n];
                for (i, row) in e.rows.iter().enumerate() {
                    for &(j, _) in row {
                        adj[i].push(j as usize);
                        adj[j as usize].push(i);
                    }
                }
                let mut dist = vec![u64::MAX; n];
                dist[x as usize] = 0;
                let mut queue = VecDeque::from([x as usize]);
                while let Some(u) = queue.pop_front() {
                    for &w in &adj[u] {
                        if dist[w] == u64::MAX {
                            dist[w] = dist[u] + 1;
                            queue.push_back(w);
                        }
                    }
                }
                match dist[y as usize] {
                    u64::MAX => Err(BmcError::OutOfRange(format!(
                        "states {} and {} are not connected",
                        self.format_vertex(x),
                        self.format_vertex(y)
                    ))),
                    d => Ok(d),
                }
            }
            StateSpace::Radial { .. } => Ok(x.abs_diff(y)),
            StateSpace::Singleton => Ok(0),
        }
    }

    pub fn format_vertex(&self, x: Vertex) -> String {
        match self {
            StateSpace::Cayley(t) => t.alphabet().format(x),
            StateSpace::Explicit(e) => {
                e.names.get(x as usize).cloned().unwrap_or_else(|| format!("#{x}"))
            }
            StateSpace::Radial { .. } => x.to_string(),
            StateSpace::Singleton => "o".to_string(),
        }
    }

    pub fn parse_vertex(&self, s: &str) -> Result<Vertex> {
        match self {
            StateSpace::Cayley(t) => t.alphabet().parse(s),
            StateSpace::Explicit(e) => e
                .index
                .get(s.trim())
                .copied()
                .ok_or_else(|| BmcError::MalformedVertex(s.to_string())),
            StateSpace::Radial { .. } => match s.trim() {
                "o" | "" => Ok(0),
                t => t.parse().map_err(|_| BmcError::MalformedVertex(s.to_string())),
            },
            StateSpace::Singleton => match s.trim() {
                "" | "o" | "e" | "0" => Ok(0),
                _ => Err(BmcError::MalformedVertex(s.to_string())),
            },
        }
    }

    /// Kernel row as exact fractions, when every entry is a small fraction.
    pub fn rational_row(&self, x: Vertex) -> Result<Option<Vec<(Vertex, Ratio<i64>)>>> {
        let row = self.neighbors(x)?;
        Ok(row
            .into_iter()
            .map(|(y, p)| small_ratio(p).map(|r| (y, r)))
            .collect::<Option<Vec<_>>>())
    }

    /// Ball of radius `radius + buffer` around the root.
    pub fn truncate(&self, radius: usize, buffer: usize, max_vertices: usize) -> Result<TruncatedSpace> {
        if radius == 0 || buffer == 0 {
            return Err(BmcError::OutOfRange("truncation radius and buffer must be at least 1".into()));
        }
        TruncatedSpace::build(self, radius + buffer, max_vertices)
    }
}

/// `p` as `a/b` with `b <= 10^4`, if that division reproduces `p` exactly.
pub fn small_ratio(p: f64) -> Option<Ratio<i64>> {
    (1..=10_000i64).find_map(|den| {
        let num = (p * den as f64).round();
        (num / den as f64 == p).then(|| Ratio::new(num as i64, den))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tree_root_neighbours() {
        let s = StateSpace::simple_tree(3).unwrap();
        let row = s.neighbors(s.root()).unwrap();
        assert_eq!(row.len(), 3);
        assert!(row.iter().all(|&(_, p)| p == 1.0 / 3.0));
    }

    #[test]
    fn free_group_reduction_in_neighbours() {
        let s = StateSpace::free_group(2, StepLaw::Simple).unwrap();
        let a = s.parse_vertex("a").unwrap();
        let mut names: Vec<String> =
            s.neighbors(a).unwrap().iter().map(|&(y, _)| s.format_vertex(y)).collect();
        names.sort();
        assert_eq!(names, vec!["aB", "aa", "ab", "o"]);
    }

    #[test]
    fn explicit_rows_round_trip() {
        let m = vec![vec![0.5, 0.25, 0.25], vec![0.1, 0.0, 0.9], vec![0.0, 1.0, 0.0]];
        let s = StateSpace::explicit(vec!["x".into(), "y".into(), "z".into()], m.clone()).unwrap();
        let StateSpace::Explicit(e) = &s else { unreachable!() };
        assert_eq!(e.matrix(), m);
        let mut rng = StreamRng::new(3, 0);
        for _ in 0..100 {
            assert_eq!(s.sample_step(2, &mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn explicit_rejects_bad_rows() {
        let bad = StateSpace::explicit(vec!["x".into()], vec![vec![0.9]]);
        assert!(matches!(bad, Err(BmcError::InvalidKernel(_))));
    }

    #[test]
    fn step_is_deterministic_and_fair() {
        let s = StateSpace::simple_tree(3).unwrap();
        let first = s.sample_step(1, &mut StreamRng::new(11, 0)).unwrap();
        assert_eq!(first, s.sample_step(1, &mut StreamRng::new(11, 0)).unwrap());
        let mut rng = StreamRng::new(12, 0);
        let mut counts = HashMap::new();
        let n = 100_000;
        for _ in 0..n {
            *counts.entry(s.sample_step(1, &mut rng).unwrap()).or_insert(0u32) += 1;
        }
        let sigma = (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for (_, c) in counts {
            assert!((c as f64 - n as f64 / 3.0).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn distances() {
        let s = StateSpace::free_group(2, StepLaw::Simple).unwrap();
        let ab = s.parse_vertex("ab").unwrap();
        let a = s.parse_vertex("a").unwrap();
        assert_eq!(s.distance(ab, a).unwrap(), 1);
        assert_eq!(s.distance(1, 1).unwrap(), 0);
    }

    #[test]
    fn toward_root_rows_sum_to_one() {
        let s = StateSpace::tree(3, StepLaw::TowardRoot(0.3)).unwrap();
        for w in ["o", "a", "ab", "abc"] {
            let x = s.parse_vertex(w).unwrap();
            let total: f64 = s.neighbors(x).unwrap().iter().map(|p| p.1).sum();
            assert!((total - 1.0).abs() < ROW_SUM_TOL);
        }
    }

    #[test]
    fn rational_rows() {
        let s = StateSpace::simple_tree(3).unwrap();
        let row = s.rational_row(1).unwrap().unwrap();
        assert!(row.iter().all(|(_, r)| *r == Ratio::new(1, 3)));
    }

    fn word(d: u8, max_len: usize) -> impl Strategy<Value = Vec<u8>> {
        proptest::collection::vec(0..d, 0..=max_len)
    }

    proptest! {
        #[test]
        fn triangle_inequality(a in word(3, 12), b in word(3, 12), c in word(3, 12)) {
            let s = StateSpace::simple_tree(3).unwrap();
            let al = Alphabet::Involutions(3);
            let [x, y, z] = [a, b, c].map(|w| al.pack(&al.reduce(&w)).unwrap());
            let dxz = s.distance(x, z).unwrap();
            prop_assert!(dxz <= s.distance(x, y).unwrap() + s.distance(y, z).unwrap());
        }
    }
}
