//! Finite balls around the root with absorbing fronts, for linear-solve oracles.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};

use super::{StateSpace, Vertex};
use crate::error::{BmcError, Result};

/// Ball of radius `R` around the root. Vertices at distance `< R` are
/// interior and keep their full kernel row; vertices at distance `R` are
/// absorbing fronts.
#[derive(Clone, Debug)]
pub struct TruncatedSpace {
    radius: usize,
    vertices: Vec<Vertex>,
    dist: Vec<usize>,
    index: HashMap<Vertex, usize>,
    rows: Vec<Vec<(usize, f64)>>,
}

impl TruncatedSpace {
    pub(super) fn build(space: &StateSpace, radius: usize, max_vertices: usize) -> Result<Self> {
        let root = space.root();
        let mut vertices = vec![root];
        let mut dist = vec![0usize];
        let mut index = HashMap::from([(root, 0usize)]);
        let mut raw_rows: Vec<Vec<(Vertex, f64)>> = Vec::new();
        let mut queue = VecDeque::from([0usize]);
        let mut buf = Vec::new();
        while let Some(i) = queue.pop_front() {
            if dist[i] >= radius {
                continue;
            }
            space.neighbors_into(vertices[i], &mut buf)?;
            for &(y, _) in &buf {
                if !index.contains_key(&y) {
                    if vertices.len() >= max_vertices {
                        let estimate = estimate_ball(space, radius);
                        return Err(BmcError::TruncationTooLarge {
                            vertices: estimate.max(max_vertices + 1),
                            bound: max_vertices,
                        });
                    }
                    index.insert(y, vertices.len());
                    vertices.push(y);
                    dist.push(dist[i] + 1);
                    queue.push_back(vertices.len() - 1);
                }
            }
            if raw_rows.len() <= i {
                raw_rows.resize(i + 1, Vec::new());
            }
            raw_rows[i] = buf.clone();
        }
        raw_rows.resize(vertices.len(), Vec::new());
        let rows = raw_rows
            .into_iter()
            .map(|r| r.into_iter().map(|(y, p)| (index[&y], p)).collect())
            .collect();
        Ok(TruncatedSpace { radius, vertices, dist, index, rows })
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn index_of(&self, x: Vertex) -> Option<usize> {
        self.index.get(&x).copied()
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.dist[i] < self.radius
    }

    pub fn interior_count(&self) -> usize {
        self.dist.iter().filter(|&&d| d < self.radius).count()
    }

    /// Full transition matrix; front rows are unit rows (absorbing).
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            if self.is_interior(i) {
                for &(j, p) in &self.rows[i] {
                    m[(i, j)] += p;
                }
            } else {
                m[(i, i)] = 1.0;
            }
        }
        m
    }

    /// Shortest-path distance inside the truncation.
    pub fn bfs_distance(&self, x: Vertex, y: Vertex) -> Option<usize> {
        let (s, t) = (self.index_of(x)?, self.index_of(y)?);
        let n = self.len();
        let mut adj = vec![Vec::new(); n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, _) in row {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
        let mut d = vec![usize::MAX; n];
        d[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            if u == t {
                return Some(d[u]);
            }
            for &w in &adj[u] {
                if d[w] == usize::MAX {
                    d[w] = d[u] + 1;
                    queue.push_back(w);
                }
            }
        }
        None
    }

    /// Solve `h = P h + source` on the interior with `h = front(x)` on fronts.
    /// Returns `h` indexed like [`vertices`](Self::vertices).
    pub fn solve(&self, source: impl Fn(Vertex) -> f64, front: impl Fn(Vertex) -> f64) -> Result<Vec<f64>> {
        let interior: Vec<usize> = (0..self.len()).filter(|&i| self.is_interior(i)).collect();
        let mut pos = vec![usize::MAX; self.len()];
        for (k, &i) in interior.iter().enumerate() {
            pos[i] = k;
        }
        let m = interior.len();
        let mut a = DMatrix::<f64>::identity(m, m);
        let mut b = DVector::<f64>::zeros(m);
        for (k, &i) in interior.iter().enumerate() {
            b[k] = source(self.vertices[i]);
            for &(j, p) in &self.rows[i] {
                if self.is_interior(j) {
                    a[(k, pos[j])] -= p;
                } else {
                    b[k] += p * front(self.vertices[j]);
                }
            }
        }
        let sol = a.lu().solve(&b).ok_or(BmcError::NotTransient { return_probability: 1.0 })?;
        Ok((0..self.len())
            .map(|i| if self.is_interior(i) { sol[pos[i]] } else { front(self.vertices[i]) })
            .collect())
    }

    /// Green function of the walk killed at the fronts, column `y`.
    pub fn green_column(&self, y: Vertex) -> Result<Vec<f64>> {
        self.solve(|x| if x == y { 1.0 } else { 0.0 }, |_| 0.0)
    }
}

fn estimate_ball(space: &StateSpace, radius: usize) -> usize {
    let d = space.max_degree().max(2) as f64;
    let total = 1.0 + d * ((d - 1.0).powi(radius as i32) - 1.0) / (d - 2.0).max(1.0);
    total.min(usize::MAX as f64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use crate::state_space::StepLaw;

    #[test]
    fn ball_sizes() {
        let t3 = StateSpace::simple_tree(3).unwrap();
        assert_eq!(t3.truncate(1, 1, 1000).unwrap().len(), 10);
        let f2 = StateSpace::free_group(2, StepLaw::Simple).unwrap();
        assert_eq!(f2.truncate(1, 1, 1000).unwrap().len(), 17);
    }

    #[test]
    fn interior_rows_are_stochastic() {
        let t3 = StateSpace::simple_tree(3).unwrap();
        let tr = t3.truncate(2, 2, 1000).unwrap();
        let m = tr.matrix();
        for i in 0..tr.len() {
            assert!((m.row(i).sum() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn memory_bound() {
        let t3 = StateSpace::simple_tree(3).unwrap();
        assert!(matches!(t3.truncate(10, 10, 1000), Err(BmcError::TruncationTooLarge { .. })));
    }

    #[test]
    fn bfs_matches_word_metric() {
        let t3 = StateSpace::simple_tree(3).unwrap();
        let tr = t3.truncate(3, 3, 10_000).unwrap();
        let mut rng = StreamRng::new(5, 0);
        let walk = |rng: &mut StreamRng| {
            let mut x = 1;
            for _ in 0..rng.below(7) {
                x = t3.sample_step(x, rng).unwrap();
            }
            x
        };
        for _ in 0..100 {
            let (x, y) = (walk(&mut rng), walk(&mut rng));
            assert_eq!(tr.bfs_distance(x, y).unwrap() as u64, t3.distance(x, y).unwrap());
        }
    }

    #[test]
    fn killed_green_is_below_two() {
        let t3 = StateSpace::simple_tree(3).unwrap();
        let tr = t3.truncate(5, 5, 10_000).unwrap();
        let g = tr.green_column(1).unwrap();
        assert!(g[0] < 2.0 && g[0] > 1.99);
    }
}
