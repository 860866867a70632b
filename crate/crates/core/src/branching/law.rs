//! Branching laws `Pi_x`: offspring count and placement of the children.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand_distr::{Binomial, Distribution};

use super::offspring::OffspringPmf;
use crate::error::{BmcError, Result};
use crate::population::Population;
use crate::rng::StreamRng;
use crate::state_space::{StateSpace, Vertex};

/// Placement draws at or below this many children are made one by one.
const SMALL: u64 = 16;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Mode {
    /// `k ~ pi_x` children, each placed independently by `p_x`.
    Independent,
    /// `k ~ pi_x` children, all placed at one `y ~ p_x`.
    VertexCoupled,
    /// Each branching event is independent with probability `lambda`,
    /// vertex-coupled otherwise.
    Mixture { lambda: f64 },
}

/// Deterministic environment: offspring laws varying over the space.
#[derive(Clone, Debug, Default)]
pub enum Overrides {
    #[default]
    None,
    /// `(from, to, pmf)` on distance-from-root bands, `to` inclusive
    /// (`None` = unbounded). First matching band wins.
    Bands(Vec<(u64, Option<u64>, OffspringPmf)>),
    /// Per-state laws (explicit spaces).
    States(BTreeMap<Vertex, OffspringPmf>),
}

#[derive(Clone, Debug)]
pub struct BranchingLaw {
    space: Arc<StateSpace>,
    mode: Mode,
    base: OffspringPmf,
    overrides: Overrides,
    rho: f64,
}

/// Barycentre, displacement and branching ratio at one state.
#[derive(Clone, Debug, PartialEq)]
pub struct MeanMeasures {
    pub barycentre: Vec<(Vertex, f64)>,
    pub displacement: Vec<(Vertex, f64)>,
    pub rho: f64,
}

impl BranchingLaw {
    /// Build a law. With `declared_rho`, every offspring law in the
    /// environment must have that mean (constant branching ratio).
    pub fn new(
        space: Arc<StateSpace>,
        mode: Mode,
        base: OffspringPmf,
        overrides: Overrides,
        declared_rho: Option<f64>,
    ) -> Result<Self> {
        if let Mode::Mixture { lambda } = mode {
            if !(0.0..=1.0).contains(&lambda) {
                return Err(BmcError::config("branching.lambda", format!("must lie in [0,1], got {lambda}")));
            }
        }
        let rho = declared_rho.unwrap_or_else(|| base.mean());
        let check = |label: String, pmf: &OffspringPmf| {
            let mean = pmf.mean();
            if (mean - rho).abs() > 1e-9 * rho.max(1.0) {
                Err(BmcError::BranchingRatioMismatch { state: label, mean, rho })
            } else {
                Ok(())
            }
        };
        let constant = declared_rho.is_some() || !matches!(overrides, Overrides::None);
        if constant {
            check("base".into(), &base)?;
            match &overrides {
                Overrides::None => {}
                Overrides::Bands(bands) => {
                    for (from, to, pmf) in bands {
                        let label = match to {
                            Some(t) => format!("band {from}..={t}"),
                            None => format!("band {from}.."),
                        };
                        check(label, pmf)?;
                    }
                }
                Overrides::States(map) => {
                    for (&x, pmf) in map {
                        space.validate(x)?;
                        check(space.format_vertex(x), pmf)?;
                    }
                }
            }
        }
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(BmcError::InvalidPmf(format!("branching ratio {rho} must be positive and finite")));
        }
        Ok(BranchingLaw { space, mode, base, overrides, rho })
    }

    pub fn independent(space: Arc<StateSpace>, base: OffspringPmf) -> Result<Self> {
        Self::new(space, Mode::Independent, base, Overrides::None, None)
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn space_arc(&self) -> Arc<StateSpace> {
        Arc::clone(&self.space)
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn base(&self) -> &OffspringPmf {
        &self.base
    }

    /// Common branching ratio.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Every offspring law in use.
    pub fn family(&self) -> Vec<OffspringPmf> {
        let mut out = vec![self.base.clone()];
        match &self.overrides {
            Overrides::None => {}
            Overrides::Bands(b) => out.extend(b.iter().map(|e| e.2.clone())),
            Overrides::States(m) => out.extend(m.values().cloned()),
        }
        out
    }

    /// `pi_x`.
    #[inline]
    pub fn offspring_at(&self, x: Vertex) -> &OffspringPmf {
        match &self.overrides {
            Overrides::None => &self.base,
            Overrides::Bands(bands) => {
                let r = self.space.radius(x);
                bands
                    .iter()
                    .find(|(from, to, _)| r >= *from && to.is_none_or(|t| r <= t))
                    .map(|e| &e.2)
                    .unwrap_or(&self.base)
            }
            Overrides::States(map) => map.get(&x).unwrap_or(&self.base),
        }
    }

    fn defined_at(&self, x: Vertex) -> Result<()> {
        if self.space.is_valid(x) {
            Ok(())
        } else {
            Err(BmcError::UndefinedState(format!("handle {x}")))
        }
    }

    /// Barycentre `sum_m Pi_x(m) m`, displacement = barycentre / rho_x.
    /// Each mode's barycentre is computed from its own placement rule.
    pub fn mean_measures(&self, x: Vertex) -> Result<MeanMeasures> {
        self.defined_at(x)?;
        let row = self.space.neighbors(x)?;
        let rho_x = self.offspring_at(x).mean();
        // Independent: E[#children at y] = E[k] p(y).
        let independent: Vec<f64> = row.iter().map(|&(_, p)| rho_x * p).collect();
        // Coupled: E[k 1{Y = y}] = sum_k pi(k) k p(y).
        let coupled: Vec<f64> = row.iter().map(|&(_, p)| p * rho_x).collect();
        let lambda = match self.mode {
            Mode::Independent => 1.0,
            Mode::VertexCoupled => 0.0,
            Mode::Mixture { lambda } => lambda,
        };
        let barycentre: Vec<(Vertex, f64)> = row
            .iter()
            .zip(independent.iter().zip(&coupled))
            .map(|(&(y, _), (&a, &b))| (y, lambda * a + (1.0 - lambda) * b))
            .collect();
        let mass: f64 = barycentre.iter().map(|e| e.1).sum();
        let displacement = barycentre.iter().map(|&(y, m)| (y, m / mass)).collect();
        Ok(MeanMeasures { barycentre, displacement, rho: rho_x })
    }

    /// One draw from `Pi_x`.
    pub fn sample_branch(&self, x: Vertex, rng: &mut StreamRng) -> Result<Population> {
        self.defined_at(x)?;
        let mut out = Vec::new();
        let mut row = Vec::new();
        self.branch_into(x, 1, rng, &mut out, &mut row)?;
        Population::from_unsorted(&mut out)
    }

    /// Branch `count` particles sitting at `x`, appending `(vertex, count)`
    /// pairs to `out`. Returns the number of children.
    ///
    /// Independent mode draws the total offspring of the site as one sum of
    /// iid draws and places it multinomially, which has the same law as
    /// branching the particles one at a time. The other modes loop over
    /// particles.
    pub fn branch_into(
        &self,
        x: Vertex,
        count: u64,
        rng: &mut StreamRng,
        out: &mut Vec<(Vertex, u64)>,
        row: &mut Vec<(Vertex, f64)>,
    ) -> Result<u64> {
        let pmf = self.offspring_at(x);
        self.space.neighbors_into(x, row)?;
        match self.mode {
            Mode::Independent => {
                let k = pmf.sample_sum(count, rng)?;
                place_multinomial(k, row, rng, out);
                Ok(k)
            }
            Mode::VertexCoupled => {
                let mut total: u64 = 0;
                for _ in 0..count {
                    let k = pmf.sample(rng);
                    out.push((pick(row, rng), k));
                    total = total.checked_add(k).ok_or(BmcError::CountOverflow)?;
                }
                Ok(total)
            }
            Mode::Mixture { lambda } => {
                let mut total: u64 = 0;
                for _ in 0..count {
                    let k = pmf.sample(rng);
                    if rng.bernoulli(lambda) {
                        place_multinomial(k, row, rng, out);
                    } else {
                        out.push((pick(row, rng), k));
                    }
                    total = total.checked_add(k).ok_or(BmcError::CountOverflow)?;
                }
                Ok(total)
            }
        }
    }
}

#[inline]
fn pick(row: &[(Vertex, f64)], rng: &mut StreamRng) -> Vertex {
    if row.len() == 1 {
        return row[0].0;
    }
    let u = rng.uniform();
    let mut acc = 0.0;
    for &(y, p) in row {
        acc += p;
        if u < acc {
            return y;
        }
    }
    row[row.len() - 1].0
}

/// Place `k` children over `row` multinomially.
#[inline]
fn place_multinomial(k: u64, row: &[(Vertex, f64)], rng: &mut StreamRng, out: &mut Vec<(Vertex, u64)>) {
    if k == 0 {
        return;
    }
    if row.len() == 1 {
        out.push((row[0].0, k));
        return;
    }
    if k <= SMALL {
        for _ in 0..k {
            out.push((pick(row, rng), 1));
        }
        return;
    }
    let mut remaining = k;
    let mut mass_left = 1.0;
    for (i, &(y, p)) in row.iter().enumerate() {
        let n = if i + 1 == row.len() {
            remaining
        } else {
            let pr = (p / mass_left).clamp(0.0, 1.0);
            Binomial::new(remaining, pr).expect("valid binomial").sample(rng)
        };
        if n > 0 {
            out.push((y, n));
        }
        remaining -= n;
        mass_left -= p;
        if remaining == 0 {
            break;
        }
    }
}
