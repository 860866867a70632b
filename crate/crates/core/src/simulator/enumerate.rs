//! Exhaustive enumeration of one-step laws for finite-support cases.

use std::collections::BTreeMap;

use crate::branching::{BranchingLaw, Mode};
use crate::error::{BmcError, Result};
use crate::population::Population;
use crate::state_space::Vertex;

/// Enumeration refuses laws with more outcomes than this.
pub const MAX_OUTCOMES: usize = 2_000_000;

fn factorial(n: u64) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// All ways to put `k` children on `row.len()` sites, with multinomial
/// probabilities.
fn compositions(k: u64, row: &[(Vertex, f64)], out: &mut Vec<(Population, f64)>) -> Result<()> {
    fn rec(
        k: u64,
        i: usize,
        row: &[(Vertex, f64)],
        counts: &mut Vec<u64>,
        out: &mut Vec<(Vec<u64>, f64)>,
        coef: f64,
    ) {
        if i + 1 == row.len() {
            counts.push(k);
            let mut p = coef / factorial(k);
            for (j, &c) in counts.iter().enumerate() {
                p *= row[j].1.powi(c as i32);
            }
            out.push((counts.clone(), p));
            counts.pop();
            return;
        }
        for c in 0..=k {
            counts.push(c);
            rec(k - c, i + 1, row, counts, out, coef / factorial(c));
            counts.pop();
        }
    }
    let mut raw = Vec::new();
    rec(k, 0, row, &mut Vec::new(), &mut raw, factorial(k));
    for (counts, p) in raw {
        let pop = Population::from_counts(row.iter().zip(&counts).map(|(&(y, _), &c)| (y, c)))?;
        out.push((pop, p));
    }
    Ok(())
}

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn coalesce(outcomes: Vec<(Population, f64)>) -> Vec<(Population, f64)> {
    let mut map: BTreeMap<Population, f64> = BTreeMap::new();
    for (m, p) in outcomes {
        *map.entry(m).or_insert(0.0) += p;
    }
    map.into_iter().collect()
}

/// The law `Pi_x` as a list of `(population, probability)`.
pub fn enumerate_branch(law: &BranchingLaw, x: Vertex) -> Result<Vec<(Population, f64)>> {
    let pmf = law.offspring_at(x);
    let support = pmf
        .finite_support()
        .ok_or_else(|| BmcError::UnboundedSupport(format!("offspring law {}", pmf.describe())))?;
    let row = law.space().neighbors(x)?;
    let sites = row.len() as u64;
    let count: f64 = support.iter().map(|&(k, _)| binomial(k + sites - 1, sites - 1)).sum();
    if count > MAX_OUTCOMES as f64 {
        return Err(BmcError::UnboundedSupport(format!("{count} placements at one state")));
    }
    let lambda = match law.mode() {
        Mode::Independent => 1.0,
        Mode::VertexCoupled => 0.0,
        Mode::Mixture { lambda } => lambda,
    };
    let mut out = Vec::new();
    for &(k, pk) in &support {
        if lambda > 0.0 {
            let mut placements = Vec::new();
            compositions(k, &row, &mut placements)?;
            out.extend(placements.into_iter().map(|(m, p)| (m, lambda * pk * p)));
        }
        if lambda < 1.0 {
            for &(y, py) in &row {
                out.push((Population::with_count(y, k), (1.0 - lambda) * pk * py));
            }
        }
    }
    Ok(coalesce(out))
}

/// The law `Pi_m`: independent branching of every particle of `m`.
pub fn enumerate_step(law: &BranchingLaw, m: &Population) -> Result<Vec<(Population, f64)>> {
    if m.is_empty() {
        return Err(BmcError::EmptyPopulation);
    }
    let mut dist: Vec<(Population, f64)> = vec![(Population::new(), 1.0)];
    for (x, c) in m.iter() {
        let one = enumerate_branch(law, x)?;
        for _ in 0..c {
            if dist.len() * one.len() > MAX_OUTCOMES {
                return Err(BmcError::UnboundedSupport(format!(
                    "more than {MAX_OUTCOMES} outcomes for this population"
                )));
            }
            let mut next = Vec::with_capacity(dist.len() * one.len());
            for (a, pa) in &dist {
                for (b, pb) in &one {
                    next.push((a.merge(b)?, pa * pb));
                }
            }
            dist = coalesce(next);
        }
    }
    Ok(dist)
}

/// `E[<M_1, f> | M_0 = m]` two ways.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepExpectation {
    /// `sum_x m(x) rho_x (Pf)(x)`.
    pub closed_form: f64,
    /// Sum over the enumerated law `Pi_m`, when small enough.
    pub enumerated: Option<f64>,
}

pub fn exact_step_expectation(
    law: &BranchingLaw,
    m: &Population,
    f: impl Fn(Vertex) -> f64,
) -> Result<StepExpectation> {
    let mut closed_form = 0.0;
    for (x, c) in m.iter() {
        let pmf = law.offspring_at(x);
        if pmf.max_support().is_none() {
            return Err(BmcError::UnboundedSupport(format!("offspring law {}", pmf.describe())));
        }
        let pf: f64 = law.space().neighbors(x)?.iter().map(|&(y, p)| p * f(y)).sum();
        closed_form += c as f64 * pmf.mean() * pf;
    }
    let enumerated = match enumerate_step(law, m) {
        Ok(dist) => Some(dist.iter().map(|(mm, p)| p * mm.pair(&f)).sum()),
        Err(BmcError::UnboundedSupport(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(StepExpectation { closed_form, enumerated })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::branching::{OffspringPmf, Overrides};
    use crate::rng::StreamRng;
    use crate::simulator::{step, StepOutcome};
    use crate::state_space::StateSpace;

    fn t3_law(mode: Mode, pmf: OffspringPmf) -> BranchingLaw {
        BranchingLaw::new(Arc::new(StateSpace::simple_tree(3).unwrap()), mode, pmf, Overrides::None, None).unwrap()
    }

    #[test]
    fn branch_law_sums_to_one() {
        let pmf = OffspringPmf::explicit(vec![1, 2, 3], vec![0.2, 0.5, 0.3]).unwrap();
        for mode in [Mode::Independent, Mode::VertexCoupled, Mode::Mixture { lambda: 0.3 }] {
            let dist = enumerate_branch(&t3_law(mode, pmf.clone()), 1).unwrap();
            let total: f64 = dist.iter().map(|e| e.1).sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn simple_expectations() {
        let law = t3_law(Mode::Independent, OffspringPmf::Delta(2));
        let e = exact_step_expectation(&law, &Population::singleton(1), |_| 1.0).unwrap();
        assert_eq!(e.closed_form, 2.0);
        assert!((e.enumerated.unwrap() - 2.0).abs() < 1e-12);
        let f = |x: Vertex| x as f64;
        let one = exact_step_expectation(&law, &Population::singleton(5), f).unwrap();
        let two = exact_step_expectation(&law, &Population::with_count(5, 2), f).unwrap();
        assert!((two.closed_form - 2.0 * one.closed_form).abs() < 1e-12);
        assert!((two.enumerated.unwrap() - two.closed_form).abs() < 1e-12);
        let geo = t3_law(Mode::Independent, OffspringPmf::Geometric(0.5));
        assert!(exact_step_expectation(&geo, &Population::singleton(1), f).is_err());
    }

    #[test]
    fn sampled_step_matches_enumeration() {
        let pmf = OffspringPmf::explicit(vec![1, 2], vec![0.5, 0.5]).unwrap();
        let law = t3_law(Mode::Mixture { lambda: 0.5 }, pmf);
        let dist = enumerate_branch(&law, 1).unwrap();
        let mut freq: BTreeMap<Population, u64> = BTreeMap::new();
        let mut rng = StreamRng::new(17, 0);
        let n = 100_000;
        for _ in 0..n {
            let StepOutcome::Next(m) = step(&Population::singleton(1), &law, &mut rng, 100).unwrap() else {
                panic!()
            };
            *freq.entry(m).or_insert(0) += 1;
        }
        let mut chi2 = 0.0;
        for (m, p) in &dist {
            let e = n as f64 * p;
            let o = freq.remove(m).unwrap_or(0) as f64;
            chi2 += (o - e).powi(2) / e;
        }
        assert!(freq.is_empty(), "sampled outcome outside the enumerated support");
        // 3 + 6 outcomes, 8 dof: 1% critical value 20.09.
        assert_eq!(dist.len(), 9);
        assert!(chi2 < 20.09, "chi2 = {chi2}");
    }
}
