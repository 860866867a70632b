//! Closed forms against independent oracles on random inputs.

use std::sync::Arc;

use bmc::boundary::{anchors_at, green_oracle, Boundary, Cylinder, Green, TestFunction};
use bmc::branching::{BranchingLaw, LaplaceToolkit, OffspringPmf};
use bmc::lab::{finite_horizon_green, Experiment};
use bmc::population::Population;
use bmc::simulator::{enumerate_step, exact_step_expectation, run, RunSpec};
use bmc::state_space::{StateSpace, StepLaw};
use proptest::prelude::*;

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n).prop_map(|w| {
        let t: f64 = w.iter().sum();
        w.into_iter().map(|x| x / t).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn kappa_matches_truncation_solves(w in weights(3), word in "[abc]{0,3}", depth in 1usize..3, pick in 0usize..64) {
        let space = StateSpace::tree(3, StepLaw::Weights(w)).unwrap();
        let Ok(x) = space.parse_vertex(&word) else { return Ok(()) };
        let b = Boundary::new(&space).unwrap();
        let anchors = anchors_at(b.alphabet(), depth);
        let c = Cylinder::new(b.alphabet(), anchors[pick % anchors.len()]).unwrap();
        prop_assert!((b.kappa(x, c) - b.kappa_oracle(x, c).unwrap()).abs() < 1e-8);
        prop_assert!(b.stationarity_residual(x, c).unwrap() < 1e-10);
    }

    #[test]
    fn green_matches_oracle_on_free_groups(w in weights(4), x in "[aAbB]{0,2}", y in "[aAbB]{0,2}") {
        let space = StateSpace::free_group(2, StepLaw::Weights(w)).unwrap();
        let (x, y) = (space.parse_vertex(&x).unwrap(), space.parse_vertex(&y).unwrap());
        let g = Green::new(&space, 0).unwrap().green(x, y).unwrap();
        prop_assert!((g - green_oracle(&space, x, y).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn harmonic_extension_interpolates_boundary_data(w in weights(3), coeff in -2.0f64..2.0) {
        prop_assume!(coeff.abs() > 1e-6);
        let space = StateSpace::tree(3, StepLaw::Weights(w)).unwrap();
        let b = Boundary::new(&space).unwrap();
        let a = b.alphabet();
        let c = Cylinder::new(a, space.parse_vertex("b").unwrap()).unwrap();
        let phi = TestFunction::new(vec![(c, coeff)]);
        // Along a ray the distance to the data is a product of first-passage
        // probabilities: strictly decreasing, and at worst about 0.91 per two
        // steps for these weights. A fixed depth need not get within 1%.
        for (ray, target) in [("ba", coeff), ("ca", 0.0)] {
            let gap = |k: usize| (b.harmonic(&phi, space.parse_vertex(&ray.repeat(k)).unwrap()) - target).abs();
            let gaps: Vec<f64> = (1..=10).map(gap).collect();
            prop_assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{ray}: {gaps:?}");
            prop_assert!(gaps[9] < 0.5 * gaps[0], "{ray}: {gaps:?}");
        }
    }

    #[test]
    fn one_step_expectation_commutes(p in weights(3), counts in prop::collection::vec(1u64..3, 1..3)) {
        let space = Arc::new(StateSpace::simple_tree(3).unwrap());
        let law = BranchingLaw::independent(space.clone(), OffspringPmf::explicit(vec![1, 2, 3], p).unwrap()).unwrap();
        let sites = ["", "a", "ab"];
        let m = Population::from_counts(counts.iter().enumerate().map(|(i, &c)| (space.parse_vertex(sites[i]).unwrap(), c))).unwrap();
        let e = exact_step_expectation(&law, &m, |v| 1.0 / v as f64).unwrap();
        prop_assert!((e.closed_form - e.enumerated.unwrap()).abs() < 1e-12);
        let total: f64 = enumerate_step(&law, &m).unwrap().iter().map(|e| e.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn remainder_is_dominated_by_envelope(p in weights(4)) {
        let small = LaplaceToolkit::new(OffspringPmf::explicit(vec![1, 2, 3, 4], p.clone()).unwrap());
        // Moving mass upward gives a dominating law.
        let mut q = p.clone();
        q[3] += q[0];
        q[0] = 0.0;
        let big = LaplaceToolkit::new(OffspringPmf::explicit(vec![1, 2, 3, 4], q).unwrap());
        for k in -12..4 {
            let s = 2f64.powi(k);
            prop_assert!(small.r(s) <= big.r(s) + 1e-15);
        }
    }
}

#[test]
fn population_growth_rate_is_rho() {
    let space = Arc::new(StateSpace::simple_tree(3).unwrap());
    let law = BranchingLaw::independent(space, OffspringPmf::explicit(vec![1, 2, 4], vec![0.5, 0.3, 0.2]).unwrap()).unwrap();
    let rho = law.rho();
    let mut spec = RunSpec::new(Population::singleton(1), 10, 4000, 77);
    spec.threads = Some(1);
    let out = run(&law, &spec).unwrap();
    for n in 0..10 {
        let a: Vec<f64> = out.trajectories.iter().map(|t| t.steps[n].pop_size as f64).collect();
        let b: Vec<f64> = out.trajectories.iter().map(|t| t.steps[n + 1].pop_size as f64).collect();
        // E||M_{n+1}|| - rho E||M_n|| has mean zero per trajectory.
        let d: Vec<f64> = a.iter().zip(&b).map(|(x, y)| y - rho * x).collect();
        let w = bmc::stats::Welford::from_slice(&d);
        assert!(w.mean.abs() < 4.0 * w.se(), "n = {n}: {} vs se {}", w.mean, w.se());
    }
}

#[test]
fn finite_horizon_green_matches_simulation_on_a_finite_chain() {
    let space = Arc::new(
        StateSpace::explicit(
            vec!["u".into(), "v".into(), "w".into()],
            vec![vec![0.2, 0.8, 0.0], vec![0.1, 0.1, 0.8], vec![0.0, 0.5, 0.5]],
        )
        .unwrap(),
    );
    let law = BranchingLaw::independent(space.clone(), OffspringPmf::explicit(vec![1, 2], vec![0.5, 0.5]).unwrap()).unwrap();
    let rho = law.rho();
    let exact = finite_horizon_green(&space, &Population::singleton(0), 0, 8).unwrap().unwrap();
    let mut exp = Experiment::new(law, Population::singleton(0), 8, 20_000, 3);
    exp.threads = Some(1);
    let out = exp.run(vec![0], Vec::new()).unwrap();
    let sums: Vec<f64> = out
        .trajectories
        .iter()
        .map(|t| t.steps.iter().map(|s| s.watched[0] as f64 / rho.powi(s.n as i32)).sum())
        .collect();
    let w = bmc::stats::Welford::from_slice(&sums);
    assert!((w.mean - exact).abs() < 4.0 * w.se(), "{} vs {exact} (se {})", w.mean, w.se());
}
