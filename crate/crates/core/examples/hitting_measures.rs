//! Hitting distributions on the boundary of a free group with an
//! anisotropic walk: cylinder masses from closed forms, checked against
//! truncation solves, and the harmonic extension of a cylinder indicator.
//!
//!     cargo run --release --example hitting_measures

use bmc::boundary::{anchors_at, Boundary, Cylinder, TestFunction};
use bmc::population::Population;
use bmc::state_space::{StateSpace, StepLaw};

fn main() -> bmc::error::Result<()> {
    // Letters a, A, b, B.
    let space = StateSpace::free_group(2, StepLaw::Weights(vec![0.4, 0.1, 0.3, 0.2]))?;
    let b = Boundary::new(&space)?;
    let a = b.alphabet();

    let table = b.kappa_table(space.root(), 2)?;
    println!("kappa_o on depth-2 cylinders (total {:.12}):", table.total);
    for v in anchors_at(a, 2) {
        let c = Cylinder::new(a, v)?;
        println!("  {:>3}  {:.10}  oracle {:.10}", a.format(v), table.mass(v), b.kappa_oracle(space.root(), c)?);
    }

    let shadow = Cylinder::new(a, space.parse_vertex("a")?)?;
    let phi = TestFunction::indicator(shadow);
    println!("\nP(walk ends through `a`) from various starts:");
    for w in ["", "a", "aa", "aab", "A", "b", "bA"] {
        let x = space.parse_vertex(w)?;
        println!("  {:>4}  {:.6}", space.format_vertex(x), b.harmonic(&phi, x));
    }

    let m = Population::from_counts([(space.parse_vertex("a")?, 2), (space.parse_vertex("B")?, 1)])?;
    let km = b.kappa_population(&m, 1)?;
    println!("\nkappa_m for m = 2 a + B has total mass {:.12}", km.total);
    km.write_csv(a, std::io::stdout())?;
    Ok(())
}
