//! Green function, Martin kernel and spectral radius for the simple walk
//! on `T_d`, against `G(o,o) = (d-1)/(d-2)` and `r = 2 sqrt(d-1) / d`.
//!
//!     cargo run --release --example green_spectral

use bmc::boundary::{spectral_radius, Green};
use bmc::state_space::StateSpace;

fn main() -> bmc::error::Result<()> {
    for d in [3u8, 4, 6] {
        let space = StateSpace::simple_tree(d)?;
        let g = Green::new(&space, 0)?;
        let o = space.root();
        let y = space.parse_vertex("ab")?;
        let d_ = d as f64;
        println!("T_{d}:");
        println!("  G(o,o)  = {:.12}  closed form {:.12}", g.green(o, o)?, (d_ - 1.0) / (d_ - 2.0));
        let gm = g.green_martin(space.parse_vertex("a")?, y, o)?;
        println!("  G(a,ab) = {:.12}  K_o(a,ab) = {:.6}", gm.g, gm.k);
        let s = spectral_radius(&space, 2000, 0.01)?;
        println!(
            "  r(P) in [{:.5}, {:.5}], estimate {:.5}, closed form {:.5}",
            s.lower,
            s.upper,
            s.estimate,
            2.0 * (d_ - 1.0).sqrt() / d_
        );
    }
    Ok(())
}
