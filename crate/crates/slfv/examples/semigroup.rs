//! Decay of f(t) = |<G_t phi>_1|_2^2 for the compound-Poisson walk, compared
//! with the heat-kernel rate |phi|_1^2 / sqrt(4 pi t).

use slfv::lattice::{TestFunction, TorusGrid};
use slfv::solvers::f_of_t;

fn main() -> slfv::Result<()> {
    let grid = TorusGrid::new(1, 3400, 400.0)?;
    let phi = TestFunction::gaussian(grid, &[200.0], 1.0);
    for t in [1.0, 10.0, 30.0, 100.0] {
        let f = f_of_t(&phi, t)?;
        let ratio = f * (4.0 * std::f64::consts::PI * t).sqrt() / (phi.l1() * phi.l1());
        println!("t = {t:>5}: f = {f:.4e}, ratio to heat rate {ratio:.4}");
    }
    Ok(())
}
