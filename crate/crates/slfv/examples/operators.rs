//! Convergence of the double-average operator to half the Laplacian and of the
//! truncated fractional operator to the exact one, on a Gaussian bump.

use slfv::experiment::operator_convergence;
use slfv::lattice::TorusGrid;

fn main() -> slfv::Result<()> {
    let grid = TorusGrid::new(1, 3200, 40.0)?;
    let table = operator_convergence(&grid, 1.0, &[0.8, 0.4, 0.2, 0.1], 0.5, &[0.8, 0.4, 0.2, 0.1], 10.0)?;
    print!("{}", table.to_csv());
    println!("L orders {:?}", table.orders("L"));
    println!("D orders {:?} (expect about 2 - alpha = 1.5)", table.orders("D"));
    Ok(())
}
