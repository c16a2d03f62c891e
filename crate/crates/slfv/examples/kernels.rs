//! Covariance kernels of one event: sigma and rho at a fixed radius, the
//! stable-regime kernel sigma^(alpha, delta), and the power law of K_alpha.

use slfv::diagnostics::{k_alpha, k_alpha_constant, sigma_alpha_delta, CovarianceKernel, RadialSettings};
use slfv::lattice::{FrequencyField, TorusGrid};

fn main() -> slfv::Result<()> {
    let grid = TorusGrid::new(1, 340, 40.0)?;
    let q = FrequencyField::from_fn(grid, |x| 0.5 + 0.4 * (x[0] / 3.0).sin())?;
    let k = CovarianceKernel::new(&q, 1.0)?;
    for off in [0usize, 4, 8, 12, 16, 20] {
        println!("offset {off:>2} cells: sigma {:.4e}  rho {:.4e}", k.sigma(100, 100 + off), k.rho(100, 100 + off));
    }
    let s = sigma_alpha_delta(&q, 100, 110, 0.5, 1.0, RadialSettings::new(8.0))?;
    println!("sigma^(0.5, 1) at 10 cells: {s:.4e}");
    for (d, alpha) in [(1usize, 0.5), (2, 0.5), (2, 1.0)] {
        let c = k_alpha_constant(d, alpha)?;
        let mut z = vec![0.0; d];
        z[0] = 0.25;
        let v = k_alpha(&vec![0.0; d], &z, alpha)?;
        println!("d={d} alpha={alpha}: C = {c:.6}, K(0.25) / (C 0.25^-alpha) = {:.12}", v / (c * 0.25f64.powf(-alpha)));
    }
    Ok(())
}
