//! Fluctuations around the centering equation: ensemble variance of
//! <Z_T, phi> against the SPDE variance with nonlocal noise.

use slfv::diagnostics::{clt_variance, NoiseModel, RescaledSetup};
use slfv::events::SelectionModel;
use slfv::lattice::{TestFunction, TorusGrid};
use slfv::scaling::ScalingParams;

fn main() -> slfv::Result<()> {
    let delta = 0.3;
    let raw = TorusGrid::with_spacing(1, 10.0 / delta, 1.0 / 8.5)?;
    let p = ScalingParams::brownian(1, delta.powi(4), delta, 0.5, 1.0, 1.0)?;
    let q0 = raw.sample(|x| 0.5 + 0.3 * (std::f64::consts::TAU * x[0] / raw.side()).cos());
    let setup = RescaledSetup::new(p, raw, SelectionModel::Genic, q0, 1.0, 200, 3)?;
    let phis = [TestFunction::gaussian(setup.grid(), &[5.0], 1.0), TestFunction::gaussian(setup.grid(), &[2.0], 0.5)];
    let noise = NoiseModel::Nonlocal { r: setup.scaling.r_n(), diploid: false };
    for (i, r) in clt_variance(&setup, &phis, noise)?.iter().enumerate() {
        println!("phi {i}: variance {:.4e} +- {:.1e}, oracle {:.4e}, ratio {:.3}", r.variance, r.variance_se, r.oracle, r.variance / r.oracle);
    }
    Ok(())
}
