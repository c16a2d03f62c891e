//! Distance of rescaled trajectories from their centering equation in the
//! Xi metric, for shrinking delta with eps = delta^4.

use slfv::diagnostics::{deterministic_distance, RescaledSetup};
use slfv::events::SelectionModel;
use slfv::lattice::{TorusGrid, XiMetricFamily};
use slfv::scaling::ScalingParams;

fn main() -> slfv::Result<()> {
    for delta in [0.3, 0.2, 0.14] {
        let raw = TorusGrid::with_spacing(1, 10.0 / delta, 1.0 / 8.5)?;
        let p = ScalingParams::brownian(1, delta.powi(4), delta, 0.5, 1.0, 1.0)?;
        let q0 = raw.sample(|x| 0.5 + 0.3 * (std::f64::consts::TAU * x[0] / raw.side()).cos());
        let setup = RescaledSetup::new(p, raw, SelectionModel::Genic, q0, 1.0, 6, 2)?;
        let fam = XiMetricFamily::with_default_size(setup.grid())?;
        let d = deterministic_distance(&setup, &fam, 20)?;
        println!("delta {delta}: mean sup distance {:.4e} over {} replicates", d.iter().sum::<f64>() / d.len() as f64, d.len());
    }
    Ok(())
}
