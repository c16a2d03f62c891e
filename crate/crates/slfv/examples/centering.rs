//! The nonlocal centering equation approaches the reaction-diffusion limit as
//! delta shrinks; prints the sup distance over time for a few deltas.

use slfv::events::SelectionModel;
use slfv::lattice::{FrequencyField, TorusGrid};
use slfv::scaling::ScalingParams;
use slfv::solvers::{solve_centering, solve_limit_pde, SolveOptions};

fn main() -> slfv::Result<()> {
    let grid = TorusGrid::new(1, 800, 10.0)?;
    let f0 = FrequencyField::from_fn(grid, |x| 0.5 + 0.3 * (std::f64::consts::TAU * x[0] / 10.0).cos())?;
    let model = SelectionModel::Genic;
    let base = ScalingParams::brownian(1, 0.01, 0.4, 0.5, 1.0, 1.0)?;
    let limit = solve_limit_pde(&f0, &base, &model, &SolveOptions::new(1.0))?;
    println!("limit: {} steps of {:.2e} ({})", limit.steps, limit.dt, limit.scheme);
    for delta in [0.4, 0.2, 0.1] {
        let p = ScalingParams { delta, ..base };
        let c = solve_centering(&f0, &p, &model, &SolveOptions::new(1.0).with_dt(delta * delta / 20.0))?;
        let mut err = 0.0f64;
        for k in 0..=20 {
            let t = k as f64 / 20.0;
            err = err.max(c.at(t).sup_distance(&limit.at(t))?);
        }
        println!("delta {delta}: sup_t |f_delta - f| = {err:.3e}");
    }
    Ok(())
}
