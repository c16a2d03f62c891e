//! Measures event throughput of the simulator in one and two dimensions.

use std::time::Instant;

use slfv::events::{run_trajectory, EventLaw, KindWeights, RadiusLaw, SelectionModel, TrajectoryConfig};
use slfv::lattice::{FrequencyField, TorusGrid};

fn main() -> slfv::Result<()> {
    for (d, side, horizon) in [(1usize, 400.0, 20_000.0), (2, 60.0, 100.0)] {
        let grid = TorusGrid::with_spacing(d, side, 1.0 / 8.5)?;
        let q0 = FrequencyField::constant(grid, 0.5)?;
        let weights = KindWeights::Diploid { s1: 0.01, s2: 0.01, nu1: 1e-4, nu2: 1e-4 };
        let law = EventLaw::new(0.01, weights, RadiusLaw::Fixed(1.0), d)?;
        let model = SelectionModel::Overdominance { s1: 1.0, s2: 1.0, nu1: 0.01, nu2: 0.01 };
        let cfg = TrajectoryConfig::new(horizon, vec![horizon], 1, 0);
        let start = Instant::now();
        let rec = run_trajectory(q0, &law, &model, &cfg, &mut |_t: f64, _q: &FrequencyField| ())?;
        let secs = start.elapsed().as_secs_f64();
        println!("d={d}: {} events in {secs:.2} s, {:.3e} events/s", rec.events, rec.events as f64 / secs);
    }
    Ok(())
}
