//! Record a trajectory's events to a log and re-apply them bit for bit.

use std::io::Cursor;

use slfv::events::{
    replay_events, run_trajectory_logged, EventLaw, EventLogReader, EventLogWriter, KindWeights, LogHeader, RadiusLaw,
    SelectionModel, Snapshots, TrajectoryConfig,
};
use slfv::lattice::{FrequencyField, TorusGrid};

fn main() -> slfv::Result<()> {
    let grid = TorusGrid::new(2, 85, 10.0)?;
    let q0 = FrequencyField::from_fn(grid, |x| 0.5 + 0.3 * (x[0] - x[1]).sin())?;
    let weights = KindWeights::Diploid { s1: 0.1, s2: 0.1, nu1: 0.01, nu2: 0.01 };
    let law = EventLaw::new(0.3, weights, RadiusLaw::StablePareto { alpha: 0.8, r_max: 3.0 }, 2)?;
    let model = SelectionModel::Overdominance { s1: 0.1, s2: 0.1, nu1: 0.01, nu2: 0.01 };
    let times = vec![0.5, 1.0];
    let cfg = TrajectoryConfig::new(1.0, times.clone(), 7, 0);
    let mut log = EventLogWriter::new(Vec::new(), LogHeader { d: 2, config_hash: [0; 32] })?;
    let rec = run_trajectory_logged(q0.clone(), &law, &model, &cfg, &mut Snapshots, Some(&mut log))?;
    let bytes = log.finish()?;
    println!("{} events, {} bytes of log", rec.events, bytes.len());
    let reader = EventLogReader::new(Cursor::new(bytes))?;
    let (_, fin, n) = replay_events(q0, &law, &model, 1.0, &times, reader, &mut Snapshots)?;
    let same = fin.values().iter().zip(rec.final_field.values()).all(|(a, b)| a.to_bits() == b.to_bits());
    println!("replayed {n} events; final field bitwise identical: {same}");
    Ok(())
}
