//! Poisson stream of reproduction events and the exact state updates for the
//! haploid (general mechanism, genic) and diploid overdominance dynamics.
//!
//! An event draws a continuous center, a radius and a kind; it then acts on the
//! discrete ball around the cell containing the center. Parents are uniform
//! cells of that ball and read their type from the cell value.

mod apply;
mod law;
mod log;
mod rng;
mod trajectory;

pub use apply::{apply_neutral_event, uniforms_needed, EventApplier, ReproductionEvent};
pub use law::{
    sample_radius, total_event_rate, EventKind, EventLaw, KindWeights, RadiusLaw, SelectionModel,
    MAX_PARENTS, MAX_UNIFORMS,
};
pub use log::{EventLogReader, EventLogWriter, LogHeader, LOG_MAGIC, LOG_VERSION};
pub use rng::{RngState, RngStream};
pub use trajectory::{
    mean_se, pairwise_sum, replay_events, rescale_view, run_ensemble, run_trajectory,
    run_trajectory_logged, Observer, Pairings, RescaledView, Snapshots, TrajectoryConfig,
    TrajectoryRecord, MAX_EXPECTED_EVENTS,
};
