use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{pair, FrequencyField, TestFunction, TorusGrid};
use crate::scaling::{Regime, ScalingParams};

use super::apply::{EventApplier, ReproductionEvent};
use super::law::{total_event_rate, EventLaw, RadiusLaw, SelectionModel};
use super::log::EventLogWriter;
use super::rng::{RngState, RngStream};

/// Events per trajectory beyond which a configuration is rejected.
pub const MAX_EXPECTED_EVENTS: f64 = 1e13;

/// Callback invoked on the field at each sample time.
pub trait Observer {
    type Output;
    fn observe(&mut self, t: f64, q: &FrequencyField) -> Self::Output;
}

impl<T, F: FnMut(f64, &FrequencyField) -> T> Observer for F {
    type Output = T;
    fn observe(&mut self, t: f64, q: &FrequencyField) -> T {
        self(t, q)
    }
}

/// Stores a copy of the field at every sample time.
#[derive(Clone, Copy, Debug, Default)]
pub struct Snapshots;

impl Observer for Snapshots {
    type Output = FrequencyField;
    fn observe(&mut self, _t: f64, q: &FrequencyField) -> FrequencyField {
        q.clone()
    }
}

/// Records `<q, phi>` for each test function.
#[derive(Clone, Debug)]
pub struct Pairings(pub Vec<TestFunction>);

impl Observer for Pairings {
    type Output = Vec<f64>;
    fn observe(&mut self, _t: f64, q: &FrequencyField) -> Vec<f64> {
        self.0.iter().map(|phi| pair(q, phi).expect("test function on the field grid")).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryConfig {
    pub horizon: f64,
    /// Nondecreasing times in `[0, horizon]`.
    pub sample_times: Vec<f64>,
    pub seed: u64,
    pub stream: u64,
}

impl TrajectoryConfig {
    pub fn new(horizon: f64, sample_times: Vec<f64>, seed: u64, stream: u64) -> Self {
        TrajectoryConfig { horizon, sample_times, seed, stream }
    }

    fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Horizon(self.horizon));
        }
        let mut prev = 0.0;
        for &t in &self.sample_times {
            if !(t >= prev && t <= self.horizon) {
                return Err(Error::InvalidParameter(format!(
                    "sample times must be nondecreasing within [0, {}], got {t}",
                    self.horizon
                )));
            }
            prev = t;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord<O> {
    pub grid: TorusGrid,
    pub law: EventLaw,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub outputs: Vec<O>,
    pub events: u64,
    pub final_field: FrequencyField,
    pub rng_end: RngState,
}

/// Simulate from `q0` up to the horizon, calling `observer` at the sample times.
pub fn run_trajectory<O: Observer>(
    q0: FrequencyField,
    law: &EventLaw,
    model: &SelectionModel,
    cfg: &TrajectoryConfig,
    observer: &mut O,
) -> Result<TrajectoryRecord<O::Output>> {
    run_trajectory_logged(q0, law, model, cfg, observer, None::<&mut EventLogWriter<std::io::Sink>>)
}

/// As [`run_trajectory`], also writing every event to `log`.
pub fn run_trajectory_logged<O: Observer, W: std::io::Write>(
    q0: FrequencyField,
    law: &EventLaw,
    model: &SelectionModel,
    cfg: &TrajectoryConfig,
    observer: &mut O,
    mut log: Option<&mut EventLogWriter<W>>,
) -> Result<TrajectoryRecord<O::Output>> {
    cfg.validate()?;
    let grid = *q0.grid();
    let mut app = EventApplier::new(grid, *law, model.clone())?;
    let rate = total_event_rate(law, &grid);
    if rate * cfg.horizon > MAX_EXPECTED_EVENTS {
        return Err(Error::RateOverflow(rate));
    }
    let mut rng = RngStream::new(cfg.seed, cfg.stream);
    let mut q = q0;
    let mut outputs = Vec::with_capacity(cfg.sample_times.len());
    let mut next_sample = 0;
    let mut events = 0u64;
    let mut t = 0.0;
    loop {
        let ev = app.draw(&mut rng, t, rate);
        while next_sample < cfg.sample_times.len() && cfg.sample_times[next_sample] < ev.t {
            outputs.push(observer.observe(cfg.sample_times[next_sample], &q));
            next_sample += 1;
        }
        if ev.t > cfg.horizon {
            break;
        }
        if let Some(w) = log.as_deref_mut() {
            w.write(&ev)?;
        }
        app.apply(&mut q, &ev)?;
        events += 1;
        t = ev.t;
    }
    Ok(TrajectoryRecord {
        grid,
        law: *law,
        horizon: cfg.horizon,
        times: cfg.sample_times.clone(),
        outputs,
        events,
        final_field: q,
        rng_end: rng.state(),
    })
}

/// Re-apply recorded events (in order) to `q0`, sampling at `sample_times`.
pub fn replay_events<O: Observer, I: IntoIterator<Item = Result<ReproductionEvent>>>(
    q0: FrequencyField,
    law: &EventLaw,
    model: &SelectionModel,
    horizon: f64,
    sample_times: &[f64],
    events: I,
    observer: &mut O,
) -> Result<(Vec<O::Output>, FrequencyField, u64)> {
    let grid = *q0.grid();
    let mut app = EventApplier::new(grid, *law, model.clone())?;
    let mut q = q0;
    let mut outputs = Vec::new();
    let mut next_sample = 0;
    let mut count = 0;
    let mut last_t = 0.0;
    for ev in events {
        let ev = ev?;
        if ev.t < last_t {
            return Err(Error::InvalidParameter(format!("event times decrease at record {count}")));
        }
        while next_sample < sample_times.len() && sample_times[next_sample] < ev.t {
            outputs.push(observer.observe(sample_times[next_sample], &q));
            next_sample += 1;
        }
        app.apply(&mut q, &ev)?;
        last_t = ev.t;
        count += 1;
    }
    while next_sample < sample_times.len() && sample_times[next_sample] <= horizon {
        outputs.push(observer.observe(sample_times[next_sample], &q));
        next_sample += 1;
    }
    Ok((outputs, q, count))
}

/// Run `n` replicates on streams `0..n`, returning results in stream order.
pub fn run_ensemble<T: Send>(n: usize, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..n as u64).into_par_iter().map(&f).collect()
}

/// Sum with a fixed pairwise reduction tree, independent of thread scheduling.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = pairwise_sum(v) / n;
    let dev: Vec<f64> = v.iter().map(|x| (x - m) * (x - m)).collect();
    let var = pairwise_sum(&dev) / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}

/// Rescaled view of a raw trajectory: time `eta t_raw`, space `delta x_raw`.
#[derive(Clone, Debug)]
pub struct RescaledView<'a, O> {
    pub grid: TorusGrid,
    pub times: Vec<f64>,
    pub outputs: &'a [O],
}

pub fn rescale_view<'a, O>(
    record: &'a TrajectoryRecord<O>,
    scaling: &ScalingParams,
) -> Result<RescaledView<'a, O>> {
    match (scaling.regime, record.law.radius) {
        (Regime::Brownian, RadiusLaw::Fixed(_)) => {}
        (Regime::Stable { alpha }, RadiusLaw::StablePareto { alpha: a, .. }) if alpha == a => {}
        (reg, rad) => {
            return Err(Error::Regime(format!("scaling regime {reg:?} does not match radius law {rad:?}")))
        }
    }
    let eta = scaling.eta();
    Ok(RescaledView {
        grid: record.grid.scaled(scaling.delta),
        times: record.times.iter().map(|t| t * eta).collect(),
        outputs: &record.outputs,
    })
}

#[cfg(test)]
mod tests {
    use super::super::law::KindWeights;
    use super::*;

    fn setup(u: f64, s: f64) -> (FrequencyField, EventLaw) {
        let g = TorusGrid::new(1, 170, 20.0).unwrap();
        let q = FrequencyField::from_fn(g, |x| 0.5 + 0.3 * (x[0] * 0.3).sin()).unwrap();
        let law = EventLaw { u, weights: KindWeights::Haploid { s }, radius: RadiusLaw::Fixed(1.0) };
        (q, law)
    }

    #[test]
    fn zero_impact_keeps_field() {
        let (q, law) = setup(0.0, 0.2);
        let cfg = TrajectoryConfig::new(5.0, vec![0.0, 2.5, 5.0], 3, 0);
        let rec = run_trajectory(q.clone(), &law, &SelectionModel::Genic, &cfg, &mut Snapshots).unwrap();
        assert!(rec.events > 0);
        assert!(rec.outputs.iter().all(|f| *f == q));
    }

    #[test]
    fn fixation_is_absorbing() {
        let (q, law) = setup(0.5, 0.3);
        let ones = FrequencyField::constant(*q.grid(), 1.0).unwrap();
        let cfg = TrajectoryConfig::new(10.0, vec![10.0], 1, 0);
        let rec = run_trajectory(ones.clone(), &law, &SelectionModel::Genic, &cfg, &mut Snapshots).unwrap();
        assert_eq!(rec.final_field, ones);
    }

    #[test]
    fn deterministic_and_stream_dependent() {
        let (q, law) = setup(0.3, 0.1);
        let cfg = TrajectoryConfig::new(3.0, vec![1.0, 3.0], 9, 4);
        let a = run_trajectory(q.clone(), &law, &SelectionModel::Genic, &cfg, &mut Snapshots).unwrap();
        let b = run_trajectory(q.clone(), &law, &SelectionModel::Genic, &cfg, &mut Snapshots).unwrap();
        assert_eq!(a.outputs, b.outputs);
        assert_eq!(a.rng_end, b.rng_end);
        let cfg2 = TrajectoryConfig { stream: 5, ..cfg };
        let c = run_trajectory(q, &law, &SelectionModel::Genic, &cfg2, &mut Snapshots).unwrap();
        assert_ne!(a.final_field, c.final_field);
    }

    #[test]
    fn rejects_bad_horizon_and_samples() {
        let (q, law) = setup(0.3, 0.1);
        let cfg = TrajectoryConfig::new(0.0, vec![], 1, 0);
        assert!(matches!(
            run_trajectory(q.clone(), &law, &SelectionModel::Genic, &cfg, &mut Snapshots),
            Err(Error::Horizon(_))
        ));
        let cfg = TrajectoryConfig::new(1.0, vec![0.5, 0.2], 1, 0);
        assert!(run_trajectory(q, &law, &SelectionModel::Genic, &cfg, &mut Snapshots).is_err());
    }

    #[test]
    fn rescaled_times() {
        let (q, law) = setup(0.3, 0.1);
        let cfg = TrajectoryConfig::new(4.0, vec![0.0, 4.0], 1, 0);
        let rec = run_trajectory(q, &law, &SelectionModel::Genic, &cfg, &mut Snapshots).unwrap();
        let p = ScalingParams::brownian(1, 1.0, 0.5, 1.0, 1.0, 1.0).unwrap();
        let v = rescale_view(&rec, &p).unwrap();
        assert_eq!(v.times, vec![0.0, 1.0]);
        assert!((v.grid.side() - 10.0).abs() < 1e-12);
        let st = ScalingParams::stable(1, 1.0, 0.5, 1.0, 1.0, 0.5).unwrap();
        assert!(rescale_view(&rec, &st).is_err());
    }

    #[test]
    fn pairwise_sum_is_order_fixed() {
        let v: Vec<f64> = (0..1000).map(|i| 1.0 / (i as f64 + 1.0)).collect();
        assert_eq!(pairwise_sum(&v).to_bits(), pairwise_sum(&v.clone()).to_bits());
        let (m, se) = mean_se(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((se - (1.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }
}
