//! Ensembles of rescaled trajectories compared with their centering equation:
//! the distance to the deterministic limit and the variance of fluctuation
//! pairings against the SPDE oracle.

use crate::error::{Error, Result};
use crate::events::{mean_se, run_ensemble, run_trajectory, EventLaw, KindWeights, RadiusLaw, SelectionModel, Snapshots, TrajectoryConfig};
use crate::lattice::{pair_values, xi_distance_values, FrequencyField, TestFunction, TorusGrid, XiMetricFamily};
use crate::scaling::{Regime, ScalingParams};
use crate::solvers::{solve_backward_testfn, solve_centering, Equation, PdeSolution, SolveOptions};

use super::fluctuations::{spde_variance_oracle, NoiseModel};

/// Event law of the `N`-th process: impact `u_N`, selection weights scaled to `s_N`.
pub fn scaled_law(p: &ScalingParams, model: &SelectionModel, radius: RadiusLaw) -> Result<EventLaw> {
    let weights = match *model {
        SelectionModel::Overdominance { s1, s2, nu1, nu2 } => {
            let k = p.s_n() / (s1 + s2);
            KindWeights::Diploid { s1: k * s1, s2: k * s2, nu1: k * nu1, nu2: k * nu2 }
        }
        _ => KindWeights::Haploid { s: p.s_n() },
    };
    EventLaw::new(p.u_n(), weights, radius, p.d)
}

/// One point of a scaling sweep in the Brownian regime.
#[derive(Clone, Debug)]
pub struct RescaledSetup {
    /// Base parameters; the ball constants of the raw grid are applied on construction.
    pub scaling: ScalingParams,
    pub raw_grid: TorusGrid,
    pub model: SelectionModel,
    /// Initial values, shared by the raw field and the rescaled centering.
    pub q0: Vec<f64>,
    pub t_end: f64,
    pub replicates: usize,
    pub seed: u64,
}

impl RescaledSetup {
    pub fn new(
        scaling: ScalingParams,
        raw_grid: TorusGrid,
        model: SelectionModel,
        q0: Vec<f64>,
        t_end: f64,
        replicates: usize,
        seed: u64,
    ) -> Result<Self> {
        if scaling.regime != Regime::Brownian {
            return Err(Error::Regime("rescaled ensembles use fixed radii".into()));
        }
        if q0.len() != raw_grid.cells() {
            return Err(Error::GridMismatch);
        }
        if replicates < 2 {
            return Err(Error::TooFewReplicates { needed: 2, got: replicates });
        }
        let scaling = scaling.with_grid_constants(&raw_grid)?;
        Ok(RescaledSetup { scaling, raw_grid, model, q0, t_end, replicates, seed })
    }

    pub fn grid(&self) -> TorusGrid {
        self.raw_grid.scaled(self.scaling.delta)
    }

    pub fn law(&self) -> Result<EventLaw> {
        scaled_law(&self.scaling, &self.model, RadiusLaw::Fixed(self.scaling.radius))
    }

    pub fn centering(&self, save_every: usize) -> Result<PdeSolution> {
        let f0 = FrequencyField::new(self.grid(), self.q0.clone())?;
        solve_centering(&f0, &self.scaling, &self.model, &SolveOptions::new(self.t_end).save_every(save_every))
    }

    fn run<O: crate::events::Observer>(&self, rescaled_times: &[f64], stream: u64, obs: &mut O) -> Result<Vec<O::Output>> {
        let p = &self.scaling;
        let horizon = p.raw_time(self.t_end);
        // solver times can overshoot the end by roundoff
        let raw: Vec<f64> = rescaled_times.iter().map(|&t| p.raw_time(t).min(horizon)).collect();
        let cfg = TrajectoryConfig::new(horizon, raw, self.seed, stream);
        let q0 = FrequencyField::new(self.raw_grid, self.q0.clone())?;
        Ok(run_trajectory(q0, &self.law()?, &self.model, &cfg, obs)?.outputs)
    }
}

/// Per-replicate `sup_k d(q_{t_k}, f^N_{t_k})` over the stored centering times
/// (every `stride`-th step).
pub fn deterministic_distance(setup: &RescaledSetup, family: &XiMetricFamily, stride: usize) -> Result<Vec<f64>> {
    let centering = setup.centering(stride)?;
    let times = centering.times.clone();
    let grid = setup.grid();
    run_ensemble(setup.replicates, |rep| {
        let mut k = 0usize;
        let mut obs = |_t: f64, q: &FrequencyField| {
            let d = xi_distance_values(&grid, q.values(), &centering.fields[k].values, family);
            k += 1;
            d
        };
        let out = setup.run(&times, rep, &mut obs)?;
        out.into_iter().try_fold(0.0f64, |m, d| Ok(m.max(d?)))
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CltVariance {
    pub mean: f64,
    pub variance: f64,
    pub variance_se: f64,
    pub oracle: f64,
    /// Ratio minus one.
    pub relative_error: f64,
}

/// `Var <Z_T, phi>` over the ensemble against the SPDE variance oracle for each
/// test function (defined on the rescaled grid).
pub fn clt_variance(setup: &RescaledSetup, phis: &[TestFunction], noise: NoiseModel) -> Result<Vec<CltVariance>> {
    let p = setup.scaling;
    let centering = setup.centering(1)?;
    let times = [setup.t_end];
    let grid = setup.grid();
    if phis.iter().any(|phi| *phi.grid() != grid) {
        return Err(Error::GridMismatch);
    }
    let f_end = centering.last().values.clone();
    let norm = p.fluctuation_scale();
    let pairings = run_ensemble(setup.replicates, |rep| {
        let snaps = setup.run(&times, rep, &mut Snapshots)?;
        let q = snaps.last().ok_or(Error::TimeMismatch("no sample at the final time".into()))?;
        let z: Vec<f64> = q.values().iter().zip(&f_end).map(|(a, b)| norm * (a - b)).collect();
        Ok(phis.iter().map(|phi| pair_values(&grid, &z, phi.values())).collect::<Vec<f64>>())
    })?;
    let uv = p.u * p.volume;
    let opts = SolveOptions::new(setup.t_end);
    phis.iter()
        .enumerate()
        .map(|(j, phi)| {
            let x: Vec<f64> = pairings.iter().map(|v| v[j]).collect();
            let (m, _) = mean_se(&x);
            let sq: Vec<f64> = x.iter().map(|v| (v - m) * (v - m)).collect();
            let n = x.len() as f64;
            let (var, var_se) = mean_se(&sq);
            let backward = solve_backward_testfn(phi, &centering, &p, &setup.model, Equation::Centering, &opts)?;
            let oracle = spde_variance_oracle(&backward, &centering, uv, noise)?;
            let variance = var * n / (n - 1.0);
            Ok(CltVariance { mean: m, variance, variance_se: var_se, oracle, relative_error: variance / oracle - 1.0 })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(delta: f64, reps: usize) -> RescaledSetup {
        let side = 6.0;
        let raw = TorusGrid::with_spacing(1, side / delta, 1.0 / 8.5).unwrap();
        let p = ScalingParams::brownian(1, delta.powi(4), delta, 0.5, 1.0, 1.0).unwrap();
        let q0 = raw.sample(|x| 0.5 + 0.3 * (2.0 * std::f64::consts::PI * x[0] / raw.side()).cos());
        RescaledSetup::new(p, raw, SelectionModel::Genic, q0, 0.2, reps, 9).unwrap()
    }

    #[test]
    fn scaled_law_weights() {
        let p = ScalingParams::brownian(1, 0.01, 0.5, 0.4, 0.9, 1.0).unwrap();
        let m = SelectionModel::Overdominance { s1: 0.45, s2: 0.45, nu1: 0.01, nu2: 0.01 };
        let law = scaled_law(&p, &m, RadiusLaw::Fixed(1.0)).unwrap();
        assert_eq!(law.u, 0.004);
        match law.weights {
            KindWeights::Diploid { s1, nu2, .. } => {
                assert!((s1 - 0.25 * 0.45).abs() < 1e-15 && (nu2 - 0.0025).abs() < 1e-15)
            }
            _ => panic!(),
        }
    }

    #[test]
    fn distance_is_small_and_finite() {
        let s = setup(0.5, 4);
        let fam = XiMetricFamily::new(s.grid(), 16).unwrap();
        let d = deterministic_distance(&s, &fam, 10).unwrap();
        assert_eq!(d.len(), 4);
        assert!(d.iter().all(|x| x.is_finite() && *x >= 0.0 && *x < 0.1), "{d:?}");
    }

    #[test]
    fn clt_requires_matching_grid() {
        let s = setup(0.5, 2);
        let other = TorusGrid::new(1, 10, 1.0).unwrap();
        let phi = TestFunction::gaussian(other, &[0.5], 0.1);
        assert!(matches!(clt_variance(&s, &[phi], NoiseModel::Local { diploid: false }), Err(Error::GridMismatch)));
    }
}
