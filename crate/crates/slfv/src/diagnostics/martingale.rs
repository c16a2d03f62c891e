use crate::error::{Error, Result};
use crate::events::{mean_se, run_ensemble, total_event_rate, EventApplier, EventLaw, RadiusLaw, RngStream, SelectionModel};
use crate::lattice::{pair, FrequencyField, TestFunction};
use crate::scaling::ScalingParams;

use super::generator::{generator_rates, GeneratorRates};
use super::kernels::CovarianceKernel;

pub const MIN_REPLICATES: usize = 100;

/// Ensemble setup for the compensated increment of `<q, phi>` over `[0, window]`.
#[derive(Clone, Debug)]
pub struct MartingaleCheck {
    pub q0: FrequencyField,
    pub law: EventLaw,
    pub model: SelectionModel,
    pub phi: TestFunction,
    pub window: f64,
    pub replicates: usize,
    pub seed: u64,
    pub scaling: Option<ScalingParams>,
}

/// Mean and standard error with the derived z-score against a target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub target: f64,
}

impl Estimate {
    pub fn z(&self) -> f64 {
        let diff = self.mean - self.target;
        if self.se > 0.0 {
            diff / self.se
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        }
    }
}

#[derive(Clone, Debug)]
pub struct MartingaleEstimate {
    pub window: f64,
    pub replicates: usize,
    /// Compensated increment `M = Δ<q,phi> - ∫ drift`; target 0.
    pub drift: Estimate,
    /// `E M^2` against the realized predictable variation `∫ qv rate`.
    pub quadratic: Estimate,
    /// Variance of the raw increment `Δ<q,phi>` against the sigma-kernel
    /// formula evaluated at the initial field times the window.
    pub increment_variance: Estimate,
    /// Formula rates at the initial field.
    pub initial_rates: GeneratorRates,
    pub eta: Option<f64>,
    pub tau: Option<f64>,
}

struct Replicate {
    increment: f64,
    compensator: f64,
    predictable: f64,
}

fn run_one(c: &MartingaleCheck, stream: u64) -> Result<Replicate> {
    let grid = *c.q0.grid();
    let mut app = EventApplier::new(grid, c.law, c.model.clone())?;
    let rate = total_event_rate(&c.law, &grid);
    let mut rng = RngStream::new(c.seed, stream);
    let mut q = c.q0.clone();
    let start = pair(&q, &c.phi)?;
    let (mut comp, mut pred, mut t) = (0.0, 0.0, 0.0);
    loop {
        let ev = app.draw(&mut rng, t, rate);
        let end = ev.t.min(c.window);
        let g = generator_rates(&q, &c.phi, &c.law, &c.model)?;
        comp += g.drift * (end - t);
        pred += g.quadratic * (end - t);
        if ev.t > c.window {
            break;
        }
        app.apply(&mut q, &ev)?;
        t = ev.t;
    }
    Ok(Replicate { increment: pair(&q, &c.phi)? - start, compensator: comp, predictable: pred })
}

/// Empirical moments of the compensated increment against the generator,
/// with the variance also compared to the `sigma` (or `rho`) kernel.
pub fn martingale_residual_check(c: &MartingaleCheck) -> Result<MartingaleEstimate> {
    if c.replicates < MIN_REPLICATES {
        return Err(Error::TooFewReplicates { needed: MIN_REPLICATES, got: c.replicates });
    }
    if !(c.window > 0.0 && c.window.is_finite()) {
        return Err(Error::Horizon(c.window));
    }
    let reps = run_ensemble(c.replicates, |i| run_one(c, i))?;
    let m: Vec<f64> = reps.iter().map(|r| r.increment - r.compensator).collect();
    let (dm, dse) = mean_se(&m);
    let diff: Vec<f64> = reps.iter().zip(&m).map(|(r, mi)| mi * mi - r.predictable).collect();
    let (qd, qse) = mean_se(&diff);
    let pred_mean = reps.iter().map(|r| r.predictable).sum::<f64>() / reps.len() as f64;

    let inc: Vec<f64> = reps.iter().map(|r| r.increment).collect();
    let (im, _) = mean_se(&inc);
    let sq: Vec<f64> = inc.iter().map(|x| (x - im) * (x - im)).collect();
    let (var_mean, var_se) = mean_se(&sq);
    let n = reps.len() as f64;
    let initial_rates = generator_rates(&c.q0, &c.phi, &c.law, &c.model)?;
    let kernel_rate = match c.law.radius {
        RadiusLaw::Fixed(r) => {
            let k = CovarianceKernel::new(&c.q0, r)?;
            c.law.u * c.law.u * k.pair_integral(c.phi.values(), c.model.is_diploid())
        }
        RadiusLaw::StablePareto { .. } => initial_rates.quadratic,
    };
    Ok(MartingaleEstimate {
        window: c.window,
        replicates: c.replicates,
        drift: Estimate { mean: dm, se: dse, target: 0.0 },
        quadratic: Estimate { mean: qd + pred_mean, se: qse, target: pred_mean },
        increment_variance: Estimate { mean: var_mean * n / (n - 1.0), se: var_se, target: kernel_rate * c.window },
        initial_rates,
        eta: c.scaling.map(|s| s.eta()),
        tau: c.scaling.map(|s| s.tau()),
    })
}
