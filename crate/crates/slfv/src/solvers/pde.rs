use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::events::SelectionModel;
use crate::lattice::{unit_ball_volume, write_snapshot, BallKernel, FrequencyField, GridFn, TestFunction, TorusGrid};
use crate::scaling::{Regime, ScalingParams};

use super::ops::{apply_l, l_prefactor, laplacian, RadialOperator, DEFAULT_NODES_PER_DECADE};

/// Values outside `[-tol, 1 + tol]` abort a forward solve.
pub const RANGE_TOLERANCE: f64 = 1e-6;
/// Fraction of the stability bound used when no step is given.
const SAFETY: f64 = 0.25;

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub t_end: f64,
    /// Fixed step; must not exceed the stability bound. Chosen automatically if `None`.
    pub dt: Option<f64>,
    /// Keep every k-th step (the final state is always kept).
    pub save_every: usize,
    /// Upper radius cutoff for nonlocal operators, in rescaled units. Defaults to `L/4`.
    pub r_max: Option<f64>,
    pub per_decade: usize,
}

impl SolveOptions {
    pub fn new(t_end: f64) -> Self {
        SolveOptions { t_end, dt: None, save_every: 1, r_max: None, per_decade: DEFAULT_NODES_PER_DECADE }
    }
    pub fn with_dt(mut self, dt: f64) -> Self {
        self.dt = Some(dt);
        self
    }
    pub fn save_every(mut self, k: usize) -> Self {
        self.save_every = k.max(1);
        self
    }
}

/// Which deterministic equation to integrate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Equation {
    /// Nonlocal mean dynamics at scale `delta`.
    Centering,
    /// The `delta -> 0` limit.
    Limit,
}

#[derive(Clone, Debug)]
pub struct PdeSolution {
    pub grid: TorusGrid,
    pub times: Vec<f64>,
    pub fields: Vec<GridFn>,
    pub dt: f64,
    pub steps: usize,
    pub scheme: String,
}

impl PdeSolution {
    pub fn last(&self) -> &GridFn {
        self.fields.last().expect("solution holds the initial state")
    }

    /// Linear interpolation in time between stored states.
    pub fn at(&self, t: f64) -> GridFn {
        let k = self.times.partition_point(|&s| s < t);
        if k == 0 {
            return self.fields[0].clone();
        }
        if k >= self.times.len() {
            return self.last().clone();
        }
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 1.0 };
        let (a, b) = (&self.fields[k - 1].values, &self.fields[k].values);
        GridFn { grid: self.grid, values: a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect() }
    }

    /// Write one snapshot per stored time plus `manifest.txt`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut m = String::new();
        let _ = writeln!(m, "scheme={}", self.scheme);
        let _ = writeln!(m, "d={}", self.grid.d());
        let _ = writeln!(m, "n={}", self.grid.n());
        let _ = writeln!(m, "side={:.16e}", self.grid.side());
        let _ = writeln!(m, "dt={:.16e}", self.dt);
        let _ = writeln!(m, "steps={}", self.steps);
        let _ = writeln!(m, "snapshots={}", self.times.len());
        for (k, (t, f)) in self.times.iter().zip(&self.fields).enumerate() {
            let name = format!("field_{k:05}.slfv");
            write_snapshot(&dir.join(&name), f)?;
            let _ = writeln!(m, "t{k}={t:.16e} {name}");
        }
        let path = dir.join("manifest.txt");
        std::fs::write(&path, m).map_err(|e| Error::io(&path, e))
    }
}

/// Right-hand side of one of the four deterministic equations.
enum Drift<'a> {
    Local {
        /// `uV R^2/(d+2)` multiplying the discrete Laplacian.
        diff: f64,
        /// `uV s`.
        react: f64,
        model: &'a SelectionModel,
        h: f64,
        d: usize,
    },
    Averaged {
        kernel: BallKernel,
        /// Coefficient of `<<f>> - f`.
        diff: f64,
        react: f64,
        model: &'a SelectionModel,
    },
    Stable {
        op: RadialOperator,
        u: f64,
        /// `V_1 s / alpha`.
        react: f64,
        model: &'a SelectionModel,
        /// Averaged reaction `F^(delta)` (centering) or pointwise (limit).
        averaged: bool,
    },
}

impl<'a> Drift<'a> {
    fn new(
        grid: &TorusGrid,
        p: &ScalingParams,
        model: &'a SelectionModel,
        eq: Equation,
        opts: &SolveOptions,
    ) -> Result<Self> {
        p.validate()?;
        let d = grid.d();
        if d != p.d {
            return Err(Error::InvalidParameter(format!("grid has d = {d}, parameters have d = {}", p.d)));
        }
        let uv = p.u * p.volume;
        let r2 = p.diffusion_radius * p.diffusion_radius;
        Ok(match (p.regime, eq) {
            (Regime::Brownian, Equation::Limit) => Drift::Local {
                diff: uv * r2 / (d as f64 + 2.0),
                react: uv * p.s,
                model,
                h: grid.h(),
                d,
            },
            (Regime::Brownian, Equation::Centering) => {
                let kernel = BallKernel::new(grid, p.r_n())?;
                kernel.check_resolution()?;
                let diff = uv * 2.0 * r2 / (d as f64 + 2.0) * l_prefactor(&kernel);
                Drift::Averaged { kernel, diff, react: uv * p.s, model }
            }
            (Regime::Stable { alpha }, eq) => {
                let r_max = opts.r_max.unwrap_or(grid.side() / 4.0);
                let (delta, averaged) = match eq {
                    Equation::Centering => (p.delta * p.radius, true),
                    Equation::Limit => (crate::lattice::MIN_RESOLUTION * grid.h(), false),
                };
                let op = RadialOperator::new(grid, alpha, delta, r_max, opts.per_decade)?;
                Drift::Stable { op, u: p.u, react: unit_ball_volume(d)? * p.s / alpha, model, averaged }
            }
        })
    }

    fn lipschitz_f(model: &SelectionModel) -> f64 {
        (0..=100).map(|i| model.f_prime(i as f64 / 100.0).abs()).fold(0.0, f64::max)
    }

    fn dt_max(&self) -> f64 {
        let (lin, react, model) = match self {
            Drift::Local { diff, react, model, h, d } => (*diff * 4.0 * *d as f64 / (h * h) / 2.0, *react, *model),
            Drift::Averaged { diff, react, model, kernel } => {
                (*diff * (kernel.d() as f64 + 2.0), *react, *model)
            }
            Drift::Stable { op, u, react, model, .. } => (u * op.norm_bound(), u * react, *model),
        };
        let lf = Self::lipschitz_f(model) * react;
        SAFETY / (lin + lf).max(1e-300)
    }

    fn rate(&self, grid: &TorusGrid, f: &[f64]) -> Vec<f64> {
        match self {
            Drift::Local { diff, react, model, .. } => {
                let lap = laplacian(&GridFn { grid: *grid, values: f.to_vec() }).values;
                lap.iter().zip(f).map(|(l, v)| diff * l - react * model.f(*v)).collect()
            }
            Drift::Averaged { kernel, diff, react, model } => {
                let avg = kernel.average(grid, f);
                let twice = kernel.average(grid, &avg);
                let sel: Vec<f64> = avg.iter().map(|w| model.f(*w)).collect();
                let sel = kernel.average(grid, &sel);
                (0..f.len()).map(|i| diff * (twice[i] - f[i]) - react * sel[i]).collect()
            }
            Drift::Stable { op, u, react, model, averaged } => {
                let d = op.apply_d(f);
                let sel = if *averaged { op.apply_f(|w| model.f(w), f) } else { f.iter().map(|w| model.f(*w)).collect() };
                d.iter().zip(&sel).map(|(a, b)| u * (a - react * b)).collect()
            }
        }
    }

    /// Linearization at `f` applied to `phi`; self-adjoint for every variant.
    fn linear(&self, grid: &TorusGrid, f: &[f64], phi: &[f64]) -> Vec<f64> {
        match self {
            Drift::Local { diff, react, model, .. } => {
                let lap = laplacian(&GridFn { grid: *grid, values: phi.to_vec() }).values;
                (0..f.len()).map(|i| diff * lap[i] - react * model.f_prime(f[i]) * phi[i]).collect()
            }
            Drift::Averaged { kernel, diff, react, model } => {
                let l = apply_l(kernel, grid, phi);
                let c = l_prefactor(kernel);
                let af = kernel.average(grid, f);
                let ap = kernel.average(grid, phi);
                let inner: Vec<f64> = af.iter().zip(&ap).map(|(a, b)| model.f_prime(*a) * b).collect();
                let sel = kernel.average(grid, &inner);
                (0..f.len()).map(|i| diff / c * l[i] - react * sel[i]).collect()
            }
            Drift::Stable { op, u, react, model, averaged } => {
                let d = op.apply_d(phi);
                let sel = if *averaged {
                    op.apply_df(|w| model.f_prime(w), f, phi)
                } else {
                    f.iter().zip(phi).map(|(w, p)| model.f_prime(*w) * p).collect()
                };
                d.iter().zip(&sel).map(|(a, b)| u * (a - react * b)).collect()
            }
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Drift::Local { .. } => "euler-fd-laplacian",
            Drift::Averaged { .. } => "euler-ball-average",
            Drift::Stable { averaged: true, .. } => "euler-radial-quadrature",
            Drift::Stable { averaged: false, .. } => "euler-radial-quadrature-local-reaction",
        }
    }
}

fn step_plan(drift: &Drift, opts: &SolveOptions) -> Result<(usize, f64)> {
    if !(opts.t_end > 0.0 && opts.t_end.is_finite()) {
        return Err(Error::Horizon(opts.t_end));
    }
    let bound = drift.dt_max();
    let dt = match opts.dt {
        Some(dt) if !(dt > 0.0) => {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
        }
        Some(dt) if dt > bound / SAFETY => {
            return Err(Error::InvalidParameter(format!("time step {dt} exceeds the stability bound {}", bound / SAFETY)));
        }
        Some(dt) => dt,
        None => bound,
    };
    let steps = (opts.t_end / dt).ceil().max(1.0) as usize;
    Ok((steps, opts.t_end / steps as f64))
}

fn forward(
    f0: &FrequencyField,
    p: &ScalingParams,
    model: &SelectionModel,
    eq: Equation,
    opts: &SolveOptions,
) -> Result<PdeSolution> {
    let grid = *f0.grid();
    let drift = Drift::new(&grid, p, model, eq, opts)?;
    let (steps, dt) = step_plan(&drift, opts)?;
    let mut f = f0.values().to_vec();
    let mut times = vec![0.0];
    let mut fields = vec![GridFn { grid, values: f.clone() }];
    for k in 1..=steps {
        let rate = drift.rate(&grid, &f);
        let t = k as f64 * dt;
        for (v, r) in f.iter_mut().zip(&rate) {
            *v += dt * r;
            if !(*v >= -RANGE_TOLERANCE && *v <= 1.0 + RANGE_TOLERANCE) {
                return Err(Error::Instability { t, value: *v });
            }
            *v = v.clamp(0.0, 1.0);
        }
        if k % opts.save_every == 0 || k == steps {
            times.push(t);
            fields.push(GridFn { grid, values: f.clone() });
        }
    }
    Ok(PdeSolution { grid, times, fields, dt, steps, scheme: drift.name().into() })
}

/// Nonlocal centering equation at scale `delta` (either regime).
pub fn solve_centering(
    f0: &FrequencyField,
    p: &ScalingParams,
    model: &SelectionModel,
    opts: &SolveOptions,
) -> Result<PdeSolution> {
    forward(f0, p, model, Equation::Centering, opts)
}

/// Centering equation for the Brownian regime; rejects stable parameters.
pub fn solve_centering_brownian(
    f0: &FrequencyField,
    p: &ScalingParams,
    model: &SelectionModel,
    opts: &SolveOptions,
) -> Result<PdeSolution> {
    if p.regime != Regime::Brownian {
        return Err(Error::Regime("Brownian centering solver called with stable parameters".into()));
    }
    forward(f0, p, model, Equation::Centering, opts)
}

/// Limiting reaction-diffusion (Brownian) or fractional (stable) equation.
pub fn solve_limit_pde(
    f0: &FrequencyField,
    p: &ScalingParams,
    model: &SelectionModel,
    opts: &SolveOptions,
) -> Result<PdeSolution> {
    forward(f0, p, model, Equation::Limit, opts)
}

/// Backward linearized equation with terminal condition `phi` at the final
/// time of `forward`, stepped with the forward time step. Entry `k` of the
/// result is the test function at `forward.times[k]`-aligned step times.
///
/// Each backward step is the transpose of the forward linearized Euler step,
/// so `<z_t, phi_t> = <z_0, phi_0>` holds exactly for linear perturbations.
pub fn solve_backward_testfn(
    phi: &TestFunction,
    fwd: &PdeSolution,
    p: &ScalingParams,
    model: &SelectionModel,
    eq: Equation,
    opts: &SolveOptions,
) -> Result<PdeSolution> {
    let grid = *phi.grid();
    if grid != fwd.grid {
        return Err(Error::GridMismatch);
    }
    let drift = Drift::new(&grid, p, model, eq, opts)?;
    let dt = fwd.dt;
    let steps = fwd.steps;
    let t_end = *fwd.times.last().unwrap();
    let mut v = phi.values().to_vec();
    let mut times = vec![t_end];
    let mut fields = vec![GridFn { grid, values: v.clone() }];
    for k in (0..steps).rev() {
        let t = k as f64 * dt;
        let f = fwd.at(t);
        let lin = drift.linear(&grid, &f.values, &v);
        for (x, l) in v.iter_mut().zip(&lin) {
            *x += dt * l;
            if !x.is_finite() {
                return Err(Error::Instability { t, value: *x });
            }
        }
        if k % opts.save_every == 0 || k == 0 {
            times.push(t);
            fields.push(GridFn { grid, values: v.clone() });
        }
    }
    times.reverse();
    fields.reverse();
    Ok(PdeSolution { grid, times, fields, dt, steps, scheme: format!("{}-backward", drift.name()) })
}

/// One forward linearized Euler step `z + dt A(f) z`, exposed for adjointness checks.
pub fn linearized_step(
    f: &GridFn,
    z: &GridFn,
    dt: f64,
    p: &ScalingParams,
    model: &SelectionModel,
    eq: Equation,
    opts: &SolveOptions,
) -> Result<GridFn> {
    let drift = Drift::new(&f.grid, p, model, eq, opts)?;
    let lin = drift.linear(&f.grid, &f.values, &z.values);
    Ok(GridFn { grid: f.grid, values: z.values.iter().zip(&lin).map(|(a, b)| a + dt * b).collect() })
}
