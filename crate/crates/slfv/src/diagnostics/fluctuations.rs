use crate::error::{Error, Result};
use crate::events::RescaledView;
use crate::lattice::{pair_fn, BallKernel, FrequencyField, GridFn, TestFunction, TorusGrid};
use crate::scaling::ScalingParams;
use crate::solvers::PdeSolution;

use super::kernels::{k_alpha_constant, RadialSettings};

/// Normalized deviation of the rescaled process from its centering.
#[derive(Clone, Debug)]
pub struct FluctuationField {
    pub grid: TorusGrid,
    pub times: Vec<f64>,
    pub values: Vec<GridFn>,
    pub normalization: f64,
}

impl FluctuationField {
    /// `<Z_t, phi>` at every stored time.
    pub fn pairings(&self, phi: &TestFunction) -> Result<Vec<f64>> {
        self.values.iter().map(|z| pair_fn(z, phi.as_grid_fn())).collect()
    }
}

fn same_grid(a: &TorusGrid, b: &TorusGrid) -> bool {
    a.d() == b.d() && a.n() == b.n() && (a.side() - b.side()).abs() <= 1e-9 * a.side()
}

/// `Z = normalization * (q - f)` at every sample time of `view`.
///
/// Every sample time must coincide with a stored time of `centering`.
pub fn extract_fluctuations(
    view: &RescaledView<'_, FrequencyField>,
    centering: &PdeSolution,
    scaling: &ScalingParams,
) -> Result<FluctuationField> {
    if !same_grid(&view.grid, &centering.grid) {
        return Err(Error::GridMismatch);
    }
    let norm = scaling.fluctuation_scale();
    let t_end = centering.times.last().copied().unwrap_or(0.0);
    let tol = 1e-9 * t_end.max(1.0);
    let mut values = Vec::with_capacity(view.times.len());
    for (t, q) in view.times.iter().zip(view.outputs) {
        let k = centering.times.partition_point(|&s| s < t - tol);
        if k >= centering.times.len() || (centering.times[k] - t).abs() > tol {
            return Err(Error::TimeMismatch(format!("no centering state stored at t = {t}")));
        }
        let f = &centering.fields[k];
        let z = q.values().iter().zip(&f.values).map(|(a, b)| norm * (a - b)).collect();
        values.push(GridFn { grid: centering.grid, values: z });
    }
    Ok(FluctuationField { grid: centering.grid, times: view.times.clone(), values, normalization: norm })
}

/// Spatial structure of the limiting noise in the variance oracle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel {
    /// White noise with intensity `f(1-f)` (halved for diploids).
    Local { diploid: bool },
    /// Ball-smoothed noise at radius `r`, through the `sigma` (or `rho`) kernel;
    /// the exact second moment of one neutral event on the grid.
    Nonlocal { r: f64, diploid: bool },
}

/// `∬ phi phi sigma` (or `rho`) summed via ball sums around each center.
fn nonlocal_pairing(grid: &TorusGrid, k: &BallKernel, phi: &[f64], f: &[f64], diploid: bool) -> f64 {
    let avg = k.average(grid, f);
    let pf: Vec<f64> = phi.iter().zip(f).map(|(a, b)| a * b).collect();
    let sp = k.sum(grid, phi);
    let spf = k.sum(grid, &pf);
    let mut acc = 0.0;
    for c in 0..grid.cells() {
        let (w, a, b) = (avg[c], sp[c] - spf[c], spf[c]);
        acc += if diploid {
            let half = 0.5 * sp[c] - spf[c];
            w * w * a * a + 2.0 * w * (1.0 - w) * half * half + (1.0 - w) * (1.0 - w) * b * b
        } else {
            w * a * a + (1.0 - w) * b * b
        };
    }
    let n = k.count() as f64;
    acc * grid.cell_volume() / (n * n)
}

/// Instantaneous noise pairing `∫ phi^2 f(1-f)` or its nonlocal analogue.
pub fn noise_pairing(phi: &[f64], f: &GridFn, noise: NoiseModel) -> Result<f64> {
    let g = f.grid;
    match noise {
        NoiseModel::Local { diploid } => {
            let s: f64 = phi.iter().zip(&f.values).map(|(p, v)| p * p * v * (1.0 - v)).sum();
            Ok(s * g.cell_volume() * if diploid { 0.5 } else { 1.0 })
        }
        NoiseModel::Nonlocal { r, diploid } => {
            let k = BallKernel::new(&g, r)?;
            Ok(nonlocal_pairing(&g, &k, phi, &f.values, diploid))
        }
    }
}

fn trapezoid(times: &[f64], vals: &[f64]) -> f64 {
    times.windows(2).zip(vals.windows(2)).map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1])).sum()
}

/// Brownian regime: `Var <z_t, phi> = (uV)^2 ∫_0^t ∫ phi(x,s,t)^2 f_s(1-f_s) dx ds`,
/// with `phi(., s, t)` the stored backward solution and `f` the forward one.
/// `uv` is the product `u V_R`.
pub fn spde_variance_oracle(
    backward: &PdeSolution,
    forward: &PdeSolution,
    uv: f64,
    noise: NoiseModel,
) -> Result<f64> {
    if backward.fields.is_empty() {
        return Err(Error::InvalidParameter("backward solution is empty".into()));
    }
    if backward.grid != forward.grid {
        return Err(Error::GridMismatch);
    }
    let kernel = match noise {
        NoiseModel::Nonlocal { r, .. } => Some(BallKernel::new(&forward.grid, r)?),
        NoiseModel::Local { .. } => None,
    };
    let vals = backward
        .times
        .iter()
        .zip(&backward.fields)
        .map(|(&s, phi)| {
            let f = forward.at(s);
            Ok(match (&kernel, noise) {
                (Some(k), NoiseModel::Nonlocal { diploid, .. }) => {
                    nonlocal_pairing(&f.grid, k, &phi.values, &f.values, diploid)
                }
                _ => noise_pairing(&phi.values, &f, noise)?,
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(uv * uv * trapezoid(&backward.times, &vals))
}

/// Stable regime: `u^2 ∫ ∬ phi phi K_alpha ([f]_alpha (1 - f1 - f2) + f1 f2)`
/// over distinct cells closer than `2 r_max`, at up to `time_nodes` times.
///
/// `[f]_alpha` is evaluated with discrete intersections in `d = 1` via prefix
/// sums; other dimensions are rejected as too costly for this oracle.
pub fn spde_variance_oracle_stable(
    backward: &PdeSolution,
    forward: &PdeSolution,
    u: f64,
    alpha: f64,
    radial: RadialSettings,
    time_nodes: usize,
) -> Result<f64> {
    let g = forward.grid;
    if backward.grid != g {
        return Err(Error::GridMismatch);
    }
    if g.d() != 1 {
        return Err(Error::UnsupportedDimension(g.d()));
    }
    crate::scaling::check_alpha(alpha, 1)?;
    let c = k_alpha_constant(1, alpha)?;
    let n = g.n();
    let h = g.h();
    let band = ((2.0 * radial.r_max / h).floor() as usize).min(n / 2);
    let quad = crate::solvers::RadialQuadrature::unchecked(&g, alpha + 1.0, 1.5 * h, radial.r_max, radial.per_decade)?;
    let kernels: Vec<BallKernel> = quad.nodes.iter().map(|&r| BallKernel::new(&g, r)).collect::<Result<_>>()?;
    let stride = (backward.times.len() / time_nodes.max(2)).max(1);
    let mut idx: Vec<usize> = (0..backward.times.len()).step_by(stride).collect();
    if *idx.last().unwrap() != backward.times.len() - 1 {
        idx.push(backward.times.len() - 1);
    }
    let mut times = Vec::new();
    let mut vals = Vec::new();
    for &i in &idx {
        let s = backward.times[i];
        let phi = &backward.fields[i].values;
        let f = forward.at(s).values;
        // prefix sums of ball averages per node: intersection of B(z1,r) and B(z2,r)
        // is the run of centers [z2 - a, z1 + a] for z2 > z1
        let pref: Vec<Vec<f64>> = kernels
            .iter()
            .map(|k| {
                let avg = k.average(&g, &f);
                let mut p = vec![0.0; 3 * n + 1];
                for j in 0..3 * n {
                    p[j + 1] = p[j] + avg[j % n];
                }
                p
            })
            .collect();
        let mut acc = 0.0;
        for z1 in 0..n {
            if phi[z1] == 0.0 {
                continue;
            }
            for off in 1..=band {
                let z2 = (z1 + off) % n;
                let (mut num, mut den) = (0.0, 0.0);
                for ((k, w), p) in kernels.iter().zip(&quad.weights).zip(&pref) {
                    let a = k.reach();
                    if 2 * a < off {
                        continue;
                    }
                    // centers z1 + off - a ..= z1 + a, shifted by n to stay nonnegative
                    let (lo, hi) = (z1 + n + off - a, z1 + n + a);
                    num += w * (p[hi + 1] - p[lo]);
                    den += w * (hi + 1 - lo) as f64;
                }
                if den == 0.0 {
                    continue;
                }
                let fa = num / den;
                let kval = c * (off as f64 * h).powf(-alpha);
                let q = kval * (fa * (1.0 - f[z1] - f[z2]) + f[z1] * f[z2]);
                // both orders of the pair
                acc += 2.0 * phi[z1] * phi[z2] * q;
            }
        }
        times.push(s);
        vals.push(acc * h * h);
    }
    Ok(u * u * trapezoid(&times, &vals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::SelectionModel;
    use crate::solvers::{solve_backward_testfn, solve_limit_pde, Equation, SolveOptions};

    fn setup(w: f64, s: f64) -> (TorusGrid, ScalingParams, PdeSolution) {
        let g = TorusGrid::new(1, 200, 20.0).unwrap();
        let p = ScalingParams::brownian(1, 0.01, 0.2, 0.5, s, 1.0).unwrap();
        let f0 = FrequencyField::constant(g, w).unwrap();
        let fwd = solve_limit_pde(&f0, &p, &SelectionModel::Genic, &SolveOptions::new(1.0)).unwrap();
        (g, p, fwd)
    }

    #[test]
    fn vanishes_at_fixation() {
        for w in [0.0, 1.0] {
            let (g, p, fwd) = setup(w, 1.0);
            let phi = TestFunction::gaussian(g, &[10.0], 1.0);
            let back = solve_backward_testfn(&phi, &fwd, &p, &SelectionModel::Genic, Equation::Limit, &SolveOptions::new(1.0)).unwrap();
            assert_eq!(spde_variance_oracle(&back, &fwd, 1.0, NoiseModel::Local { diploid: false }).unwrap(), 0.0);
        }
    }

    #[test]
    fn neutral_half_matches_heat_semigroup() {
        // F' = 0, f = 1/2: Var = (uV)^2 / 4 ∫_0^t ||G_{t-s} phi||^2 ds with G the heat semigroup
        let (g, p, fwd) = setup(0.5, 0.0);
        let phi = TestFunction::gaussian(g, &[10.0], 1.0);
        let t = 1.0;
        let back = solve_backward_testfn(&phi, &fwd, &p, &SelectionModel::Genic, Equation::Limit, &SolveOptions::new(t)).unwrap();
        let uv = p.u * p.volume;
        let var = spde_variance_oracle(&back, &fwd, uv, NoiseModel::Local { diploid: false }).unwrap();
        // heat flow with D = uV R^2 / (d + 2) keeps phi Gaussian: variance v0 + 2 D tau
        let dcoef = uv * p.diffusion_radius.powi(2) / 3.0;
        let v0 = 1.0;
        let mass = (2.0 * std::f64::consts::PI * v0).sqrt();
        let oracle = quadrature::double_exponential::integrate(
            |s: f64| mass * mass / (2.0 * (std::f64::consts::PI * (v0 + 2.0 * dcoef * (t - s))).sqrt()),
            0.0,
            t,
            1e-12,
        )
        .integral;
        let oracle = uv * uv * 0.25 * oracle;
        assert!((var - oracle).abs() < 2e-3 * oracle, "{var} vs {oracle}");
    }

    #[test]
    fn nonlocal_pairing_on_constants_is_local() {
        let g = TorusGrid::new(1, 400, 20.0).unwrap();
        let w = 0.3;
        let f = GridFn::constant(g, w);
        let phi = GridFn::from_fn(g, |x| (-(x[0] - 10.0).powi(2) / 8.0).exp());
        let loc = noise_pairing(&phi.values, &f, NoiseModel::Local { diploid: false }).unwrap();
        let non = noise_pairing(&phi.values, &f, NoiseModel::Nonlocal { r: 0.5, diploid: false }).unwrap();
        assert!((non - loc).abs() < 0.01 * loc);
        let dip = noise_pairing(&phi.values, &f, NoiseModel::Nonlocal { r: 0.5, diploid: true }).unwrap();
        assert!((dip - non / 2.0).abs() < 1e-12 * non);
    }

    #[test]
    fn extract_requires_matching_times() {
        let (g, p, fwd) = setup(0.5, 0.0);
        let q = FrequencyField::constant(g, 0.5).unwrap();
        let outs = vec![q.clone(), q];
        let view = RescaledView { grid: g, times: vec![0.0, 1.0], outputs: &outs };
        let z = extract_fluctuations(&view, &fwd, &p).unwrap();
        assert!(z.values.iter().all(|v| v.sup_norm() == 0.0));
        let bad = RescaledView { grid: g, times: vec![0.123456], outputs: &outs[..1] };
        assert!(matches!(extract_fluctuations(&bad, &fwd, &p), Err(Error::TimeMismatch(_))));
    }
}
