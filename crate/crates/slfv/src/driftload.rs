//! Drift load of the diploid overdominance model started at its stable
//! equilibrium: how much mean fitness is lost to fluctuations of the local
//! frequency around `lambda`, and how that loss scales with `delta`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::events::{mean_se, run_ensemble, run_trajectory, total_event_rate, EventLaw, KindWeights, RadiusLaw, SelectionModel, TrajectoryConfig};
use crate::lattice::{BallKernel, FrequencyField, TorusGrid};

const BISECTION_TOL: f64 = 1e-12;
const SCAN_POINTS: usize = 4096;

/// Stable interior root of the overdominance selection function.
///
/// Without mutation the cubic factors and the root `s2 / (s1 + s2)` is returned
/// exactly; otherwise the unique up-crossing of `F` is bracketed on a scan and
/// bisected.
pub fn equilibrium_lambda(s1: f64, s2: f64, nu1: f64, nu2: f64) -> Result<f64> {
    let model = SelectionModel::Overdominance { s1, s2, nu1, nu2 };
    model.validate()?;
    if nu1 == 0.0 && nu2 == 0.0 {
        return Ok(s2 / (s1 + s2));
    }
    let f = |w: f64| model.f(w);
    let mut bracket = None;
    let mut prev = (0.0, f(0.0));
    for i in 1..=SCAN_POINTS {
        let w = i as f64 / SCAN_POINTS as f64;
        let fw = f(w);
        if prev.1 < 0.0 && fw >= 0.0 {
            if bracket.is_some() {
                return Err(Error::InvalidParameter("F has more than one stable root in (0, 1)".into()));
            }
            bracket = Some((prev.0, w));
        }
        prev = (w, fw);
    }
    let (mut lo, mut hi) = bracket.ok_or(Error::NoRoot)?;
    while hi - lo > BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda = 0.5 * (lo + hi);
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::NoRoot);
    }
    Ok(lambda)
}

/// Dimension-dependent growth of the normalized drift load.
pub fn c_n_model(d: usize, delta: f64) -> f64 {
    match d {
        1 => 1.0 / delta,
        2 => (delta * delta).ln().abs(),
        _ => 1.0,
    }
}

/// `eps = prefactor * delta^exponent`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpsilonRule {
    pub prefactor: f64,
    pub exponent: f64,
}

impl EpsilonRule {
    pub fn power(exponent: f64) -> Self {
        EpsilonRule { prefactor: 1.0, exponent }
    }
    pub fn eps(&self, delta: f64) -> f64 {
        self.prefactor * delta.powf(self.exponent)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftLoadConfig {
    pub d: usize,
    pub deltas: Vec<f64>,
    pub eps: EpsilonRule,
    /// Accept `eps` rules with exponent `<= 4` (reported as a warning).
    pub allow_coarse_eps: bool,
    pub s1: f64,
    pub s2: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub u: f64,
    pub radius: f64,
    /// Cells per radius; the fixed-radius resolution contract needs at least 8.
    pub cells_per_radius: f64,
    /// Torus side in units of the linear correlation length `R / (delta sqrt(s F'(lambda)))`.
    pub side_factor: f64,
    /// `t_N = horizon_factor / (eps delta^2)` for `d <= 2`, `horizon_factor / eps` for `d = 3`.
    pub horizon_factor: f64,
    pub replicates: usize,
    pub probes: usize,
    /// Samples per replicate, evenly spread over the second half of the horizon.
    pub samples: usize,
    pub seed: u64,
    /// Expected events per trajectory beyond which the run is refused.
    pub max_events: f64,
}

impl DriftLoadConfig {
    /// Defaults for dimension `d`: `eps = delta^5`, `t_N = 10/(eps delta^2)`, 8 probes.
    pub fn new(d: usize, deltas: Vec<f64>) -> Self {
        DriftLoadConfig {
            d,
            deltas,
            eps: EpsilonRule::power(5.0),
            allow_coarse_eps: false,
            s1: 0.45,
            s2: 0.45,
            nu1: 0.01,
            nu2: 0.01,
            u: 0.8,
            radius: 1.0,
            cells_per_radius: 8.5,
            side_factor: 12.0,
            horizon_factor: 10.0,
            replicates: 4,
            probes: 8,
            samples: 64,
            seed: 0,
            max_events: 1e11,
        }
    }

    pub fn lambda(&self) -> Result<f64> {
        equilibrium_lambda(self.s1, self.s2, self.nu1, self.nu2)
    }

    fn model(&self) -> SelectionModel {
        SelectionModel::Overdominance { s1: self.s1, s2: self.s2, nu1: self.nu1, nu2: self.nu2 }
    }

    /// `s F'(lambda)`, the restoring rate per unit of `delta^2`.
    pub fn restoring_rate(&self) -> Result<f64> {
        let l = self.lambda()?;
        Ok((self.s1 + self.s2) * self.model().f_prime(l))
    }

    /// Checks every precondition; returns warnings for tolerated deviations.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        let mut warnings = Vec::new();
        if !(1..=3).contains(&self.d) {
            return Err(Error::UnsupportedDimension(self.d));
        }
        if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0 && *d <= 1.0)) {
            return bad("deltas must be a nonempty list in (0, 1]".into());
        }
        if !(self.eps.prefactor > 0.0 && self.eps.exponent >= 0.0) {
            return bad("eps rule needs a positive prefactor and nonnegative exponent".into());
        }
        if self.eps.exponent <= 4.0 {
            if !self.allow_coarse_eps {
                return bad(format!("eps exponent must exceed 4, got {}", self.eps.exponent));
            }
            warnings.push(format!("eps exponent {} does not vanish faster than delta^4", self.eps.exponent));
        }
        let total = self.s1 + self.s2 + self.nu1 + self.nu2;
        if !(total < 1.0) {
            return bad(format!("s1 + s2 + nu1 + nu2 must be < 1, got {total}"));
        }
        let l = self.lambda()?;
        let fp = self.model().f_prime(l);
        if !(fp > 0.0) {
            return bad(format!("F'(lambda) must be positive, got {fp}"));
        }
        if !(0.0..=1.0).contains(&self.u) {
            return bad(format!("impact u must lie in [0, 1], got {}", self.u));
        }
        if !(self.radius > 0.0 && self.cells_per_radius >= 8.0) {
            return bad("radius must be positive with at least 8 cells per radius".into());
        }
        if !(self.side_factor > 0.0 && self.horizon_factor > 0.0) {
            return bad("side and horizon factors must be positive".into());
        }
        if self.replicates < 2 {
            return Err(Error::TooFewReplicates { needed: 2, got: self.replicates });
        }
        if self.probes == 0 || self.samples < 4 {
            return bad("need at least one probe and four samples".into());
        }
        for &delta in &self.deltas {
            let eps = self.eps.eps(delta);
            if !(eps * self.u <= 1.0) {
                return bad(format!("impact eps u = {} exceeds 1 at delta = {delta}", eps * self.u));
            }
        }
        Ok(warnings)
    }

    /// Raw torus for a given `delta`.
    pub fn grid(&self, delta: f64) -> Result<TorusGrid> {
        let ell = self.radius / (delta * self.restoring_rate()?.sqrt());
        let h = self.radius / self.cells_per_radius;
        let side = (self.side_factor * ell).max(8.0 * self.radius);
        TorusGrid::with_spacing(self.d, side, h)
    }

    pub fn horizon(&self, delta: f64) -> f64 {
        let eps = self.eps.eps(delta);
        match self.d {
            3 => self.horizon_factor / eps,
            _ => self.horizon_factor / (eps * delta * delta),
        }
    }

    /// Event law at `delta`: impact `eps u`, all kind weights scaled by `delta^2`.
    pub fn law(&self, delta: f64) -> EventLaw {
        let k = delta * delta;
        EventLaw {
            u: self.eps.eps(delta) * self.u,
            weights: KindWeights::Diploid { s1: k * self.s1, s2: k * self.s2, nu1: k * self.nu1, nu2: k * self.nu2 },
            radius: RadiusLaw::Fixed(self.radius),
        }
    }

    /// Expected events per trajectory at `delta`.
    pub fn expected_events(&self, delta: f64) -> Result<f64> {
        let g = self.grid(delta)?;
        Ok(total_event_rate(&self.law(delta), &g) * self.horizon(delta))
    }
}

/// Probe cells: a diagonal Latin pattern, `probes` distinct positions per axis.
fn probe_cells(grid: &TorusGrid, probes: usize) -> Vec<usize> {
    let n = grid.n();
    let mult = (1..).map(|m| m + (probes as f64).sqrt() as usize).find(|m| gcd(*m, probes) == 1).unwrap_or(1);
    (0..probes)
        .map(|i| {
            let mut c = [0usize; 3];
            let mut row = i;
            for ck in c.iter_mut().take(grid.d()) {
                *ck = ((2 * row + 1) * n) / (2 * probes);
                row = (row * mult) % probes;
            }
            grid.index(c)
        })
        .collect()
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftLoadRow {
    pub delta: f64,
    pub eps: f64,
    pub s_n: f64,
    pub cells: usize,
    pub horizon: f64,
    pub events: u64,
    /// `s_N E[(<q>(x, R) - lambda)^2]`.
    pub load: f64,
    pub se: f64,
    /// `load / (eps delta^2)`.
    pub ratio: f64,
    pub ratio_se: f64,
    pub c_n: f64,
    /// Estimates over the third and fourth quarter of the horizon.
    pub quarters: [(f64, f64); 2],
    /// Small-noise prediction of `load / (eps delta^2)` for the same grid and law.
    pub linear_ratio: f64,
}

impl DriftLoadRow {
    pub fn normalized(&self) -> f64 {
        self.ratio / self.c_n
    }
    /// Quarters agree within two standard errors of their difference.
    pub fn stationary(&self) -> bool {
        let [(a, sa), (b, sb)] = self.quarters;
        (a - b).abs() <= 2.0 * (sa * sa + sb * sb).sqrt()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DriftLoadResult {
    pub d: usize,
    pub lambda: f64,
    /// `s1^N s2^N / (s1^N + s2^N)` at each delta, the load present even at `lambda`.
    pub segregation_load: Vec<f64>,
    pub rows: Vec<DriftLoadRow>,
    pub warnings: Vec<String>,
}

impl DriftLoadResult {
    /// Least-squares slope of `log ratio` against `log delta`.
    pub fn slope(&self) -> f64 {
        let pts: Vec<(f64, f64)> = self.rows.iter().map(|r| (r.delta.ln(), r.ratio.ln())).collect();
        least_squares_slope(&pts)
    }

    /// Largest over smallest normalized ratio across the sweep.
    pub fn max_min_normalized(&self) -> f64 {
        let v: Vec<f64> = self.rows.iter().map(|r| r.normalized()).collect();
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("N,d,delta,eps,load,se,ratio,c_n,normalized,linear_ratio,stationary\n");
        for (i, r) in self.rows.iter().enumerate() {
            let _ = writeln!(
                s,
                "{i},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                self.d,
                r.delta,
                r.eps,
                r.load,
                r.se,
                r.ratio,
                r.c_n,
                r.normalized(),
                r.linear_ratio,
                r.stationary()
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

pub fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

struct ReplicateLoad {
    all: f64,
    q3: f64,
    q4: f64,
    events: u64,
}

/// Simulate every delta of the sweep from `q0 = lambda` and estimate the drift load.
pub fn measure_drift_load(cfg: &DriftLoadConfig) -> Result<DriftLoadResult> {
    let warnings = cfg.validate()?;
    let lambda = cfg.lambda()?;
    let model = cfg.model();
    let mut rows = Vec::with_capacity(cfg.deltas.len());
    let mut seg = Vec::with_capacity(cfg.deltas.len());
    for (idx, &delta) in cfg.deltas.iter().enumerate() {
        let grid = cfg.grid(delta)?;
        let law = cfg.law(delta);
        let horizon = cfg.horizon(delta);
        let expected = total_event_rate(&law, &grid) * horizon;
        if expected > cfg.max_events {
            return Err(Error::InvalidParameter(format!(
                "horizon not reachable at delta = {delta}: about {expected:.3e} events per trajectory exceeds the budget {:.3e}",
                cfg.max_events
            )));
        }
        let kernel = BallKernel::new(&grid, cfg.radius)?;
        let probes: Vec<Vec<usize>> = probe_cells(&grid, cfg.probes)
            .into_iter()
            .map(|c| kernel.offsets().iter().map(|&o| grid.shift(c, o)).collect())
            .collect();
        let times: Vec<f64> = (0..cfg.samples)
            .map(|k| horizon * (0.5 + 0.5 * (k as f64 + 1.0) / cfg.samples as f64))
            .collect();
        let s_n = delta * delta * (cfg.s1 + cfg.s2);
        let q0 = FrequencyField::constant(grid, lambda)?;
        let reps = run_ensemble(cfg.replicates, |rep| {
            let tc = TrajectoryConfig::new(horizon, times.clone(), cfg.seed, ((idx as u64) << 32) | rep);
            let mut obs = |_t: f64, q: &FrequencyField| {
                let v = q.values();
                let total: f64 = probes
                    .iter()
                    .map(|cells| {
                        // deviations are summed first so that q = lambda gives exactly zero
                        let dev = cells.iter().map(|&c| v[c] - lambda).sum::<f64>() / cells.len() as f64;
                        dev * dev
                    })
                    .sum();
                total / probes.len() as f64
            };
            let rec = run_trajectory(q0.clone(), &law, &model, &tc, &mut obs)?;
            let o = &rec.outputs;
            let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
            let half = o.len() / 2;
            Ok(ReplicateLoad { all: s_n * mean(o), q3: s_n * mean(&o[..half]), q4: s_n * mean(&o[half..]), events: rec.events })
        })?;
        let pick = |f: fn(&ReplicateLoad) -> f64| mean_se(&reps.iter().map(f).collect::<Vec<_>>());
        let (load, se) = pick(|r| r.all);
        let q3 = pick(|r| r.q3);
        let q4 = pick(|r| r.q4);
        let eps = cfg.eps.eps(delta);
        let norm = eps * delta * delta;
        rows.push(DriftLoadRow {
            delta,
            eps,
            s_n,
            cells: grid.cells(),
            horizon,
            events: reps.iter().map(|r| r.events).sum(),
            load,
            se,
            ratio: load / norm,
            ratio_se: se / norm,
            c_n: c_n_model(cfg.d, delta),
            quarters: [q3, q4],
            linear_ratio: linear_noise_ratio(cfg, delta)?,
        });
        let (s1n, s2n) = (delta * delta * cfg.s1, delta * delta * cfg.s2);
        seg.push(s1n * s2n / (s1n + s2n));
    }
    Ok(DriftLoadResult { d: cfg.d, lambda, segregation_load: seg, rows, warnings })
}

/// Small-noise (linearized) stationary prediction of `load / (eps delta^2)`.
///
/// Linearizing the event dynamics at `lambda` gives a diagonal Ornstein-Uhlenbeck
/// system in Fourier space with drift `u V (g' b^2 - 1)` and noise
/// `u^2 h^d c^2 b^2 E[(T - lambda)^2]`, where `b` is the ball-average symbol,
/// `c` the ball cell count and `g(w)` the mean offspring target. The probe
/// variance is then `mean_k b^2 Q / (-2 A)`. Exact up to `O(eps)` corrections.
pub fn linear_noise_ratio(cfg: &DriftLoadConfig, delta: f64) -> Result<f64> {
    let lambda = cfg.lambda()?;
    let grid = cfg.grid(delta)?;
    let law = cfg.law(delta);
    let model = cfg.model();
    let kernel = BallKernel::new(&grid, cfg.radius)?;
    let table = law.weights.table();
    let g = |w: f64| table.iter().map(|&(k, p)| p * model.target_moments(k, w).0).sum::<f64>();
    let step = 1e-5;
    let gp = (g(lambda + step) - g(lambda - step)) / (2.0 * step);
    let noise: f64 = table
        .iter()
        .map(|&(k, p)| {
            let (m1, m2) = model.target_moments(k, lambda);
            p * (m2 - 2.0 * lambda * m1 + lambda * lambda)
        })
        .sum();
    let n = grid.n();
    let d = grid.d();
    let c = kernel.count() as f64;
    let cos_t: Vec<f64> = (0..n).map(|j| (2.0 * std::f64::consts::PI * j as f64 / n as f64).cos()).collect();
    let offs: Vec<[i64; 3]> = kernel.offsets().iter().map(|o| [o[0] as i64, o[1] as i64, o[2] as i64]).collect();
    let modes = grid.cells();
    let nn = n as i64;
    let mut acc = 0.0;
    for m in 0..modes {
        let k = grid.coords(m);
        let mut b = 0.0;
        for o in &offs {
            let mut phase = 0i64;
            for a in 0..d {
                phase += o[a] * k[a] as i64;
            }
            b += cos_t[phase.rem_euclid(nn) as usize];
        }
        b /= c;
        let b2 = b * b;
        // per unit u_N: Q/(-2A) = u_N h^d c^2 b^2 E / (2 V (1 - g' b^2))
        acc += b2 * b2 / (1.0 - gp * b2);
    }
    let hd = grid.cell_volume();
    let v = c * hd;
    let var_per_un = hd * c * c * noise / (2.0 * v) * acc / modes as f64;
    let var = var_per_un * law.u;
    let s_n = delta * delta * (cfg.s1 + cfg.s2);
    Ok(s_n * var / (cfg.eps.eps(delta) * delta * delta))
}
