//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails. Numeric arguments select criteria; the drift-load
//! sweep runs only with `SLFV_SLOW=1`.

use std::time::{Duration, Instant};

use slfv::diagnostics::{
    clt_variance, deterministic_distance, generator_rates, k_alpha, martingale_residual_check, CovarianceKernel,
    MartingaleCheck, NoiseModel, RescaledSetup,
};
use slfv::driftload::{least_squares_slope, measure_drift_load, DriftLoadConfig, EpsilonRule};
use slfv::events::{
    replay_events, run_trajectory, run_trajectory_logged, total_event_rate, EventApplier, EventLaw, EventLogReader, EventLogWriter,
    KindWeights, LogHeader, RadiusLaw, RngStream, SelectionModel, Snapshots, TrajectoryConfig,
};
use slfv::experiment::operator_convergence;
use slfv::lattice::{ball_average, double_ball_average, pair, FrequencyField, GridFn, TestFunction, TorusGrid, XiMetricFamily};
use slfv::scaling::ScalingParams;
use slfv::solvers::{f_of_t, levy_semigroup_apply, op_l_r, solve_centering, solve_limit_pde, RadialOperator, SolveOptions};

const TAU: f64 = 2.0 * std::f64::consts::PI;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> slfv::Result<Verdict> {
    Ok(Verdict { pass, detail })
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn orders(pts: &[(f64, f64)]) -> Vec<f64> {
    pts.windows(2).map(|w| (w[0].1 / w[1].1).ln() / (w[0].0 / w[1].0).ln()).collect()
}

fn cosine_start(grid: TorusGrid) -> Vec<f64> {
    let side = grid.side();
    grid.sample(|x| 0.5 + 0.3 * (TAU * x[0] / side).cos())
}

// Operator consistency of the double-ball average.
fn c1() -> slfv::Result<Verdict> {
    let grid = TorusGrid::new(1, 6400, 20.0)?;
    let t = operator_convergence(&grid, 1.0, &[0.4, 0.2, 0.1, 0.05], 0.5, &[], 5.0)?;
    let o = t.orders("L");
    verdict(o.len() == 3 && o.iter().all(|x| (1.9..=2.1).contains(x)), format!("orders in r {} (want [1.9, 2.1])", fmt_list(&o)))
}

// Truncated fractional operator against the exact one.
fn c2() -> slfv::Result<Verdict> {
    let grid = TorusGrid::new(1, 3200, 40.0)?;
    let t = operator_convergence(&grid, 1.0, &[], 0.5, &[0.8, 0.4, 0.2, 0.1], 10.0)?;
    let o = t.orders("D");
    verdict(o.len() == 3 && o.iter().all(|x| (1.3..=1.7).contains(x)), format!("orders in delta {} (want [1.3, 1.7])", fmt_list(&o)))
}

// Constant-initial genic solution against the logistic closed form.
fn c3() -> slfv::Result<Verdict> {
    let grid = TorusGrid::new(1, 16, 10.0)?;
    let w0 = 0.7;
    let p = ScalingParams::brownian(1, 0.01, 0.1, 0.5, 1.0, 1.0)?;
    let sol = solve_limit_pde(&FrequencyField::constant(grid, w0)?, &p, &SelectionModel::Genic, &SolveOptions::new(5.0).with_dt(1e-4))?;
    let k = p.u * p.volume * p.s;
    let mut err = 0.0f64;
    for (t, f) in sol.times.iter().zip(&sol.fields) {
        let e = (-k * t).exp();
        let exact = w0 * e / (1.0 - w0 + w0 * e);
        err = f.values.iter().fold(err, |m, v| m.max((v - exact).abs()));
    }
    verdict(err <= 1e-4, format!("sup error over t in [0, 5] = {err:.2e} (want <= 1e-4)"))
}

// Centering equation converges to the limit at second order in delta.
fn c4() -> slfv::Result<Verdict> {
    let grid = TorusGrid::new(1, 800, 10.0)?;
    let f0 = FrequencyField::new(grid, cosine_start(grid))?;
    let model = SelectionModel::Genic;
    let t_end = 1.0;
    let base = ScalingParams::brownian(1, 0.01, 0.4, 0.5, 1.0, 1.0)?;
    let limit = solve_limit_pde(&f0, &base, &model, &SolveOptions::new(t_end))?;
    let checks: Vec<f64> = (0..=40).map(|k| k as f64 * t_end / 40.0).collect();
    let mut pts = Vec::new();
    for delta in [0.4, 0.2, 0.1] {
        let p = ScalingParams { delta, ..base };
        // time step proportional to delta^2 keeps the scheme error at the same order
        let c = solve_centering(&f0, &p, &model, &SolveOptions::new(t_end).with_dt(delta * delta / 20.0))?;
        let err = checks.iter().try_fold(0.0f64, |m, &t| Ok::<_, slfv::Error>(m.max(c.at(t).sup_distance(&limit.at(t))?)))?;
        pts.push((delta, err));
    }
    let o = orders(&pts);
    let errs: Vec<f64> = pts.iter().map(|p| p.1).collect();
    verdict(o.iter().all(|x| (1.8..=2.2).contains(x)), format!("sup errors {}, orders {} (want [1.8, 2.2])", sci(&errs), fmt_list(&o)))
}

// One-event expected increment against the generator.
fn c5() -> slfv::Result<Verdict> {
    let grid = TorusGrid::new(1, 170, 20.0)?;
    let q0 = FrequencyField::constant(grid, 0.3)?;
    let phi = TestFunction::gaussian(grid, &[10.0], 1.5);
    let genic = (SelectionModel::Genic, KindWeights::Haploid { s: 0.5 });
    let od = SelectionModel::Overdominance { s1: 0.2, s2: 0.3, nu1: 0.05, nu2: 0.05 };
    let diploid = (od, KindWeights::Diploid { s1: 0.2, s2: 0.3, nu1: 0.05, nu2: 0.05 });
    let radii = [("fixed", RadiusLaw::Fixed(1.0)), ("stable", RadiusLaw::StablePareto { alpha: 0.5, r_max: 4.0 })];
    let reps = 20_000u64;
    let mut pass = true;
    let mut parts = Vec::new();
    for (mname, (model, weights)) in [("genic", genic), ("diploid", diploid)] {
        for (rname, radius) in radii {
            let law = EventLaw::new(0.5, weights, radius, 1)?;
            let rate = total_event_rate(&law, &grid);
            let start = pair(&q0, &phi)?;
            let mut app = EventApplier::new(grid, law, model.clone())?;
            let mut inc = Vec::with_capacity(reps as usize);
            for i in 0..reps {
                let mut rng = RngStream::new(17, i);
                let ev = app.draw(&mut rng, 0.0, rate);
                let mut q = q0.clone();
                app.apply(&mut q, &ev)?;
                inc.push(pair(&q, &phi)? - start);
            }
            let (m, se) = slfv::events::mean_se(&inc);
            let target = generator_rates(&q0, &phi, &law, &model)?.per_event_mean();
            let z = (m - target) / se;
            pass &= z.abs() <= 3.0;
            parts.push(format!("{mname}/{rname} z={z:+.2}"));
        }
    }
    verdict(pass, format!("{} over {reps} events each (want |z| <= 3)", parts.join(", ")))
}

// Short-window variance against the sigma / rho kernels; rho = sigma/2 on constants.
fn c6() -> slfv::Result<Verdict> {
    let grid = TorusGrid::new(1, 85, 10.0)?;
    let phi = TestFunction::gaussian(grid, &[5.0], 1.0);
    let q0 = FrequencyField::new(grid, grid.sample(|x| 0.5 + 0.3 * (TAU * x[0] / 10.0).sin()))?;
    let od = SelectionModel::Overdominance { s1: 0.2, s2: 0.3, nu1: 0.05, nu2: 0.05 };
    let cases = [
        ("haploid/sigma", SelectionModel::Genic, KindWeights::Haploid { s: 0.1 }),
        ("diploid/rho", od, KindWeights::Diploid { s1: 0.02, s2: 0.03, nu1: 0.005, nu2: 0.005 }),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, model, weights) in cases {
        let check = MartingaleCheck {
            q0: q0.clone(),
            law: EventLaw::new(0.3, weights, RadiusLaw::Fixed(1.0), 1)?,
            model,
            phi: phi.clone(),
            window: 0.2,
            replicates: 20_000,
            seed: 23,
            scaling: None,
        };
        let e = martingale_residual_check(&check)?.increment_variance;
        let ok = (e.mean - e.target).abs() <= 3.0 * e.se + 0.05 * e.target.abs();
        pass &= ok;
        parts.push(format!("{name} {:.4e} vs {:.4e} (se {:.1e})", e.mean, e.target, e.se));
    }
    // the identity is algebraic; in floating point it holds to rounding
    let mut dev = 0.0f64;
    for w in [0.0, 0.21, 0.5, 0.83, 1.0] {
        let k = CovarianceKernel::new(&FrequencyField::constant(grid, w)?, 1.0)?;
        for z2 in 0..grid.cells() {
            let (r, s) = (k.rho(40, z2), k.sigma(40, z2));
            if s != 0.0 {
                dev = dev.max((2.0 * r / s - 1.0).abs());
            } else {
                dev = dev.max(r.abs());
            }
        }
    }
    pass &= dev <= 1e-14;
    verdict(pass, format!("{}; max |2 rho / sigma - 1| on constants = {dev:.1e}", parts.join(", ")))
}

fn rescaled(delta: f64, reps: usize, side: f64, seed: u64) -> slfv::Result<RescaledSetup> {
    let raw = TorusGrid::with_spacing(1, side / delta, 1.0 / 8.5)?;
    let p = ScalingParams::brownian(1, delta.powi(4), delta, 0.5, 1.0, 1.0)?;
    let q0 = raw.sample(|x| 0.5 + 0.3 * (TAU * x[0] / raw.side()).cos());
    RescaledSetup::new(p, raw, SelectionModel::Genic, q0, 1.0, reps, seed)
}

// Distance to the deterministic limit shrinks with delta.
fn c7() -> slfv::Result<Verdict> {
    let mut means = Vec::new();
    for delta in [0.2, 0.14, 0.1] {
        let s = rescaled(delta, 10, 10.0, 31)?;
        let fam = XiMetricFamily::with_default_size(s.grid())?;
        let stride = (s.centering(1)?.steps / 50).max(1);
        let d = deterministic_distance(&s, &fam, stride)?;
        means.push(d.iter().sum::<f64>() / d.len() as f64);
    }
    let mono = means.windows(2).all(|w| w[1] < w[0]);
    verdict(mono, format!("mean sup distance at delta 0.2, 0.14, 0.1: {} (want strictly decreasing)", sci(&means)))
}

// Variance of the fluctuation pairing against the SPDE oracle.
fn c8() -> slfv::Result<Verdict> {
    let s = rescaled(0.2, 800, 10.0, 37)?;
    let phi = TestFunction::gaussian(s.grid(), &[5.0], 1.0);
    let noise = NoiseModel::Nonlocal { r: s.scaling.r_n(), diploid: false };
    let r = &clt_variance(&s, &[phi], noise)?[0];
    let ratio = r.variance / r.oracle;
    verdict(
        (0.85..=1.15).contains(&ratio),
        format!("variance {:.4e} +- {:.1e}, oracle {:.4e}, ratio {ratio:.4} (want [0.85, 1.15])", r.variance, r.variance_se, r.oracle),
    )
}

// Drift load scaling; the strict impact exponent is out of reach, see `drift_cfg`.
fn drift_cfg(d: usize, deltas: Vec<f64>, eps: EpsilonRule, replicates: usize) -> DriftLoadConfig {
    let mut cfg = DriftLoadConfig::new(d, deltas);
    cfg.eps = eps;
    cfg.allow_coarse_eps = true;
    cfg.probes = 64;
    cfg.samples = 256;
    cfg.replicates = replicates;
    cfg.seed = 5;
    cfg
}

fn c9() -> slfv::Result<Verdict> {
    let strict = DriftLoadConfig::new(1, vec![0.2, 0.14, 0.1, 0.07]);
    let strict_events: f64 = strict.deltas.iter().map(|&d| strict.expected_events(d)).sum::<slfv::Result<f64>>()?;
    let one = measure_drift_load(&drift_cfg(1, vec![0.2, 0.14, 0.1, 0.07], EpsilonRule { prefactor: 0.05, exponent: 1.0 }, 8))?;
    let two = measure_drift_load(&drift_cfg(2, vec![0.4, 0.28, 0.2, 0.14], EpsilonRule { prefactor: 0.05, exponent: 0.0 }, 4))?;
    let slope = one.slope();
    let spread = two.max_min_normalized();
    let lin1 = least_squares_slope(&one.rows.iter().map(|r| (r.delta.ln(), r.linear_ratio.ln())).collect::<Vec<_>>());
    let lin2: Vec<f64> = two.rows.iter().map(|r| r.linear_ratio / r.c_n).collect();
    let lin2 = lin2.iter().cloned().fold(0.0, f64::max) / lin2.iter().cloned().fold(f64::INFINITY, f64::min);
    verdict(
        (slope + 1.0).abs() <= 0.15 && spread <= 1.5,
        format!(
            "d=1 slope {slope:.3} (linear-noise {lin1:.3}; want -1 +- 0.15), d=2 max/min {spread:.3} (linear-noise {lin2:.3}; want <= 1.5); \
             eps = 0.05 delta (d=1), 0.05 (d=2); eps = delta^5 would need {strict_events:.1e} events in d=1"
        ),
    )
}

// Long-time decay of the compound-Poisson semigroup.
fn c10() -> slfv::Result<Verdict> {
    // h = 1/8.5 keeps the discrete ball's second moment at its continuum value
    let grid = TorusGrid::new(1, 3400, 400.0)?;
    let phi = TestFunction::gaussian(grid, &[200.0], 1.0);
    let t = 100.0;
    let ratio = f_of_t(&phi, t)? * (2.0 * TAU * t).sqrt() / (phi.l1() * phi.l1());
    verdict((0.95..=1.05).contains(&ratio), format!("f(t) sqrt(4 pi t) / |phi|_1^2 = {ratio:.4} at t = 100 (want [0.95, 1.05])"))
}

// Power law of the stable overlap kernel.
fn c11() -> slfv::Result<Verdict> {
    let mut pass = true;
    let mut parts = Vec::new();
    // (d = 1, alpha = 1) lies outside the admissible range alpha < min(2, d)
    for (d, alpha) in [(1usize, 0.5), (2, 0.5), (2, 1.0)] {
        let pts: Vec<(f64, f64)> = (0..=10)
            .map(|k| {
                let s = 0.1 * 10f64.powf(k as f64 / 10.0);
                let mut z2 = vec![0.0; d];
                z2[0] = s;
                k_alpha(&vec![0.0; d], &z2, alpha).map(|v| (s.ln(), v.ln()))
            })
            .collect::<slfv::Result<_>>()?;
        let slope = least_squares_slope(&pts);
        pass &= (slope + alpha).abs() <= 0.02;
        parts.push(format!("d={d} alpha={alpha}: {slope:.4}"));
    }
    verdict(pass, format!("fitted slopes {} (want -alpha +- 0.02)", parts.join(", ")))
}

// Always-on invariants.
fn c12() -> slfv::Result<Verdict> {
    let mut notes = Vec::new();
    // range and jump bound, event by event
    let grid = TorusGrid::new(2, 85, 10.0)?;
    let law = EventLaw::new(0.9, KindWeights::Haploid { s: 0.3 }, RadiusLaw::Fixed(1.0), 2)?;
    let phi = TestFunction::gaussian(grid, &[5.0, 5.0], 1.2);
    let mut app = EventApplier::new(grid, law, SelectionModel::Genic)?;
    let rate = total_event_rate(&law, &grid);
    let mut rng = RngStream::new(41, 0);
    let mut q = FrequencyField::new(grid, grid.sample(|x| 0.5 + 0.4 * (TAU * x[0] / 10.0).sin()))?;
    let (mut t, mut worst_jump, mut in_range) = (0.0, 0.0f64, true);
    for _ in 0..20_000 {
        let ev = app.draw(&mut rng, t, rate);
        let before = pair(&q, &phi)?;
        app.apply(&mut q, &ev)?;
        worst_jump = worst_jump.max((pair(&q, &phi)? - before).abs() / (law.u * phi.l1()));
        let (lo, hi) = q.min_max();
        in_range &= lo >= 0.0 && hi <= 1.0;
        t = ev.t;
    }
    notes.push(format!("values in [0,1]: {in_range}, max jump / (u |phi|_1) = {worst_jump:.3}"));

    // mass conservation of the averaging operators
    let mut mass_err = 0.0f64;
    for g in [TorusGrid::new(1, 340, 40.0)?, TorusGrid::new(2, 136, 16.0)?] {
        let f = GridFn::from_fn(g, |x| (-(x.iter().map(|v| (v - 0.4 * g.side()).powi(2)).sum::<f64>())).exp() + 0.1 * (TAU * x[0] / g.side()).cos());
        let m = f.integral();
        for avg in [ball_average(&f, 1.0)?, double_ball_average(&f, 1.0)?, levy_semigroup_apply(&f, 1.0, 3.0)?] {
            mass_err = mass_err.max((avg.integral() - m).abs());
        }
        mass_err = mass_err.max(op_l_r(&f, 1.0)?.integral().abs());
        let op = RadialOperator::new(&g, 0.5, 10.0 * g.h(), g.side() / 4.0, 64)?;
        let d = GridFn::new(g, op.apply_d(&f.values))?;
        mass_err = mass_err.max(d.integral().abs());
    }
    notes.push(format!("max mass defect {mass_err:.1e}"));

    // bitwise replay
    let g1 = TorusGrid::new(1, 85, 10.0)?;
    let law1 = EventLaw::new(0.4, KindWeights::Haploid { s: 0.2 }, RadiusLaw::StablePareto { alpha: 0.5, r_max: 3.0 }, 1)?;
    let q0 = FrequencyField::new(g1, cosine_start(g1))?;
    let times = vec![10.0, 20.0, 30.0];
    let cfg = TrajectoryConfig::new(30.0, times.clone(), 43, 0);
    let mut w = EventLogWriter::new(Vec::new(), LogHeader { d: 1, config_hash: [7; 32] })?;
    let rec = run_trajectory_logged(q0.clone(), &law1, &SelectionModel::Genic, &cfg, &mut Snapshots, Some(&mut w))?;
    let again = run_trajectory(q0.clone(), &law1, &SelectionModel::Genic, &cfg, &mut Snapshots)?;
    let bytes = w.finish()?;
    let reader = EventLogReader::new(std::io::Cursor::new(bytes))?;
    let (outs, fin, n) = replay_events(q0, &law1, &SelectionModel::Genic, 30.0, &times, reader, &mut Snapshots)?;
    let bits = |f: &FrequencyField| f.values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    let replay_ok = n == rec.events
        && bits(&fin) == bits(&rec.final_field)
        && bits(&again.final_field) == bits(&rec.final_field)
        && outs.iter().zip(&rec.outputs).all(|(a, b)| bits(a) == bits(b));
    notes.push(format!("bitwise replay of {n} events: {replay_ok}"));

    verdict(in_range && worst_jump <= 1.0 && mass_err <= 1e-10 && replay_ok, notes.join(", "))
}

struct Criterion {
    id: usize,
    name: &'static str,
    budget: Duration,
    run: fn() -> slfv::Result<Verdict>,
    slow: bool,
}

fn main() {
    let min = |m: u64| Duration::from_secs(60 * m);
    let criteria = [
        Criterion { id: 1, name: "double-average operator order", budget: Duration::from_secs(10), run: c1, slow: false },
        Criterion { id: 2, name: "fractional operator order", budget: min(1), run: c2, slow: false },
        Criterion { id: 3, name: "logistic closed form", budget: Duration::from_secs(10), run: c3, slow: false },
        Criterion { id: 4, name: "centering convergence", budget: min(1), run: c4, slow: false },
        Criterion { id: 5, name: "one-event drift", budget: min(2), run: c5, slow: false },
        Criterion { id: 6, name: "short-window variance", budget: min(5), run: c6, slow: false },
        Criterion { id: 7, name: "deterministic limit", budget: min(10), run: c7, slow: false },
        Criterion { id: 8, name: "fluctuation variance", budget: min(30), run: c8, slow: false },
        Criterion { id: 9, name: "drift load scaling", budget: min(120), run: c9, slow: true },
        Criterion { id: 10, name: "semigroup decay", budget: min(1), run: c10, slow: false },
        Criterion { id: 11, name: "K_alpha power law", budget: min(1), run: c11, slow: false },
        Criterion { id: 12, name: "hard invariants", budget: min(1), run: c12, slow: false },
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let slow = std::env::var("SLFV_SLOW").is_ok_and(|v| v == "1");
    let mut failed = 0;
    for c in criteria.iter().filter(|c| selected.is_empty() || selected.contains(&c.id)) {
        if c.slow && !slow && !selected.contains(&c.id) {
            println!("criterion {:>2} {:<30} SKIP  slow suite; set SLFV_SLOW=1", c.id, c.name);
            continue;
        }
        let start = Instant::now();
        let res = (c.run)();
        let secs = start.elapsed();
        let (pass, detail) = match res {
            Ok(v) => (v.pass && secs <= c.budget, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {:>2} {:<30} {}  {detail} [{:.1} s of {} s]",
            c.id,
            c.name,
            if pass { "PASS" } else { "FAIL" },
            secs.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
