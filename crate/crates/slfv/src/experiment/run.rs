use std::fmt::Write as _;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use crate::diagnostics::{clt_variance, martingale_residual_check, DiagnosticsReport, MartingaleCheck, NoiseModel, RescaledSetup};
use crate::driftload::measure_drift_load;
use crate::error::{ConfigIssue, Error, Result};
use crate::events::{replay_events, run_trajectory, run_trajectory_logged, EventLogReader, EventLogWriter, LogHeader, Snapshots, TrajectoryConfig};
use crate::lattice::{pair, read_snapshot, write_snapshot, FrequencyField, TestFunction};

use super::config::{hex, ExperimentConfig, ExperimentKind};
use super::manifest::RunManifest;
use super::operators::operator_convergence;
use super::plot::{emit_plot_data, PlotSeries};

/// Environment variable overriding the configured output directory.
pub const OUT_DIR_ENV: &str = "SLFV_OUT_DIR";
pub const CONFIG_FILE: &str = "config.txt";
pub const LOG_FILE: &str = "events.log";
pub const FINAL_FILE: &str = "final.slfv";

pub fn output_dir(cfg: &ExperimentConfig) -> PathBuf {
    std::env::var_os(OUT_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| cfg.out.clone())
}

/// Validate, write the manifest, dispatch to the owning module and finalize.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunManifest> {
    run_experiment_in(cfg, &output_dir(cfg))
}

pub fn run_experiment_in(cfg: &ExperimentConfig, dir: &Path) -> Result<RunManifest> {
    if cfg.kind.is_stochastic() && cfg.seed.is_none() {
        return Err(Error::Config(vec![ConfigIssue {
            key: "seed".into(),
            line: None,
            reason: format!("{} draws random numbers; set seed or pass --seed", cfg.kind),
        }]));
    }
    let seeds = cfg.seed.into_iter().collect();
    let mut m = RunManifest::begin(dir, cfg.kind.name(), cfg.hash_hex(), seeds)?;
    let res = write_text(&mut m, CONFIG_FILE, &cfg.canonical_text()).and_then(|_| match cfg.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(|| dispatch(cfg, &mut m)),
        None => dispatch(cfg, &mut m),
    });
    m.finish(res.as_ref().map(|_| ()))?;
    res.map_err(|e| Error::Experiment { kind: cfg.kind.name().into(), source: Box::new(e) })?;
    Ok(m)
}

fn dispatch(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<()> {
    match cfg.kind {
        ExperimentKind::Trajectory => trajectory(cfg, m),
        ExperimentKind::MartingaleCheck => martingale(cfg, m),
        ExperimentKind::CltFluctuations => clt(cfg, m),
        ExperimentKind::DriftLoad => drift_load(cfg, m),
        ExperimentKind::OperatorTests => operators(cfg, m),
    }
}

fn write_text(m: &mut RunManifest, name: &str, text: &str) -> Result<()> {
    let p = m.artifact(name)?;
    std::fs::write(&p, text).map_err(|e| Error::io(p, e))
}

fn plot(m: &mut RunManifest, file: &str, series: PlotSeries) -> Result<()> {
    let p = m.artifact(file)?;
    for w in emit_plot_data(&series, &p)? {
        m.warn(w);
    }
    Ok(())
}

fn trajectory(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<()> {
    let q0 = cfg.initial_field()?;
    let tc = TrajectoryConfig::new(cfg.horizon, cfg.sample_times.clone(), cfg.seed.unwrap_or(0), 0);
    let rec = if cfg.log {
        let p = m.artifact(LOG_FILE)?;
        let file = std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?;
        let header = LogHeader { d: cfg.grid.d(), config_hash: cfg.hash() };
        let mut w = EventLogWriter::new(BufWriter::new(file), header)?;
        let rec = run_trajectory_logged(q0, &cfg.law, &cfg.model, &tc, &mut Snapshots, Some(&mut w))?;
        w.finish()?;
        rec
    } else {
        run_trajectory(q0, &cfg.law, &cfg.model, &tc, &mut Snapshots)?
    };
    for (k, f) in rec.outputs.iter().enumerate() {
        let p = m.artifact(&format!("field_{k:05}.slfv"))?;
        write_snapshot(&p, &f.as_grid_fn())?;
    }
    let p = m.artifact(FINAL_FILE)?;
    write_snapshot(&p, &rec.final_field.as_grid_fn())?;
    let phis = cfg.test_function_set();
    write_text(m, "pairings.csv", &pairings_csv(cfg, &rec.times, &rec.outputs, &phis)?)?;
    for (j, (name, phi)) in phis.iter().enumerate() {
        let pts = rec.times.iter().zip(&rec.outputs).map(|(&t, q)| Ok((t, pair(q, phi)?))).collect::<Result<Vec<_>>>()?;
        let mut s = PlotSeries::new(&format!("<q_t, {name}>"), "t", "pairing", pts);
        s.units = "raw time; pairing in raw length units".into();
        plot(m, &format!("pairing_{j}.dat"), s)?;
    }
    write_text(m, "summary.txt", &format!("events = {}\nhorizon = {:.16e}\n", rec.events, rec.horizon))
}

fn pairings_csv(cfg: &ExperimentConfig, times: &[f64], fields: &[FrequencyField], phis: &[(String, TestFunction)]) -> Result<String> {
    let mut s = String::from("t");
    if cfg.scaling.is_some() {
        s.push_str(",t_rescaled");
    }
    for (name, _) in phis {
        let _ = write!(s, ",{name}");
    }
    s.push('\n');
    for (&t, q) in times.iter().zip(fields) {
        let _ = write!(s, "{t:.16e}");
        if let Some(p) = cfg.scaling {
            let _ = write!(s, ",{:.16e}", p.rescaled_time(t));
        }
        for (_, phi) in phis {
            let _ = write!(s, ",{:.16e}", pair(q, phi)?);
        }
        s.push('\n');
    }
    Ok(s)
}

fn martingale(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<()> {
    let mut report = DiagnosticsReport::default();
    for (name, phi) in cfg.test_function_set() {
        let check = MartingaleCheck {
            q0: cfg.initial_field()?,
            law: cfg.law,
            model: cfg.model.clone(),
            phi,
            window: cfg.window,
            replicates: cfg.replicates,
            seed: cfg.seed.unwrap_or(0),
            scaling: cfg.scaling,
        };
        let e = martingale_residual_check(&check)?;
        for (stat, est) in [("drift", e.drift), ("quadratic", e.quadratic), ("increment_variance", e.increment_variance)] {
            report.push(stat, &name, cfg.window, est.mean, est.target, est.se);
        }
    }
    write_text(m, "report.csv", &report.to_csv())
}

fn clt(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<()> {
    let p = cfg.scaling.ok_or_else(|| Error::InvalidParameter("clt-fluctuations needs eps and delta".into()))?;
    let q0 = cfg.initial_field()?;
    let setup = RescaledSetup::new(p, cfg.grid, cfg.model.clone(), q0.values().to_vec(), cfg.horizon, cfg.replicates, cfg.seed.unwrap_or(0))?;
    let grid = setup.grid();
    let named: Vec<(String, TestFunction)> = cfg
        .test_functions
        .iter()
        .map(|&(c, w)| (format!("gauss({c}:{w})"), TestFunction::gaussian(grid, &vec![c; grid.d()], w)))
        .collect();
    let phis: Vec<TestFunction> = named.iter().map(|(_, f)| f.clone()).collect();
    let diploid = cfg.model.is_diploid();
    let noise = if cfg.nonlocal_noise {
        NoiseModel::Nonlocal { r: setup.scaling.r_n(), diploid }
    } else {
        NoiseModel::Local { diploid }
    };
    if p.noise_ratio() > p.delta.powi(2 * p.d as i32) {
        m.warn(format!("tau/eta = {:.3e} is not below delta^(2d)", p.noise_ratio()));
    }
    let res = clt_variance(&setup, &phis, noise)?;
    let mut s = String::from("phi,t,mean,variance,variance_se,oracle,relative_error\n");
    for ((name, _), r) in named.iter().zip(&res) {
        let _ = writeln!(
            s,
            "{name},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            cfg.horizon, r.mean, r.variance, r.variance_se, r.oracle, r.relative_error
        );
    }
    write_text(m, "clt.csv", &s)
}

fn drift_load(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<()> {
    let dl = cfg.drift_load.as_ref().ok_or_else(|| Error::InvalidParameter("drift-load settings missing".into()))?;
    let res = measure_drift_load(dl)?;
    for w in &res.warnings {
        m.warn(w.clone());
    }
    for r in res.rows.iter().filter(|r| !r.stationary()) {
        m.warn(format!("delta = {}: third and fourth quarter estimates differ by more than 2 SE", r.delta));
    }
    let p = m.artifact("drift_load.csv")?;
    res.write_csv(&p)?;
    let ratio = res.rows.iter().map(|r| (r.delta, r.ratio)).collect();
    plot(m, "drift_load_ratio.dat", PlotSeries::new("drift load / (eps delta^2)", "delta", "ratio", ratio))?;
    let norm = res.rows.iter().map(|r| (r.delta, r.normalized())).collect();
    plot(m, "drift_load_normalized.dat", PlotSeries::new("drift load / (eps delta^2 c_N)", "delta", "normalized", norm))?;
    let seg: String = res.segregation_load.iter().zip(&dl.deltas).map(|(s, d)| format!("{d:.16e},{s:.16e}\n")).collect();
    write_text(m, "segregation_load.csv", &format!("delta,segregation_load\n{seg}"))
}

fn operators(cfg: &ExperimentConfig, m: &mut RunManifest) -> Result<()> {
    let width = cfg.test_functions.first().map(|t| t.1).unwrap_or(1.0);
    let table = operator_convergence(&cfg.grid, width, &cfg.radii, cfg.alpha, &cfg.deltas, cfg.r_max)?;
    write_text(m, "operators.csv", &table.to_csv())?;
    for op in ["L", "D"] {
        let pts = table.rows.iter().filter(|r| r.operator == op).map(|r| (r.parameter, r.sup_error)).collect();
        plot(m, &format!("operator_{op}.dat"), PlotSeries::new(&format!("sup error of {op}"), "parameter", "sup_error", pts))?;
    }
    Ok(())
}

/// Result of re-applying a logged trajectory.
#[derive(Clone, Debug)]
pub struct ReplayOutcome {
    pub snapshots: Vec<FrequencyField>,
    pub final_field: FrequencyField,
    pub events: u64,
    /// Bitwise comparison with the stored `final.slfv`, when the run wrote one.
    pub matches_stored: Option<bool>,
}

/// Re-apply the events in `log` to the initial field of `cfg`.
pub fn replay(log: &Path, cfg: &ExperimentConfig) -> Result<ReplayOutcome> {
    let file = std::fs::File::open(log).map_err(|e| Error::io(log, e))?;
    let reader = EventLogReader::new(BufReader::new(file))?;
    let expected = cfg.hash();
    let found = reader.header().config_hash;
    if found != expected {
        return Err(Error::ConfigMismatch { expected: hex(&expected), found: hex(&found) });
    }
    let (snapshots, final_field, events) =
        replay_events(cfg.initial_field()?, &cfg.law, &cfg.model, cfg.horizon, &cfg.sample_times, reader, &mut Snapshots)?;
    Ok(ReplayOutcome { snapshots, final_field, events, matches_stored: None })
}

/// Replay using the `config.txt` stored next to the log.
pub fn replay_run(log: &Path) -> Result<(ExperimentConfig, ReplayOutcome)> {
    let dir = log.parent().unwrap_or(Path::new("."));
    let cfg_path = dir.join(CONFIG_FILE);
    let text = std::fs::read_to_string(&cfg_path).map_err(|e| Error::io(&cfg_path, e))?;
    let cfg = super::config::parse_config(&text)?;
    let mut out = replay(log, &cfg)?;
    let stored = dir.join(FINAL_FILE);
    if stored.exists() {
        let f = read_snapshot(&stored)?;
        let same = f.grid == *out.final_field.grid()
            && f.values.iter().zip(out.final_field.values()).all(|(a, b)| a.to_bits() == b.to_bits());
        out.matches_stored = Some(same);
    }
    Ok((cfg, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::parse_config;

    const TRAJ: &str = "kind = trajectory\nseed = 4\nn = 85\nside = 10\nu = 0.3\nhorizon = 2\nsamples = 4\nlog = true\nw0_amplitude = 0.3\n";

    #[test]
    fn trajectory_run_is_bitwise_reproducible_and_replayable() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = parse_config(TRAJ).unwrap();
        let a = tmp.path().join("a");
        let b = tmp.path().join("b");
        let ma = run_experiment_in(&cfg, &a).unwrap();
        run_experiment_in(&cfg, &b).unwrap();
        for art in &ma.artifacts {
            assert_eq!(std::fs::read(a.join(art)).unwrap(), std::fs::read(b.join(art)).unwrap(), "{art}");
        }
        let (_, out) = replay_run(&a.join(LOG_FILE)).unwrap();
        assert_eq!(out.matches_stored, Some(true));
        assert_eq!(out.snapshots.len(), 4);
    }

    #[test]
    fn replay_detects_mismatch_and_truncation() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = parse_config(TRAJ).unwrap();
        run_experiment_in(&cfg, tmp.path()).unwrap();
        let log = tmp.path().join(LOG_FILE);
        let other = parse_config(&TRAJ.replace("u = 0.3", "u = 0.31")).unwrap();
        assert!(matches!(replay(&log, &other), Err(Error::ConfigMismatch { .. })));
        let bytes = std::fs::read(&log).unwrap();
        std::fs::write(&log, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(replay(&log, &cfg), Err(Error::TruncatedLog { last_valid: Some(_) })));
    }

    #[test]
    fn empty_log_replays_to_initial_field() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = parse_config("kind = trajectory\nseed = 1\nn = 85\nside = 10\nw0_amplitude = 0.2\n").unwrap();
        let log = tmp.path().join(LOG_FILE);
        let w = EventLogWriter::new(std::fs::File::create(&log).unwrap(), LogHeader { d: 1, config_hash: cfg.hash() }).unwrap();
        w.finish().unwrap();
        let out = replay(&log, &cfg).unwrap();
        assert_eq!(out.final_field, cfg.initial_field().unwrap());
        assert_eq!(out.events, 0);
    }

    #[test]
    fn stochastic_kinds_need_a_seed() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = parse_config("kind = trajectory\n").unwrap();
        let e = run_experiment_in(&cfg, tmp.path()).unwrap_err();
        assert!(e.to_string().contains("seed"));
    }

    #[test]
    fn operator_and_drift_load_kinds_emit_tables() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = parse_config("kind = operator-tests\nn = 1600\nside = 20\nradii = 0.4, 0.2\ndeltas = 0.8, 0.4\nr_max = 4\n").unwrap();
        let m = run_experiment_in(&cfg, tmp.path()).unwrap();
        assert!(m.artifacts.iter().any(|a| a == "operators.csv"));
        let dl = parse_config(
            "kind = drift-load\nseed = 2\nmodel = overdominance\ndeltas = 0.5, 0.4\neps_prefactor = 0.02\neps_exponent = 0\nallow_coarse_eps = true\nhorizon_factor = 0.2\nside_factor = 4\nreplicates = 2\nsamples = 8\n",
        )
        .unwrap();
        let dir = tmp.path().join("dl");
        let m = run_experiment_in(&dl, &dir).unwrap();
        let csv = std::fs::read_to_string(dir.join("drift_load.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(m.warnings.iter().any(|w| w.contains("eps exponent")));
    }
}
