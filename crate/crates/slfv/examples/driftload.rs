//! Drift load sweep with its linear-noise prediction.
//!
//! Usage: `driftload [d] [eps_prefactor eps_exponent] [horizon_factor] [replicates] [delta...]`.
//! The default impact rule `eps = 0.05 delta` keeps the run to minutes in d = 1;
//! the strict rule `eps = delta^5` is far out of reach at these deltas.

use std::time::Instant;

use slfv::driftload::{measure_drift_load, DriftLoadConfig, EpsilonRule};

fn main() -> slfv::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let d = args.first().copied().unwrap_or(1.0) as usize;
    let deltas = if args.len() > 5 { args[5..].to_vec() } else { vec![0.2, 0.14, 0.1, 0.07] };
    let mut cfg = DriftLoadConfig::new(d, deltas);
    cfg.eps = EpsilonRule { prefactor: args.get(1).copied().unwrap_or(0.05), exponent: args.get(2).copied().unwrap_or(1.0) };
    cfg.allow_coarse_eps = true;
    cfg.horizon_factor = args.get(3).copied().unwrap_or(10.0);
    cfg.replicates = args.get(4).copied().unwrap_or(2.0) as usize;
    cfg.probes = 64;
    cfg.samples = 256;
    cfg.seed = 5;
    for &delta in &cfg.deltas {
        eprintln!("delta {delta}: {:.3e} expected events per replicate", cfg.expected_events(delta)?);
    }
    let start = Instant::now();
    let r = measure_drift_load(&cfg)?;
    print!("{}", r.to_csv());
    println!("slope {:.4}  max/min normalized {:.4}  ({:.1} s)", r.slope(), r.max_min_normalized(), start.elapsed().as_secs_f64());
    for row in &r.rows {
        println!(
            "delta {} events {} ratio {:.4} +- {:.4} linear-noise {:.4}",
            row.delta, row.events, row.ratio, row.ratio_se, row.linear_ratio
        );
    }
    Ok(())
}
