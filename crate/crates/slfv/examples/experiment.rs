//! Run a configured experiment into a temporary directory and list its artifacts.

use slfv::experiment::{parse_config, run_experiment_in};

const CONFIG: &str = "
kind = operator-tests
n = 1600
side = 20
radii = 0.8, 0.4, 0.2
deltas = 0.8, 0.4
r_max = 5
";

fn main() -> slfv::Result<()> {
    let cfg = parse_config(CONFIG)?;
    let dir = std::env::temp_dir().join(format!("slfv-example-{}", std::process::id()));
    let m = run_experiment_in(&cfg, &dir)?;
    println!("{} run in {} (config hash {})", m.kind, dir.display(), m.config_hash);
    for a in &m.artifacts {
        println!("  {a}");
    }
    print!("{}", std::fs::read_to_string(dir.join("operators.csv")).map_err(|e| slfv::Error::Io { path: dir.clone(), source: e })?);
    Ok(())
}
