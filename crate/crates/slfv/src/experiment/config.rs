//! Line-oriented `key = value` configuration documents.
//!
//! `#` starts a comment. Every key may appear once; unknown keys are errors.
//! Lists are comma separated. All problems found are reported together.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::driftload::{DriftLoadConfig, EpsilonRule};
use crate::error::{ConfigIssue, Error, Result};
use crate::events::{EventLaw, KindWeights, RadiusLaw, SelectionModel};
use crate::lattice::{FrequencyField, TestFunction, TorusGrid};
use crate::scaling::{check_alpha, ScalingParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Trajectory,
    MartingaleCheck,
    CltFluctuations,
    DriftLoad,
    OperatorTests,
}

impl ExperimentKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "trajectory" => ExperimentKind::Trajectory,
            "martingale-check" => ExperimentKind::MartingaleCheck,
            "clt-fluctuations" => ExperimentKind::CltFluctuations,
            "drift-load" => ExperimentKind::DriftLoad,
            "operator-tests" => ExperimentKind::OperatorTests,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Trajectory => "trajectory",
            ExperimentKind::MartingaleCheck => "martingale-check",
            ExperimentKind::CltFluctuations => "clt-fluctuations",
            ExperimentKind::DriftLoad => "drift-load",
            ExperimentKind::OperatorTests => "operator-tests",
        }
    }

    /// Kinds that draw random numbers and therefore need an explicit seed.
    pub fn is_stochastic(self) -> bool {
        !matches!(self, ExperimentKind::OperatorTests)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every accepted key with its default (`None`: required or optional without default).
const KEYS: &[(&str, Option<&str>)] = &[
    ("kind", None),
    ("seed", None),
    ("out", Some("slfv-out")),
    ("threads", None),
    ("d", Some("1")),
    ("n", Some("170")),
    ("side", Some("20")),
    ("model", Some("genic")),
    ("s", Some("0.1")),
    ("s1", Some("0.45")),
    ("s2", Some("0.45")),
    ("nu1", Some("0.01")),
    ("nu2", Some("0.01")),
    ("f_coeffs", None),
    ("parents", None),
    ("p", None),
    ("u", Some("0.5")),
    ("radius_law", Some("fixed")),
    ("radius", Some("1")),
    ("alpha", Some("0.5")),
    ("r_max", Some("4")),
    ("w0", Some("0.5")),
    ("w0_amplitude", Some("0")),
    ("w0_modes", Some("1")),
    ("horizon", Some("1")),
    ("samples", None),
    ("sample_times", None),
    ("test_functions", None),
    ("log", Some("false")),
    // trajectory: also report rescaled time using eps and delta
    ("rescale", Some("false")),
    ("replicates", None),
    ("window", Some("0.5")),
    ("eps", Some("0.0016")),
    ("delta", Some("0.2")),
    ("noise", Some("nonlocal")),
    ("deltas", None),
    ("radii", Some("2, 1, 0.5, 0.25")),
    ("eps_prefactor", Some("1")),
    ("eps_exponent", Some("5")),
    ("allow_coarse_eps", Some("false")),
    ("side_factor", Some("12")),
    ("horizon_factor", Some("10")),
    ("probes", Some("8")),
    ("cells_per_radius", Some("8.5")),
    ("max_events", Some("1e11")),
];

/// Raw parsed document: key -> (value, line).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigDocument {
    entries: BTreeMap<String, (String, usize)>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, (String, usize)> = BTreeMap::new();
        let mut issues = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                issues.push(ConfigIssue { key: content.to_string(), line: Some(line), reason: "expected `key = value`".into() });
                continue;
            };
            let (k, v) = (k.trim().to_string(), v.trim().to_string());
            if !KEYS.iter().any(|(name, _)| *name == k) {
                issues.push(ConfigIssue { key: k, line: Some(line), reason: "unknown key".into() });
                continue;
            }
            if let Some((_, first)) = entries.get(&k) {
                issues.push(ConfigIssue {
                    key: k.clone(),
                    line: Some(line),
                    reason: format!("duplicate key (first set on line {first}, again on line {line})"),
                });
                continue;
            }
            entries.insert(k, (v, line));
        }
        if issues.is_empty() {
            Ok(ConfigDocument { entries })
        } else {
            Err(Error::Config(issues))
        }
    }

    /// Override (or add) a key, as command-line flags do.
    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), (value.into(), 0));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.entries.get(key).map(|e| e.1).filter(|l| *l > 0)
    }
}

/// Fully validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub seed: Option<u64>,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub grid: TorusGrid,
    pub model: SelectionModel,
    pub law: EventLaw,
    pub w0: (f64, f64, usize),
    pub horizon: f64,
    pub sample_times: Vec<f64>,
    /// `(center, width)` Gaussian bumps, centered on every axis at `center`.
    pub test_functions: Vec<(f64, f64)>,
    pub log: bool,
    pub replicates: usize,
    pub window: f64,
    pub scaling: Option<ScalingParams>,
    pub nonlocal_noise: bool,
    pub radii: Vec<f64>,
    pub deltas: Vec<f64>,
    pub alpha: f64,
    pub r_max: f64,
    pub drift_load: Option<DriftLoadConfig>,
    /// Every key with its effective value, defaults included.
    pub effective: BTreeMap<String, String>,
}

struct Reader<'a> {
    doc: &'a ConfigDocument,
    issues: Vec<ConfigIssue>,
}

impl<'a> Reader<'a> {
    fn raw(&self, key: &str) -> Option<String> {
        self.doc
            .get(key)
            .map(str::to_string)
            .or_else(|| KEYS.iter().find(|(k, _)| *k == key).and_then(|(_, d)| d.map(str::to_string)))
    }

    fn fail(&mut self, key: &str, reason: impl Into<String>) {
        self.issues.push(ConfigIssue { key: key.into(), line: self.doc.line(key), reason: reason.into() });
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, what: &str) -> Option<T> {
        let v = self.raw(key)?;
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(_) => {
                self.fail(key, format!("expected {what}, got `{v}`"));
                None
            }
        }
    }

    fn f64(&mut self, key: &str) -> f64 {
        match self.parse::<f64>(key, "a number") {
            Some(x) if x.is_finite() => x,
            Some(x) => {
                self.fail(key, format!("must be finite, got {x}"));
                f64::NAN
            }
            None => f64::NAN,
        }
    }

    fn usize(&mut self, key: &str) -> usize {
        self.parse::<usize>(key, "a nonnegative integer").unwrap_or(0)
    }

    fn bool(&mut self, key: &str) -> bool {
        self.parse::<bool>(key, "true or false").unwrap_or(false)
    }

    fn list(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.raw(key)?;
        let mut out = Vec::new();
        for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.parse::<f64>() {
                Ok(x) if x.is_finite() => out.push(x),
                _ => {
                    self.fail(key, format!("`{part}` is not a finite number"));
                    return None;
                }
            }
        }
        Some(out)
    }

    fn check(&mut self, key: &str, ok: bool, reason: &str) {
        if !ok {
            self.fail(key, reason.to_string());
        }
    }
}

fn issue_from(key: &str, line: Option<usize>, e: Error) -> ConfigIssue {
    let reason = match e {
        Error::InvalidParameter(m) => m,
        other => other.to_string(),
    };
    ConfigIssue { key: key.into(), line, reason }
}

/// Parse and validate a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::from_document(&ConfigDocument::parse(text)?)
}

impl ExperimentConfig {
    pub fn from_document(doc: &ConfigDocument) -> Result<Self> {
        let mut r = Reader { doc, issues: Vec::new() };
        let kind = match doc.get("kind") {
            None => {
                r.fail("kind", "missing; one of trajectory, martingale-check, clt-fluctuations, drift-load, operator-tests");
                None
            }
            Some(k) => {
                let parsed = ExperimentKind::parse(k);
                if parsed.is_none() {
                    r.fail("kind", format!("unknown experiment kind `{k}`"));
                }
                parsed
            }
        };
        let seed = if doc.get("seed").is_some() { r.parse::<u64>("seed", "an unsigned integer") } else { None };
        let out = PathBuf::from(r.raw("out").unwrap_or_default());
        let threads = if doc.get("threads").is_some() { r.parse::<usize>("threads", "a positive integer") } else { None };
        r.check("threads", threads != Some(0), "must be positive");

        let d = r.usize("d");
        r.check("d", (1..=3).contains(&d), "must be 1, 2 or 3");
        let n = r.usize("n");
        let side = r.f64("side");
        let grid = if (1..=3).contains(&d) {
            match TorusGrid::new(d, n, side) {
                Ok(g) => Some(g),
                Err(e) => {
                    r.issues.push(issue_from("n", doc.line("n"), e));
                    None
                }
            }
        } else {
            None
        };

        let u = r.f64("u");
        r.check("u", (0.0..=1.0).contains(&u), "impact must lie in [0, 1]");
        let model_name = r.raw("model").unwrap_or_default();
        let (model, weights) = match model_name.as_str() {
            "genic" => {
                let s = r.f64("s");
                r.check("s", (0.0..1.0).contains(&s), "selection weight must lie in [0, 1)");
                (Some(SelectionModel::Genic), Some(KindWeights::Haploid { s }))
            }
            "general" => {
                let coeffs = r.list("f_coeffs").unwrap_or_default();
                let m = r.usize("parents");
                let p = r.list("p").unwrap_or_default();
                let s = r.f64("s");
                r.check("s", (0.0..1.0).contains(&s), "selection weight must lie in [0, 1)");
                match SelectionModel::general(coeffs, m, p) {
                    Ok(model) => (Some(model), Some(KindWeights::Haploid { s })),
                    Err(e) => {
                        r.issues.push(issue_from("p", doc.line("p"), e));
                        (None, None)
                    }
                }
            }
            "overdominance" => {
                let (s1, s2, nu1, nu2) = (r.f64("s1"), r.f64("s2"), r.f64("nu1"), r.f64("nu2"));
                let total = s1 + s2 + nu1 + nu2;
                r.check("s1", total < 1.0, &format!("s1 + s2 + nu1 + nu2 must be < 1, got {total}"));
                let model = SelectionModel::Overdominance { s1, s2, nu1, nu2 };
                if let Err(e) = model.validate() {
                    r.issues.push(issue_from("s1", doc.line("s1"), e));
                }
                (Some(model), Some(KindWeights::Diploid { s1, s2, nu1, nu2 }))
            }
            other => {
                r.fail("model", format!("unknown model `{other}`; expected genic, general or overdominance"));
                (None, None)
            }
        };

        let alpha = r.f64("alpha");
        let r_max = r.f64("r_max");
        let radius = r.f64("radius");
        let law_name = r.raw("radius_law").unwrap_or_default();
        let stable = match law_name.as_str() {
            "fixed" => false,
            "stable" => true,
            other => {
                r.fail("radius_law", format!("expected fixed or stable, got `{other}`"));
                false
            }
        };
        let needs_alpha = stable || kind == Some(ExperimentKind::OperatorTests);
        if needs_alpha && (1..=3).contains(&d) {
            if let Err(e) = check_alpha(alpha, d) {
                r.issues.push(issue_from("alpha", doc.line("alpha"), e));
            }
        }
        let radius_law = if stable { RadiusLaw::StablePareto { alpha, r_max } } else { RadiusLaw::Fixed(radius) };
        let law = weights.map(|w| EventLaw { u, weights: w, radius: radius_law });
        if let (Some(l), true) = (law, (1..=3).contains(&d)) {
            if let Err(e) = l.validate(d) {
                if !matches!(e, Error::InvalidParameter(ref m) if m.contains("α must lie")) {
                    r.issues.push(issue_from("radius", doc.line("radius"), e));
                }
            }
        }

        let w0 = (r.f64("w0"), r.f64("w0_amplitude"), r.usize("w0_modes"));
        r.check("w0", w0.0 - w0.1.abs() >= 0.0 && w0.0 + w0.1.abs() <= 1.0, "initial profile must stay in [0, 1]");
        let horizon = r.f64("horizon");
        r.check("horizon", horizon > 0.0, "must be positive");
        let sample_times = match (doc.get("sample_times"), doc.get("samples")) {
            (Some(_), Some(_)) => {
                r.fail("samples", "give either samples or sample_times, not both");
                Vec::new()
            }
            (Some(_), None) => {
                let t = r.list("sample_times").unwrap_or_default();
                let sorted = t.windows(2).all(|w| w[0] <= w[1]);
                r.check("sample_times", sorted && t.iter().all(|&x| x >= 0.0 && x <= horizon), "must be nondecreasing within [0, horizon]");
                t
            }
            (None, _) => {
                let k = if doc.get("samples").is_some() { r.usize("samples") } else { 10 };
                (1..=k).map(|i| horizon * i as f64 / k as f64).collect()
            }
        };
        let test_functions = match r.raw("test_functions") {
            None => vec![(0.5 * side, 1.0)],
            Some(v) => {
                let mut out = Vec::new();
                for part in v.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                    let parsed = part
                        .split_once(':')
                        .and_then(|(c, w)| Some((c.trim().parse::<f64>().ok()?, w.trim().parse::<f64>().ok()?)));
                    match parsed {
                        Some((c, w)) if w > 0.0 => out.push((c, w)),
                        _ => r.fail("test_functions", format!("`{part}` is not `center:width` with positive width")),
                    }
                }
                out
            }
        };
        let log = r.bool("log");
        let default_reps = if kind == Some(ExperimentKind::DriftLoad) { 4 } else { 100 };
        let replicates = if doc.get("replicates").is_some() { r.usize("replicates") } else { default_reps };
        let window = r.f64("window");
        r.check("window", window > 0.0, "must be positive");

        let (eps, delta) = (r.f64("eps"), r.f64("delta"));
        let s_base = match model_name.as_str() {
            "overdominance" => r.f64("s1") + r.f64("s2"),
            _ => r.f64("s"),
        };
        let rescale = r.bool("rescale");
        let wants_scaling = match kind {
            Some(ExperimentKind::CltFluctuations) => true,
            Some(ExperimentKind::Trajectory) => rescale,
            _ => false,
        };
        let scaling = if wants_scaling {
            let p = if stable {
                ScalingParams::stable(d, eps, delta, u, s_base, alpha)
            } else {
                ScalingParams::brownian(d, eps, delta, u, s_base, radius)
            };
            p.map_err(|e| r.issues.push(issue_from("eps", doc.line("eps"), e))).ok()
        } else {
            None
        };
        let nonlocal_noise = match r.raw("noise").as_deref() {
            Some("local") => false,
            Some("nonlocal") | None => true,
            Some(other) => {
                r.fail("noise", format!("expected local or nonlocal, got `{other}`"));
                true
            }
        };
        let radii = r.list("radii").unwrap_or_default();
        r.check("radii", radii.iter().all(|&x| x > 0.0), "radii must be positive");
        let default_deltas = match kind {
            Some(ExperimentKind::DriftLoad) => "0.2, 0.14, 0.1, 0.07",
            _ => "0.8, 0.4, 0.2, 0.1",
        };
        let deltas = if doc.get("deltas").is_some() {
            r.list("deltas").unwrap_or_default()
        } else {
            default_deltas.split(',').map(|x| x.trim().parse().unwrap()).collect()
        };
        r.check("deltas", !deltas.is_empty() && deltas.iter().all(|&x| x > 0.0 && x <= 1.0), "deltas must lie in (0, 1]");

        let drift_load = if kind == Some(ExperimentKind::DriftLoad) {
            r.check("model", model_name == "overdominance", "drift-load needs model = overdominance");
            let mut c = DriftLoadConfig::new(d, deltas.clone());
            c.eps = EpsilonRule { prefactor: r.f64("eps_prefactor"), exponent: r.f64("eps_exponent") };
            c.allow_coarse_eps = r.bool("allow_coarse_eps");
            c.s1 = r.f64("s1");
            c.s2 = r.f64("s2");
            c.nu1 = r.f64("nu1");
            c.nu2 = r.f64("nu2");
            c.u = u;
            c.radius = radius;
            c.cells_per_radius = r.f64("cells_per_radius");
            c.side_factor = r.f64("side_factor");
            c.horizon_factor = r.f64("horizon_factor");
            c.replicates = replicates;
            c.probes = r.usize("probes");
            c.samples = if doc.get("samples").is_some() { r.usize("samples") } else { 64 };
            c.seed = seed.unwrap_or(0);
            c.max_events = r.f64("max_events");
            if r.issues.is_empty() {
                if let Err(e) = c.validate() {
                    r.issues.push(issue_from("drift-load", None, e));
                }
            }
            Some(c)
        } else {
            None
        };

        if r.issues.is_empty() {
            if let (Some(m), Some(l)) = (&model, &law) {
                if let Err(e) = m.check_weights(&l.weights) {
                    r.issues.push(issue_from("model", doc.line("model"), e));
                }
            }
        }
        if !r.issues.is_empty() {
            // a value that failed to parse also fails every later check; keep the first
            let mut seen = std::collections::BTreeSet::new();
            r.issues.retain(|i| seen.insert(i.key.clone()));
            r.issues.sort_by_key(|i| i.line);
            return Err(Error::Config(r.issues));
        }
        let effective = KEYS
            .iter()
            .filter_map(|(k, _)| {
                let v = doc.get(k).map(str::to_string).or_else(|| KEYS.iter().find(|(n, _)| n == k).and_then(|(_, d)| d.map(str::to_string)))?;
                Some((k.to_string(), v))
            })
            .collect();
        Ok(ExperimentConfig {
            kind: kind.expect("checked"),
            seed,
            out,
            threads,
            grid: grid.expect("checked"),
            model: model.expect("checked"),
            law: law.expect("checked"),
            w0,
            horizon,
            sample_times,
            test_functions,
            log,
            replicates,
            window,
            scaling,
            nonlocal_noise,
            radii,
            deltas,
            alpha,
            r_max,
            drift_load,
            effective,
        })
    }

    /// Content hash over every effective key except where artifacts go and
    /// how many threads compute them.
    pub fn hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for (k, v) in &self.effective {
            if k == "out" || k == "threads" {
                continue;
            }
            h.update(k.as_bytes());
            h.update(b"=");
            h.update(v.as_bytes());
            h.update(b"\n");
        }
        h.finalize().into()
    }

    pub fn hash_hex(&self) -> String {
        hex(&self.hash())
    }

    /// Canonical text of the effective configuration, parseable again.
    pub fn canonical_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.effective {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    pub fn initial_field(&self) -> Result<FrequencyField> {
        let (mean, amp, modes) = self.w0;
        let side = self.grid.side();
        FrequencyField::from_fn(self.grid, |x| {
            (mean + amp * (2.0 * std::f64::consts::PI * modes as f64 * x[0] / side).cos()).clamp(0.0, 1.0)
        })
    }

    pub fn test_function_set(&self) -> Vec<(String, TestFunction)> {
        self.test_functions
            .iter()
            .map(|&(c, w)| {
                let center = vec![c; self.grid.d()];
                (format!("gauss({c}:{w})"), TestFunction::gaussian(self.grid, &center, w))
            })
            .collect()
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
