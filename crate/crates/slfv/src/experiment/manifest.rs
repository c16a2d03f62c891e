use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Running,
    Complete,
    Failed,
}

impl RunStatus {
    fn name(self) -> &'static str {
        match self {
            RunStatus::Running => "running",
            RunStatus::Complete => "complete",
            RunStatus::Failed => "failed",
        }
    }
}

/// Provenance of one run. Written when the run starts and rewritten when it ends.
#[derive(Clone, Debug)]
pub struct RunManifest {
    pub kind: String,
    pub config_hash: String,
    pub code_version: String,
    pub seeds: Vec<u64>,
    pub started_unix: u64,
    pub wall_clock_secs: Option<f64>,
    /// Artifact paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub warnings: Vec<String>,
    pub status: RunStatus,
    pub error: Option<String>,
    dir: PathBuf,
    clock: Instant,
}

impl RunManifest {
    /// Creates `dir` and writes the initial manifest.
    pub fn begin(dir: &Path, kind: &str, config_hash: String, seeds: Vec<u64>) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let m = RunManifest {
            kind: kind.to_string(),
            config_hash,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds,
            started_unix,
            wall_clock_secs: None,
            artifacts: Vec::new(),
            warnings: Vec::new(),
            status: RunStatus::Running,
            error: None,
            dir: dir.to_path_buf(),
            clock: Instant::now(),
        };
        m.write()?;
        Ok(m)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Path for a new artifact inside the output directory, recorded in the manifest.
    pub fn artifact(&mut self, name: &str) -> Result<PathBuf> {
        if name.is_empty() || Path::new(name).components().any(|c| !matches!(c, std::path::Component::Normal(_))) {
            return Err(Error::InvalidParameter(format!("artifact name `{name}` leaves the output directory")));
        }
        self.artifacts.push(name.to_string());
        Ok(self.dir.join(name))
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        self.warnings.push(w.into());
    }

    pub fn finish(&mut self, outcome: std::result::Result<(), &Error>) -> Result<()> {
        self.wall_clock_secs = Some(self.clock.elapsed().as_secs_f64());
        match outcome {
            Ok(()) => self.status = RunStatus::Complete,
            Err(e) => {
                self.status = RunStatus::Failed;
                self.error = Some(e.to_string());
            }
        }
        self.write()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "kind = {}", self.kind);
        let _ = writeln!(s, "config_hash = {}", self.config_hash);
        let _ = writeln!(s, "code_version = {}", self.code_version);
        let seeds: Vec<String> = self.seeds.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(s, "seeds = {}", seeds.join(", "));
        let _ = writeln!(s, "started_unix = {}", self.started_unix);
        if let Some(w) = self.wall_clock_secs {
            let _ = writeln!(s, "wall_clock_secs = {w:.3}");
        }
        let _ = writeln!(s, "status = {}", self.status.name());
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error = {}", e.replace('\n', " "));
        }
        for a in &self.artifacts {
            let _ = writeln!(s, "artifact = {a}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning = {}", w.replace('\n', " "));
        }
        s
    }

    fn write(&self) -> Result<()> {
        let p = self.dir.join(MANIFEST_FILE);
        std::fs::write(&p, self.to_text()).map_err(|e| Error::io(p, e))
    }
}
