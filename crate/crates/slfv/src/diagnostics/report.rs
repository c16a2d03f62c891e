use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// One `(statistic, test function, time)` comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub statistic: String,
    pub phi: String,
    pub t: f64,
    pub estimate: f64,
    pub oracle: f64,
    pub se: f64,
}

impl ReportRow {
    pub fn z(&self) -> f64 {
        if self.se > 0.0 {
            (self.estimate - self.oracle) / self.se
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiagnosticsReport {
    pub rows: Vec<ReportRow>,
}

impl DiagnosticsReport {
    pub fn push(&mut self, statistic: &str, phi: &str, t: f64, estimate: f64, oracle: f64, se: f64) {
        self.rows.push(ReportRow { statistic: statistic.into(), phi: phi.into(), t, estimate, oracle, se });
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("statistic,phi,t,estimate,oracle,se,z\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.statistic,
                r.phi,
                r.t,
                r.estimate,
                r.oracle,
                r.se,
                r.z()
            );
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}
