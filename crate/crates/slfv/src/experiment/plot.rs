use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// A named two-column numeric series.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotSeries {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub units: String,
    pub provenance: String,
    pub points: Vec<(f64, f64)>,
}

impl PlotSeries {
    pub fn new(name: &str, x_label: &str, y_label: &str, points: Vec<(f64, f64)>) -> Self {
        PlotSeries {
            name: name.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            units: "dimensionless".into(),
            provenance: format!("slfv {}", env!("CARGO_PKG_VERSION")),
            points,
        }
    }
}

/// Write `series` as a plain two-column file with a `#` header. Returns
/// warnings (an empty series gives a header-only file).
pub fn emit_plot_data(series: &PlotSeries, path: &Path) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    for (i, &(x, y)) in series.points.iter().enumerate() {
        for v in [x, y] {
            if !v.is_finite() {
                return Err(Error::NonFinite { index: i, value: v });
            }
        }
    }
    let mut s = String::new();
    let _ = writeln!(s, "# {}", series.name);
    let _ = writeln!(s, "# columns: {} {}", series.x_label, series.y_label);
    let _ = writeln!(s, "# units: {}", series.units);
    let _ = writeln!(s, "# provenance: {}", series.provenance);
    if series.points.is_empty() {
        warnings.push(format!("series `{}` is empty; wrote header only", series.name));
    }
    for &(x, y) in &series.points {
        let _ = writeln!(s, "{x:.16e} {y:.16e}");
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))?;
    Ok(warnings)
}
