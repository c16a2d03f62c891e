use std::f64::consts::PI;

use super::{pair_values, FrequencyField, TestFunction, TorusGrid};
use crate::error::{Error, Result};

/// Default truncation depth of the metric family.
pub const DEFAULT_FAMILY_SIZE: usize = 16;

/// Ordered family of raised-cosine bumps defining the truncated metric
/// `sum_n 2^-n |<f, phi_n> - <g, phi_n>|`.
///
/// Bump `n` (1-based) has half-width `L/4` for odd `n` and `L/8` for even `n`;
/// its center follows a van der Corput sequence (bases 2, 3, 5 per axis). Each
/// bump is normalized on the grid so that `||phi_n||_1 = 1`.
#[derive(Clone, Debug)]
pub struct XiMetricFamily {
    bumps: Vec<TestFunction>,
}

fn van_der_corput(mut i: usize, base: usize) -> f64 {
    let mut x = 0.0;
    let mut scale = 1.0 / base as f64;
    while i > 0 {
        x += (i % base) as f64 * scale;
        i /= base;
        scale /= base as f64;
    }
    x
}

impl XiMetricFamily {
    pub fn new(grid: TorusGrid, n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::EmptyFamily);
        }
        let bases = [2, 3, 5];
        let side = grid.side();
        let bumps = (1..=n_max)
            .map(|n| {
                let w = if n % 2 == 1 { side / 4.0 } else { side / 8.0 };
                let mut c = [0.0; 3];
                for (k, ck) in c.iter_mut().enumerate().take(grid.d()) {
                    *ck = side * van_der_corput(n, bases[k]);
                }
                let raw = TestFunction::from_fn(grid, |x| {
                    let dx = grid.displacement(&c, x);
                    dx[..grid.d()]
                        .iter()
                        .map(|&v| if v.abs() < w { 0.5 * (1.0 + (PI * v / w).cos()) } else { 0.0 })
                        .product()
                });
                let norm = raw.l1();
                TestFunction::from_fn(grid, |x| {
                    let i = grid.cell_of(x);
                    raw.values()[i] / norm
                })
            })
            .collect();
        Ok(XiMetricFamily { bumps })
    }

    pub fn with_default_size(grid: TorusGrid) -> Result<Self> {
        XiMetricFamily::new(grid, DEFAULT_FAMILY_SIZE)
    }

    /// Family from explicitly supplied test functions (ordered).
    pub fn from_functions(bumps: Vec<TestFunction>) -> Result<Self> {
        if bumps.is_empty() {
            return Err(Error::EmptyFamily);
        }
        Ok(XiMetricFamily { bumps })
    }

    pub fn len(&self) -> usize {
        self.bumps.len()
    }
    pub fn is_empty(&self) -> bool {
        self.bumps.is_empty()
    }
    pub fn functions(&self) -> &[TestFunction] {
        &self.bumps
    }

    /// Whether some member distinguishes `f` from `g`.
    pub fn separates(&self, f: &FrequencyField, g: &FrequencyField) -> Result<bool> {
        Ok(xi_distance(f, g, self)? > 0.0)
    }
}

/// Truncated vague-topology metric between two fields.
pub fn xi_distance(f: &FrequencyField, g: &FrequencyField, fam: &XiMetricFamily) -> Result<f64> {
    xi_distance_values(f.grid(), f.values(), g.values(), fam)
}

/// Same metric for raw value slices on `grid` (used for centering terms).
pub fn xi_distance_values(grid: &TorusGrid, f: &[f64], g: &[f64], fam: &XiMetricFamily) -> Result<f64> {
    if fam.is_empty() {
        return Err(Error::EmptyFamily);
    }
    if f.len() != g.len() || fam.bumps[0].grid() != grid {
        return Err(Error::GridMismatch);
    }
    let diff: Vec<f64> = f.iter().zip(g).map(|(a, b)| a - b).collect();
    let mut weight = 1.0;
    let mut total = 0.0;
    for phi in &fam.bumps {
        weight *= 0.5;
        total += weight * pair_values(grid, &diff, phi.values()).abs();
    }
    Ok(total)
}
