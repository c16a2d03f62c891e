//! Torus geometry and the discrete state space.
//!
//! Fields live on a periodic grid of `n^d` cells of width `h = L/n`, stored
//! row-major with the last coordinate varying fastest. Cell `i` along an axis
//! has its center at `(i + 1/2) h`.

mod kernel;
mod metric;
mod snapshot;

pub use kernel::{
    ball_average, ball_overlap_volume, ball_sum, ball_volume, double_ball_average,
    unit_ball_volume, BallKernel, MIN_RESOLUTION,
};
pub use metric::{xi_distance, xi_distance_values, XiMetricFamily, DEFAULT_FAMILY_SIZE};
pub use snapshot::{decode_snapshot, encode_snapshot, read_snapshot, write_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION};

use crate::error::{Error, Result};

/// Periodic grid on `[0, L)^d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorusGrid {
    d: usize,
    n: usize,
    side: f64,
}

impl TorusGrid {
    pub fn new(d: usize, n: usize, side: f64) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::UnsupportedDimension(d));
        }
        if n < 4 {
            return Err(Error::InvalidGrid(format!("need n >= 4 cells per side, got {n}")));
        }
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidGrid(format!("side length must be positive, got {side}")));
        }
        if n.checked_pow(d as u32).is_none_or(|c| c > (1 << 31)) {
            return Err(Error::InvalidGrid(format!("{n}^{d} cells is too many")));
        }
        Ok(TorusGrid { d, n, side })
    }

    /// Grid with cell width `h`, rounding the side to a whole number of cells.
    pub fn with_spacing(d: usize, side: f64, h: f64) -> Result<Self> {
        let n = (side / h).round().max(1.0) as usize;
        TorusGrid::new(d, n, n as f64 * h)
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn side(&self) -> f64 {
        self.side
    }
    pub fn h(&self) -> f64 {
        self.side / self.n as f64
    }
    pub fn cells(&self) -> usize {
        self.n.pow(self.d as u32)
    }
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.d as i32)
    }
    pub fn volume(&self) -> f64 {
        self.side.powi(self.d as i32)
    }

    /// Same cells, coordinates scaled by `factor` (used for rescaled views).
    pub fn scaled(&self, factor: f64) -> TorusGrid {
        TorusGrid { side: self.side * factor, ..*self }
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        let mut rem = idx;
        for k in (0..self.d).rev() {
            c[k] = rem % self.n;
            rem /= self.n;
        }
        c
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        let mut idx = 0;
        for &ck in c.iter().take(self.d) {
            idx = idx * self.n + ck;
        }
        idx
    }

    /// Index of the cell reached from `idx` by an integer offset, with wrap.
    pub fn shift(&self, idx: usize, off: [i32; 3]) -> usize {
        let c = self.coords(idx);
        let n = self.n as i64;
        let mut out = [0usize; 3];
        for k in 0..self.d {
            out[k] = (c[k] as i64 + off[k] as i64).rem_euclid(n) as usize;
        }
        self.index(out)
    }

    /// Minimal-image offset `b - a` in cell units.
    pub fn cell_offset(&self, a: usize, b: usize) -> [i32; 3] {
        let (ca, cb) = (self.coords(a), self.coords(b));
        let n = self.n as i64;
        let mut out = [0i32; 3];
        for k in 0..self.d {
            let mut o = (cb[k] as i64 - ca[k] as i64).rem_euclid(n);
            if o > n / 2 {
                o -= n;
            }
            out[k] = o as i32;
        }
        out
    }

    pub fn center(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let h = self.h();
        let mut x = [0.0; 3];
        for k in 0..self.d {
            x[k] = (c[k] as f64 + 0.5) * h;
        }
        x
    }

    /// Cell containing the point `x` (coordinates wrapped onto the torus).
    pub fn cell_of(&self, x: &[f64]) -> usize {
        let h = self.h();
        let mut c = [0usize; 3];
        for k in 0..self.d {
            let i = (x[k] / h).floor() as i64;
            c[k] = i.rem_euclid(self.n as i64) as usize;
        }
        self.index(c)
    }

    /// Minimal-image displacement from `a` to `b`.
    pub fn displacement(&self, a: &[f64], b: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for k in 0..self.d {
            let mut v = b[k] - a[k];
            v -= self.side * (v / self.side).round();
            out[k] = v;
        }
        out
    }

    pub fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.displacement(a, b).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Evaluate `f` at every cell center.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.cells()).map(|i| f(&self.center(i)[..self.d])).collect()
    }
}

/// Real-valued function sampled at cell centers.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFn {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
}

impl GridFn {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::GridMismatch);
        }
        Ok(GridFn { grid, values })
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = grid.sample(f);
        GridFn { grid, values }
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        GridFn { grid, values: vec![c; grid.cells()] }
    }

    /// `h^d`-weighted sum, the quadrature of the integral.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * self.values.iter().sum::<f64>()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &GridFn) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFn {
        GridFn { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }
}

/// Allele-frequency field: every cell value lies in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrequencyField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl FrequencyField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.cells() {
            return Err(Error::GridMismatch);
        }
        if let Some((index, &value)) =
            values.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::OutOfRange { index, value });
        }
        Ok(FrequencyField { grid, values })
    }

    pub fn constant(grid: TorusGrid, w: f64) -> Result<Self> {
        FrequencyField::new(grid, vec![w; grid.cells()])
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        FrequencyField::new(grid, grid.sample(f))
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access for the event engine; callers must keep values in `[0, 1]`.
    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn as_grid_fn(&self) -> GridFn {
        GridFn { grid: self.grid, values: self.values.clone() }
    }

    pub fn into_grid_fn(self) -> GridFn {
        GridFn { grid: self.grid, values: self.values }
    }

    pub fn try_from_grid_fn(f: GridFn) -> Result<Self> {
        FrequencyField::new(f.grid, f.values)
    }

    pub fn ball_average(&self, r: f64) -> Result<FrequencyField> {
        let avg = ball_average(&self.as_grid_fn(), r)?;
        Ok(FrequencyField { grid: self.grid, values: clamp_unit(avg.values) })
    }

    pub fn double_ball_average(&self, r: f64) -> Result<FrequencyField> {
        let avg = double_ball_average(&self.as_grid_fn(), r)?;
        Ok(FrequencyField { grid: self.grid, values: clamp_unit(avg.values) })
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

// Averages of [0,1] data can only leave the interval by roundoff.
fn clamp_unit(mut v: Vec<f64>) -> Vec<f64> {
    for x in &mut v {
        *x = x.clamp(0.0, 1.0);
    }
    v
}

/// Grid-sampled test function with cached norms.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFunction {
    f: GridFn,
    l1: f64,
    l2: f64,
    linf: f64,
}

impl TestFunction {
    pub fn new(f: GridFn) -> Self {
        let hd = f.grid.cell_volume();
        let l1 = hd * f.values.iter().map(|v| v.abs()).sum::<f64>();
        let l2 = (hd * f.values.iter().map(|v| v * v).sum::<f64>()).sqrt();
        let linf = f.sup_norm();
        TestFunction { f, l1, l2, linf }
    }

    pub fn from_fn(grid: TorusGrid, g: impl Fn(&[f64]) -> f64) -> Self {
        TestFunction::new(GridFn::from_fn(grid, g))
    }

    /// Isotropic Gaussian `exp(-|x-c|^2 / (2 w^2))` centered at `c` (minimal image).
    pub fn gaussian(grid: TorusGrid, c: &[f64], w: f64) -> Self {
        TestFunction::from_fn(grid, |x| {
            let dx = grid.displacement(c, x);
            let r2: f64 = dx.iter().map(|v| v * v).sum();
            (-r2 / (2.0 * w * w)).exp()
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.f.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.f.values
    }
    pub fn as_grid_fn(&self) -> &GridFn {
        &self.f
    }
    pub fn l1(&self) -> f64 {
        self.l1
    }
    pub fn l2(&self) -> f64 {
        self.l2
    }
    pub fn linf(&self) -> f64 {
        self.linf
    }
}

/// `h^d`-weighted dot product on a shared grid.
pub fn pair_values(grid: &TorusGrid, a: &[f64], b: &[f64]) -> f64 {
    grid.cell_volume() * a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>()
}

/// Pairing `<q, phi>` of a frequency field with a test function.
pub fn pair(q: &FrequencyField, phi: &TestFunction) -> Result<f64> {
    if q.grid() != phi.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(pair_values(q.grid(), q.values(), phi.values()))
}

/// Pairing of two general grid functions.
pub fn pair_fn(a: &GridFn, b: &GridFn) -> Result<f64> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    Ok(pair_values(&a.grid, &a.values, &b.values))
}
