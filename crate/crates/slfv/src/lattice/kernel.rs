use std::f64::consts::PI;

use super::{GridFn, TorusGrid};
use crate::error::{Error, Result};

/// Smallest `r/h` accepted by operators that approximate continuum balls.
pub const MIN_RESOLUTION: f64 = 8.0;

pub fn unit_ball_volume(d: usize) -> Result<f64> {
    match d {
        1 => Ok(2.0),
        2 => Ok(PI),
        3 => Ok(4.0 * PI / 3.0),
        _ => Err(Error::UnsupportedDimension(d)),
    }
}

/// Volume of the continuum ball `B(0, r)` in `R^d`.
pub fn ball_volume(d: usize, r: f64) -> Result<f64> {
    Ok(unit_ball_volume(d)? * r.powi(d as i32))
}

/// Volume of `B(x, r) ∩ B(y, r)` for `|x - y| = dist`.
pub fn ball_overlap_volume(d: usize, r: f64, dist: f64) -> Result<f64> {
    let s = dist.abs();
    if s >= 2.0 * r {
        unit_ball_volume(d)?;
        return Ok(0.0);
    }
    match d {
        1 => Ok(2.0 * r - s),
        2 => {
            let v = 2.0 * r * r * (s / (2.0 * r)).acos() - 0.5 * s * (4.0 * r * r - s * s).sqrt();
            Ok(v.max(0.0))
        }
        3 => Ok(PI * (4.0 * r + s) * (2.0 * r - s).powi(2) / 12.0),
        _ => Err(Error::UnsupportedDimension(d)),
    }
}

/// Discrete ball: all cell offsets `k` with `|k| h < r`.
///
/// Stored both as a flat offset list (for event updates) and as runs along the
/// last axis (for averaging), where each run is a prefix offset over the
/// leading axes plus a half-width `a` covering `-a..=a` on the last axis.
#[derive(Clone, Debug, PartialEq)]
pub struct BallKernel {
    d: usize,
    h: f64,
    r: f64,
    offsets: Vec<[i32; 3]>,
    runs: Vec<([i32; 2], usize)>,
    moment2: f64,
}

impl BallKernel {
    pub fn new(grid: &TorusGrid, r: f64) -> Result<Self> {
        let h = grid.h();
        let d = grid.d();
        if !(r.is_finite() && r >= h) {
            return Err(Error::EmptyKernel { r, h });
        }
        let rr = (r / h) * (r / h);
        let m = (r / h).ceil() as i32;
        if 2 * m as usize + 1 > grid.n() {
            return Err(Error::InvalidGrid(format!(
                "ball of radius {r} does not fit on a torus of {} cells per side",
                grid.n()
            )));
        }
        let span = |active: bool| if active { -m..=m } else { 0..=0 };
        let mut runs = Vec::new();
        let mut offsets = Vec::new();
        let mut moment2 = 0.0;
        for p0 in span(d == 3) {
            for p1 in span(d >= 2) {
                let base = (p0 * p0 + p1 * p1) as f64;
                if base >= rr {
                    continue;
                }
                // largest a with base + a^2 < rr
                let mut a = (rr - base).sqrt().floor() as i32;
                while a > 0 && base + (a * a) as f64 >= rr {
                    a -= 1;
                }
                while base + (((a + 1) * (a + 1)) as f64) < rr {
                    a += 1;
                }
                let prefix = match d {
                    1 => [0, 0],
                    2 => [p1, 0],
                    _ => [p0, p1],
                };
                runs.push((prefix, a as usize));
                for j in -a..=a {
                    let off = match d {
                        1 => [j, 0, 0],
                        2 => [p1, j, 0],
                        _ => [p0, p1, j],
                    };
                    moment2 += (base + (j * j) as f64) * h * h;
                    offsets.push(off);
                }
            }
        }
        let count = offsets.len() as f64;
        Ok(BallKernel { d, h, r, offsets, runs, moment2: moment2 / count })
    }

    pub fn radius(&self) -> f64 {
        self.r
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn d(&self) -> usize {
        self.d
    }
    pub fn count(&self) -> usize {
        self.offsets.len()
    }
    pub fn offsets(&self) -> &[[i32; 3]] {
        &self.offsets
    }

    /// Runs along the last axis: leading-axis offset and half-width.
    pub fn runs(&self) -> &[([i32; 2], usize)] {
        &self.runs
    }

    /// Whether a cell offset lies in the ball.
    #[inline]
    pub fn contains(&self, off: [i32; 3]) -> bool {
        let rr = (self.r / self.h) * (self.r / self.h);
        let k2 = off.iter().map(|&k| (k as i64 * k as i64) as f64).sum::<f64>();
        k2 < rr
    }

    /// Discrete volume `h^d * count`.
    pub fn volume(&self) -> f64 {
        self.h.powi(self.d as i32) * self.count() as f64
    }

    /// Largest absolute offset along any axis.
    pub fn reach(&self) -> usize {
        self.runs.iter().map(|(_, a)| *a).max().unwrap_or(0)
    }

    /// Second moment `E|Y|^2` of a uniform cell of the ball (model units).
    pub fn moment2(&self) -> f64 {
        self.moment2
    }

    /// Second moment of the double-ball kernel, the sum of two independent
    /// uniform ball offsets. Tends to `2 d r^2 / (d + 2)`.
    pub fn double_moment2(&self) -> f64 {
        2.0 * self.moment2
    }

    /// Ratio `r/h` checked against [`MIN_RESOLUTION`].
    pub fn check_resolution(&self) -> Result<()> {
        let ratio = self.r / self.h;
        if ratio < MIN_RESOLUTION {
            return Err(Error::Resolution { r: self.r, ratio, min: MIN_RESOLUTION });
        }
        Ok(())
    }

    /// Sum over the stencil centered at every cell.
    pub fn sum(&self, grid: &TorusGrid, values: &[f64]) -> Vec<f64> {
        let n = grid.n();
        let lines = values.len() / n;
        let mut widths: Vec<usize> = self.runs.iter().map(|(_, a)| *a).collect();
        widths.sort_unstable();
        widths.dedup();
        let windows: Vec<Vec<f64>> =
            widths.iter().map(|&a| window_sums(values, n, lines, a)).collect();
        let slot = |a: usize| widths.binary_search(&a).expect("width present");
        match self.d {
            1 => windows.into_iter().next().expect("one run"),
            2 => {
                let mut out = vec![0.0; values.len()];
                for &(p, a) in &self.runs {
                    let w = &windows[slot(a)];
                    for i in 0..n {
                        let src = wrap(i, p[0], n);
                        let dst = &mut out[i * n..(i + 1) * n];
                        for (o, v) in dst.iter_mut().zip(&w[src * n..(src + 1) * n]) {
                            *o += v;
                        }
                    }
                }
                out
            }
            _ => {
                let mut out = vec![0.0; values.len()];
                for &(p, a) in &self.runs {
                    let w = &windows[slot(a)];
                    for i in 0..n {
                        let si = wrap(i, p[0], n);
                        for j in 0..n {
                            let sj = wrap(j, p[1], n);
                            let src = (si * n + sj) * n;
                            let dst = (i * n + j) * n;
                            for k in 0..n {
                                out[dst + k] += w[src + k];
                            }
                        }
                    }
                }
                out
            }
        }
    }

    /// Mean over the stencil centered at every cell.
    pub fn average(&self, grid: &TorusGrid, values: &[f64]) -> Vec<f64> {
        let inv = 1.0 / self.count() as f64;
        let mut s = self.sum(grid, values);
        for v in &mut s {
            *v *= inv;
        }
        s
    }
}

fn wrap(i: usize, off: i32, n: usize) -> usize {
    (i as i64 + off as i64).rem_euclid(n as i64) as usize
}

// Periodic window sums of half-width `a` along each contiguous line of length `n`.
fn window_sums(values: &[f64], n: usize, lines: usize, a: usize) -> Vec<f64> {
    let mut out = vec![0.0; values.len()];
    let len = n + 2 * a + 1;
    let mut prefix = vec![0.0; len];
    for l in 0..lines {
        let line = &values[l * n..(l + 1) * n];
        let mut acc = 0.0;
        for (k, p) in prefix.iter_mut().enumerate().skip(1) {
            acc += line[(k - 1 + n - a % n) % n];
            *p = acc;
        }
        let dst = &mut out[l * n..(l + 1) * n];
        for (i, o) in dst.iter_mut().enumerate() {
            *o = prefix[i + 2 * a + 1] - prefix[i];
        }
    }
    out
}

/// Stencil sums `sum_{k in B} f(x + k)` at every cell.
pub fn ball_sum(f: &GridFn, r: f64) -> Result<GridFn> {
    let k = BallKernel::new(&f.grid, r)?;
    Ok(GridFn { grid: f.grid, values: k.sum(&f.grid, &f.values) })
}

/// Ball average `<f>(x, r)` at every cell.
pub fn ball_average(f: &GridFn, r: f64) -> Result<GridFn> {
    let k = BallKernel::new(&f.grid, r)?;
    Ok(GridFn { grid: f.grid, values: k.average(&f.grid, &f.values) })
}

/// Double ball average `<<f>>(x, r)`.
pub fn double_ball_average(f: &GridFn, r: f64) -> Result<GridFn> {
    let k = BallKernel::new(&f.grid, r)?;
    let once = k.average(&f.grid, &f.values);
    Ok(GridFn { grid: f.grid, values: k.average(&f.grid, &once) })
}
