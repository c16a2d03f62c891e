//! Convergence table of the grid operators on a one-dimensional Gaussian bump.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::lattice::{GridFn, TorusGrid};
use crate::solvers::{op_l_r, Gaussian1d, RadialOperator};

/// Radial nodes per decade for the table; the quadrature error of the
/// truncated operator must sit well below its `delta^(2 - alpha)` deviation.
pub const OPERATOR_TABLE_NODES_PER_DECADE: usize = 512;

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorRow {
    pub operator: &'static str,
    /// Radius for `L`, realized lower cutoff for `D`.
    pub parameter: f64,
    pub sup_error: f64,
    /// Empirical order against the previous row of the same operator.
    pub order: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct OperatorTable {
    pub rows: Vec<OperatorRow>,
}

impl OperatorTable {
    pub fn orders(&self, operator: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.operator == operator).filter_map(|r| r.order).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("operator,parameter,sup_error,order\n");
        for r in &self.rows {
            let order = r.order.map(|o| format!("{o:.16e}")).unwrap_or_default();
            let _ = writeln!(s, "{},{:.16e},{:.16e},{order}", r.operator, r.parameter, r.sup_error);
        }
        s
    }
}

fn push_series(table: &mut OperatorTable, operator: &'static str, pts: Vec<(f64, f64)>) {
    let mut prev: Option<(f64, f64)> = None;
    for (p, e) in pts {
        let order = prev.map(|(p0, e0)| (e0 / e).ln() / (p0 / p).ln());
        table.rows.push(OperatorRow { operator, parameter: p, sup_error: e, order });
        prev = Some((p, e));
    }
}

/// `sup |L^(r) phi - phi''/2|` over `radii` and `sup |D^(alpha,delta) phi - D^(alpha) phi|`
/// over `deltas` (both truncated at `r_max`), for a Gaussian of the given width
/// centered on a one-dimensional torus.
pub fn operator_convergence(
    grid: &TorusGrid,
    width: f64,
    radii: &[f64],
    alpha: f64,
    deltas: &[f64],
    r_max: f64,
) -> Result<OperatorTable> {
    if grid.d() != 1 {
        return Err(Error::UnsupportedDimension(grid.d()));
    }
    let side = grid.side();
    let g = Gaussian1d::new(0.5 * side, width);
    // nearest periodic image of the bump
    let image = |x: f64| g.center + (x - g.center - side * ((x - g.center) / side).round());
    let phi = GridFn::from_fn(*grid, |x| g.value(image(x[0])));
    let xs: Vec<f64> = (0..grid.cells()).map(|i| image(grid.center(i)[0])).collect();
    let mut table = OperatorTable::default();

    let mut l_pts = Vec::new();
    for &r in radii {
        let l = op_l_r(&phi, r)?;
        let err = xs.iter().zip(&l.values).map(|(&x, v)| (v - 0.5 * g.second(x)).abs()).fold(0.0, f64::max);
        l_pts.push((r, err));
    }
    push_series(&mut table, "L", l_pts);

    if !deltas.is_empty() {
        // the reference is smooth on the scale of the bump, so a coarse sample suffices
        let stride = (grid.cells() / 400).max(1);
        let probe: Vec<usize> = (0..grid.cells()).step_by(stride).collect();
        let reference: Vec<f64> = probe.iter().map(|&i| g.d_alpha(xs[i], alpha, 0.0, r_max)).collect();
        let mut d_pts = Vec::new();
        for &delta in deltas {
            let op = RadialOperator::new(grid, alpha, delta, r_max, OPERATOR_TABLE_NODES_PER_DECADE)?;
            let v = op.apply_d(&phi.values);
            let err = probe.iter().zip(&reference).map(|(&i, r)| (v[i] - r).abs()).fold(0.0, f64::max);
            d_pts.push((op.delta(), err));
        }
        push_series(&mut table, "D", d_pts);
    }
    Ok(table)
}
