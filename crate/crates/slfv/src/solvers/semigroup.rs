use crate::error::{Error, Result};
use crate::lattice::{BallKernel, GridFn, TestFunction};

/// Poisson tail mass left out of the series.
pub const POISSON_TAIL: f64 = 1e-12;

/// `G_t phi = sum_n P(N_t = n) psi^{*n} * phi` for the pure-jump walk with
/// jump rate `(d + 2)/(2 r^2)` and double-ball increments. The `n = 0` atom
/// `e^{-lambda t} phi` is included exactly.
pub fn levy_semigroup_apply(phi: &GridFn, r: f64, t: f64) -> Result<GridFn> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Horizon(t));
    }
    let g = phi.grid;
    let k = BallKernel::new(&g, r)?;
    k.check_resolution()?;
    let lambda = (g.d() as f64 + 2.0) / (2.0 * r * r);
    let mean = lambda * t;
    let mut out: Vec<f64> = vec![0.0; phi.values.len()];
    let mut cur = phi.values.clone();
    let mut log_p = -mean;
    let mut mass = 0.0;
    let mut n = 0usize;
    loop {
        let p = log_p.exp();
        mass += p;
        for (o, c) in out.iter_mut().zip(&cur) {
            *o += p * c;
        }
        if n as f64 > mean && 1.0 - mass < POISSON_TAIL {
            break;
        }
        n += 1;
        log_p += mean.ln() - (n as f64).ln();
        cur = k.average(&g, &k.average(&g, &cur));
        if n > 10_000_000 {
            return Err(Error::InvalidParameter(format!("Poisson series did not converge for lambda t = {mean}")));
        }
    }
    Ok(GridFn { grid: g, values: out })
}

/// `f(t) = || < G_t phi >_1 ||_2^2`, which decays like `t^{-d/2}`.
pub fn f_of_t(phi: &TestFunction, t: f64) -> Result<f64> {
    let gt = levy_semigroup_apply(phi.as_grid_fn(), 1.0, t)?;
    let avg = crate::lattice::ball_average(&gt, 1.0)?;
    Ok(avg.values.iter().map(|v| v * v).sum::<f64>() * phi.grid().cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::TorusGrid;

    #[test]
    fn zero_time_is_identity_and_mass_is_kept() {
        let g = TorusGrid::new(1, 400, 40.0).unwrap();
        let phi = GridFn::from_fn(g, |x| (-(x[0] - 20.0).powi(2)).exp());
        let g0 = levy_semigroup_apply(&phi, 1.0, 0.0).unwrap();
        assert!(g0.sup_distance(&phi).unwrap() < 1e-15);
        let gt = levy_semigroup_apply(&phi, 1.0, 5.0).unwrap();
        assert!((gt.integral() - phi.integral()).abs() < 1e-10);
        let c = GridFn::constant(g, 2.0);
        let gc = levy_semigroup_apply(&c, 1.0, 3.0).unwrap();
        assert!(gc.values.iter().all(|v| (v - 2.0).abs() < 1e-11));
    }

    #[test]
    fn variance_grows_like_diffusion() {
        // jump variance M2, rate lambda: Var = lambda t M2 = t for a moment-matched kernel
        let g = TorusGrid::new(1, 2000, 200.0).unwrap();
        let mut phi = GridFn::constant(g, 0.0);
        phi.values[1000] = 1.0 / g.h();
        let t = 10.0;
        let gt = levy_semigroup_apply(&phi, 1.0, t).unwrap();
        let x0 = g.center(1000)[0];
        let var: f64 = (0..g.cells()).map(|i| (g.center(i)[0] - x0).powi(2) * gt.values[i] * g.h()).sum();
        let k = BallKernel::new(&g, 1.0).unwrap();
        let expect = 1.5 * t * k.double_moment2();
        assert!((var - expect).abs() < 1e-9 * expect, "{var} vs {expect}");
    }
}
