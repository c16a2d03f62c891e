use crate::error::{Error, Result};
use crate::lattice::{unit_ball_volume, BallKernel, GridFn, TorusGrid, MIN_RESOLUTION};

/// Default radial nodes per decade for the nonlocal operators.
pub const DEFAULT_NODES_PER_DECADE: usize = 64;

fn resolved_kernel(grid: &TorusGrid, r: f64) -> Result<BallKernel> {
    let k = BallKernel::new(grid, r)?;
    k.check_resolution()?;
    Ok(k)
}

/// `L^(r) phi`, the rescaled double-average operator approximating `Δ/2`.
///
/// The prefactor is `d / M2`, where `M2` is the second moment of the discrete
/// double-ball kernel; it equals `(d + 2)/(2 r^2)` in the continuum limit and
/// makes the operator exact on quadratics at every resolution.
pub fn op_l_r(phi: &GridFn, r: f64) -> Result<GridFn> {
    let k = resolved_kernel(&phi.grid, r)?;
    Ok(GridFn { grid: phi.grid, values: apply_l(&k, &phi.grid, &phi.values) })
}

pub(crate) fn l_prefactor(k: &BallKernel) -> f64 {
    k.d() as f64 / k.double_moment2()
}

pub(crate) fn apply_l(k: &BallKernel, grid: &TorusGrid, v: &[f64]) -> Vec<f64> {
    let c = l_prefactor(k);
    let once = k.average(grid, v);
    let twice = k.average(grid, &once);
    twice.iter().zip(v).map(|(a, b)| c * (a - b)).collect()
}

/// Second-order central-difference Laplacian.
pub fn laplacian(phi: &GridFn) -> GridFn {
    let g = phi.grid;
    let n = g.n();
    let inv = 1.0 / (g.h() * g.h());
    let v = &phi.values;
    let mut out = vec![0.0; v.len()];
    // stride of axis k in row-major storage
    for k in 0..g.d() {
        let stride = n.pow((g.d() - 1 - k) as u32);
        for (i, o) in out.iter_mut().enumerate() {
            let c = (i / stride) % n;
            let up = if c + 1 == n { i + stride - n * stride } else { i + stride };
            let dn = if c == 0 { i + n * stride - stride } else { i - stride };
            *o += (v[up] + v[dn] - 2.0 * v[i]) * inv;
        }
    }
    GridFn { grid: g, values: out }
}

/// Radial quadrature nodes on `[lo, hi]`, log-spaced, with product-trapezoid
/// weights for `∫ g(r) r^(-alpha-1) dr` where `g` is linear in `log r` per panel.
///
/// In `d = 1` nodes are moved to half-integer multiples of `h`, where the
/// discrete ball has exactly the continuum length `2r`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub alpha: f64,
}

impl RadialQuadrature {
    pub fn new(grid: &TorusGrid, alpha: f64, lo: f64, hi: f64, per_decade: usize) -> Result<Self> {
        let h = grid.h();
        let q = Self::unchecked(grid, alpha, lo, hi, per_decade)?;
        if q.lo() < MIN_RESOLUTION * h - 1e-12 {
            return Err(Error::Resolution { r: q.lo(), ratio: q.lo() / h, min: MIN_RESOLUTION });
        }
        Ok(q)
    }

    /// As [`Self::new`] without the resolution check on the lower radius.
    pub fn unchecked(grid: &TorusGrid, alpha: f64, lo: f64, hi: f64, per_decade: usize) -> Result<Self> {
        if per_decade == 0 {
            return Err(Error::InvalidParameter("radial quadrature needs nodes".into()));
        }
        let h = grid.h();
        let snap = |r: f64| if grid.d() == 1 { ((r / h - 0.5).round().max(0.0) + 0.5) * h } else { r };
        let lo = snap(lo.max(h));
        let hi = snap(hi).max(lo);
        let mut nodes = vec![lo];
        if hi > lo {
            let decades = (hi / lo).log10();
            let count = ((decades * per_decade as f64).ceil() as usize).max(1);
            for j in 1..=count {
                let r = snap(lo * (hi / lo).powf(j as f64 / count as f64));
                if r > *nodes.last().unwrap() + 1e-12 * h {
                    nodes.push(r);
                }
            }
            if *nodes.last().unwrap() < hi {
                nodes.push(hi);
            }
        }
        let weights = product_trapezoid(&nodes, alpha);
        Ok(RadialQuadrature { nodes, weights, alpha })
    }

    pub fn lo(&self) -> f64 {
        self.nodes[0]
    }
    pub fn hi(&self) -> f64 {
        *self.nodes.last().unwrap()
    }
}

/// Weights `w_j` with `Σ w_j g(r_j) = ∫ g r^(-alpha-1) dr` for `g` piecewise
/// linear in `t = log r`, integrating the weight `e^(-alpha t)` exactly.
pub fn product_trapezoid(nodes: &[f64], alpha: f64) -> Vec<f64> {
    let mut w = vec![0.0; nodes.len()];
    for j in 0..nodes.len().saturating_sub(1) {
        let (a, b) = (nodes[j].ln(), nodes[j + 1].ln());
        let h = b - a;
        let (ea, eb) = ((-alpha * a).exp(), (-alpha * b).exp());
        let i0 = (ea - eb) / alpha;
        let i1 = -eb / alpha + i0 / (alpha * h);
        w[j] += i0 - i1;
        w[j + 1] += i1;
    }
    w
}

/// Precomputed radial quadrature and ball stencils for the truncated
/// nonlocal operators on one grid.
#[derive(Clone, Debug)]
pub struct RadialOperator {
    grid: TorusGrid,
    alpha: f64,
    v1: f64,
    delta: f64,
    r_max: f64,
    quad: Option<RadialQuadrature>,
    kernels: Vec<BallKernel>,
}

impl RadialOperator {
    /// Radii `[delta, r_max]`; empty when `delta >= r_max`.
    pub fn new(grid: &TorusGrid, alpha: f64, delta: f64, r_max: f64, per_decade: usize) -> Result<Self> {
        crate::scaling::check_alpha(alpha, grid.d())?;
        let v1 = unit_ball_volume(grid.d())?;
        let (quad, kernels) = if delta < r_max {
            let q = RadialQuadrature::new(grid, alpha, delta, r_max, per_decade)?;
            let ks = q.nodes.iter().map(|&r| BallKernel::new(grid, r)).collect::<Result<Vec<_>>>()?;
            (Some(q), ks)
        } else {
            (None, Vec::new())
        };
        Ok(RadialOperator { grid: *grid, alpha, v1, delta, r_max, quad, kernels })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    /// Realized lower radius (moved to a grid-exact radius in `d = 1`).
    pub fn delta(&self) -> f64 {
        self.quad.as_ref().map_or(self.delta, |q| q.lo())
    }
    pub fn nodes(&self) -> usize {
        self.kernels.len()
    }

    /// Upper bound on `V_1 ∫_delta^∞ r^(-alpha-1) dr * 2`, the operator norm of `D`.
    pub fn norm_bound(&self) -> f64 {
        2.0 * self.v1 * self.delta().powf(-self.alpha) / self.alpha
    }

    fn each<'a>(&'a self) -> impl Iterator<Item = (&'a BallKernel, f64)> + 'a {
        let w = self.quad.as_ref().map(|q| q.weights.as_slice()).unwrap_or(&[]);
        self.kernels.iter().zip(w.iter().copied())
    }

    pub fn apply_d(&self, v: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut out = vec![0.0; v.len()];
        for (k, w) in self.each() {
            let twice = k.average(g, &k.average(g, v));
            for ((o, a), b) in out.iter_mut().zip(&twice).zip(v) {
                *o += self.v1 * w * (a - b);
            }
        }
        out
    }

    /// Bound on the contribution of radii beyond `r_max`.
    pub fn tail_bound(&self, v: &[f64]) -> f64 {
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let spread = v.iter().fold(0.0f64, |m, x| m.max((x - mean).abs()));
        self.v1 * spread * self.r_max.powf(-self.alpha) / self.alpha
    }

    fn tail_share(&self) -> f64 {
        match &self.quad {
            Some(q) => (q.lo() / q.hi()).powf(self.alpha),
            None => 1.0,
        }
    }

    /// `F^(delta)` with reaction `H`; radii beyond `r_max` use `H` of the global mean.
    pub fn apply_f(&self, h_fn: impl Fn(f64) -> f64, v: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let mut out = vec![h_fn(mean) * self.tail_share(); v.len()];
        let scale = self.alpha * self.delta().powf(self.alpha);
        for (k, w) in self.each() {
            let inner: Vec<f64> = k.average(g, v).into_iter().map(&h_fn).collect();
            for (o, x) in out.iter_mut().zip(k.average(g, &inner)) {
                *o += scale * w * x;
            }
        }
        out
    }

    /// Derivative of [`Self::apply_f`] at `f` in direction `phi`, given `H'`.
    pub fn apply_df(&self, h_prime: impl Fn(f64) -> f64, f: &[f64], phi: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let n = f.len() as f64;
        let mean_f = f.iter().sum::<f64>() / n;
        let mean_p = phi.iter().sum::<f64>() / n;
        let mut out = vec![h_prime(mean_f) * mean_p * self.tail_share(); f.len()];
        let scale = self.alpha * self.delta().powf(self.alpha);
        for (k, w) in self.each() {
            let af = k.average(g, f);
            let ap = k.average(g, phi);
            let inner: Vec<f64> = af.iter().zip(&ap).map(|(a, b)| h_prime(*a) * b).collect();
            for (o, x) in out.iter_mut().zip(k.average(g, &inner)) {
                *o += scale * w * x;
            }
        }
        out
    }
}

/// Result of a truncated nonlocal operator.
#[derive(Clone, Debug)]
pub struct NonlocalResult {
    pub field: GridFn,
    /// Bound on the neglected contribution of radii beyond `r_max`.
    pub tail_bound: f64,
    pub nodes: usize,
}

/// `D^(alpha, delta) phi = V_1 ∫_delta^r_max (<<phi>>(x, r) - phi(x)) r^(-alpha-1) dr`.
///
/// Returns the zero field when `delta >= r_max`.
pub fn op_d_alpha_delta(
    phi: &GridFn,
    alpha: f64,
    delta: f64,
    r_max: f64,
    per_decade: usize,
) -> Result<NonlocalResult> {
    let op = RadialOperator::new(&phi.grid, alpha, delta, r_max, per_decade)?;
    Ok(NonlocalResult {
        field: GridFn { grid: phi.grid, values: op.apply_d(&phi.values) },
        tail_bound: op.tail_bound(&phi.values),
        nodes: op.nodes(),
    })
}

/// `F^(delta)(f) = alpha ∫_1^∞ <H(<f>)>(x, delta r) r^(-alpha-1) dr`.
///
/// Radii `delta r` beyond `r_max` are represented by `H` of the global mean of
/// `f`, so constants are reproduced exactly.
pub fn f_delta(
    h_fn: impl Fn(f64) -> f64,
    f: &GridFn,
    alpha: f64,
    delta: f64,
    r_max: f64,
    per_decade: usize,
) -> Result<GridFn> {
    let op = RadialOperator::new(&f.grid, alpha, delta, r_max, per_decade)?;
    Ok(GridFn { grid: f.grid, values: op.apply_f(h_fn, &f.values) })
}

/// Tabulated radial kernels `Phi(s)` and `Phi^(delta)(s)` of the nonlocal operator:
/// `D^(alpha,delta) phi(x) = ∫ Phi^(delta)(|x-y|) (phi(y) - phi(x)) dy`.
#[derive(Clone, Debug)]
pub struct NonlocalKernel {
    pub d: usize,
    pub alpha: f64,
    pub delta: f64,
    pub separations: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_delta: Vec<f64>,
}

impl NonlocalKernel {
    pub fn tabulate(d: usize, alpha: f64, delta: f64, separations: &[f64]) -> Result<Self> {
        let v1 = unit_ball_volume(d)?;
        let eval = |s: f64, lower: f64| -> f64 {
            // V_1 ∫ V_r(s) / V_r^2 r^(-alpha-1) dr from max(lower, s/2)
            let a = lower.max(s / 2.0);
            radial_integral(a, alpha + d as f64, |r| {
                let ov = crate::lattice::ball_overlap_volume(d, r, s).unwrap_or(0.0);
                v1 * ov / (v1 * v1 * r.powi(2 * d as i32)) * r.powf(-alpha - 1.0)
            })
        };
        let phi: Vec<f64> = separations.iter().map(|&s| eval(s, 0.0)).collect();
        let phi_delta: Vec<f64> = separations.iter().map(|&s| eval(s, delta)).collect();
        Ok(NonlocalKernel { d, alpha, delta, separations: separations.to_vec(), phi, phi_delta })
    }
}

/// `∫_a^∞ g(r) dr` for integrands decaying like `r^(-beta-1)`, via the
/// substitution `r = a v^(-1/beta)` which makes the tail integrand smooth.
pub fn radial_integral(a: f64, beta: f64, g: impl Fn(f64) -> f64) -> f64 {
    if a <= 0.0 {
        return f64::INFINITY;
    }
    let out = quadrature::double_exponential::integrate(
        |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            let r = a * v.powf(-1.0 / beta);
            g(r) * (a / beta) * v.powf(-1.0 / beta - 1.0)
        },
        0.0,
        1.0,
        1e-14,
    );
    out.integral
}
