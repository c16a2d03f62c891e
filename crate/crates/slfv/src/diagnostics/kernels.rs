use crate::error::{Error, Result};
use crate::lattice::{ball_overlap_volume, BallKernel, FrequencyField, TorusGrid};
use crate::solvers::{radial_integral, RadialQuadrature};

/// Ball averages of one field at one radius, for repeated kernel evaluations.
#[derive(Clone, Debug)]
pub struct CovarianceKernel {
    grid: TorusGrid,
    kernel: BallKernel,
    q: Vec<f64>,
    avg: Vec<f64>,
}

impl CovarianceKernel {
    pub fn new(q: &FrequencyField, r: f64) -> Result<Self> {
        let grid = *q.grid();
        let kernel = BallKernel::new(&grid, r)?;
        kernel.check_resolution()?;
        Ok(Self::unchecked(q, kernel))
    }

    fn unchecked(q: &FrequencyField, kernel: BallKernel) -> Self {
        let grid = *q.grid();
        let avg = kernel.average(&grid, q.values());
        CovarianceKernel { grid, kernel, q: q.values().to_vec(), avg }
    }

    pub fn kernel(&self) -> &BallKernel {
        &self.kernel
    }

    /// `h^d * sum over cells c with z1, z2 in B(c)` of `g(<q>(c))`.
    fn intersection_sum(&self, z1: usize, z2: usize, g: impl Fn(f64) -> f64) -> f64 {
        let off = self.grid.cell_offset(z1, z2);
        if off.iter().any(|&k| k.unsigned_abs() as usize > 2 * self.kernel.reach()) {
            return 0.0;
        }
        let mut acc = 0.0;
        for &o in self.kernel.offsets() {
            let c = self.grid.shift(z1, o);
            if self.kernel.contains(self.grid.cell_offset(c, z2)) {
                acc += g(self.avg[c]);
            }
        }
        acc * self.grid.cell_volume()
    }

    /// `V^2 sigma`, i.e. the unnormalized intersection integral.
    fn sigma_raw(&self, z1: usize, z2: usize) -> f64 {
        let (a, b) = (self.q[z1], self.q[z2]);
        self.intersection_sum(z1, z2, |w| w * (1.0 - a) * (1.0 - b) + (1.0 - w) * a * b)
    }

    fn rho_raw(&self, z1: usize, z2: usize) -> f64 {
        let (a, b) = (self.q[z1], self.q[z2]);
        self.intersection_sum(z1, z2, |w| {
            w * w * (1.0 - a) * (1.0 - b) + 2.0 * w * (1.0 - w) * (0.5 - a) * (0.5 - b) + (1.0 - w) * (1.0 - w) * a * b
        })
    }

    pub fn sigma(&self, z1: usize, z2: usize) -> f64 {
        let v = self.kernel.volume();
        self.sigma_raw(z1, z2) / (v * v)
    }

    pub fn rho(&self, z1: usize, z2: usize) -> f64 {
        let v = self.kernel.volume();
        self.rho_raw(z1, z2) / (v * v)
    }

    /// `V^2 ∬ phi(z1) phi(z2) sigma (or rho) dz1 dz2` by direct pair enumeration.
    pub fn pair_integral(&self, phi: &[f64], diploid: bool) -> f64 {
        let g = &self.grid;
        let hd = g.cell_volume();
        let mut total = 0.0;
        // pairs at most two radii apart
        let ball2 = BallKernel::new(g, 2.0 * self.kernel.radius() + g.h()).ok();
        for z1 in 0..g.cells() {
            if phi[z1] == 0.0 {
                continue;
            }
            let mut row = 0.0;
            let mut visit = |z2: usize| {
                let k = if diploid { self.rho_raw(z1, z2) } else { self.sigma_raw(z1, z2) };
                row += phi[z2] * k;
            };
            match &ball2 {
                Some(b) => b.offsets().iter().for_each(|&o| visit(g.shift(z1, o))),
                None => (0..g.cells()).for_each(&mut visit),
            }
            total += phi[z1] * row;
        }
        total * hd * hd
    }
}

/// `sigma^(r)_{z1,z2}(q)` by cell quadrature over the discrete intersection.
pub fn sigma_r(q: &FrequencyField, z1: usize, z2: usize, r: f64) -> Result<f64> {
    Ok(CovarianceKernel::new(q, r)?.sigma(z1, z2))
}

/// Diploid analogue of [`sigma_r`] with the three-genotype integrand.
pub fn rho_r(q: &FrequencyField, z1: usize, z2: usize, r: f64) -> Result<f64> {
    Ok(CovarianceKernel::new(q, r)?.rho(z1, z2))
}

/// Radial settings shared by the stable-regime kernels.
#[derive(Clone, Copy, Debug)]
pub struct RadialSettings {
    pub r_max: f64,
    pub per_decade: usize,
}

impl RadialSettings {
    pub fn new(r_max: f64) -> Self {
        RadialSettings { r_max, per_decade: 48 }
    }
}

fn center_distance(grid: &TorusGrid, z1: usize, z2: usize) -> f64 {
    grid.distance(&grid.center(z1)[..grid.d()], &grid.center(z2)[..grid.d()])
}

/// `sigma^(alpha,delta) = ∫_{max(delta,|z1-z2|/2)}^{r_max} V_r^2 sigma^(r) r^(-d-alpha-1) dr`.
pub fn sigma_alpha_delta(
    q: &FrequencyField,
    z1: usize,
    z2: usize,
    alpha: f64,
    delta: f64,
    radial: RadialSettings,
) -> Result<f64> {
    let g = *q.grid();
    crate::scaling::check_alpha(alpha, g.d())?;
    let lo = delta.max(center_distance(&g, z1, z2) / 2.0);
    if lo >= radial.r_max {
        return Ok(0.0);
    }
    if delta < crate::lattice::MIN_RESOLUTION * g.h() {
        let ratio = delta / g.h();
        return Err(Error::Resolution { r: delta, ratio, min: crate::lattice::MIN_RESOLUTION });
    }
    let quad = RadialQuadrature::new(&g, alpha + g.d() as f64, lo, radial.r_max, radial.per_decade)?;
    let mut acc = 0.0;
    for (&r, &w) in quad.nodes.iter().zip(&quad.weights) {
        let k = CovarianceKernel::unchecked(q, BallKernel::new(&g, r)?);
        acc += w * k.sigma_raw(z1, z2);
    }
    Ok(acc)
}

/// `K_alpha(z1, z2) = ∫_{|z1-z2|/2}^∞ V_r(z1,z2) r^(-d-alpha-1) dr`.
pub fn k_alpha(z1: &[f64], z2: &[f64], alpha: f64) -> Result<f64> {
    let d = z1.len();
    if z2.len() != d {
        return Err(Error::InvalidParameter("points of different dimension".into()));
    }
    crate::scaling::check_alpha(alpha, d)?;
    let s = z1.iter().zip(z2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    if s == 0.0 {
        return Err(Error::InvalidParameter("K_alpha is singular at coincident points".into()));
    }
    Ok(radial_integral(s / 2.0, alpha, |r| {
        ball_overlap_volume(d, r, s).unwrap_or(0.0) * r.powf(-(d as f64) - alpha - 1.0)
    }))
}

/// The constant `C_{d,alpha}` with `K_alpha = C / |z1 - z2|^alpha`.
pub fn k_alpha_constant(d: usize, alpha: f64) -> Result<f64> {
    let mut z2 = vec![0.0; d];
    z2[0] = 1.0;
    k_alpha(&vec![0.0; d], &z2, alpha)
}

/// `[f]_alpha(z1, z2)`: the offspring type probability for an event covering
/// both cells, as a ratio of radial integrals on shared nodes (so constants
/// are reproduced exactly and the value lies within the range of `f`).
pub fn alpha_average(f: &FrequencyField, z1: usize, z2: usize, alpha: f64, radial: RadialSettings) -> Result<f64> {
    let g = *f.grid();
    crate::scaling::check_alpha(alpha, g.d())?;
    if z1 == z2 {
        return Err(Error::InvalidParameter("[f]_alpha is defined for distinct points".into()));
    }
    let lo = center_distance(&g, z1, z2) / 2.0;
    let quad = RadialQuadrature::unchecked(&g, alpha + g.d() as f64, lo, radial.r_max, radial.per_decade)?;
    let (mut num, mut den) = (0.0, 0.0);
    for (&r, &w) in quad.nodes.iter().zip(&quad.weights) {
        let k = CovarianceKernel::unchecked(f, BallKernel::new(&g, r)?);
        num += w * k.intersection_sum(z1, z2, |a| a);
        den += w * k.intersection_sum(z1, z2, |_| 1.0);
    }
    if den <= 0.0 {
        return Err(Error::InvalidParameter("no event radius up to r_max covers both points".into()));
    }
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_field(g: TorusGrid, seed: u64) -> FrequencyField {
        let mut x = seed;
        let v = (0..g.cells())
            .map(|_| {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (x >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect();
        FrequencyField::new(g, v).unwrap()
    }

    #[test]
    fn trivial_examples() {
        let g = TorusGrid::new(1, 200, 20.0).unwrap();
        let w = 0.3;
        let c = FrequencyField::constant(g, w).unwrap();
        let k = CovarianceKernel::new(&c, 1.0).unwrap();
        let v = k.kernel().volume();
        assert!((k.sigma(50, 50) - w * (1.0 - w) / v).abs() < 1e-14);
        assert_eq!(k.sigma(50, 50 + 21), 0.0);
        let half = CovarianceKernel::new(&FrequencyField::constant(g, 0.5).unwrap(), 1.0).unwrap();
        assert!((half.rho(7, 7) - 1.0 / (8.0 * v)).abs() < 1e-14);
        assert_eq!(sigma_r(&FrequencyField::constant(g, 0.0).unwrap(), 3, 4, 1.0).unwrap(), 0.0);
        assert_eq!(rho_r(&FrequencyField::constant(g, 1.0).unwrap(), 3, 4, 1.0).unwrap(), 0.0);
        assert!(sigma_r(&c, 3, 4, 0.5).is_err());
    }

    #[test]
    fn rho_is_half_sigma_on_constants() {
        let g = TorusGrid::new(2, 40, 4.0).unwrap();
        let c = FrequencyField::constant(g, 0.37).unwrap();
        let k = CovarianceKernel::new(&c, 0.9).unwrap();
        for z2 in [0, 1, 5, 41, 85] {
            assert_eq!(k.rho(0, z2) * 2.0, k.sigma(0, z2));
        }
    }

    #[test]
    fn symmetric_and_nonnegative() {
        let g = TorusGrid::new(2, 32, 4.0).unwrap();
        let q = random_field(g, 9);
        let k = CovarianceKernel::new(&q, 1.0).unwrap();
        for (a, b) in [(0, 1), (3, 70), (100, 133), (5, 5)] {
            assert!((k.sigma(a, b) - k.sigma(b, a)).abs() < 1e-15);
            assert!((k.rho(a, b) - k.rho(b, a)).abs() < 1e-15);
            assert!(k.sigma(a, b) >= 0.0);
        }
    }

    #[test]
    fn sigma_alpha_delta_bound_and_diagonal() {
        let g = TorusGrid::new(1, 800, 40.0).unwrap();
        let h = g.h();
        let (alpha, delta) = (0.5, 20.5 * h);
        let q = random_field(g, 3);
        let radial = RadialSettings::new(8.0);
        let v1 = 2.0;
        for z2 in [400, 405, 430, 480] {
            let v = sigma_alpha_delta(&q, 400, z2, alpha, delta, radial).unwrap();
            let sep = (z2 - 400) as f64 * h;
            let bound = delta.max(sep / 2.0).powf(-alpha) * v1 / alpha;
            assert!(v >= 0.0 && v <= bound, "{v} > {bound}");
        }
        let w = 0.3;
        let c = FrequencyField::constant(g, w).unwrap();
        let delta = 1.0 + 0.5 * h;
        let got = sigma_alpha_delta(&c, 400, 400, alpha, delta, RadialSettings { r_max: 8.0, per_decade: 200 }).unwrap();
        let oracle = quadrature::double_exponential::integrate(
            |r: f64| w * (1.0 - w) * 2.0 * r * r.powf(-alpha - 2.0),
            delta,
            8.0,
            1e-12,
        )
        .integral;
        assert!((got - oracle).abs() < 1e-3 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn k_alpha_homogeneity_and_unit_value() {
        for d in [1, 2] {
            for alpha in [0.5, 1.0f64.min(d as f64 - 0.01)] {
                let a = k_alpha(&vec![0.0; d], &[vec![0.7], vec![0.0; d - 1]].concat(), alpha).unwrap();
                let b = k_alpha(&vec![0.0; d], &[vec![1.4], vec![0.0; d - 1]].concat(), alpha).unwrap();
                assert!((b / a - 2f64.powf(-alpha)).abs() < 1e-9);
            }
        }
        // d = 1: ∫_{1/2}^∞ (2r - 1) r^{-2.5} dr = 2 * 2 * sqrt 2 - (2/3) 2^{1.5}
        let c = k_alpha_constant(1, 0.5).unwrap();
        let exact = 4.0 * 2f64.sqrt() - (2.0 / 3.0) * 2f64.powf(1.5);
        assert!((c - exact).abs() < 1e-10, "{c} vs {exact}");
        assert!(k_alpha(&[1.0], &[1.0], 0.5).is_err());
    }

    #[test]
    fn alpha_average_properties() {
        let g = TorusGrid::new(1, 200, 20.0).unwrap();
        let radial = RadialSettings::new(5.0);
        let c = FrequencyField::constant(g, 0.42).unwrap();
        assert!((alpha_average(&c, 10, 30, 0.5, radial).unwrap() - 0.42).abs() < 1e-14);
        let q = random_field(g, 5);
        let (lo, hi) = q.min_max();
        let v = alpha_average(&q, 10, 30, 0.5, radial).unwrap();
        assert!(v >= lo && v <= hi);
        assert!(alpha_average(&q, 10, 10, 0.5, radial).is_err());
    }
}
