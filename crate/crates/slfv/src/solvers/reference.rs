//! Closed forms for a one-dimensional Gaussian bump, used as references for
//! the grid operators.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use super::ops::radial_integral;

/// `exp(-(x - c)^2 / (2 w^2))` on the line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gaussian1d {
    pub center: f64,
    pub width: f64,
}

impl Gaussian1d {
    pub fn new(center: f64, width: f64) -> Self {
        Gaussian1d { center, width }
    }

    fn z(&self, a: f64) -> f64 {
        a / self.width
    }

    fn at_offset(&self, a: f64) -> f64 {
        (-0.5 * self.z(a) * self.z(a)).exp()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.at_offset(x - self.center)
    }

    /// Second derivative.
    pub fn second(&self, x: f64) -> f64 {
        let a = x - self.center;
        let z = self.z(a);
        (z * z - 1.0) / (self.width * self.width) * self.at_offset(a)
    }

    /// Double ball average at offset `a = x - c` and radius `r`: the average
    /// against the triangle density `(2r - |s|)/(4 r^2)` on `[-2r, 2r]`.
    pub fn double_average_offset(&self, a: f64, r: f64) -> f64 {
        let w = self.width;
        let i0 = |p: f64, q: f64| w * (PI / 2.0).sqrt() * (libm::erf(q / w * FRAC_1_SQRT_2) - libm::erf(p / w * FRAC_1_SQRT_2));
        let i1 = |p: f64, q: f64| w * w * (self.at_offset(p) - self.at_offset(q));
        let right = (2.0 * r + a) * i0(a, a + 2.0 * r) - i1(a, a + 2.0 * r);
        let left = (2.0 * r - a) * i0(a - 2.0 * r, a) + i1(a - 2.0 * r, a);
        (right + left) / (4.0 * r * r)
    }

    /// `<<phi>>(x, r) - phi(x)`, by a moment series for small `r` where the
    /// closed form cancels.
    pub fn double_average_excess(&self, a: f64, r: f64) -> f64 {
        let w = self.width;
        if r < 0.1 * w {
            let z = self.z(a);
            let (z2, z4, z6, z8) = (z * z, z.powi(4), z.powi(6), z.powi(8));
            let he2 = z2 - 1.0;
            let he4 = z4 - 6.0 * z2 + 3.0;
            let he6 = z6 - 15.0 * z4 + 45.0 * z2 - 15.0;
            let he8 = z8 - 28.0 * z6 + 210.0 * z4 - 420.0 * z2 + 105.0;
            // triangle moments: 2r^2/3, 16r^4/15, 16r^6/7, 196r^8/45
            let t = r / w;
            let series = (2.0 / 3.0) * t * t * he2 / 2.0
                + (16.0 / 15.0) * t.powi(4) * he4 / 24.0
                + (16.0 / 7.0) * t.powi(6) * he6 / 720.0
                + (196.0 / 45.0) * t.powi(8) * he8 / 40320.0;
            return series * self.at_offset(a);
        }
        self.double_average_offset(a, r) - self.at_offset(a)
    }

    /// `2 ∫_lo^hi (<<phi>>(x, r) - phi(x)) r^(-alpha-1) dr`; `hi` may be infinite.
    pub fn d_alpha(&self, x: f64, alpha: f64, lo: f64, hi: f64) -> f64 {
        let a = x - self.center;
        let g = |r: f64| self.double_average_excess(a, r) * r.powf(-alpha - 1.0);
        let split = (4.0 * self.width).max(lo);
        let mut total = 0.0;
        let inner_hi = split.min(hi);
        if inner_hi > lo {
            total += quadrature::double_exponential::integrate(g, lo, inner_hi, 1e-13).integral;
        }
        if hi > split {
            total += radial_integral(split, alpha, g);
            if hi.is_finite() {
                total -= radial_integral(hi, alpha, g);
            }
        }
        2.0 * total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_average_tends_to_value() {
        let g = Gaussian1d::new(0.0, 1.0);
        for &a in &[0.0, 0.7, 2.5] {
            let exact = g.double_average_offset(a, 0.3) - g.value(a);
            let series = g.double_average_excess(a, 0.09999);
            let closed = g.double_average_offset(a, 0.09999) - g.value(a);
            assert!((series - closed).abs() < 1e-10, "{series} {closed}");
            assert!(exact.is_finite());
        }
    }

    #[test]
    fn double_average_matches_quadrature() {
        let g = Gaussian1d::new(1.0, 0.8);
        let (x, r) = (1.9, 0.6);
        let f = |s: f64| (2.0 * r - s.abs()) / (4.0 * r * r) * g.value(x + s);
        // split at the kink of the triangle
        let q = quadrature::double_exponential::integrate(f, -2.0 * r, 0.0, 1e-14).integral
            + quadrature::double_exponential::integrate(f, 0.0, 2.0 * r, 1e-14).integral;
        assert!((q - g.double_average_offset(x - 1.0, r)).abs() < 1e-13);
    }
}
