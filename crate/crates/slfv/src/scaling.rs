//! Scaling parameters indexed by `N` and the maps between raw and rescaled units.
//!
//! Raw coordinates are those of the simulated process (radius `R`, impact
//! `u_N = eps u`, selection `s_N`). The rescaled process reads raw time
//! `t / eta` and raw space `x / delta`.

use crate::error::{Error, Result};
use crate::lattice::{unit_ball_volume, BallKernel, TorusGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regime {
    Brownian,
    Stable { alpha: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScalingParams {
    pub d: usize,
    pub eps: f64,
    pub delta: f64,
    /// Base impact.
    pub u: f64,
    /// Base selection strength.
    pub s: f64,
    /// Base radius `R` (Brownian) or lower radius cutoff (stable, usually 1).
    pub radius: f64,
    pub regime: Regime,
    /// Ball volume entering the PDE prefactor `u V_R`.
    pub volume: f64,
    /// Radius entering the diffusion coefficient `R^2 / (d + 2)`.
    pub diffusion_radius: f64,
}

impl ScalingParams {
    pub fn brownian(d: usize, eps: f64, delta: f64, u: f64, s: f64, radius: f64) -> Result<Self> {
        let p = ScalingParams {
            d,
            eps,
            delta,
            u,
            s,
            radius,
            regime: Regime::Brownian,
            volume: unit_ball_volume(d)? * radius.powi(d as i32),
            diffusion_radius: radius,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn stable(d: usize, eps: f64, delta: f64, u: f64, s: f64, alpha: f64) -> Result<Self> {
        let p = ScalingParams {
            d,
            eps,
            delta,
            u,
            s,
            radius: 1.0,
            regime: Regime::Stable { alpha },
            volume: unit_ball_volume(d)?,
            diffusion_radius: 1.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        unit_ball_volume(self.d)?;
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return bad(format!("eps must lie in (0, 1], got {}", self.eps));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if !(self.u >= 0.0 && self.u <= 1.0) {
            return bad(format!("u must lie in [0, 1], got {}", self.u));
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return bad(format!("s must be nonnegative, got {}", self.s));
        }
        if !(self.radius > 0.0) {
            return bad(format!("radius must be positive, got {}", self.radius));
        }
        if let Regime::Stable { alpha } = self.regime {
            check_alpha(alpha, self.d)?;
        }
        Ok(())
    }

    /// Replace the continuum `V_R` and `R` by the values realized by the
    /// discrete ball on `raw_grid`, so that the centering equation is the exact
    /// mean dynamics of the simulated process.
    pub fn with_grid_constants(mut self, raw_grid: &TorusGrid) -> Result<Self> {
        let k = BallKernel::new(raw_grid, self.radius)?;
        self.volume = k.volume();
        let d = self.d as f64;
        // double-ball second moment 2 d R^2 / (d + 2)
        self.diffusion_radius = (k.double_moment2() * (d + 2.0) / (2.0 * d)).sqrt();
        Ok(self)
    }

    fn power(&self) -> f64 {
        match self.regime {
            Regime::Brownian => 2.0,
            Regime::Stable { alpha } => alpha,
        }
    }

    pub fn u_n(&self) -> f64 {
        self.eps * self.u
    }
    pub fn s_n(&self) -> f64 {
        self.delta.powf(self.power()) * self.s
    }
    pub fn r_n(&self) -> f64 {
        self.delta * self.radius
    }
    /// Time normalization: rescaled time `t` reads raw time `t / eta`.
    pub fn eta(&self) -> f64 {
        self.eps * self.delta.powf(self.power())
    }
    pub fn tau(&self) -> f64 {
        match self.regime {
            Regime::Brownian => self.eps * self.eps * self.delta.powi(self.d as i32),
            Regime::Stable { alpha } => self.eps * self.eps * self.delta.powf(alpha),
        }
    }

    /// Fluctuation normalization multiplying `q - f`.
    pub fn fluctuation_scale(&self) -> f64 {
        match self.regime {
            Regime::Brownian => (self.eps * self.delta.powi(self.d as i32 - 2)).powf(-0.5),
            Regime::Stable { .. } => self.eps.powf(-0.5),
        }
    }

    pub fn raw_time(&self, t: f64) -> f64 {
        t / self.eta()
    }
    pub fn rescaled_time(&self, t_raw: f64) -> f64 {
        t_raw * self.eta()
    }

    /// `tau / eta`, to be compared against `delta^(2d)` for the Brownian regime.
    pub fn noise_ratio(&self) -> f64 {
        self.tau() / self.eta()
    }

    /// Whether the stable-regime condition `eps = o(delta^(2 alpha))` is met
    /// with the given margin, i.e. `eps <= margin * delta^(2 alpha)`.
    pub fn stable_condition(&self, margin: f64) -> bool {
        match self.regime {
            Regime::Stable { alpha } => self.eps <= margin * self.delta.powf(2.0 * alpha),
            Regime::Brownian => false,
        }
    }
}

/// `alpha` must lie in `(0, min(2, d))`.
pub fn check_alpha(alpha: f64, d: usize) -> Result<()> {
    let hi = 2f64.min(d as f64);
    if !(alpha > 0.0 && alpha < hi) {
        return Err(Error::InvalidParameter(format!(
            "α must lie in (0, min(2,d)); got α = {alpha} with d = {d}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let p = ScalingParams::brownian(2, 0.01, 0.5, 0.8, 2.0, 1.5).unwrap();
        assert!((p.u_n() - 0.008).abs() < 1e-15);
        assert!((p.s_n() - 0.5).abs() < 1e-15);
        assert!((p.r_n() - 0.75).abs() < 1e-15);
        assert!((p.eta() - 0.0025).abs() < 1e-15);
        assert!((p.tau() - 0.0001 * 0.25).abs() < 1e-15);
        assert!((p.raw_time(1.0) - 400.0).abs() < 1e-9);
    }

    #[test]
    fn time_maps() {
        let id = ScalingParams::brownian(1, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert_eq!(id.raw_time(3.0), 3.0);
        let b = ScalingParams::brownian(1, 1.0, 0.5, 1.0, 1.0, 1.0).unwrap();
        assert!((b.raw_time(1.0) - 4.0).abs() < 1e-12);
        let s = ScalingParams::stable(1, 1.0, 0.5, 1.0, 1.0, 0.9).unwrap();
        assert!((s.raw_time(1.0) - 0.5f64.powf(-0.9)).abs() < 1e-12);
        let s1 = ScalingParams::stable(2, 1.0, 0.5, 1.0, 1.0, 1.0).unwrap();
        assert!((s1.raw_time(1.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn alpha_range() {
        assert!(check_alpha(2.0, 1).is_err());
        assert!(check_alpha(1.0, 1).is_err());
        assert!(check_alpha(0.5, 1).is_ok());
        assert!(check_alpha(1.5, 2).is_ok());
        let msg = check_alpha(2.0, 1).unwrap_err().to_string();
        assert!(msg.contains("α must lie in (0, min(2,d))"));
    }

    #[test]
    fn grid_constants_converge() {
        let p = ScalingParams::brownian(1, 1.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let g = TorusGrid::with_spacing(1, 40.0, 1.0 / 8.5).unwrap();
        let q = p.with_grid_constants(&g).unwrap();
        assert!((q.volume - 2.0).abs() < 1e-12);
        // discrete second moment of 17 cells: R_eff^2 = R^2 - h^2/4
        let h = g.h();
        assert!((q.diffusion_radius.powi(2) - (1.0 - h * h / 4.0)).abs() < 1e-12);
    }
}
