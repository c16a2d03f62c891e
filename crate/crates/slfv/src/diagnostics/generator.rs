use crate::error::{Error, Result};
use crate::events::{EventLaw, RadiusLaw, SelectionModel};
use crate::lattice::{BallKernel, FrequencyField, TestFunction, TorusGrid, MIN_RESOLUTION};

/// Rates of `<q, phi>` under the event dynamics, per unit (raw) time.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorRates {
    /// `d/dt E <q, phi>`.
    pub drift: f64,
    /// `d/dt E (Δ<q, phi>)^2`, the predictable quadratic variation rate.
    pub quadratic: f64,
    /// Total event rate on the torus.
    pub event_rate: f64,
}

impl GeneratorRates {
    pub fn per_event_mean(&self) -> f64 {
        self.drift / self.event_rate
    }
    pub fn per_event_second_moment(&self) -> f64 {
        self.quadratic / self.event_rate
    }
}

/// Discrete balls the engine can use, each with its radius-measure mass per
/// unit area. Stable radii are grouped by the stencil they produce.
pub fn radius_classes(law: &EventLaw, grid: &TorusGrid) -> Result<Vec<(BallKernel, f64)>> {
    let h = grid.h();
    match law.radius {
        RadiusLaw::Fixed(r) => Ok(vec![(BallKernel::new(grid, r)?, 1.0)]),
        RadiusLaw::StablePareto { alpha, r_max } => {
            let d = grid.d();
            let b = d as f64 + alpha;
            let tail = |r: f64| r.powf(-b) / b;
            let floor = MIN_RESOLUTION * h;
            // stencil {|k|^2 <= m - 1} for (r/h)^2 in (m - 1, m]
            let m_of = |r: f64| ((r / h).powi(2)).ceil() as u64;
            let mut out: Vec<(BallKernel, f64)> = Vec::new();
            // radii below the floor are clamped up to it
            let mut lo = 1.0f64;
            if floor > 1.0 {
                let mass = tail(1.0) - tail(floor.min(r_max));
                out.push((BallKernel::new(grid, floor)?, mass));
                lo = floor;
            }
            if lo >= r_max {
                return Ok(out);
            }
            let (m_lo, m_hi) = (m_of(lo), m_of(r_max));
            for m in m_lo..=m_hi {
                let a = ((m - 1) as f64).sqrt() * h;
                let c = (m as f64).sqrt() * h;
                let (a, c) = (a.max(lo), c.min(r_max));
                if c <= a {
                    continue;
                }
                let mass = tail(a) - tail(c);
                let k = BallKernel::new(grid, ((m as f64) - 0.5).sqrt() * h)?;
                match out.last_mut() {
                    Some((prev, pm)) if prev.count() == k.count() => *pm += mass,
                    _ => out.push((k, mass)),
                }
            }
            Ok(out)
        }
    }
}

/// Exact drift and quadratic-variation rates of `<q, phi>` for the event
/// engine at state `q`, including selective and mutation events.
pub fn generator_rates(q: &FrequencyField, phi: &TestFunction, law: &EventLaw, model: &SelectionModel) -> Result<GeneratorRates> {
    let g = *q.grid();
    if *phi.grid() != g {
        return Err(Error::GridMismatch);
    }
    let hd = g.cell_volume();
    let table = law.weights.table();
    let phi_q: Vec<f64> = phi.values().iter().zip(q.values()).map(|(a, b)| a * b).collect();
    let (mut drift, mut quad, mut mass_total) = (0.0, 0.0, 0.0);
    for (k, mass) in radius_classes(law, &g)? {
        let a = k.sum(&g, phi.values());
        let b = k.sum(&g, &phi_q);
        let avg = k.average(&g, q.values());
        let (mut dk, mut qk) = (0.0, 0.0);
        for c in 0..g.cells() {
            for &(kind, w) in &table {
                if w == 0.0 {
                    continue;
                }
                let (m1, m2) = model.target_moments(kind, avg[c]);
                dk += w * (m1 * a[c] - b[c]);
                qk += w * (m2 * a[c] * a[c] - 2.0 * m1 * a[c] * b[c] + b[c] * b[c]);
            }
        }
        // centers uniform per unit area; each center cell has area h^d
        drift += mass * hd * law.u * hd * dk;
        quad += mass * hd * law.u * law.u * hd * hd * qk;
        mass_total += mass;
    }
    Ok(GeneratorRates { drift, quadratic: quad, event_rate: mass_total * g.volume() })
}

/// Mean ball volume under the radius law, as realized on the grid.
pub fn mean_event_volume(law: &EventLaw, grid: &TorusGrid) -> Result<f64> {
    let classes = radius_classes(law, grid)?;
    let m: f64 = classes.iter().map(|(_, w)| w).sum();
    Ok(classes.iter().map(|(k, w)| k.volume() * w).sum::<f64>() / m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::events::KindWeights;

    #[test]
    fn constant_field_drift_is_selection_only() {
        let g = TorusGrid::new(1, 170, 20.0).unwrap();
        let w = 0.3;
        let q = FrequencyField::constant(g, w).unwrap();
        let phi = TestFunction::gaussian(g, &[10.0], 1.5);
        let (u, s) = (0.4, 0.2);
        let law = EventLaw { u, weights: KindWeights::Haploid { s }, radius: RadiusLaw::Fixed(1.0) };
        let r = generator_rates(&q, &phi, &law, &SelectionModel::Genic).unwrap();
        let v = BallKernel::new(&g, 1.0).unwrap().volume();
        let expect = -u * v * s * w * (1.0 - w) * phi.as_grid_fn().integral();
        assert!((r.drift - expect).abs() < 1e-13, "{} vs {expect}", r.drift);
        assert!((r.event_rate - 20.0).abs() < 1e-12);
    }

    #[test]
    fn zero_impact_gives_zero_rates() {
        let g = TorusGrid::new(1, 100, 10.0).unwrap();
        let q = FrequencyField::from_fn(g, |x| 0.5 + 0.4 * x[0].sin()).unwrap();
        let phi = TestFunction::gaussian(g, &[5.0], 1.0);
        let law = EventLaw { u: 0.0, weights: KindWeights::Haploid { s: 0.1 }, radius: RadiusLaw::Fixed(1.0) };
        let r = generator_rates(&q, &phi, &law, &SelectionModel::Genic).unwrap();
        assert_eq!((r.drift, r.quadratic), (0.0, 0.0));
    }

    #[test]
    fn stable_classes_cover_the_radius_mass() {
        let g = TorusGrid::new(1, 200, 20.0).unwrap();
        let law = EventLaw {
            u: 0.5,
            weights: KindWeights::Haploid { s: 0.0 },
            radius: RadiusLaw::StablePareto { alpha: 0.5, r_max: 4.0 },
        };
        let classes = radius_classes(&law, &g).unwrap();
        let total: f64 = classes.iter().map(|c| c.1).sum();
        assert!((total - law.radius_mass(1)).abs() < 1e-14);
        for w in classes.windows(2) {
            assert!(w[1].0.count() > w[0].0.count());
        }
    }
}
