use crate::error::{Error, Result};
use crate::lattice::TorusGrid;
use crate::scaling::check_alpha;

use super::rng::RngStream;

/// Most parents any mechanism draws (diploid selective events use four).
pub const MAX_PARENTS: usize = 4;
/// Uniforms pre-drawn per event: a location and a type per parent, plus one.
pub const MAX_UNIFORMS: usize = 2 * MAX_PARENTS + 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RadiusLaw {
    Fixed(f64),
    /// Density proportional to `r^-(d+alpha+1)` on `[1, r_max]`.
    StablePareto { alpha: f64, r_max: f64 },
}

/// Per-event kind probabilities (the neutral weight is the remainder).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KindWeights {
    Haploid { s: f64 },
    Diploid { s1: f64, s2: f64, nu1: f64, nu2: f64 },
}

impl KindWeights {
    pub fn non_neutral(&self) -> f64 {
        match *self {
            KindWeights::Haploid { s } => s,
            KindWeights::Diploid { s1, s2, nu1, nu2 } => s1 + s2 + nu1 + nu2,
        }
    }

    /// `(kind, probability)` for every kind, neutral first.
    pub fn table(&self) -> Vec<(EventKind, f64)> {
        match *self {
            KindWeights::Haploid { s } => {
                vec![(EventKind::Neutral, 1.0 - s), (EventKind::Selective, s)]
            }
            KindWeights::Diploid { s1, s2, nu1, nu2 } => vec![
                (EventKind::Neutral, 1.0 - s1 - s2 - nu1 - nu2),
                (EventKind::Selective1, s1),
                (EventKind::Selective2, s2),
                (EventKind::Mutation1, nu1),
                (EventKind::Mutation2, nu2),
            ],
        }
    }

    /// Categorical draw from one uniform.
    #[inline]
    pub fn pick(&self, u: f64) -> EventKind {
        match *self {
            KindWeights::Haploid { s } => {
                if u < s {
                    EventKind::Selective
                } else {
                    EventKind::Neutral
                }
            }
            KindWeights::Diploid { s1, s2, nu1, nu2 } => {
                let mut acc = s1;
                if u < acc {
                    return EventKind::Selective1;
                }
                acc += s2;
                if u < acc {
                    return EventKind::Selective2;
                }
                acc += nu1;
                if u < acc {
                    return EventKind::Mutation1;
                }
                acc += nu2;
                if u < acc {
                    return EventKind::Mutation2;
                }
                EventKind::Neutral
            }
        }
    }
}

/// Intensity of reproduction events: impact, kind weights and radius law.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EventLaw {
    pub u: f64,
    pub weights: KindWeights,
    pub radius: RadiusLaw,
}

impl EventLaw {
    pub fn new(u: f64, weights: KindWeights, radius: RadiusLaw, d: usize) -> Result<Self> {
        let law = EventLaw { u, weights, radius };
        law.validate(d)?;
        Ok(law)
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.u >= 0.0 && self.u <= 1.0) {
            return bad(format!("impact u must lie in [0, 1], got {}", self.u));
        }
        let ws: Vec<f64> = self.weights.table().iter().skip(1).map(|(_, w)| *w).collect();
        if ws.iter().any(|w| !(*w >= 0.0)) {
            return bad("kind weights must be nonnegative".into());
        }
        if self.weights.non_neutral() >= 1.0 {
            return bad(format!(
                "sum of non-neutral weights must be < 1, got {}",
                self.weights.non_neutral()
            ));
        }
        match self.radius {
            RadiusLaw::Fixed(r) if !(r > 0.0 && r.is_finite()) => {
                bad(format!("radius must be positive, got {r}"))
            }
            RadiusLaw::StablePareto { alpha, r_max } => {
                check_alpha(alpha, d)?;
                if !(r_max > 1.0) {
                    return bad(format!("r_max must exceed 1, got {r_max}"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Total mass of the radius measure.
    pub fn radius_mass(&self, d: usize) -> f64 {
        match self.radius {
            RadiusLaw::Fixed(_) => 1.0,
            RadiusLaw::StablePareto { alpha, r_max } => {
                let b = d as f64 + alpha;
                (1.0 - r_max.powf(-b)) / b
            }
        }
    }

    /// Mass of the radius measure beyond `r_max` relative to the kept mass.
    pub fn truncated_fraction(&self, d: usize) -> f64 {
        match self.radius {
            RadiusLaw::Fixed(_) => 0.0,
            RadiusLaw::StablePareto { alpha, r_max } => {
                let b = d as f64 + alpha;
                (r_max.powf(-b) / b) / self.radius_mass(d)
            }
        }
    }

    /// Inverse-CDF radius from a uniform `u`.
    #[inline]
    pub fn radius_from_uniform(&self, d: usize, u: f64) -> f64 {
        match self.radius {
            RadiusLaw::Fixed(r) => r,
            RadiusLaw::StablePareto { alpha, r_max } => {
                let b = d as f64 + alpha;
                (1.0 - u * (1.0 - r_max.powf(-b))).powf(-1.0 / b)
            }
        }
    }
}

/// Events per unit time on the whole torus.
pub fn total_event_rate(law: &EventLaw, grid: &TorusGrid) -> f64 {
    grid.volume() * law.radius_mass(grid.d())
}

/// Radius draw; fixed laws consume no randomness.
pub fn sample_radius(law: &EventLaw, d: usize, rng: &mut RngStream) -> f64 {
    match law.radius {
        RadiusLaw::Fixed(r) => r,
        RadiusLaw::StablePareto { .. } => law.radius_from_uniform(d, rng.uniform()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EventKind {
    Neutral,
    Selective,
    Selective1,
    Selective2,
    Mutation1,
    Mutation2,
}

impl EventKind {
    pub fn code(self) -> u8 {
        match self {
            EventKind::Neutral => 0,
            EventKind::Selective => 1,
            EventKind::Selective1 => 2,
            EventKind::Selective2 => 3,
            EventKind::Mutation1 => 4,
            EventKind::Mutation2 => 5,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => EventKind::Neutral,
            1 => EventKind::Selective,
            2 => EventKind::Selective1,
            3 => EventKind::Selective2,
            4 => EventKind::Mutation1,
            5 => EventKind::Mutation2,
            _ => return None,
        })
    }
}

/// Selection mechanism.
#[derive(Clone, Debug, PartialEq)]
pub enum SelectionModel {
    /// `m` parents; offspring is type `a` with probability `p[config]`, where
    /// bit `i` of `config` is set when parent `i` is type `a`. `f_coeffs` are
    /// the ascending polynomial coefficients of `F`.
    GeneralF { f_coeffs: Vec<f64>, m: usize, p: Vec<f64> },
    /// Two parents, offspring `a` iff both are; `F(w) = w (1 - w)`.
    Genic,
    /// Diploid heterozygote advantage; only the ratios of the four rates enter `F`.
    Overdominance { s1: f64, s2: f64, nu1: f64, nu2: f64 },
}

impl SelectionModel {
    pub fn general(f_coeffs: Vec<f64>, m: usize, p: Vec<f64>) -> Result<Self> {
        let model = SelectionModel::GeneralF { f_coeffs, m, p };
        model.validate()?;
        Ok(model)
    }

    pub fn is_diploid(&self) -> bool {
        matches!(self, SelectionModel::Overdominance { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            SelectionModel::GeneralF { f_coeffs, m, p } => {
                if *m == 0 || *m > MAX_PARENTS {
                    return Err(Error::InvalidParameter(format!(
                        "number of parents must lie in 1..={MAX_PARENTS}, got {m}"
                    )));
                }
                if p.len() != 1 << m || p.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::InvalidParameter(format!(
                        "p must list 2^{m} probabilities in [0, 1]"
                    )));
                }
                for k in 0..=64 {
                    let w = k as f64 / 64.0;
                    let lhs = w - eval_poly(f_coeffs, w);
                    let rhs = general_offspring_probability(*m, p, w);
                    if (lhs - rhs).abs() > 1e-10 {
                        return Err(Error::InvalidParameter(format!(
                            "w - F(w) = {lhs} but E[p] = {rhs} at w = {w}"
                        )));
                    }
                }
                Ok(())
            }
            SelectionModel::Genic => Ok(()),
            SelectionModel::Overdominance { s1, s2, nu1, nu2 } => {
                if [s1, s2, nu1, nu2].iter().any(|v| !(**v >= 0.0)) || s1 + s2 <= 0.0 {
                    return Err(Error::InvalidParameter(
                        "overdominance needs s1 + s2 > 0 and nonnegative rates".into(),
                    ));
                }
                Ok(())
            }
        }
    }

    /// Selection function `F`.
    pub fn f(&self, w: f64) -> f64 {
        match self {
            SelectionModel::GeneralF { f_coeffs, .. } => eval_poly(f_coeffs, w),
            SelectionModel::Genic => w * (1.0 - w),
            SelectionModel::Overdominance { s1, s2, nu1, nu2 } => {
                let s = s1 + s2;
                w * (1.0 - w) * (w - s2 / s) + nu1 / s * w - nu2 / s * (1.0 - w)
            }
        }
    }

    /// Derivative `F'`.
    pub fn f_prime(&self, w: f64) -> f64 {
        match self {
            SelectionModel::GeneralF { f_coeffs, .. } => f_coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| k as f64 * c * w.powi(k as i32 - 1))
                .sum(),
            SelectionModel::Genic => 1.0 - 2.0 * w,
            SelectionModel::Overdominance { s1, s2, nu1, nu2 } => {
                let s = s1 + s2;
                let l = s2 / s;
                // d/dw [w(1-w)(w-l)] = (1-2w)(w-l) + w(1-w)
                (1.0 - 2.0 * w) * (w - l) + w * (1.0 - w) + (nu1 + nu2) / s
            }
        }
    }

    /// Whether the event weights are compatible with this model.
    pub fn check_weights(&self, weights: &KindWeights) -> Result<()> {
        match (self, weights) {
            (SelectionModel::Overdominance { s1, s2, nu1, nu2 }, KindWeights::Diploid { s1: a1, s2: a2, nu1: b1, nu2: b2 }) => {
                let tot = a1 + a2;
                let base = s1 + s2;
                if tot == 0.0 && a1 + a2 + b1 + b2 == 0.0 {
                    return Ok(());
                }
                let ratios_agree = [(a1, s1), (a2, s2), (b1, nu1), (b2, nu2)]
                    .iter()
                    .all(|(x, y)| (*x / tot - *y / base).abs() <= 1e-9);
                if ratios_agree {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(
                        "event weights and overdominance parameters disagree".into(),
                    ))
                }
            }
            (SelectionModel::Overdominance { .. }, _) | (_, KindWeights::Diploid { .. }) => Err(
                Error::InvalidParameter("diploid model needs diploid kind weights and vice versa".into()),
            ),
            _ => Ok(()),
        }
    }

    /// Mean and second moment of the offspring target value when every parent
    /// independently has type `a` (allele `A1` for diploids) with probability `w`.
    pub fn target_moments(&self, kind: EventKind, w: f64) -> (f64, f64) {
        let het = 2.0 * w * (1.0 - w);
        match (self.is_diploid(), kind) {
            (false, EventKind::Neutral) => (w, w),
            (false, _) => {
                let p = match self {
                    SelectionModel::Genic => w * w,
                    SelectionModel::GeneralF { m, p, .. } => general_offspring_probability(*m, p, w),
                    SelectionModel::Overdominance { .. } => unreachable!(),
                };
                (p, p)
            }
            (true, EventKind::Neutral) => (w, 0.5 * (w + w * w)),
            (true, EventKind::Selective1) => {
                let a = w * w;
                let p11 = a * a;
                let phet = (1.0 + a) * het;
                (p11 + 0.5 * phet, p11 + 0.25 * phet)
            }
            (true, EventKind::Selective2) => {
                let b = (1.0 - w) * (1.0 - w);
                let phet = (1.0 + b) * het;
                let p11 = 1.0 - b * b - phet;
                (p11 + 0.5 * phet, p11 + 0.25 * phet)
            }
            (true, EventKind::Mutation1) => (0.0, 0.0),
            (true, EventKind::Mutation2) => (1.0, 1.0),
            (true, EventKind::Selective) => (w, 0.5 * (w + w * w)),
        }
    }
}

pub(crate) fn eval_poly(c: &[f64], w: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * w + a)
}

/// `E[p(B_w^m)]` for `m` independent Bernoulli(`w`) parents.
pub(crate) fn general_offspring_probability(m: usize, p: &[f64], w: f64) -> f64 {
    (0..1usize << m)
        .map(|cfg| {
            let k = cfg.count_ones() as i32;
            p[cfg] * w.powi(k) * (1.0 - w).powi(m as i32 - k)
        })
        .sum()
}
