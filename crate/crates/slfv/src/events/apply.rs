use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::lattice::{BallKernel, FrequencyField, TorusGrid, MIN_RESOLUTION};

use super::law::{EventKind, EventLaw, RadiusLaw, SelectionModel, MAX_UNIFORMS};
use super::rng::RngStream;

/// One reproduction event with everything needed to apply it deterministically.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReproductionEvent {
    pub t: f64,
    /// Continuous center; the event acts on the ball around the cell containing it.
    pub x: [f64; 3],
    pub r: f64,
    pub kind: EventKind,
    pub uniforms: [f64; MAX_UNIFORMS],
    pub n_uniforms: u8,
}

impl ReproductionEvent {
    pub fn uniforms(&self) -> &[f64] {
        &self.uniforms[..self.n_uniforms as usize]
    }
}

/// Uniforms consumed by the parent-sampling step of an event of `kind`.
pub fn uniforms_needed(model: &SelectionModel, kind: EventKind) -> usize {
    match (model, kind) {
        (_, EventKind::Mutation1 | EventKind::Mutation2) => 0,
        (SelectionModel::Overdominance { .. }, EventKind::Neutral) => 4,
        (SelectionModel::Overdominance { .. }, _) => 9,
        (_, EventKind::Neutral) => 2,
        (SelectionModel::Genic, _) => 4,
        (SelectionModel::GeneralF { m, .. }, _) => 2 * m + 1,
    }
}

/// Applies events to a field on a fixed grid, caching ball stencils.
#[derive(Clone, Debug)]
pub struct EventApplier {
    grid: TorusGrid,
    law: EventLaw,
    model: SelectionModel,
    fixed: Option<BallKernel>,
    cache: HashMap<u64, BallKernel>,
}

impl EventApplier {
    pub fn new(grid: TorusGrid, law: EventLaw, model: SelectionModel) -> Result<Self> {
        law.validate(grid.d())?;
        model.validate()?;
        model.check_weights(&law.weights)?;
        let fixed = match law.radius {
            RadiusLaw::Fixed(r) => {
                let k = BallKernel::new(&grid, r)?;
                k.check_resolution()?;
                Some(k)
            }
            RadiusLaw::StablePareto { r_max, .. } => {
                // the largest ball must fit on the torus
                BallKernel::new(&grid, r_max)?;
                None
            }
        };
        Ok(EventApplier { grid, law, model, fixed, cache: HashMap::new() })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }
    pub fn law(&self) -> &EventLaw {
        &self.law
    }
    pub fn model(&self) -> &SelectionModel {
        &self.model
    }

    /// Radius actually applied: stable radii below the resolution floor are raised to it.
    pub fn effective_radius(&self, r: f64) -> f64 {
        match self.law.radius {
            RadiusLaw::Fixed(_) => r,
            RadiusLaw::StablePareto { .. } => r.max(MIN_RESOLUTION * self.grid.h()),
        }
    }

    fn ensure_kernel(&mut self, r: f64) -> Result<Option<u64>> {
        if self.fixed.is_some() {
            return Ok(None);
        }
        let r = self.effective_radius(r);
        let key = ((r / self.grid.h()).powi(2)).ceil() as u64;
        if !self.cache.contains_key(&key) {
            let k = BallKernel::new(&self.grid, r)?;
            self.cache.insert(key, k);
        }
        Ok(Some(key))
    }

    fn cached(&self, key: Option<u64>) -> &BallKernel {
        match key {
            None => self.fixed.as_ref().expect("fixed kernel"),
            Some(k) => &self.cache[&k],
        }
    }

    /// Discrete ball used for an event of radius `r`.
    pub fn kernel(&mut self, r: f64) -> Result<&BallKernel> {
        let key = self.ensure_kernel(r)?;
        Ok(self.cached(key))
    }

    /// Draw the next event after time `t` from `rng`.
    pub fn draw(&self, rng: &mut RngStream, t: f64, rate: f64) -> ReproductionEvent {
        let t = t + rng.exponential(rate);
        let mut x = [0.0; 3];
        let side = self.grid.side();
        for xk in x.iter_mut().take(self.grid.d()) {
            *xk = rng.uniform() * side;
        }
        let r = super::law::sample_radius(&self.law, self.grid.d(), rng);
        let kind = self.law.weights.pick(rng.uniform());
        let n = uniforms_needed(&self.model, kind);
        let mut uniforms = [0.0; MAX_UNIFORMS];
        for u in uniforms.iter_mut().take(n) {
            *u = rng.uniform();
        }
        ReproductionEvent { t, x, r, kind, uniforms, n_uniforms: n as u8 }
    }

    /// Offspring target value the event moves its ball towards.
    pub fn target(&mut self, q: &[f64], ev: &ReproductionEvent) -> Result<f64> {
        let key = self.ensure_kernel(ev.r)?;
        offspring_target(&self.grid, &self.model, self.cached(key), q, ev)
    }

    /// Apply `ev` to `q`, moving every cell of the ball a fraction `u` toward the target.
    pub fn apply(&mut self, q: &mut FrequencyField, ev: &ReproductionEvent) -> Result<()> {
        self.apply_values(q.values_mut(), ev)
    }

    pub(crate) fn apply_values(&mut self, q: &mut [f64], ev: &ReproductionEvent) -> Result<()> {
        let key = self.ensure_kernel(ev.r)?;
        let grid = self.grid;
        let k = self.cached(key);
        let target = offspring_target(&grid, &self.model, k, q, ev)?;
        let u = self.law.u;
        if u == 0.0 {
            return Ok(());
        }
        let n = grid.n();
        let center = grid.cell_of(&ev.x[..grid.d()]);
        let c = grid.coords(center);
        let last = grid.d() - 1;
        let keep = 1.0 - u;
        let shift = u * target;
        for &(p, a) in k.runs() {
            let line = match grid.d() {
                1 => 0,
                2 => wrap(c[0], p[0], n),
                _ => wrap(c[0], p[0], n) * n + wrap(c[1], p[1], n),
            };
            let row = &mut q[line * n..(line + 1) * n];
            let lo = c[last] as i64 - a as i64;
            let hi = c[last] as i64 + a as i64;
            let mut update = |v: &mut f64| *v = (*v * keep + shift).clamp(0.0, 1.0);
            if lo >= 0 && hi < n as i64 {
                row[lo as usize..=hi as usize].iter_mut().for_each(&mut update);
            } else {
                for j in lo..=hi {
                    update(&mut row[j.rem_euclid(n as i64) as usize]);
                }
            }
        }
        Ok(())
    }
}

fn offspring_target(
    grid: &TorusGrid,
    model: &SelectionModel,
    k: &BallKernel,
    q: &[f64],
    ev: &ReproductionEvent,
) -> Result<f64> {
    let need = uniforms_needed(model, ev.kind);
    if (ev.n_uniforms as usize) < need {
        return Err(Error::InvalidParameter(format!(
            "event of kind {:?} needs {need} uniforms, has {}",
            ev.kind, ev.n_uniforms
        )));
    }
    let center = grid.cell_of(&ev.x[..grid.d()]);
    let u = &ev.uniforms;
    // parent i: uniform cell of the ball, type a with probability q(cell)
    let parent = |i: usize| -> bool {
        let count = k.count();
        let idx = ((u[2 * i] * count as f64) as usize).min(count - 1);
        let cell = grid.shift(center, k.offsets()[idx]);
        u[2 * i + 1] < q[cell]
    };
    let t = match (model, ev.kind) {
        (_, EventKind::Mutation1) => 0.0,
        (_, EventKind::Mutation2) => 1.0,
        (SelectionModel::Overdominance { .. }, EventKind::Neutral) => {
            0.5 * (parent(0) as u8 + parent(1) as u8) as f64
        }
        (SelectionModel::Overdominance { .. }, kind) => {
            let k: [bool; 4] = [parent(0), parent(1), parent(2), parent(3)];
            let pairs = [(k[0], k[1]), (k[2], k[3])];
            // the pair homozygous for the disfavoured allele is discarded
            let bad = |p: (bool, bool)| {
                if kind == EventKind::Selective1 {
                    p.0 && p.1
                } else {
                    !p.0 && !p.1
                }
            };
            let chosen = match (bad(pairs[0]), bad(pairs[1])) {
                (true, false) => pairs[1],
                (false, true) => pairs[0],
                _ if u[8] < 0.5 => pairs[0],
                _ => pairs[1],
            };
            0.5 * (chosen.0 as u8 + chosen.1 as u8) as f64
        }
        (_, EventKind::Neutral) => parent(0) as u8 as f64,
        (SelectionModel::Genic, _) => (parent(0) && parent(1)) as u8 as f64,
        (SelectionModel::GeneralF { m, p, .. }, _) => {
            let cfg = (0..*m).fold(0usize, |acc, i| acc | (parent(i) as usize) << i);
            (u[2 * m] < p[cfg]) as u8 as f64
        }
    };
    Ok(t)
}

#[inline]
fn wrap(i: usize, off: i32, n: usize) -> usize {
    (i as i64 + off as i64).rem_euclid(n as i64) as usize
}

/// Draw and apply a single neutral event with a forced uniform stream; convenience
/// for tests and examples.
pub fn apply_neutral_event(
    q: &mut FrequencyField,
    x: &[f64],
    r: f64,
    u: f64,
    rng: &mut RngStream,
) -> Result<()> {
    use super::law::KindWeights;
    let law = EventLaw { u, weights: KindWeights::Haploid { s: 0.0 }, radius: RadiusLaw::Fixed(r) };
    let mut app = EventApplier::new(*q.grid(), law, SelectionModel::Genic)?;
    let mut pos = [0.0; 3];
    pos[..x.len()].copy_from_slice(x);
    let mut uniforms = [0.0; MAX_UNIFORMS];
    uniforms[0] = rng.uniform();
    uniforms[1] = rng.uniform();
    let ev = ReproductionEvent { t: 0.0, x: pos, r, kind: EventKind::Neutral, uniforms, n_uniforms: 2 };
    app.apply(q, &ev)
}
