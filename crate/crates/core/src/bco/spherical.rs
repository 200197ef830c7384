use nalgebra::DVector;

use super::{BanditLearner, LearnerSnapshot, LearnerSpec, UpdateGate, UpdateRecord, UpdateTrace};
use crate::error::{Error, Result};
use crate::geometry::{sample_unit_sphere, ConvexSet, PsdMatrix, UnitSphereSample};
use crate::rng::{stream, Stream, StreamRng};

/// Default exploration radius `min(1, T^{-1/6})`.
pub fn default_delta(horizon: usize) -> f64 {
    (horizon.max(1) as f64).powf(-1.0 / 6.0).min(1.0)
}

/// First-order baseline: same Bernoulli schedule as the Newton learner, fixed
/// exploration radius `δ` and Euclidean projected steps
/// `o ← Π_K[o − η (d/δ) f v]`.
pub struct SphericalLearner {
    set: ConvexSet,
    eta: f64,
    delta: f64,
    o: DVector<f64>,
    v: UnitSphereSample,
    z: DVector<f64>,
    logdet: f64,
    last_estimate: DVector<f64>,
    gate: UpdateGate,
    bernoulli: StreamRng,
    sphere: StreamRng,
    t: usize,
    epoch: usize,
    events: u64,
    trace: UpdateTrace,
}

impl SphericalLearner {
    pub fn new(spec: &LearnerSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.set.dim();
        let delta = spec.delta.unwrap_or_else(|| default_delta(spec.horizon));
        let mut bernoulli = stream(spec.seed, Stream::Bernoulli);
        let mut sphere = stream(spec.seed, Stream::Sphere);
        let gate = UpdateGate::new(spec.memory, &mut bernoulli);
        let o = spec.set.center();
        let v = sample_unit_sphere(d, &mut sphere)?;
        let z = &o + v.vector() * delta;
        Ok(SphericalLearner {
            set: spec.set.clone(),
            eta: spec.eta,
            delta,
            o,
            v,
            z,
            logdet: -2.0 * d as f64 * delta.ln(),
            last_estimate: DVector::zeros(d),
            gate,
            bernoulli,
            sphere,
            t: 1,
            epoch: 1,
            events: 0,
            trace: UpdateTrace::default(),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

impl BanditLearner for SphericalLearner {
    fn name(&self) -> &'static str {
        "spherical"
    }

    fn dim(&self) -> usize {
        self.o.len()
    }

    fn play(&self) -> &DVector<f64> {
        &self.z
    }

    fn idle(&mut self) {
        self.t += 1;
    }

    fn observe(&mut self, f_value: f64, h_t: &PsdMatrix) -> Result<bool> {
        if h_t.dim() != self.dim() {
            return Err(Error::shape("H_t", self.dim(), h_t.dim()));
        }
        let t = self.t;
        self.t += 1;
        if !self.gate.draw(&mut self.bernoulli) {
            return Ok(false);
        }
        let d = self.dim() as f64;
        let estimate = self.v.vector() * (d * f_value / self.delta);
        let next = self.set.euclidean_project(&(&self.o - &estimate * self.eta))?;
        let step_norm = (&next - &self.o).norm();
        self.o = next;
        self.events += 1;
        let iterate_fixed_at = self.events;
        self.v = sample_unit_sphere(self.o.len(), &mut self.sphere)?;
        self.events += 1;
        self.z = &self.o + self.v.vector() * self.delta;
        self.trace.updates.push(UpdateRecord {
            t,
            step_norm,
            logdet: self.logdet,
            dual_gradient_norm: estimate.norm() * self.delta,
            iterate_fixed_at,
            sample_drawn_at: self.events,
        });
        self.last_estimate = estimate;
        self.epoch += 1;
        Ok(true)
    }

    fn logdet_metric(&self) -> f64 {
        self.logdet
    }

    fn trace(&self) -> &UpdateTrace {
        &self.trace
    }

    fn snapshot(&self) -> LearnerSnapshot {
        let d = self.dim();
        LearnerSnapshot {
            t: self.t,
            o: self.o.clone(),
            v: self.v.vector().clone(),
            z: self.z.clone(),
            metric: PsdMatrix::scaled_identity(d, self.delta.powi(-2)),
            gradient: self.last_estimate.clone(),
            epoch: self.epoch,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bco::NewtonLearner;

    #[test]
    fn unit_radius_matches_initial_newton_geometry() {
        let mut spec = LearnerSpec::new(ConvexSet::centered_ball(3, 1.0).unwrap(), 0.1, 1.0, 2, 100, 9);
        spec.delta = Some(1.0);
        let s = SphericalLearner::new(&spec).unwrap();
        let n = NewtonLearner::new(&spec).unwrap();
        assert_eq!(s.play(), n.play());
        assert_eq!(s.snapshot().metric, n.snapshot().metric);
    }
}
