use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::{BanditLearner, LearnerSnapshot, LearnerSpec, UpdateRecord, UpdateTrace};
use crate::error::{Error, Result};
use crate::geometry::{mahalanobis_project, sample_unit_sphere, ConvexSet, PsdMatrix, UnitSphereSample};
use crate::rng::{stream, Stream, StreamRng};

struct Stored {
    metric: PsdMatrix,
    inverse: DMatrix<f64>,
    estimate: DVector<f64>,
}

/// Newton-metric bandit learner that updates every step using the estimate
/// and metric from `d₀ − 1` steps earlier. While that index is not yet
/// positive the iterate stays put.
pub struct DelayLearner {
    set: ConvexSet,
    eta: f64,
    alpha: f64,
    delay: usize,
    floor: f64,
    o: DVector<f64>,
    v: UnitSphereSample,
    z: DVector<f64>,
    metric: PsdMatrix,
    metric_sqrt: DMatrix<f64>,
    logdet: f64,
    last_estimate: DVector<f64>,
    history: VecDeque<Stored>,
    sphere: StreamRng,
    t: usize,
    steps: usize,
    events: u64,
    trace: UpdateTrace,
}

impl DelayLearner {
    pub fn new(spec: &LearnerSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.set.dim();
        let mut sphere = stream(spec.seed, Stream::Sphere);
        let metric = PsdMatrix::scaled_identity(d, spec.metric_scale);
        let floor = spec.metric_scale * (1.0 - 1e-9);
        let o = spec.set.center();
        let v = sample_unit_sphere(d, &mut sphere)?;
        let z = &o + metric.inv_sqrt(floor)?.matrix() * v.vector();
        Ok(DelayLearner {
            set: spec.set.clone(),
            eta: spec.eta,
            alpha: spec.alpha,
            delay: spec.delay,
            floor,
            o,
            v,
            z,
            metric_sqrt: metric.sqrt(),
            logdet: metric.logdet()?,
            metric,
            last_estimate: DVector::zeros(d),
            history: VecDeque::with_capacity(spec.delay),
            sphere,
            t: 1,
            steps: 0,
            events: 0,
            trace: UpdateTrace::default(),
        })
    }
}

impl BanditLearner for DelayLearner {
    fn name(&self) -> &'static str {
        "delay"
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
        self.steps += 1;
        let d = self.dim() as f64;
        let estimate = &self.metric_sqrt * self.v.vector() * (d * f_value);
        self.metric = self.metric.add_scaled(0.5 * self.eta * self.alpha, h_t)?;
        self.metric_sqrt = self.metric.sqrt();
        self.logdet = self.metric.logdet()?;
        let inverse = self.metric.inverse(self.floor)?;
        let dual_gradient_norm = estimate.dot(&(&inverse * &estimate)).max(0.0).sqrt();
        self.history.push_back(Stored {
            metric: self.metric.clone(),
            inverse,
            estimate: estimate.clone(),
        });
        self.last_estimate = estimate;

        let mut step_norm = 0.0;
        if self.history.len() == self.delay {
            let past = self.history.pop_front().expect("non-empty history");
            let target = &self.o - &past.inverse * &past.estimate * self.eta;
            let next = mahalanobis_project(&self.set, &past.metric, &target)?;
            step_norm = (&next - &self.o).norm();
            self.o = next;
        }
        self.events += 1;
        let iterate_fixed_at = self.events;
        self.v = sample_unit_sphere(self.o.len(), &mut self.sphere)?;
        self.events += 1;
        self.z = &self.o + self.metric.inv_sqrt(self.floor)?.matrix() * self.v.vector();
        self.trace.updates.push(UpdateRecord {
            t,
            step_norm,
            logdet: self.logdet,
            dual_gradient_norm,
            iterate_fixed_at,
            sample_drawn_at: self.events,
        });
        Ok(true)
    }

    fn logdet_metric(&self) -> f64 {
        self.logdet
    }

    fn trace(&self) -> &UpdateTrace {
        &self.trace
    }

    fn snapshot(&self) -> LearnerSnapshot {
        LearnerSnapshot {
            t: self.t,
            o: self.o.clone(),
            v: self.v.vector().clone(),
            z: self.z.clone(),
            metric: self.metric.clone(),
            gradient: self.last_estimate.clone(),
            epoch: self.steps + 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(delay: usize) -> LearnerSpec {
        let mut s = LearnerSpec::new(ConvexSet::centered_ball(2, 1.0).unwrap(), 0.1, 1.0, 1, 100, 5);
        s.delay = delay;
        s
    }

    #[test]
    fn metric_arithmetic() {
        let mut l = DelayLearner::new(&spec(2)).unwrap();
        l.observe(1.0, &PsdMatrix::scaled_identity(2, 2.0)).unwrap();
        assert!((l.snapshot().metric.matrix() - DMatrix::identity(2, 2) * 1.1).amax() < 1e-15);
    }

    #[test]
    fn iterate_frozen_during_warm_up() {
        let mut l = DelayLearner::new(&spec(3)).unwrap();
        let h = PsdMatrix::identity(2);
        l.observe(5.0, &h).unwrap();
        l.observe(5.0, &h).unwrap();
        assert_eq!(l.snapshot().o, DVector::zeros(2));
        l.observe(5.0, &h).unwrap();
        assert_ne!(l.snapshot().o, DVector::zeros(2));
    }

    #[test]
    fn zero_value_estimate_is_zero() {
        let mut l = DelayLearner::new(&spec(1)).unwrap();
        for _ in 0..5 {
            l.observe(0.0, &PsdMatrix::identity(2)).unwrap();
            assert_eq!(l.snapshot().o, DVector::zeros(2));
        }
    }
}
