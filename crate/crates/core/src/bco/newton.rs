use nalgebra::{DMatrix, DVector};

use super::{BanditLearner, LearnerSnapshot, LearnerSpec, UpdateGate, UpdateRecord, UpdateTrace};
use crate::error::{Error, Result};
use crate::geometry::{mahalanobis_project, sample_unit_sphere, ConvexSet, PsdMatrix, UnitSphereSample};
use crate::rng::{stream, Stream, StreamRng};

/// Occasional-update bandit learner for affine-memory losses with an
/// accumulated Newton metric.
///
/// Updates fire when the Bernoulli gate opens, so the played point is
/// constant across every loss window that triggers an update. At an update
/// time `t` the metric grows by `(ηα/2)H_t`, a new one-point estimate
/// `g̃_t = d·f·Â_{t−1}^{1/2}v_t` is stored, and the iterate moves with the
/// estimate stored at the previous update, projected in the metric of that
/// update.
pub struct NewtonLearner {
    set: ConvexSet,
    eta: f64,
    alpha: f64,
    floor: f64,
    o: DVector<f64>,
    v: UnitSphereSample,
    z: DVector<f64>,
    metric: PsdMatrix,
    metric_sqrt: DMatrix<f64>,
    metric_inv: DMatrix<f64>,
    metric_inv_sqrt: PsdMatrix,
    logdet: f64,
    pending: DVector<f64>,
    gate: UpdateGate,
    bernoulli: StreamRng,
    sphere: StreamRng,
    t: usize,
    epoch: usize,
    events: u64,
    trace: UpdateTrace,
}

impl NewtonLearner {
    pub fn new(spec: &LearnerSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.set.dim();
        let mut bernoulli = stream(spec.seed, Stream::Bernoulli);
        let mut sphere = stream(spec.seed, Stream::Sphere);
        let gate = UpdateGate::new(spec.memory, &mut bernoulli);
        let metric = PsdMatrix::scaled_identity(d, spec.metric_scale);
        let floor = spec.metric_scale * (1.0 - 1e-9);
        let o = spec.set.center();
        let v = sample_unit_sphere(d, &mut sphere)?;
        let mut learner = NewtonLearner {
            set: spec.set.clone(),
            eta: spec.eta,
            alpha: spec.alpha,
            floor,
            z: o.clone(),
            o,
            v,
            metric_sqrt: metric.sqrt(),
            metric_inv: metric.inverse(floor)?,
            metric_inv_sqrt: metric.inv_sqrt(floor)?,
            logdet: metric.logdet()?,
            metric,
            pending: DVector::zeros(d),
            gate,
            bernoulli,
            sphere,
            t: 1,
            epoch: 1,
            events: 0,
            trace: UpdateTrace::default(),
        };
        learner.z = &learner.o + learner.metric_inv_sqrt.matrix() * learner.v.vector();
        Ok(learner)
    }

    fn tick(&mut self) -> u64 {
        self.events += 1;
        self.events
    }
}

impl BanditLearner for NewtonLearner {
    fn name(&self) -> &'static str {
        "newton"
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
        let next_metric = self.metric.add_scaled(0.5 * self.eta * self.alpha, h_t)?;
        let estimate = &self.metric_sqrt * self.v.vector() * (d * f_value);

        // Move with the previous epoch's estimate in the previous epoch's
        // metric; both are still the current frozen values.
        let target = &self.o - &self.metric_inv * &self.pending * self.eta;
        let next_o = mahalanobis_project(&self.set, &self.metric, &target)?;
        let step_norm = (&next_o - &self.o).norm();
        self.o = next_o;
        let iterate_fixed_at = self.tick();

        self.metric = next_metric;
        self.metric_sqrt = self.metric.sqrt();
        self.metric_inv = self.metric.inverse(self.floor)?;
        self.metric_inv_sqrt = self.metric.inv_sqrt(self.floor)?;
        self.logdet = self.metric.logdet()?;
        let dual_gradient_norm = estimate.dot(&(&self.metric_inv * &estimate)).max(0.0).sqrt();
        self.pending = estimate;

        self.v = sample_unit_sphere(self.o.len(), &mut self.sphere)?;
        let sample_drawn_at = self.tick();
        self.z = &self.o + self.metric_inv_sqrt.matrix() * self.v.vector();
        self.epoch += 1;
        self.trace.updates.push(UpdateRecord {
            t,
            step_norm,
            logdet: self.logdet,
            dual_gradient_norm,
            iterate_fixed_at,
            sample_drawn_at,
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
            gradient: self.pending.clone(),
            epoch: self.epoch,
        }
    }
}
