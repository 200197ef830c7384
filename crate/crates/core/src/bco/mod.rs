//! Bandit learners behind a common trait, selected by name at runtime.
//!
//! `newton` is the occasional-update learner with an accumulated Newton
//! metric for affine-memory losses, `delay` updates every step using a
//! gradient estimate that is `d₀ − 1` steps old, and `spherical` is the
//! first-order baseline with a fixed isotropic exploration radius.

mod delay;
mod estimator;
mod newton;
mod registry;
mod runner;
mod spherical;

pub use delay::DelayLearner;
pub use estimator::{estimator_mean_check, EstimatorReport, UnaryFunction};
pub use newton::NewtonLearner;
pub use registry::{LearnerFactory, LearnerRegistry};
pub use runner::{run_arm, run_bcoam, run_learner, run_spherical_baseline, BcoRun, RunParams};
pub use spherical::SphericalLearner;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{ConvexSet, PsdMatrix};

/// Construction parameters shared by all learners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub set: ConvexSet,
    pub eta: f64,
    /// Curvature lower constant of the losses.
    pub alpha: f64,
    pub memory: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Initial metric is `metric_scale · I`.
    pub metric_scale: f64,
    /// Gradient delay of the `delay` learner.
    pub delay: usize,
    /// Exploration radius of the `spherical` learner; `None` uses
    /// `min(1, T^{-1/6})`.
    pub delta: Option<f64>,
}

impl LearnerSpec {
    pub fn new(set: ConvexSet, eta: f64, alpha: f64, memory: usize, horizon: usize, seed: u64) -> Self {
        LearnerSpec {
            set,
            eta,
            alpha,
            memory,
            horizon,
            seed,
            metric_scale: 1.0,
            delay: 1,
            delta: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, msg: String| Err(Error::config(path, msg));
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta", format!("must be positive, got {}", self.eta));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha", format!("must be positive, got {}", self.alpha));
        }
        if self.memory == 0 {
            return bad("memory", "must be at least 1".into());
        }
        if !(self.metric_scale > 0.0 && self.metric_scale.is_finite()) {
            return bad("metric_scale", format!("must be positive, got {}", self.metric_scale));
        }
        if self.delay == 0 {
            return bad("delay", "must be at least 1".into());
        }
        if let Some(delta) = self.delta {
            if !(delta > 0.0 && delta <= 1.0) {
                return bad("delta", format!("must lie in (0, 1], got {delta}"));
            }
        }
        Ok(())
    }
}

/// One entry of the update set `S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    pub t: usize,
    /// `‖o_{t+1} − o_t‖`.
    pub step_norm: f64,
    pub logdet: f64,
    /// `‖g̃_t‖` in the dual norm of the metric after the update.
    pub dual_gradient_norm: f64,
    /// Event counters: the iterate was fixed before the new sphere sample
    /// was drawn.
    pub iterate_fixed_at: u64,
    pub sample_drawn_at: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateTrace {
    pub updates: Vec<UpdateRecord>,
}

impl UpdateTrace {
    pub fn update_set(&self) -> Vec<usize> {
        self.updates.iter().map(|u| u.t).collect()
    }

    /// Smallest gap between consecutive update times.
    pub fn min_gap(&self) -> Option<usize> {
        self.updates.windows(2).map(|w| w[1].t - w[0].t).min()
    }
}

/// Full learner state, exposed for invariant checks.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerSnapshot {
    /// Time index of the point returned by `play`.
    pub t: usize,
    pub o: DVector<f64>,
    pub v: DVector<f64>,
    pub z: DVector<f64>,
    pub metric: PsdMatrix,
    /// Most recent gradient estimate.
    pub gradient: DVector<f64>,
    pub epoch: usize,
}

pub trait BanditLearner: Send {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    /// Point to play at the current time.
    fn play(&self) -> &DVector<f64>;
    /// Advances the clock during warm-up, before losses are observed.
    fn idle(&mut self);
    /// Feeds the bandit value of the current step and the curvature matrix;
    /// returns whether the played point changes.
    fn observe(&mut self, f_value: f64, h_t: &PsdMatrix) -> Result<bool>;
    fn logdet_metric(&self) -> f64;
    fn trace(&self) -> &UpdateTrace;
    fn snapshot(&self) -> LearnerSnapshot;
}

/// Bernoulli gate: `b_t · Π_{i=1}^{m−1} (1 − b_{t−i}) = 1`.
#[derive(Debug, Clone)]
pub(crate) struct UpdateGate {
    memory: usize,
    /// Steps since the last `b = 1`, saturating at `memory`.
    quiet: usize,
}

impl UpdateGate {
    /// Draws `b_1 … b_{m−1}` so the first test at `t = m` sees a full history.
    pub(crate) fn new<R: Rng>(memory: usize, rng: &mut R) -> Self {
        let mut gate = UpdateGate { memory, quiet: memory };
        for _ in 1..memory {
            gate.draw(rng);
        }
        gate
    }

    pub(crate) fn draw<R: Rng>(&mut self, rng: &mut R) -> bool {
        let b = rng.random::<f64>() < 1.0 / self.memory as f64;
        let fire = b && self.quiet >= self.memory - 1;
        self.quiet = if b { 0 } else { (self.quiet + 1).min(self.memory) };
        fire
    }

    #[cfg(test)]
    pub(crate) fn feed(&mut self, b: bool) -> bool {
        let fire = b && self.quiet >= self.memory - 1;
        self.quiet = if b { 0 } else { (self.quiet + 1).min(self.memory) };
        fire
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_memory_one_always_fires() {
        let mut g = UpdateGate { memory: 1, quiet: 1 };
        assert!(g.feed(true));
        assert!(g.feed(true));
    }

    #[test]
    fn gate_blocks_back_to_back_successes() {
        let mut g = UpdateGate { memory: 3, quiet: 3 };
        assert!(g.feed(true));
        assert!(!g.feed(true));
        assert!(!g.feed(false));
        assert!(!g.feed(true)); // only one quiet step before
        assert!(!g.feed(false));
        assert!(!g.feed(false));
        assert!(g.feed(true));
    }
}
