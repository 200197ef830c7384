use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{BanditLearner, LearnerRegistry, LearnerSpec, UpdateTrace};
use crate::error::{Error, Result};
use crate::geometry::ConvexSet;
use crate::losses::AffineMemoryLoss;

/// Algorithm parameters of a single BCO-M run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunParams {
    pub eta: f64,
    pub memory: usize,
    pub alpha: f64,
    pub horizon: usize,
    pub seed: u64,
    pub metric_scale: f64,
    pub delay: usize,
    pub delta: Option<f64>,
}

impl RunParams {
    pub fn new(eta: f64, memory: usize, alpha: f64, horizon: usize, seed: u64) -> Self {
        RunParams {
            eta,
            memory,
            alpha,
            horizon,
            seed,
            metric_scale: 1.0,
            delay: 1,
            delta: None,
        }
    }

    pub fn spec(&self, set: &ConvexSet) -> LearnerSpec {
        LearnerSpec {
            set: set.clone(),
            eta: self.eta,
            alpha: self.alpha,
            memory: self.memory,
            horizon: self.horizon,
            seed: self.seed,
            metric_scale: self.metric_scale,
            delay: self.delay,
            delta: self.delta,
        }
    }
}

/// Trajectory of one run. Vectors are indexed by `t − 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BcoRun {
    pub arm: String,
    pub memory: usize,
    pub decisions: Vec<DVector<f64>>,
    /// `f_t` on the played window; steps before `t = m` see a window padded
    /// with the first decision.
    pub values: Vec<f64>,
    pub updated: Vec<bool>,
    pub logdet: Vec<f64>,
    pub trace: UpdateTrace,
}

impl BcoRun {
    pub fn horizon(&self) -> usize {
        self.values.len()
    }
}

/// Plays `learner` against `losses`; losses are observed from `t = m` on.
pub fn run_learner(learner: &mut dyn BanditLearner, losses: &[AffineMemoryLoss]) -> Result<BcoRun> {
    let m = losses
        .first()
        .ok_or_else(|| Error::HorizonMismatch("empty loss sequence".into()))?
        .memory();
    let horizon = losses.len();
    let mut decisions: Vec<DVector<f64>> = Vec::with_capacity(horizon);
    let mut values = Vec::with_capacity(horizon);
    let mut updated = Vec::with_capacity(horizon);
    let mut logdet = Vec::with_capacity(horizon);
    let mut window: Vec<DVector<f64>> = Vec::with_capacity(m);
    for (idx, loss) in losses.iter().enumerate() {
        let t = idx + 1;
        if loss.memory() != m {
            return Err(Error::Arity { expected: m, actual: loss.memory() });
        }
        decisions.push(learner.play().clone());
        window.clear();
        for k in 0..m {
            let s = (t + k).saturating_sub(m).max(1);
            window.push(decisions[s - 1].clone());
        }
        let value = loss.eval(&window)?;
        let fired = if t >= m {
            learner.observe(value, loss.hessian_t())?
        } else {
            learner.idle();
            false
        };
        values.push(value);
        updated.push(fired);
        logdet.push(learner.logdet_metric());
    }
    Ok(BcoRun {
        arm: learner.name().to_string(),
        memory: m,
        decisions,
        values,
        updated,
        logdet,
        trace: learner.trace().clone(),
    })
}

/// Runs the learner registered as `arm`.
pub fn run_arm(
    registry: &LearnerRegistry,
    arm: &str,
    losses: &[AffineMemoryLoss],
    set: &ConvexSet,
    params: &RunParams,
) -> Result<BcoRun> {
    if params.horizon != losses.len() {
        return Err(Error::HorizonMismatch(format!(
            "params horizon {} but {} losses",
            params.horizon,
            losses.len()
        )));
    }
    if let Some(first) = losses.first() {
        if first.memory() != params.memory {
            return Err(Error::Arity { expected: params.memory, actual: first.memory() });
        }
        if first.dim() != set.dim() {
            return Err(Error::shape("decision set", first.dim(), set.dim()));
        }
    }
    let mut learner = registry.build(arm, &params.spec(set))?;
    run_learner(learner.as_mut(), losses)
}

pub fn run_bcoam(losses: &[AffineMemoryLoss], set: &ConvexSet, params: &RunParams) -> Result<BcoRun> {
    run_arm(&LearnerRegistry::default(), "newton", losses, set, params)
}

pub fn run_spherical_baseline(losses: &[AffineMemoryLoss], set: &ConvexSet, params: &RunParams) -> Result<BcoRun> {
    run_arm(&LearnerRegistry::default(), "spherical", losses, set, params)
}
