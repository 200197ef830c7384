use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::cost::{CostSchedule, NoiseSchedule};
use super::drc::{embed_signals, DrcPolicy};
use super::markov::{choose_truncation, markov_operator};
use super::reduction::{
    check_truncation_budget, default_memory, reduction_constants, ReductionConstants, ReductionContext,
    ReductionInputs,
};
use super::signals::SignalReconstructor;
use super::system::{LdsInstance, StabilizingController};
use crate::bco::{LearnerRegistry, LearnerSpec, UpdateTrace};
use crate::error::{Error, Result};
use crate::geometry::ConvexSet;
use crate::harness::{AffineSumObjective, AffineTerm};
use crate::losses::AffineMemoryLoss;

/// A system, its stabilizing controller and the oblivious cost and noise
/// sequences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlProblem {
    pub instance: LdsInstance,
    pub controller: StabilizingController,
    pub costs: CostSchedule,
    pub noise: NoiseSchedule,
}

impl ControlProblem {
    pub fn new(
        instance: LdsInstance,
        controller: StabilizingController,
        costs: CostSchedule,
        noise: NoiseSchedule,
    ) -> Result<Self> {
        controller.verify(&instance)?;
        if costs.dim != instance.dy() + instance.du() {
            return Err(Error::shape("cost dimension", instance.dy() + instance.du(), costs.dim));
        }
        Ok(ControlProblem { instance, controller, costs, noise })
    }

    pub fn horizon(&self) -> usize {
        self.costs.horizon
    }

    /// Policy dimension `m·d_u·d_y`.
    pub fn policy_dim(&self, memory: usize) -> usize {
        memory * self.instance.du() * self.instance.dy()
    }
}

/// Geometry of the embedded policy set the learner plays in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySet {
    /// Euclidean ball of radius `R_M/√m`, which sits inside `M(m, R_M)`.
    InscribedBall,
    /// The exact set `Σ_j ‖M^{[j]}‖_op ≤ R_M`.
    OperatorL1,
}

impl PolicySet {
    pub fn build(self, memory: usize, du: usize, dy: usize, r_m: f64) -> Result<ConvexSet> {
        match self {
            PolicySet::InscribedBall => ConvexSet::centered_ball(memory * du * dy, r_m / (memory as f64).sqrt()),
            PolicySet::OperatorL1 => ConvexSet::operator_l1(memory, du, dy, r_m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlParams {
    pub arm: String,
    /// `None` uses `ceil(log T / log(1/(1−γ)))`.
    pub memory: Option<usize>,
    pub r_m: f64,
    pub eta: f64,
    /// Strong convexity handed to the learner; normally `α_c`.
    pub alpha: f64,
    pub seed: u64,
    pub set: PolicySet,
    /// `None` picks the smallest certified truncation for the horizon.
    pub truncation: Option<usize>,
    /// When set, runs fail if the certified per-step truncation error of the
    /// reduction exceeds this value.
    pub discrepancy_budget: Option<f64>,
    pub delay: usize,
    pub delta: Option<f64>,
    /// Keep every reduced loss in the result.
    pub keep_losses: bool,
}

impl ControlParams {
    pub fn new(eta: f64, r_m: f64, alpha: f64, seed: u64) -> Self {
        ControlParams {
            arm: "newton".into(),
            memory: None,
            r_m,
            eta,
            alpha,
            seed,
            set: PolicySet::InscribedBall,
            truncation: None,
            discrepancy_budget: None,
            delay: 2,
            delta: None,
            keep_losses: false,
        }
    }

    pub fn memory_for(&self, problem: &ControlProblem) -> usize {
        self.memory
            .unwrap_or_else(|| default_memory(problem.horizon(), problem.controller.gamma))
    }
}

/// Trajectory of one control run; vectors are indexed by `t − 1`.
#[derive(Debug, Clone)]
pub struct ControlRun {
    pub arm: String,
    pub memory: usize,
    pub truncation: usize,
    pub observations: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    /// `c_t(y_t, u_t)`.
    pub costs: Vec<f64>,
    /// Reconstructed `y_t(K)`.
    pub signals: Vec<DVector<f64>>,
    /// Embedded policies actually played.
    pub decisions: Vec<DVector<f64>>,
    /// `f_t` on the played window, from `t = m` on.
    pub reduced: Vec<Option<f64>>,
    /// `|c_t(y_t, u_t) − f_t|`, zero before `t = m`.
    pub discrepancy: Vec<f64>,
    pub updated: Vec<bool>,
    pub logdet: Vec<f64>,
    pub trace: UpdateTrace,
    pub constants: ReductionConstants,
    pub set: ConvexSet,
    /// Reduced losses for `t = m..T` when requested.
    pub losses: Vec<AffineMemoryLoss>,
}

impl ControlRun {
    pub fn total_cost(&self) -> f64 {
        self.costs.iter().sum()
    }

    pub fn total_discrepancy(&self) -> f64 {
        self.discrepancy.iter().sum()
    }

    pub fn max_pair_norm(&self) -> f64 {
        self.observations
            .iter()
            .zip(&self.controls)
            .map(|(y, u)| (y.norm_squared() + u.norm_squared()).sqrt())
            .fold(0.0, f64::max)
    }
}

/// Plays the DRC learner registered as `params.arm`: `K` alone for the first
/// `m` steps, then `u_t = K y_t + Σ_j M_t^{[j]} y_{t−j}(K)` with `M_t` taken
/// from the learner, which sees `c_t(y_t, u_t)` and `H_t` from `t = m` on.
pub fn run_control(
    registry: &LearnerRegistry,
    problem: &ControlProblem,
    params: &ControlParams,
) -> Result<ControlRun> {
    let ControlProblem { instance, controller, costs, noise } = problem;
    let horizon = problem.horizon();
    if !(params.r_m > 0.0 && params.r_m.is_finite()) {
        return Err(Error::config("r_m", format!("must be positive, got {}", params.r_m)));
    }
    let m = params.memory_for(problem);
    let (dx, du, dy) = (instance.dx(), instance.du(), instance.dy());
    let constants = reduction_constants(
        instance,
        controller,
        &ReductionInputs {
            g_c: costs.gradient_constant(),
            r_we: noise.radius,
            r_m: params.r_m,
            memory: m,
            horizon,
        },
    );
    if let Some(budget) = params.discrepancy_budget {
        check_truncation_budget(&constants, budget)?;
    }
    let n = params
        .truncation
        .unwrap_or_else(|| choose_truncation(instance, controller, horizon))
        .max(m);
    let markov = markov_operator(instance, controller, n)?;
    let set = params.set.build(m, du, dy, params.r_m)?;
    let spec = LearnerSpec {
        set: set.clone(),
        eta: params.eta,
        alpha: params.alpha,
        memory: m,
        horizon,
        seed: params.seed,
        metric_scale: m as f64,
        delay: params.delay,
        delta: params.delta,
    };
    let mut learner = registry.build(&params.arm, &spec)?;

    let mut rec = SignalReconstructor::new(markov.clone());
    let mut ctx = ReductionContext::new(&markov, controller, m)?;
    let mut run = ControlRun {
        arm: params.arm.clone(),
        memory: m,
        truncation: n,
        observations: Vec::with_capacity(horizon),
        controls: Vec::with_capacity(horizon),
        costs: Vec::with_capacity(horizon),
        signals: Vec::new(),
        decisions: Vec::with_capacity(horizon),
        reduced: Vec::with_capacity(horizon),
        discrepancy: Vec::with_capacity(horizon),
        updated: Vec::with_capacity(horizon),
        logdet: Vec::with_capacity(horizon),
        trace: UpdateTrace::default(),
        constants,
        set,
        losses: Vec::new(),
    };
    let zero = DVector::zeros(m * du * dy);
    let mut x = instance.x1.clone();
    if x.len() != dx {
        return Err(Error::shape("initial state", dx, x.len()));
    }
    for t in 1..=horizon {
        let y = instance.observe(&x, &noise.e(t, dy)?)?;
        let y_k = rec.push(&y)?.clone();
        let y_mat = ctx.push_signal(y_k)?;
        let decision = if t > m { learner.play().clone() } else { zero.clone() };
        let correction = &*y_mat * &decision;
        rec.commit(correction.clone())?;
        let u = &controller.k * &y + correction;
        let cost = costs.cost(t)?;
        let mut pair = DVector::zeros(dy + du);
        pair.rows_mut(0, dy).copy_from(&y);
        pair.rows_mut(dy, du).copy_from(&u);
        let value = cost.value(&pair)?;
        run.decisions.push(decision);

        let fired = if t >= m {
            let f = ctx.reduce(t, cost)?;
            let f_value = f.eval(&run.decisions[t - m..t])?;
            run.reduced.push(Some(f_value));
            run.discrepancy.push((value - f_value).abs());
            let fired = learner.observe(value, f.hessian_t())?;
            if params.keep_losses {
                run.losses.push(f);
            }
            fired
        } else {
            learner.idle();
            run.reduced.push(None);
            run.discrepancy.push(0.0);
            false
        };
        run.updated.push(fired);
        run.logdet.push(learner.logdet_metric());
        run.observations.push(y);
        run.controls.push(u.clone());
        run.costs.push(value);
        if t < horizon {
            x = instance.step(&x, &u, &noise.w(t, dx)?)?;
        }
    }
    run.signals = rec.signals().to_vec();
    run.trace = learner.trace().clone();
    Ok(run)
}

/// Signals `y_{1..T}(K)` from a direct simulation under `K` alone.
pub fn pure_k_signals(problem: &ControlProblem, horizon: usize) -> Result<Vec<DVector<f64>>> {
    simulate_fixed(problem, None, horizon).map(|sim| sim.signals)
}

/// Observations, inputs and reconstructed signals of a replayed schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyPlay {
    pub observations: Vec<DVector<f64>>,
    pub controls: Vec<DVector<f64>>,
    /// `y_t(K)` recovered online from the observations.
    pub signals: Vec<DVector<f64>>,
    pub truncation_error_bound: f64,
}

/// Plays `policies[t−1]` at step `t`, feeding each policy the signals
/// reconstructed online with `truncation` Markov blocks.
pub fn play_policies(problem: &ControlProblem, policies: &[DrcPolicy], truncation: usize) -> Result<PolicyPlay> {
    let ControlProblem { instance, controller, noise, .. } = problem;
    let (dx, dy) = (instance.dx(), instance.dy());
    let markov = markov_operator(instance, controller, truncation)?;
    let mut rec = SignalReconstructor::new(markov);
    let mut x = instance.x1.clone();
    let mut observations = Vec::with_capacity(policies.len());
    let mut controls = Vec::with_capacity(policies.len());
    for (idx, policy) in policies.iter().enumerate() {
        let t = idx + 1;
        let y = instance.observe(&x, &noise.e(t, dy)?)?;
        rec.push(&y)?;
        let correction = policy.correction(&rec.recent(t, policy.memory()))?;
        rec.commit(correction.clone())?;
        let u = &controller.k * &y + correction;
        x = instance.step(&x, &u, &noise.w(t, dx)?)?;
        observations.push(y);
        controls.push(u);
    }
    let truncation_error_bound = rec.truncation_error_bound();
    Ok(PolicyPlay { observations, controls, signals: rec.signals().to_vec(), truncation_error_bound })
}

struct FixedSimulation {
    signals: Vec<DVector<f64>>,
    costs: Vec<f64>,
}

/// Runs `policy` (or `K` alone) against the problem's schedules, tracking the
/// pure-`K` system alongside for the signals the policy feeds on.
fn simulate_fixed(problem: &ControlProblem, policy: Option<&DrcPolicy>, horizon: usize) -> Result<FixedSimulation> {
    let ControlProblem { instance, controller, costs, noise } = problem;
    let (dx, du, dy) = (instance.dx(), instance.du(), instance.dy());
    if let Some(p) = policy {
        if p.du() != du || p.dy() != dy {
            return Err(Error::shape("policy", format!("{du}x{dy}"), format!("{}x{}", p.du(), p.dy())));
        }
    }
    let mut x = instance.x1.clone();
    let mut x_k = instance.x1.clone();
    let mut signals: Vec<DVector<f64>> = Vec::with_capacity(horizon);
    let mut out_costs = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let e = noise.e(t, dy)?;
        let w = noise.w(t, dx)?;
        let y_k = instance.observe(&x_k, &e)?;
        let u_k = &controller.k * &y_k;
        signals.push(y_k);
        let y = instance.observe(&x, &e)?;
        let mut u = &controller.k * &y;
        if let Some(p) = policy {
            let recent: Vec<DVector<f64>> = (0..p.memory())
                .map(|j| if j < t { signals[t - 1 - j].clone() } else { DVector::zeros(dy) })
                .collect();
            u += p.correction(&recent)?;
        }
        let mut pair = DVector::zeros(dy + du);
        pair.rows_mut(0, dy).copy_from(&y);
        pair.rows_mut(dy, du).copy_from(&u);
        out_costs.push(costs.cost(t)?.value(&pair)?);
        if t < horizon {
            x = instance.step(&x, &u, &w)?;
            x_k = instance.step(&x_k, &u_k, &w)?;
        }
    }
    Ok(FixedSimulation { signals, costs: out_costs })
}

/// `Σ_t c_t(y_t, u_t)` when `policy` is played from the first step.
pub fn comparator_cost(problem: &ControlProblem, policy: &DrcPolicy, horizon: usize) -> Result<f64> {
    Ok(simulate_fixed(problem, Some(policy), horizon)?.costs.iter().sum())
}

/// Full-information objective of a fixed policy over steps `1..T`:
/// `(y_t, u_t) = b_t + Φ_t e(M)` exactly, with `b_t = (y_t(K), K y_t(K))`
/// and `Φ_t = Σ_{i<t} G^{[i]} Y_{t−i}` accumulated through the state.
pub fn control_comparator_objective(
    problem: &ControlProblem,
    memory: usize,
    horizon: usize,
) -> Result<AffineSumObjective> {
    let ControlProblem { instance, controller, costs, .. } = problem;
    let (dx, du, dy) = (instance.dx(), instance.du(), instance.dy());
    let signals = pure_k_signals(problem, horizon)?;
    let closed = controller.closed_loop(instance);
    let mut out_rows = DMatrix::zeros(dy + du, dx);
    out_rows.rows_mut(0, dy).copy_from(&instance.c);
    out_rows.rows_mut(dy, du).copy_from(&(&controller.k * &instance.c));
    let p = memory * du * dy;
    // Ξ_t: state response to e(M).
    let mut xi = DMatrix::zeros(dx, p);
    let mut terms = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let recent: Vec<DVector<f64>> = (0..memory)
            .map(|j| if j < t { signals[t - 1 - j].clone() } else { DVector::zeros(dy) })
            .collect();
        let y_mat = embed_signals(&recent, du)?;
        let mut map = &out_rows * &xi;
        let mut u_rows = map.rows_mut(dy, du);
        u_rows += &y_mat;
        let y_k = &signals[t - 1];
        let mut offset = DVector::zeros(dy + du);
        offset.rows_mut(0, dy).copy_from(y_k);
        offset.rows_mut(dy, du).copy_from(&(&controller.k * y_k));
        terms.push(AffineTerm { base: Arc::new(costs.cost(t)?), offset, map });
        xi = &closed * xi + &instance.b * y_mat;
    }
    AffineSumObjective::new(terms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::cost::CostKind;
    use crate::control::system::{make_stabilizable_system, SystemConfig};
    use crate::losses::AdversaryKind;
    use rand::Rng;

    fn problem(horizon: usize, seed: u64) -> ControlProblem {
        let cfg = SystemConfig { dx: 3, du: 2, dy: 2, kappa: 3.0, gamma: 0.3, kappa_sys: 2.0, seed };
        let (inst, ctrl) = make_stabilizable_system(&cfg).unwrap();
        let costs = CostSchedule::new(CostKind::PseudoHuber, 0.5, 2.0, 4, horizon, seed).unwrap();
        let noise = NoiseSchedule::new(
            AdversaryKind::SeededBounded { radius: 1.0 },
            AdversaryKind::Sinusoidal { period: 13.0 },
            0.5,
            horizon,
            seed,
        )
        .unwrap();
        ControlProblem::new(inst, ctrl, costs, noise).unwrap()
    }

    #[test]
    fn silent_origin_stays_at_zero() {
        let mut p = problem(60, 1);
        p.noise = NoiseSchedule::silent(60);
        let run = run_control(&LearnerRegistry::default(), &p, &ControlParams::new(0.1, 1.0, 0.5, 3)).unwrap();
        assert!(run.observations.iter().chain(&run.controls).all(|v| v.amax() == 0.0));
        assert!(run.costs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn objective_matches_resimulation() {
        let p = problem(80, 2);
        let m = 3;
        let obj = control_comparator_objective(&p, m, 80).unwrap();
        let mut rng = crate::rng::stream(4, crate::rng::Stream::Probe);
        for _ in 0..5 {
            let x = DVector::from_fn(m * 4, |_, _| rng.random_range(-0.4..0.4));
            let policy = DrcPolicy::from_embedding(&x, m, 2, 2).unwrap();
            let direct = comparator_cost(&p, &policy, 80).unwrap();
            let via = obj.value(&x).unwrap() * 80.0;
            assert!((direct - via).abs() <= 1e-9 * direct.abs().max(1.0), "{direct} vs {via}");
        }
        let zero = DrcPolicy::zero(m, 2, 2);
        assert_eq!(comparator_cost(&p, &zero, 80).unwrap(), comparator_cost(&p, &zero, 80).unwrap());
    }

    #[test]
    fn zero_policy_costs_equal_pure_k_run() {
        let p = problem(40, 5);
        let mut params = ControlParams::new(0.1, 1.0, 0.5, 9);
        params.memory = Some(50);
        // With m > T the learner never plays, so the run is the pure-K run.
        let run = run_control(&LearnerRegistry::default(), &p, &params).unwrap();
        let cost = comparator_cost(&p, &DrcPolicy::zero(2, 2, 2), 40).unwrap();
        assert!((run.total_cost() - cost).abs() <= 1e-12 * cost.max(1.0));
    }

    #[test]
    fn reduced_loss_matches_cost_without_truncation() {
        let p = problem(30, 6);
        let mut params = ControlParams::new(0.2, 1.0, 0.5, 1);
        params.memory = Some(3);
        let run = run_control(&LearnerRegistry::default(), &p, &params).unwrap();
        // Before t = 2m no policy older than m steps has been played, so the
        // memory window covers every correction.
        for t in 3..=6 {
            assert!(run.discrepancy[t - 1] <= 1e-12 * run.costs[t - 1].max(1.0));
        }
    }
}
