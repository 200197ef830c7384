//! Instance families and single-cell runners shared by the sweeps, the CLI
//! and the acceptance suite.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::bounds::{bound_diagnostics, BoundInputs, BoundReport};
use super::comparator::{best_fixed_comparator, AffineSumObjective, ComparatorResult, DEFAULT_COMPARATOR_TOL};
use super::regret::{compute_regret, CertificateConstants, RegretRecord};
use crate::bco::{run_arm, BcoRun, LearnerRegistry, RunParams};
use crate::control::{
    control_comparator_objective, make_stabilizable_system, markov_operator, run_control, ControlParams,
    ControlProblem, ControlRun, CostKind, CostSchedule, NoiseSchedule, PolicySet, SystemConfig,
};
use crate::error::{Error, Result};
use crate::losses::{
    convolution_modulus_lower_bound, make_synthetic_bcom_instance, AdversaryKind, BaseKind, Certificate,
    SyntheticConfig, SyntheticInstance,
};

/// Step size as a function of the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaRule {
    Fixed(f64),
    /// `c / √T`.
    InvSqrt(f64),
}

impl EtaRule {
    pub fn value(&self, horizon: usize) -> f64 {
        match *self {
            EtaRule::Fixed(eta) => eta,
            EtaRule::InvSqrt(c) => c / (horizon.max(1) as f64).sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        let v = match *self {
            EtaRule::Fixed(v) | EtaRule::InvSqrt(v) => v,
        };
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::config("eta", format!("must be positive, got {v}")));
        }
        Ok(())
    }
}

/// Horizon grid used throughout the scaling experiments.
pub const SCALING_GRID: [usize; 5] = [1 << 10, 1 << 11, 1 << 12, 1 << 13, 1 << 14];

/// Horizon of the Toeplitz proxy for `κ(G)`: several memory lengths, still
/// cheap to factor.
fn modulus_horizon(memory: usize) -> usize {
    4 * memory
}

// ---------------------------------------------------------------- BCO-M

/// Synthetic BCO-M instances plus learner settings. Unset instance fields
/// take the generator defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcomFamily {
    pub dim: usize,
    pub memory: usize,
    pub alpha_f: f64,
    pub beta_f: f64,
    pub r_h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<BaseKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adversary: Option<AdversaryKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_offset: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signal_jitter: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_decay: Option<f64>,
    pub eta: EtaRule,
    #[serde(default = "one")]
    pub metric_scale: f64,
    /// Gradient delay `d₀` of the `delay` learner; also the `d₀` entering the
    /// evaluated bound.
    #[serde(default = "two")]
    pub delay: usize,
    /// Exploration radius of the `spherical` learner.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

fn one() -> f64 {
    1.0
}

fn two() -> usize {
    2
}

impl BcomFamily {
    /// `d = 4`, `m = 4`, pseudo-Huber with `α_f = 0.5`, `β_f = 2`, `η = 1/√T`.
    pub fn scaling_default() -> Self {
        BcomFamily {
            dim: 4,
            memory: 4,
            alpha_f: 0.5,
            beta_f: 2.0,
            r_h: 16.0,
            base: Some(BaseKind::PseudoHuber),
            adversary: None,
            domain_radius: None,
            target_offset: None,
            drift: None,
            signal_jitter: None,
            tail_decay: None,
            eta: EtaRule::InvSqrt(1.0),
            metric_scale: 1.0,
            delay: 2,
            delta: None,
        }
    }

    pub fn instance_config(&self, horizon: usize, seed: u64) -> SyntheticConfig {
        let mut c = SyntheticConfig::new(self.dim, self.memory, horizon, self.alpha_f, self.beta_f, self.r_h, seed);
        if let Some(v) = self.base {
            c.base = v;
        }
        if let Some(v) = self.adversary {
            c.adversary = v;
        }
        if let Some(v) = self.domain_radius {
            c.domain_radius = v;
        }
        if let Some(v) = self.target_offset {
            c.target_offset = v;
        }
        if let Some(v) = self.drift {
            c.drift = v;
        }
        if let Some(v) = self.signal_jitter {
            c.signal_jitter = v;
        }
        if let Some(v) = self.tail_decay {
            c.tail_decay = v;
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.instance_config(1, 0).validate()?;
        self.eta.validate()?;
        self.run_params(1, 0).spec(&crate::geometry::ConvexSet::centered_ball(1, 1.0)?).validate()
    }

    pub fn run_params(&self, horizon: usize, seed: u64) -> RunParams {
        RunParams {
            eta: self.eta.value(horizon),
            memory: self.memory,
            alpha: self.alpha_f,
            horizon,
            seed,
            metric_scale: self.metric_scale,
            delay: self.delay,
            delta: self.delta,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BcomOutcome {
    pub record: RegretRecord,
    pub run: BcoRun,
    pub comparator: ComparatorResult,
    pub certificate: Certificate,
    pub bound: BoundReport,
}

/// Regret of `run` against the best fixed point of `instance`, counted from
/// `t = m`.
pub fn bcom_record(
    instance: &SyntheticInstance,
    run: &BcoRun,
    seed: u64,
    config_hash: &str,
) -> Result<(RegretRecord, ComparatorResult)> {
    let m = instance.certificate.memory;
    let objective = AffineSumObjective::from_unary(&instance.losses, m)?;
    let comparator = best_fixed_comparator(&objective, &instance.set, DEFAULT_COMPARATOR_TOL)?;
    let comparator_losses = AffineSumObjective::from_unary(&instance.losses, 1)?.term_values(&comparator.point)?;
    let cum_regret = compute_regret(&run.values, &comparator_losses, m)?;
    let c = &instance.certificate;
    let record = RegretRecord {
        arm: run.arm.clone(),
        seed,
        config_hash: config_hash.to_string(),
        first_t: m,
        losses: run.values.clone(),
        comparator_losses,
        cum_regret,
        updated: run.updated.clone(),
        logdet: run.logdet.clone(),
        comparator: comparator.point.iter().copied().collect(),
        comparator_total: comparator.total,
        certificate: CertificateConstants {
            alpha: c.alpha,
            beta: c.beta,
            g: c.g_f,
            d: c.diameter,
            r_h: c.r_h,
            kappa0: c.kappa0,
        },
        wall_clock_secs: 0.0,
    };
    Ok((record, comparator))
}

pub fn bcom_bound_inputs(instance: &SyntheticInstance, params: &RunParams) -> Result<BoundInputs> {
    let c = &instance.certificate;
    let first = instance
        .losses
        .first()
        .ok_or_else(|| Error::HorizonMismatch("empty loss sequence".into()))?;
    Ok(BoundInputs {
        alpha: c.alpha,
        beta: c.beta,
        g: c.g_f,
        d: c.diameter,
        r_h: c.r_h,
        modulus: convolution_modulus_lower_bound(first.blocks(), modulus_horizon(c.memory)),
        dim: c.dim,
        memory: c.memory,
        delay: params.delay,
        eta: params.eta,
        horizon: params.horizon,
    })
}

/// Generates the instance for `(horizon, seed)`, plays `arm` and measures
/// regret and the evaluated bound.
pub fn run_bcom_cell(
    registry: &LearnerRegistry,
    family: &BcomFamily,
    arm: &str,
    horizon: usize,
    seed: u64,
    config_hash: &str,
) -> Result<BcomOutcome> {
    let start = Instant::now();
    let instance = make_synthetic_bcom_instance(&family.instance_config(horizon, seed))?;
    let params = family.run_params(horizon, seed);
    let run = run_arm(registry, arm, &instance.losses, &instance.set, &params)?;
    let (mut record, comparator) = bcom_record(&instance, &run, seed, config_hash)?;
    let bound = bound_diagnostics(record.final_regret(), &bcom_bound_inputs(&instance, &params)?, 0.0);
    record.wall_clock_secs = start.elapsed().as_secs_f64();
    Ok(BcomOutcome { record, run, comparator, certificate: instance.certificate, bound })
}

// -------------------------------------------------------------- control

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemShape {
    pub dx: usize,
    pub du: usize,
    pub dy: usize,
    pub kappa: f64,
    pub gamma: f64,
    pub kappa_sys: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec {
    pub kind: CostKind,
    pub alpha_c: f64,
    pub beta_c: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub w: AdversaryKind,
    pub e: AdversaryKind,
    /// `R_{w,e}`.
    pub radius: f64,
    #[serde(default = "one")]
    pub observation_scale: f64,
    /// Confine perturbations to the first input direction `B e₁`.
    #[serde(default)]
    pub w_along_input: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlFamily {
    pub system: SystemShape,
    pub cost: CostSpec,
    pub noise: NoiseSpec,
    pub r_m: f64,
    pub eta: EtaRule,
    /// Curvature handed to the learner; defaults to `α_c`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Defaults to `ceil(log T / log(1/(1−γ)))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<usize>,
    #[serde(default = "inscribed")]
    pub set: PolicySet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrepancy_budget: Option<f64>,
    #[serde(default = "two")]
    pub delay: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
}

fn inscribed() -> PolicySet {
    PolicySet::InscribedBall
}

impl ControlFamily {
    /// Two states, scalar input and output, `γ = 0.5`; perturbations along
    /// the input direction with small observation noise.
    pub fn scaling_default() -> Self {
        ControlFamily {
            system: SystemShape { dx: 2, du: 1, dy: 1, kappa: 2.0, gamma: 0.5, kappa_sys: 1.0 },
            cost: CostSpec { kind: CostKind::PseudoHuber, alpha_c: 0.5, beta_c: 2.0 },
            noise: NoiseSpec {
                w: AdversaryKind::SignAlternating,
                e: AdversaryKind::SeededBounded { radius: 1.0 },
                radius: 1.0,
                observation_scale: 0.05,
                w_along_input: true,
            },
            r_m: 2.0,
            eta: EtaRule::InvSqrt(3.0),
            alpha: None,
            memory: None,
            set: PolicySet::InscribedBall,
            truncation: None,
            discrepancy_budget: None,
            delay: 2,
            delta: None,
        }
    }

    pub fn system_config(&self, seed: u64) -> SystemConfig {
        let s = self.system;
        SystemConfig { dx: s.dx, du: s.du, dy: s.dy, kappa: s.kappa, gamma: s.gamma, kappa_sys: s.kappa_sys, seed }
    }

    pub fn validate(&self) -> Result<()> {
        self.system_config(0).validate()?;
        let dim = self.system.dy + self.system.du;
        CostSchedule::new(self.cost.kind, self.cost.alpha_c, self.cost.beta_c, dim, 1, 0).map_err(|e| e.at("cost"))?;
        NoiseSchedule::new(self.noise.w, self.noise.e, self.noise.radius, 1, 0)?
            .with_observation_scale(self.noise.observation_scale)?;
        if !(self.r_m > 0.0 && self.r_m.is_finite()) {
            return Err(Error::config("r_m", format!("must be positive, got {}", self.r_m)));
        }
        self.eta.validate()?;
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::config("alpha", format!("must be positive, got {a}")));
            }
        }
        if self.memory == Some(0) {
            return Err(Error::config("memory", "must be at least 1"));
        }
        if self.truncation == Some(0) {
            return Err(Error::config("truncation", "must be at least 1"));
        }
        if self.delay == 0 {
            return Err(Error::config("delay", "must be at least 1"));
        }
        Ok(())
    }

    pub fn problem(&self, horizon: usize, seed: u64) -> Result<ControlProblem> {
        let (instance, controller) = make_stabilizable_system(&self.system_config(seed))?;
        let costs = CostSchedule::new(
            self.cost.kind,
            self.cost.alpha_c,
            self.cost.beta_c,
            instance.dy() + instance.du(),
            horizon,
            seed,
        )?;
        let mut noise = NoiseSchedule::new(self.noise.w, self.noise.e, self.noise.radius, horizon, seed)?
            .with_observation_scale(self.noise.observation_scale)?;
        if self.noise.w_along_input {
            noise = noise.with_w_direction(instance.b.column(0).into_owned())?;
        }
        ControlProblem::new(instance, controller, costs, noise)
    }

    pub fn params(&self, arm: &str, horizon: usize, seed: u64) -> ControlParams {
        let mut p = ControlParams::new(
            self.eta.value(horizon),
            self.r_m,
            self.alpha.unwrap_or(self.cost.alpha_c),
            seed,
        );
        p.arm = arm.to_string();
        p.memory = self.memory;
        p.set = self.set;
        p.truncation = self.truncation;
        p.discrepancy_budget = self.discrepancy_budget;
        p.delay = self.delay;
        p.delta = self.delta;
        p
    }
}

#[derive(Debug, Clone)]
pub struct ControlOutcome {
    pub record: RegretRecord,
    pub run: ControlRun,
    pub problem: ControlProblem,
    pub comparator: ComparatorResult,
    pub bound: BoundReport,
    /// `Σ_t |c_t(y_t, u_t) − f_t|`.
    pub discrepancy: f64,
}

/// Certified constants of the reduced BCO-M problem for a finished run.
pub fn control_bound_inputs(problem: &ControlProblem, run: &ControlRun, eta: f64, delay: usize) -> Result<BoundInputs> {
    let c = &run.constants;
    let m = run.memory;
    let (du, dy) = (problem.instance.du(), problem.instance.dy());
    let gain = c.markov_sum * (m as f64).sqrt() * c.signal_bound;
    let markov = markov_operator(&problem.instance, &problem.controller, m.max(1))?;
    Ok(BoundInputs {
        alpha: problem.costs.alpha_c,
        beta: problem.costs.beta_c,
        g: c.g_f,
        d: c.diameter,
        r_h: (gain * gain).max(1.0),
        modulus: convolution_modulus_lower_bound(&markov.blocks()[..m], modulus_horizon(m)),
        dim: m * du * dy,
        memory: m,
        delay,
        eta,
        horizon: problem.horizon(),
    })
}

pub fn run_control_cell(
    registry: &LearnerRegistry,
    family: &ControlFamily,
    arm: &str,
    horizon: usize,
    seed: u64,
    config_hash: &str,
) -> Result<ControlOutcome> {
    let start = Instant::now();
    let problem = family.problem(horizon, seed)?;
    let params = family.params(arm, horizon, seed);
    let run = run_control(registry, &problem, &params)?;
    let objective = control_comparator_objective(&problem, run.memory, horizon)?;
    let comparator = best_fixed_comparator(&objective, &run.set, DEFAULT_COMPARATOR_TOL)?;
    let comparator_losses = objective.term_values(&comparator.point)?;
    let cum_regret = compute_regret(&run.costs, &comparator_losses, 1)?;
    let c = run.constants;
    let inputs = control_bound_inputs(&problem, &run, params.eta, params.delay)?;
    // Steps before the learner starts cost at most β_c R²/2 each.
    let warmup = run.memory as f64 * problem.costs.beta_c * c.radius * c.radius / 2.0;
    let extra = c.approximation + c.total_slack + warmup;
    let measured = *cum_regret.last().unwrap_or(&0.0);
    let bound = bound_diagnostics(measured, &inputs, extra);
    let record = RegretRecord {
        arm: run.arm.clone(),
        seed,
        config_hash: config_hash.to_string(),
        first_t: 1,
        losses: run.costs.clone(),
        comparator_losses,
        cum_regret,
        updated: run.updated.clone(),
        logdet: run.logdet.clone(),
        comparator: comparator.point.iter().copied().collect(),
        comparator_total: comparator.total,
        certificate: CertificateConstants {
            alpha: problem.costs.alpha_c,
            beta: problem.costs.beta_c,
            g: c.g_f,
            d: c.diameter,
            r_h: inputs.r_h,
            kappa0: problem.costs.beta_c / problem.costs.alpha_c,
        },
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    let discrepancy = run.total_discrepancy();
    Ok(ControlOutcome { record, run, problem, comparator, bound, discrepancy })
}
