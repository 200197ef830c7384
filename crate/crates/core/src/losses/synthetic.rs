use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::adversary::{AdversaryKind, AdversarySchedule};
use super::affine::AffineMemoryLoss;
use super::base::BaseLoss;
use crate::error::{Error, Result};
use crate::geometry::{op_norm, sample_unit_sphere, ConvexSet, PsdMatrix};
use crate::rng::{stream, Stream};

/// Slack kept between the realized `max_t ‖H_t‖` and the declared `R_H`.
pub const R_H_MARGIN: f64 = 1.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseKind {
    Quadratic,
    PseudoHuber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub memory: usize,
    pub horizon: usize,
    pub alpha_f: f64,
    pub beta_f: f64,
    pub r_h: f64,
    #[serde(default = "default_base")]
    pub base: BaseKind,
    #[serde(default = "default_adversary")]
    pub adversary: AdversaryKind,
    pub seed: u64,
    /// Radius of the decision ball centered at the origin.
    #[serde(default = "one")]
    pub domain_radius: f64,
    /// Distance of the planted minimizer from the origin, as a fraction of
    /// the radius.
    #[serde(default = "default_target")]
    pub target_offset: f64,
    /// How far per-step minimizers wander around the planted point, as a
    /// fraction of the radius.
    #[serde(default = "default_drift")]
    pub drift: f64,
    /// Relative size of the time-varying part of the signals `Y_t`.
    #[serde(default = "default_jitter")]
    pub signal_jitter: f64,
    /// Geometric decay of the memory blocks `G^{[i]}`.
    #[serde(default = "default_decay")]
    pub tail_decay: f64,
}

fn default_base() -> BaseKind {
    BaseKind::PseudoHuber
}
fn default_adversary() -> AdversaryKind {
    AdversaryKind::SeededBounded { radius: 1.0 }
}
fn one() -> f64 {
    1.0
}
fn default_target() -> f64 {
    0.5
}
fn default_drift() -> f64 {
    0.2
}
fn default_jitter() -> f64 {
    0.1
}
fn default_decay() -> f64 {
    0.3
}

impl SyntheticConfig {
    pub fn new(dim: usize, memory: usize, horizon: usize, alpha_f: f64, beta_f: f64, r_h: f64, seed: u64) -> Self {
        SyntheticConfig {
            dim,
            memory,
            horizon,
            alpha_f,
            beta_f,
            r_h,
            base: default_base(),
            adversary: default_adversary(),
            seed,
            domain_radius: one(),
            target_offset: default_target(),
            drift: default_drift(),
            signal_jitter: default_jitter(),
            tail_decay: default_decay(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, msg: String| Err(Error::config(path, msg));
        if self.dim == 0 {
            return bad("dim", "must be at least 1".into());
        }
        if self.memory == 0 {
            return bad("memory", "must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon", "must be at least 1".into());
        }
        if !(self.alpha_f > 0.0 && self.alpha_f <= 1.0) {
            return bad("alpha_f", format!("must lie in (0, 1], got {}", self.alpha_f));
        }
        if !(self.beta_f >= 1.0 && self.beta_f >= self.alpha_f && self.beta_f.is_finite()) {
            return bad("beta_f", format!("must be >= max(1, alpha_f), got {}", self.beta_f));
        }
        if !(self.r_h >= 1.0 && self.r_h.is_finite()) {
            return bad("r_h", format!("must be >= 1, got {}", self.r_h));
        }
        if !(self.domain_radius > 0.0 && self.domain_radius.is_finite()) {
            return bad("domain_radius", format!("must be positive, got {}", self.domain_radius));
        }
        if !(self.target_offset >= 0.0 && self.drift >= 0.0 && self.target_offset + self.drift <= 1.0) {
            return bad(
                "target_offset",
                format!(
                    "target_offset and drift must be nonnegative with sum <= 1, got {} + {}",
                    self.target_offset, self.drift
                ),
            );
        }
        if !(self.signal_jitter >= 0.0 && self.signal_jitter < 1.0) {
            return bad("signal_jitter", format!("must lie in [0, 1), got {}", self.signal_jitter));
        }
        if 1.0 + self.signal_jitter > self.r_h {
            return bad("signal_jitter", "signals would exceed r_h".into());
        }
        if !(self.tail_decay >= 0.0 && self.tail_decay < 1.0) {
            return bad("tail_decay", format!("must lie in [0, 1), got {}", self.tail_decay));
        }
        Ok(())
    }
}

/// Certified constants of a BCO-M instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub alpha: f64,
    pub beta: f64,
    pub kappa0: f64,
    /// Bound on `‖∇f_t‖` over windows in `K + unit ball`.
    pub g_f: f64,
    /// Euclidean diameter of `K`.
    pub diameter: f64,
    pub r_h: f64,
    pub memory: usize,
    pub dim: usize,
}

#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub config: SyntheticConfig,
    pub set: ConvexSet,
    pub losses: Vec<AffineMemoryLoss>,
    pub certificate: Certificate,
    /// Point all per-step minimizers wander around.
    pub planted: DVector<f64>,
}

fn gaussian_matrix<R: rand::Rng>(r: usize, c: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

fn unit_op(m: DMatrix<f64>) -> DMatrix<f64> {
    let n = op_norm(&m);
    if n > 0.0 {
        m / n
    } else {
        m
    }
}

/// Generates a BCO-M test bed with fixed memory blocks and time-varying
/// signals and offsets. The memory blocks are rescaled so that
/// `max_t ‖H_t‖ = R_H / 1.05`.
pub fn make_synthetic_bcom_instance(config: &SyntheticConfig) -> Result<SyntheticInstance> {
    config.validate()?;
    let (d, m, horizon) = (config.dim, config.memory, config.horizon);
    let mut rng = stream(config.seed, Stream::Instance);

    let mut blocks: Vec<DMatrix<f64>> = Vec::with_capacity(m);
    blocks.push(DMatrix::identity(d, d) + unit_op(gaussian_matrix(d, d, &mut rng)) * 0.2);
    for i in 1..m {
        blocks.push(unit_op(gaussian_matrix(d, d, &mut rng)) * config.tail_decay.powi(i as i32));
    }

    let signal_schedule = AdversarySchedule::new(config.adversary, horizon, config.seed)?;
    let target_schedule = signal_schedule.derive(1);
    let bound = signal_schedule.bound().max(f64::MIN_POSITIVE);
    // Signals Y_s for s = 2 − m, …, T; indices below 1 reuse Y_1.
    let signals: Vec<Arc<DMatrix<f64>>> = (1..=horizon)
        .map(|t| {
            let a = signal_schedule.vector(t, d)?;
            Ok(Arc::new(DMatrix::identity(d, d) + DMatrix::from_diagonal(&(a * (config.signal_jitter / bound)))))
        })
        .collect::<Result<_>>()?;
    let signal_at = |s: isize| -> Arc<DMatrix<f64>> { signals[(s.max(1) - 1) as usize].clone() };

    let window = |t: usize| -> Vec<Arc<DMatrix<f64>>> { (0..m).map(|i| signal_at(t as isize - i as isize)).collect() };
    let raw_gt = |t: usize, blocks: &[DMatrix<f64>]| -> DMatrix<f64> {
        let w = window(t);
        let mut g = DMatrix::zeros(d, d);
        for (b, y) in blocks.iter().zip(w.iter()) {
            g += b * y.as_ref();
        }
        g
    };
    let max_h = (1..=horizon)
        .map(|t| op_norm(&raw_gt(t, &blocks)).powi(2))
        .fold(0.0_f64, f64::max);
    let scale = (config.r_h / (R_H_MARGIN * max_h)).sqrt();
    let blocks = Arc::new(blocks.into_iter().map(|b| b * scale).collect::<Vec<_>>());

    let base = match config.base {
        BaseKind::PseudoHuber => BaseLoss::pseudo_huber(config.alpha_f, config.beta_f, DVector::zeros(d))?,
        BaseKind::Quadratic => {
            let diag: Vec<f64> = (0..d)
                .map(|i| {
                    if d == 1 {
                        config.alpha_f
                    } else {
                        config.alpha_f + (config.beta_f - config.alpha_f) * i as f64 / (d - 1) as f64
                    }
                })
                .collect();
            BaseLoss::quadratic(PsdMatrix::from_diagonal(&diag)?, DVector::zeros(d), 0.0, config.alpha_f, config.beta_f)?
        }
    };

    let radius = config.domain_radius;
    let direction = sample_unit_sphere(d, &mut rng)?.into_inner();
    let planted = direction * (config.target_offset * radius);
    let target_bound = target_schedule.bound().max(f64::MIN_POSITIVE);
    let set = ConvexSet::centered_ball(d, radius)?;
    let reach = radius + 1.0;

    let mut losses = Vec::with_capacity(horizon);
    let mut g_f = 0.0_f64;
    for t in 1..=horizon {
        let loss_signals = window(t);
        let provisional = AffineMemoryLoss::new(base.clone(), DVector::zeros(d), blocks.clone(), loss_signals.clone())?;
        let target = &planted + target_schedule.vector(t, d)? * (config.drift * radius / target_bound);
        let offset = -(provisional.g_t() * &target);
        let loss = AffineMemoryLoss::new(base.clone(), offset, blocks.clone(), loss_signals)?;
        // ‖∇f_t‖ ≤ ‖[G⁰Y_t … G^{m−1}Y_{t−m+1}]‖ · β · max ‖B_t + Σ G^{[i]}Y z_i‖.
        let stacked = DMatrix::from_fn(d, m * d, |r, c| loss.map(c / d)[(r, c % d)]);
        let arg_bound = loss.offset().norm() + (0..m).map(|i| op_norm(loss.map(i))).sum::<f64>() * reach;
        g_f = g_f.max(op_norm(&stacked) * config.beta_f * arg_bound);
        losses.push(loss);
    }

    let r_h_realized = losses
        .iter()
        .map(|l| l.hessian_t().max_eigenvalue())
        .fold(1.0_f64, f64::max);
    debug_assert!(r_h_realized <= config.r_h);
    Ok(SyntheticInstance {
        config: config.clone(),
        set,
        losses,
        certificate: Certificate {
            alpha: config.alpha_f,
            beta: config.beta_f,
            kappa0: config.beta_f / config.alpha_f,
            g_f,
            diameter: 2.0 * radius,
            r_h: config.r_h,
            memory: m,
            dim: d,
        },
        planted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let cfg = SyntheticConfig::new(3, 2, 40, 0.5, 2.0, 4.0, 5);
        let a = make_synthetic_bcom_instance(&cfg).unwrap();
        let b = make_synthetic_bcom_instance(&cfg).unwrap();
        for (x, y) in a.losses.iter().zip(b.losses.iter()) {
            assert_eq!(x.offset(), y.offset());
            assert_eq!(x.g_t(), y.g_t());
        }
    }

    #[test]
    fn unit_band_quadratic_has_identity_hessian() {
        let mut cfg = SyntheticConfig::new(2, 1, 10, 1.0, 1.0, 2.0, 1);
        cfg.base = BaseKind::Quadratic;
        let inst = make_synthetic_bcom_instance(&cfg).unwrap();
        for l in &inst.losses {
            let h = l.base().hessian(&DVector::zeros(2)).unwrap();
            assert_eq!(h, DMatrix::identity(2, 2));
        }
    }

    #[test]
    fn r_h_respected_with_margin() {
        let cfg = SyntheticConfig::new(4, 4, 100, 0.5, 2.0, 16.0, 3);
        let inst = make_synthetic_bcom_instance(&cfg).unwrap();
        let worst = inst.losses.iter().map(|l| l.hessian_t().max_eigenvalue()).fold(0.0, f64::max);
        assert!((worst - 16.0 / R_H_MARGIN).abs() < 1e-9);
    }

    #[test]
    fn infeasible_band_rejected() {
        let cfg = SyntheticConfig::new(2, 1, 10, 0.9, 0.5, 2.0, 1);
        assert!(matches!(make_synthetic_bcom_instance(&cfg), Err(Error::Config { .. })));
    }
}
