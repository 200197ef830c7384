use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PsdMatrix;
use crate::losses::{AdversaryKind, AdversarySchedule, BaseLoss};
use crate::rng::keyed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostKind {
    /// The same pseudo-Huber cost every step.
    Fixed,
    /// Pseudo-Huber with per-step quadratic and Huber weights.
    PseudoHuber,
    /// `½ vᵀQ_t v` with a per-step random rotation and spectrum.
    Quadratic,
}

/// Oblivious sequence of costs over `(y, u)`, all minimized at the origin
/// so that `‖∇c_t(v)‖ ≤ β_c ‖v‖`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSchedule {
    pub kind: CostKind,
    pub alpha_c: f64,
    pub beta_c: f64,
    /// `d_y + d_u`.
    pub dim: usize,
    pub horizon: usize,
    pub seed: u64,
}

impl CostSchedule {
    pub fn new(kind: CostKind, alpha_c: f64, beta_c: f64, dim: usize, horizon: usize, seed: u64) -> Result<Self> {
        if !(alpha_c > 0.0 && alpha_c <= 1.0 && beta_c >= 1.0 && beta_c.is_finite()) {
            return Err(Error::config(
                "cost",
                format!("need 0 < alpha_c <= 1 <= beta_c, got alpha_c = {alpha_c}, beta_c = {beta_c}"),
            ));
        }
        if dim == 0 {
            return Err(Error::InvalidDimension("cost dimension must be at least 1".into()));
        }
        Ok(CostSchedule { kind, alpha_c, beta_c, dim, horizon, seed })
    }

    /// Gradient constant `G_c` with `‖∇c_t(v)‖ ≤ G_c ‖v‖`.
    pub fn gradient_constant(&self) -> f64 {
        self.beta_c
    }

    /// Cost at time `t ∈ [1, horizon]`.
    pub fn cost(&self, t: usize) -> Result<BaseLoss> {
        if t == 0 || t > self.horizon {
            return Err(Error::HorizonMismatch(format!("cost queried at t = {t} outside [1, {}]", self.horizon)));
        }
        let (a, b, n) = (self.alpha_c, self.beta_c, self.dim);
        let center = DVector::zeros(n);
        let mut rng = keyed(self.seed, t as u64);
        match self.kind {
            CostKind::Fixed => BaseLoss::pseudo_huber(a, b, center),
            CostKind::PseudoHuber => {
                let alpha = a + 0.2 * (b - a) * rng.random::<f64>();
                let s = (b - alpha) * (0.5 + 0.5 * rng.random::<f64>());
                BaseLoss::pseudo_huber_weighted(a, b, alpha, s, center)
            }
            CostKind::Quadratic => {
                let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let q = g.qr().q();
                let spectrum = DVector::from_fn(n, |_, _| rng.random_range(a..=b));
                let m = &q * DMatrix::from_diagonal(&spectrum) * q.transpose();
                let m = (&m + m.transpose()) * 0.5;
                BaseLoss::quadratic(PsdMatrix::new(m)?, center, 0.0, a, b)
            }
        }
    }
}

/// Perturbations `w_t` and observation noise `e_t`, each bounded by `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    pub w: AdversarySchedule,
    pub e: AdversarySchedule,
    pub radius: f64,
    /// Observation noise is bounded by `observation_scale · radius`.
    #[serde(default = "unit")]
    pub observation_scale: f64,
    /// When set, `w_t` is a scalar schedule times this unit vector.
    #[serde(default)]
    pub w_direction: Option<DVector<f64>>,
}

fn unit() -> f64 {
    1.0
}

impl NoiseSchedule {
    pub fn new(w_kind: AdversaryKind, e_kind: AdversaryKind, radius: f64, horizon: usize, seed: u64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::config("noise.radius", format!("must be nonnegative, got {radius}")));
        }
        let base = AdversarySchedule::new(w_kind, horizon, seed)?;
        let e = AdversarySchedule::new(e_kind, horizon, seed)?.derive(2);
        Ok(NoiseSchedule { w: base.derive(1), e, radius, observation_scale: 1.0, w_direction: None })
    }

    pub fn with_observation_scale(mut self, scale: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&scale) {
            return Err(Error::config("noise.observation_scale", format!("must lie in [0, 1], got {scale}")));
        }
        self.observation_scale = scale;
        Ok(self)
    }

    /// Confines perturbations to the line spanned by `direction`.
    pub fn with_w_direction(mut self, direction: DVector<f64>) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::config("noise.w_direction", "must be a nonzero finite vector"));
        }
        self.w_direction = Some(direction / n);
        Ok(self)
    }

    /// No perturbation and no observation noise.
    pub fn silent(horizon: usize) -> Self {
        let zero = AdversarySchedule { kind: AdversaryKind::Constant, horizon, seed: 0 };
        NoiseSchedule { w: zero, e: zero, radius: 0.0, observation_scale: 1.0, w_direction: None }
    }

    fn scaled(s: &AdversarySchedule, radius: f64, t: usize, dim: usize) -> Result<DVector<f64>> {
        let raw = s.vector(t, dim)?;
        let bound = s.bound();
        if radius == 0.0 || bound == 0.0 {
            return Ok(DVector::zeros(dim));
        }
        Ok(raw * (radius / bound))
    }

    pub fn w(&self, t: usize, dx: usize) -> Result<DVector<f64>> {
        match &self.w_direction {
            Some(dir) => {
                if dir.len() != dx {
                    return Err(Error::shape("perturbation direction", dx, dir.len()));
                }
                Ok(dir * Self::scaled(&self.w, self.radius, t, 1)?[0])
            }
            None => Self::scaled(&self.w, self.radius, t, dx),
        }
    }

    pub fn e(&self, t: usize, dy: usize) -> Result<DVector<f64>> {
        Self::scaled(&self.e, self.radius * self.observation_scale, t, dy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn costs_are_stationary_at_origin_and_certified() {
        for kind in [CostKind::Fixed, CostKind::PseudoHuber, CostKind::Quadratic] {
            let s = CostSchedule::new(kind, 0.5, 2.0, 3, 50, 9).unwrap();
            for t in 1..=50 {
                let c = s.cost(t).unwrap();
                let zero = DVector::zeros(3);
                assert_eq!(c.value(&zero).unwrap(), 0.0);
                assert!(c.gradient(&zero).unwrap().amax() < 1e-15);
                let v = DVector::from_vec(vec![0.3, -2.0, 1.0]);
                assert!(c.gradient(&v).unwrap().norm() <= s.gradient_constant() * v.norm() * (1.0 + 1e-12));
            }
        }
        assert_eq!(
            CostSchedule::new(CostKind::Quadratic, 0.5, 2.0, 2, 5, 1).unwrap().cost(3),
            CostSchedule::new(CostKind::Quadratic, 0.5, 2.0, 2, 5, 1).unwrap().cost(3)
        );
    }

    #[test]
    fn noise_is_bounded_and_oblivious() {
        let kinds = [
            AdversaryKind::Constant,
            AdversaryKind::SignAlternating,
            AdversaryKind::Sinusoidal { period: 17.0 },
            AdversaryKind::SeededBounded { radius: 3.0 },
        ];
        for k in kinds {
            let n = NoiseSchedule::new(k, k, 0.7, 40, 3).unwrap();
            for t in 1..=40 {
                assert!(n.w(t, 3).unwrap().norm() <= 0.7 + 1e-12);
                assert!(n.e(t, 2).unwrap().norm() <= 0.7 + 1e-12);
                assert_eq!(n.w(t, 3).unwrap(), n.w(t, 3).unwrap());
            }
        }
        assert_eq!(NoiseSchedule::silent(5).w(2, 2).unwrap(), DVector::zeros(2));
    }
}
