use std::f64::consts::PI;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_unit_ball, sample_unit_sphere};
use crate::rng::keyed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryKind {
    Constant,
    Sinusoidal { period: f64 },
    SignAlternating,
    SeededBounded { radius: f64 },
}

/// Oblivious sequence of bounded vectors. Every element is a pure function of
/// `(t, seed)`, so nothing the learner does can influence it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarySchedule {
    pub kind: AdversaryKind,
    pub horizon: usize,
    pub seed: u64,
}

impl AdversarySchedule {
    pub fn new(kind: AdversaryKind, horizon: usize, seed: u64) -> Result<Self> {
        match kind {
            AdversaryKind::Sinusoidal { period } if !(period > 0.0 && period.is_finite()) => {
                return Err(Error::config("adversary.period", format!("must be positive, got {period}")));
            }
            AdversaryKind::SeededBounded { radius } if !(radius >= 0.0 && radius.is_finite()) => {
                return Err(Error::config("adversary.radius", format!("must be nonnegative, got {radius}")));
            }
            _ => {}
        }
        Ok(AdversarySchedule { kind, horizon, seed })
    }

    /// Same kind and horizon, independent stream.
    pub fn derive(&self, salt: u64) -> Self {
        AdversarySchedule {
            seed: self.seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15),
            ..*self
        }
    }

    /// Norm bound of every emitted vector.
    pub fn bound(&self) -> f64 {
        match self.kind {
            AdversaryKind::SeededBounded { radius } => radius,
            _ => 1.0,
        }
    }

    /// Element at time `t ∈ [1, horizon]` in `R^dim`.
    pub fn vector(&self, t: usize, dim: usize) -> Result<DVector<f64>> {
        if t == 0 || t > self.horizon {
            return Err(Error::HorizonMismatch(format!(
                "schedule queried at t = {t} outside [1, {}]",
                self.horizon
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidDimension("schedule dimension must be at least 1".into()));
        }
        let root = (dim as f64).sqrt();
        Ok(match self.kind {
            AdversaryKind::Constant => {
                sample_unit_sphere(dim, &mut keyed(self.seed, 0))?.into_inner()
            }
            AdversaryKind::Sinusoidal { period } => {
                let mut rng = keyed(self.seed, 0);
                DVector::from_fn(dim, |_, _| {
                    let phase = rng.random_range(0.0..2.0 * PI);
                    (2.0 * PI * t as f64 / period + phase).sin() / root
                })
            }
            AdversaryKind::SignAlternating => {
                let sign = if t.is_multiple_of(2) { 1.0 } else { -1.0 };
                DVector::from_element(dim, sign / root)
            }
            AdversaryKind::SeededBounded { radius } => {
                sample_unit_ball(dim, &mut keyed(self.seed, t as u64))? * radius
            }
        })
    }

    /// Scalar element in `[−bound, bound]`.
    pub fn scalar(&self, t: usize) -> Result<f64> {
        Ok(self.vector(t, 1)?[0])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_respected_and_pure() {
        let kinds = [
            AdversaryKind::Constant,
            AdversaryKind::Sinusoidal { period: 37.0 },
            AdversaryKind::SignAlternating,
            AdversaryKind::SeededBounded { radius: 0.3 },
        ];
        for kind in kinds {
            let s = AdversarySchedule::new(kind, 500, 8).unwrap();
            for t in 1..=500 {
                let a = s.vector(t, 3).unwrap();
                assert!(a.norm() <= s.bound() + 1e-12);
                assert_eq!(a, s.vector(t, 3).unwrap());
            }
        }
    }

    #[test]
    fn out_of_horizon_rejected() {
        let s = AdversarySchedule::new(AdversaryKind::Constant, 10, 1).unwrap();
        assert!(s.vector(0, 2).is_err());
        assert!(s.vector(11, 2).is_err());
    }

    #[test]
    fn derived_streams_differ() {
        let s = AdversarySchedule::new(AdversaryKind::SeededBounded { radius: 1.0 }, 10, 1).unwrap();
        assert_ne!(s.vector(3, 2).unwrap(), s.derive(1).vector(3, 2).unwrap());
    }
}
