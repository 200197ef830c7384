use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PsdMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseLossKind {
    /// `½ vᵀQv + bᵀv + c`.
    Quadratic {
        q: PsdMatrix,
        b: DVector<f64>,
        c: f64,
    },
    /// `(alpha/2)‖v − center‖² + s Σ_i (√(1 + (v_i − center_i)²) − 1)`.
    PseudoHuber {
        alpha: f64,
        s: f64,
        center: DVector<f64>,
    },
}

/// Strongly convex, smooth, nonnegative base loss with a curvature
/// certificate `alpha_f·I ⪯ ∇²ℓ ⪯ beta_f·I`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseLoss {
    kind: BaseLossKind,
    alpha_f: f64,
    beta_f: f64,
}

fn check_band(alpha_f: f64, beta_f: f64) -> Result<()> {
    if !(alpha_f > 0.0 && alpha_f <= 1.0 && beta_f >= 1.0 && beta_f.is_finite()) {
        return Err(Error::config(
            "curvature",
            format!("need 0 < alpha_f <= 1 <= beta_f, got alpha_f = {alpha_f}, beta_f = {beta_f}"),
        ));
    }
    Ok(())
}

impl BaseLoss {
    pub fn quadratic(q: PsdMatrix, b: DVector<f64>, c: f64, alpha_f: f64, beta_f: f64) -> Result<Self> {
        check_band(alpha_f, beta_f)?;
        if b.len() != q.dim() {
            return Err(Error::shape("quadratic linear term", q.dim(), b.len()));
        }
        let tol = 1e-10 * beta_f;
        if q.min_eigenvalue() < alpha_f - tol || q.max_eigenvalue() > beta_f + tol {
            return Err(Error::config(
                "curvature",
                format!(
                    "Q spectrum [{:.6}, {:.6}] outside certificate [{alpha_f}, {beta_f}]",
                    q.min_eigenvalue(),
                    q.max_eigenvalue()
                ),
            ));
        }
        let minimizer = -(q.inverse(f64::MIN_POSITIVE)? * &b);
        let min_value = 0.5 * q.quad_form(&minimizer) + b.dot(&minimizer) + c;
        if min_value < -1e-12 * (1.0 + c.abs()) {
            return Err(Error::config("quadratic.c", format!("loss minimum {min_value} is negative")));
        }
        Ok(BaseLoss {
            kind: BaseLossKind::Quadratic { q, b, c },
            alpha_f,
            beta_f,
        })
    }

    /// Pseudo-Huber regularized quadratic with `alpha = alpha_f` and
    /// `s = beta_f − alpha_f`.
    pub fn pseudo_huber(alpha_f: f64, beta_f: f64, center: DVector<f64>) -> Result<Self> {
        check_band(alpha_f, beta_f)?;
        if center.is_empty() {
            return Err(Error::InvalidDimension("pseudo-Huber center is empty".into()));
        }
        Ok(BaseLoss {
            kind: BaseLossKind::PseudoHuber {
                alpha: alpha_f,
                s: beta_f - alpha_f,
                center,
            },
            alpha_f,
            beta_f,
        })
    }

    /// Pseudo-Huber loss with explicit weights inside a wider certificate:
    /// requires `alpha >= alpha_f` and `alpha + s <= beta_f`.
    pub fn pseudo_huber_weighted(alpha_f: f64, beta_f: f64, alpha: f64, s: f64, center: DVector<f64>) -> Result<Self> {
        check_band(alpha_f, beta_f)?;
        if center.is_empty() {
            return Err(Error::InvalidDimension("pseudo-Huber center is empty".into()));
        }
        if !(alpha >= alpha_f && s >= 0.0 && alpha + s <= beta_f * (1.0 + 1e-12)) {
            return Err(Error::config(
                "curvature",
                format!("weights alpha = {alpha}, s = {s} outside certificate [{alpha_f}, {beta_f}]"),
            ));
        }
        Ok(BaseLoss {
            kind: BaseLossKind::PseudoHuber { alpha, s, center },
            alpha_f,
            beta_f,
        })
    }

    /// Replaces the curvature certificate without validation. Only useful for
    /// exercising verifiers on deliberately wrong certificates.
    pub fn with_claimed_curvature(mut self, alpha_f: f64, beta_f: f64) -> Self {
        self.alpha_f = alpha_f;
        self.beta_f = beta_f;
        self
    }

    pub fn kind(&self) -> &BaseLossKind {
        &self.kind
    }

    pub fn alpha_f(&self) -> f64 {
        self.alpha_f
    }

    pub fn beta_f(&self) -> f64 {
        self.beta_f
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            BaseLossKind::Quadratic { b, .. } => b.len(),
            BaseLossKind::PseudoHuber { center, .. } => center.len(),
        }
    }

    /// Global minimizer.
    pub fn minimizer(&self) -> DVector<f64> {
        match &self.kind {
            BaseLossKind::Quadratic { q, b, .. } => {
                -(q.inverse(f64::MIN_POSITIVE).expect("certified positive definite") * b)
            }
            BaseLossKind::PseudoHuber { center, .. } => center.clone(),
        }
    }

    fn check(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::shape("base loss argument", self.dim(), v.len()));
        }
        Ok(())
    }

    pub fn value(&self, v: &DVector<f64>) -> Result<f64> {
        self.check(v)?;
        Ok(match &self.kind {
            BaseLossKind::Quadratic { q, b, c } => 0.5 * q.quad_form(v) + b.dot(v) + c,
            BaseLossKind::PseudoHuber { alpha, s, center } => {
                let mut quad = 0.0;
                let mut hub = 0.0;
                for (vi, ci) in v.iter().zip(center.iter()) {
                    let r = vi - ci;
                    quad += r * r;
                    // √(1+r²) − 1 written to avoid cancellation for small r.
                    hub += r * r / ((1.0 + r * r).sqrt() + 1.0);
                }
                0.5 * alpha * quad + s * hub
            }
        })
    }

    pub fn gradient(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(v)?;
        Ok(match &self.kind {
            BaseLossKind::Quadratic { q, b, .. } => q.matrix() * v + b,
            BaseLossKind::PseudoHuber { alpha, s, center } => DVector::from_iterator(
                v.len(),
                v.iter().zip(center.iter()).map(|(vi, ci)| {
                    let r = vi - ci;
                    alpha * r + s * r / (1.0 + r * r).sqrt()
                }),
            ),
        })
    }

    pub fn hessian(&self, v: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check(v)?;
        Ok(match &self.kind {
            BaseLossKind::Quadratic { q, .. } => q.matrix().clone(),
            BaseLossKind::PseudoHuber { alpha, s, center } => {
                DMatrix::from_diagonal(&DVector::from_iterator(
                    v.len(),
                    v.iter().zip(center.iter()).map(|(vi, ci)| {
                        let r2 = (vi - ci).powi(2);
                        alpha + s / (1.0 + r2).powf(1.5)
                    }),
                ))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pseudo_huber_values() {
        let l = BaseLoss::pseudo_huber(0.5, 2.0, DVector::zeros(2)).unwrap();
        assert_eq!(l.value(&DVector::zeros(2)).unwrap(), 0.0);
        let v = DVector::from_vec(vec![1.0, 0.0]);
        let want = 0.25 + 1.5 * (2f64.sqrt() - 1.0);
        assert!((l.value(&v).unwrap() - want).abs() < 1e-15);
        let h = l.hessian(&DVector::zeros(2)).unwrap();
        assert!((h[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn quadratic_rejects_negative_minimum_and_bad_band() {
        let q = PsdMatrix::identity(2);
        assert!(BaseLoss::quadratic(q.clone(), DVector::from_vec(vec![1.0, 0.0]), 0.0, 1.0, 1.0).is_err());
        assert!(BaseLoss::quadratic(q.clone(), DVector::from_vec(vec![1.0, 0.0]), 0.5, 1.0, 1.0).is_ok());
        assert!(BaseLoss::quadratic(q, DVector::zeros(2), 0.0, 0.5, 0.9).is_err());
        assert!(BaseLoss::pseudo_huber(2.0, 1.0, DVector::zeros(1)).is_err());
    }
}
