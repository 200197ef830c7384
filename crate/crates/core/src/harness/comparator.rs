use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{mahalanobis_project, ConvexSet, PsdMatrix};
use crate::losses::{AffineMemoryLoss, BaseLoss};
use crate::rng::{stream, Stream};

pub const DEFAULT_COMPARATOR_TOL: f64 = 1e-8;
pub const MAX_COMPARATOR_ITERS: usize = 100_000;
const PROBES: usize = 1_000;
const NEWTON_ITERS: usize = 100;

/// One term `ℓ(b + Φx)` of a comparator objective.
#[derive(Debug, Clone)]
pub struct AffineTerm {
    pub base: Arc<BaseLoss>,
    pub offset: DVector<f64>,
    pub map: DMatrix<f64>,
}

/// `F(x) = (1/N) Σ_t ℓ_t(b_t + Φ_t x)`, the full-information objective of a
/// fixed decision. Averaging keeps tolerances independent of the horizon.
#[derive(Debug, Clone)]
pub struct AffineSumObjective {
    terms: Vec<AffineTerm>,
    dim: usize,
}

impl AffineSumObjective {
    pub fn new(terms: Vec<AffineTerm>) -> Result<Self> {
        let dim = terms
            .first()
            .ok_or_else(|| Error::HorizonMismatch("comparator objective has no terms".into()))?
            .map
            .ncols();
        for term in &terms {
            if term.map.ncols() != dim || term.map.nrows() != term.offset.len() || term.base.dim() != term.offset.len() {
                return Err(Error::shape("comparator term", dim, term.map.ncols()));
            }
        }
        Ok(AffineSumObjective { terms, dim })
    }

    /// Unary forms `f̄_t` of `losses[t−1]` for `t ≥ first_t`.
    pub fn from_unary(losses: &[AffineMemoryLoss], first_t: usize) -> Result<Self> {
        let mut bases: Vec<Arc<BaseLoss>> = Vec::new();
        let terms = losses
            .iter()
            .skip(first_t.saturating_sub(1))
            .map(|l| {
                // Share identical base losses between terms.
                let base = match bases.iter().find(|b| b.as_ref() == l.base()) {
                    Some(b) => b.clone(),
                    None => {
                        let b = Arc::new(l.base().clone());
                        bases.push(b.clone());
                        b
                    }
                };
                AffineTerm { base, offset: l.offset().clone(), map: l.g_t().clone() }
            })
            .collect();
        Self::new(terms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[AffineTerm] {
        &self.terms
    }

    /// Per-term values at `x`.
    pub fn term_values(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        self.terms
            .iter()
            .map(|term| term.base.value(&(&term.offset + &term.map * x)))
            .collect()
    }

    pub fn value(&self, x: &DVector<f64>) -> Result<f64> {
        Ok(self.term_values(x)?.iter().sum::<f64>() / self.terms.len() as f64)
    }

    pub fn value_and_gradient(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let mut value = 0.0;
        let mut grad = DVector::zeros(self.dim);
        for term in &self.terms {
            let arg = &term.offset + &term.map * x;
            value += term.base.value(&arg)?;
            grad += term.map.transpose() * term.base.gradient(&arg)?;
        }
        let n = self.terms.len() as f64;
        Ok((value / n, grad / n))
    }

    /// Value, gradient and Hessian, all averaged.
    pub fn second_order(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
        let mut value = 0.0;
        let mut grad = DVector::zeros(self.dim);
        let mut hess = DMatrix::zeros(self.dim, self.dim);
        for term in &self.terms {
            let arg = &term.offset + &term.map * x;
            value += term.base.value(&arg)?;
            grad += term.map.transpose() * term.base.gradient(&arg)?;
            hess += term.map.transpose() * term.base.hessian(&arg)? * &term.map;
        }
        let n = self.terms.len() as f64;
        Ok((value / n, grad / n, hess / n))
    }

    /// Upper bound on the gradient's Lipschitz constant.
    pub fn smoothness(&self) -> f64 {
        let sum: f64 = self
            .terms
            .iter()
            .map(|t| t.base.beta_f() * crate::geometry::op_norm(&t.map).powi(2))
            .sum();
        sum / self.terms.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorResult {
    pub point: DVector<f64>,
    /// Averaged objective value.
    pub value: f64,
    /// Sum of the per-term values.
    pub total: f64,
    pub iterations: usize,
    /// Norm of the final gradient mapping.
    pub residual: f64,
    /// Largest improvement any random feasible probe achieved (≤ tol when
    /// verified).
    pub best_probe_improvement: f64,
}

/// Norm of the gradient mapping at `x` with step `1/lipschitz`.
fn gradient_mapping(objective: &AffineSumObjective, set: &ConvexSet, x: &DVector<f64>, lipschitz: f64) -> Result<f64> {
    let (_, g) = objective.value_and_gradient(x)?;
    let step = set.euclidean_project(&(x - g / lipschitz))?;
    Ok(lipschitz * (step - x).norm())
}

/// Projected Newton steps `x⁺ = Π^H[x − H⁻¹∇F]` with Armijo backtracking.
/// Returns the last iterate; convergence is judged by the caller.
fn projected_newton(
    objective: &AffineSumObjective,
    set: &ConvexSet,
    mut x: DVector<f64>,
    lipschitz: f64,
    tol: f64,
) -> Result<(DVector<f64>, usize)> {
    let mut iterations = 0;
    while iterations < NEWTON_ITERS {
        iterations += 1;
        let (fx, g, mut h) = objective.second_order(&x)?;
        // A tiny ridge keeps the metric definite when some direction is flat.
        let ridge = 1e-12 * (1.0 + h.diagonal().amax());
        for i in 0..h.nrows() {
            h[(i, i)] += ridge;
        }
        let metric = PsdMatrix::new((&h + h.transpose()) * 0.5)?;
        let newton = match metric.inverse(ridge * 0.5) {
            Ok(inv) => &x - inv * &g,
            Err(_) => break,
        };
        let target = match mahalanobis_project(set, &metric, &newton) {
            Ok(p) => p,
            Err(_) => break,
        };
        let direction = &target - &x;
        let slope = g.dot(&direction);
        if direction.norm() == 0.0 || slope >= 0.0 {
            break;
        }
        let mut s = 1.0;
        let mut accepted = false;
        while s > 1e-10 {
            let cand = &x + &direction * s;
            if objective.value(&cand)? <= fx + 1e-4 * s * slope {
                x = cand;
                accepted = true;
                break;
            }
            s *= 0.5;
        }
        if !accepted || gradient_mapping(objective, set, &x, lipschitz)? < tol {
            break;
        }
    }
    Ok((x, iterations))
}

/// Minimizes the objective over `set`, stopping when the gradient mapping
/// falls below `tol`. Projected Newton steps run first; accelerated projected
/// gradient (fixed step from the global smoothness bound, gradient-based
/// restarts) finishes whatever they leave. The result is checked against
/// random feasible probes.
pub fn best_fixed_comparator(objective: &AffineSumObjective, set: &ConvexSet, tol: f64) -> Result<ComparatorResult> {
    if set.dim() != objective.dim() {
        return Err(Error::shape("comparator set", objective.dim(), set.dim()));
    }
    let lipschitz = objective.smoothness().max(1e-12);
    let step = 1.0 / lipschitz;
    let (start, mut iterations) = projected_newton(objective, set, set.center(), lipschitz, tol)?;
    let mut x = set.euclidean_project(&start)?;
    let mut residual = gradient_mapping(objective, set, &x, lipschitz)?;
    let mut y = x.clone();
    let mut theta = 1.0_f64;
    while residual >= tol && iterations < MAX_COMPARATOR_ITERS {
        iterations += 1;
        let (_, gy) = objective.value_and_gradient(&y)?;
        let next = set.euclidean_project(&(&y - &gy * step))?;
        if lipschitz * (&next - &y).norm() < tol {
            let (_, gn) = objective.value_and_gradient(&next)?;
            let check = set.euclidean_project(&(&next - &gn * step))?;
            residual = lipschitz * (&check - &next).norm();
            if residual < tol {
                x = next;
                break;
            }
        }
        let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
        if (&y - &next).dot(&(&next - &x)) > 0.0 {
            theta = 1.0;
            y = next.clone();
        } else {
            y = &next + (&next - &x) * ((theta - 1.0) / theta_next);
            theta = theta_next;
        }
        x = next;
    }
    let fx = objective.value(&x)?;
    if residual >= tol {
        return Err(Error::ComparatorNotConverged { residual, iterations });
    }
    let mut rng = stream(0x5eed, Stream::Probe);
    let mut best_probe_improvement = f64::NEG_INFINITY;
    for _ in 0..PROBES {
        let p = set.sample_point(&mut rng);
        best_probe_improvement = best_probe_improvement.max(fx - objective.value(&p)?);
    }
    if best_probe_improvement > tol {
        return Err(Error::ComparatorNotConverged { residual: best_probe_improvement, iterations });
    }
    Ok(ComparatorResult {
        total: fx * objective.len() as f64,
        value: fx,
        point: x,
        iterations,
        residual,
        best_probe_improvement,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_norm_term(center: &[f64]) -> AffineTerm {
        let n = center.len();
        AffineTerm {
            base: Arc::new(BaseLoss::quadratic(PsdMatrix::identity(n), DVector::zeros(n), 0.0, 1.0, 1.0).unwrap()),
            offset: -DVector::from_column_slice(center),
            map: DMatrix::identity(n, n),
        }
    }

    #[test]
    fn common_minimizer_is_recovered() {
        let obj = AffineSumObjective::new(vec![half_norm_term(&[0.3, -0.2]); 5]).unwrap();
        let set = ConvexSet::centered_ball(2, 1.0).unwrap();
        let r = best_fixed_comparator(&obj, &set, 1e-8).unwrap();
        assert!((r.point - DVector::from_vec(vec![0.3, -0.2])).norm() < 1e-6);
    }

    #[test]
    fn two_quadratics_meet_in_the_middle() {
        let obj = AffineSumObjective::new(vec![half_norm_term(&[0.6, 0.0]), half_norm_term(&[0.0, 0.4])]).unwrap();
        let set = ConvexSet::centered_ball(2, 1.0).unwrap();
        let r = best_fixed_comparator(&obj, &set, 1e-10).unwrap();
        assert!((r.point - DVector::from_vec(vec![0.3, 0.2])).norm() < 1e-8);
    }

    #[test]
    fn boundary_minimizer() {
        let obj = AffineSumObjective::new(vec![half_norm_term(&[3.0, 0.0])]).unwrap();
        let set = ConvexSet::centered_ball(2, 1.0).unwrap();
        let r = best_fixed_comparator(&obj, &set, 1e-8).unwrap();
        assert!((r.point - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-7);
    }
}
