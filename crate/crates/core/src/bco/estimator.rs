use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_unit_ball, sample_unit_sphere, PsdMatrix};
use crate::losses::AffineMemoryLoss;
use crate::rng::{stream, Stream};

/// Smooth function on `R^d` with an analytic gradient.
pub trait UnaryFunction {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
}

impl UnaryFunction for AffineMemoryLoss {
    fn dim(&self) -> usize {
        AffineMemoryLoss::dim(self)
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.eval_unary(x).expect("dimension checked by caller")
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.grad_unary(x).expect("dimension checked by caller")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub samples: usize,
    /// Mean of `d·f̄(o + A^{-1/2}v)·A^{1/2}v`.
    pub empirical_mean: DVector<f64>,
    /// Per-coordinate standard error of the empirical mean.
    pub empirical_se: DVector<f64>,
    /// Monte-Carlo mean of `∇f̄(o + A^{-1/2}u)`, `u` uniform in the unit ball.
    pub smoothed_gradient: DVector<f64>,
    pub smoothed_se: DVector<f64>,
    pub exact_gradient: DVector<f64>,
    pub gap_smoothed: f64,
    pub gap_exact: f64,
    /// Every coordinate of the difference lies within three combined
    /// standard errors.
    pub within_3sigma_smoothed: bool,
    pub within_3sigma_exact: bool,
}

struct Moments {
    n: usize,
    mean: DVector<f64>,
    m2: DVector<f64>,
}

impl Moments {
    fn new(d: usize) -> Self {
        Moments { n: 0, mean: DVector::zeros(d), m2: DVector::zeros(d) }
    }
    fn push(&mut self, x: &DVector<f64>) {
        self.n += 1;
        let delta = x - &self.mean;
        self.mean += &delta / self.n as f64;
        let delta2 = x - &self.mean;
        self.m2 += delta.component_mul(&delta2);
    }
    fn standard_error(&self) -> DVector<f64> {
        let n = self.n as f64;
        self.m2.map(|s| (s / (n - 1.0) / n).sqrt())
    }
}

fn within(diff: &DVector<f64>, a: &DVector<f64>, b: &DVector<f64>) -> bool {
    diff.iter()
        .zip(a.iter().zip(b.iter()))
        .all(|(d, (x, y))| d.abs() <= 3.0 * (x * x + y * y).sqrt())
}

/// Compares the one-point ellipsoidal estimator's empirical mean with the
/// gradient of the ellipsoidal smoothing (first-order Monte-Carlo oracle with
/// the same sample count) and with the exact gradient.
pub fn estimator_mean_check<F: UnaryFunction + ?Sized>(
    f: &F,
    o: &DVector<f64>,
    a: &PsdMatrix,
    samples: usize,
    seed: u64,
) -> Result<EstimatorReport> {
    if samples < 10_000 {
        return Err(Error::config("samples", format!("need at least 10000, got {samples}")));
    }
    let d = f.dim();
    if o.len() != d || a.dim() != d {
        return Err(Error::shape("estimator_mean_check", d, format!("point {} / metric {}", o.len(), a.dim())));
    }
    let inv_sqrt = a.inv_sqrt(f64::MIN_POSITIVE)?;
    let sqrt = a.sqrt();
    let mut sphere = stream(seed, Stream::Sphere);
    let mut ball = stream(seed, Stream::Probe);
    let mut est = Moments::new(d);
    let mut smooth = Moments::new(d);
    for _ in 0..samples {
        let v = sample_unit_sphere(d, &mut sphere)?.into_inner();
        let x = o + inv_sqrt.matrix() * &v;
        est.push(&(&sqrt * &v * (d as f64 * f.value(&x))));
        let u = sample_unit_ball(d, &mut ball)?;
        smooth.push(&f.gradient(&(o + inv_sqrt.matrix() * u)));
    }
    let exact = f.gradient(o);
    let (es, ss) = (est.standard_error(), smooth.standard_error());
    let diff_s = &est.mean - &smooth.mean;
    let diff_e = &est.mean - &exact;
    Ok(EstimatorReport {
        samples,
        within_3sigma_smoothed: within(&diff_s, &es, &ss),
        within_3sigma_exact: within(&diff_e, &es, &DVector::zeros(d)),
        gap_smoothed: diff_s.norm(),
        gap_exact: diff_e.norm(),
        empirical_mean: est.mean,
        empirical_se: es,
        smoothed_gradient: smooth.mean,
        smoothed_se: ss,
        exact_gradient: exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant;
    impl UnaryFunction for Constant {
        fn dim(&self) -> usize {
            3
        }
        fn value(&self, _: &DVector<f64>) -> f64 {
            2.5
        }
        fn gradient(&self, _: &DVector<f64>) -> DVector<f64> {
            DVector::zeros(3)
        }
    }

    #[test]
    fn constant_function_has_zero_mean_estimate() {
        let r = estimator_mean_check(&Constant, &DVector::zeros(3), &PsdMatrix::identity(3), 100_000, 4).unwrap();
        assert!(r.within_3sigma_exact, "{:?}", r.empirical_mean);
    }

    #[test]
    fn too_few_samples_rejected() {
        assert!(estimator_mean_check(&Constant, &DVector::zeros(3), &PsdMatrix::identity(3), 10, 4).is_err());
    }
}
