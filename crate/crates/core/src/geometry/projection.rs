use nalgebra::DVector;

use super::psd::PsdMatrix;
use super::sets::ConvexSet;
use crate::error::{Error, Result};

pub const MAX_PROJECTION_ITERS: usize = 10_000;
const STEP_TOL: f64 = 1e-10;
const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionReport {
    pub iterations: usize,
    pub residual: f64,
}

/// `argmin_{x ∈ set} (x − p)ᵀ A (x − p)`.
pub fn mahalanobis_project(set: &ConvexSet, a: &PsdMatrix, p: &DVector<f64>) -> Result<DVector<f64>> {
    mahalanobis_project_with_report(set, a, p).map(|(x, _)| x)
}

pub fn mahalanobis_project_with_report(
    set: &ConvexSet,
    a: &PsdMatrix,
    p: &DVector<f64>,
) -> Result<(DVector<f64>, ProjectionReport)> {
    if a.dim() != set.dim() || p.len() != set.dim() {
        return Err(Error::shape(
            "mahalanobis_project",
            set.dim(),
            format!("metric {} / point {}", a.dim(), p.len()),
        ));
    }
    let min = a.min_eigenvalue();
    if !(min > 0.0) {
        return Err(Error::InvalidMetric(format!(
            "metric must be positive definite, smallest eigenvalue {min:.3e}"
        )));
    }
    let done = ProjectionReport { iterations: 0, residual: 0.0 };
    if set.contains_with(p, 0.0) {
        return Ok((p.clone(), done));
    }
    match set {
        ConvexSet::EuclideanBall { center, radius } => Ok((ball_kkt(a, center, *radius, p), done)),
        _ => accelerated_projected_gradient(set, a, p),
    }
}

/// Bisection on the KKT multiplier: `x(λ) = c + (A + λI)^{-1} A (p − c)` with
/// `‖x(λ) − c‖ = r`, solved in the eigenbasis of `A`.
fn ball_kkt(a: &PsdMatrix, center: &DVector<f64>, radius: f64, p: &DVector<f64>) -> DVector<f64> {
    if radius == 0.0 {
        return center.clone();
    }
    let q = a.eigenvectors().transpose() * (p - center);
    let eig = a.eigenvalues();
    let coords = |lambda: f64| {
        DVector::from_iterator(
            q.len(),
            q.iter().zip(eig.iter()).map(|(qi, li)| li * qi / (li + lambda)),
        )
    };
    let mut hi = 1.0_f64;
    while coords(hi).norm() > radius {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > BISECTION_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if coords(mid).norm() > radius {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut y = coords(hi);
    // Rounding in the basis change can push the norm a hair past the radius.
    let n = y.norm();
    if n > radius {
        y *= radius / n;
    }
    center + a.eigenvectors() * y
}

/// FISTA with gradient-based restarts on `½(x − p)ᵀA(x − p)` using the set's
/// Euclidean projector. Stops once a plain projected-gradient step from the
/// current iterate moves less than `STEP_TOL`.
fn accelerated_projected_gradient(
    set: &ConvexSet,
    a: &PsdMatrix,
    p: &DVector<f64>,
) -> Result<(DVector<f64>, ProjectionReport)> {
    let step = 1.0 / a.max_eigenvalue();
    let am = a.matrix();
    let pg = |x: &DVector<f64>| -> Result<DVector<f64>> {
        let grad = am * (x - p);
        set.euclidean_project(&(x - grad * step))
    };
    let mut x = set.euclidean_project(p)?;
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut residual = f64::INFINITY;
    for it in 1..=MAX_PROJECTION_ITERS {
        let next = pg(&y)?;
        let check = pg(&next)?;
        residual = (&check - &next).norm();
        if residual < STEP_TOL {
            return Ok((check, ProjectionReport { iterations: it, residual }));
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        // Restart momentum when it points uphill.
        if (&y - &next).dot(&(&next - &x)) > 0.0 {
            t = 1.0;
            y = next.clone();
        } else {
            y = &next + (&next - &x) * ((t - 1.0) / t_next);
            t = t_next;
        }
        x = next;
    }
    Err(Error::ProjectionNotConverged {
        residual,
        iterations: MAX_PROJECTION_ITERS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use nalgebra::DMatrix;
    use rand::Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn interior_point_is_fixed() {
        let set = ConvexSet::centered_ball(2, 1.0).unwrap();
        let a = PsdMatrix::from_diagonal(&[1.0, 4.0]).unwrap();
        assert_eq!(mahalanobis_project(&set, &a, &v(&[0.3, -0.2])).unwrap(), v(&[0.3, -0.2]));
    }

    #[test]
    fn axis_cases_by_hand() {
        let set = ConvexSet::centered_ball(2, 1.0).unwrap();
        let a = PsdMatrix::from_diagonal(&[1.0, 4.0]).unwrap();
        let x = mahalanobis_project(&set, &a, &v(&[2.0, 0.0])).unwrap();
        assert!((x - v(&[1.0, 0.0])).norm() < 1e-10);
        let x = mahalanobis_project(&set, &a, &v(&[0.0, 2.0])).unwrap();
        assert!((x - v(&[0.0, 1.0])).norm() < 1e-10);
    }

    #[test]
    fn identity_metric_matches_euclidean() {
        let mut rng = stream(9, Stream::Probe);
        let sets = [
            ConvexSet::ball(v(&[0.5, -1.0, 0.0]), 0.7).unwrap(),
            ConvexSet::boxed(v(&[-1.0, -1.0, -1.0]), v(&[1.0, 0.0, 2.0])).unwrap(),
            ConvexSet::operator_l1(3, 1, 1, 1.0).unwrap(),
        ];
        for set in &sets {
            let id = PsdMatrix::identity(set.dim());
            for _ in 0..100 {
                let p = DVector::from_fn(3, |_, _| rng.random_range(-3.0..3.0));
                let a = mahalanobis_project(set, &id, &p).unwrap();
                let b = set.euclidean_project(&p).unwrap();
                assert!((a - b).amax() <= 1e-8);
            }
        }
    }

    #[test]
    fn non_psd_metric_rejected() {
        let set = ConvexSet::centered_ball(2, 1.0).unwrap();
        let a = PsdMatrix::new(DMatrix::from_diagonal(&v(&[0.0, 1.0]))).unwrap();
        assert!(matches!(
            mahalanobis_project(&set, &a, &v(&[3.0, 3.0])),
            Err(Error::InvalidMetric(_))
        ));
    }
}
