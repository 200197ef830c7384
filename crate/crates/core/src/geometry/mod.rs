//! Dense PSD matrix calculus, sphere sampling and metric projections.

mod projection;
mod psd;
mod sets;
mod sphere;

pub use projection::{mahalanobis_project, ProjectionReport, MAX_PROJECTION_ITERS};
pub use psd::{logdet, PsdMatrix, PSD_SLACK, SYMMETRY_TOL};
pub use sets::{ConvexSet, MEMBERSHIP_TOL};
pub use sphere::{sample_unit_ball, sample_unit_sphere, UnitSphereSample};

use nalgebra::{DMatrix, DVector};

/// Largest singular value.
pub fn op_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .singular_values()
        .iter()
        .fold(0.0_f64, |a, &b| a.max(b))
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}

pub fn max_abs_vec(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |a, &b| a.max(b.abs()))
}
