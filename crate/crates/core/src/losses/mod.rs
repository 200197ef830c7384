//! Affine-memory losses, their unary forms, curvature verifiers and
//! synthetic generators.

mod adversary;
mod affine;
mod base;
mod kappa;
mod synthetic;

pub use adversary::{AdversaryKind, AdversarySchedule};
pub use affine::{AffineMemoryLoss, UnaryView};
pub use base::{BaseLoss, BaseLossKind};
pub use kappa::{
    convolution_modulus_lower_bound, convolution_modulus_profile, convolution_operator,
    finite_difference_hessian, verify_kappa_convexity, KappaReport, ModulusProfile, FD_HESSIAN_STEP,
    FD_HESSIAN_TOL,
};
pub use synthetic::{
    make_synthetic_bcom_instance, BaseKind, Certificate, SyntheticConfig, SyntheticInstance, R_H_MARGIN,
};
