use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::affine::AffineMemoryLoss;
use crate::error::Result;
use crate::geometry::{sample_unit_ball, ConvexSet};
use crate::rng::{stream, Stream};

/// Central finite-difference step for Hessian checks.
pub const FD_HESSIAN_STEP: f64 = 1e-4;
/// Relative agreement required between analytic and finite-difference Hessians.
pub const FD_HESSIAN_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub ok: bool,
    /// Smallest of `λ_min(∇²f̄ − αH)` and `λ_min(βH − ∇²f̄)` over all probes;
    /// negative values are violations.
    pub worst_violation: f64,
    /// Largest relative mismatch between analytic and finite-difference
    /// Hessians.
    pub worst_fd_mismatch: f64,
    pub probes: usize,
}

fn min_eig(m: DMatrix<f64>) -> f64 {
    let sym = (&m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

/// Central second differences of `f̄_t`.
pub fn finite_difference_hessian(f: &AffineMemoryLoss, z: &DVector<f64>, h: f64) -> Result<DMatrix<f64>> {
    let d = z.len();
    let mut out = DMatrix::zeros(d, d);
    let at = |di: usize, si: f64, dj: usize, sj: f64| -> Result<f64> {
        let mut p = z.clone();
        p[di] += si * h;
        p[dj] += sj * h;
        f.eval_unary(&p)
    };
    for i in 0..d {
        for j in i..d {
            let v = (at(i, 1.0, j, 1.0)? - at(i, 1.0, j, -1.0)? - at(i, -1.0, j, 1.0)? + at(i, -1.0, j, -1.0)?)
                / (4.0 * h * h);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    Ok(out)
}

/// Checks `α_f H_t ⪯ ∇²f̄_t(z) ⪯ β_f H_t` at random points of `domain` plus
/// the unit ball, and compares the analytic unary Hessian with central
/// differences. Violations are reported, never raised.
pub fn verify_kappa_convexity(
    f: &AffineMemoryLoss,
    domain: &ConvexSet,
    probes: usize,
    tol: f64,
    seed: u64,
) -> Result<KappaReport> {
    let mut rng = stream(seed, Stream::Probe);
    let h = f.hessian_t().matrix();
    let (alpha, beta) = (f.base().alpha_f(), f.base().beta_f());
    let mut worst = f64::INFINITY;
    let mut worst_fd = 0.0_f64;
    for _ in 0..probes.max(1) {
        let z = domain.sample_point(&mut rng) + sample_unit_ball(f.dim(), &mut rng)?;
        let hess = f.hess_unary(&z)?;
        worst = worst
            .min(min_eig(&hess - h * alpha))
            .min(min_eig(h * beta - &hess));
        let fd = finite_difference_hessian(f, &z, FD_HESSIAN_STEP)?;
        let scale = hess.amax().max(1.0);
        worst_fd = worst_fd.max((fd - &hess).amax() / scale);
    }
    Ok(KappaReport {
        ok: worst >= -tol && worst_fd <= FD_HESSIAN_TOL,
        worst_violation: worst,
        worst_fd_mismatch: worst_fd,
        probes: probes.max(1),
    })
}

/// Block lower-triangular Toeplitz operator of `blocks` over `horizon` steps.
pub fn convolution_operator(blocks: &[DMatrix<f64>], horizon: usize) -> DMatrix<f64> {
    let (r, c) = (blocks[0].nrows(), blocks[0].ncols());
    let mut t = DMatrix::zeros(horizon * r, horizon * c);
    for i in 0..horizon {
        for j in 0..=i {
            if let Some(g) = blocks.get(i - j) {
                t.view_mut((i * r, j * c), (r, c)).copy_from(g);
            }
        }
    }
    t
}

/// `λ_min(T_nᵀT_n)` for the finite convolution operator, a computable proxy
/// for the convolution invertibility modulus.
pub fn convolution_modulus_lower_bound(blocks: &[DMatrix<f64>], horizon: usize) -> f64 {
    if blocks.is_empty() || horizon == 0 {
        return 0.0;
    }
    let t = convolution_operator(blocks, horizon);
    min_eig(t.transpose() * &t).max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusProfile {
    pub horizons: Vec<usize>,
    pub values: Vec<f64>,
    /// Whether the values never increase with the horizon.
    pub nonincreasing: bool,
}

pub fn convolution_modulus_profile(blocks: &[DMatrix<f64>], horizons: &[usize]) -> ModulusProfile {
    let values: Vec<f64> = horizons
        .iter()
        .map(|&n| convolution_modulus_lower_bound(blocks, n))
        .collect();
    let nonincreasing = values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-12);
    ModulusProfile {
        horizons: horizons.to_vec(),
        values,
        nonincreasing,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_convolution_has_unit_modulus() {
        let blocks = vec![DMatrix::identity(2, 2), DMatrix::zeros(2, 2)];
        for n in 1..6 {
            assert!((convolution_modulus_lower_bound(&blocks, n) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_two_tap_against_closed_form() {
        let blocks = vec![DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, -0.9)];
        // LᵀL = [[1.81, -0.9], [-0.9, 1]]: λ_min = (tr − √(tr² − 4 det)) / 2.
        let (a, b, c) = (1.81_f64, -0.9_f64, 1.0_f64);
        let tr = a + c;
        let det = a * c - b * b;
        let want = (tr - (tr * tr - 4.0 * det).sqrt()) / 2.0;
        assert!((convolution_modulus_lower_bound(&blocks, 2) - want).abs() < 1e-12);
    }

    #[test]
    fn quadratic_homogeneity() {
        let blocks = vec![DMatrix::from_row_slice(2, 1, &[1.0, 0.3]), DMatrix::from_row_slice(2, 1, &[0.2, -0.5])];
        let doubled: Vec<_> = blocks.iter().map(|b| b * 2.0).collect();
        let a = convolution_modulus_lower_bound(&blocks, 4);
        let b = convolution_modulus_lower_bound(&doubled, 4);
        assert!((b - 4.0 * a).abs() <= 1e-12 * b.max(1.0));
    }

    #[test]
    fn profile_is_nonincreasing_for_decaying_taps() {
        let blocks = vec![DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 0.5)];
        let p = convolution_modulus_profile(&blocks, &[1, 2, 4, 8, 16]);
        assert!(p.nonincreasing, "{:?}", p.values);
    }
}
