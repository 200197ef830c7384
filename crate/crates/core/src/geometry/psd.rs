use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entry-wise asymmetry accepted when wrapping a matrix.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Negative eigenvalues down to this value are treated as rounding noise.
pub const PSD_SLACK: f64 = 1e-10;

/// Symmetric positive semidefinite matrix with a cached spectral decomposition.
///
/// All matrix functions (square root, inverse square root, inverse, log-det)
/// are evaluated in the eigenbasis, so they commute with the matrix exactly up
/// to rounding.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "DMatrix<f64>", into = "DMatrix<f64>")]
pub struct PsdMatrix {
    entries: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl PartialEq for PsdMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl TryFrom<DMatrix<f64>> for PsdMatrix {
    type Error = Error;
    fn try_from(m: DMatrix<f64>) -> Result<Self> {
        PsdMatrix::new(m)
    }
}

impl From<PsdMatrix> for DMatrix<f64> {
    fn from(p: PsdMatrix) -> Self {
        p.entries
    }
}

impl PsdMatrix {
    /// Wraps `m`, checking symmetry and semidefiniteness. The stored entries
    /// are exactly symmetrized.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidDimension(format!(
                "PSD matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotPsd("non-finite entry".into()));
        }
        let scale = m.iter().fold(1.0_f64, |a, &b| a.max(b.abs()));
        let asym = (&m - m.transpose()).iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotPsd(format!("asymmetry {asym:.3e}")));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Self::from_symmetric(sym)
    }

    /// Symmetrizes `m` before wrapping. Use for products such as `GᵀG` whose
    /// asymmetry is pure rounding.
    pub fn from_gram(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::shape("from_gram", "square", format!("{}x{}", m.nrows(), m.ncols())));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Self::new(sym)
    }

    fn from_symmetric(sym: DMatrix<f64>) -> Result<Self> {
        let eig = SymmetricEigen::new(sym.clone());
        let scale = eig.eigenvalues.iter().fold(1.0_f64, |a, &b| a.max(b.abs()));
        let min = eig.eigenvalues.min();
        if min < -PSD_SLACK * scale {
            return Err(Error::NotPsd(format!("smallest eigenvalue {min:.3e}")));
        }
        Ok(PsdMatrix {
            entries: sym,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::scaled_identity(d, 1.0)
    }

    pub fn scaled_identity(d: usize, s: f64) -> Self {
        PsdMatrix {
            entries: DMatrix::identity(d, d) * s,
            eigenvalues: DVector::from_element(d, s),
            eigenvectors: DMatrix::identity(d, d),
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(diag)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues.min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues.max()
    }

    /// `self + s·other`.
    pub fn add_scaled(&self, s: f64, other: &PsdMatrix) -> Result<Self> {
        if other.dim() != self.dim() {
            return Err(Error::shape("add_scaled", self.dim(), other.dim()));
        }
        let sum = &self.entries + &other.entries * s;
        Self::from_symmetric((&sum + sum.transpose()) * 0.5)
    }

    fn spectral(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let v = &self.eigenvectors;
        let mapped = DVector::from_iterator(self.dim(), self.eigenvalues.iter().map(|&l| f(l)));
        let out = v * DMatrix::from_diagonal(&mapped) * v.transpose();
        (&out + out.transpose()) * 0.5
    }

    fn check_floor(&self, floor: f64) -> Result<()> {
        let min = self.min_eigenvalue();
        if min < floor || floor <= 0.0 && min <= 0.0 {
            return Err(Error::CurvatureFloorViolated {
                min_eigenvalue: min,
                floor,
            });
        }
        Ok(())
    }

    pub fn sqrt(&self) -> DMatrix<f64> {
        self.spectral(|l| l.max(0.0).sqrt())
    }

    /// `A^{-1/2}`, refusing matrices whose spectrum dips below `floor`.
    pub fn inv_sqrt(&self, floor: f64) -> Result<PsdMatrix> {
        self.check_floor(floor)?;
        let m = self.spectral(|l| 1.0 / l.sqrt());
        PsdMatrix::new(m)
    }

    pub fn inverse(&self, floor: f64) -> Result<DMatrix<f64>> {
        self.check_floor(floor)?;
        Ok(self.spectral(|l| 1.0 / l))
    }

    pub fn logdet(&self) -> Result<f64> {
        let min = self.min_eigenvalue();
        if min <= 0.0 {
            return Err(Error::SingularMatrix(min));
        }
        Ok(self.eigenvalues.iter().map(|l| l.ln()).sum())
    }

    /// `xᵀ A x`.
    pub fn quad_form(&self, x: &DVector<f64>) -> f64 {
        x.dot(&(&self.entries * x))
    }

    /// Eigenvectors (columns) of the cached decomposition.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Whether `self − other` is PSD up to `tol`.
    pub fn dominates(&self, other: &PsdMatrix, tol: f64) -> bool {
        let diff = &self.entries - &other.entries;
        let diff = (&diff + diff.transpose()) * 0.5;
        SymmetricEigen::new(diff).eigenvalues.min() >= -tol
    }
}

pub fn logdet(a: &PsdMatrix) -> Result<f64> {
    a.logdet()
}
