use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::base::BaseLoss;
use crate::error::{Error, Result};
use crate::geometry::PsdMatrix;

/// One step of an affine-memory loss
/// `f_t(z_{t−m+1..t}) = ℓ_t(B_t + Σ_{i<m} G^{[i]} Y_{t−i} z_{t−i})`.
///
/// Windows are passed oldest first: `window[m−1−i]` is `z_{t−i}`.
/// Blocks and signals are reference counted because consecutive steps share
/// them.
#[derive(Debug, Clone)]
pub struct AffineMemoryLoss {
    base: BaseLoss,
    offset: DVector<f64>,
    blocks: Arc<Vec<DMatrix<f64>>>,
    signals: Vec<Arc<DMatrix<f64>>>,
    maps: Vec<DMatrix<f64>>,
    g_t: DMatrix<f64>,
    h_t: PsdMatrix,
}

impl AffineMemoryLoss {
    /// `signals[i]` is `Y_{t−i}`.
    pub fn new(
        base: BaseLoss,
        offset: DVector<f64>,
        blocks: Arc<Vec<DMatrix<f64>>>,
        signals: Vec<Arc<DMatrix<f64>>>,
    ) -> Result<Self> {
        let m = blocks.len();
        if m == 0 {
            return Err(Error::InvalidDimension("memory must be at least 1".into()));
        }
        if signals.len() != m {
            return Err(Error::Arity { expected: m, actual: signals.len() });
        }
        let n = base.dim();
        if offset.len() != n {
            return Err(Error::shape("offset", n, offset.len()));
        }
        let p = blocks[0].ncols();
        let d = signals[0].ncols();
        for g in blocks.iter() {
            if g.nrows() != n || g.ncols() != p {
                return Err(Error::shape("memory block", format!("{n}x{p}"), format!("{}x{}", g.nrows(), g.ncols())));
            }
        }
        for y in &signals {
            if y.nrows() != p || y.ncols() != d {
                return Err(Error::shape("signal", format!("{p}x{d}"), format!("{}x{}", y.nrows(), y.ncols())));
            }
        }
        let maps: Vec<DMatrix<f64>> = blocks
            .iter()
            .zip(signals.iter())
            .map(|(g, y)| g * y.as_ref())
            .collect();
        let mut g_t = DMatrix::zeros(n, d);
        for map in &maps {
            g_t += map;
        }
        let h_t = PsdMatrix::from_gram(g_t.transpose() * &g_t)?;
        Ok(AffineMemoryLoss { base, offset, blocks, signals, maps, g_t, h_t })
    }

    pub fn base(&self) -> &BaseLoss {
        &self.base
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn signals(&self) -> &[Arc<DMatrix<f64>>] {
        &self.signals
    }

    pub fn memory(&self) -> usize {
        self.blocks.len()
    }

    /// `(n, p, d)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.base.dim(), self.blocks[0].ncols(), self.g_t.ncols())
    }

    pub fn dim(&self) -> usize {
        self.g_t.ncols()
    }

    /// `G_t = Σ_i G^{[i]} Y_{t−i}`.
    pub fn g_t(&self) -> &DMatrix<f64> {
        &self.g_t
    }

    /// `H_t = G_tᵀG_t`.
    pub fn hessian_t(&self) -> &PsdMatrix {
        &self.h_t
    }

    /// `G^{[i]} Y_{t−i}`.
    pub fn map(&self, i: usize) -> &DMatrix<f64> {
        &self.maps[i]
    }

    fn check_window(&self, window: &[DVector<f64>]) -> Result<()> {
        if window.len() != self.memory() {
            return Err(Error::Arity { expected: self.memory(), actual: window.len() });
        }
        for z in window {
            if z.len() != self.dim() {
                return Err(Error::shape("window entry", self.dim(), z.len()));
            }
        }
        Ok(())
    }

    /// Argument of the base loss for a window.
    pub fn argument(&self, window: &[DVector<f64>]) -> Result<DVector<f64>> {
        self.check_window(window)?;
        let m = self.memory();
        let mut v = self.offset.clone();
        for (i, map) in self.maps.iter().enumerate() {
            v += map * &window[m - 1 - i];
        }
        Ok(v)
    }

    pub fn eval(&self, window: &[DVector<f64>]) -> Result<f64> {
        self.base.value(&self.argument(window)?)
    }

    /// Gradient with respect to each window entry, oldest first.
    pub fn gradient(&self, window: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        let g = self.base.gradient(&self.argument(window)?)?;
        let m = self.memory();
        Ok((0..m).map(|k| self.maps[m - 1 - k].transpose() * &g).collect())
    }

    fn unary_argument(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.dim() {
            return Err(Error::shape("unary point", self.dim(), z.len()));
        }
        Ok(&self.offset + &self.g_t * z)
    }

    /// `f̄_t(z) = f_t(z, …, z)`.
    pub fn eval_unary(&self, z: &DVector<f64>) -> Result<f64> {
        self.base.value(&self.unary_argument(z)?)
    }

    pub fn grad_unary(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.g_t.transpose() * self.base.gradient(&self.unary_argument(z)?)?)
    }

    pub fn hess_unary(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        let h = self.base.hessian(&self.unary_argument(z)?)?;
        let out = self.g_t.transpose() * h * &self.g_t;
        Ok((&out + out.transpose()) * 0.5)
    }

    pub fn unary(&self) -> UnaryView<'_> {
        UnaryView(self)
    }
}

/// The induced unary function `f̄_t` as a standalone object.
#[derive(Debug, Clone, Copy)]
pub struct UnaryView<'a>(&'a AffineMemoryLoss);

impl UnaryView<'_> {
    pub fn eval(&self, z: &DVector<f64>) -> Result<f64> {
        self.0.eval_unary(z)
    }
    pub fn grad(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        self.0.grad_unary(z)
    }
    pub fn hess(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.0.hess_unary(z)
    }
}
