use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::op_norm;

/// Disturbance response controller `u_t = K y_t + Σ_j M^{[j]} y_{t−j}(K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrcPolicy {
    /// `M^{[0..m−1]}`, each `d_u × d_y`.
    pub blocks: Vec<DMatrix<f64>>,
}

impl DrcPolicy {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let first = blocks.first().ok_or_else(|| Error::InvalidDimension("policy needs at least one block".into()))?;
        let shape = first.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::InvalidDimension("policy blocks must be non-empty".into()));
        }
        if let Some(bad) = blocks.iter().find(|b| b.shape() != shape) {
            return Err(Error::shape(
                "policy block",
                format!("{}x{}", shape.0, shape.1),
                format!("{}x{}", bad.nrows(), bad.ncols()),
            ));
        }
        Ok(DrcPolicy { blocks })
    }

    pub fn zero(m: usize, du: usize, dy: usize) -> Self {
        DrcPolicy { blocks: vec![DMatrix::zeros(du, dy); m] }
    }

    pub fn memory(&self) -> usize {
        self.blocks.len()
    }

    pub fn du(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn dy(&self) -> usize {
        self.blocks[0].ncols()
    }

    /// `Σ_j ‖M^{[j]}‖_op`.
    pub fn l1_op_norm(&self) -> f64 {
        self.blocks.iter().map(op_norm).sum()
    }

    /// Coordinates `e(M)[k·d_u·d_y + i·d_y + j] = M^{[k]}_{ij}`.
    pub fn embed(&self) -> DVector<f64> {
        let (du, dy) = (self.du(), self.dy());
        let mut out = DVector::zeros(self.memory() * du * dy);
        for (k, block) in self.blocks.iter().enumerate() {
            for i in 0..du {
                for j in 0..dy {
                    out[k * du * dy + i * dy + j] = block[(i, j)];
                }
            }
        }
        out
    }

    pub fn from_embedding(x: &DVector<f64>, m: usize, du: usize, dy: usize) -> Result<Self> {
        if m == 0 || du == 0 || dy == 0 {
            return Err(Error::InvalidDimension("policy dimensions must be at least 1".into()));
        }
        if x.len() != m * du * dy {
            return Err(Error::shape("policy embedding", m * du * dy, x.len()));
        }
        let blocks = (0..m)
            .map(|k| DMatrix::from_fn(du, dy, |i, j| x[k * du * dy + i * dy + j]))
            .collect();
        Ok(DrcPolicy { blocks })
    }

    /// `Σ_j M^{[j]} y_{t−j}(K)`; `recent[j]` is `y_{t−j}(K)`.
    pub fn correction(&self, recent: &[DVector<f64>]) -> Result<DVector<f64>> {
        if recent.len() != self.memory() {
            return Err(Error::Arity { expected: self.memory(), actual: recent.len() });
        }
        let mut out = DVector::zeros(self.du());
        for (block, y) in self.blocks.iter().zip(recent) {
            if y.len() != self.dy() {
                return Err(Error::shape("signal", self.dy(), y.len()));
            }
            out += block * y;
        }
        Ok(out)
    }
}

/// Signal matrix `Y_t` with `Y_t e(M) = Σ_k M^{[k]} y_{t−k}(K)`; `recent[k]`
/// is `y_{t−k}(K)`. Row `i` of block `k` holds `y_{t−k}(K)ᵀ`.
pub fn embed_signals(recent: &[DVector<f64>], du: usize) -> Result<DMatrix<f64>> {
    let m = recent.len();
    let dy = recent
        .first()
        .ok_or_else(|| Error::InvalidDimension("signal window is empty".into()))?
        .len();
    if du == 0 || dy == 0 {
        return Err(Error::InvalidDimension("signal dimensions must be at least 1".into()));
    }
    let mut out = DMatrix::zeros(du, m * du * dy);
    for (k, y) in recent.iter().enumerate() {
        if y.len() != dy {
            return Err(Error::shape("signal", dy, y.len()));
        }
        for i in 0..du {
            let col = k * du * dy + i * dy;
            for j in 0..dy {
                out[(i, col + j)] = y[j];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_embedding() {
        let p = DrcPolicy::new(vec![DMatrix::from_element(1, 1, 3.0)]).unwrap();
        assert_eq!(p.embed().as_slice(), &[3.0]);
        assert_eq!(DrcPolicy::zero(3, 2, 2).embed(), DVector::zeros(12));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(DrcPolicy::new(vec![]).is_err());
        assert!(DrcPolicy::new(vec![DMatrix::zeros(1, 2), DMatrix::zeros(2, 1)]).is_err());
        assert!(DrcPolicy::from_embedding(&DVector::zeros(5), 2, 1, 2).is_err());
        assert!(embed_signals(&[DVector::zeros(2), DVector::zeros(3)], 1).is_err());
    }

    fn arb_vec(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-3.0..3.0f64, n)
    }

    proptest! {
        #[test]
        fn embedding_identity(m in 1usize..4, du in 1usize..3, dy in 1usize..4, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let blocks: Vec<DMatrix<f64>> =
                (0..m).map(|_| DMatrix::from_fn(du, dy, |_, _| rng.random_range(-2.0..2.0))).collect();
            let ys: Vec<DVector<f64>> =
                (0..m).map(|_| DVector::from_fn(dy, |_, _| rng.random_range(-2.0..2.0))).collect();
            let p = DrcPolicy::new(blocks.clone()).unwrap();
            let mut direct = DVector::zeros(du);
            for (b, y) in blocks.iter().zip(&ys) {
                direct += b * y;
            }
            let via = embed_signals(&ys, du).unwrap() * p.embed();
            prop_assert!((via - &direct).amax() <= 1e-12);
            prop_assert!((p.correction(&ys).unwrap() - direct).amax() <= 1e-12);
            let back = DrcPolicy::from_embedding(&p.embed(), m, du, dy).unwrap();
            prop_assert_eq!(back, p);
        }

        #[test]
        fn l1_op_norm_dominates_each_block(x in arb_vec(8)) {
            let p = DrcPolicy::from_embedding(&DVector::from_vec(x), 2, 2, 2).unwrap();
            let max_block = p.blocks.iter().map(op_norm).fold(0.0, f64::max);
            prop_assert!(p.l1_op_norm() + 1e-12 >= max_block);
            prop_assert!(p.l1_op_norm() <= 2f64.sqrt() * p.embed().norm() + 1e-12);
        }
    }
}
