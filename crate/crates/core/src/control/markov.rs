use std::sync::Arc;

use nalgebra::DMatrix;

use super::system::{LdsInstance, StabilizingController};
use crate::error::{Error, Result};
use crate::geometry::op_norm;

/// Largest truncation length `choose_truncation` will return.
pub const MAX_TRUNCATION: usize = 100_000;

/// Closed-loop impulse response `G^{[0]} = [0; I]`,
/// `G^{[i]} = [C; KC](A + BKC)^{i−1} B`, truncated after block `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovOperator {
    blocks: Arc<Vec<DMatrix<f64>>>,
    dy: usize,
    /// `√(d_x(1 + κ²)) κ_sys²`.
    decay_scale: f64,
    /// `1 − γ`.
    rate: f64,
}

/// Certified tail `Σ_{i>n} ‖G^{[i]}‖ ≤ √(d_x(1+κ²)) κ_sys² (1−γ)^n / γ`.
pub fn markov_tail_bound(instance: &LdsInstance, ctrl: &StabilizingController, n: usize) -> f64 {
    decay_scale(instance, ctrl) * (1.0 - ctrl.gamma).powi(n as i32) / ctrl.gamma
}

fn decay_scale(instance: &LdsInstance, ctrl: &StabilizingController) -> f64 {
    let dx = instance.dx() as f64;
    (dx * (1.0 + ctrl.kappa * ctrl.kappa)).sqrt() * instance.kappa_sys.powi(2)
}

/// Smallest `N` whose certified tail is below `min(1e-10, 1/T²)`.
pub fn choose_truncation(instance: &LdsInstance, ctrl: &StabilizingController, horizon: usize) -> usize {
    let target = 1e-10_f64.min(1.0 / (horizon.max(1) as f64).powi(2));
    (1..=MAX_TRUNCATION)
        .find(|&n| markov_tail_bound(instance, ctrl, n) < target)
        .unwrap_or(MAX_TRUNCATION)
}

pub fn markov_operator(instance: &LdsInstance, ctrl: &StabilizingController, n: usize) -> Result<MarkovOperator> {
    if n == 0 {
        return Err(Error::config("truncation", "must be at least 1"));
    }
    let (du, dy) = (instance.du(), instance.dy());
    let closed = ctrl.closed_loop(instance);
    let mut out = DMatrix::zeros(dy + du, instance.dx());
    out.rows_mut(0, dy).copy_from(&instance.c);
    out.rows_mut(dy, du).copy_from(&(&ctrl.k * &instance.c));

    let mut blocks = Vec::with_capacity(n + 1);
    let mut g0 = DMatrix::zeros(dy + du, du);
    g0.rows_mut(dy, du).fill_with_identity();
    blocks.push(g0);
    // (A + BKC)^{i−1} B, advanced by one multiplication per block.
    let mut propagated = instance.b.clone();
    for _ in 1..=n {
        blocks.push(&out * &propagated);
        propagated = &closed * propagated;
    }
    Ok(MarkovOperator {
        blocks: Arc::new(blocks),
        dy,
        decay_scale: decay_scale(instance, ctrl),
        rate: 1.0 - ctrl.gamma,
    })
}

impl MarkovOperator {
    /// Truncation length `N`; blocks `0..=N` are stored.
    pub fn truncation(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> Option<&DMatrix<f64>> {
        self.blocks.get(i)
    }

    /// Observation rows of `G^{[i]}`.
    pub fn y_rows(&self, i: usize) -> Option<nalgebra::DMatrixView<'_, f64>> {
        self.blocks.get(i).map(|g| g.rows(0, self.dy))
    }

    /// `G^{[0..m−1]}`, shared.
    pub fn leading(&self, m: usize) -> Result<Arc<Vec<DMatrix<f64>>>> {
        if m > self.blocks.len() {
            return Err(Error::config(
                "memory",
                format!("memory {m} exceeds the {} stored Markov blocks", self.blocks.len()),
            ));
        }
        Ok(Arc::new(self.blocks[..m].to_vec()))
    }

    /// Certified `‖G^{[i]}‖` bound for `i ≥ 1`.
    pub fn decay_bound(&self, i: usize) -> f64 {
        if i == 0 {
            1.0
        } else {
            self.decay_scale * self.rate.powi(i as i32 - 1)
        }
    }

    /// Certified bound on `Σ_{i ≥ from} ‖G^{[i]}‖`, `from ≥ 1`.
    pub fn tail_from(&self, from: usize) -> f64 {
        let gamma = 1.0 - self.rate;
        self.decay_scale * self.rate.powi(from.max(1) as i32 - 1) / gamma
    }

    /// Certified bound on the blocks dropped by truncation.
    pub fn tail_bound(&self) -> f64 {
        self.tail_from(self.truncation() + 1)
    }

    /// `Σ_i ‖G^{[i]}‖` bound, `1 + √(d_x(1+κ²)) κ_sys² / γ`.
    pub fn total_bound(&self) -> f64 {
        1.0 + self.tail_from(1)
    }

    /// Largest ratio `‖G^{[i]}‖ / bound_i` over stored blocks; at most 1 when
    /// the certificate is honest.
    pub fn worst_decay_ratio(&self) -> f64 {
        self.blocks
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, g)| op_norm(g) / self.decay_bound(i))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::system::{make_stabilizable_system, SystemConfig};

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn nilpotent_blocks() {
        let i = DMatrix::<f64>::identity(2, 2);
        let inst = LdsInstance::new(DMatrix::zeros(2, 2), i.clone(), i.clone(), 1.0).unwrap();
        let ctrl = StabilizingController::new(&inst, DMatrix::zeros(2, 2), i.clone(), DMatrix::zeros(2, 2), 1.0, 1.0)
            .unwrap();
        let mk = markov_operator(&inst, &ctrl, 4).unwrap();
        let g1 = mk.block(1).unwrap();
        assert_eq!(g1.rows(0, 2), i);
        assert_eq!(g1.rows(2, 2), DMatrix::<f64>::zeros(2, 2));
        for k in 2..=4 {
            assert_eq!(mk.block(k).unwrap().amax(), 0.0);
        }
        let g0 = mk.block(0).unwrap();
        assert_eq!(g0.rows(0, 2).amax(), 0.0);
        assert_eq!(g0.rows(2, 2), i);
    }

    #[test]
    fn scalar_geometric_blocks() {
        let inst = LdsInstance::new(scalar(0.5), scalar(1.0), scalar(1.0), 1.0).unwrap();
        let ctrl = StabilizingController::new(&inst, scalar(-0.25), scalar(1.0), scalar(0.25), 1.0, 0.75).unwrap();
        let mk = markov_operator(&inst, &ctrl, 10).unwrap();
        for i in 1..=10 {
            let g = mk.block(i).unwrap();
            let p = 0.25_f64.powi(i as i32 - 1);
            assert!((g[(0, 0)] - p).abs() < 1e-15);
            assert!((g[(1, 0)] + 0.25 * p).abs() < 1e-15);
        }
        assert_eq!(mk.block(0).unwrap().as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn generated_systems_respect_decay() {
        for seed in 0..10 {
            let cfg = SystemConfig { dx: 3, du: 2, dy: 2, kappa: 3.0, gamma: 0.3, kappa_sys: 2.0, seed };
            let (inst, ctrl) = make_stabilizable_system(&cfg).unwrap();
            let n = choose_truncation(&inst, &ctrl, 500);
            let mk = markov_operator(&inst, &ctrl, n).unwrap();
            assert!(mk.tail_bound() < 1e-10);
            assert!(mk.worst_decay_ratio() <= 1.0 + 1e-9);
        }
    }
}
