use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::drc::embed_signals;
use super::markov::MarkovOperator;
use super::system::{LdsInstance, StabilizingController};
use crate::error::{Error, Result};
use crate::losses::{AffineMemoryLoss, BaseLoss};

/// `ceil(log T / log(1/(1−γ)))`, at least 1.
pub fn default_memory(horizon: usize, gamma: f64) -> usize {
    if gamma >= 1.0 {
        return 1;
    }
    let m = (horizon.max(2) as f64).ln() / (1.0 / (1.0 - gamma)).ln();
    (m.ceil() as usize).max(1)
}

/// Constants of the control-to-BCO-M reduction, evaluated for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionConstants {
    pub memory: usize,
    /// Euclidean diameter bound `√(m·max(d_u, d_y))·R_M` of the policy class.
    pub diameter: f64,
    /// Bound on `‖∇f_t‖`.
    pub g_f: f64,
    /// Bound `R` on `‖(y_t, u_t)‖` for policies in `M(m, 2R_M)`.
    pub radius: f64,
    /// Bound on `‖y_t(K)‖`.
    pub signal_bound: f64,
    /// Bound on `Σ_i ‖G^{[i]}‖`.
    pub markov_sum: f64,
    /// Per-step truncation slack `G_c m d_y d_u² d_x κ² κ_sys⁴ R_M / (γ² T)`.
    pub step_slack: f64,
    /// `T` times `step_slack`.
    pub total_slack: f64,
    /// Approximation term `2 G_f D m`.
    pub approximation: f64,
    /// Certified per-step `|c_t(y_t, u_t) − f_t|` from the Markov tail beyond
    /// `m`: `G_c · R · 2R_M R_y · Σ_{i ≥ m} ‖G^{[i]}‖`.
    pub certified_step_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionInputs {
    pub g_c: f64,
    pub r_we: f64,
    pub r_m: f64,
    pub memory: usize,
    pub horizon: usize,
}

pub fn reduction_constants(
    instance: &LdsInstance,
    ctrl: &StabilizingController,
    inputs: &ReductionInputs,
) -> ReductionConstants {
    let ReductionInputs { g_c, r_we, r_m, memory: m, horizon } = *inputs;
    let (dx, du, dy) = (instance.dx() as f64, instance.du() as f64, instance.dy() as f64);
    let (kappa, gamma, ks) = (ctrl.kappa, ctrl.gamma, instance.kappa_sys);
    let mf = m as f64;
    let tf = horizon.max(1) as f64;
    let decay = (dx * (1.0 + kappa * kappa)).sqrt() * ks * ks;
    let markov_sum = 1.0 + decay / gamma;
    let signal_bound = r_we * (1.0 + dx.sqrt() * ks / gamma);
    let radius = signal_bound * ((1.0 + kappa * kappa).sqrt() + 2.0 * r_m * markov_sum);
    let diameter = (mf * du.max(dy)).sqrt() * r_m;
    let g_f = 4096.0 * mf.sqrt() * g_c * r_we * r_we * r_m * r_m * dx.powf(2.5) * kappa.powi(3) * ks.powi(8)
        / gamma.powi(5);
    let total_slack = g_c * mf * dy * du * du * dx * kappa * kappa * ks.powi(4) * r_m / (gamma * gamma);
    let tail = decay * (1.0 - gamma).powi(m as i32 - 1) / gamma;
    ReductionConstants {
        memory: m,
        diameter,
        g_f,
        radius,
        signal_bound,
        markov_sum,
        step_slack: total_slack / tf,
        total_slack,
        approximation: 2.0 * g_f * diameter * mf,
        certified_step_error: g_c * radius * 2.0 * r_m * signal_bound * tail,
    }
}

/// Fails when the certified per-step truncation error exceeds `budget`.
pub fn check_truncation_budget(constants: &ReductionConstants, budget: f64) -> Result<()> {
    if constants.certified_step_error > budget {
        return Err(Error::TruncationBudget {
            m: constants.memory,
            certified: constants.certified_step_error,
            budget,
        });
    }
    Ok(())
}

/// Incrementally built state for turning control costs into affine-memory
/// losses: the leading Markov blocks and the signal matrices `Y_s`, shared
/// between consecutive steps.
#[derive(Debug, Clone)]
pub struct ReductionContext {
    blocks: Arc<Vec<DMatrix<f64>>>,
    k: DMatrix<f64>,
    du: usize,
    signals: Vec<DVector<f64>>,
    matrices: Vec<Arc<DMatrix<f64>>>,
}

impl ReductionContext {
    pub fn new(markov: &MarkovOperator, ctrl: &StabilizingController, memory: usize) -> Result<Self> {
        if memory == 0 {
            return Err(Error::config("memory", "must be at least 1"));
        }
        Ok(ReductionContext {
            blocks: markov.leading(memory)?,
            k: ctrl.k.clone(),
            du: ctrl.k.nrows(),
            signals: Vec::new(),
            matrices: Vec::new(),
        })
    }

    pub fn memory(&self) -> usize {
        self.blocks.len()
    }

    /// Appends `y_t(K)` for the next `t` and returns `Y_t`.
    pub fn push_signal(&mut self, y_k: DVector<f64>) -> Result<Arc<DMatrix<f64>>> {
        if self.k.ncols() != y_k.len() {
            return Err(Error::shape("signal", self.k.ncols(), y_k.len()));
        }
        self.signals.push(y_k);
        let t = self.signals.len();
        let recent: Vec<DVector<f64>> = (0..self.memory())
            .map(|j| match t.checked_sub(j) {
                Some(s) if s >= 1 => self.signals[s - 1].clone(),
                _ => DVector::zeros(self.k.ncols()),
            })
            .collect();
        let y = Arc::new(embed_signals(&recent, self.du)?);
        self.matrices.push(y.clone());
        Ok(y)
    }

    /// `Y_s` for `s ∈ [1, len]`.
    pub fn signal_matrix(&self, s: usize) -> Option<&Arc<DMatrix<f64>>> {
        s.checked_sub(1).and_then(|i| self.matrices.get(i))
    }

    /// `(y_t(K), K y_t(K))`.
    pub fn offset(&self, t: usize) -> Result<DVector<f64>> {
        let y = t
            .checked_sub(1)
            .and_then(|i| self.signals.get(i))
            .ok_or_else(|| Error::History(format!("no signal recorded for t = {t}")))?;
        let mut out = DVector::zeros(y.len() + self.du);
        out.rows_mut(0, y.len()).copy_from(y);
        out.rows_mut(y.len(), self.du).copy_from(&(&self.k * y));
        Ok(out)
    }

    /// `f_t(x_{t−m+1..t}) = c_t((y_t(K), K y_t(K)) + Σ_{i<m} G^{[i]} Y_{t−i} x_{t−i})`.
    pub fn reduce(&self, t: usize, cost: BaseLoss) -> Result<AffineMemoryLoss> {
        let m = self.memory();
        if t < m || t > self.matrices.len() {
            return Err(Error::History(format!(
                "cannot reduce at t = {t} with memory {m} and {} signals",
                self.matrices.len()
            )));
        }
        let signals = (0..m).map(|i| self.matrices[t - i - 1].clone()).collect();
        AffineMemoryLoss::new(cost, self.offset(t)?, self.blocks.clone(), signals)
    }
}

/// Builds `f_t` from reconstructed signals `y_{1..t}(K)`.
pub fn reduce_to_bcom(
    signals: &[DVector<f64>],
    markov: &MarkovOperator,
    ctrl: &StabilizingController,
    memory: usize,
    cost: BaseLoss,
) -> Result<AffineMemoryLoss> {
    let mut ctx = ReductionContext::new(markov, ctrl, memory)?;
    for y in signals {
        ctx.push_signal(y.clone())?;
    }
    ctx.reduce(signals.len(), cost)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::markov::markov_operator;
    use crate::control::system::{make_stabilizable_system, SystemConfig};

    #[test]
    fn default_memory_rule() {
        assert_eq!(default_memory(1024, 0.5), 10);
        assert_eq!(default_memory(1025, 0.5), 11);
        assert_eq!(default_memory(100, 1.0), 1);
    }

    #[test]
    fn diameter_constant() {
        let cfg = SystemConfig { dx: 3, du: 2, dy: 2, kappa: 3.0, gamma: 0.3, kappa_sys: 2.0, seed: 1 };
        let (inst, ctrl) = make_stabilizable_system(&cfg).unwrap();
        let c = reduction_constants(
            &inst,
            &ctrl,
            &ReductionInputs { g_c: 2.0, r_we: 1.0, r_m: 1.0, memory: 4, horizon: 100 },
        );
        assert!((c.diameter - 2.0 * 2f64.sqrt()).abs() < 1e-15);
        assert!((c.total_slack - c.step_slack * 100.0).abs() < 1e-9 * c.total_slack);
    }

    #[test]
    fn budget_error() {
        let cfg = SystemConfig { dx: 2, du: 1, dy: 1, kappa: 2.0, gamma: 0.5, kappa_sys: 1.0, seed: 2 };
        let (inst, ctrl) = make_stabilizable_system(&cfg).unwrap();
        let inputs = ReductionInputs { g_c: 2.0, r_we: 1.0, r_m: 1.0, memory: 1, horizon: 1000 };
        let c = reduction_constants(&inst, &ctrl, &inputs);
        assert!(matches!(check_truncation_budget(&c, 1e-6), Err(Error::TruncationBudget { m: 1, .. })));
        let long = reduction_constants(&inst, &ctrl, &ReductionInputs { memory: 80, ..inputs });
        check_truncation_budget(&long, 1e-6).unwrap();
    }

    #[test]
    fn zero_window_is_offset_only() {
        let cfg = SystemConfig { dx: 2, du: 1, dy: 1, kappa: 2.0, gamma: 0.5, kappa_sys: 1.0, seed: 3 };
        let (inst, ctrl) = make_stabilizable_system(&cfg).unwrap();
        let mk = markov_operator(&inst, &ctrl, 30).unwrap();
        let signals: Vec<DVector<f64>> = (0..5).map(|i| DVector::from_element(1, 0.3 * i as f64 - 0.4)).collect();
        let cost = BaseLoss::pseudo_huber(0.5, 2.0, DVector::zeros(2)).unwrap();
        let f = reduce_to_bcom(&signals, &mk, &ctrl, 3, cost.clone()).unwrap();
        let y = signals[4][0];
        let direct = cost.value(&DVector::from_vec(vec![y, ctrl.k[(0, 0)] * y])).unwrap();
        assert_eq!(f.eval(&vec![DVector::zeros(3); 3]).unwrap(), direct);
        assert!(reduce_to_bcom(&signals[..2], &mk, &ctrl, 3, cost).is_err());
    }
}
