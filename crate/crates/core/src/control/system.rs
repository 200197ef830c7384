use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{max_abs, op_norm};
use crate::rng::{stream, Stream};

/// Tolerance on the similarity identity `A + BKC = H L H⁻¹`.
pub const SIMILARITY_TOL: f64 = 1e-9;
const NORM_SLACK: f64 = 1e-9;
const MAX_CONSTRUCTION_RETRIES: usize = 200;

/// Partially observed linear system `x_{t+1} = A x_t + B u_t + w_t`,
/// `y_t = C x_t + e_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdsInstance {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub x1: DVector<f64>,
    /// Bound on `‖A‖`, `‖B‖` and `‖C‖`.
    pub kappa_sys: f64,
}

impl LdsInstance {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, kappa_sys: f64) -> Result<Self> {
        let dx = a.nrows();
        if dx == 0 || a.ncols() != dx {
            return Err(Error::shape("A", format!("{dx}x{dx}"), format!("{}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != dx || b.ncols() == 0 {
            return Err(Error::shape("B", format!("{dx}xd_u"), format!("{}x{}", b.nrows(), b.ncols())));
        }
        if c.ncols() != dx || c.nrows() == 0 {
            return Err(Error::shape("C", format!("d_yx{dx}"), format!("{}x{}", c.nrows(), c.ncols())));
        }
        let inst = LdsInstance { a, b, c, x1: DVector::zeros(dx), kappa_sys };
        let worst = inst.norm_bound();
        if worst > kappa_sys * (1.0 + NORM_SLACK) {
            return Err(Error::Construction(format!(
                "max(‖A‖, ‖B‖, ‖C‖) = {worst:.6} exceeds kappa_sys = {kappa_sys}"
            )));
        }
        Ok(inst)
    }

    pub fn with_initial_state(mut self, x1: DVector<f64>) -> Result<Self> {
        if x1.len() != self.dx() {
            return Err(Error::shape("initial state", self.dx(), x1.len()));
        }
        self.x1 = x1;
        Ok(self)
    }

    pub fn dx(&self) -> usize {
        self.a.nrows()
    }

    pub fn du(&self) -> usize {
        self.b.ncols()
    }

    pub fn dy(&self) -> usize {
        self.c.nrows()
    }

    /// `max(‖A‖, ‖B‖, ‖C‖)`.
    pub fn norm_bound(&self) -> f64 {
        op_norm(&self.a).max(op_norm(&self.b)).max(op_norm(&self.c))
    }

    /// Next state.
    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dx() {
            return Err(Error::shape("state", self.dx(), x.len()));
        }
        if u.len() != self.du() {
            return Err(Error::shape("control", self.du(), u.len()));
        }
        if w.len() != self.dx() {
            return Err(Error::shape("perturbation", self.dx(), w.len()));
        }
        Ok(&self.a * x + &self.b * u + w)
    }

    pub fn observe(&self, x: &DVector<f64>, e: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dx() {
            return Err(Error::shape("state", self.dx(), x.len()));
        }
        if e.len() != self.dy() {
            return Err(Error::shape("observation noise", self.dy(), e.len()));
        }
        Ok(&self.c * x + e)
    }
}

/// Linear output feedback `u = K y` with a strong-stability certificate
/// `A + BKC = H L H⁻¹`, `‖L‖ ≤ 1 − γ`, `‖K‖, ‖H‖, ‖H⁻¹‖ ≤ κ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilizingController {
    pub k: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub l: DMatrix<f64>,
    pub kappa: f64,
    pub gamma: f64,
}

impl StabilizingController {
    /// Validates the certificate against `instance`.
    pub fn new(
        instance: &LdsInstance,
        k: DMatrix<f64>,
        h: DMatrix<f64>,
        l: DMatrix<f64>,
        kappa: f64,
        gamma: f64,
    ) -> Result<Self> {
        let ctrl = StabilizingController { k, h, l, kappa, gamma };
        ctrl.verify(instance)?;
        Ok(ctrl)
    }

    pub fn closed_loop(&self, instance: &LdsInstance) -> DMatrix<f64> {
        &instance.a + &instance.b * &self.k * &instance.c
    }

    pub fn verify(&self, instance: &LdsInstance) -> Result<()> {
        let (dx, du, dy) = (instance.dx(), instance.du(), instance.dy());
        if self.k.shape() != (du, dy) {
            return Err(Error::shape("K", format!("{du}x{dy}"), format!("{}x{}", self.k.nrows(), self.k.ncols())));
        }
        if self.h.shape() != (dx, dx) || self.l.shape() != (dx, dx) {
            return Err(Error::shape("certificate", format!("{dx}x{dx}"), "other"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("gamma", format!("must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.kappa >= 1.0 && self.kappa.is_finite()) {
            return Err(Error::config("kappa", format!("must be at least 1, got {}", self.kappa)));
        }
        let h_inv = self
            .h
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Construction("certificate H is singular".into()))?;
        let gap = max_abs(&(self.closed_loop(instance) - &self.h * &self.l * &h_inv));
        if gap > SIMILARITY_TOL {
            return Err(Error::Construction(format!("‖A + BKC − HLH⁻¹‖_max = {gap:.3e}")));
        }
        let cap = self.kappa * (1.0 + NORM_SLACK);
        let norms = [op_norm(&self.k), op_norm(&self.h), op_norm(&h_inv)];
        if norms.iter().any(|&n| n > cap) {
            return Err(Error::Construction(format!(
                "‖K‖, ‖H‖, ‖H⁻¹‖ = {norms:?} exceed kappa = {}",
                self.kappa
            )));
        }
        let l_norm = op_norm(&self.l);
        if l_norm > (1.0 - self.gamma) + NORM_SLACK {
            return Err(Error::Construction(format!("‖L‖ = {l_norm:.6} exceeds 1 − gamma = {}", 1.0 - self.gamma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub dx: usize,
    pub du: usize,
    pub dy: usize,
    pub kappa: f64,
    pub gamma: f64,
    pub kappa_sys: f64,
    pub seed: u64,
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dx == 0 || self.du == 0 || self.dy == 0 {
            return Err(Error::config("system", "dimensions must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::config("system.gamma", format!("must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.kappa >= 1.0 && self.kappa.is_finite()) {
            return Err(Error::config("system.kappa", format!("must be at least 1, got {}", self.kappa)));
        }
        if !(self.kappa_sys > 0.0 && self.kappa_sys.is_finite()) {
            return Err(Error::config("system.kappa_sys", format!("must be positive, got {}", self.kappa_sys)));
        }
        Ok(())
    }
}

fn gaussian<R: Rng>(r: usize, c: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// Random matrix with singular values drawn from `[lo, hi]`.
fn with_singular_values<R: Rng>(r: usize, c: usize, lo: f64, hi: f64, rng: &mut R) -> DMatrix<f64> {
    let svd = gaussian(r, c, rng).svd(true, true);
    let (u, vt) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let k = r.min(c);
    let s = DMatrix::from_diagonal(&DVector::from_fn(k, |_, _| rng.random_range(lo..=hi)));
    u * s * vt
}

/// Samples a system together with a stabilizing controller whose
/// certificate holds by construction.
///
/// `H` has condition number at most `√d_x` so that `‖H L^i H⁻¹‖ ≤
/// √d_x (1 − γ)^i`, which is what the Markov decay bound assumes.
pub fn make_stabilizable_system(config: &SystemConfig) -> Result<(LdsInstance, StabilizingController)> {
    config.validate()?;
    let SystemConfig { dx, du, dy, kappa, gamma, kappa_sys, seed } = *config;
    let mut rng = stream(seed, Stream::Instance);
    let c0 = kappa.min((dx as f64).powf(0.25));
    let io_cap = kappa_sys.min(1.0);
    let mut feedback_cap = kappa.min(1.0);
    for _ in 0..MAX_CONSTRUCTION_RETRIES {
        let h = with_singular_values(dx, dx, 1.0 / c0, c0, &mut rng);
        let l = with_singular_values(dx, dx, 0.0, 1.0, &mut rng);
        let l = &l * ((1.0 - gamma) / op_norm(&l).max(f64::MIN_POSITIVE));
        let b = with_singular_values(dx, du, 0.5 * io_cap, io_cap, &mut rng);
        let c = with_singular_values(dy, dx, 0.5 * io_cap, io_cap, &mut rng);
        let k = with_singular_values(du, dy, 0.0, feedback_cap, &mut rng);
        let Some(h_inv) = h.clone().try_inverse() else { continue };
        let a = &h * &l * &h_inv - &b * &k * &c;
        if op_norm(&a) > kappa_sys {
            feedback_cap *= 0.9;
            continue;
        }
        let instance = LdsInstance::new(a, b, c, kappa_sys)?;
        // The sampled factors already satisfy the certificate; verification
        // guards against rounding at the boundaries.
        let ctrl = StabilizingController { k, h, l, kappa, gamma };
        if ctrl.verify(&instance).is_ok() {
            return Ok((instance, ctrl));
        }
    }
    Err(Error::Construction(format!(
        "no system with ‖A‖ <= {kappa_sys} after {MAX_CONSTRUCTION_RETRIES} draws"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_hand_example() {
        let inst = LdsInstance::new(scalar(0.5), scalar(1.0), scalar(1.0), 1.0).unwrap();
        let ctrl = StabilizingController::new(&inst, scalar(0.0), scalar(1.0), scalar(0.5), 1.0, 0.5).unwrap();
        assert_eq!(ctrl.closed_loop(&inst)[(0, 0)], 0.5);
    }

    #[test]
    fn nilpotent_closed_loop() {
        let i = DMatrix::<f64>::identity(2, 2);
        let k = -&i * 0.5;
        let a = -(&i * &k * &i);
        let inst = LdsInstance::new(a, i.clone(), i.clone(), 1.0).unwrap();
        let ctrl = StabilizingController::new(&inst, k, i.clone(), DMatrix::zeros(2, 2), 1.0, 1.0).unwrap();
        assert_eq!(max_abs(&ctrl.closed_loop(&inst)), 0.0);
    }

    #[test]
    fn wrong_certificate_rejected() {
        let inst = LdsInstance::new(scalar(0.5), scalar(1.0), scalar(1.0), 1.0).unwrap();
        assert!(StabilizingController::new(&inst, scalar(0.0), scalar(1.0), scalar(0.4), 1.0, 0.5).is_err());
        assert!(StabilizingController::new(&inst, scalar(0.0), scalar(1.0), scalar(0.5), 1.0, 0.6).is_err());
    }

    #[test]
    fn step_arithmetic() {
        let inst = LdsInstance::new(scalar(1.0), scalar(1.0), scalar(1.0), 1.0).unwrap();
        let one = DVector::from_element(1, 1.0);
        let x = inst.step(&one, &one, &(-&one)).unwrap();
        assert_eq!(x[0], 1.0);
        let z = DVector::zeros(1);
        assert_eq!(inst.step(&z, &z, &z).unwrap()[0], 0.0);
        assert!(inst.step(&DVector::zeros(2), &z, &z).is_err());
    }

    #[test]
    fn zero_noise_rollout_matches_matrix_powers() {
        let cfg = SystemConfig { dx: 3, du: 2, dy: 2, kappa: 3.0, gamma: 0.3, kappa_sys: 2.0, seed: 11 };
        let (inst, _) = make_stabilizable_system(&cfg).unwrap();
        let mut rng = stream(5, Stream::Probe);
        let us: Vec<DVector<f64>> = (0..100).map(|_| DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0))).collect();
        let w = DVector::zeros(3);
        let mut x = DVector::zeros(3);
        for u in &us {
            x = inst.step(&x, u, &w).unwrap();
        }
        // x_101 = Σ_i A^i B u_{100−i}.
        let mut want = DVector::zeros(3);
        let mut power = DMatrix::<f64>::identity(3, 3);
        for u in us.iter().rev() {
            want += &power * &inst.b * u;
            power = &inst.a * power;
        }
        assert!((x - want).amax() <= 1e-10);
    }

    #[test]
    fn generated_systems_pass_certificate() {
        for seed in 0..20 {
            let cfg = SystemConfig { dx: 3, du: 2, dy: 2, kappa: 3.0, gamma: 0.3, kappa_sys: 2.0, seed };
            let (inst, ctrl) = make_stabilizable_system(&cfg).unwrap();
            ctrl.verify(&inst).unwrap();
            assert!(inst.norm_bound() <= 2.0 + 1e-9);
        }
    }
}
