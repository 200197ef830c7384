use nalgebra::DVector;

use super::{fail, FnSuite};
use crate::bco::{estimator_mean_check, run_arm, LearnerRegistry, RunParams};
use crate::geometry::PsdMatrix;
use crate::harness::update_frequency;
use crate::losses::{make_synthetic_bcom_instance, SyntheticConfig};

pub(super) fn suite() -> FnSuite {
    FnSuite {
        module: "bco",
        name: "learner cadence, estimator and step sizes",
        checks: vec![
            ("update_cadence", update_cadence),
            ("estimator_unbiased", estimator_unbiased),
            ("step_size_bound", step_size_bound),
            ("every_arm_stays_feasible", every_arm_stays_feasible),
        ],
    }
}

fn update_cadence(seed: u64) -> Result<String, String> {
    let (t, m) = (20_000, 4);
    let inst = make_synthetic_bcom_instance(&SyntheticConfig::new(2, m, t, 0.5, 2.0, 16.0, seed)).map_err(fail)?;
    let p = RunParams::new(1.0 / (t as f64).sqrt(), m, 0.5, t, seed);
    let run = run_arm(&LearnerRegistry::default(), "newton", &inst.losses, &inst.set, &p).map_err(fail)?;
    let updates = run.trace.updates.len();
    let freq = update_frequency(updates, t - m + 1, m);
    let gap = run.trace.min_gap().unwrap_or(usize::MAX);
    if !freq.within_3_sigma {
        return Err(format!("rate {:.5} vs {:.5} ± 3·{:.5}", freq.empirical, freq.expected, freq.sigma));
    }
    if gap < m || updates > t / m {
        return Err(format!("min gap {gap}, {updates} updates"));
    }
    Ok(format!("rate {:.5} (expected {:.5}), min gap {gap}", freq.empirical, freq.expected))
}

fn estimator_unbiased(seed: u64) -> Result<String, String> {
    let inst = make_synthetic_bcom_instance(&SyntheticConfig::new(2, 2, 4, 0.5, 2.0, 16.0, seed)).map_err(fail)?;
    let f = &inst.losses[1];
    let o = DVector::from_vec(vec![0.2, -0.1]);
    let a = PsdMatrix::from_diagonal(&[4.0, 9.0]).map_err(fail)?;
    let r = estimator_mean_check(f, &o, &a, 50_000, seed).map_err(fail)?;
    if r.within_3sigma_smoothed {
        Ok(format!("gap to smoothed gradient {:.3e}", r.gap_smoothed))
    } else {
        Err(format!(
            "estimator mean {:?} vs smoothed {:?}",
            r.empirical_mean.as_slice(),
            r.smoothed_gradient.as_slice()
        ))
    }
}

/// `‖o_{t+1} − o_t‖ ≤ η d G_f D` at every update.
fn step_size_bound(seed: u64) -> Result<String, String> {
    let (t, m) = (4_000, 3);
    let inst = make_synthetic_bcom_instance(&SyntheticConfig::new(3, m, t, 0.5, 2.0, 16.0, seed)).map_err(fail)?;
    let p = RunParams::new(1.0 / (t as f64).sqrt(), m, 0.5, t, seed);
    let run = run_arm(&LearnerRegistry::default(), "newton", &inst.losses, &inst.set, &p).map_err(fail)?;
    let c = &inst.certificate;
    let cap = p.eta * c.dim as f64 * c.g_f * c.diameter;
    let worst = run.trace.updates.iter().map(|u| u.step_norm).fold(0.0, f64::max);
    if worst <= cap + 1e-9 {
        Ok(format!("largest step {worst:.3e} ≤ {cap:.3e}"))
    } else {
        Err(format!("step {worst:.3e} exceeds {cap:.3e}"))
    }
}

fn every_arm_stays_feasible(seed: u64) -> Result<String, String> {
    let registry = LearnerRegistry::default();
    let (t, m) = (2_000, 3);
    let inst = make_synthetic_bcom_instance(&SyntheticConfig::new(3, m, t, 0.5, 2.0, 16.0, seed)).map_err(fail)?;
    let p = RunParams::new(1.0 / (t as f64).sqrt(), m, 0.5, t, seed);
    for arm in registry.names() {
        let run = run_arm(&registry, arm, &inst.losses, &inst.set, &p).map_err(fail)?;
        // Played points may leave K by the exploration radius, never by more
        // than the unit ball.
        if let Some(t) = run.decisions.iter().position(|z| (z - inst.set.center()).norm() > inst.set.diameter() / 2.0 + 1.0 + 1e-9) {
            return Err(format!("{arm} played outside K + B at t = {}", t + 1));
        }
    }
    Ok(format!("arms {}", registry.names().join(", ")))
}
