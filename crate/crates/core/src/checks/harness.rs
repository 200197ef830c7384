use super::{fail, FnSuite};
use crate::bco::LearnerRegistry;
use crate::harness::{fit_loglog, run_bcom_cell, BcomFamily, DEFAULT_COMPARATOR_TOL};

pub(super) fn suite() -> FnSuite {
    FnSuite {
        module: "harness",
        name: "regret bookkeeping, comparator and fits",
        checks: vec![
            ("regret_dual_path", regret_dual_path),
            ("comparator_probe_optimality", comparator_probe_optimality),
            ("bound_sanity", bound_sanity),
            ("slope_fit_exact", slope_fit_exact),
        ],
    }
}

fn cell(seed: u64) -> Result<crate::harness::BcomOutcome, String> {
    run_bcom_cell(&LearnerRegistry::default(), &BcomFamily::scaling_default(), "newton", 512, seed, "check").map_err(fail)
}

fn regret_dual_path(seed: u64) -> Result<String, String> {
    let out = cell(seed)?;
    let (a, b) = (out.record.final_regret(), out.record.batch_regret().map_err(fail)?);
    out.record.validate(1e-9).map_err(fail)?;
    if (a - b).abs() <= 1e-9 * a.abs().max(1.0) {
        Ok(format!("streamed {a:.6} = batch {b:.6}"))
    } else {
        Err(format!("streamed {a} vs batch {b}"))
    }
}

fn comparator_probe_optimality(seed: u64) -> Result<String, String> {
    let out = cell(seed)?;
    let gain = out.comparator.best_probe_improvement;
    if gain <= DEFAULT_COMPARATOR_TOL {
        Ok(format!("best probe improvement {gain:.1e}"))
    } else {
        Err(format!("a random probe beats the comparator by {gain:.3e}"))
    }
}

fn bound_sanity(seed: u64) -> Result<String, String> {
    let out = cell(seed)?;
    if out.bound.holds {
        Ok(format!("regret {:.3} ≤ bound {:.3e}", out.bound.measured, out.bound.bound))
    } else {
        Err(format!("regret {:.3} exceeds the evaluated bound {:.3e}", out.bound.measured, out.bound.bound))
    }
}

fn slope_fit_exact(_seed: u64) -> Result<String, String> {
    let xs: Vec<f64> = (10..15).map(|k| (1u64 << k) as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|t| 2.5 * t.sqrt()).collect();
    let fit = fit_loglog(&xs, &ys).map_err(fail)?;
    if (fit.slope - 0.5).abs() <= 1e-12 {
        Ok("slope 0.5 recovered".into())
    } else {
        Err(format!("slope {}", fit.slope))
    }
}
