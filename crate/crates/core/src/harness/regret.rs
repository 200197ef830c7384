use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Certified constants an instance was generated with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertificateConstants {
    pub alpha: f64,
    pub beta: f64,
    /// Gradient bound `G`.
    pub g: f64,
    /// Diameter `D` of the decision set.
    pub d: f64,
    pub r_h: f64,
    pub kappa0: f64,
}

/// Per-step record of one run against its best fixed comparator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretRecord {
    pub arm: String,
    pub seed: u64,
    pub config_hash: String,
    /// First step counted in the regret; earlier steps carry zero.
    pub first_t: usize,
    /// Incurred loss or cost, indexed by `t − 1`.
    pub losses: Vec<f64>,
    /// Comparator loss at each step.
    pub comparator_losses: Vec<f64>,
    pub cum_regret: Vec<f64>,
    pub updated: Vec<bool>,
    pub logdet: Vec<f64>,
    /// Embedded comparator point.
    pub comparator: Vec<f64>,
    /// Comparator loss summed over the counted steps.
    pub comparator_total: f64,
    pub certificate: CertificateConstants,
    /// Excluded from every emitted file.
    pub wall_clock_secs: f64,
}

impl RegretRecord {
    pub fn horizon(&self) -> usize {
        self.losses.len()
    }

    pub fn final_regret(&self) -> f64 {
        self.cum_regret.last().copied().unwrap_or(0.0)
    }

    /// Regret recomputed from the per-step columns in one pass.
    pub fn batch_regret(&self) -> Result<f64> {
        batch_regret(&self.losses, &self.comparator_losses, self.first_t)
    }

    /// Checks alignment and that `cum_regret` is the prefix sum to `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        let t = self.horizon();
        for (name, len) in [
            ("comparator_losses", self.comparator_losses.len()),
            ("cum_regret", self.cum_regret.len()),
            ("updated", self.updated.len()),
            ("logdet", self.logdet.len()),
        ] {
            if len != t {
                return Err(Error::HorizonMismatch(format!("{name} has {len} entries, losses has {t}")));
            }
        }
        let again = compute_regret(&self.losses, &self.comparator_losses, self.first_t)?;
        for (i, (a, b)) in again.iter().zip(&self.cum_regret).enumerate() {
            if (a - b).abs() > tol * a.abs().max(1.0) {
                return Err(Error::HorizonMismatch(format!("cum_regret differs at t = {}: {a} vs {b}", i + 1)));
            }
        }
        Ok(())
    }
}

fn check_aligned(incurred: &[f64], comparator: &[f64], first_t: usize) -> Result<()> {
    if incurred.len() != comparator.len() {
        return Err(Error::HorizonMismatch(format!(
            "{} incurred values but {} comparator values",
            incurred.len(),
            comparator.len()
        )));
    }
    if first_t == 0 {
        return Err(Error::HorizonMismatch("regret must start at t >= 1".into()));
    }
    Ok(())
}

/// Streamed prefix sums of `incurred − comparator` from `first_t` on.
pub fn compute_regret(incurred: &[f64], comparator: &[f64], first_t: usize) -> Result<Vec<f64>> {
    check_aligned(incurred, comparator, first_t)?;
    let mut acc = 0.0;
    Ok(incurred
        .iter()
        .zip(comparator)
        .enumerate()
        .map(|(i, (a, b))| {
            if i + 1 >= first_t {
                acc += a - b;
            }
            acc
        })
        .collect())
}

/// `Σ incurred − Σ comparator` over `t ≥ first_t`.
pub fn batch_regret(incurred: &[f64], comparator: &[f64], first_t: usize) -> Result<f64> {
    check_aligned(incurred, comparator, first_t)?;
    let skip = first_t - 1;
    let a: f64 = incurred.iter().skip(skip).sum();
    let b: f64 = comparator.iter().skip(skip).sum();
    Ok(a - b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_losses_have_zero_regret() {
        let x = vec![0.3, 1.2, 5.0];
        assert_eq!(compute_regret(&x, &x, 1).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn unit_gap_over_ten_counted_steps() {
        let comp: Vec<f64> = (0..13).map(|i| i as f64 * 0.1).collect();
        let inc: Vec<f64> = comp.iter().map(|c| c + 1.0).collect();
        let r = compute_regret(&inc, &comp, 4).unwrap();
        assert_eq!(r[2], 0.0);
        assert!((r[12] - 10.0).abs() < 1e-12);
        assert!((batch_regret(&inc, &comp, 4).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn misaligned_inputs() {
        assert!(matches!(compute_regret(&[1.0], &[1.0, 2.0], 1), Err(Error::HorizonMismatch(_))));
        assert!(batch_regret(&[1.0], &[1.0], 0).is_err());
    }

    proptest! {
        #[test]
        fn streamed_matches_batch(
            pairs in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..300),
            start in 1usize..20,
        ) {
            let inc: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let comp: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let streamed = *compute_regret(&inc, &comp, start).unwrap().last().unwrap();
            let batch = batch_regret(&inc, &comp, start).unwrap();
            prop_assert!((streamed - batch).abs() <= 1e-9);
        }
    }
}
