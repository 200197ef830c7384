use nalgebra::DVector;

use super::drc::DrcPolicy;
use super::markov::MarkovOperator;
use crate::error::{Error, Result};

/// Recovers the signals `y_t(K)` the system would have produced under `K`
/// alone from the observed `y_t` and the DRC corrections already played:
/// `y_t(K) = y_t − Σ_{i=1}^{min(t−1,N)} [G^{[i]}]_y δu_{t−i}`.
#[derive(Debug, Clone)]
pub struct SignalReconstructor {
    markov: MarkovOperator,
    corrections: Vec<DVector<f64>>,
    signals: Vec<DVector<f64>>,
    max_correction: f64,
}

impl SignalReconstructor {
    pub fn new(markov: MarkovOperator) -> Self {
        SignalReconstructor { markov, corrections: Vec::new(), signals: Vec::new(), max_correction: 0.0 }
    }

    /// Number of signals reconstructed so far.
    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }

    /// Reconstructs `y_t(K)` for the next `t`; every earlier step must have
    /// been committed.
    pub fn push(&mut self, y: &DVector<f64>) -> Result<&DVector<f64>> {
        if self.corrections.len() != self.signals.len() {
            return Err(Error::History(format!(
                "step {} observed before its correction was committed",
                self.signals.len() + 1
            )));
        }
        let t = self.signals.len() + 1;
        let mut out = y.clone();
        for i in 1..=(t - 1).min(self.markov.truncation()) {
            let g = self.markov.y_rows(i).expect("within truncation");
            if g.nrows() != y.len() {
                return Err(Error::shape("observation", g.nrows(), y.len()));
            }
            out -= g * &self.corrections[t - 1 - i];
        }
        self.signals.push(out);
        Ok(self.signals.last().expect("just pushed"))
    }

    /// Records the DRC correction `δu_t` played at the latest step.
    pub fn commit(&mut self, correction: DVector<f64>) -> Result<()> {
        if self.corrections.len() + 1 != self.signals.len() {
            return Err(Error::History("correction committed without a pending observation".into()));
        }
        self.max_correction = self.max_correction.max(correction.norm());
        self.corrections.push(correction);
        Ok(())
    }

    pub fn signals(&self) -> &[DVector<f64>] {
        &self.signals
    }

    /// `y_s(K)` for `s ∈ [1, len]`, zero for `s ≤ 0`.
    pub fn signal(&self, s: isize) -> DVector<f64> {
        if s >= 1 {
            self.signals[s as usize - 1].clone()
        } else {
            DVector::zeros(self.signals.first().map_or(0, |y| y.len()))
        }
    }

    /// `y_{t}(K), …, y_{t−m+1}(K)`, most recent first, zero-padded.
    pub fn recent(&self, t: usize, m: usize) -> Vec<DVector<f64>> {
        (0..m).map(|j| self.signal(t as isize - j as isize)).collect()
    }

    /// Certified bound on the error truncation has introduced so far.
    pub fn truncation_error_bound(&self) -> f64 {
        self.markov.tail_bound() * self.max_correction
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalReconstruction {
    pub signals: Vec<DVector<f64>>,
    /// Certified bound on the per-step error from Markov truncation.
    pub truncation_error_bound: f64,
}

/// Batch reconstruction. `policies[s−1]` is the DRC policy played at step
/// `s`; the policy at the last step is not needed and may be omitted.
pub fn counterfactual_signals(
    observations: &[DVector<f64>],
    policies: &[DrcPolicy],
    markov: &MarkovOperator,
) -> Result<SignalReconstruction> {
    let t = observations.len();
    if !(policies.len() + 1 == t || policies.len() == t) {
        return Err(Error::History(format!("{t} observations but {} policies", policies.len())));
    }
    let mut rec = SignalReconstructor::new(markov.clone());
    for (idx, y) in observations.iter().enumerate() {
        let s = idx + 1;
        rec.push(y)?;
        let correction = match policies.get(idx) {
            Some(p) => p.correction(&rec.recent(s, p.memory()))?,
            None => DVector::zeros(markov.block(0).map_or(0, |g| g.ncols())),
        };
        rec.commit(correction)?;
    }
    let truncation_error_bound = rec.truncation_error_bound();
    Ok(SignalReconstruction { signals: rec.signals, truncation_error_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::markov::markov_operator;
    use crate::control::system::{LdsInstance, StabilizingController};
    use nalgebra::DMatrix;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn scalar_setup() -> MarkovOperator {
        let inst = LdsInstance::new(scalar(0.5), scalar(1.0), scalar(1.0), 1.0).unwrap();
        let ctrl = StabilizingController::new(&inst, scalar(-0.25), scalar(1.0), scalar(0.25), 1.0, 0.75).unwrap();
        markov_operator(&inst, &ctrl, 20).unwrap()
    }

    #[test]
    fn zero_policies_return_observations() {
        let mk = scalar_setup();
        let ys: Vec<DVector<f64>> = (0..6).map(|i| DVector::from_element(1, i as f64 - 2.5)).collect();
        let zero = DrcPolicy::zero(2, 1, 1);
        let rec = counterfactual_signals(&ys, &vec![zero; 5], &mk).unwrap();
        assert_eq!(rec.signals, ys);
    }

    #[test]
    fn single_correction_hand_unroll() {
        // Closed loop 0.25, G^{[i]}_y = 0.25^{i−1}. Policy M^{[0]} = 2 played at
        // step 2 only: δu_2 = 2·y_2(K) = 2·y_2, so y_3(K) = y_3 − 2y_2 and
        // y_4(K) = y_4 − 0.25·2y_2.
        let mk = scalar_setup();
        let ys: Vec<DVector<f64>> = [1.0, 2.0, 3.0, 4.0].iter().map(|&v| DVector::from_element(1, v)).collect();
        let zero = DrcPolicy::zero(1, 1, 1);
        let two = DrcPolicy::new(vec![scalar(2.0)]).unwrap();
        let rec = counterfactual_signals(&ys, &[zero.clone(), two, zero], &mk).unwrap();
        let got: Vec<f64> = rec.signals.iter().map(|v| v[0]).collect();
        assert_eq!(got, vec![1.0, 2.0, 3.0 - 4.0, 4.0 - 1.0]);
    }

    #[test]
    fn misaligned_histories() {
        let mk = scalar_setup();
        let ys = vec![DVector::from_element(1, 1.0); 4];
        assert!(matches!(
            counterfactual_signals(&ys, &[DrcPolicy::zero(1, 1, 1)], &mk),
            Err(Error::History(_))
        ));
        let mut rec = SignalReconstructor::new(mk);
        rec.push(&ys[0]).unwrap();
        assert!(rec.push(&ys[1]).is_err());
        rec.commit(DVector::zeros(1)).unwrap();
        assert!(rec.commit(DVector::zeros(1)).is_err());
    }
}
