use serde::{Deserialize, Serialize};

/// Constants substituted into the printed regret bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub alpha: f64,
    pub beta: f64,
    /// Gradient bound `G`.
    pub g: f64,
    /// Diameter `D`.
    pub d: f64,
    pub r_h: f64,
    /// Lower bound on the convolution modulus `κ(G)`.
    pub modulus: f64,
    /// Decision dimension.
    pub dim: usize,
    pub memory: usize,
    /// Gradient delay `d₀` of the base learner.
    pub delay: usize,
    pub eta: f64,
    pub horizon: usize,
}

/// Base learner on unary losses over `horizon` steps:
/// `(2βd/(ηα)) log(ηR_H T + 1) + 2d₀GD + D²d₀R_H/(2η) + 3ηd₀d²G²D²R_H T`.
pub fn base_regret_bound(b: &BoundInputs, horizon: f64) -> f64 {
    let BoundInputs { alpha, beta, g, d, r_h, eta, .. } = *b;
    let (dim, d0) = (b.dim as f64, b.delay as f64);
    2.0 * beta * dim / (eta * alpha) * (eta * r_h * horizon + 1.0).ln()
        + 2.0 * d0 * g * d
        + d * d * d0 * r_h / (2.0 * eta)
        + 3.0 * eta * d0 * dim * dim * g * g * d * d * r_h * horizon
}

/// Cost of the iterates moving inside a memory window.
pub fn moving_cost_bound(b: &BoundInputs) -> f64 {
    let BoundInputs { alpha, beta, g, d, r_h, modulus, eta, .. } = *b;
    let (m, dim, t) = (b.memory as f64, b.dim as f64, b.horizon as f64);
    let m4 = m.powi(4);
    12.0 * m4 * beta * r_h * dim * 2f64.max(eta * alpha * r_h * t.sqrt()) / (eta * alpha * modulus)
        * (eta * alpha * r_h + 1.0).ln()
        + 10.0 * m4 * beta * r_h.powi(3) * dim * t.sqrt() / modulus
        + m * m * beta * dim * r_h.powi(3) * t.sqrt()
        + eta * dim * g * d * d * beta * t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub measured: f64,
    /// `3m` times the base bound over `T/m` steps.
    pub reduction_term: f64,
    pub moving_cost: f64,
    /// Additive terms outside the learner's bound, such as the control
    /// approximation and truncation slack.
    pub extra: f64,
    pub bound: f64,
    /// `bound / max(measured, tiny)`.
    pub margin: f64,
    pub holds: bool,
}

/// Measured regret against the evaluated bound plus `extra`.
pub fn bound_diagnostics(measured: f64, inputs: &BoundInputs, extra: f64) -> BoundReport {
    let m = inputs.memory as f64;
    let reduction_term = 3.0 * m * base_regret_bound(inputs, inputs.horizon as f64 / m);
    let moving_cost = moving_cost_bound(inputs);
    let bound = reduction_term + moving_cost + extra;
    BoundReport {
        measured,
        reduction_term,
        moving_cost,
        extra,
        bound,
        margin: bound / measured.max(f64::MIN_POSITIVE),
        holds: measured <= bound,
    }
}

/// Empirical rate of the update event `χ_t = b_t Π_{i<m}(1 − b_{t−i})`
/// against `(1/m)(1 − 1/m)^{m−1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyReport {
    pub updates: usize,
    pub steps: usize,
    pub empirical: f64,
    pub expected: f64,
    /// Binomial standard deviation of the empirical rate.
    pub sigma: f64,
    pub within_3_sigma: bool,
}

pub fn expected_update_rate(memory: usize) -> f64 {
    let m = memory as f64;
    (1.0 / m) * (1.0 - 1.0 / m).powi(memory as i32 - 1)
}

pub fn update_frequency(updates: usize, steps: usize, memory: usize) -> FrequencyReport {
    let p = expected_update_rate(memory);
    let n = steps.max(1) as f64;
    let empirical = updates as f64 / n;
    let sigma = (p * (1.0 - p) / n).sqrt();
    FrequencyReport {
        updates,
        steps,
        empirical,
        expected: p,
        sigma,
        within_3_sigma: (empirical - p).abs() <= 3.0 * sigma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs() -> BoundInputs {
        BoundInputs {
            alpha: 0.5,
            beta: 2.0,
            g: 3.0,
            d: 2.0,
            r_h: 16.0,
            modulus: 0.5,
            dim: 4,
            memory: 4,
            delay: 2,
            eta: 1.0 / 32.0,
            horizon: 1024,
        }
    }

    #[test]
    fn base_bound_by_hand() {
        let b = BoundInputs { alpha: 1.0, beta: 1.0, g: 1.0, d: 1.0, r_h: 1.0, dim: 1, delay: 1, eta: 1.0, ..inputs() };
        // 2·ln 11 + 2 + 1/2 + 3·10
        let want = 2.0 * 11f64.ln() + 2.0 + 0.5 + 30.0;
        assert!((base_regret_bound(&b, 10.0) - want).abs() < 1e-12);
    }

    #[test]
    fn zero_regret_is_within_bound() {
        let r = bound_diagnostics(0.0, &inputs(), 0.0);
        assert!(r.holds && r.bound > 0.0);
        assert!((r.bound - r.reduction_term - r.moving_cost).abs() < 1e-9 * r.bound);
    }

    #[test]
    fn update_rate_for_memory_four() {
        assert!((expected_update_rate(4) - 27.0 / 256.0).abs() < 1e-15);
        assert_eq!(expected_update_rate(1), 1.0);
        let r = update_frequency(10_550, 100_000, 4);
        assert!(r.within_3_sigma);
        assert!(!update_frequency(12_000, 100_000, 4).within_3_sigma);
    }
}
