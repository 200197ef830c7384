use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sphere::sample_unit_ball;
use crate::error::{Error, Result};

/// Slack allowed by membership tests.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Convex decision sets.
///
/// `OperatorL1Ball` lives in the embedded coordinates of a memory-`m` policy:
/// coordinate `k·du·dy + i·dy + j` holds entry `(i, j)` of block `k`, and the
/// constraint is `Σ_k ‖M^{[k]}‖_op ≤ radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConvexSet {
    EuclideanBall {
        center: DVector<f64>,
        radius: f64,
    },
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    OperatorL1Ball {
        m: usize,
        du: usize,
        dy: usize,
        radius: f64,
    },
}

impl ConvexSet {
    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius >= 0.0) || center.is_empty() {
            return Err(Error::InvalidDimension(format!(
                "ball needs a non-empty center and radius >= 0, got dim {} radius {radius}",
                center.len()
            )));
        }
        Ok(ConvexSet::EuclideanBall { center, radius })
    }

    pub fn centered_ball(d: usize, radius: f64) -> Result<Self> {
        Self::ball(DVector::zeros(d), radius)
    }

    pub fn boxed(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::shape("box bounds", lower.len(), upper.len()));
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidDimension("box lower bound exceeds upper bound".into()));
        }
        Ok(ConvexSet::Box { lower, upper })
    }

    pub fn operator_l1(m: usize, du: usize, dy: usize, radius: f64) -> Result<Self> {
        if m == 0 || du == 0 || dy == 0 || !(radius.is_finite() && radius >= 0.0) {
            return Err(Error::InvalidDimension(format!(
                "operator-l1 ball needs m, du, dy >= 1 and radius >= 0 (m={m}, du={du}, dy={dy}, radius={radius})"
            )));
        }
        Ok(ConvexSet::OperatorL1Ball { m, du, dy, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::EuclideanBall { center, .. } => center.len(),
            ConvexSet::Box { lower, .. } => lower.len(),
            ConvexSet::OperatorL1Ball { m, du, dy, .. } => m * du * dy,
        }
    }

    /// Deterministic interior point used to initialize learners.
    pub fn center(&self) -> DVector<f64> {
        match self {
            ConvexSet::EuclideanBall { center, .. } => center.clone(),
            ConvexSet::Box { lower, upper } => (lower + upper) * 0.5,
            ConvexSet::OperatorL1Ball { .. } => DVector::zeros(self.dim()),
        }
    }

    /// Upper bound on the Euclidean diameter.
    pub fn diameter(&self) -> f64 {
        match self {
            ConvexSet::EuclideanBall { radius, .. } => 2.0 * radius,
            ConvexSet::Box { lower, upper } => (upper - lower).norm(),
            // ‖M^{[k]}‖_F ≤ √min(du,dy)·‖M^{[k]}‖_op, and Σ‖·‖_F² ≤ (Σ‖·‖_F)².
            ConvexSet::OperatorL1Ball { du, dy, radius, .. } => {
                2.0 * (*du.min(dy) as f64).sqrt() * radius
            }
        }
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::shape("convex set point", self.dim(), x.len()));
        }
        Ok(())
    }

    /// Membership with absolute slack `MEMBERSHIP_TOL`.
    pub fn contains(&self, x: &DVector<f64>) -> bool {
        self.contains_with(x, MEMBERSHIP_TOL)
    }

    pub fn contains_with(&self, x: &DVector<f64>, tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match self {
            ConvexSet::EuclideanBall { center, radius } => (x - center).norm() <= radius + tol,
            ConvexSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            ConvexSet::OperatorL1Ball { radius, .. } => self.operator_l1_norm(x) <= radius + tol,
        }
    }

    /// `Σ_k ‖M^{[k]}‖_op` of an embedded policy; zero for other sets.
    pub fn operator_l1_norm(&self, x: &DVector<f64>) -> f64 {
        match self {
            ConvexSet::OperatorL1Ball { m, du, dy, .. } => (0..*m)
                .map(|k| super::op_norm(&block(x, k, *du, *dy)))
                .sum(),
            _ => 0.0,
        }
    }

    pub fn euclidean_project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        Ok(match self {
            ConvexSet::EuclideanBall { center, radius } => {
                let diff = x - center;
                let n = diff.norm();
                if n <= *radius {
                    x.clone()
                } else {
                    center + diff * (radius / n)
                }
            }
            ConvexSet::Box { lower, upper } => DVector::from_iterator(
                x.len(),
                x.iter()
                    .zip(lower.iter().zip(upper.iter()))
                    .map(|(v, (l, u))| v.clamp(*l, *u)),
            ),
            ConvexSet::OperatorL1Ball { m, du, dy, radius } => {
                project_operator_l1(x, *m, *du, *dy, *radius)
            }
        })
    }

    /// Random point of the set (not uniform for the operator ball).
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let d = self.dim();
        match self {
            ConvexSet::EuclideanBall { center, radius } => {
                center + sample_unit_ball(d, rng).expect("dim >= 1") * *radius
            }
            ConvexSet::Box { lower, upper } => DVector::from_iterator(
                d,
                lower
                    .iter()
                    .zip(upper.iter())
                    .map(|(l, u)| if l < u { rng.random_range(*l..=*u) } else { *l }),
            ),
            ConvexSet::OperatorL1Ball { radius, .. } => {
                let raw = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
                let norm = self.operator_l1_norm(&raw);
                let target = radius * rng.random::<f64>().powf(0.5);
                if norm > 0.0 {
                    raw * (target / norm)
                } else {
                    raw
                }
            }
        }
    }
}

fn block(x: &DVector<f64>, k: usize, du: usize, dy: usize) -> DMatrix<f64> {
    let off = k * du * dy;
    DMatrix::from_fn(du, dy, |i, j| x[off + i * dy + j])
}

/// Largest `θ ≥ 0` with `Σ (σ_i − θ)_+ ≥ λ`; zero if the singular values
/// cannot absorb `λ`. `sigma` sorted descending.
fn clip_level(sigma: &[f64], lambda: f64) -> f64 {
    let total: f64 = sigma.iter().sum();
    if total <= lambda {
        return 0.0;
    }
    let mut prefix = 0.0;
    for (k, s) in sigma.iter().enumerate() {
        prefix += s;
        let theta = (prefix - lambda) / (k + 1) as f64;
        let next = sigma.get(k + 1).copied().unwrap_or(0.0);
        if theta >= next {
            return theta.max(0.0);
        }
    }
    0.0
}

struct BlockSvd {
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
    sigma: Vec<f64>,
}

/// Euclidean projection onto `{Σ_k ‖M^{[k]}‖_op ≤ R}`.
///
/// For a multiplier `λ` every block is mapped to the proximal point of
/// `λ‖·‖_op`, which caps its singular values at the level removing exactly
/// `λ` of nuclear mass. The multiplier is found by bisection on the
/// resulting total norm; the feasible end of the bracket is returned.
fn project_operator_l1(x: &DVector<f64>, m: usize, du: usize, dy: usize, radius: f64) -> DVector<f64> {
    let svds: Vec<BlockSvd> = (0..m)
        .map(|k| {
            let svd = block(x, k, du, dy).svd(true, true);
            let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
            order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
            let u = svd.u.expect("requested u");
            let v_t = svd.v_t.expect("requested v_t");
            BlockSvd {
                u: DMatrix::from_fn(u.nrows(), order.len(), |i, j| u[(i, order[j])]),
                v_t: DMatrix::from_fn(order.len(), v_t.ncols(), |i, j| v_t[(order[i], j)]),
                sigma: order.iter().map(|&i| svd.singular_values[i]).collect(),
            }
        })
        .collect();
    let total_op: f64 = svds.iter().map(|b| b.sigma.first().copied().unwrap_or(0.0)).sum();
    if total_op <= radius {
        return x.clone();
    }
    let levels = |lambda: f64| -> Vec<f64> {
        svds.iter().map(|b| clip_level(&b.sigma, lambda)).collect()
    };
    let norm_at = |lambda: f64| -> f64 {
        svds.iter()
            .map(|b| clip_level(&b.sigma, lambda).min(b.sigma.first().copied().unwrap_or(0.0)))
            .sum()
    };
    let mut lo = 0.0;
    let mut hi = svds
        .iter()
        .map(|b| b.sigma.iter().sum::<f64>())
        .fold(0.0, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm_at(mid) > radius {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    let theta = levels(hi);
    let mut out = DVector::zeros(x.len());
    for (k, (b, th)) in svds.iter().zip(theta.iter()).enumerate() {
        let capped = DMatrix::from_diagonal(&DVector::from_iterator(
            b.sigma.len(),
            b.sigma.iter().map(|s| s.min(*th)),
        ));
        let mk = &b.u * capped * &b.v_t;
        let off = k * du * dy;
        for i in 0..du {
            for j in 0..dy {
                out[off + i * dy + j] = mk[(i, j)];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    #[test]
    fn clip_level_matches_hand_values() {
        // Removing 1 from (3, 1): cap at 2.
        assert!((clip_level(&[3.0, 1.0], 1.0) - 2.0).abs() < 1e-15);
        // Removing 3 from (3, 1): cap at 0.5 removes 2.5 + 0.5.
        assert!((clip_level(&[3.0, 1.0], 3.0) - 0.5).abs() < 1e-15);
        assert_eq!(clip_level(&[1.0, 1.0], 5.0), 0.0);
    }

    #[test]
    fn scalar_blocks_reduce_to_l1_ball() {
        // With 1x1 blocks the set is the l1 ball; projecting (3, 1) onto
        // radius 2 soft-thresholds by 1.
        let set = ConvexSet::operator_l1(2, 1, 1, 2.0).unwrap();
        let p = set.euclidean_project(&DVector::from_vec(vec![3.0, 1.0])).unwrap();
        assert!((p[0] - 2.0).abs() < 1e-12 && p[1].abs() < 1e-12, "{p}");
    }

    #[test]
    fn projections_land_in_set_and_are_idempotent() {
        let mut rng = stream(2, Stream::Probe);
        let sets = [
            ConvexSet::centered_ball(3, 1.5).unwrap(),
            ConvexSet::boxed(
                DVector::from_vec(vec![-1.0, 0.0, 2.0]),
                DVector::from_vec(vec![1.0, 0.5, 3.0]),
            )
            .unwrap(),
            ConvexSet::operator_l1(3, 2, 2, 1.0).unwrap(),
        ];
        for set in &sets {
            for _ in 0..200 {
                let x = DVector::from_fn(set.dim(), |_, _| rng.random_range(-5.0..5.0));
                let p = set.euclidean_project(&x).unwrap();
                assert!(set.contains(&p));
                let pp = set.euclidean_project(&p).unwrap();
                assert!((&pp - &p).amax() <= 1e-12);
            }
        }
    }

    #[test]
    fn operator_projection_is_optimal_against_feasible_probes() {
        let mut rng = stream(4, Stream::Probe);
        let set = ConvexSet::operator_l1(2, 2, 3, 1.0).unwrap();
        for _ in 0..50 {
            let x = DVector::from_fn(12, |_, _| rng.random_range(-2.0..2.0));
            let p = set.euclidean_project(&x).unwrap();
            for _ in 0..100 {
                let y = set.sample_point(&mut rng);
                assert!((&p - &x).dot(&(&y - &p)) >= -1e-9);
            }
        }
    }
}
