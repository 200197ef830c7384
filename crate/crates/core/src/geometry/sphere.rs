use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point on the unit sphere `S^{d-1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitSphereSample(DVector<f64>);

impl UnitSphereSample {
    /// Normalizes `v`; fails on the zero vector.
    pub fn from_vector(v: DVector<f64>) -> Result<Self> {
        let n = v.norm();
        if v.is_empty() {
            return Err(Error::InvalidDimension("sphere dimension must be at least 1".into()));
        }
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidDimension("cannot normalize a zero vector".into()));
        }
        Ok(UnitSphereSample(v / n))
    }

    pub fn vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

/// Uniform sample on `S^{d-1}` via a normalized Gaussian draw.
pub fn sample_unit_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<UnitSphereSample> {
    if d == 0 {
        return Err(Error::InvalidDimension("sphere dimension must be at least 1".into()));
    }
    loop {
        let g = DVector::from_iterator(d, (0..d).map(|_| StandardNormal.sample(rng)));
        let n: f64 = g.norm();
        if n > 1e-300 {
            return Ok(UnitSphereSample(g / n));
        }
    }
}

/// Uniform sample in the closed unit ball of `R^d`.
pub fn sample_unit_ball<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<DVector<f64>> {
    let dir = sample_unit_sphere(d, rng)?;
    let r: f64 = rng.random::<f64>().powf(1.0 / d as f64);
    Ok(dir.into_inner() * r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};
    use nalgebra::DMatrix;

    #[test]
    fn one_dimensional_is_a_sign() {
        let mut rng = stream(3, Stream::Sphere);
        for _ in 0..50 {
            let v = sample_unit_sphere(1, &mut rng).unwrap();
            assert_eq!(v.vector()[0].abs(), 1.0);
        }
    }

    #[test]
    fn zero_dimension_rejected() {
        let mut rng = stream(3, Stream::Sphere);
        assert!(matches!(
            sample_unit_sphere(0, &mut rng),
            Err(Error::InvalidDimension(_))
        ));
    }

    #[test]
    fn same_state_same_vector() {
        let a = sample_unit_sphere(2, &mut stream(5, Stream::Sphere)).unwrap();
        let b = sample_unit_sphere(2, &mut stream(5, Stream::Sphere)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn moments_in_three_dimensions() {
        let n = 1_000_000;
        let mut rng = stream(17, Stream::Sphere);
        let mut mean = DVector::zeros(3);
        let mut second = DMatrix::zeros(3, 3);
        for _ in 0..n {
            let v = sample_unit_sphere(3, &mut rng).unwrap().into_inner();
            assert!((v.norm() - 1.0).abs() <= 1e-12);
            second += &v * v.transpose();
            mean += v;
        }
        mean /= n as f64;
        second /= n as f64;
        let bound = 4.0 / (n as f64).sqrt();
        assert!(mean.iter().all(|m| m.abs() <= bound), "{mean}");
        let dev = second - DMatrix::identity(3, 3) / 3.0;
        assert!(dev.iter().all(|e| e.abs() <= 0.005));
    }

    #[test]
    fn ball_samples_stay_inside() {
        let mut rng = stream(1, Stream::Sphere);
        for _ in 0..1000 {
            assert!(sample_unit_ball(4, &mut rng).unwrap().norm() <= 1.0);
        }
    }
}
