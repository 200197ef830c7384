use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{fail, FnSuite};
use crate::geometry::{mahalanobis_project, sample_unit_sphere, ConvexSet, PsdMatrix};
use crate::rng::{stream, Stream};

pub(super) fn suite() -> FnSuite {
    FnSuite {
        module: "geometry",
        name: "psd calculus, sphere sampling, projections",
        checks: vec![
            ("psd_square_roots", psd_square_roots),
            ("sphere_samples_unit_norm", sphere_samples_unit_norm),
            ("projection_variational_inequality", projection_variational_inequality),
        ],
    }
}

fn random_psd<R: Rng>(d: usize, rng: &mut R) -> PsdMatrix {
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    PsdMatrix::from_gram(&g * g.transpose() + DMatrix::identity(d, d) * 0.1).expect("gram is psd")
}

fn psd_square_roots(seed: u64) -> Result<String, String> {
    let mut rng = stream(seed, Stream::Probe);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let a = random_psd(5, &mut rng);
        let s = a.sqrt();
        worst = worst.max((&s * &s - a.matrix()).amax() / a.max_eigenvalue());
        let is = a.inv_sqrt(1e-12).map_err(fail)?;
        let id = is.matrix() * a.matrix() * is.matrix();
        worst = worst.max((id - DMatrix::identity(5, 5)).amax());
    }
    if worst <= 1e-9 {
        Ok(format!("worst residual {worst:.1e}"))
    } else {
        Err(format!("square-root residual {worst:.3e} > 1e-9"))
    }
}

fn sphere_samples_unit_norm(seed: u64) -> Result<String, String> {
    let mut rng = stream(seed, Stream::Sphere);
    let mut worst = 0.0_f64;
    for d in 1..=8 {
        for _ in 0..200 {
            let v = sample_unit_sphere(d, &mut rng).map_err(fail)?;
            worst = worst.max((v.vector().norm() - 1.0).abs());
        }
    }
    if worst <= 1e-12 {
        Ok(format!("max |‖v‖ − 1| = {worst:.1e}"))
    } else {
        Err(format!("sample off the sphere by {worst:.3e}"))
    }
}

/// `⟨A(x − p), y − x⟩ ≥ 0` for sampled `y` in the set.
fn projection_variational_inequality(seed: u64) -> Result<String, String> {
    let mut rng = stream(seed, Stream::Probe);
    let mut worst = 0.0_f64;
    for trial in 0..100 {
        let set = match trial % 3 {
            0 => ConvexSet::centered_ball(3, 1.0),
            1 => ConvexSet::boxed(DVector::from_element(3, -0.5), DVector::from_element(3, 0.8)),
            _ => ConvexSet::operator_l1(2, 2, 2, 1.0),
        }
        .map_err(fail)?;
        let d = set.dim();
        let a = random_psd(d, &mut rng);
        let p = DVector::from_fn(d, |_, _| 2.0 * rng.sample::<f64, _>(StandardNormal));
        let x = mahalanobis_project(&set, &a, &p).map_err(fail)?;
        if !set.contains_with(&x, 1e-7) {
            return Err(format!("trial {trial}: projection left the set"));
        }
        let g = a.matrix() * (&x - &p);
        for _ in 0..50 {
            let y = set.sample_point(&mut rng);
            worst = worst.min(g.dot(&(y - &x)) / g.norm().max(1.0));
        }
    }
    if worst >= -1e-7 {
        Ok(format!("100 triples, worst inner product {worst:.1e}"))
    } else {
        Err(format!("variational inequality violated by {:.3e}", -worst))
    }
}
