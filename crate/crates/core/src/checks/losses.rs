use super::{fail, FnSuite};
use crate::losses::{
    convolution_modulus_profile, make_synthetic_bcom_instance, verify_kappa_convexity, SyntheticConfig,
};

pub(super) fn suite() -> FnSuite {
    FnSuite {
        module: "losses",
        name: "curvature certificates and memory structure",
        checks: vec![
            ("kappa_sandwich_synthetic", kappa_sandwich_synthetic),
            ("gradient_certificate", gradient_certificate),
            ("modulus_profile_monotone", modulus_profile_monotone),
        ],
    }
}

fn kappa_sandwich_synthetic(seed: u64) -> Result<String, String> {
    let mut probes = 0;
    for k in 0..5 {
        let inst = make_synthetic_bcom_instance(&SyntheticConfig::new(3, 3, 12, 0.5, 2.0, 16.0, seed + k)).map_err(fail)?;
        for (t, f) in inst.losses.iter().enumerate().step_by(4) {
            let r = verify_kappa_convexity(f, &inst.set, 20, 1e-8, seed + t as u64).map_err(fail)?;
            if !r.ok {
                return Err(format!(
                    "instance {k}, t = {}: violation {:.3e}, fd mismatch {:.3e}",
                    t + 1,
                    r.worst_violation,
                    r.worst_fd_mismatch
                ));
            }
            probes += r.probes;
        }
    }
    Ok(format!("{probes} probes clean"))
}

/// `‖∇f_t‖ ≤ G_f` on windows drawn from the decision set.
fn gradient_certificate(seed: u64) -> Result<String, String> {
    use crate::rng::{stream, Stream};
    let inst = make_synthetic_bcom_instance(&SyntheticConfig::new(4, 4, 40, 0.5, 2.0, 16.0, seed)).map_err(fail)?;
    let mut rng = stream(seed, Stream::Probe);
    let mut worst = 0.0_f64;
    for f in &inst.losses {
        let window: Vec<_> = (0..4).map(|_| inst.set.sample_point(&mut rng)).collect();
        let g = f.gradient(&window).map_err(fail)?;
        let norm = g.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt();
        worst = worst.max(norm / inst.certificate.g_f);
    }
    if worst <= 1.0 {
        Ok(format!("largest ‖∇f‖/G_f = {worst:.3}"))
    } else {
        Err(format!("gradient exceeds its certificate by a factor {worst:.3}"))
    }
}

fn modulus_profile_monotone(seed: u64) -> Result<String, String> {
    let inst = make_synthetic_bcom_instance(&SyntheticConfig::new(3, 4, 8, 0.5, 2.0, 16.0, seed)).map_err(fail)?;
    let p = convolution_modulus_profile(inst.losses[0].blocks(), &[2, 4, 8, 16]);
    let last = *p.values.last().unwrap_or(&0.0);
    if p.nonincreasing && last > 0.0 {
        Ok(format!("modulus proxy {last:.3e} at n = 16"))
    } else {
        Err(format!("profile {:?}", p.values))
    }
}
