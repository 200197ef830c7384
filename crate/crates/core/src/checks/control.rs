use nalgebra::DMatrix;
use rand::Rng;

use super::{fail, FnSuite};
use crate::bco::LearnerRegistry;
use crate::control::{
    choose_truncation, make_stabilizable_system, markov_operator, play_policies, pure_k_signals, run_control,
    ControlParams, ControlProblem, CostKind, CostSchedule, DrcPolicy, NoiseSchedule, SystemConfig,
};
use crate::harness::ControlFamily;
use crate::losses::{verify_kappa_convexity, AdversaryKind};
use crate::rng::{stream, Stream};

pub(super) fn suite() -> FnSuite {
    FnSuite {
        module: "control",
        name: "markov decay, signal reconstruction and the reduction",
        checks: vec![
            ("markov_decay_certificate", markov_decay_certificate),
            ("signal_reconstruction_oracle", signal_reconstruction_oracle),
            ("state_radius", state_radius),
            ("reduced_losses_kappa_convex", reduced_losses_kappa_convex),
        ],
    }
}

fn system(seed: u64) -> SystemConfig {
    SystemConfig { dx: 3, du: 2, dy: 2, kappa: 3.0, gamma: 0.3, kappa_sys: 2.0, seed }
}

fn markov_decay_certificate(seed: u64) -> Result<String, String> {
    let mut worst = 0.0_f64;
    for k in 0..5 {
        let (inst, ctrl) = make_stabilizable_system(&system(seed + k)).map_err(fail)?;
        let n = choose_truncation(&inst, &ctrl, 500);
        let mk = markov_operator(&inst, &ctrl, n).map_err(fail)?;
        worst = worst.max(mk.worst_decay_ratio());
    }
    if worst <= 1.0 + 1e-9 {
        Ok(format!("largest ‖G^[i]‖/bound = {worst:.3}"))
    } else {
        Err(format!("decay certificate exceeded by {worst:.3}"))
    }
}

fn signal_reconstruction_oracle(seed: u64) -> Result<String, String> {
    let horizon = 200;
    let (inst, ctrl) = make_stabilizable_system(&system(seed)).map_err(fail)?;
    let costs = CostSchedule::new(CostKind::Fixed, 0.5, 2.0, 4, horizon, seed).map_err(fail)?;
    let noise = NoiseSchedule::new(
        AdversaryKind::SeededBounded { radius: 1.0 },
        AdversaryKind::Sinusoidal { period: 7.0 },
        1.0,
        horizon,
        seed,
    )
    .map_err(fail)?;
    let n = choose_truncation(&inst, &ctrl, horizon);
    let problem = ControlProblem::new(inst, ctrl, costs, noise).map_err(fail)?;
    let mut rng = stream(seed, Stream::Probe);
    let policies: Vec<DrcPolicy> = (0..horizon)
        .map(|_| DrcPolicy::new((0..3).map(|_| DMatrix::from_fn(2, 2, |_, _| rng.random_range(-0.3..0.3))).collect()))
        .collect::<Result<_, _>>()
        .map_err(fail)?;
    let play = play_policies(&problem, &policies, n).map_err(fail)?;
    let truth = pure_k_signals(&problem, horizon).map_err(fail)?;
    let worst = play.signals.iter().zip(&truth).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    if worst <= 1e-8 {
        Ok(format!("max deviation {worst:.1e} with N = {n}"))
    } else {
        Err(format!("reconstruction off by {worst:.3e}"))
    }
}

fn state_radius(seed: u64) -> Result<String, String> {
    let family = ControlFamily::scaling_default();
    let problem = family.problem(1_000, seed).map_err(fail)?;
    let run = run_control(&LearnerRegistry::default(), &problem, &family.params("newton", 1_000, seed)).map_err(fail)?;
    let (got, cap) = (run.max_pair_norm(), run.constants.radius);
    if got <= cap {
        Ok(format!("max ‖(y, u)‖ = {got:.3} ≤ R = {cap:.3}"))
    } else {
        Err(format!("‖(y, u)‖ reached {got:.3} > R = {cap:.3}"))
    }
}

fn reduced_losses_kappa_convex(seed: u64) -> Result<String, String> {
    let family = ControlFamily::scaling_default();
    let problem = family.problem(120, seed).map_err(fail)?;
    let mut params: ControlParams = family.params("newton", 120, seed);
    params.keep_losses = true;
    let run = run_control(&LearnerRegistry::default(), &problem, &params).map_err(fail)?;
    for (i, f) in run.losses.iter().enumerate().step_by(10) {
        let r = verify_kappa_convexity(f, &run.set, 10, 1e-8, seed + i as u64).map_err(fail)?;
        if !r.ok {
            return Err(format!("reduced loss {i}: violation {:.3e}", r.worst_violation));
        }
    }
    Ok(format!("{} reduced losses sampled", run.losses.len().div_ceil(10)))
}
