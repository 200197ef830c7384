//! Partially observed linear systems, disturbance response controllers and
//! the reduction of bandit control to bandit convex optimization with
//! affine memory.

mod cost;
mod drc;
mod markov;
mod reduction;
mod runner;
mod signals;
mod system;

pub use cost::{CostKind, CostSchedule, NoiseSchedule};
pub use drc::{embed_signals, DrcPolicy};
pub use markov::{choose_truncation, markov_operator, markov_tail_bound, MarkovOperator, MAX_TRUNCATION};
pub use reduction::{
    check_truncation_budget, default_memory, reduce_to_bcom, reduction_constants, ReductionConstants,
    ReductionContext, ReductionInputs,
};
pub use runner::{
    comparator_cost, control_comparator_objective, play_policies, pure_k_signals, run_control, ControlParams,
    ControlProblem, ControlRun, PolicyPlay, PolicySet,
};
pub use signals::{counterfactual_signals, SignalReconstruction, SignalReconstructor};
pub use system::{make_stabilizable_system, LdsInstance, StabilizingController, SystemConfig, SIMILARITY_TOL};
