//! Regret measurement, comparator search, seed sweeps and bound diagnostics.

mod bounds;
mod comparator;
mod experiment;
mod regret;
mod sweep;

pub use bounds::{
    base_regret_bound, bound_diagnostics, expected_update_rate, moving_cost_bound, update_frequency, BoundInputs,
    BoundReport, FrequencyReport,
};
pub use comparator::{
    best_fixed_comparator, AffineSumObjective, AffineTerm, ComparatorResult, DEFAULT_COMPARATOR_TOL,
    MAX_COMPARATOR_ITERS,
};
pub use experiment::{
    bcom_bound_inputs, bcom_record, control_bound_inputs, run_bcom_cell, run_control_cell, BcomFamily, BcomOutcome,
    ControlFamily, ControlOutcome, CostSpec, EtaRule, NoiseSpec, SystemShape, SCALING_GRID,
};
pub use regret::{batch_regret, compute_regret, CertificateConstants, RegretRecord};
pub use sweep::{fit_loglog, scaling_sweep, summarize, PointSummary, SlopeFit, SweepCell, SweepResult, MIN_GRID_POINTS, MIN_SEEDS};
