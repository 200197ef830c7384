use std::path::{Path, PathBuf};

use bandit_lds::bco::LearnerRegistry;
use bandit_lds::checks::SuiteRegistry;
use bandit_lds::config::{ExperimentConfig, Family, Mode};
use bandit_lds::harness::{
    run_bcom_cell, run_control_cell, scaling_sweep, BoundReport, CertificateConstants, RegretRecord, SweepResult,
};
use bandit_lds::output::{sweep_csv, to_json, trace_csv, trajectory_csv, write_file};
use bandit_lds::Error;
use serde::Serialize;

pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seeds: Option<usize>,
    pub jobs: Option<usize>,
}

pub enum Failure {
    /// Some invariant check failed.
    Check(String),
    Config(String),
    Runtime(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Check(_) => 1,
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Check(m) | Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

struct Session {
    config: ExperimentConfig,
    hash: String,
    out: PathBuf,
    registry: LearnerRegistry,
}

fn load(path: &Path, overrides: &Overrides, expected: Mode) -> Result<Session, Failure> {
    let registry = LearnerRegistry::default();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read config {}: {e}", path.display())))?;
    let mut config = ExperimentConfig::from_json(&text, &registry.names())?;
    if config.mode != expected {
        return Err(Failure::Config(format!(
            "invalid configuration at `mode`: config is for {:?}, command expects {:?}",
            config.mode, expected
        )));
    }
    if let Some(n) = overrides.seeds {
        if n == 0 {
            return Err(Failure::Config("--seeds must be at least 1".into()));
        }
        config = config.with_seed_count(n);
        config.validate(&registry.names())?;
    }
    if let Some(jobs) = overrides.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
            .map_err(|e| Failure::Runtime(format!("thread pool: {e}")))?;
    }
    let out = overrides
        .out
        .clone()
        .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let hash = config.hash();
    Ok(Session { config, hash, out, registry })
}

/// What the run summaries keep of a record: everything except the per-step
/// columns, which live in the trace CSVs, and the wall clock.
#[derive(Serialize)]
struct RunSummary {
    arm: String,
    horizon: usize,
    seed: u64,
    final_regret: f64,
    comparator: Vec<f64>,
    comparator_total: f64,
    updates: usize,
    certificate: CertificateConstants,
    bound: BoundReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    discrepancy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    discrepancy_slack: Option<f64>,
}

#[derive(Serialize)]
struct Summary<T> {
    config_hash: String,
    runs: Vec<T>,
}

fn summary_of(r: &RegretRecord, bound: BoundReport) -> RunSummary {
    RunSummary {
        arm: r.arm.clone(),
        horizon: r.horizon(),
        seed: r.seed,
        final_regret: r.final_regret(),
        comparator: r.comparator.clone(),
        comparator_total: r.comparator_total,
        updates: r.updated.iter().filter(|u| **u).count(),
        certificate: r.certificate,
        bound,
        discrepancy: None,
        discrepancy_slack: None,
    }
}

fn cells(config: &ExperimentConfig) -> Vec<(String, usize, u64)> {
    let mut out = Vec::new();
    for arm in &config.arms {
        for &t in &config.horizons {
            for &s in &config.seeds {
                out.push((arm.clone(), t, s));
            }
        }
    }
    out
}

fn trace_name(arm: &str, t: usize, seed: u64) -> String {
    format!("trace_{arm}_T{t}_seed{seed}.csv")
}

pub fn bcom_run(path: &Path, overrides: &Overrides) -> Result<(), Failure> {
    let s = load(path, overrides, Mode::Bcom)?;
    let family = s.config.bcom.as_ref().expect("validated");
    let mut runs = Vec::new();
    for (arm, t, seed) in cells(&s.config) {
        let out = run_bcom_cell(&s.registry, family, &arm, t, seed, &s.hash)?;
        write_file(&s.out.join(trace_name(&arm, t, seed)), &trace_csv(&out.record, s.config.timestamp))?;
        println!(
            "{arm:>10}  T={t:<7} seed={seed:<4} regret={:>12.4}  bound={:.3e}",
            out.record.final_regret(),
            out.bound.bound
        );
        runs.push(summary_of(&out.record, out.bound));
    }
    write_file(&s.out.join("summary.json"), &to_json(&Summary { config_hash: s.hash, runs }))?;
    Ok(())
}

pub fn control_run(path: &Path, overrides: &Overrides) -> Result<(), Failure> {
    let s = load(path, overrides, Mode::Control)?;
    let family = s.config.control.as_ref().expect("validated");
    let mut runs = Vec::new();
    for (arm, t, seed) in cells(&s.config) {
        let out = run_control_cell(&s.registry, family, &arm, t, seed, &s.hash)?;
        write_file(&s.out.join(trace_name(&arm, t, seed)), &trace_csv(&out.record, s.config.timestamp))?;
        write_file(
            &s.out.join(format!("trajectory_{arm}_T{t}_seed{seed}.csv")),
            &trajectory_csv(&out.run, s.config.timestamp),
        )?;
        println!(
            "{arm:>10}  T={t:<7} seed={seed:<4} m={:<3} regret={:>12.4}  discrepancy={:.3e}",
            out.run.memory,
            out.record.final_regret(),
            out.discrepancy
        );
        let mut summary = summary_of(&out.record, out.bound);
        summary.discrepancy = Some(out.discrepancy);
        summary.discrepancy_slack = Some(out.run.constants.total_slack);
        runs.push(summary);
    }
    write_file(&s.out.join("summary.json"), &to_json(&Summary { config_hash: s.hash, runs }))?;
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    config_hash: &'a str,
    family: Family,
    results: &'a [SweepResult],
}

pub fn sweep(path: &Path, overrides: &Overrides) -> Result<(), Failure> {
    let s = load(path, overrides, Mode::Sweep)?;
    let family = s.config.family().expect("validated");
    let mut results = Vec::new();
    for arm in &s.config.arms {
        let result = match family {
            Family::Bcom => {
                let f = s.config.bcom.as_ref().expect("validated");
                scaling_sweep(arm, &s.config.horizons, &s.config.seeds, |t, seed| {
                    run_bcom_cell(&s.registry, f, arm, t, seed, &s.hash).map(|o| o.record.final_regret())
                })?
            }
            Family::Control => {
                let f = s.config.control.as_ref().expect("validated");
                scaling_sweep(arm, &s.config.horizons, &s.config.seeds, |t, seed| {
                    run_control_cell(&s.registry, f, arm, t, seed, &s.hash).map(|o| o.record.final_regret())
                })?
            }
        };
        let fit = &result.fit;
        println!(
            "{arm:>10}  slope {:.4}  95% CI [{:.4}, {:.4}]",
            fit.slope, fit.ci95.0, fit.ci95.1
        );
        for p in &result.points {
            println!("{:>10}  T={:<7} mean regret {:>12.4} ± {:.4}", "", p.horizon, p.mean, p.std_error);
        }
        results.push(result);
    }
    write_file(&s.out.join("sweep.csv"), &sweep_csv(&results, s.config.timestamp))?;
    write_file(
        &s.out.join("sweep_summary.json"),
        &to_json(&SweepSummary { config_hash: &s.hash, family, results: &results }),
    )?;
    Ok(())
}

pub fn check(path: &Path, overrides: &Overrides) -> Result<(), Failure> {
    let s = load(path, overrides, Mode::Check)?;
    let report = SuiteRegistry::default().run_all(s.config.seeds[0])?;
    print!("{}", report.table());
    if overrides.out.is_some() || s.config.output_dir.is_some() {
        write_file(&s.out.join("check.json"), &to_json(&report))?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Check(format!("{} check(s) failed", report.failures())))
    }
}
