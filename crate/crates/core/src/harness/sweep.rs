use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub const MIN_GRID_POINTS: usize = 4;
pub const MIN_SEEDS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub horizon: usize,
    pub seed: u64,
    pub final_regret: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub horizon: usize,
    pub mean: f64,
    pub std_error: f64,
    pub n: usize,
}

/// Least-squares fit of `log y = intercept + slope · log x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_error: f64,
    /// 95% interval from Student's t with `n − 2` degrees of freedom.
    pub ci95: (f64, f64),
    pub residuals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub arm: String,
    /// Sorted by `(horizon, seed)`.
    pub cells: Vec<SweepCell>,
    pub points: Vec<PointSummary>,
    pub fit: SlopeFit,
}

/// Closed-form log-log fit. All values must be positive.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Fit(format!("need at least two paired points, got {} and {}", xs.len(), ys.len())));
    }
    if let Some(bad) = xs.iter().chain(ys).find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(Error::Fit(format!("log-log fit needs positive finite values, got {bad}")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all abscissae coincide".into()));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = lx.iter().zip(&ly).map(|(x, y)| y - intercept - slope * x).collect();
    let dof = lx.len() as f64 - 2.0;
    let (slope_std_error, ci95) = if dof > 0.0 {
        let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / dof;
        let se = (s2 / sxx).sqrt();
        let q = StudentsT::new(0.0, 1.0, dof)
            .map_err(|e| Error::Fit(e.to_string()))?
            .inverse_cdf(0.975);
        (se, (slope - q * se, slope + q * se))
    } else {
        (f64::NAN, (f64::NAN, f64::NAN))
    };
    Ok(SlopeFit { slope, intercept, slope_std_error, ci95, residuals })
}

/// Averages cells per horizon and fits the slope of the means.
pub fn summarize(arm: &str, mut cells: Vec<SweepCell>) -> Result<SweepResult> {
    cells.sort_by_key(|c| (c.horizon, c.seed));
    let mut points: Vec<PointSummary> = Vec::new();
    for chunk in cells.chunk_by(|a, b| a.horizon == b.horizon) {
        let n = chunk.len();
        let mean = chunk.iter().map(|c| c.final_regret).sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = chunk.iter().map(|c| (c.final_regret - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        points.push(PointSummary { horizon: chunk[0].horizon, mean, std_error, n });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.horizon as f64).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean).collect();
    let fit = fit_loglog(&xs, &ys)?;
    Ok(SweepResult { arm: arm.to_string(), cells, points, fit })
}

/// Runs every `(T, seed)` cell in parallel and fits the scaling exponent.
/// `cell(T, seed)` returns the final regret; the first failing cell aborts
/// the sweep with its identity.
pub fn scaling_sweep<F>(arm: &str, horizons: &[usize], seeds: &[u64], cell: F) -> Result<SweepResult>
where
    F: Fn(usize, u64) -> Result<f64> + Sync,
{
    let mut grid = horizons.to_vec();
    grid.sort_unstable();
    grid.dedup();
    if grid.len() < MIN_GRID_POINTS {
        return Err(Error::config("horizons", format!("need at least {MIN_GRID_POINTS} distinct horizons")));
    }
    if seeds.len() < MIN_SEEDS {
        return Err(Error::config("seeds", format!("need at least {MIN_SEEDS} seeds per horizon")));
    }
    let keys: Vec<(usize, u64)> = grid.iter().flat_map(|&t| seeds.iter().map(move |&s| (t, s))).collect();
    let cells = keys
        .par_iter()
        .map(|&(horizon, seed)| {
            cell(horizon, seed)
                .map(|final_regret| SweepCell { horizon, seed, final_regret })
                .map_err(|e| Error::Cell { horizon, seed, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    summarize(arm, cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: [usize; 5] = [1 << 10, 1 << 11, 1 << 12, 1 << 13, 1 << 14];

    #[test]
    fn exact_power_laws() {
        let xs: Vec<f64> = GRID.iter().map(|&t| t as f64).collect();
        let sqrt: Vec<f64> = xs.iter().map(|t| 3.7 * t.sqrt()).collect();
        let fit = fit_loglog(&xs, &sqrt).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3.7f64.ln()).abs() < 1e-10);
        let two_thirds: Vec<f64> = xs.iter().map(|t| 0.2 * t.powf(2.0 / 3.0)).collect();
        assert!((fit_loglog(&xs, &two_thirds).unwrap().slope - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn interval_covers_noisy_slope() {
        let xs: Vec<f64> = GRID.iter().map(|&t| t as f64).collect();
        let ys: Vec<f64> = xs.iter().zip([1.02, 0.97, 1.01, 0.99, 1.0]).map(|(t, e)| t.sqrt() * e).collect();
        let fit = fit_loglog(&xs, &ys).unwrap();
        assert!(fit.ci95.0 < 0.5 && 0.5 < fit.ci95.1);
        // residuals reproduce the data
        for ((x, y), r) in xs.iter().zip(&ys).zip(&fit.residuals) {
            assert!((fit.intercept + fit.slope * x.ln() + r - y.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn fit_rejects_nonpositive() {
        assert!(fit_loglog(&[1.0, 2.0], &[1.0, -1.0]).is_err());
        assert!(fit_loglog(&[2.0, 2.0], &[1.0, 3.0]).is_err());
    }

    #[test]
    fn sweep_is_ordered_and_reports_failing_cell() {
        let seeds: Vec<u64> = (0..5).collect();
        let r = scaling_sweep("x", &GRID, &seeds, |t, s| Ok((t as f64).sqrt() * (1.0 + s as f64))).unwrap();
        assert!((r.fit.slope - 0.5).abs() < 1e-12);
        assert!(r.cells.windows(2).all(|w| (w[0].horizon, w[0].seed) < (w[1].horizon, w[1].seed)));
        assert_eq!(r.points[0].n, 5);
        let err = scaling_sweep("x", &GRID, &seeds, |t, s| {
            if t == 4096 && s == 3 {
                Err(Error::Fit("boom".into()))
            } else {
                Ok(1.0)
            }
        })
        .unwrap_err();
        assert!(matches!(err, Error::Cell { horizon: 4096, seed: 3, .. }));
        assert!(scaling_sweep("x", &GRID[..3], &seeds, |_, _| Ok(1.0)).is_err());
        assert!(scaling_sweep("x", &GRID, &seeds[..4], |_, _| Ok(1.0)).is_err());
    }
}
