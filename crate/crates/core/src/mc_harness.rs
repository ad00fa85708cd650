//! Coverage experiment over a grid of jump rates, jump sizes and sample sizes.
//!
//! Cells are enumerated `lambda` outermost, then `tau`, then `n`; replication
//! `r` of cell `c` uses `derive_seed(base_seed, c, r)`. All replications of a
//! run are evaluated in parallel and reduced in index order afterwards, so the
//! output is identical for every worker count.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::sde_sim::{sample_path_with, DiffusionSpec, JumpSpec};
use crate::seed::{derive_seed, rng_from_seed};
use crate::jump_thresh::ThresholdRule;
use crate::vol_posterior::{infer, CredibleInterval, InferenceSettings, InverseGammaParams, DEFAULT_KAPPA_FLOOR};

pub const COVERAGE_CSV_HEADER: [&str; 8] =
    ["lambda", "tau", "n", "reps", "coverage", "mean_width", "mc_stderr", "degenerate_count"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageConfig {
    pub diffusion: DiffusionSpec,
    pub lambda_grid: Vec<f64>,
    pub tau_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub level: f64,
    pub threshold: ThresholdRule,
    pub prior: InverseGammaParams,
    pub kappa_floor: f64,
    pub truncate_positive: bool,
    pub base_seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            diffusion: DiffusionSpec::default(),
            lambda_grid: vec![4.0, 8.0, 16.0, 32.0],
            tau_grid: vec![1.0, 2.0, 4.0, 8.0],
            n_grid: vec![5000],
            reps: 1000,
            level: 0.95,
            threshold: ThresholdRule::default(),
            prior: InverseGammaParams::default(),
            kappa_floor: DEFAULT_KAPPA_FLOOR,
            truncate_positive: false,
            base_seed: 20_180_901,
        }
    }
}

impl CoverageConfig {
    pub fn validate(&self) -> Result<()> {
        self.diffusion.validate()?;
        self.settings().validate()?;
        if self.reps == 0 {
            return Err(Error::config("reps must be >= 1"));
        }
        if self.lambda_grid.is_empty() || self.tau_grid.is_empty() || self.n_grid.is_empty() {
            return Err(Error::config("lambda_grid, tau_grid and n_grid must be nonempty"));
        }
        for &lambda in &self.lambda_grid {
            for &tau in &self.tau_grid {
                JumpSpec::two_point(lambda, tau).validate()?;
            }
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| n < 4) {
            return Err(Error::config(format!("sample sizes must be >= 4, got {n}")));
        }
        let cells = self.lambda_grid.len() * self.tau_grid.len() * self.n_grid.len();
        if cells > u32::MAX as usize || self.reps > u32::MAX as usize {
            return Err(Error::config("grid too large for seed derivation"));
        }
        Ok(())
    }

    pub fn settings(&self) -> InferenceSettings {
        InferenceSettings {
            prior: self.prior,
            threshold: self.threshold,
            level: self.level,
            kappa_floor: self.kappa_floor,
            truncate_positive: self.truncate_positive,
        }
    }

    /// `(lambda, tau, n)` in cell-index order.
    pub fn cells(&self) -> Vec<(f64, f64, usize)> {
        let mut cells = Vec::new();
        for &lambda in &self.lambda_grid {
            for &tau in &self.tau_grid {
                for &n in &self.n_grid {
                    cells.push((lambda, tau, n));
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReplicationRecord {
    pub theta_hat: f64,
    pub jump_qv_hat: f64,
    pub kappa: f64,
    pub interval: CredibleInterval,
    pub covered: bool,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReplicationOutcome {
    Completed(ReplicationRecord),
    /// Pipeline stopped on a degenerate-data or degenerate-inference error.
    Degenerate(String),
}

/// One simulated path pushed through the full pipeline.
pub fn run_replication(
    diff: &DiffusionSpec,
    jumps: &JumpSpec,
    n: usize,
    settings: &InferenceSettings,
    seed: u64,
) -> Result<ReplicationOutcome> {
    let mut rng = rng_from_seed(seed);
    let path = sample_path_with(diff, jumps, n, &mut rng)?;
    match infer(&path.increments, path.horizon, settings) {
        Ok(inf) => Ok(ReplicationOutcome::Completed(ReplicationRecord {
            theta_hat: inf.theta_hat,
            jump_qv_hat: inf.qv.jump_qv_hat,
            kappa: inf.kappa,
            interval: inf.interval,
            covered: inf.interval.contains(diff.theta_star),
            width: inf.interval.width(),
        })),
        Err(e) if e.is_degenerate() => Ok(ReplicationOutcome::Degenerate(e.to_string())),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageRow {
    pub lambda: f64,
    pub tau: f64,
    pub n: usize,
    pub reps: usize,
    /// Over non-degenerate replications only.
    pub coverage: f64,
    pub mean_width: f64,
    /// `sqrt(p (1 - p) / m)` with `m` the number of non-degenerate replications.
    pub mc_stderr: f64,
    pub degenerate_count: usize,
}

pub fn binomial_stderr(p: f64, m: usize) -> f64 {
    (p * (1.0 - p) / m as f64).sqrt()
}

fn summarize(lambda: f64, tau: f64, n: usize, outcomes: &[ReplicationOutcome]) -> CoverageRow {
    let mut covered = 0usize;
    let mut width = 0.0;
    let mut used = 0usize;
    for o in outcomes {
        if let ReplicationOutcome::Completed(r) = o {
            used += 1;
            covered += usize::from(r.covered);
            width += r.width;
        }
    }
    let (coverage, mean_width, mc_stderr) = if used == 0 {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        let p = covered as f64 / used as f64;
        (p, width / used as f64, binomial_stderr(p, used))
    };
    CoverageRow {
        lambda,
        tau,
        n,
        reps: outcomes.len(),
        coverage,
        mean_width,
        mc_stderr,
        degenerate_count: outcomes.len() - used,
    }
}

pub fn run_coverage(config: &CoverageConfig, workers: Option<usize>) -> Result<Vec<CoverageRow>> {
    config.validate()?;
    let cells = config.cells();
    let reps = config.reps;
    let settings = config.settings();
    let outcomes = map_indexed(workers, cells.len() * reps, |k| {
        let (cell, rep) = (k / reps, k % reps);
        let (lambda, tau, n) = cells[cell];
        let seed = derive_seed(config.base_seed, cell as u32, rep as u32);
        run_replication(&config.diffusion, &JumpSpec::two_point(lambda, tau), n, &settings, seed)
    })?
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    Ok(cells
        .iter()
        .zip(outcomes.chunks(reps))
        .map(|(&(lambda, tau, n), chunk)| summarize(lambda, tau, n, chunk))
        .collect())
}

pub fn write_coverage_csv<W: Write>(rows: &[CoverageRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COVERAGE_CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.lambda.to_string(),
            r.tau.to_string(),
            r.n.to_string(),
            r.reps.to_string(),
            r.coverage.to_string(),
            r.mean_width.to_string(),
            r.mc_stderr.to_string(),
            r.degenerate_count.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
