//! Command-line front end: `simulate`, `infer`, `coverage`, `diag`.
//!
//! Every command reads an optional JSON config (unknown keys rejected) and
//! writes CSV or JSON. Exit codes: 0 success, 1 numeric failure, 2 bad
//! configuration, 3 I/O failure, 4 degenerate inference.
//!
//! `JUMPVOL_SEED` overrides the seed of any config; `--seed` overrides both.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::diagnostics::{bvm_convergence_check, mse_oracle, sandwich_variance, strictly_decreasing, BvmCheckConfig, TruthSummary};
use crate::error::{Error, Result};
use crate::io::{read_path_csv, write_diag_csv, write_path_csv, DiagRow};
use crate::jump_thresh::{estimate_jump_qv, qv_error_rate, ThresholdRule};
use crate::mc_harness::{run_coverage, write_coverage_csv, CoverageConfig};
use crate::sde_sim::{simulate_jumps, simulate_path, window_jump_increments, DiffusionSpec, JumpRealization, JumpSpec};
use crate::vol_posterior::{infer, mle, Inference, InferenceSettings, InverseGammaParams, DEFAULT_KAPPA_FLOOR};

pub const SEED_ENV: &str = "JUMPVOL_SEED";

#[derive(Debug, Parser)]
#[command(name = "jumpvol", version, about = "Volatility inference for jump diffusions via a tempered, shifted posterior")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a path and write `index,t_i,D_i[,mu_i]` CSV.
    Simulate(SimulateArgs),
    /// Run the corrected posterior on an increments CSV and print JSON.
    Infer(InferArgs),
    /// Coverage study over a (lambda, tau, n) grid.
    Coverage(CoverageArgs),
    /// Monte Carlo diagnostics.
    Diag(DiagArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV, `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
    /// Append the per-window jump increments `mu_i`.
    #[arg(long)]
    with_truth: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
}

#[derive(Debug, Args)]
struct InferArgs {
    /// Increments CSV, `-` for stdin.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
    /// `iqr:<c>`, `fixed:<eta>` or `fixed:inf`.
    #[arg(long)]
    threshold: Option<ThresholdRule>,
    #[arg(long)]
    level: Option<f64>,
    /// Clip the shifted posterior to theta > 0 and renormalize.
    #[arg(long)]
    truncate_positive: bool,
    /// Number of (theta, density) rows over the central 99.9% mass.
    #[arg(long, requires = "density_out")]
    density_grid: Option<usize>,
    #[arg(long)]
    density_out: Option<PathBuf>,
    /// Output JSON, `-` for stdout.
    #[arg(long, default_value = "-")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CoverageArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "-")]
    out: PathBuf,
    /// Worker threads; output does not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DiagKind {
    Bvm,
    Sandwich,
    Mse,
    Qvrate,
}

#[derive(Debug, Args)]
struct DiagArgs {
    #[arg(value_enum)]
    kind: DiagKind,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "-")]
    out: PathBuf,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub diffusion: DiffusionSpec,
    pub jumps: JumpSpec,
    pub n: usize,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig { diffusion: DiffusionSpec::default(), jumps: JumpSpec::default(), n: 5000, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferConfig {
    pub prior: InverseGammaParams,
    pub threshold: ThresholdRule,
    pub level: f64,
    pub kappa_floor: f64,
    pub truncate_positive: bool,
    pub density_grid: Option<usize>,
}

impl Default for InferConfig {
    fn default() -> Self {
        let s = InferenceSettings::default();
        InferConfig {
            prior: s.prior,
            threshold: s.threshold,
            level: s.level,
            kappa_floor: s.kappa_floor,
            truncate_positive: s.truncate_positive,
            density_grid: None,
        }
    }
}

/// Shared config for the `diag` subcommands. Missing `n_grid` / `reps` fall
/// back to per-subcommand defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagConfig {
    pub diffusion: DiffusionSpec,
    pub jumps: JumpSpec,
    pub n_grid: Option<Vec<usize>>,
    pub reps: Option<usize>,
    pub seed: u64,
    pub prior: InverseGammaParams,
    pub threshold: ThresholdRule,
    pub kappa_floor: f64,
    /// Jump realization held fixed by `sandwich` and `mse`; drawn from
    /// `jumps` with `seed` when absent.
    pub fixed_jumps: Option<JumpRealization>,
}

impl Default for DiagConfig {
    fn default() -> Self {
        DiagConfig {
            diffusion: DiffusionSpec::default(),
            jumps: JumpSpec::default(),
            n_grid: None,
            reps: None,
            seed: 1,
            prior: InverseGammaParams::default(),
            threshold: ThresholdRule::default(),
            kappa_floor: DEFAULT_KAPPA_FLOOR,
            fixed_jumps: None,
        }
    }
}

impl DiagConfig {
    fn settings(&self) -> InferenceSettings {
        InferenceSettings {
            prior: self.prior,
            threshold: self.threshold,
            kappa_floor: self.kappa_floor,
            ..InferenceSettings::default()
        }
    }
}

/// JSON record emitted by `infer`. `eta` is `null` when no threshold applies;
/// `flagged` uses the 1-based `index` column of the path CSV.
#[derive(Debug, Clone, Serialize)]
pub struct InferenceRecord {
    pub n: usize,
    pub theta_hat: f64,
    pub jump_qv_hat: f64,
    pub eta: f64,
    pub flagged: Vec<usize>,
    pub kappa: f64,
    pub posterior: PosteriorRecord,
    pub interval: IntervalRecord,
    pub bvm: BvmRecord,
}

#[derive(Debug, Clone, Serialize)]
pub struct PosteriorRecord {
    pub shape: f64,
    pub rate: f64,
    pub shift: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IntervalRecord {
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BvmRecord {
    pub mean: f64,
    pub variance: f64,
}

impl From<&Inference> for InferenceRecord {
    fn from(inf: &Inference) -> Self {
        InferenceRecord {
            n: inf.n,
            theta_hat: inf.theta_hat,
            jump_qv_hat: inf.qv.jump_qv_hat,
            eta: inf.qv.eta,
            flagged: inf.qv.flagged.iter().map(|i| i + 1).collect(),
            kappa: inf.kappa,
            posterior: PosteriorRecord {
                shape: inf.posterior.base.ig.shape,
                rate: inf.posterior.base.ig.rate,
                shift: inf.posterior.shift,
            },
            interval: IntervalRecord { level: inf.interval.level, lo: inf.interval.lo, hi: inf.interval.hi },
            bvm: BvmRecord { mean: inf.bvm.mean, variance: inf.bvm.variance },
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::InsufficientData { .. } | Error::Contract(_) | Error::Json(_) => 2,
        Error::Io(_) | Error::Csv(_) => 3,
        Error::DegenerateData(_) | Error::DegenerateInference(_) => 4,
        Error::Numeric { .. } => 1,
    }
}

/// Entry point for the binary.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

/// Like [`run`], with explicit standard streams.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{}", e.render());
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a, stdout),
        Command::Infer(a) => cmd_infer(a, stdout),
        Command::Coverage(a) => cmd_coverage(a, stdout),
        Command::Diag(a) => cmd_diag(a, stdout),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "jumpvol: {e}");
            exit_code(&e)
        }
    }
}

fn open_input(path: &Path) -> Result<Box<dyn Read>> {
    if path == Path::new("-") {
        return Ok(Box::new(io::stdin()));
    }
    Ok(Box::new(BufReader::new(File::open(path)?)))
}

fn with_output<F>(path: &Path, stdout: &mut dyn Write, write: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    if path == Path::new("-") {
        write(stdout)?;
        stdout.flush()?;
        return Ok(());
    }
    let mut file = BufWriter::new(File::create(path)?);
    write(&mut file)?;
    file.flush()?;
    Ok(())
}

fn check_input_exists(path: &Path) -> Result<()> {
    if path != Path::new("-") && !path.is_file() {
        return Err(Error::Io(io::Error::new(io::ErrorKind::NotFound, format!("{} not found", path.display()))));
    }
    Ok(())
}

fn load_config<C: DeserializeOwned + Default>(path: Option<&Path>) -> Result<C> {
    match path {
        None => Ok(C::default()),
        Some(p) => {
            check_input_exists(p)?;
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", p.display())))
        }
    }
}

fn resolve_seed(config_seed: u64, flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(config_seed),
    }
}

fn cmd_simulate(a: SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg: SimulateConfig = load_config(a.config.as_deref())?;
    cfg.seed = resolve_seed(cfg.seed, a.seed)?;
    if let Some(n) = a.n {
        cfg.n = n;
    }
    let path = simulate_path(&cfg.diffusion, &cfg.jumps, cfg.n, cfg.seed)?;
    with_output(&a.out, stdout, |w| write_path_csv(&path, w, a.with_truth))
}

fn degenerate_report(increments: &[f64], horizon: f64, settings: &InferenceSettings, err: &Error) -> serde_json::Value {
    let theta_hat = mle(increments, horizon);
    let qv = settings
        .threshold
        .threshold(increments)
        .and_then(|eta| estimate_jump_qv(increments, eta))
        .ok();
    let kappa = qv
        .as_ref()
        .filter(|_| theta_hat > 0.0)
        .map(|q| (1.0 - q.jump_qv_hat / (horizon * theta_hat)).powi(2));
    json!({
        "error": "degenerate_inference",
        "message": err.to_string(),
        "n": increments.len(),
        "theta_hat": theta_hat,
        "jump_qv_hat": qv.as_ref().map(|q| q.jump_qv_hat),
        "eta": qv.as_ref().map(|q| q.eta),
        "kappa": kappa,
        "kappa_floor": settings.kappa_floor,
    })
}

fn write_density_csv(inf: &Inference, truncate: bool, rows: usize, out: &mut dyn Write) -> Result<()> {
    if rows < 2 {
        return Err(Error::config("density grid needs at least 2 rows"));
    }
    let post = &inf.posterior;
    let (lo, hi) = if truncate {
        let f0 = post.nonpositive_mass();
        (
            post.base.ig.quantile(f0 + (1.0 - f0) * 0.0005)? - post.shift,
            post.base.ig.quantile(f0 + (1.0 - f0) * 0.9995)? - post.shift,
        )
    } else {
        (post.quantile(0.0005)?, post.quantile(0.9995)?)
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta", "density"])?;
    for k in 0..rows {
        let theta = lo + (hi - lo) * k as f64 / (rows - 1) as f64;
        let density = if truncate { post.truncated_pdf(theta) } else { post.pdf(theta) };
        w.write_record([theta.to_string(), density.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn cmd_infer(a: InferArgs, stdout: &mut dyn Write) -> Result<()> {
    check_input_exists(&a.input)?;
    let mut cfg: InferConfig = load_config(a.config.as_deref())?;
    if let Some(t) = a.threshold {
        cfg.threshold = t;
    }
    if let Some(l) = a.level {
        cfg.level = l;
    }
    cfg.truncate_positive |= a.truncate_positive;
    if a.density_grid.is_some() {
        cfg.density_grid = a.density_grid;
    }
    if cfg.density_grid.is_some() && a.density_out.is_none() {
        return Err(Error::config("density_grid needs --density-out"));
    }
    let settings = InferenceSettings {
        prior: cfg.prior,
        threshold: cfg.threshold,
        level: cfg.level,
        kappa_floor: cfg.kappa_floor,
        truncate_positive: cfg.truncate_positive,
    };
    settings.validate()?;

    let path = read_path_csv(open_input(&a.input)?)?;
    let inf = match infer(&path.increments, path.horizon, &settings) {
        Ok(inf) => inf,
        Err(e) if e.is_degenerate() => {
            let report = degenerate_report(&path.increments, path.horizon, &settings, &e);
            with_output(&a.out, stdout, |w| {
                serde_json::to_writer_pretty(&mut *w, &report)?;
                writeln!(w)?;
                Ok(())
            })?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    if let (Some(rows), Some(out)) = (cfg.density_grid, a.density_out.as_deref()) {
        with_output(out, stdout, |w| write_density_csv(&inf, settings.truncate_positive, rows, w))?;
    }
    let record = InferenceRecord::from(&inf);
    with_output(&a.out, stdout, |w| {
        serde_json::to_writer_pretty(&mut *w, &record)?;
        writeln!(w)?;
        Ok(())
    })
}

fn cmd_coverage(a: CoverageArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg: CoverageConfig = load_config(a.config.as_deref())?;
    cfg.base_seed = resolve_seed(cfg.base_seed, a.seed)?;
    if let Some(r) = a.reps {
        cfg.reps = r;
    }
    let rows = run_coverage(&cfg, a.workers)?;
    with_output(&a.out, stdout, |w| write_coverage_csv(&rows, w))
}

fn fixed_realization(cfg: &DiagConfig) -> Result<JumpRealization> {
    match &cfg.fixed_jumps {
        Some(j) => {
            j.validate(cfg.diffusion.horizon)?;
            Ok(j.clone())
        }
        None => simulate_jumps(&cfg.jumps, cfg.diffusion.horizon, cfg.seed),
    }
}

pub fn diag_rows(kind: &str, cfg: &DiagConfig, workers: Option<usize>) -> Result<Vec<DiagRow>> {
    let mut rows = Vec::new();
    match kind {
        "bvm" => {
            let check = BvmCheckConfig {
                diffusion: cfg.diffusion,
                jumps: cfg.jumps.clone(),
                n_grid: cfg.n_grid.clone().unwrap_or_else(|| vec![1000, 4000, 16000]),
                reps: cfg.reps.unwrap_or(200),
                seed: cfg.seed,
                settings: cfg.settings(),
            };
            let table = bvm_convergence_check(&check, workers)?;
            for r in &table {
                rows.push(DiagRow::new(Some(r.n), "tempered_tv", r.tempered_tv_mean, Some(r.tempered_tv_stderr)));
                rows.push(DiagRow::new(Some(r.n), "modified_tv", r.modified_tv_mean, Some(r.modified_tv_stderr)));
                rows.push(DiagRow::new(Some(r.n), "degenerate_count", r.degenerate as f64, None));
            }
            let flag = |b: bool| if b { 1.0 } else { 0.0 };
            rows.push(DiagRow::new(
                None,
                "tempered_tv_strictly_decreasing",
                flag(strictly_decreasing(table.iter().map(|r| r.tempered_tv_mean))),
                None,
            ));
            rows.push(DiagRow::new(
                None,
                "modified_tv_strictly_decreasing",
                flag(strictly_decreasing(table.iter().map(|r| r.modified_tv_mean))),
                None,
            ));
        }
        "sandwich" => {
            let jumps = fixed_realization(cfg)?;
            let reps = cfg.reps.unwrap_or(4000);
            for n in cfg.n_grid.clone().unwrap_or_else(|| vec![5000]) {
                let mu = window_jump_increments(&jumps, cfg.diffusion.horizon, n.max(1));
                let jump_qv: f64 = mu.iter().map(|m| m * m).sum();
                let truth = TruthSummary::new(
                    cfg.diffusion.theta_star,
                    jump_qv,
                    mu.iter().filter(|m| **m != 0.0).count(),
                    cfg.diffusion.horizon,
                );
                rows.push(DiagRow::new(Some(n), "jump_qv", jump_qv, None));
                rows.push(DiagRow::new(Some(n), "sandwich_variance", sandwich_variance(&truth, cfg.diffusion.horizon, n), None));
                if reps > 0 {
                    let m = mse_oracle(&cfg.diffusion, &jumps, n, reps, cfg.seed, workers)?;
                    rows.push(DiagRow::new(Some(n), "empirical_variance", m.empirical_variance, Some(m.variance_stderr)));
                    rows.push(DiagRow::new(Some(n), "variance_vs_sandwich_rel", m.variance_vs_sandwich(), None));
                }
            }
        }
        "mse" => {
            let jumps = fixed_realization(cfg)?;
            let reps = cfg.reps.unwrap_or(4000);
            for n in cfg.n_grid.clone().unwrap_or_else(|| vec![5000]) {
                let m = mse_oracle(&cfg.diffusion, &jumps, n, reps, cfg.seed, workers)?;
                rows.push(DiagRow::new(Some(n), "jump_qv", m.truth.jump_qv, None));
                rows.push(DiagRow::new(Some(n), "empirical_mse", m.empirical_mse, Some(m.mse_stderr)));
                rows.push(DiagRow::new(Some(n), "sandwich_variance", m.sandwich, None));
                rows.push(DiagRow::new(Some(n), "mse_formula", m.mse_formula, None));
                rows.push(DiagRow::new(Some(n), "mse_vs_sandwich_rel", m.mse_vs_sandwich(), None));
                rows.push(DiagRow::new(Some(n), "mse_vs_formula_rel", m.mse_vs_formula(), None));
            }
        }
        "qvrate" => {
            let report = qv_error_rate(
                &cfg.diffusion,
                &cfg.jumps,
                cfg.threshold,
                &cfg.n_grid.clone().unwrap_or_else(|| vec![1000, 4000, 16000]),
                cfg.reps.unwrap_or(500),
                cfg.seed,
                workers,
            )?;
            for p in &report.points {
                rows.push(DiagRow::new(Some(p.n), "mae", p.mae, Some(p.mae_stderr)));
            }
            rows.push(DiagRow::new(None, "slope", report.slope.unwrap_or(f64::NAN), None));
        }
        other => return Err(Error::config(format!("unknown diagnostic {other:?}"))),
    }
    Ok(rows)
}

fn cmd_diag(a: DiagArgs, stdout: &mut dyn Write) -> Result<()> {
    let mut cfg: DiagConfig = load_config(a.config.as_deref())?;
    cfg.seed = resolve_seed(cfg.seed, a.seed)?;
    if a.reps.is_some() {
        cfg.reps = a.reps;
    }
    let kind = match a.kind {
        DiagKind::Bvm => "bvm",
        DiagKind::Sandwich => "sandwich",
        DiagKind::Mse => "mse",
        DiagKind::Qvrate => "qvrate",
    };
    let rows = diag_rows(kind, &cfg, a.workers)?;
    with_output(&a.out, stdout, |w| write_diag_csv(&rows, w))
}
