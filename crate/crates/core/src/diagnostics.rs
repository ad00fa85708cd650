//! Numeric checks of the asymptotic behaviour: total-variation distance to
//! the normal limits, the sandwich variance of `theta_hat` under the
//! conditional law given the jumps, and the Monte Carlo MSE around
//! `theta_dagger = theta + [J]/T`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jump_thresh::estimate_jump_qv;
use crate::parallel::map_indexed;
use crate::quadrature::{integrate_piecewise, Tolerance};
use crate::sde_sim::{
    sample_path_with, simulate_path_given_jumps, window_jump_increments, DiffusionSpec, JumpRealization, JumpSpec,
    SamplePath,
};
use crate::seed::{derive_seed, rng_from_seed};
use crate::vol_posterior::{
    compute_kappa_with_floor, mle, modify_posterior, tempered_update, GibbsPosterior, InferenceSettings,
    InverseGammaParams, ModifiedPosterior, NormalApprox,
};

/// Tail cut, relative to the peak, that bounds the integration range.
pub const TAIL_CUT: f64 = 1e-12;

/// Tolerance on the unit mass each density must carry.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-6;

/// A unimodal density on the real line.
pub trait Density: Sync {
    fn pdf(&self, x: f64) -> f64;
    /// Interval outside which the density is below `TAIL_CUT` times its peak.
    fn support(&self) -> (f64, f64);
    fn mode(&self) -> f64;
}

impl Density for NormalApprox {
    fn pdf(&self, x: f64) -> f64 {
        NormalApprox::pdf(self, x)
    }

    fn support(&self) -> (f64, f64) {
        let k = (-2.0 * TAIL_CUT.ln()).sqrt();
        (self.mean - k * self.sd(), self.mean + k * self.sd())
    }

    fn mode(&self) -> f64 {
        self.mean
    }
}

impl Density for InverseGammaParams {
    fn pdf(&self, x: f64) -> f64 {
        InverseGammaParams::pdf(self, x)
    }

    fn support(&self) -> (f64, f64) {
        self.effective_support(TAIL_CUT)
    }

    fn mode(&self) -> f64 {
        InverseGammaParams::mode(self)
    }
}

impl Density for GibbsPosterior {
    fn pdf(&self, x: f64) -> f64 {
        self.ig.pdf(x)
    }

    fn support(&self) -> (f64, f64) {
        self.ig.effective_support(TAIL_CUT)
    }

    fn mode(&self) -> f64 {
        self.ig.mode()
    }
}

impl Density for ModifiedPosterior {
    fn pdf(&self, x: f64) -> f64 {
        ModifiedPosterior::pdf(self, x)
    }

    fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.base.ig.effective_support(TAIL_CUT);
        (lo - self.shift, hi - self.shift)
    }

    fn mode(&self) -> f64 {
        self.base.ig.mode() - self.shift
    }
}

/// Density given by a closure plus its effective support and mode.
pub struct FnDensity<F> {
    pub f: F,
    pub support: (f64, f64),
    pub mode: f64,
}

impl<F: Fn(f64) -> f64 + Sync> Density for FnDensity<F> {
    fn pdf(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn support(&self) -> (f64, f64) {
        self.support
    }

    fn mode(&self) -> f64 {
        self.mode
    }
}

const TV_TOLERANCE: Tolerance = Tolerance { abs: 1e-10, rel: 1e-10, max_intervals: 5000 };

fn breakpoints(points: &[f64]) -> Vec<f64> {
    let mut b: Vec<f64> = points.iter().copied().filter(|x| x.is_finite()).collect();
    b.sort_by(f64::total_cmp);
    b.dedup();
    b
}

fn mass_of(d: &dyn Density) -> Result<f64> {
    let (lo, hi) = d.support();
    if !(lo < hi) {
        return Err(Error::Contract(format!("density support [{lo}, {hi}] is empty")));
    }
    let mode = d.mode().clamp(lo, hi);
    Ok(integrate_piecewise(|x| d.pdf(x), &breakpoints(&[lo, mode, hi]), TV_TOLERANCE)?.value)
}

/// `(1/2) ∫ |f - g|` by adaptive quadrature over the union of the effective
/// supports, split at every support endpoint and mode.
pub fn tv_distance(a: &dyn Density, b: &dyn Density) -> Result<f64> {
    for (name, d) in [("first", a), ("second", b)] {
        let mass = mass_of(d)?;
        if (mass - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::Contract(format!("{name} density integrates to {mass}, not 1")));
        }
    }
    let (alo, ahi) = a.support();
    let (blo, bhi) = b.support();
    let breaks = breakpoints(&[alo, ahi, blo, bhi, a.mode().clamp(alo, ahi), b.mode().clamp(blo, bhi)]);
    let est = integrate_piecewise(|x| (a.pdf(x) - b.pdf(x)).abs(), &breaks, TV_TOLERANCE)?;
    Ok((0.5 * est.value).clamp(0.0, 1.0))
}

/// Ground-truth constants of one jump realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruthSummary {
    pub theta_star: f64,
    /// `theta_star + [J] / T`, where the untempered posterior concentrates.
    pub theta_dagger: f64,
    /// `(theta_star / theta_dagger)^2`.
    pub kappa_dagger: f64,
    pub jump_qv: f64,
    pub jump_count: usize,
}

impl TruthSummary {
    pub fn new(theta_star: f64, jump_qv: f64, jump_count: usize, horizon: f64) -> Self {
        let theta_dagger = theta_star + jump_qv / horizon;
        TruthSummary {
            theta_star,
            theta_dagger,
            kappa_dagger: (theta_star / theta_dagger).powi(2),
            jump_qv,
            jump_count,
        }
    }

    pub fn from_path(path: &SamplePath, theta_star: f64) -> Result<Self> {
        let truth = path
            .truth
            .as_ref()
            .ok_or_else(|| Error::Contract("path has no ground truth attached".into()))?;
        Ok(TruthSummary::new(theta_star, truth.jump_qv, truth.jump_windows.len(), path.horizon))
    }
}

/// Leading term `(2 theta_dagger^2 / n) (1 - ([J] / (T theta_dagger))^2)` of the
/// sandwich variance of `theta_hat` under the conditional law.
pub fn sandwich_variance(truth: &TruthSummary, horizon: f64, n: usize) -> f64 {
    let td = truth.theta_dagger;
    (2.0 * td * td / n as f64) * (1.0 - (truth.jump_qv / (horizon * td)).powi(2))
}

/// Leading term `2 theta_star theta_dagger / n` of the stated MSE expansion.
pub fn mse_leading_term(truth: &TruthSummary, n: usize) -> f64 {
    2.0 * truth.theta_star * truth.theta_dagger / n as f64
}

/// TV distances for one data set: tempered posterior against
/// `N(theta_hat, 2 kappa_dagger theta_dagger^2 / n)`, and the shifted posterior
/// against `N(theta_hat - J_hat/T, 2 theta_star^2 / n)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BvmPairing {
    pub tempered_tv: f64,
    pub modified_tv: f64,
}

/// Computes both pairings for a simulated path. `kappa_override` replaces the
/// data-driven temperature.
pub fn bvm_pairings(
    path: &SamplePath,
    theta_star: f64,
    settings: &InferenceSettings,
    kappa_override: Option<f64>,
) -> Result<BvmPairing> {
    let truth = TruthSummary::from_path(path, theta_star)?;
    let n = path.n;
    let eta = settings.threshold.threshold(&path.increments)?;
    let qv = estimate_jump_qv(&path.increments, eta)?;
    let theta_hat = mle(&path.increments, path.horizon);
    let kappa = match kappa_override {
        Some(k) => k,
        None => compute_kappa_with_floor(theta_hat, &qv, path.horizon, settings.kappa_floor)?,
    };
    let base = tempered_update(&settings.prior, n, theta_hat, kappa)?;
    let modified = modify_posterior(&base, &qv, path.horizon);

    let nf = n as f64;
    let tempered_limit = NormalApprox::new(theta_hat, 2.0 * truth.kappa_dagger * truth.theta_dagger.powi(2) / nf)?;
    let modified_limit = NormalApprox::new(theta_hat - modified.shift, 2.0 * theta_star * theta_star / nf)?;
    Ok(BvmPairing {
        tempered_tv: tv_distance(&base, &tempered_limit)?,
        modified_tv: tv_distance(&modified, &modified_limit)?,
    })
}

#[derive(Debug, Clone)]
pub struct BvmCheckConfig {
    pub diffusion: DiffusionSpec,
    pub jumps: JumpSpec,
    pub n_grid: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    pub settings: InferenceSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BvmRow {
    pub n: usize,
    pub reps_used: usize,
    pub degenerate: usize,
    pub tempered_tv_mean: f64,
    pub tempered_tv_stderr: f64,
    pub modified_tv_mean: f64,
    pub modified_tv_stderr: f64,
}

pub fn strictly_decreasing(values: impl IntoIterator<Item = f64>) -> bool {
    let v: Vec<f64> = values.into_iter().collect();
    v.windows(2).all(|w| w[1] < w[0])
}

pub(crate) fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / k;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Mean TV of both pairings at each `n`, with truth taken from the simulator.
pub fn bvm_convergence_check(cfg: &BvmCheckConfig, workers: Option<usize>) -> Result<Vec<BvmRow>> {
    cfg.diffusion.validate()?;
    cfg.jumps.validate()?;
    cfg.settings.validate()?;
    if cfg.n_grid.is_empty() || cfg.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("bvm n_grid must be nonempty and strictly increasing"));
    }
    if cfg.n_grid[0] < 4 {
        return Err(Error::config("bvm n_grid sample sizes must be >= 4"));
    }
    if cfg.reps < 100 {
        return Err(Error::config(format!("bvm check needs reps >= 100, got {}", cfg.reps)));
    }

    let mut rows = Vec::with_capacity(cfg.n_grid.len());
    for (cell, &n) in cfg.n_grid.iter().enumerate() {
        let outcomes = map_indexed(workers, cfg.reps, |rep| -> Result<Option<BvmPairing>> {
            let mut rng = rng_from_seed(derive_seed(cfg.seed, cell as u32, rep as u32));
            let path = sample_path_with(&cfg.diffusion, &cfg.jumps, n, &mut rng)?;
            match bvm_pairings(&path, cfg.diffusion.theta_star, &cfg.settings, None) {
                Ok(p) => Ok(Some(p)),
                Err(e) if e.is_degenerate() => Ok(None),
                Err(e) => Err(e),
            }
        })?;
        let mut tempered = Vec::with_capacity(cfg.reps);
        let mut modified = Vec::with_capacity(cfg.reps);
        let mut degenerate = 0;
        for o in outcomes {
            match o? {
                Some(p) => {
                    tempered.push(p.tempered_tv);
                    modified.push(p.modified_tv);
                }
                None => degenerate += 1,
            }
        }
        let (tm, ts) = mean_and_stderr(&tempered);
        let (mm, ms) = mean_and_stderr(&modified);
        rows.push(BvmRow {
            n,
            reps_used: tempered.len(),
            degenerate,
            tempered_tv_mean: tm,
            tempered_tv_stderr: ts,
            modified_tv_mean: mm,
            modified_tv_stderr: ms,
        });
    }
    Ok(rows)
}

/// Monte Carlo moments of `theta_hat` with the jumps held fixed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalMoments {
    pub n: usize,
    pub reps: usize,
    pub truth: TruthSummary,
    pub mean_theta_hat: f64,
    /// Mean of `(theta_hat - theta_dagger)^2`.
    pub empirical_mse: f64,
    pub mse_stderr: f64,
    /// Sample variance of `theta_hat`.
    pub empirical_variance: f64,
    pub variance_stderr: f64,
    pub sandwich: f64,
    pub mse_formula: f64,
}

impl ConditionalMoments {
    /// `(empirical - reference) / reference` for the MSE against the sandwich value.
    pub fn mse_vs_sandwich(&self) -> f64 {
        (self.empirical_mse - self.sandwich) / self.sandwich
    }

    pub fn mse_vs_formula(&self) -> f64 {
        (self.empirical_mse - self.mse_formula) / self.mse_formula
    }

    pub fn variance_vs_sandwich(&self) -> f64 {
        (self.empirical_variance - self.sandwich) / self.sandwich
    }
}

/// Re-draws only the Brownian part against one fixed jump realization.
pub fn mse_oracle(
    diff: &DiffusionSpec,
    fixed_jumps: &JumpRealization,
    n: usize,
    reps: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<ConditionalMoments> {
    diff.validate()?;
    fixed_jumps.validate(diff.horizon)?;
    if reps < 1000 {
        return Err(Error::config(format!("mse oracle needs reps >= 1000, got {reps}")));
    }
    if n < 2 {
        return Err(Error::config(format!("need n >= 2 observations, got {n}")));
    }
    let mu = window_jump_increments(fixed_jumps, diff.horizon, n);
    let jump_qv: f64 = mu.iter().map(|m| m * m).sum();
    let jump_count = mu.iter().filter(|m| **m != 0.0).count();
    let truth = TruthSummary::new(diff.theta_star, jump_qv, jump_count, diff.horizon);

    let estimates = map_indexed(workers, reps, |rep| -> Result<f64> {
        let mut rng = rng_from_seed(derive_seed(seed, 0, rep as u32));
        let path = simulate_path_given_jumps(diff, fixed_jumps, n, &mut rng)?;
        Ok(mle(&path.increments, path.horizon))
    })?
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let r = reps as f64;
    let sq_dev: Vec<f64> = estimates.iter().map(|t| (t - truth.theta_dagger).powi(2)).collect();
    let (empirical_mse, mse_stderr) = mean_and_stderr(&sq_dev);

    let mean = estimates.iter().sum::<f64>() / r;
    let centered: Vec<f64> = estimates.iter().map(|t| (t - mean).powi(2)).collect();
    let empirical_variance = centered.iter().sum::<f64>() / (r - 1.0);
    let m4 = centered.iter().map(|c| c * c).sum::<f64>() / r;
    let variance_stderr = ((m4 - empirical_variance.powi(2)).max(0.0) / r).sqrt();

    Ok(ConditionalMoments {
        n,
        reps,
        truth,
        mean_theta_hat: mean,
        empirical_mse,
        mse_stderr,
        empirical_variance,
        variance_stderr,
        sandwich: sandwich_variance(&truth, diff.horizon, n),
        mse_formula: mse_leading_term(&truth, n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde_sim::simulate_path;
    use crate::seed::rng_from_seed;
    use rand::Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn std_normal(mean: f64, sd: f64) -> NormalApprox {
        NormalApprox::new(mean, sd * sd).unwrap()
    }

    #[test]
    fn tv_of_identical_densities_is_zero() {
        let f = std_normal(3.0, 0.7);
        assert!(tv_distance(&f, &f).unwrap() < 1e-12);
        let ig = InverseGammaParams::new(40.0, 100.0).unwrap();
        assert!(tv_distance(&ig, &ig).unwrap() < 1e-12);
    }

    #[test]
    fn tv_of_disjoint_supports_is_one() {
        let u0 = FnDensity { f: |x: f64| if (0.0..=1.0).contains(&x) { 1.0 } else { 0.0 }, support: (0.0, 1.0), mode: 0.5 };
        let u1 = FnDensity { f: |x: f64| if (5.0..=7.0).contains(&x) { 0.5 } else { 0.0 }, support: (5.0, 7.0), mode: 6.0 };
        assert!((tv_distance(&u0, &u1).unwrap() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn tv_of_unit_shifted_normals() {
        // closed form for equal variances: 2 Phi(delta / 2) - 1
        let expected = 2.0 * Normal::new(0.0, 1.0).unwrap().cdf(0.5) - 1.0;
        let tv = tv_distance(&std_normal(0.0, 1.0), &std_normal(1.0, 1.0)).unwrap();
        assert!((tv - expected).abs() < 1e-4);
        assert!((tv - 0.38292).abs() < 1e-4);
    }

    #[test]
    fn tv_is_symmetric_and_bounded() {
        let a = InverseGammaParams::new(12.0, 30.0).unwrap();
        let b = std_normal(2.7, 0.8);
        let ab = tv_distance(&a, &b).unwrap();
        let ba = tv_distance(&b, &a).unwrap();
        assert!((ab - ba).abs() < 1e-9);
        assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn tv_shift_invariance() {
        let base = tempered_update(&InverseGammaParams::default(), 300, 10.0, 0.5).unwrap();
        let normal = std_normal(10.0, 0.6);
        let d0 = tv_distance(&base, &normal).unwrap();
        let mut rng = rng_from_seed(5);
        for _ in 0..5 {
            let c: f64 = rng.random_range(0.0..20.0);
            let shifted = ModifiedPosterior { base, shift: c };
            let d = tv_distance(&shifted, &std_normal(10.0 - c, 0.6)).unwrap();
            assert!((d - d0).abs() < 1e-6, "{d} vs {d0}");
        }
    }

    #[test]
    fn unnormalized_input_is_rejected() {
        let half = FnDensity { f: |x: f64| if (0.0..=1.0).contains(&x) { 0.5 } else { 0.0 }, support: (0.0, 1.0), mode: 0.5 };
        assert!(matches!(tv_distance(&half, &std_normal(0.0, 1.0)), Err(Error::Contract(_))));
    }

    #[test]
    fn sandwich_values() {
        let none = TruthSummary::new(10.0, 0.0, 0, 1.0);
        assert_eq!(sandwich_variance(&none, 1.0, 5000), 2.0 * 100.0 / 5000.0);
        let t = TruthSummary::new(10.0, 45.0, 5, 1.0);
        assert!((sandwich_variance(&t, 1.0, 5000) - 0.4).abs() < 1e-12);
        assert_eq!(t.theta_dagger, 55.0);
        assert!((t.kappa_dagger - (10.0f64 / 55.0).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn pairings_agree_when_temperature_is_exact() {
        let diff = DiffusionSpec::default();
        let path = simulate_path(&diff, &JumpSpec::default(), 5000, 17).unwrap();
        let truth = TruthSummary::from_path(&path, diff.theta_star).unwrap();
        let p = bvm_pairings(&path, diff.theta_star, &InferenceSettings::default(), Some(truth.kappa_dagger)).unwrap();
        assert!((p.tempered_tv - p.modified_tv).abs() < 1e-6, "{p:?}");
    }

    #[test]
    fn no_jump_mse_matches_chi_square_variance() {
        let diff = DiffusionSpec::new(0.0, 10.0, 1.0).unwrap();
        let m = mse_oracle(&diff, &JumpRealization::empty(), 2000, 2000, 8, None).unwrap();
        let target = 2.0 * 100.0 / 2000.0;
        assert!((m.empirical_mse - target).abs() < 0.1 * target, "{m:?}");
    }

    #[test]
    fn mse_halves_when_n_doubles() {
        let diff = DiffusionSpec::default();
        let jumps = JumpRealization::new(vec![0.37], vec![3.0], 1.0).unwrap();
        let a = mse_oracle(&diff, &jumps, 2500, 4000, 21, None).unwrap();
        let b = mse_oracle(&diff, &jumps, 5000, 4000, 22, None).unwrap();
        let ratio = b.empirical_mse / a.empirical_mse;
        assert!((ratio - 0.5).abs() < 0.15 * 0.5, "ratio {ratio}");
    }

    #[test]
    fn single_jump_mse_report() {
        let diff = DiffusionSpec::default();
        let jumps = JumpRealization::new(vec![0.5], vec![3.0], 1.0).unwrap();
        let m = mse_oracle(&diff, &jumps, 5000, 4000, 3, None).unwrap();
        assert_eq!(m.truth.jump_qv, 9.0);
        assert!(m.mse_vs_sandwich().is_finite() && m.mse_vs_formula().is_finite());
        // the conditional variance of a scaled noncentral chi-square is the sandwich value
        assert!(m.variance_vs_sandwich().abs() < 0.1, "{m:?}");
    }

    #[test]
    fn preconditions() {
        let cfg = BvmCheckConfig {
            diffusion: DiffusionSpec::default(),
            jumps: JumpSpec::default(),
            n_grid: vec![1000, 500],
            reps: 100,
            seed: 1,
            settings: InferenceSettings::default(),
        };
        assert!(bvm_convergence_check(&cfg, None).is_err());
        let cfg = BvmCheckConfig { n_grid: vec![500, 1000], reps: 10, ..cfg };
        assert!(bvm_convergence_check(&cfg, None).is_err());
        assert!(mse_oracle(&DiffusionSpec::default(), &JumpRealization::empty(), 100, 10, 0, None).is_err());
    }

    #[test]
    fn well_specified_bvm_benchmark() {
        let cfg = BvmCheckConfig {
            diffusion: DiffusionSpec::default(),
            jumps: JumpSpec::none(),
            n_grid: vec![5000],
            reps: 100,
            seed: 77,
            settings: InferenceSettings::default(),
        };
        let rows = bvm_convergence_check(&cfg, None).unwrap();
        assert!(rows[0].modified_tv_mean < 0.05, "{rows:?}");
    }
}
