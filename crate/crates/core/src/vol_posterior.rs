//! Tempered posterior for the volatility under the jump-free working model.
//!
//! The working model treats `D_i` as iid `N(0, theta * delta)`, so
//! `L(theta) ∝ theta^{-n/2} exp(-n * theta_hat / (2 theta))` with
//! `theta_hat = sum(D_i^2) / T`. Raising it to `1/kappa` keeps an inverse-gamma
//! prior conjugate:
//!
//! ```text
//! shape' = a + n / (2 kappa)
//! rate'  = b + n * theta_hat / (2 kappa)
//! ```
//!
//! The corrected posterior takes `kappa = (1 - J_hat / (T theta_hat))^2` and
//! shifts the result left by `J_hat / T`. Its normal limit is
//! `N(theta_hat - J_hat/T, 2 theta^2 / n)`; the unknown `theta` is replaced by
//! the center itself.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{checked_gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::jump_thresh::{estimate_jump_qv, QvEstimate, ThresholdRule};
use crate::sde_sim::SamplePath;

/// Temperatures below this are reported as degenerate inference.
pub const DEFAULT_KAPPA_FLOOR: f64 = 1e-6;

/// Residual allowed on `F(q) = p` after quantile bisection.
pub const QUANTILE_TOLERANCE: f64 = 1e-9;

/// Inverse-gamma law with density `∝ theta^{-shape-1} exp(-rate/theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseGammaParams {
    pub shape: f64,
    pub rate: f64,
}

impl Default for InverseGammaParams {
    fn default() -> Self {
        InverseGammaParams { shape: 1.0, rate: 1.0 }
    }
}

impl InverseGammaParams {
    pub fn new(shape: f64, rate: f64) -> Result<Self> {
        let p = InverseGammaParams { shape, rate };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if !ok(self.shape) || !ok(self.rate) {
            return Err(Error::config(format!(
                "inverse-gamma parameters must be positive and finite, got shape {} rate {}",
                self.shape, self.rate
            )));
        }
        Ok(())
    }

    pub fn ln_pdf(&self, theta: f64) -> f64 {
        if theta <= 0.0 || !theta.is_finite() {
            return f64::NEG_INFINITY;
        }
        self.shape * self.rate.ln() - ln_gamma(self.shape) - (self.shape + 1.0) * theta.ln() - self.rate / theta
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        self.ln_pdf(theta).exp()
    }

    /// `P(Theta <= theta) = Q(shape, rate / theta)`.
    pub fn cdf(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        if theta == f64::INFINITY {
            return 1.0;
        }
        checked_gamma_ur(self.shape, self.rate / theta).unwrap_or(if theta > self.mode() { 1.0 } else { 0.0 })
    }

    pub fn mode(&self) -> f64 {
        self.rate / (self.shape + 1.0)
    }

    /// `None` when `shape <= 1`.
    pub fn mean(&self) -> Option<f64> {
        (self.shape > 1.0).then(|| self.rate / (self.shape - 1.0))
    }

    /// `None` when `shape <= 2`.
    pub fn variance(&self) -> Option<f64> {
        (self.shape > 2.0).then(|| self.rate.powi(2) / ((self.shape - 1.0).powi(2) * (self.shape - 2.0)))
    }

    /// Solves `cdf(q) = p` by bisection on the regularized incomplete gamma.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Contract(format!("quantile level must be in (0,1), got {p}")));
        }
        let mut lo = self.mode();
        let mut hi = self.mode();
        let mut expansions = 0;
        while self.cdf(lo) > p {
            lo *= 0.5;
            expansions += 1;
            if expansions > 2100 || lo == 0.0 {
                return Err(self.quantile_failure(p, lo, hi, "lower bracket underflow"));
            }
        }
        while self.cdf(hi) < p {
            hi *= 2.0;
            expansions += 1;
            if expansions > 2100 || !hi.is_finite() {
                return Err(self.quantile_failure(p, lo, hi, "upper bracket overflow"));
            }
        }
        for _ in 0..2200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let q = 0.5 * (lo + hi);
        // a cdf steeper than the float grid cannot meet the residual; a bracket
        // of neighbouring floats that straddles p is then the exact answer
        let collapsed = q <= lo || q >= hi || hi - lo <= 4.0 * f64::EPSILON * hi;
        let straddles = self.cdf(lo) <= p && self.cdf(hi) >= p;
        if (self.cdf(q) - p).abs() > QUANTILE_TOLERANCE && !(collapsed && straddles) {
            return Err(self.quantile_failure(p, lo, hi, "residual above tolerance"));
        }
        Ok(q)
    }

    fn quantile_failure(&self, p: f64, lo: f64, hi: f64, why: &str) -> Error {
        Error::Numeric {
            routine: "inverse_gamma_quantile",
            detail: format!(
                "{why}: shape {}, rate {}, p {p}, bracket [{lo:e}, {hi:e}], F(lo) {:e}, F(hi) {:e}",
                self.shape,
                self.rate,
                self.cdf(lo),
                self.cdf(hi)
            ),
        }
    }

    /// Interval outside which the density stays below `rel` times its peak.
    pub fn effective_support(&self, rel: f64) -> (f64, f64) {
        let mode = self.mode();
        let cut = self.ln_pdf(mode) + rel.ln();
        let below = |x: f64| self.ln_pdf(x) < cut;
        let mut left_out = mode * 0.5;
        while !below(left_out) && left_out > f64::MIN_POSITIVE {
            left_out *= 0.5;
        }
        let mut right_out = mode * 2.0;
        while !below(right_out) && right_out.is_finite() {
            right_out *= 2.0;
        }
        let crossing = |mut inside: f64, mut outside: f64| {
            for _ in 0..200 {
                let mid = 0.5 * (inside + outside);
                if mid == inside || mid == outside {
                    break;
                }
                if below(mid) {
                    outside = mid;
                } else {
                    inside = mid;
                }
            }
            outside
        };
        (crossing(mode, left_out), crossing(mode, right_out))
    }
}

pub fn mle(increments: &[f64], horizon: f64) -> f64 {
    increments.iter().map(|d| d * d).sum::<f64>() / horizon
}

/// `theta_hat = T^{-1} sum D_i^2`.
pub fn compute_mle(path: &SamplePath) -> f64 {
    mle(&path.increments, path.horizon)
}

pub fn compute_kappa(theta_hat: f64, qv: &QvEstimate, horizon: f64) -> Result<f64> {
    compute_kappa_with_floor(theta_hat, qv, horizon, DEFAULT_KAPPA_FLOOR)
}

/// `kappa = (1 - J_hat / (T theta_hat))^2`.
pub fn compute_kappa_with_floor(theta_hat: f64, qv: &QvEstimate, horizon: f64, floor: f64) -> Result<f64> {
    if !(theta_hat > 0.0) {
        return Err(Error::DegenerateData(format!("theta_hat = {theta_hat}; all increments are zero")));
    }
    let ratio = (qv.jump_qv_hat / (horizon * theta_hat)).min(1.0);
    let kappa = (1.0 - ratio).powi(2);
    if kappa < floor {
        return Err(Error::DegenerateInference(format!(
            "temperature {kappa:e} below floor {floor:e}: flagged jumps account for {:.6} of the realized variance",
            ratio
        )));
    }
    Ok(kappa)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GibbsPosterior {
    pub ig: InverseGammaParams,
    pub kappa: f64,
    pub n: usize,
    pub theta_hat: f64,
}

impl GibbsPosterior {
    pub fn mean(&self) -> Option<f64> {
        self.ig.mean()
    }

    pub fn variance(&self) -> Option<f64> {
        self.ig.variance()
    }
}

/// Conjugate update for any positive temperature. `kappa -> inf` returns
/// the prior; `kappa = 1` is the ordinary posterior.
pub fn tempered_update(prior: &InverseGammaParams, n: usize, theta_hat: f64, kappa: f64) -> Result<GibbsPosterior> {
    prior.validate()?;
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::DegenerateInference(format!("temperature must be positive and finite, got {kappa}")));
    }
    if !(theta_hat >= 0.0 && theta_hat.is_finite()) {
        return Err(Error::Contract(format!("theta_hat must be finite and >= 0, got {theta_hat}")));
    }
    let half = n as f64 / (2.0 * kappa);
    Ok(GibbsPosterior {
        ig: InverseGammaParams { shape: prior.shape + half, rate: prior.rate + half * theta_hat },
        kappa,
        n,
        theta_hat,
    })
}

/// Tempered posterior `∝ L(theta)^{1/kappa} pi(theta)` for `kappa` in `[floor, 1]`.
pub fn gibbs_update(prior: &InverseGammaParams, path: &SamplePath, kappa: f64) -> Result<GibbsPosterior> {
    if !(DEFAULT_KAPPA_FLOOR..=1.0).contains(&kappa) {
        return Err(Error::DegenerateInference(format!(
            "temperature {kappa} outside [{DEFAULT_KAPPA_FLOOR}, 1]"
        )));
    }
    tempered_update(prior, path.n, compute_mle(path), kappa)
}

/// Law of `theta - shift` for `theta` drawn from the tempered posterior.
/// Support is `(-shift, inf)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModifiedPosterior {
    pub base: GibbsPosterior,
    pub shift: f64,
}

impl ModifiedPosterior {
    pub fn pdf(&self, theta: f64) -> f64 {
        self.base.ig.pdf(theta + self.shift)
    }

    pub fn cdf(&self, theta: f64) -> f64 {
        self.base.ig.cdf(theta + self.shift)
    }

    pub fn quantile(&self, p: f64) -> Result<f64> {
        Ok(self.base.ig.quantile(p)? - self.shift)
    }

    pub fn mean(&self) -> Option<f64> {
        self.base.mean().map(|m| m - self.shift)
    }

    pub fn variance(&self) -> Option<f64> {
        self.base.variance()
    }

    /// Mass the shifted law puts on `theta <= 0`.
    pub fn nonpositive_mass(&self) -> f64 {
        self.cdf(0.0)
    }

    /// Density after clipping to `theta > 0` and renormalizing.
    pub fn truncated_pdf(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return 0.0;
        }
        self.pdf(theta) / (1.0 - self.nonpositive_mass())
    }
}

pub fn modify_posterior(post: &GibbsPosterior, qv: &QvEstimate, horizon: f64) -> ModifiedPosterior {
    ModifiedPosterior { base: *post, shift: qv.jump_qv_hat / horizon }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CredibleInterval {
    pub level: f64,
    pub lo: f64,
    pub hi: f64,
}

impl CredibleInterval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.lo <= theta && theta <= self.hi
    }
}

fn check_level(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!("credible level must be in (0,1), got {level}")));
    }
    Ok(1.0 - level)
}

/// Equal-tailed interval of the shifted posterior.
pub fn credible_interval(post: &ModifiedPosterior, level: f64) -> Result<CredibleInterval> {
    let alpha = check_level(level)?;
    let lo = post.quantile(alpha / 2.0)?;
    let hi = post.quantile(1.0 - alpha / 2.0)?;
    Ok(CredibleInterval { level, lo, hi })
}

/// Equal-tailed interval of the shifted posterior restricted to `theta > 0`.
pub fn credible_interval_truncated(post: &ModifiedPosterior, level: f64) -> Result<CredibleInterval> {
    let alpha = check_level(level)?;
    let f0 = post.nonpositive_mass();
    if f0 >= 1.0 {
        return Err(Error::DegenerateInference("shifted posterior has no mass on theta > 0".into()));
    }
    let lo = post.base.ig.quantile(f0 + (1.0 - f0) * alpha / 2.0)? - post.shift;
    let hi = post.base.ig.quantile(f0 + (1.0 - f0) * (1.0 - alpha / 2.0))? - post.shift;
    Ok(CredibleInterval { level, lo: lo.max(0.0), hi })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalApprox {
    pub mean: f64,
    pub variance: f64,
}

impl NormalApprox {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !(variance > 0.0 && variance.is_finite() && mean.is_finite()) {
            return Err(Error::Contract(format!("normal needs finite mean and positive variance, got ({mean}, {variance})")));
        }
        Ok(NormalApprox { mean, variance })
    }

    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sd();
        (-0.5 * z * z).exp() / (self.sd() * (2.0 * std::f64::consts::PI).sqrt())
    }
}

/// Plug-in normal limit `N(c, 2 c^2 / n)` with `c = theta_hat - J_hat / T`.
pub fn bvm_normal(theta_hat: f64, qv: &QvEstimate, horizon: f64, n: usize) -> Result<NormalApprox> {
    let center = theta_hat - qv.jump_qv_hat / horizon;
    if !(center > 0.0) {
        return Err(Error::DegenerateInference(format!("nonpositive corrected center {center}")));
    }
    NormalApprox::new(center, 2.0 * center * center / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceSettings {
    pub prior: InverseGammaParams,
    pub threshold: ThresholdRule,
    pub level: f64,
    pub kappa_floor: f64,
    /// Clip the interval to `theta > 0` (renormalizing the shifted posterior).
    pub truncate_positive: bool,
}

impl Default for InferenceSettings {
    fn default() -> Self {
        InferenceSettings {
            prior: InverseGammaParams::default(),
            threshold: ThresholdRule::default(),
            level: 0.95,
            kappa_floor: DEFAULT_KAPPA_FLOOR,
            truncate_positive: false,
        }
    }
}

impl InferenceSettings {
    pub fn validate(&self) -> Result<()> {
        self.prior.validate()?;
        self.threshold.validate()?;
        check_level(self.level)?;
        if !(self.kappa_floor > 0.0 && self.kappa_floor < 1.0) {
            return Err(Error::config(format!("kappa_floor must be in (0,1), got {}", self.kappa_floor)));
        }
        Ok(())
    }
}

/// Everything the corrected posterior pipeline produces for one data set.
#[derive(Debug, Clone, PartialEq)]
pub struct Inference {
    pub n: usize,
    pub horizon: f64,
    pub theta_hat: f64,
    pub qv: QvEstimate,
    pub kappa: f64,
    pub posterior: ModifiedPosterior,
    pub interval: CredibleInterval,
    pub bvm: NormalApprox,
}

/// threshold -> J_hat -> kappa -> tempered update -> shift -> interval.
pub fn infer(increments: &[f64], horizon: f64, settings: &InferenceSettings) -> Result<Inference> {
    settings.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::config(format!("horizon must be positive, got {horizon}")));
    }
    let n = increments.len();
    let eta = settings.threshold.threshold(increments)?;
    let qv = estimate_jump_qv(increments, eta)?;
    let theta_hat = mle(increments, horizon);
    let kappa = compute_kappa_with_floor(theta_hat, &qv, horizon, settings.kappa_floor)?;
    let base = tempered_update(&settings.prior, n, theta_hat, kappa)?;
    let posterior = modify_posterior(&base, &qv, horizon);
    let interval = if settings.truncate_positive {
        credible_interval_truncated(&posterior, settings.level)?
    } else {
        credible_interval(&posterior, settings.level)?
    };
    let bvm = bvm_normal(theta_hat, &qv, horizon, n)?;
    Ok(Inference { n, horizon, theta_hat, qv, kappa, posterior, interval, bvm })
}
