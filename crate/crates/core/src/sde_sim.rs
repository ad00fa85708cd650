//! Discretely observed jump-diffusion paths
//! `X_t = beta*t + sqrt(theta)*W_t + J_t` with compound Poisson jumps.
//!
//! Jump times are simulated exactly and then binned into the observation
//! windows `[t_{i-1}, t_i)`. A window may receive several jumps; its jump
//! increment is their sum.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{rng_from_seed, SimRng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffusionSpec {
    pub beta: f64,
    pub theta_star: f64,
    pub horizon: f64,
}

impl DiffusionSpec {
    pub fn new(beta: f64, theta_star: f64, horizon: f64) -> Result<Self> {
        let spec = DiffusionSpec { beta, theta_star, horizon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() {
            return Err(Error::config(format!("drift must be finite, got {}", self.beta)));
        }
        if !(self.theta_star > 0.0 && self.theta_star.is_finite()) {
            return Err(Error::config(format!("theta_star must be positive, got {}", self.theta_star)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config(format!("horizon must be positive, got {}", self.horizon)));
        }
        Ok(())
    }
}

impl Default for DiffusionSpec {
    /// beta = 1, theta = 10 on [0, 1].
    fn default() -> Self {
        DiffusionSpec { beta: 1.0, theta_star: 10.0, horizon: 1.0 }
    }
}

/// Distribution of an individual jump size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SizeLaw {
    /// Uniform on `{-tau, +tau}`.
    TwoPoint { tau: f64 },
    Fixed { value: f64 },
    /// `(value, probability)` pairs.
    FiniteTable { entries: Vec<(f64, f64)> },
}

impl SizeLaw {
    pub fn validate(&self) -> Result<()> {
        match self {
            SizeLaw::TwoPoint { tau } => {
                if !(*tau > 0.0 && tau.is_finite()) {
                    return Err(Error::config(format!("two_point requires tau > 0, got {tau}")));
                }
            }
            SizeLaw::Fixed { value } => {
                if *value == 0.0 || !value.is_finite() {
                    return Err(Error::config(format!("fixed jump size must be finite and nonzero, got {value}")));
                }
            }
            SizeLaw::FiniteTable { entries } => {
                if entries.is_empty() {
                    return Err(Error::config("finite_table needs at least one entry"));
                }
                let mut total = 0.0;
                for &(v, p) in entries {
                    if v == 0.0 || !v.is_finite() {
                        return Err(Error::config(format!("finite_table value must be finite and nonzero, got {v}")));
                    }
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::config(format!("finite_table probability out of [0,1]: {p}")));
                    }
                    total += p;
                }
                if (total - 1.0).abs() > 1e-12 {
                    return Err(Error::config(format!("finite_table probabilities sum to {total}, not 1")));
                }
            }
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            SizeLaw::TwoPoint { tau } => {
                if rng.random_bool(0.5) {
                    *tau
                } else {
                    -*tau
                }
            }
            SizeLaw::Fixed { value } => *value,
            SizeLaw::FiniteTable { entries } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(v, p) in entries {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                // u landed in the rounding slack above the cumulative sum
                entries.iter().rev().find(|e| e.1 > 0.0).map_or(entries[0].0, |e| e.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    pub rate: f64,
    pub size_law: SizeLaw,
}

impl JumpSpec {
    pub fn two_point(rate: f64, tau: f64) -> Self {
        JumpSpec { rate, size_law: SizeLaw::TwoPoint { tau } }
    }

    pub fn none() -> Self {
        JumpSpec::two_point(0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(Error::config(format!("jump rate must be >= 0, got {}", self.rate)));
        }
        self.size_law.validate()
    }
}

impl Default for JumpSpec {
    /// Five jumps per unit time, sizes uniform on {-3, +3}.
    fn default() -> Self {
        JumpSpec::two_point(5.0, 3.0)
    }
}

/// One realization of the jump process on `(0, horizon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpRealization {
    pub times: Vec<f64>,
    pub sizes: Vec<f64>,
}

impl JumpRealization {
    pub fn new(times: Vec<f64>, sizes: Vec<f64>, horizon: f64) -> Result<Self> {
        let r = JumpRealization { times, sizes };
        r.validate(horizon)?;
        Ok(r)
    }

    pub fn empty() -> Self {
        JumpRealization { times: Vec::new(), sizes: Vec::new() }
    }

    pub fn validate(&self, horizon: f64) -> Result<()> {
        if self.times.len() != self.sizes.len() {
            return Err(Error::config("jump times and sizes differ in length"));
        }
        if self.times.iter().any(|&t| !(t > 0.0 && t < horizon)) {
            return Err(Error::config(format!("jump times must lie in (0, {horizon})")));
        }
        if self.times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("jump times must be strictly increasing"));
        }
        if self.sizes.iter().any(|&s| s == 0.0 || !s.is_finite()) {
            return Err(Error::config("jump sizes must be finite and nonzero"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Hidden ground truth carried alongside a simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTruth {
    /// Per-window jump increments `J_{t_i} - J_{t_{i-1}}`.
    pub mu: Vec<f64>,
    /// Sum of `mu_i^2`.
    pub jump_qv: f64,
    /// Windows with `mu_i != 0` (0-based).
    pub jump_windows: Vec<usize>,
    pub jumps: JumpRealization,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub n: usize,
    pub delta: f64,
    pub horizon: f64,
    pub increments: Vec<f64>,
    pub truth: Option<PathTruth>,
}

impl SamplePath {
    /// Wraps externally observed increments on an equally spaced grid.
    pub fn from_increments(increments: Vec<f64>, horizon: f64) -> Result<Self> {
        if increments.is_empty() {
            return Err(Error::InsufficientData { needed: 1, got: 0 });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::config(format!("horizon must be positive, got {horizon}")));
        }
        if let Some(bad) = increments.iter().find(|d| !d.is_finite()) {
            return Err(Error::config(format!("non-finite increment {bad}")));
        }
        let n = increments.len();
        Ok(SamplePath { n, delta: horizon / n as f64, horizon, increments, truth: None })
    }

    /// Observation times `t_1, ..., t_n`.
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (1..=self.n).map(move |i| i as f64 * self.delta)
    }

    pub fn without_truth(mut self) -> Self {
        self.truth = None;
        self
    }
}

pub(crate) fn sample_jumps<R: Rng + ?Sized>(spec: &JumpSpec, horizon: f64, rng: &mut R) -> JumpRealization {
    let mean = spec.rate * horizon;
    let count = if mean > 0.0 {
        Poisson::new(mean).expect("positive finite Poisson mean").sample(rng) as usize
    } else {
        0
    };
    if count == 0 {
        return JumpRealization::empty();
    }
    let mut times: Vec<f64> = loop {
        let mut t: Vec<f64> = (0..count)
            .map(|_| loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break u * horizon;
                }
            })
            .collect();
        t.sort_by(f64::total_cmp);
        if t.windows(2).all(|w| w[0] < w[1]) {
            break t;
        }
    };
    times.shrink_to_fit();
    let sizes = (0..count).map(|_| spec.size_law.sample(rng)).collect();
    JumpRealization { times, sizes }
}

pub fn simulate_jumps(spec: &JumpSpec, horizon: f64, seed: u64) -> Result<JumpRealization> {
    spec.validate()?;
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::config(format!("horizon must be positive, got {horizon}")));
    }
    Ok(sample_jumps(spec, horizon, &mut rng_from_seed(seed)))
}

/// Bins jump sizes into the `n` windows `[t_{i-1}, t_i)` of `[0, horizon]`.
pub fn window_jump_increments(jumps: &JumpRealization, horizon: f64, n: usize) -> Vec<f64> {
    let delta = horizon / n as f64;
    let mut mu = vec![0.0; n];
    for (&t, &size) in jumps.times.iter().zip(&jumps.sizes) {
        let window = ((t / delta) as usize).min(n - 1);
        mu[window] += size;
    }
    mu
}

/// Draws the Brownian part on top of a given jump realization. Repeated calls
/// with one realization sample the law conditional on the jumps.
pub fn simulate_path_given_jumps<R: Rng + ?Sized>(
    diff: &DiffusionSpec,
    jumps: &JumpRealization,
    n: usize,
    rng: &mut R,
) -> Result<SamplePath> {
    diff.validate()?;
    if n < 2 {
        return Err(Error::config(format!("need n >= 2 observations, got {n}")));
    }
    jumps.validate(diff.horizon)?;

    let delta = diff.horizon / n as f64;
    let mu = window_jump_increments(jumps, diff.horizon, n);

    let drift = diff.beta * delta;
    let scale = (diff.theta_star * delta).sqrt();
    let increments: Vec<f64> = mu
        .iter()
        .map(|&m| {
            let z: f64 = StandardNormal.sample(rng);
            drift + scale * z + m
        })
        .collect();

    let jump_windows: Vec<usize> = mu.iter().enumerate().filter(|(_, m)| **m != 0.0).map(|(i, _)| i).collect();
    let jump_qv = mu.iter().map(|m| m * m).sum();
    Ok(SamplePath {
        n,
        delta,
        horizon: diff.horizon,
        increments,
        truth: Some(PathTruth { mu, jump_qv, jump_windows, jumps: jumps.clone() }),
    })
}

pub(crate) fn sample_path_with(
    diff: &DiffusionSpec,
    jumps: &JumpSpec,
    n: usize,
    rng: &mut SimRng,
) -> Result<SamplePath> {
    let realization = sample_jumps(jumps, diff.horizon, rng);
    simulate_path_given_jumps(diff, &realization, n, rng)
}

pub fn simulate_path(diff: &DiffusionSpec, jumps: &JumpSpec, n: usize, seed: u64) -> Result<SamplePath> {
    diff.validate()?;
    jumps.validate()?;
    if n < 2 {
        return Err(Error::config(format!("need n >= 2 observations, got {n}")));
    }
    sample_path_with(diff, jumps, n, &mut rng_from_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_gives_no_jumps() {
        let r = simulate_jumps(&JumpSpec::two_point(0.0, 3.0), 7.0, 1).unwrap();
        assert!(r.is_empty());
    }

    #[test]
    fn two_point_sizes_and_times() {
        let spec = JumpSpec::default();
        for seed in 0..50 {
            let r = simulate_jumps(&spec, 1.0, seed).unwrap();
            assert!(r.sizes.iter().all(|s| s.abs() == 3.0));
            r.validate(1.0).unwrap();
        }
    }

    #[test]
    fn poisson_count_mean() {
        let spec = JumpSpec::default();
        let reps = 10_000;
        let (mut count, mut abs_size) = (0usize, 0.0);
        for seed in 0..reps {
            let r = simulate_jumps(&spec, 1.0, seed).unwrap();
            count += r.len();
            abs_size += r.sizes.iter().map(|s| s.abs()).sum::<f64>();
        }
        let mean = count as f64 / reps as f64;
        assert!((mean - 5.0).abs() < 0.1, "mean count {mean}");
        assert_eq!(abs_size / count as f64, 3.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(matches!(simulate_jumps(&JumpSpec::two_point(-1.0, 3.0), 1.0, 0), Err(Error::Config(_))));
        assert!(matches!(simulate_jumps(&JumpSpec::two_point(1.0, 0.0), 1.0, 0), Err(Error::Config(_))));
        let bad_table = JumpSpec { rate: 1.0, size_law: SizeLaw::FiniteTable { entries: vec![(1.0, 0.5), (2.0, 0.4)] } };
        assert!(bad_table.validate().is_err());
        assert!(matches!(
            simulate_path(&DiffusionSpec::default(), &JumpSpec::default(), 1, 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn finite_table_only_draws_listed_values() {
        let spec = JumpSpec { rate: 20.0, size_law: SizeLaw::FiniteTable { entries: vec![(-1.0, 0.25), (2.0, 0.75)] } };
        let r = simulate_jumps(&spec, 1.0, 4).unwrap();
        assert!(!r.is_empty());
        assert!(r.sizes.iter().all(|&s| s == -1.0 || s == 2.0));
    }

    #[test]
    fn drift_dominates_with_tiny_volatility() {
        let diff = DiffusionSpec::new(1.0, 1e-12, 1.0).unwrap();
        let path = simulate_path(&diff, &JumpSpec::none(), 4, 3).unwrap();
        for d in &path.increments {
            assert!((d - 0.25).abs() < 1e-4);
        }
    }

    #[test]
    fn no_jumps_no_truth_qv() {
        let path = simulate_path(&DiffusionSpec::default(), &JumpSpec::none(), 100, 9).unwrap();
        let truth = path.truth.unwrap();
        assert_eq!(truth.jump_qv, 0.0);
        assert!(truth.jump_windows.is_empty());
    }

    #[test]
    fn path_is_deterministic_per_seed() {
        let a = simulate_path(&DiffusionSpec::default(), &JumpSpec::default(), 500, 42).unwrap();
        let b = simulate_path(&DiffusionSpec::default(), &JumpSpec::default(), 500, 42).unwrap();
        assert_eq!(a, b);
        let c = simulate_path(&DiffusionSpec::default(), &JumpSpec::default(), 500, 43).unwrap();
        assert_ne!(a.increments, c.increments);
    }

    #[test]
    fn truth_bookkeeping() {
        let path = simulate_path(&DiffusionSpec::default(), &JumpSpec::two_point(50.0, 1.5), 1000, 5).unwrap();
        assert_eq!(path.increments.len(), path.n);
        assert!((path.delta * path.n as f64 - path.horizon).abs() <= 1e-12 * path.horizon);
        let truth = path.truth.as_ref().unwrap();
        let qv: f64 = truth.jump_windows.iter().map(|&i| truth.mu[i].powi(2)).sum();
        assert_eq!(qv, truth.jump_qv);
        let windows: Vec<usize> = (0..path.n).filter(|&i| truth.mu[i] != 0.0).collect();
        assert_eq!(windows, truth.jump_windows);
        let total: f64 = truth.mu.iter().sum();
        let expected: f64 = truth.jumps.sizes.iter().sum();
        assert!((total - expected).abs() < 1e-9);
    }

    #[test]
    fn reference_config_jump_moments() {
        let diff = DiffusionSpec::default();
        let jumps = JumpSpec::default();
        let reps = 1000;
        let (mut windows, mut qv) = (0usize, 0.0);
        let (mut multi, mut total_windows) = (0usize, 0usize);
        for seed in 0..reps {
            let path = simulate_path(&diff, &jumps, 5000, seed).unwrap();
            let truth = path.truth.unwrap();
            windows += truth.jump_windows.len();
            qv += truth.jump_qv;
            let mut counts = vec![0u32; path.n];
            for &t in &truth.jumps.times {
                counts[((t / path.delta) as usize).min(path.n - 1)] += 1;
            }
            multi += counts.iter().filter(|&&c| c >= 2).count();
            total_windows += path.n;
        }
        let mean_windows = windows as f64 / reps as f64;
        let mean_qv = qv / reps as f64;
        // sd(count) = sqrt(5); sd(qv) = 9*sqrt(5); 1000 reps
        assert!((mean_windows - 5.0).abs() < 0.3, "windows {mean_windows}");
        assert!((mean_qv - 45.0).abs() < 3.0, "qv {mean_qv}");
        assert!((multi as f64) / (total_windows as f64) < 0.002);
    }

    #[test]
    fn squared_increments_match_theta_without_jumps() {
        let diff = DiffusionSpec::new(0.0, 10.0, 1.0).unwrap();
        let (n, reps) = (1000usize, 400usize);
        let mean: f64 = (0..reps as u64)
            .map(|s| simulate_path(&diff, &JumpSpec::none(), n, s).unwrap().increments.iter().map(|d| d * d).sum::<f64>())
            .sum::<f64>()
            / reps as f64;
        let tol = 4.0 * (2.0 / (n * reps) as f64).sqrt() * 10.0;
        assert!((mean - 10.0).abs() < tol, "{mean}");
    }
}
