//! Truncation threshold selection and the thresholded estimate of the jump
//! quadratic variation, `J_hat = sum_i D_i^2 * 1(|D_i| > eta)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::sde_sim::{sample_path_with, DiffusionSpec, JumpSpec};
use crate::seed::{derive_seed, rng_from_seed};

pub const DEFAULT_IQR_MULTIPLIER: f64 = 5.0;

/// How the truncation level is chosen.
///
/// Textual form (CLI and JSON configs): `iqr:<c>`, `fixed:<eta>`, `fixed:inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ThresholdRule {
    Fixed(f64),
    /// `eta = c * IQR(|D_1|, ..., |D_n|)`.
    Iqr(f64),
}

impl Default for ThresholdRule {
    fn default() -> Self {
        ThresholdRule::Iqr(DEFAULT_IQR_MULTIPLIER)
    }
}

impl ThresholdRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdRule::Fixed(eta) if !(eta > 0.0) => {
                Err(Error::config(format!("fixed threshold must be > 0, got {eta}")))
            }
            ThresholdRule::Iqr(c) if !(c > 0.0 && c.is_finite()) => {
                Err(Error::config(format!("IQR multiplier must be > 0, got {c}")))
            }
            _ => Ok(()),
        }
    }

    /// Realized threshold for the given increments.
    pub fn threshold(&self, increments: &[f64]) -> Result<f64> {
        self.validate()?;
        match *self {
            ThresholdRule::Fixed(eta) => Ok(eta),
            ThresholdRule::Iqr(c) => interquartile_threshold(increments, c),
        }
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ThresholdRule::Fixed(eta) if eta.is_infinite() => write!(f, "fixed:inf"),
            ThresholdRule::Fixed(eta) => write!(f, "fixed:{eta}"),
            ThresholdRule::Iqr(c) => write!(f, "iqr:{c}"),
        }
    }
}

impl FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| Error::config(format!("threshold must look like iqr:<c> or fixed:<eta>, got {s:?}")))?;
        let value = value.trim();
        let number: f64 = match value {
            "inf" | "+inf" | "infinity" => f64::INFINITY,
            v => v.parse().map_err(|_| Error::config(format!("bad threshold value {v:?}")))?,
        };
        let rule = match kind.trim() {
            "fixed" => ThresholdRule::Fixed(number),
            "iqr" => ThresholdRule::Iqr(number),
            other => return Err(Error::config(format!("unknown threshold rule {other:?}"))),
        };
        rule.validate()?;
        Ok(rule)
    }
}

impl TryFrom<String> for ThresholdRule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ThresholdRule> for String {
    fn from(rule: ThresholdRule) -> String {
        rule.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QvEstimate {
    /// Realized threshold; `+inf` means no increment can be flagged.
    pub eta: f64,
    pub jump_qv_hat: f64,
    /// 0-based indices with `|D_i| > eta`.
    pub flagged: Vec<usize>,
}

/// Quantile of sorted data by linear interpolation at 0-based position
/// `(n - 1) * p`.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// `c` times the interquartile range of `|D_i|`; `+inf` when the IQR is zero.
pub fn interquartile_threshold(increments: &[f64], multiplier: f64) -> Result<f64> {
    if increments.len() < 4 {
        return Err(Error::InsufficientData { needed: 4, got: increments.len() });
    }
    if !(multiplier > 0.0 && multiplier.is_finite()) {
        return Err(Error::config(format!("IQR multiplier must be > 0, got {multiplier}")));
    }
    let mut magnitudes: Vec<f64> = increments.iter().map(|d| d.abs()).collect();
    magnitudes.sort_by(f64::total_cmp);
    let iqr = sorted_quantile(&magnitudes, 0.75) - sorted_quantile(&magnitudes, 0.25);
    if iqr == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(multiplier * iqr)
}

pub fn estimate_jump_qv(increments: &[f64], eta: f64) -> Result<QvEstimate> {
    if !(eta > 0.0) {
        return Err(Error::Contract(format!("threshold must be > 0 or +inf, got {eta}")));
    }
    let mut flagged = Vec::new();
    let mut jump_qv_hat = 0.0;
    for (i, &d) in increments.iter().enumerate() {
        if d.abs() > eta {
            flagged.push(i);
            jump_qv_hat += d * d;
        }
    }
    Ok(QvEstimate { eta, jump_qv_hat, flagged })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QvRatePoint {
    pub n: usize,
    pub mae: f64,
    pub mae_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QvRateReport {
    pub points: Vec<QvRatePoint>,
    /// Least-squares slope of `ln MAE` on `ln n`. `None` without jumps, where
    /// there is nothing to estimate.
    pub slope: Option<f64>,
}

pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Mean absolute error of `J_hat` against the simulator's `[J]` for each `n`,
/// and the log-log slope across the grid.
pub fn qv_error_rate(
    diff: &DiffusionSpec,
    jumps: &JumpSpec,
    rule: ThresholdRule,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
    workers: Option<usize>,
) -> Result<QvRateReport> {
    diff.validate()?;
    jumps.validate()?;
    rule.validate()?;
    let mut distinct: Vec<usize> = n_grid.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::config("qv rate grid needs at least 3 distinct sample sizes"));
    }
    if (distinct[distinct.len() - 1] as f64) < 10.0 * distinct[0] as f64 {
        return Err(Error::config("qv rate grid must span at least one decade"));
    }
    if distinct[0] < 4 {
        return Err(Error::config("qv rate grid sample sizes must be >= 4"));
    }
    if reps < 200 {
        return Err(Error::config(format!("qv rate needs reps >= 200, got {reps}")));
    }

    let mut points = Vec::with_capacity(n_grid.len());
    for (cell, &n) in n_grid.iter().enumerate() {
        let errors = map_indexed(workers, reps, |rep| -> Result<f64> {
            let mut rng = rng_from_seed(derive_seed(seed, cell as u32, rep as u32));
            let path = sample_path_with(diff, jumps, n, &mut rng)?;
            let eta = rule.threshold(&path.increments)?;
            let qv = estimate_jump_qv(&path.increments, eta)?;
            let truth = path.truth.as_ref().expect("simulated paths carry truth").jump_qv;
            Ok((qv.jump_qv_hat - truth).abs())
        })?
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
        let mae = errors.iter().sum::<f64>() / reps as f64;
        let var = errors.iter().map(|e| (e - mae).powi(2)).sum::<f64>() / (reps - 1) as f64;
        points.push(QvRatePoint { n, mae, mae_stderr: (var / reps as f64).sqrt() });
    }

    let slope = if jumps.rate == 0.0 || points.iter().any(|p| p.mae <= 0.0) {
        None
    } else {
        let xs: Vec<f64> = points.iter().map(|p| (p.n as f64).ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.mae.ln()).collect();
        Some(least_squares_slope(&xs, &ys))
    };
    Ok(QvRateReport { points, slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn iqr_hand_example() {
        let d = [1.0, -2.0, 3.0, 4.0, -100.0];
        let eta = interquartile_threshold(&d, 5.0).unwrap();
        assert_eq!(eta, 10.0);
        let qv = estimate_jump_qv(&d, eta).unwrap();
        assert_eq!(qv.flagged, vec![4]);
        assert_eq!(qv.jump_qv_hat, 10_000.0);
    }

    #[test]
    fn zero_spread_means_no_threshold() {
        let d = [0.5, -0.5, 0.5, 0.5, -0.5];
        let eta = interquartile_threshold(&d, 5.0).unwrap();
        assert!(eta.is_infinite());
        let qv = estimate_jump_qv(&d, eta).unwrap();
        assert!(qv.flagged.is_empty());
        assert_eq!(qv.jump_qv_hat, 0.0);
    }

    #[test]
    fn too_few_increments() {
        assert!(matches!(
            interquartile_threshold(&[1.0, 2.0, 3.0], 5.0),
            Err(Error::InsufficientData { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn direct_formula() {
        let qv = estimate_jump_qv(&[0.1, 5.0, 0.2], 1.0).unwrap();
        assert_eq!(qv.jump_qv_hat, 25.0);
        assert_eq!(qv.flagged, vec![1]);
        let none = estimate_jump_qv(&[0.1, 5.0, 0.2], f64::INFINITY).unwrap();
        assert_eq!(none.jump_qv_hat, 0.0);
        assert!(none.flagged.is_empty());
    }

    #[test]
    fn strict_inequality_at_threshold() {
        let qv = estimate_jump_qv(&[1.0, -1.0, 1.5], 1.0).unwrap();
        assert_eq!(qv.flagged, vec![2]);
    }

    #[test]
    fn nonpositive_threshold_is_rejected() {
        assert!(estimate_jump_qv(&[1.0], 0.0).is_err());
        assert!(estimate_jump_qv(&[1.0], f64::NAN).is_err());
    }

    #[test]
    fn rule_parsing() {
        assert_eq!("iqr:5".parse::<ThresholdRule>().unwrap(), ThresholdRule::Iqr(5.0));
        assert_eq!("fixed:0.5".parse::<ThresholdRule>().unwrap(), ThresholdRule::Fixed(0.5));
        assert_eq!("fixed:inf".parse::<ThresholdRule>().unwrap(), ThresholdRule::Fixed(f64::INFINITY));
        assert!("fixed:-1".parse::<ThresholdRule>().is_err());
        assert!("iqr:0".parse::<ThresholdRule>().is_err());
        assert!("median:3".parse::<ThresholdRule>().is_err());
        let json = serde_json::to_string(&ThresholdRule::Fixed(f64::INFINITY)).unwrap();
        assert_eq!(json, "\"fixed:inf\"");
        assert_eq!(serde_json::from_str::<ThresholdRule>(&json).unwrap(), ThresholdRule::Fixed(f64::INFINITY));
    }

    #[test]
    fn grid_preconditions() {
        let diff = DiffusionSpec::default();
        let jumps = JumpSpec::default();
        let rule = ThresholdRule::default();
        assert!(qv_error_rate(&diff, &jumps, rule, &[1000, 4000], 200, 1, None).is_err());
        assert!(qv_error_rate(&diff, &jumps, rule, &[1000, 2000, 4000], 200, 1, None).is_err());
        assert!(qv_error_rate(&diff, &jumps, rule, &[1000, 4000, 16000], 50, 1, None).is_err());
    }

    #[test]
    fn no_jumps_skips_slope() {
        let report = qv_error_rate(
            &DiffusionSpec::default(),
            &JumpSpec::none(),
            ThresholdRule::default(),
            &[100, 400, 1000],
            200,
            3,
            None,
        )
        .unwrap();
        assert!(report.slope.is_none());
        for p in &report.points {
            assert!(p.mae < 0.05, "{p:?}");
        }
    }

    #[test]
    fn slope_of_exact_power_law() {
        let xs: Vec<f64> = [10.0f64, 100.0, 1000.0].iter().map(|x| x.ln()).collect();
        let ys: Vec<f64> = [10.0f64, 100.0, 1000.0].iter().map(|x| (3.0 * x.powf(-0.5)).ln()).collect();
        assert!((least_squares_slope(&xs, &ys) + 0.5).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn raising_threshold_never_raises_estimate(
            d in prop::collection::vec(-10.0f64..10.0, 4..60),
            e1 in 0.01f64..10.0,
            e2 in 0.01f64..10.0,
        ) {
            let (lo, hi) = if e1 < e2 { (e1, e2) } else { (e2, e1) };
            let a = estimate_jump_qv(&d, lo).unwrap();
            let b = estimate_jump_qv(&d, hi).unwrap();
            prop_assert!(b.jump_qv_hat <= a.jump_qv_hat);
            let total: f64 = d.iter().map(|x| x * x).sum();
            prop_assert!(a.jump_qv_hat <= total);
            let expected: Vec<usize> = (0..d.len()).filter(|&i| d[i].abs() > lo).collect();
            prop_assert_eq!(a.flagged, expected);
        }

        #[test]
        fn scale_equivariance(
            d in prop::collection::vec(-10.0f64..10.0, 8..60),
            s in 0.1f64..10.0,
        ) {
            let eta = interquartile_threshold(&d, 5.0).unwrap();
            prop_assume!(eta.is_finite());
            let scaled: Vec<f64> = d.iter().map(|x| x * s).collect();
            let eta_s = interquartile_threshold(&scaled, 5.0).unwrap();
            prop_assert!((eta_s - s * eta).abs() <= 1e-9 * eta_s.abs());
            let q = estimate_jump_qv(&d, eta).unwrap();
            let q_s = estimate_jump_qv(&scaled, eta_s).unwrap();
            // boundary ties may flip under rounding, so only compare same flag sets
            if q.flagged == q_s.flagged {
                prop_assert!((q_s.jump_qv_hat - s * s * q.jump_qv_hat).abs() <= 1e-9 * (1.0 + q_s.jump_qv_hat));
            }
        }
    }
}
