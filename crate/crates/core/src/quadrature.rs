//! Globally adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the 7-point rule live on the odd Kronrod nodes.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { abs: 1e-12, rel: 1e-10, max_intervals: 2000 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn kronrod15<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut gauss = fc * WG[3];
    let mut kronrod = fc * WGK[7];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    Panel { lo, hi, value, error }
}

/// Integrates `f` over `[lo, hi]`, bisecting the panel with the largest error
/// estimate until the total error meets `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<Estimate> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Numeric {
            routine: "integrate",
            detail: format!("non-finite limits [{lo}, {hi}]"),
        });
    }
    if lo == hi {
        return Ok(Estimate { value: 0.0, error: 0.0 });
    }
    if lo > hi {
        let e = integrate(f, hi, lo, tol)?;
        return Ok(Estimate { value: -e.value, error: e.error });
    }

    let mut panels = vec![kronrod15(&f, lo, hi)];
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if !value.is_finite() {
            return Err(Error::Numeric {
                routine: "integrate",
                detail: format!("non-finite integrand sum on [{lo}, {hi}]"),
            });
        }
        if error <= tol.abs.max(tol.rel * value.abs()) {
            return Ok(Estimate { value, error });
        }
        if panels.len() >= tol.max_intervals {
            return Err(Error::Numeric {
                routine: "integrate",
                detail: format!(
                    "no convergence on [{lo}, {hi}] after {} panels: value {value:e}, error {error:e}",
                    panels.len()
                ),
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, _)| i)
            .expect("panel list is never empty");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.lo + p.hi);
        if mid <= p.lo || mid >= p.hi {
            // panel can no longer be split in floating point; accept it
            return Ok(Estimate { value, error });
        }
        panels.push(kronrod15(&f, p.lo, mid));
        panels.push(kronrod15(&f, mid, p.hi));
    }
}

/// Integrates over consecutive segments `[b_0, b_1], [b_1, b_2], ...`.
/// `breaks` must be sorted.
pub fn integrate_piecewise<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: Tolerance) -> Result<Estimate> {
    let mut total = Estimate { value: 0.0, error: 0.0 };
    for w in breaks.windows(2) {
        let e = integrate(&f, w[0], w[1], tol)?;
        total.value += e.value;
        total.error += e.error;
    }
    Ok(total)
}
