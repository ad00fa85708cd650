use jumpvol::diagnostics::{tv_distance, FnDensity};
use jumpvol::io::{read_path_csv, write_path_csv};
use jumpvol::quadrature::{integrate, Tolerance};
use jumpvol::seed::rng_from_seed;
use jumpvol::{
    credible_interval, infer, modify_posterior, simulate_path, vol_posterior::tempered_update, DiffusionSpec,
    InferenceSettings, InverseGammaParams, JumpSpec, ThresholdRule,
};
use rand::Rng;

#[test]
fn default_path_interval_contains_truth() {
    let diff = DiffusionSpec::default();
    let path = simulate_path(&diff, &JumpSpec::default(), 5000, 1).unwrap();
    let inf = infer(&path.increments, path.horizon, &InferenceSettings::default()).unwrap();
    assert!(inf.interval.contains(10.0), "{:?}", inf.interval);
    assert!(inf.kappa < 1.0);
    assert!((inf.qv.jump_qv_hat - path.truth.unwrap().jump_qv).abs() < 1.0);
}

#[test]
fn csv_round_trip_gives_identical_inference() {
    let path = simulate_path(&DiffusionSpec::default(), &JumpSpec::default(), 2000, 9).unwrap();
    let mut buf = Vec::new();
    write_path_csv(&path, &mut buf, false).unwrap();
    let back = read_path_csv(buf.as_slice()).unwrap();
    let s = InferenceSettings::default();
    let a = infer(&path.increments, path.horizon, &s).unwrap();
    let b = infer(&back.increments, back.horizon, &s).unwrap();
    assert_eq!(a.interval, b.interval);
    assert_eq!(a.posterior, b.posterior);
}

#[test]
fn infinite_threshold_is_plain_bayes() {
    let path = simulate_path(&DiffusionSpec::default(), &JumpSpec::default(), 1000, 4).unwrap();
    let s = InferenceSettings { threshold: ThresholdRule::Fixed(f64::INFINITY), ..Default::default() };
    let inf = infer(&path.increments, path.horizon, &s).unwrap();
    assert_eq!(inf.kappa, 1.0);
    assert_eq!(inf.posterior.shift, 0.0);
    let ss: f64 = path.increments.iter().map(|d| d * d).sum();
    assert_eq!(inf.posterior.base.ig.shape, 1.0 + 500.0);
    assert!((inf.posterior.base.ig.rate - (1.0 + ss / (2.0 * path.delta))).abs() < 1e-9 * inf.posterior.base.ig.rate);
}

// moments of the unnormalized posterior theta^{-a-1} exp(-b/theta) L(theta)^(1/kappa),
// integrated in log theta so the mass spread over several decades is resolved
#[test]
fn closed_form_moments_match_quadrature() {
    let mut rng = rng_from_seed(77);
    for _ in 0..25 {
        let a: f64 = rng.random_range(0.5..5.0);
        let b: f64 = rng.random_range(0.1..5.0);
        let kappa: f64 = rng.random_range(0.05..1.0);
        let n: usize = rng.random_range(20..200);
        let delta = 1.0 / n as f64;
        let ss: f64 = (0..n).map(|_| (rng.random_range(-1.0..1.0) * 3.0 * delta.sqrt()).powi(2)).sum();
        let theta_hat = ss / (n as f64 * delta);

        let post = tempered_update(&InverseGammaParams::new(a, b).unwrap(), n, theta_hat, kappa).unwrap();
        let log_kernel = |t: f64| {
            -(a + 1.0) * t.ln() - b / t + (-(n as f64) / 2.0 * t.ln() - ss / (2.0 * delta * t)) / kappa
        };
        let peak = log_kernel(post.ig.mode());
        let lm = post.ig.mode().ln();
        // the k-th moment integrand decays like exp(-(a + n / (2 kappa) - k) u) on the right
        let decay = a + n as f64 / (2.0 * kappa);
        let tol = Tolerance { abs: 0.0, rel: 1e-12, max_intervals: 8000 };
        let moment = |k: i32| {
            let right = lm + 40.0 / (decay - k as f64) + 5.0;
            integrate(|u: f64| (log_kernel(u.exp()) - peak + u).exp() * u.exp().powi(k), lm - 20.0, right, tol)
                .unwrap()
                .value
        };
        let (m0, m1, m2) = (moment(0), moment(1), moment(2));
        let mean = m1 / m0;
        let var = m2 / m0 - mean * mean;
        let cm = post.mean().unwrap();
        assert!((cm - mean).abs() < 1e-6 * mean, "mean {cm} vs {mean}");
        let cv = post.variance().unwrap();
        assert!((cv - var).abs() < 1e-6 * var, "var {cv} vs {var}");
    }
}

#[test]
fn shifted_interval_is_base_interval_minus_shift() {
    let base = tempered_update(&InverseGammaParams::default(), 400, 30.0, 0.2).unwrap();
    let qv = jumpvol::QvEstimate { eta: 1.0, jump_qv_hat: 18.0, flagged: vec![] };
    let m = modify_posterior(&base, &qv, 1.0);
    let ci = credible_interval(&m, 0.95).unwrap();
    assert!((ci.lo - (base.ig.quantile(0.025).unwrap() - 18.0)).abs() < 1e-9);
    assert!((ci.hi - (base.ig.quantile(0.975).unwrap() - 18.0)).abs() < 1e-9);
}

#[test]
fn tv_accepts_closure_densities() {
    let tri = FnDensity { f: |x: f64| (1.0 - x.abs()).max(0.0), support: (-1.0, 1.0), mode: 0.0 };
    assert!(tv_distance(&tri, &tri).unwrap() < 1e-12);
}
