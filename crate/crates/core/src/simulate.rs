//! Synthetic data generators: Matérn Gaussian processes on a 1-D grid and
//! inhomogeneous Poisson point patterns by thinning.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::basis::{AnalyticParameter, ParamSurface};
use crate::geometry::{GeometryError, GroundSet};
use crate::inference::{GaussianObservations, PointPattern};
use crate::rng::rng_from_seed;

#[derive(Error, Debug)]
pub enum SimulateError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("Matérn parameters must be strictly positive")]
    NonPositiveMaternParam,
    #[error("grid needs at least 2 points")]
    GridTooSmall,
    #[error("covariance factorization failed even after jitter escalation")]
    FactorizationFailed,
    #[error("intensity is non-finite or negative on the scan grid")]
    BadIntensity,
    #[error("scenario parameters must be strictly positive")]
    NonPositiveScenarioParam,
}

/// Matérn covariance hyperparameters (marginal sd, smoothness, range).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MaternParams {
    pub sigma: f64,
    pub nu: f64,
    pub ell: f64,
}

impl Default for MaternParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            nu: 1.0,
            ell: 1.0,
        }
    }
}

impl MaternParams {
    fn validate(&self) -> Result<(), SimulateError> {
        if self.sigma > 0.0 && self.nu > 0.0 && self.ell > 0.0 {
            Ok(())
        } else {
            Err(SimulateError::NonPositiveMaternParam)
        }
    }
}

/// Matérn covariance at distance `dist`:
/// σ²·2^{1−ν}/Γ(ν)·(√(2ν)·d/ℓ)^ν·K_ν(√(2ν)·d/ℓ), with σ² at d = 0.
pub fn matern_cov(dist: f64, params: &MaternParams) -> f64 {
    let s2 = params.sigma * params.sigma;
    if dist <= 0.0 {
        return s2;
    }
    let arg = (2.0 * params.nu).sqrt() * dist / params.ell;
    s2 * 2.0f64.powf(1.0 - params.nu) / gamma(params.nu)
        * arg.powf(params.nu)
        * bessel_k(params.nu, arg)
}

// --- Modified Bessel function K_ν for fractional order -----------------------
//
// Classic series + continued-fraction evaluation (small-x Temme series,
// large-x Steed continued fraction), valid for ν ≥ 0, x > 0.

const BESS_EPS: f64 = 1e-16;
const BESS_FPMIN: f64 = 1e-300;
const BESS_MAXIT: usize = 10_000;

fn chebev(coeffs: &[f64], x: f64) -> f64 {
    let (mut d, mut dd) = (0.0, 0.0);
    let y2 = 2.0 * x;
    for &c in coeffs.iter().skip(1).rev() {
        let sv = d;
        d = y2 * d - dd + c;
        dd = sv;
    }
    x * d - dd + 0.5 * coeffs[0]
}

/// Chebyshev fits for Γ-related helpers on |x| ≤ 1/2:
/// returns (gam1, gam2, gampl, gammi) with gampl = 1/Γ(1+x), gammi = 1/Γ(1−x).
fn beschb(x: f64) -> (f64, f64, f64, f64) {
    const C1: [f64; 7] = [
        -1.142022680371168,
        6.5165112670737e-3,
        3.087090173086e-4,
        -3.4706269649e-6,
        6.9437664e-9,
        3.67795e-11,
        -1.356e-13,
    ];
    const C2: [f64; 8] = [
        1.843740587300905,
        -7.68528408447867e-2,
        1.2719271366546e-3,
        -4.9717367042e-6,
        -3.31261198e-8,
        2.423096e-10,
        -1.702e-13,
        -1.49e-15,
    ];
    let xx = 8.0 * x * x - 1.0;
    let gam1 = chebev(&C1, xx);
    let gam2 = chebev(&C2, xx);
    (gam1, gam2, gam2 - x * gam1, gam2 + x * gam1)
}

/// K_ν(x) for ν ≥ 0, x > 0.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    assert!(x > 0.0 && nu >= 0.0, "bessel_k needs x > 0, nu >= 0");
    let nl = (nu + 0.5) as usize;
    let xmu = nu - nl as f64;
    let xmu2 = xmu * xmu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;

    let (rkmu, rk1) = if x < 2.0 {
        // Temme's series around ν = xmu.
        let x2 = 0.5 * x;
        let pimu = std::f64::consts::PI * xmu;
        let fact = if pimu.abs() < BESS_EPS {
            1.0
        } else {
            pimu / pimu.sin()
        };
        let d = -x2.ln();
        let e = xmu * d;
        let fact2 = if e.abs() < BESS_EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = beschb(xmu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let e = e.exp();
        let mut p = 0.5 * e / gampl;
        let mut q = 0.5 / (e * gammi);
        let mut c = 1.0;
        let d = x2 * x2;
        let mut sum1 = p;
        let mut converged = false;
        for i in 1..=BESS_MAXIT {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - xmu2);
            c *= d / fi;
            p /= fi - xmu;
            q /= fi + xmu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * BESS_EPS {
                converged = true;
                break;
            }
        }
        assert!(converged, "bessel_k series failed to converge");
        (sum, sum1 * xi2)
    } else {
        // Steed's continued fraction CF2.
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = delh;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - xmu2;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        let mut converged = false;
        for i in 2..=BESS_MAXIT {
            a -= 2.0 * (i as f64 - 1.0);
            c = -a * c / i as f64;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < BESS_EPS {
                converged = true;
                break;
            }
        }
        assert!(converged, "bessel_k continued fraction failed to converge");
        let h = a1 * h;
        let rkmu = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp() / s;
        let rk1 = rkmu * (xmu + x + 0.5 - h) * xi;
        (rkmu, rk1)
    };

    // Upward recurrence from order xmu to nu.
    let (mut rkmu, mut rk1) = (rkmu, rk1);
    for i in 1..=nl {
        let rktemp = (xmu + i as f64) * xi2 * rk1 + rkmu;
        rkmu = rk1;
        rk1 = rktemp;
    }
    rkmu.max(BESS_FPMIN)
}

/// Simulates n replicate Gaussian-process curves on a common 1-D grid.
///
/// The covariance matrix is factorized with a small diagonal jitter (1e-10,
/// escalated ×10 up to 3 retries) to absorb near-singularity of dense Matérn
/// matrices.
pub fn sample_gp(
    mean_fn: &dyn ParamSurface,
    params: &MaternParams,
    grid: &[f64],
    n: usize,
    seed: u64,
) -> Result<GaussianObservations, SimulateError> {
    params.validate()?;
    let j = grid.len();
    if j < 2 {
        return Err(SimulateError::GridTooSmall);
    }
    let mut cov = nalgebra::DMatrix::zeros(j, j);
    for a in 0..j {
        for b in 0..j {
            cov[(a, b)] = matern_cov((grid[a] - grid[b]).abs(), params);
        }
    }
    let mut jitter = 1e-10;
    let mut chol = None;
    for _ in 0..4 {
        let mut m = cov.clone();
        for i in 0..j {
            m[(i, i)] += jitter;
        }
        if let Some(c) = nalgebra::Cholesky::new(m) {
            chol = Some(c);
            break;
        }
        jitter *= 10.0;
    }
    let chol = chol.ok_or(SimulateError::FactorizationFailed)?;
    let l = chol.unpack();

    let mean: Vec<f64> = grid.iter().map(|&t| mean_fn.value(&[t])).collect();
    let mut rng = rng_from_seed(seed);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let z = nalgebra::DVector::from_fn(j, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        let noise = &l * z;
        let row: Vec<f64> = mean.iter().zip(noise.iter()).map(|(m, e)| m + e).collect();
        values.push(row);
    }
    let points: Vec<Vec<f64>> = grid.iter().map(|&t| vec![t]).collect();
    GaussianObservations::new(points, values).map_err(|_| SimulateError::GridTooSmall)
}

/// Common baseline curve b(t) = ½·exp{10(t − 0.5)²} shared by both means.
fn baseline(t: f64) -> f64 {
    0.5 * (10.0 * (t - 0.5) * (t - 0.5)).exp()
}

/// First synthetic scenario's mean pair over [0, 1].
pub fn scenario1_means(t: f64) -> (f64, f64) {
    let b = baseline(t);
    let theta_x = b + 4.0 * (10.0 * t).cos() - 2.0 * (t - 0.75) * (t - 0.75);
    let theta_y = b + 3.0 * (12.0 * t).sin();
    (theta_x, theta_y)
}

/// The same pair packaged as evaluable parameters.
pub fn scenario1_pair() -> (AnalyticParameter, AnalyticParameter) {
    (
        AnalyticParameter::new(|t: &[f64]| scenario1_means(t[0]).0),
        AnalyticParameter::new(|t: &[f64]| scenario1_means(t[0]).1),
    )
}

/// Bivariate intensity scenario: λ_X = γ·exp{−(t₁²+t₂²)/2} on [−3, 3]²,
/// λ_Y = δ·λ_X.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario2Config {
    pub gamma: f64,
    pub delta: f64,
    pub ground: GroundSet,
}

impl Scenario2Config {
    pub fn new(gamma: f64, delta: f64) -> Result<Self, SimulateError> {
        if !(gamma > 0.0) || !(delta > 0.0) {
            return Err(SimulateError::NonPositiveScenarioParam);
        }
        Ok(Self {
            gamma,
            delta,
            ground: GroundSet::square(-3.0, 3.0)?,
        })
    }
}

/// The pair (λ_X, λ_Y) as evaluable intensities.
pub fn scenario2_intensity(cfg: &Scenario2Config) -> (AnalyticParameter, AnalyticParameter) {
    let gamma = cfg.gamma;
    let delta = cfg.delta;
    (
        AnalyticParameter::new(move |t: &[f64]| {
            gamma * (-(t[0] * t[0] + t[1] * t[1]) / 2.0).exp()
        }),
        AnalyticParameter::new(move |t: &[f64]| {
            delta * gamma * (-(t[0] * t[0] + t[1] * t[1]) / 2.0).exp()
        }),
    )
}

/// Samples an inhomogeneous Poisson process by thinning a homogeneous
/// dominating process; the dominating rate is a grid scan of the intensity
/// with a 5% safety margin.
pub fn sample_poisson_process(
    intensity: &dyn ParamSurface,
    ground: &GroundSet,
    seed: u64,
) -> Result<PointPattern, SimulateError> {
    let d = ground.dim();
    let scan_per_dim = if d == 1 { 512 } else { 101 };
    let mut lambda_max: f64 = 0.0;
    let mut idx = vec![0usize; d];
    let steps: Vec<f64> = ground
        .lower()
        .iter()
        .zip(ground.upper())
        .map(|(lo, hi)| (hi - lo) / (scan_per_dim - 1) as f64)
        .collect();
    'outer: loop {
        let point: Vec<f64> = (0..d)
            .map(|k| ground.lower()[k] + idx[k] as f64 * steps[k])
            .collect();
        let v = intensity.value(&point);
        if !v.is_finite() || v < 0.0 {
            return Err(SimulateError::BadIntensity);
        }
        lambda_max = lambda_max.max(v);
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < scan_per_dim {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    lambda_max *= 1.05;
    if lambda_max <= 0.0 {
        return Ok(PointPattern::new(Vec::new()));
    }

    let mut rng = rng_from_seed(seed);
    let expected = lambda_max * ground.volume();
    let n_hom = Poisson::new(expected)
        .map_err(|_| SimulateError::BadIntensity)?
        .sample(&mut rng) as usize;
    let mut points = Vec::new();
    for _ in 0..n_hom {
        let t: Vec<f64> = (0..d)
            .map(|k| rng.gen_range(ground.lower()[k]..ground.upper()[k]))
            .collect();
        let keep: f64 = rng.gen_range(0.0..1.0);
        if keep < intensity.value(&t) / lambda_max {
            points.push(t);
        }
    }
    Ok(PointPattern::new(points))
}

/// A smooth localized bump exp{−(t−center)²/(2·width²)}·height on a 1-D
/// ground set; pairs of these with disjoint supports drive the scalarization
/// tests.
pub fn gaussian_bump(center: f64, width: f64, height: f64) -> AnalyticParameter {
    AnalyticParameter::new(move |t: &[f64]| {
        let z = (t[0] - center) / width;
        height * (-0.5 * z * z).exp()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn bessel_k_matches_half_integer_closed_forms() {
        // K_{1/2}(x) = sqrt(pi/(2x)) e^{-x}; K_{3/2}(x) = K_{1/2}(x)(1 + 1/x).
        for &x in &[0.1, 0.5, 1.0, 1.7, 3.0, 8.0] {
            let k_half = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp();
            assert_relative_eq!(bessel_k(0.5, x), k_half, max_relative = 1e-12);
            assert_relative_eq!(
                bessel_k(1.5, x),
                k_half * (1.0 + 1.0 / x),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn bessel_k_matches_reference_values_at_integer_orders() {
        // Frozen handbook values of K_0(1), K_1(1), K_2(1).
        assert_relative_eq!(bessel_k(0.0, 1.0), 0.421024438240708, max_relative = 1e-12);
        assert_relative_eq!(bessel_k(1.0, 1.0), 0.601907230197235, max_relative = 1e-12);
        assert_relative_eq!(bessel_k(2.0, 1.0), 1.624838898635177, max_relative = 1e-12);
    }

    #[test]
    fn matern_limits_and_exponential_special_case() {
        let p = MaternParams::default();
        assert_eq!(matern_cov(0.0, &p), 1.0);

        let half = MaternParams {
            nu: 0.5,
            ..MaternParams::default()
        };
        for &d in &[0.05, 0.3, 1.0, 2.5] {
            assert_relative_eq!(matern_cov(d, &half), (-d).exp(), max_relative = 1e-10);
        }
        assert_relative_eq!(matern_cov(1.0, &half), 0.36787944117144233, epsilon = 1e-10);
    }

    #[test]
    fn matern_is_nonincreasing_in_distance() {
        for nu in [0.5, 1.0, 1.5, 2.5] {
            let p = MaternParams {
                nu,
                ..MaternParams::default()
            };
            let mut prev = matern_cov(0.0, &p);
            for k in 1..200 {
                let cur = matern_cov(k as f64 * 0.05, &p);
                assert!(cur <= prev + 1e-12, "increase at nu={nu}, k={k}");
                prev = cur;
            }
        }
    }

    #[test]
    fn zero_variance_gp_returns_the_mean_exactly() {
        let mean = AnalyticParameter::new(|t: &[f64]| 2.0 + t[0]);
        let p = MaternParams {
            sigma: 1e-9,
            ..MaternParams::default()
        };
        let grid: Vec<f64> = (0..10).map(|k| k as f64 / 9.0).collect();
        let obs = sample_gp(&mean, &p, &grid, 3, 1).unwrap();
        for row in &obs.values {
            for (j, v) in row.iter().enumerate() {
                assert_relative_eq!(*v, 2.0 + grid[j], epsilon = 1e-3);
            }
        }
    }

    #[test]
    fn gp_sampler_matches_matern_covariance() {
        let mean = AnalyticParameter::new(|_: &[f64]| 0.0);
        let p = MaternParams::default();
        let grid: Vec<f64> = (0..10).map(|k| k as f64 / 9.0).collect();
        let n = 5000;
        let obs = sample_gp(&mean, &p, &grid, n, 42).unwrap();

        // Marginal variances within chi-square concentration bands.
        let tol_var = 4.0 * (2.0 / n as f64).sqrt();
        let j = grid.len();
        let mut emp: nalgebra::DMatrix<f64> = nalgebra::DMatrix::zeros(j, j);
        for row in &obs.values {
            for a in 0..j {
                for b in 0..j {
                    emp[(a, b)] += row[a] * row[b] / n as f64;
                }
            }
        }
        for a in 0..j {
            assert!(
                (emp[(a, a)] - 1.0).abs() < tol_var,
                "variance at site {a}: {}",
                emp[(a, a)]
            );
        }

        // Lag-adjacent correlation close to the model value.
        let model = matern_cov(grid[1] - grid[0], &p);
        let corr = emp[(0, 1)] / (emp[(0, 0)] * emp[(1, 1)]).sqrt();
        assert!((corr - model).abs() < 0.05, "corr {corr} vs {model}");

        // Whole-matrix Frobenius check within 5%.
        let mut target = nalgebra::DMatrix::zeros(j, j);
        for a in 0..j {
            for b in 0..j {
                target[(a, b)] = matern_cov((grid[a] - grid[b]).abs(), &p);
            }
        }
        let rel = (&emp - &target).norm() / target.norm();
        assert!(rel < 0.05, "Frobenius relative error {rel}");
    }

    #[test]
    fn gp_sampler_is_deterministic_per_seed() {
        let mean = AnalyticParameter::new(|_: &[f64]| 0.0);
        let grid: Vec<f64> = (0..5).map(|k| k as f64 / 4.0).collect();
        let a = sample_gp(&mean, &MaternParams::default(), &grid, 2, 9).unwrap();
        let b = sample_gp(&mean, &MaternParams::default(), &grid, 2, 9).unwrap();
        let c = sample_gp(&mean, &MaternParams::default(), &grid, 2, 10).unwrap();
        assert_eq!(a.values, b.values);
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn scenario1_arithmetic_cross_check() {
        // Independent evaluation of the two means at t = 0.5.
        let (x, y) = scenario1_means(0.5);
        let b = 0.5; // exp(0) / 2
        assert_relative_eq!(x, b + 4.0 * 5.0f64.cos() - 2.0 * 0.0625, epsilon = 1e-12);
        assert_relative_eq!(y, b + 3.0 * 6.0f64.sin(), epsilon = 1e-12);
    }

    #[test]
    fn scenario1_difference_is_baseline_free_and_peaks_in_the_known_window() {
        // The difference must not depend on the shared baseline.
        for k in 0..=100 {
            let t = k as f64 / 100.0;
            let (x, y) = scenario1_means(t);
            let without_b =
                (4.0 * (10.0 * t).cos() - 2.0 * (t - 0.75) * (t - 0.75)) - 3.0 * (12.0 * t).sin();
            assert_relative_eq!(x - y, without_b, epsilon = 1e-12);
        }
        // Grid argmax of |difference| sits inside the c = 0.1 optimum window.
        let mut best_t = 0.0;
        let mut best = f64::NEG_INFINITY;
        for k in 0..=2000 {
            let t = k as f64 / 2000.0;
            let (x, y) = scenario1_means(t);
            if (x - y).abs() > best {
                best = (x - y).abs();
                best_t = t;
            }
        }
        assert!(
            (0.165..=0.265).contains(&best_t),
            "pointwise argmax {best_t}"
        );
    }

    #[test]
    fn scenario2_intensity_shape() {
        let cfg = Scenario2Config::new(25.0, 2.0).unwrap();
        let (lx, ly) = scenario2_intensity(&cfg);
        assert_relative_eq!(lx.value(&[0.0, 0.0]), 25.0);
        assert_relative_eq!(ly.value(&[0.0, 0.0]), 50.0);
        let mut rng = rng_from_seed(1);
        for _ in 0..50 {
            let t = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            assert_relative_eq!(ly.value(&t) / lx.value(&t), 2.0, epsilon = 1e-12);
            assert!((lx.value(&t) - ly.value(&t)).abs() <= 25.0);
        }
        assert!(Scenario2Config::new(-1.0, 2.0).is_err());
    }

    #[test]
    fn zero_intensity_gives_empty_pattern() {
        let zero = AnalyticParameter::new(|_: &[f64]| 0.0);
        let ground = GroundSet::unit_interval();
        let pat = sample_poisson_process(&zero, &ground, 3).unwrap();
        assert_eq!(pat.count(), 0);
    }

    #[test]
    fn homogeneous_thinning_has_poisson_dispersion() {
        let lam = AnalyticParameter::new(|_: &[f64]| 50.0);
        let ground = GroundSet::unit_interval();
        let counts: Vec<f64> = (0..1000)
            .map(|s| sample_poisson_process(&lam, &ground, s).unwrap().count() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        let var = counts.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>()
            / counts.len() as f64;
        let ratio = var / mean;
        assert!((0.9..=1.1).contains(&ratio), "dispersion ratio {ratio}");
        assert!((mean - 50.0).abs() < 3.0 * (50.0f64 / 1000.0).sqrt());
    }

    #[test]
    fn thinning_matches_subregion_integrals() {
        // λ(t) = 120 t on [0,1]: ∫_0^{1/2} λ = 15, total 60.
        let lam = AnalyticParameter::new(|t: &[f64]| 120.0 * t[0]);
        let ground = GroundSet::unit_interval();
        let reps = 400;
        let mut left = 0.0;
        for s in 0..reps {
            let pat = sample_poisson_process(&lam, &ground, 1000 + s).unwrap();
            left += pat.points.iter().filter(|p| p[0] < 0.5).count() as f64;
        }
        left /= reps as f64;
        let se = (15.0f64 / reps as f64).sqrt();
        assert!((left - 15.0).abs() < 3.0 * se, "left-half mean {left}");
    }

    #[test]
    fn thinning_is_deterministic_per_seed() {
        let lam = AnalyticParameter::new(|t: &[f64]| 30.0 * (1.0 + t[0]));
        let ground = GroundSet::unit_interval();
        let a = sample_poisson_process(&lam, &ground, 5).unwrap();
        let b = sample_poisson_process(&lam, &ground, 5).unwrap();
        let c = sample_poisson_process(&lam, &ground, 6).unwrap();
        assert_eq!(a.points, b.points);
        assert_ne!(a.points, c.points);
    }
}
