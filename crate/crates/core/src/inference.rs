//! Bayesian fitting of functional parameters and posterior coefficient draws.
//!
//! Two likelihoods are supported: Gaussian observations on a fixed grid with
//! an exact Normal-Inverse-Gamma conjugate posterior, and spatial point
//! patterns via a binned Cox-process likelihood with a Laplace (Gaussian at
//! the mode) approximation.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::basis::{design_matrix, BasisError, BasisSet, FunctionalParameter, LinkFunction};
use crate::geometry::{GeometryError, GroundSet};
use crate::rng::{rng_from_seed, subseed};

#[derive(Error, Debug)]
pub enum InferenceError {
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("observation grid is empty or replicate rows have uneven lengths")]
    MalformedObservations,
    #[error("observations contain non-finite values")]
    NonFiniteValue,
    #[error("posterior precision is not positive definite")]
    NotPositiveDefinite,
    #[error(
        "Newton iteration did not converge after {iterations} steps \
         (final gradient norm {grad_norm:.3e}; trace: {trace:?})"
    )]
    NewtonDiverged {
        iterations: usize,
        grad_norm: f64,
        trace: Vec<f64>,
    },
    #[error("binned likelihood needs at least 2 bins per dimension, got {0}")]
    TooFewBins(usize),
    #[error("posteriors are defined over different ground sets")]
    GroundMismatch,
    #[error("sample count m must be at least 1")]
    ZeroDraws,
    #[error("data does not match the posterior's likelihood")]
    DataMismatch,
    #[error("candidate basis size list is empty")]
    NoCandidates,
    #[error("every candidate basis failed to fit; last error: {0}")]
    AllCandidatesFailed(String),
}

/// Gaussian functional data: replicated curves observed on a common grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianObservations {
    /// The J observation sites.
    pub points: Vec<Vec<f64>>,
    /// One row per replicate, each of length J.
    pub values: Vec<Vec<f64>>,
}

impl GaussianObservations {
    pub fn new(points: Vec<Vec<f64>>, values: Vec<Vec<f64>>) -> Result<Self, InferenceError> {
        if points.is_empty() || values.is_empty() {
            return Err(InferenceError::MalformedObservations);
        }
        let j = points.len();
        if values.iter().any(|row| row.len() != j) {
            return Err(InferenceError::MalformedObservations);
        }
        if values.iter().flatten().any(|v| !v.is_finite())
            || points.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(InferenceError::NonFiniteValue);
        }
        Ok(Self { points, values })
    }

    pub fn num_replicates(&self) -> usize {
        self.values.len()
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }
}

/// A spatial point pattern: the observed event locations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PointPattern {
    pub points: Vec<Vec<f64>>,
}

impl PointPattern {
    pub fn new(points: Vec<Vec<f64>>) -> Self {
        Self { points }
    }

    pub fn count(&self) -> usize {
        self.points.len()
    }
}

/// Independent Gaussian prior on coefficients plus an Inverse-Gamma prior on
/// the Gaussian noise variance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianPrior {
    pub intercept_variance: f64,
    pub slope_variance: f64,
    pub noise_shape: f64,
    pub noise_rate: f64,
}

impl Default for GaussianPrior {
    fn default() -> Self {
        Self {
            intercept_variance: 1e6,
            slope_variance: 1e3,
            noise_shape: 1.0,
            noise_rate: 1e-5,
        }
    }
}

impl GaussianPrior {
    /// Diagonal prior precision for a coefficient vector of length B + 1.
    fn precision_diag(&self, len: usize) -> DVector<f64> {
        let mut q = DVector::from_element(len, 1.0 / self.slope_variance);
        q[0] = 1.0 / self.intercept_variance;
        q
    }
}

/// Which likelihood produced a posterior, with the pieces needed to draw from
/// it and to recompute deviances.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PosteriorLikelihood {
    GaussianConjugate {
        /// Inverse-Gamma posterior (shape, rate) of the noise variance.
        noise_shape: f64,
        noise_rate: f64,
    },
    PoissonLaplace {
        bins_per_dim: usize,
    },
}

/// Gaussian (or Gaussian-approximate) posterior of the coefficient vector.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientPosterior {
    pub basis: BasisSet,
    pub link: LinkFunction,
    /// Posterior mean (mode for the Laplace case), intercept first.
    pub mean: Vec<f64>,
    /// Lower-triangular L with L·Lᵀ the posterior covariance of the
    /// coefficients. In the Gaussian-conjugate case this is the unit-variance
    /// factor: the sampled covariance is σ²·L·Lᵀ with σ² drawn from its
    /// Inverse-Gamma posterior.
    pub covariance_factor: DMatrix<f64>,
    pub likelihood: PosteriorLikelihood,
}

impl CoefficientPosterior {
    /// Point-mass posterior at `mean`; useful for tests and plug-in pipelines.
    pub fn degenerate(
        basis: BasisSet,
        link: LinkFunction,
        mean: Vec<f64>,
    ) -> Result<Self, InferenceError> {
        if mean.len() != basis.num_basis() + 1 {
            return Err(BasisError::CoefficientLength {
                expected: basis.num_basis() + 1,
                got: mean.len(),
            }
            .into());
        }
        let n = mean.len();
        Ok(Self {
            basis,
            link,
            mean,
            covariance_factor: DMatrix::zeros(n, n),
            likelihood: PosteriorLikelihood::PoissonLaplace { bins_per_dim: 2 },
        })
    }

    /// The posterior-mean (or mode) functional parameter.
    pub fn mean_parameter(&self) -> FunctionalParameter {
        FunctionalParameter::new(self.basis.clone(), self.link, self.mean.clone())
            .expect("length validated on construction")
    }

    /// Posterior mean of the noise variance (Gaussian case only).
    pub fn noise_variance_mean(&self) -> Option<f64> {
        match self.likelihood {
            PosteriorLikelihood::GaussianConjugate {
                noise_shape,
                noise_rate,
            } => Some(noise_rate / (noise_shape - 1.0).max(1e-12)),
            PosteriorLikelihood::PoissonLaplace { .. } => None,
        }
    }
}

/// Fits the conjugate Normal-Inverse-Gamma posterior for Gaussian curves.
pub fn fit_gaussian(
    data: &GaussianObservations,
    basis: &BasisSet,
    prior: &GaussianPrior,
) -> Result<CoefficientPosterior, InferenceError> {
    let phi = design_matrix(basis, &data.points)?;
    let k = phi.ncols();
    let n = data.num_replicates() as f64;
    let total = data.num_replicates() * data.num_points();

    // Replicates share the design, so the stacked normal equations reduce to
    // sufficient statistics on the J-site grid.
    let mut site_sums = DVector::zeros(data.num_points());
    let mut sum_sq = 0.0;
    for row in &data.values {
        for (j, &y) in row.iter().enumerate() {
            site_sums[j] += y;
            sum_sq += y * y;
        }
    }

    let q = prior.precision_diag(k);
    let mut precision = phi.transpose() * &phi * n;
    for i in 0..k {
        precision[(i, i)] += q[i];
    }
    let rhs = phi.transpose() * site_sums;
    let chol = Cholesky::new(precision.clone()).ok_or(InferenceError::NotPositiveDefinite)?;
    let mean = chol.solve(&rhs);

    let noise_shape = prior.noise_shape + total as f64 / 2.0;
    let quad = (precision * &mean).dot(&mean);
    let noise_rate = (prior.noise_rate + 0.5 * (sum_sq - quad)).max(prior.noise_rate);

    let cov = chol.inverse();
    let factor = Cholesky::new(cov)
        .ok_or(InferenceError::NotPositiveDefinite)?
        .unpack();

    Ok(CoefficientPosterior {
        basis: basis.clone(),
        link: LinkFunction::Identity,
        mean: mean.iter().copied().collect(),
        covariance_factor: factor,
        likelihood: PosteriorLikelihood::GaussianConjugate {
            noise_shape,
            noise_rate,
        },
    })
}

/// Default bin count for the Cox likelihood.
pub fn default_bins_per_dim(dim: usize) -> usize {
    if dim == 1 {
        128
    } else {
        32
    }
}

/// Regular binning of a point pattern: cell centers, counts, and cell volume.
pub fn bin_pattern(
    pattern: &PointPattern,
    ground: &GroundSet,
    bins_per_dim: usize,
) -> Result<(Vec<Vec<f64>>, Vec<f64>, f64), InferenceError> {
    if bins_per_dim < 2 {
        return Err(InferenceError::TooFewBins(bins_per_dim));
    }
    let d = ground.dim();
    let steps: Vec<f64> = ground
        .lower()
        .iter()
        .zip(ground.upper())
        .map(|(lo, hi)| (hi - lo) / bins_per_dim as f64)
        .collect();
    let cell_volume: f64 = steps.iter().product();
    let n_cells = bins_per_dim.pow(d as u32);

    let mut centers = Vec::with_capacity(n_cells);
    let mut idx = vec![0usize; d];
    'outer: loop {
        let center: Vec<f64> = (0..d)
            .map(|k| ground.lower()[k] + (idx[k] as f64 + 0.5) * steps[k])
            .collect();
        centers.push(center);
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < bins_per_dim {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }

    let mut counts = vec![0.0f64; n_cells];
    for point in &pattern.points {
        if !ground.contains(point) {
            return Err(BasisError::PointOutsideGround.into());
        }
        let mut flat = 0usize;
        for k in 0..d {
            let i = (((point[k] - ground.lower()[k]) / steps[k]) as usize).min(bins_per_dim - 1);
            flat = flat * bins_per_dim + i;
        }
        counts[flat] += 1.0;
    }
    Ok((centers, counts, cell_volume))
}

/// Fits a log-linear intensity to a point pattern via the binned Poisson
/// likelihood; returns the Laplace approximation at the posterior mode.
pub fn fit_poisson(
    pattern: &PointPattern,
    basis: &BasisSet,
    prior: &GaussianPrior,
    bins_per_dim: usize,
) -> Result<CoefficientPosterior, InferenceError> {
    let ground = basis.ground().clone();
    let (centers, counts, cell_volume) = bin_pattern(pattern, &ground, bins_per_dim)?;
    let phi = design_matrix(basis, &centers)?;
    let k = phi.ncols();
    let q = prior.precision_diag(k);
    let y = DVector::from_vec(counts);

    // Newton with step-halving on the log posterior
    //   l(β) = Σ_i { y_i η_i − v e^{η_i} } − ½ βᵀQβ,   η = Φβ.
    let log_post = |beta: &DVector<f64>| -> f64 {
        let eta = &phi * beta;
        let mut l = 0.0;
        for i in 0..eta.len() {
            l += y[i] * eta[i] - cell_volume * eta[i].exp();
        }
        l - 0.5 * beta.iter().zip(q.iter()).map(|(b, qi)| qi * b * b).sum::<f64>()
    };

    let mut beta = DVector::zeros(k);
    // A sane intercept start keeps early exponentials bounded.
    let total: f64 = y.sum();
    beta[0] = ((total + 0.5) / ground.volume()).ln();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut grad_norm = f64::INFINITY;
    let mut hessian = DMatrix::zeros(k, k);
    for _ in 0..100 {
        let eta = &phi * &beta;
        let mu: DVector<f64> = eta.map(|e| cell_volume * e.exp());
        let mut grad = phi.transpose() * (&y - &mu);
        for i in 0..k {
            grad[i] -= q[i] * beta[i];
        }
        grad_norm = grad.amax();
        trace.push(grad_norm);
        if grad_norm < 1e-8 {
            converged = true;
            // Refresh the curvature at the final iterate.
            hessian = weighted_gram(&phi, &mu);
            for i in 0..k {
                hessian[(i, i)] += q[i];
            }
            break;
        }
        hessian = weighted_gram(&phi, &mu);
        for i in 0..k {
            hessian[(i, i)] += q[i];
        }
        let chol =
            Cholesky::new(hessian.clone()).ok_or(InferenceError::NotPositiveDefinite)?;
        let direction = chol.solve(&grad);

        let current = log_post(&beta);
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate = &beta + &direction * step;
            if log_post(&candidate) > current {
                beta = candidate;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            if grad_norm < 1e-3 {
                // Near the mode the objective gain can fall below floating
                // point resolution before the gradient test passes; the full
                // Newton step still converges quadratically from here.
                beta += direction;
            } else {
                // Genuinely no ascent along the Newton direction: stalled.
                break;
            }
        }
    }
    if !converged {
        return Err(InferenceError::NewtonDiverged {
            iterations: trace.len(),
            grad_norm,
            trace,
        });
    }

    let cov = Cholesky::new(hessian)
        .ok_or(InferenceError::NotPositiveDefinite)?
        .inverse();
    let factor = Cholesky::new(cov)
        .ok_or(InferenceError::NotPositiveDefinite)?
        .unpack();

    Ok(CoefficientPosterior {
        basis: basis.clone(),
        link: LinkFunction::Log,
        mean: beta.iter().copied().collect(),
        covariance_factor: factor,
        likelihood: PosteriorLikelihood::PoissonLaplace { bins_per_dim },
    })
}

/// ΦᵀWΦ with diagonal weights `w` without materializing W.
fn weighted_gram(phi: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let mut weighted = phi.clone();
    for (i, mut row) in weighted.row_iter_mut().enumerate() {
        row *= w[i];
    }
    phi.transpose() * weighted
}

/// Draws m i.i.d. coefficient vectors from the posterior.
///
/// Gaussian-conjugate posteriors first draw the noise variance from its
/// Inverse-Gamma posterior and scale the coefficient covariance accordingly.
pub fn sample_coefficients(
    post: &CoefficientPosterior,
    m: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, InferenceError> {
    if m == 0 {
        return Err(InferenceError::ZeroDraws);
    }
    let mut rng = rng_from_seed(seed);
    let k = post.mean.len();
    let mean = DVector::from_vec(post.mean.clone());
    let mut draws = Vec::with_capacity(m);
    for _ in 0..m {
        let scale = match post.likelihood {
            PosteriorLikelihood::GaussianConjugate {
                noise_shape,
                noise_rate,
            } => {
                let gamma = Gamma::new(noise_shape, 1.0 / noise_rate)
                    .map_err(|_| InferenceError::NotPositiveDefinite)?;
                let precision_draw: f64 = gamma.sample(&mut rng);
                (1.0 / precision_draw).sqrt()
            }
            PosteriorLikelihood::PoissonLaplace { .. } => 1.0,
        };
        let z = DVector::from_fn(k, |_, _| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v
        });
        let draw = &mean + &post.covariance_factor * z * scale;
        draws.push(draw.iter().copied().collect());
    }
    Ok(draws)
}

/// Draws m paired posterior trajectories (θ_X^{(k)}, θ_Y^{(k)}) using
/// independent sub-seeds for the two processes.
pub fn posterior_trajectories(
    post_x: &CoefficientPosterior,
    post_y: &CoefficientPosterior,
    m: usize,
    seed: u64,
) -> Result<Vec<(FunctionalParameter, FunctionalParameter)>, InferenceError> {
    if post_x.basis.ground() != post_y.basis.ground() {
        return Err(InferenceError::GroundMismatch);
    }
    let draws_x = sample_coefficients(post_x, m, subseed(seed, 0))?;
    let draws_y = sample_coefficients(post_y, m, subseed(seed, 1))?;
    draws_x
        .into_iter()
        .zip(draws_y)
        .map(|(bx, by)| {
            let fx = FunctionalParameter::new(post_x.basis.clone(), post_x.link, bx)?;
            let fy = FunctionalParameter::new(post_y.basis.clone(), post_y.link, by)?;
            Ok((fx, fy))
        })
        .collect()
}

/// Data handed back to [`dic`]; must match the posterior's likelihood.
#[derive(Debug, Clone)]
pub enum ObservedData<'a> {
    Gaussian(&'a GaussianObservations),
    Pattern(&'a PointPattern),
}

/// −2 × log-likelihood of the data at a given coefficient vector.
fn deviance(
    post: &CoefficientPosterior,
    data: &ObservedData<'_>,
    beta: &[f64],
) -> Result<f64, InferenceError> {
    match (&post.likelihood, data) {
        (PosteriorLikelihood::GaussianConjugate { .. }, ObservedData::Gaussian(obs)) => {
            let sigma2 = post
                .noise_variance_mean()
                .ok_or(InferenceError::DataMismatch)?;
            let mut d = 0.0;
            let n_total = obs.num_replicates() * obs.num_points();
            for row in &obs.values {
                for (j, &y) in row.iter().enumerate() {
                    let eta = post.basis.linear_predictor(&obs.points[j], beta);
                    let resid = y - eta;
                    d += resid * resid / sigma2;
                }
            }
            d += n_total as f64 * (2.0 * std::f64::consts::PI * sigma2).ln();
            Ok(d)
        }
        (PosteriorLikelihood::PoissonLaplace { bins_per_dim }, ObservedData::Pattern(pat)) => {
            let (centers, counts, v) = bin_pattern(pat, post.basis.ground(), *bins_per_dim)?;
            let mut ll = 0.0;
            for (center, &y) in centers.iter().zip(&counts) {
                let eta = post.basis.linear_predictor(center, beta) + v.ln();
                ll += y * eta - eta.exp() - ln_gamma(y + 1.0);
            }
            Ok(-2.0 * ll)
        }
        _ => Err(InferenceError::DataMismatch),
    }
}

/// Deviance Information Criterion: 2·mean_k D(β^{(k)}) − D(β̄). Lower is
/// better.
pub fn dic(
    post: &CoefficientPosterior,
    data: &ObservedData<'_>,
    m_draws: usize,
    seed: u64,
) -> Result<f64, InferenceError> {
    let draws = sample_coefficients(post, m_draws, seed)?;
    let mut mean_dev = 0.0;
    for beta in &draws {
        mean_dev += deviance(post, data, beta)?;
    }
    mean_dev /= draws.len() as f64;
    let dev_at_mean = deviance(post, data, &post.mean)?;
    Ok(2.0 * mean_dev - dev_at_mean)
}

/// Fits one candidate basis size over the given data.
fn fit_candidate(
    data: &ObservedData<'_>,
    ground: &GroundSet,
    size: usize,
    prior: &GaussianPrior,
) -> Result<CoefficientPosterior, InferenceError> {
    let basis = basis_for_size(ground, size)?;
    match data {
        ObservedData::Gaussian(obs) => fit_gaussian(obs, &basis, prior),
        ObservedData::Pattern(pat) => {
            fit_poisson(pat, &basis, prior, default_bins_per_dim(ground.dim()))
        }
    }
}

/// Cubic basis with `size` functions per dimension; `size = 1` degenerates to
/// the intercept-only model and small sizes drop the degree accordingly.
pub fn basis_for_size(ground: &GroundSet, size: usize) -> Result<BasisSet, InferenceError> {
    if size <= 1 {
        return Ok(BasisSet::constant(ground.clone()));
    }
    let basis = match ground.dim() {
        1 => BasisSet::bspline_1d_uniform(ground.clone(), 3, size)?,
        2 => BasisSet::tensor_2d_uniform(ground.clone(), 3, [size, size])?,
        d => return Err(BasisError::NotTwoDimensional(d).into()),
    };
    Ok(basis)
}

/// Fits every candidate size and returns the DIC-minimizing posterior along
/// with the per-candidate scores; ties break toward the smaller basis.
pub fn select_basis_by_dic(
    data: &ObservedData<'_>,
    ground: &GroundSet,
    candidate_sizes: &[usize],
    prior: &GaussianPrior,
    m_draws: usize,
    seed: u64,
) -> Result<(CoefficientPosterior, Vec<(usize, f64)>), InferenceError> {
    if candidate_sizes.is_empty() {
        return Err(InferenceError::NoCandidates);
    }
    let mut best: Option<(CoefficientPosterior, usize, f64)> = None;
    let mut scores = Vec::with_capacity(candidate_sizes.len());
    let mut last_error = String::new();
    for (k, &size) in candidate_sizes.iter().enumerate() {
        let fit = match fit_candidate(data, ground, size, prior) {
            Ok(fit) => fit,
            Err(e) => {
                last_error = e.to_string();
                continue;
            }
        };
        let score = match dic(&fit, data, m_draws, subseed(seed, k as u64)) {
            Ok(s) => s,
            Err(e) => {
                last_error = e.to_string();
                continue;
            }
        };
        scores.push((size, score));
        let replace = match &best {
            None => true,
            Some((_, best_size, best_score)) => {
                score < *best_score || (score == *best_score && size < *best_size)
            }
        };
        if replace {
            best = Some((fit, size, score));
        }
    }
    match best {
        Some((fit, _, _)) => Ok((fit, scores)),
        None => Err(InferenceError::AllCandidatesFailed(last_error)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn grid_1d(j: usize) -> Vec<Vec<f64>> {
        (0..j).map(|k| vec![k as f64 / (j - 1) as f64]).collect()
    }

    #[test]
    fn constant_data_recovers_the_level() {
        let points = grid_1d(20);
        let values = vec![vec![5.0; 20]; 3];
        let data = GaussianObservations::new(points, values).unwrap();
        let basis = BasisSet::constant(GroundSet::unit_interval());
        let post = fit_gaussian(&data, &basis, &GaussianPrior::default()).unwrap();
        assert!((post.mean[0] - 5.0).abs() < 1e-3);
    }

    #[test]
    fn tight_slope_prior_shrinks_slopes_to_zero() {
        let points = grid_1d(30);
        let values: Vec<Vec<f64>> = vec![points.iter().map(|t| (6.0 * t[0]).sin()).collect(); 2];
        let data = GaussianObservations::new(points, values).unwrap();
        let basis = BasisSet::bspline_1d_uniform(GroundSet::unit_interval(), 3, 8).unwrap();
        let prior = GaussianPrior {
            slope_variance: 1e-12,
            ..GaussianPrior::default()
        };
        let post = fit_gaussian(&data, &basis, &prior).unwrap();
        for b in &post.mean[1..] {
            assert!(b.abs() < 1e-6, "slope {b} not shrunk");
        }
    }

    /// Dense normal-equations oracle: solve (Q + ΦᵀΦ)m = Φᵀy directly on the
    /// fully stacked design, no sufficient-statistic shortcut.
    #[test]
    fn conjugate_posterior_matches_normal_equations_oracle() {
        let mut rng = rng_from_seed(9);
        let points = grid_1d(17);
        let values: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..17).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let data = GaussianObservations::new(points.clone(), values.clone()).unwrap();
        let basis = BasisSet::bspline_1d_uniform(GroundSet::unit_interval(), 3, 6).unwrap();
        let prior = GaussianPrior::default();
        let post = fit_gaussian(&data, &basis, &prior).unwrap();

        let mut stacked_points = Vec::new();
        let mut stacked_values = Vec::new();
        for row in &values {
            for (j, &v) in row.iter().enumerate() {
                stacked_points.push(points[j].clone());
                stacked_values.push(v);
            }
        }
        let phi = design_matrix(&basis, &stacked_points).unwrap();
        let k = phi.ncols();
        let mut a = phi.transpose() * &phi;
        let q = prior.precision_diag(k);
        for i in 0..k {
            a[(i, i)] += q[i];
        }
        let y = DVector::from_vec(stacked_values);
        let rhs = phi.transpose() * &y;
        let oracle = a.clone().lu().solve(&rhs).unwrap();
        for i in 0..k {
            assert_relative_eq!(post.mean[i], oracle[i], epsilon = 1e-8);
        }

        // Noise-rate bookkeeping matches the stacked quadratic form.
        let quad = (a * &oracle).dot(&oracle);
        let expected_rate = prior.noise_rate + 0.5 * (y.dot(&y) - quad);
        match post.likelihood {
            PosteriorLikelihood::GaussianConjugate { noise_rate, .. } => {
                assert_relative_eq!(noise_rate, expected_rate, epsilon = 1e-8);
            }
            _ => panic!("wrong likelihood"),
        }
    }

    #[test]
    fn homogeneous_pattern_matches_poisson_mle_oracle() {
        // 200 uniform points on [0,1]: the MLE of a constant log intensity is
        // log(N / |T|) = log 200.
        let mut rng = rng_from_seed(3);
        let points: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen_range(0.0..1.0)]).collect();
        let pattern = PointPattern::new(points);
        let basis = BasisSet::constant(GroundSet::unit_interval());
        let post =
            fit_poisson(&pattern, &basis, &GaussianPrior::default(), 128).unwrap();
        let mle = (200.0f64).ln();
        let sd = post.covariance_factor[(0, 0)].abs();
        assert!(
            (post.mean[0] - mle).abs() < 2.0 * sd.max(1e-3),
            "mode {} vs MLE {mle} (sd {sd})",
            post.mean[0]
        );
    }

    #[test]
    fn empty_pattern_fits_a_low_finite_intensity() {
        let pattern = PointPattern::new(Vec::new());
        let basis = BasisSet::constant(GroundSet::unit_interval());
        let post =
            fit_poisson(&pattern, &basis, &GaussianPrior::default(), 64).unwrap();
        assert!(post.mean[0].is_finite());
        assert!(post.mean[0] < 0.0, "no data should not pull intensity up");
    }

    #[test]
    fn laplace_mode_is_a_stationary_point() {
        let mut rng = rng_from_seed(21);
        let points: Vec<Vec<f64>> = (0..300)
            .map(|_| vec![rng.gen_range(0.0..1.0f64).powf(0.7)])
            .collect();
        let pattern = PointPattern::new(points);
        let basis = BasisSet::bspline_1d_uniform(GroundSet::unit_interval(), 3, 6).unwrap();
        let prior = GaussianPrior::default();
        let post = fit_poisson(&pattern, &basis, &prior, 128).unwrap();

        // Recompute the gradient of the log posterior at the returned mode.
        let (centers, counts, v) = bin_pattern(&pattern, &GroundSet::unit_interval(), 128).unwrap();
        let phi = design_matrix(&basis, &centers).unwrap();
        let beta = DVector::from_vec(post.mean.clone());
        let eta = &phi * &beta;
        let mu: DVector<f64> = eta.map(|e| v * e.exp());
        let y = DVector::from_vec(counts);
        let mut grad = phi.transpose() * (y - mu);
        let q = prior.precision_diag(phi.ncols());
        for i in 0..phi.ncols() {
            grad[i] -= q[i] * beta[i];
        }
        assert!(grad.amax() < 1e-6, "gradient at mode: {}", grad.amax());
    }

    #[test]
    fn sampling_is_deterministic_and_obeys_the_lln() {
        let points = grid_1d(25);
        let mut rng = rng_from_seed(12);
        let values: Vec<Vec<f64>> = (0..5)
            .map(|_| {
                points
                    .iter()
                    .map(|t| t[0] * 2.0 + rng.gen_range(-0.1..0.1))
                    .collect()
            })
            .collect();
        let data = GaussianObservations::new(points, values).unwrap();
        let basis = BasisSet::bspline_1d_uniform(GroundSet::unit_interval(), 3, 5).unwrap();
        let post = fit_gaussian(&data, &basis, &GaussianPrior::default()).unwrap();

        let a = sample_coefficients(&post, 50, 77).unwrap();
        let b = sample_coefficients(&post, 50, 77).unwrap();
        assert_eq!(a, b);

        let m = 10_000;
        let draws = sample_coefficients(&post, m, 1234).unwrap();
        let k = post.mean.len();
        for i in 0..k {
            let mean_i: f64 = draws.iter().map(|d| d[i]).sum::<f64>() / m as f64;
            let var_i: f64 = draws
                .iter()
                .map(|d| (d[i] - mean_i) * (d[i] - mean_i))
                .sum::<f64>()
                / m as f64;
            let tol = 4.0 * (var_i / m as f64).sqrt() + 1e-9;
            assert!(
                (mean_i - post.mean[i]).abs() < tol,
                "component {i}: {} vs {}",
                mean_i,
                post.mean[i]
            );
        }
    }

    #[test]
    fn degenerate_posterior_gives_identical_trajectories() {
        let basis = BasisSet::bspline_1d_uniform(GroundSet::unit_interval(), 3, 5).unwrap();
        let mean: Vec<f64> = (0..basis.num_basis() + 1).map(|i| i as f64 * 0.1).collect();
        let post =
            CoefficientPosterior::degenerate(basis.clone(), LinkFunction::Identity, mean).unwrap();
        let pairs = posterior_trajectories(&post, &post, 5, 3).unwrap();
        let reference = post.mean_parameter();
        for (fx, fy) in &pairs {
            for k in 0..11 {
                let t = [k as f64 / 10.0];
                assert_eq!(fx.evaluate(&t).unwrap(), reference.evaluate(&t).unwrap());
                assert_eq!(fy.evaluate(&t).unwrap(), reference.evaluate(&t).unwrap());
            }
        }
    }

    #[test]
    fn trajectories_reject_ground_mismatch() {
        let b1 = BasisSet::constant(GroundSet::unit_interval());
        let b2 = BasisSet::constant(GroundSet::interval(0.0, 2.0).unwrap());
        let p1 = CoefficientPosterior::degenerate(b1, LinkFunction::Identity, vec![0.0]).unwrap();
        let p2 = CoefficientPosterior::degenerate(b2, LinkFunction::Identity, vec![0.0]).unwrap();
        assert!(matches!(
            posterior_trajectories(&p1, &p2, 3, 0),
            Err(InferenceError::GroundMismatch)
        ));
    }

    #[test]
    fn log_link_trajectories_are_positive() {
        let mut rng = rng_from_seed(8);
        let points: Vec<Vec<f64>> = (0..150).map(|_| vec![rng.gen_range(0.0..1.0)]).collect();
        let pattern = PointPattern::new(points);
        let basis = BasisSet::bspline_1d_uniform(GroundSet::unit_interval(), 3, 5).unwrap();
        let post = fit_poisson(&pattern, &basis, &GaussianPrior::default(), 64).unwrap();
        let pairs = posterior_trajectories(&post, &post, 20, 5).unwrap();
        for (fx, _) in &pairs {
            for k in 0..=20 {
                assert!(fx.evaluate(&[k as f64 / 20.0]).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn point_mass_dic_equals_deviance_at_the_mean() {
        let points = grid_1d(10);
        let values = vec![vec![1.0; 10]; 2];
        let data = GaussianObservations::new(points, values).unwrap();
        let basis = BasisSet::constant(GroundSet::unit_interval());
        let mut post = fit_gaussian(&data, &basis, &GaussianPrior::default()).unwrap();
        // Collapse the posterior: p_D = 0 so DIC = D(mean). Freeze the noise
        // posterior too so the plug-in variance is unchanged.
        post.covariance_factor.fill(0.0);
        if let PosteriorLikelihood::GaussianConjugate { noise_shape, .. } = &mut post.likelihood {
            *noise_shape = 1e12;
        }
        let d = dic(&post, &ObservedData::Gaussian(&data), 200, 4).unwrap();
        let dev = super::deviance(&post, &ObservedData::Gaussian(&data), &post.mean).unwrap();
        assert_relative_eq!(d, dev, epsilon = 1e-9);
    }

    #[test]
    fn duplicated_rows_double_the_deviance() {
        let points = grid_1d(12);
        let mut rng = rng_from_seed(2);
        let row: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let single = GaussianObservations::new(points.clone(), vec![row.clone()]).unwrap();
        let doubled = GaussianObservations::new(points, vec![row.clone(), row]).unwrap();
        let basis = BasisSet::bspline_1d_uniform(GroundSet::unit_interval(), 3, 4).unwrap();
        let post = fit_gaussian(&single, &basis, &GaussianPrior::default()).unwrap();
        let d1 = super::deviance(&post, &ObservedData::Gaussian(&single), &post.mean).unwrap();
        let d2 = super::deviance(&post, &ObservedData::Gaussian(&doubled), &post.mean).unwrap();
        assert_relative_eq!(d2, 2.0 * d1, epsilon = 1e-9);
    }

    #[test]
    fn dic_selection_prefers_the_flexible_basis_on_sinusoidal_truth() {
        let points = grid_1d(40);
        let mut rng = rng_from_seed(31);
        let values: Vec<Vec<f64>> = (0..10)
            .map(|_| {
                points
                    .iter()
                    .map(|t| 4.0 * (10.0 * t[0]).cos() + rng.gen_range(-0.5..0.5))
                    .collect()
            })
            .collect();
        let data = GaussianObservations::new(points, values).unwrap();
        let ground = GroundSet::unit_interval();
        let (best, scores) = select_basis_by_dic(
            &ObservedData::Gaussian(&data),
            &ground,
            &[1, 15],
            &GaussianPrior::default(),
            200,
            6,
        )
        .unwrap();
        assert_eq!(best.basis.num_basis(), 15);
        assert_eq!(scores.len(), 2);
        assert!(scores[1].1 < scores[0].1);
    }

    #[test]
    fn dic_selection_single_candidate_and_tie_break() {
        let points = grid_1d(15);
        let values = vec![vec![0.3; 15]; 2];
        let data = GaussianObservations::new(points, values).unwrap();
        let ground = GroundSet::unit_interval();
        let (only, _) = select_basis_by_dic(
            &ObservedData::Gaussian(&data),
            &ground,
            &[7],
            &GaussianPrior::default(),
            50,
            0,
        )
        .unwrap();
        assert_eq!(only.basis.num_basis(), 7);

        // Identical candidates: deterministic outcome regardless of order.
        let (a, scores) = select_basis_by_dic(
            &ObservedData::Gaussian(&data),
            &ground,
            &[7, 7],
            &GaussianPrior::default(),
            50,
            0,
        )
        .unwrap();
        assert_eq!(a.basis.num_basis(), 7);
        assert_eq!(scores.len(), 2);
    }

    #[test]
    fn posterior_serializes_round_trip() {
        let points = grid_1d(10);
        let values = vec![vec![2.0; 10]];
        let data = GaussianObservations::new(points, values).unwrap();
        let basis = BasisSet::bspline_1d_uniform(GroundSet::unit_interval(), 2, 4).unwrap();
        let post = fit_gaussian(&data, &basis, &GaussianPrior::default()).unwrap();
        let json = serde_json::to_string(&post).unwrap();
        let back: CoefficientPosterior = serde_json::from_str(&json).unwrap();
        assert_eq!(back.mean, post.mean);
        assert_eq!(back.covariance_factor, post.covariance_factor);
    }
}
