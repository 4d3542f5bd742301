//! Evaluation harness: the posterior-mean global Hausdorff error (GHE) and
//! the end-to-end Monte Carlo study over both synthetic scenarios.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::LinkFunction;
use crate::dissimilarity::{
    brute_force_bmd, solve_bmd, BmdSolution, DissimilarityObjective, OptConfig, SolveError,
};
use crate::geometry::{self, GeometryError, GroundSet};
use crate::inference::{
    fit_gaussian, fit_poisson, posterior_trajectories, CoefficientPosterior, GaussianPrior,
    InferenceError,
};
use crate::rng::subseed;
use crate::simulate::{
    sample_gp, sample_poisson_process, scenario1_pair, scenario2_intensity, MaternParams,
    Scenario2Config, SimulateError,
};

#[derive(Error, Debug)]
pub enum MetricsError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("budget grid must be nonempty, strictly increasing, inside (0, |T|]")]
    BadBudgetGrid,
    #[error("per-budget draw lists must align with the budget grid")]
    MisalignedDraws,
    #[error("{failed} of {total} replicates failed (more than 10%); first error: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },
    #[error("study configuration is invalid: {0}")]
    BadConfig(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which synthetic scenario the study runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum McScenario {
    /// Replicated Gaussian curves on a J-point grid over [0, 1].
    GaussianCurves { n: usize, j: usize },
    /// Paired point patterns on [-3, 3]² with intensities (λ_X, δ·λ_X).
    PointPatterns { gamma: f64, delta: f64 },
}

/// Full study configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub scenario: McScenario,
    /// Number of replicates M.
    pub replicates: usize,
    /// Posterior draws m per replicate and budget.
    pub posterior_draws: usize,
    /// Budget grid for the GHE integral; empty selects the default 10-point
    /// grid on [0.05, 0.5]·|T|.
    #[serde(default)]
    pub c_grid: Vec<f64>,
    pub base_seed: u64,
    /// Basis functions per dimension; `None` picks min(J − 2, 15) for curves
    /// and 8 for patterns.
    #[serde(default)]
    pub basis_size: Option<usize>,
    /// Norm order; `None` picks 1 for curves and 2 for patterns.
    #[serde(default)]
    pub norm_order: Option<f64>,
    /// Gaussian-process error covariance for the curves scenario.
    #[serde(default)]
    pub matern: Option<MaternParams>,
}

impl MonteCarloConfig {
    pub fn ground(&self) -> GroundSet {
        match self.scenario {
            McScenario::GaussianCurves { .. } => GroundSet::unit_interval(),
            McScenario::PointPatterns { .. } => GroundSet::square(-3.0, 3.0).unwrap(),
        }
    }

    pub fn norm_order(&self) -> f64 {
        self.norm_order.unwrap_or(match self.scenario {
            McScenario::GaussianCurves { .. } => 1.0,
            McScenario::PointPatterns { .. } => 2.0,
        })
    }

    pub fn basis_size(&self) -> usize {
        self.basis_size.unwrap_or(match self.scenario {
            McScenario::GaussianCurves { j, .. } => j.saturating_sub(2).clamp(1, 15),
            McScenario::PointPatterns { .. } => 8,
        })
    }

    pub fn effective_c_grid(&self) -> Vec<f64> {
        if !self.c_grid.is_empty() {
            return self.c_grid.clone();
        }
        default_c_grid(&self.ground())
    }

    fn validate(&self) -> Result<(), MetricsError> {
        if self.replicates == 0 {
            return Err(MetricsError::BadConfig("replicates must be >= 1"));
        }
        if self.posterior_draws == 0 {
            return Err(MetricsError::BadConfig("posterior_draws must be >= 1"));
        }
        let grid = self.effective_c_grid();
        let volume = self.ground().volume();
        let ok = !grid.is_empty()
            && grid.windows(2).all(|w| w[0] < w[1])
            && grid.iter().all(|&c| c > 0.0 && c <= volume);
        if !ok {
            return Err(MetricsError::BadBudgetGrid);
        }
        match self.scenario {
            McScenario::GaussianCurves { n, j } => {
                if n == 0 || j < 2 {
                    return Err(MetricsError::BadConfig("need n >= 1 and J >= 2"));
                }
            }
            McScenario::PointPatterns { gamma, delta } => {
                if !(gamma > 0.0) || !(delta > 0.0) {
                    return Err(MetricsError::BadConfig("gamma, delta must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Ten budgets spanning [0.05, 0.5]·|T|.
pub fn default_c_grid(ground: &GroundSet) -> Vec<f64> {
    let volume = ground.volume();
    (0..10)
        .map(|k| volume * (0.05 + 0.45 * k as f64 / 9.0))
        .collect()
}

/// Per-replicate GHE values and their summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GheResult {
    /// Successful replicate indices (0-based) aligned with `values`.
    pub replicate_ids: Vec<usize>,
    pub values: Vec<f64>,
    pub failed: usize,
}

impl GheResult {
    pub fn median(&self) -> f64 {
        crate::dissimilarity::median(self.values.clone())
    }

    pub fn quantile(&self, q: f64) -> f64 {
        let mut v = self.values.clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let idx = ((v.len() - 1) as f64 * q.clamp(0.0, 1.0)).round() as usize;
        v[idx]
    }
}

/// One replicate's GHE: the per-draw Hausdorff distance to the truth ball,
/// integrated over the budget grid by trapezoid rule and averaged over draws.
///
/// `draws_per_c[k]` holds the m posterior solutions at budget `c_grid[k]`; a
/// single-point grid skips the integral and returns the average distance
/// itself.
pub fn ghe_replicate(
    truth: &[BmdSolution],
    draws_per_c: &[Vec<BmdSolution>],
    c_grid: &[f64],
    p: f64,
    ground: &GroundSet,
) -> Result<f64, MetricsError> {
    if c_grid.is_empty() || c_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MetricsError::BadBudgetGrid);
    }
    if truth.len() != c_grid.len() || draws_per_c.len() != c_grid.len() {
        return Err(MetricsError::MisalignedDraws);
    }
    let m = draws_per_c[0].len();
    if m == 0 || draws_per_c.iter().any(|d| d.len() != m) {
        return Err(MetricsError::MisalignedDraws);
    }

    let mut total = 0.0;
    for i in 0..m {
        let distances: Vec<f64> = truth
            .iter()
            .zip(draws_per_c)
            .map(|(t, draws)| {
                geometry::hausdorff(&t.ball(p), &draws[i].ball(p), ground, 720)
            })
            .collect::<Result<_, _>>()?;
        total += trapezoid(c_grid, &distances);
    }
    Ok(total / m as f64)
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    if x.len() == 1 {
        return y[0];
    }
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// The analytic-truth solutions per budget, brute-force seeded and polished
/// by the continuous solver.
pub fn truth_solutions(
    obj: &DissimilarityObjective,
    c_grid: &[f64],
) -> Result<Vec<BmdSolution>, MetricsError> {
    let d = obj.ground().dim();
    let (t_grid, r_grid) = if d == 1 { (201, 51) } else { (61, 21) };
    let mut out = Vec::with_capacity(c_grid.len());
    for &c in c_grid {
        let coarse = brute_force_bmd(obj, c, t_grid, r_grid)?;
        let cfg = OptConfig {
            warm_start: Some((coarse.center.clone(), coarse.radius)),
            ..OptConfig::default()
        };
        let refined = solve_bmd(obj, c, &cfg)?;
        out.push(if refined.index >= coarse.index {
            refined
        } else {
            coarse
        });
    }
    Ok(out)
}

struct ReplicateSetup {
    obj_truth: Arc<Vec<BmdSolution>>,
    ground: GroundSet,
    p: f64,
    nodes: usize,
    c_grid: Vec<f64>,
}

/// Runs the full Monte Carlo protocol: simulate, fit, draw posterior BMDs,
/// and score each replicate with the GHE against the analytic truth.
pub fn run_mc_study(cfg: &MonteCarloConfig) -> Result<GheResult, MetricsError> {
    cfg.validate()?;
    let ground = cfg.ground();
    let p = cfg.norm_order();
    let c_grid = cfg.effective_c_grid();
    let nodes = if ground.dim() == 1 { 101 } else { 41 };

    // Truth BMDs are scenario properties: computed once, shared by replicates.
    let (truth_x, truth_y): (Arc<dyn crate::basis::ParamSurface>, Arc<dyn crate::basis::ParamSurface>) =
        match cfg.scenario {
            McScenario::GaussianCurves { .. } => {
                let (x, y) = scenario1_pair();
                (Arc::new(x), Arc::new(y))
            }
            McScenario::PointPatterns { gamma, delta } => {
                let sc = Scenario2Config::new(gamma, delta)?;
                let (x, y) = scenario2_intensity(&sc);
                (Arc::new(x), Arc::new(y))
            }
        };
    let truth_obj = DissimilarityObjective::new(truth_x, truth_y, p, ground.clone())?
        .with_nodes_per_dim(nodes);
    let setup = ReplicateSetup {
        obj_truth: Arc::new(truth_solutions(&truth_obj, &c_grid)?),
        ground,
        p,
        nodes,
        c_grid,
    };

    let outcomes: Vec<Result<f64, MetricsError>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|j| run_replicate(cfg, &setup, j))
        .collect();

    let mut replicate_ids = Vec::new();
    let mut values = Vec::new();
    let mut failed = 0usize;
    let mut first_error = String::new();
    for (j, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(v) => {
                replicate_ids.push(j);
                values.push(v);
            }
            Err(e) => {
                if first_error.is_empty() {
                    first_error = e.to_string();
                }
                failed += 1;
            }
        }
    }
    if failed * 10 > cfg.replicates {
        return Err(MetricsError::TooManyFailures {
            failed,
            total: cfg.replicates,
            first: first_error,
        });
    }
    Ok(GheResult {
        replicate_ids,
        values,
        failed,
    })
}

fn run_replicate(
    cfg: &MonteCarloConfig,
    setup: &ReplicateSetup,
    j: usize,
) -> Result<f64, MetricsError> {
    let replicate_seed = cfg.base_seed + j as u64;
    let (post_x, post_y) = fit_replicate(cfg, replicate_seed)?;

    let m = cfg.posterior_draws;
    let pairs = posterior_trajectories(&post_x, &post_y, m, subseed(replicate_seed, 2))?;
    let objectives: Vec<DissimilarityObjective> = pairs
        .into_iter()
        .map(|(fx, fy)| {
            DissimilarityObjective::new(Arc::new(fx), Arc::new(fy), setup.p, setup.ground.clone())
                .map(|o| o.with_nodes_per_dim(setup.nodes))
        })
        .collect::<Result<_, _>>()?;

    // Posterior-mean solutions per budget give the warm-start chain shared by
    // all draws.
    let mean_obj = DissimilarityObjective::new(
        Arc::new(post_x.mean_parameter()),
        Arc::new(post_y.mean_parameter()),
        setup.p,
        setup.ground.clone(),
    )?
    .with_nodes_per_dim(setup.nodes);
    let mut mean_sols = Vec::with_capacity(setup.c_grid.len());
    let mut warm = OptConfig::default();
    for &c in &setup.c_grid {
        let sol = solve_bmd(&mean_obj, c, &warm)?;
        warm.warm_start = Some((sol.center.clone(), sol.radius));
        mean_sols.push(sol);
    }

    let mut draws_per_c: Vec<Vec<BmdSolution>> =
        vec![Vec::with_capacity(m); setup.c_grid.len()];
    for obj in &objectives {
        let mut warm = (mean_sols[0].center.clone(), mean_sols[0].radius);
        for (k, &c) in setup.c_grid.iter().enumerate() {
            let sol = solve_bmd(obj, c, &OptConfig::warm(warm.0.clone(), warm.1))?;
            warm = (sol.center.clone(), sol.radius);
            draws_per_c[k].push(sol);
        }
    }

    ghe_replicate(
        &setup.obj_truth,
        &draws_per_c,
        &setup.c_grid,
        setup.p,
        &setup.ground,
    )
}

fn fit_replicate(
    cfg: &MonteCarloConfig,
    replicate_seed: u64,
) -> Result<(CoefficientPosterior, CoefficientPosterior), MetricsError> {
    let ground = cfg.ground();
    let prior = GaussianPrior::default();
    match cfg.scenario {
        McScenario::GaussianCurves { n, j } => {
            let grid: Vec<f64> = (0..j).map(|k| k as f64 / (j - 1) as f64).collect();
            let (mx, my) = scenario1_pair();
            let matern = cfg.matern.unwrap_or_default();
            let data_x = sample_gp(&mx, &matern, &grid, n, subseed(replicate_seed, 0))?;
            let data_y = sample_gp(&my, &matern, &grid, n, subseed(replicate_seed, 1))?;
            let basis = crate::inference::basis_for_size(&ground, cfg.basis_size())?;
            let post_x = fit_gaussian(&data_x, &basis, &prior)?;
            let post_y = fit_gaussian(&data_y, &basis, &prior)?;
            debug_assert_eq!(post_x.link, LinkFunction::Identity);
            Ok((post_x, post_y))
        }
        McScenario::PointPatterns { gamma, delta } => {
            let sc = Scenario2Config::new(gamma, delta)?;
            let (lx, ly) = scenario2_intensity(&sc);
            let pat_x = sample_poisson_process(&lx, &ground, subseed(replicate_seed, 0))?;
            let pat_y = sample_poisson_process(&ly, &ground, subseed(replicate_seed, 1))?;
            let basis = crate::inference::basis_for_size(&ground, cfg.basis_size())?;
            let bins = crate::inference::default_bins_per_dim(ground.dim());
            let post_x = fit_poisson(&pat_x, &basis, &prior, bins)?;
            let post_y = fit_poisson(&pat_y, &basis, &prior, bins)?;
            Ok((post_x, post_y))
        }
    }
}

/// Tidy CSV of per-replicate GHE values:
/// `scenario,n,J,gamma,delta,replicate,ghe`, with empty cells for the
/// parameters the scenario does not use.
pub fn write_ghe_csv<W: Write>(
    out: &mut W,
    cfg: &MonteCarloConfig,
    result: &GheResult,
) -> Result<(), MetricsError> {
    writeln!(out, "scenario,n,J,gamma,delta,replicate,ghe")?;
    for (j, v) in result.replicate_ids.iter().zip(&result.values) {
        match cfg.scenario {
            McScenario::GaussianCurves { n, j: jj } => {
                writeln!(out, "1,{n},{jj},,,{j},{v}")?;
            }
            McScenario::PointPatterns { gamma, delta } => {
                writeln!(out, "2,,,{gamma},{delta},{j},{v}")?;
            }
        }
    }
    Ok(())
}

/// Convenience wrapper writing the tidy CSV to a path.
pub fn write_ghe_csv_file(
    path: &Path,
    cfg: &MonteCarloConfig,
    result: &GheResult,
) -> Result<(), MetricsError> {
    let mut file = std::fs::File::create(path)?;
    write_ghe_csv(&mut file, cfg, result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissimilarity::SolveDiagnostics;
    use approx::assert_relative_eq;

    fn sol(center: f64, radius: f64, c: f64) -> BmdSolution {
        BmdSolution {
            center: vec![center],
            radius,
            index: 0.0,
            budget: c,
            diagnostics: SolveDiagnostics {
                starts: 0,
                evaluations: 0,
                non_unique: false,
                non_converged: false,
            },
        }
    }

    #[test]
    fn ghe_is_zero_when_draws_equal_truth() {
        let ground = GroundSet::unit_interval();
        let c_grid = [0.1, 0.2, 0.3];
        let truth: Vec<BmdSolution> =
            c_grid.iter().map(|&c| sol(0.5, c / 2.0, c)).collect();
        let draws: Vec<Vec<BmdSolution>> = truth.iter().map(|t| vec![t.clone(); 4]).collect();
        let g = ghe_replicate(&truth, &draws, &c_grid, 1.0, &ground).unwrap();
        assert_eq!(g, 0.0);
    }

    #[test]
    fn single_budget_shift_returns_the_shift_itself() {
        let ground = GroundSet::unit_interval();
        let c_grid = [0.2];
        let truth = vec![sol(0.4, 0.1, 0.2)];
        let draws = vec![vec![sol(0.55, 0.1, 0.2)]];
        let g = ghe_replicate(&truth, &draws, &c_grid, 1.0, &ground).unwrap();
        assert_relative_eq!(g, 0.15, epsilon = 1e-12);
    }

    #[test]
    fn ghe_matches_direct_summation_oracle() {
        let ground = GroundSet::unit_interval();
        let c_grid = [0.1, 0.25, 0.4];
        let truth: Vec<BmdSolution> = c_grid.iter().map(|&c| sol(0.45, c / 2.0, c)).collect();
        let mut rng = crate::rng::rng_from_seed(4);
        use rand::Rng;
        let m = 5;
        let draws: Vec<Vec<BmdSolution>> = c_grid
            .iter()
            .map(|&c| {
                (0..m)
                    .map(|_| sol(rng.gen_range(0.2..0.8), c / 2.0 * rng.gen_range(0.5..1.0), c))
                    .collect()
            })
            .collect();
        let g = ghe_replicate(&truth, &draws, &c_grid, 1.0, &ground).unwrap();

        // Independent re-summation with explicit interval endpoints.
        let interval_h = |a: &BmdSolution, b: &BmdSolution| -> f64 {
            let lo = ((a.center[0] - a.radius) - (b.center[0] - b.radius)).abs();
            let hi = ((a.center[0] + a.radius) - (b.center[0] + b.radius)).abs();
            lo.max(hi)
        };
        let mut oracle = 0.0;
        for i in 0..m {
            let d: Vec<f64> = (0..c_grid.len())
                .map(|k| interval_h(&truth[k], &draws[k][i]))
                .collect();
            let mut integral = 0.0;
            for k in 0..c_grid.len() - 1 {
                integral += 0.5 * (c_grid[k + 1] - c_grid[k]) * (d[k] + d[k + 1]);
            }
            oracle += integral;
        }
        oracle /= m as f64;
        assert_relative_eq!(g, oracle, epsilon = 1e-12);
    }

    #[test]
    fn ghe_is_invariant_to_draw_order() {
        let ground = GroundSet::unit_interval();
        let c_grid = [0.1, 0.3];
        let truth: Vec<BmdSolution> = c_grid.iter().map(|&c| sol(0.5, c / 2.0, c)).collect();
        let forward = vec![
            vec![sol(0.3, 0.05, 0.1), sol(0.7, 0.05, 0.1)],
            vec![sol(0.35, 0.15, 0.3), sol(0.6, 0.15, 0.3)],
        ];
        let reversed = vec![
            vec![forward[0][1].clone(), forward[0][0].clone()],
            vec![forward[1][1].clone(), forward[1][0].clone()],
        ];
        let a = ghe_replicate(&truth, &forward, &c_grid, 1.0, &ground).unwrap();
        let b = ghe_replicate(&truth, &reversed, &c_grid, 1.0, &ground).unwrap();
        assert_relative_eq!(a, b, epsilon = 1e-15);
    }

    #[test]
    fn ghe_rejects_bad_inputs() {
        let ground = GroundSet::unit_interval();
        let truth = vec![sol(0.5, 0.05, 0.1)];
        assert!(ghe_replicate(&truth, &[], &[], 1.0, &ground).is_err());
        assert!(
            ghe_replicate(&truth, &[vec![]], &[0.1], 1.0, &ground).is_err(),
            "empty draw list"
        );
        assert!(ghe_replicate(
            &truth,
            &[vec![sol(0.5, 0.05, 0.1)]],
            &[0.3, 0.2],
            1.0,
            &ground
        )
        .is_err());
    }

    #[test]
    fn near_noiseless_study_reaches_low_ghe() {
        let cfg = MonteCarloConfig {
            scenario: McScenario::GaussianCurves { n: 5, j: 40 },
            replicates: 1,
            posterior_draws: 5,
            c_grid: vec![0.1, 0.2, 0.3],
            base_seed: 11,
            basis_size: Some(15),
            norm_order: None,
            matern: Some(MaternParams {
                sigma: 1e-6,
                ..MaternParams::default()
            }),
        };
        let result = run_mc_study(&cfg).unwrap();
        assert_eq!(result.values.len(), 1);
        assert!(
            result.values[0] < 0.02,
            "near-noiseless GHE {}",
            result.values[0]
        );
    }

    #[test]
    fn study_is_deterministic_and_csv_row_count_matches() {
        let cfg = MonteCarloConfig {
            scenario: McScenario::GaussianCurves { n: 5, j: 12 },
            replicates: 2,
            posterior_draws: 3,
            c_grid: vec![0.1, 0.3],
            base_seed: 7,
            basis_size: Some(8),
            norm_order: None,
            matern: None,
        };
        let a = run_mc_study(&cfg).unwrap();
        let b = run_mc_study(&cfg).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.replicate_ids, vec![0, 1]);

        let mut buf = Vec::new();
        write_ghe_csv(&mut buf, &cfg, &a).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + a.values.len());
        assert!(text.starts_with("scenario,n,J,gamma,delta,replicate,ghe"));
    }

    #[test]
    fn config_validation_catches_bad_grids() {
        let mut cfg = MonteCarloConfig {
            scenario: McScenario::GaussianCurves { n: 2, j: 8 },
            replicates: 1,
            posterior_draws: 1,
            c_grid: vec![0.3, 0.2],
            base_seed: 0,
            basis_size: None,
            norm_order: None,
            matern: None,
        };
        assert!(run_mc_study(&cfg).is_err());
        cfg.c_grid = vec![0.2, 1.5];
        assert!(run_mc_study(&cfg).is_err(), "budget beyond |T|");
        cfg.c_grid = vec![];
        cfg.replicates = 0;
        assert!(run_mc_study(&cfg).is_err());
    }
}
