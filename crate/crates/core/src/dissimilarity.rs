//! The dissimilarity objective, the ball-of-maximum-dissimilarity solver, its
//! multi-objective and averaged variants, and brute-force oracles.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::ParamSurface;
use crate::geometry::{self, GeometryError, GroundSet, LpBall};
use crate::inference::{self, CoefficientPosterior, InferenceError};
use crate::optim::{golden_section_max, nelder_mead_max, NelderMeadConfig};

#[derive(Error, Debug)]
pub enum SolveError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Inference(#[from] InferenceError),
    #[error("scalarization weights must be strictly positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("scalarized problem needs at least one objective")]
    EmptyObjectives,
    #[error("objectives must share the same ground set, norm order, and mode")]
    MismatchedObjectives,
    #[error("operation requires an objective in {expected:?} mode")]
    ModeMismatch { expected: ObjectiveMode },
    #[error("grid must contain at least {min} points")]
    GridTooCoarse { min: usize },
    #[error("budget grid must be nonempty and strictly increasing")]
    BadBudgetGrid,
    #[error("posterior sample count m must be at least 1")]
    ZeroDraws,
}

/// How a ball is scored: the restricted $L^p$ sub-norm, or its average
/// (integral divided by the clipped ball measure).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveMode {
    Subnorm,
    Averaged,
}

/// $F\{B(t,r)\} = \|\theta_X - \theta_Y\|_p^{(B \cap T)}$ evaluated by tensor
/// midpoint quadrature over the clipped ball.
#[derive(Clone)]
pub struct DissimilarityObjective {
    theta_x: Arc<dyn ParamSurface>,
    theta_y: Arc<dyn ParamSurface>,
    p: f64,
    ground: GroundSet,
    nodes_per_dim: usize,
    mode: ObjectiveMode,
}

/// Default quadrature resolution per dimension.
pub fn default_nodes_per_dim(dim: usize) -> usize {
    if dim == 1 {
        101
    } else {
        61
    }
}

impl DissimilarityObjective {
    pub fn new(
        theta_x: Arc<dyn ParamSurface>,
        theta_y: Arc<dyn ParamSurface>,
        p: f64,
        ground: GroundSet,
    ) -> Result<Self, SolveError> {
        if !(p >= 1.0) {
            return Err(GeometryError::InvalidNormOrder(p).into());
        }
        let nodes = default_nodes_per_dim(ground.dim());
        Ok(Self {
            theta_x,
            theta_y,
            p,
            ground,
            nodes_per_dim: nodes,
            mode: ObjectiveMode::Subnorm,
        })
    }

    /// Averaged mode fixes p = 1 and $L^1$ balls.
    pub fn averaged(
        theta_x: Arc<dyn ParamSurface>,
        theta_y: Arc<dyn ParamSurface>,
        ground: GroundSet,
    ) -> Self {
        let nodes = default_nodes_per_dim(ground.dim());
        Self {
            theta_x,
            theta_y,
            p: 1.0,
            ground,
            nodes_per_dim: nodes,
            mode: ObjectiveMode::Averaged,
        }
    }

    pub fn with_nodes_per_dim(mut self, nodes: usize) -> Self {
        self.nodes_per_dim = nodes.max(1);
        self
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    pub fn mode(&self) -> ObjectiveMode {
        self.mode
    }

    fn difference(&self, t: &[f64]) -> f64 {
        (self.theta_x.value(t) - self.theta_y.value(t)).abs()
    }

    /// Restricted sub-norm of $\theta_X - \theta_Y$ over the clipped ball.
    pub fn subnorm(&self, ball: &LpBall) -> Result<f64, SolveError> {
        let region = geometry::clip_to_ground(ball, &self.ground)?;
        Ok(self.integrate(ball, &region.lower, &region.upper).0)
    }

    /// Ball-averaged variant; at r = 0 this is the pointwise limit
    /// $|\theta_X(t) - \theta_Y(t)|$.
    pub fn averaged_subnorm(&self, ball: &LpBall) -> Result<f64, SolveError> {
        let region = geometry::clip_to_ground(ball, &self.ground)?;
        if ball.radius == 0.0 || region.is_degenerate() {
            return Ok(self.difference(&ball.center));
        }
        let (integral, measure) = self.integrate_abs(ball, &region.lower, &region.upper);
        if measure <= 0.0 {
            return Ok(self.difference(&ball.center));
        }
        Ok(integral / measure)
    }

    /// Dispatches on the objective's mode.
    pub fn eval_ball(&self, center: &[f64], radius: f64) -> f64 {
        let ball = LpBall {
            center: center.to_vec(),
            radius,
            p: self.p,
        };
        match self.mode {
            ObjectiveMode::Subnorm => self.subnorm(&ball).unwrap_or(0.0),
            ObjectiveMode::Averaged => self
                .averaged_subnorm(&ball)
                .unwrap_or_else(|_| self.difference(center)),
        }
    }

    /// Midpoint quadrature of $|\Delta|^p$ over the clipped ball, returned as
    /// the sub-norm (already raised to 1/p).
    fn integrate(&self, ball: &LpBall, lower: &[f64], upper: &[f64]) -> (f64, f64) {
        let (sum, measure) = self.accumulate(ball, lower, upper, self.p);
        let value = if self.p == 1.0 {
            sum
        } else {
            sum.powf(1.0 / self.p)
        };
        (value, measure)
    }

    fn integrate_abs(&self, ball: &LpBall, lower: &[f64], upper: &[f64]) -> (f64, f64) {
        self.accumulate(ball, lower, upper, 1.0)
    }

    /// Shared quadrature core: returns (sum of |Δ|^power · w, clipped measure).
    fn accumulate(&self, ball: &LpBall, lower: &[f64], upper: &[f64], power: f64) -> (f64, f64) {
        let d = self.ground.dim();
        let n = self.nodes_per_dim;
        if lower.iter().zip(upper).any(|(lo, hi)| hi <= lo) {
            return (0.0, 0.0);
        }
        match d {
            1 => {
                let h = (upper[0] - lower[0]) / n as f64;
                let mut sum = 0.0;
                let mut t = [0.0f64];
                for i in 0..n {
                    t[0] = lower[0] + (i as f64 + 0.5) * h;
                    let diff = self.difference(&t);
                    sum += if power == 1.0 {
                        diff
                    } else if power == 2.0 {
                        diff * diff
                    } else {
                        diff.powf(power)
                    };
                }
                (sum * h, (upper[0] - lower[0]))
            }
            2 => {
                let hx = (upper[0] - lower[0]) / n as f64;
                let hy = (upper[1] - lower[1]) / n as f64;
                let w = hx * hy;
                let mut sum = 0.0;
                let mut inside = 0usize;
                let mut t = [0.0f64; 2];
                for i in 0..n {
                    t[0] = lower[0] + (i as f64 + 0.5) * hx;
                    for j in 0..n {
                        t[1] = lower[1] + (j as f64 + 0.5) * hy;
                        if !ball.contains(&t) {
                            continue;
                        }
                        inside += 1;
                        let diff = self.difference(&t);
                        sum += if power == 1.0 {
                            diff
                        } else if power == 2.0 {
                            diff * diff
                        } else {
                            diff.powf(power)
                        };
                    }
                }
                (sum * w, inside as f64 * w)
            }
            _ => {
                // Generic tensor loop for d >= 3.
                let steps: Vec<f64> = lower
                    .iter()
                    .zip(upper)
                    .map(|(lo, hi)| (hi - lo) / n as f64)
                    .collect();
                let w: f64 = steps.iter().product();
                let mut idx = vec![0usize; d];
                let mut t = vec![0.0f64; d];
                let mut sum = 0.0;
                let mut inside = 0usize;
                loop {
                    for k in 0..d {
                        t[k] = lower[k] + (idx[k] as f64 + 0.5) * steps[k];
                    }
                    if ball.contains(&t) {
                        inside += 1;
                        sum += self.difference(&t).powf(power);
                    }
                    let mut k = 0;
                    loop {
                        idx[k] += 1;
                        if idx[k] < n {
                            break;
                        }
                        idx[k] = 0;
                        k += 1;
                        if k == d {
                            return (sum * w, inside as f64 * w);
                        }
                    }
                }
            }
        }
    }
}

/// Weighted sum of sub-norm objectives over a shared ball family.
pub struct ScalarizedObjective {
    pub objectives: Vec<DissimilarityObjective>,
    pub weights: Vec<f64>,
}

impl ScalarizedObjective {
    pub fn new(
        objectives: Vec<DissimilarityObjective>,
        weights: Vec<f64>,
    ) -> Result<Self, SolveError> {
        if objectives.is_empty() || objectives.len() != weights.len() {
            return Err(SolveError::EmptyObjectives);
        }
        if let Some(&w) = weights.iter().find(|w| !(**w > 0.0)) {
            return Err(SolveError::NonPositiveWeight(w));
        }
        let first = &objectives[0];
        if objectives.iter().any(|o| {
            o.ground != first.ground || o.p != first.p || o.mode != first.mode
        }) {
            return Err(SolveError::MismatchedObjectives);
        }
        Ok(Self {
            objectives,
            weights,
        })
    }

    pub fn eval_ball(&self, center: &[f64], radius: f64) -> f64 {
        self.objectives
            .iter()
            .zip(&self.weights)
            .map(|(o, w)| w * o.eval_ball(center, radius))
            .sum()
    }
}

/// Solver diagnostics carried on every solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub starts: usize,
    pub evaluations: usize,
    /// Top multistart optima nearly tie in value but sit far apart: the
    /// maximizer is likely non-unique.
    pub non_unique: bool,
    /// Top multistart optima disagree in value and location: the multistart
    /// did not settle on a single optimum.
    pub non_converged: bool,
}

/// Optimal ball for one objective draw.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BmdSolution {
    pub center: Vec<f64>,
    pub radius: f64,
    pub index: f64,
    #[serde(rename = "c")]
    pub budget: f64,
    pub diagnostics: SolveDiagnostics,
}

impl BmdSolution {
    pub fn ball(&self, p: f64) -> LpBall {
        LpBall {
            center: self.center.clone(),
            radius: self.radius,
            p,
        }
    }
}

/// Multistart configuration for the ball search.
#[derive(Debug, Clone)]
pub struct OptConfig {
    /// Coarse scan resolution per dimension used to seed starts; 0 disables
    /// the scan.
    pub scan_per_dim: Option<usize>,
    /// Include the fixed 3^d pattern of quantile centers.
    pub pattern_starts: bool,
    /// Extra start, typically the previous or posterior-mean solution.
    pub warm_start: Option<(Vec<f64>, f64)>,
    pub nelder_mead: NelderMeadConfig,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            scan_per_dim: None,
            pattern_starts: true,
            warm_start: None,
            nelder_mead: NelderMeadConfig::default(),
        }
    }
}

impl OptConfig {
    /// Lightweight settings for per-draw posterior solves: no scan, rely on
    /// the warm start plus the coarse pattern.
    pub fn warm(center: Vec<f64>, radius: f64) -> Self {
        Self {
            scan_per_dim: Some(0),
            pattern_starts: true,
            warm_start: Some((center, radius)),
            nelder_mead: NelderMeadConfig::default(),
        }
    }

    fn scan_resolution(&self, dim: usize) -> usize {
        match self.scan_per_dim {
            Some(n) => n,
            None => {
                if dim == 1 {
                    101
                } else {
                    21
                }
            }
        }
    }
}

struct ScalTerms<'a> {
    weights: &'a [f64],
    objectives: &'a [DissimilarityObjective],
}

impl ScalTerms<'_> {
    fn eval(&self, center: &[f64], radius: f64, evals: &mut usize) -> f64 {
        *evals += 1;
        self.objectives
            .iter()
            .zip(self.weights)
            .map(|(o, w)| w * o.eval_ball(center, radius))
            .sum()
    }
}

/// Solves the ball-of-maximum-dissimilarity problem for one objective.
pub fn solve_bmd(
    obj: &DissimilarityObjective,
    c: f64,
    cfg: &OptConfig,
) -> Result<BmdSolution, SolveError> {
    let weights = [1.0];
    let objectives = std::slice::from_ref(obj);
    solve_scalarized_terms(
        ScalTerms {
            weights: &weights,
            objectives,
        },
        obj.ground(),
        obj.p(),
        obj.mode(),
        c,
        cfg,
    )
}

/// Solves the linearly scalarized multi-objective problem; with a single unit
/// weight this is exactly [`solve_bmd`].
pub fn solve_bmmd(
    scal: &ScalarizedObjective,
    c: f64,
    cfg: &OptConfig,
) -> Result<BmdSolution, SolveError> {
    let first = &scal.objectives[0];
    solve_scalarized_terms(
        ScalTerms {
            weights: &scal.weights,
            objectives: &scal.objectives,
        },
        first.ground(),
        first.p(),
        first.mode(),
        c,
        cfg,
    )
}

/// Hardy-Littlewood variant: maximizes the averaged objective.
pub fn solve_hl_bmd(
    obj: &DissimilarityObjective,
    c: f64,
    cfg: &OptConfig,
) -> Result<BmdSolution, SolveError> {
    if obj.mode() != ObjectiveMode::Averaged {
        return Err(SolveError::ModeMismatch {
            expected: ObjectiveMode::Averaged,
        });
    }
    solve_bmd(obj, c, cfg)
}

fn solve_scalarized_terms(
    terms: ScalTerms<'_>,
    ground: &GroundSet,
    p: f64,
    mode: ObjectiveMode,
    c: f64,
    cfg: &OptConfig,
) -> Result<BmdSolution, SolveError> {
    if !(c >= 0.0) {
        return Err(GeometryError::NegativeBudget(c).into());
    }
    let d = ground.dim();
    let r_max = geometry::max_radius(c, d, p)?;
    let mut evals = 0usize;

    // Candidate start centers.
    let mut starts: Vec<(Vec<f64>, f64)> = Vec::new();
    if let Some((center, radius)) = &cfg.warm_start {
        let mut center = center.clone();
        ground.clamp(&mut center);
        starts.push((center, radius.clamp(0.0, r_max)));
    }
    if cfg.pattern_starts {
        for center in pattern_centers(ground) {
            starts.push((center, r_max));
        }
    }
    let scan_res = cfg.scan_resolution(d);
    if scan_res > 1 {
        let scan_radii: &[f64] = match mode {
            ObjectiveMode::Subnorm => &[1.0],
            ObjectiveMode::Averaged => &[1.0, 0.25, 0.0],
        };
        let mut scored: Vec<(f64, Vec<f64>, f64)> = Vec::new();
        for center in grid_centers(ground, scan_res) {
            for &frac in scan_radii {
                let r = frac * r_max;
                let v = terms.eval(&center, r, &mut evals);
                scored.push((v, center.clone(), r));
            }
        }
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let min_sep = 0.02 * ground.diameter();
        for (_, center, r) in scored {
            if starts.len() >= 8 {
                break;
            }
            let close = starts
                .iter()
                .any(|(s, _)| geometry::lp_distance(s, &center, 2.0) < min_sep);
            if !close {
                starts.push((center, r));
            }
        }
    }
    if starts.is_empty() {
        let mid: Vec<f64> = ground
            .lower()
            .iter()
            .zip(ground.upper())
            .map(|(lo, hi)| 0.5 * (lo + hi))
            .collect();
        starts.push((mid, r_max));
    }

    // The sub-norm is nondecreasing in the radius (integral of a nonnegative
    // integrand over a growing region), so the optimal radius is R_c and the
    // search reduces to the center. The averaged mode has no such monotonicity
    // and searches (t, r) jointly.
    let mut optima: Vec<(Vec<f64>, f64, f64)> = Vec::new(); // (center, radius, value)
    match mode {
        ObjectiveMode::Subnorm => {
            for (center, _) in &starts {
                let res = nelder_mead_max(
                    |t| terms.eval(t, r_max, &mut evals),
                    center,
                    ground.lower(),
                    ground.upper(),
                    &cfg.nelder_mead,
                );
                optima.push((res.x, r_max, res.value));
            }
        }
        ObjectiveMode::Averaged => {
            let mut lower = ground.lower().to_vec();
            let mut upper = ground.upper().to_vec();
            lower.push(0.0);
            upper.push(r_max.max(f64::MIN_POSITIVE));
            for (center, radius) in &starts {
                let mut x0 = center.clone();
                x0.push(*radius);
                let res = nelder_mead_max(
                    |x| terms.eval(&x[..d], x[d], &mut evals),
                    &x0,
                    &lower,
                    &upper,
                    &cfg.nelder_mead,
                );
                let (t, r) = (res.x[..d].to_vec(), res.x[d]);
                optima.push((t, r, res.value));
            }
        }
    }

    optima.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap());
    let best = optima[0].clone();
    let (non_unique, non_converged) = top_two_flags(&optima, ground);

    Ok(BmdSolution {
        center: best.0,
        radius: best.1,
        index: best.2,
        budget: c,
        diagnostics: SolveDiagnostics {
            starts: starts.len(),
            evaluations: evals,
            non_unique,
            non_converged,
        },
    })
}

fn top_two_flags(optima: &[(Vec<f64>, f64, f64)], ground: &GroundSet) -> (bool, bool) {
    if optima.len() < 2 {
        return (false, false);
    }
    let (best, runner) = (&optima[0], &optima[1]);
    let gap = (best.2 - runner.2).abs() / best.2.abs().max(1e-12);
    let dist = geometry::lp_distance(&best.0, &runner.0, 2.0);
    let far = dist > 0.05 * ground.diameter();
    (gap <= 1e-3 && far, gap > 1e-3 && far)
}

fn pattern_centers(ground: &GroundSet) -> Vec<Vec<f64>> {
    let d = ground.dim();
    let quantiles = [1.0 / 6.0, 0.5, 5.0 / 6.0];
    let mut centers = vec![Vec::with_capacity(d)];
    for k in 0..d {
        let (lo, hi) = (ground.lower()[k], ground.upper()[k]);
        let mut next = Vec::with_capacity(centers.len() * quantiles.len());
        for prefix in &centers {
            for q in quantiles {
                let mut c = prefix.clone();
                c.push(lo + q * (hi - lo));
                next.push(c);
            }
        }
        centers = next;
    }
    centers
}

fn grid_centers(ground: &GroundSet, per_dim: usize) -> Vec<Vec<f64>> {
    let d = ground.dim();
    let mut centers = vec![Vec::with_capacity(d)];
    for k in 0..d {
        let (lo, hi) = (ground.lower()[k], ground.upper()[k]);
        let h = (hi - lo) / per_dim as f64;
        let mut next = Vec::with_capacity(centers.len() * per_dim);
        for prefix in &centers {
            for i in 0..per_dim {
                let mut c = prefix.clone();
                c.push(lo + (i as f64 + 0.5) * h);
                next.push(c);
            }
        }
        centers = next;
    }
    centers
}

/// Exhaustive (t, r) grid search; the independent oracle for the solver.
pub fn brute_force_bmd(
    obj: &DissimilarityObjective,
    c: f64,
    t_grid_size: usize,
    r_grid_size: usize,
) -> Result<BmdSolution, SolveError> {
    if t_grid_size < 2 || r_grid_size < 2 {
        return Err(SolveError::GridTooCoarse { min: 2 });
    }
    let d = obj.ground().dim();
    let r_max = geometry::max_radius(c, d, obj.p())?;
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    let mut evals = 0usize;
    for center in linspace_grid(obj.ground(), t_grid_size) {
        for j in 0..r_grid_size {
            let r = r_max * j as f64 / (r_grid_size - 1) as f64;
            evals += 1;
            let v = obj.eval_ball(&center, r);
            if best.as_ref().map_or(true, |b| v > b.2) {
                best = Some((center.clone(), r, v));
            }
        }
    }
    let (center, radius, index) = best.unwrap();
    Ok(BmdSolution {
        center,
        radius,
        index,
        budget: c,
        diagnostics: SolveDiagnostics {
            starts: 0,
            evaluations: evals,
            non_unique: false,
            non_converged: false,
        },
    })
}

fn linspace_grid(ground: &GroundSet, per_dim: usize) -> Vec<Vec<f64>> {
    let d = ground.dim();
    let mut centers = vec![Vec::with_capacity(d)];
    for k in 0..d {
        let (lo, hi) = (ground.lower()[k], ground.upper()[k]);
        let mut next = Vec::with_capacity(centers.len() * per_dim);
        for prefix in &centers {
            for i in 0..per_dim {
                let mut c = prefix.clone();
                c.push(lo + (hi - lo) * i as f64 / (per_dim - 1) as f64);
                next.push(c);
            }
        }
        centers = next;
    }
    centers
}

/// Solves per budget over an increasing grid, warm-starting each budget at
/// the previous optimum.
pub fn dissimilarity_curve(
    obj: &DissimilarityObjective,
    c_grid: &[f64],
    cfg: &OptConfig,
) -> Result<Vec<(f64, f64)>, SolveError> {
    if c_grid.is_empty() || c_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SolveError::BadBudgetGrid);
    }
    let mut out = Vec::with_capacity(c_grid.len());
    let mut cfg = cfg.clone();
    for &c in c_grid {
        let sol = solve_bmd(obj, c, &cfg)?;
        cfg.warm_start = Some((sol.center.clone(), sol.radius));
        out.push((c, sol.index));
    }
    Ok(out)
}

/// Posterior summary of draws of the optimal ball.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorBmdSummary {
    pub mean_center: Vec<f64>,
    pub median_center: Vec<f64>,
    pub mean_radius: f64,
    pub median_radius: f64,
    pub mean_index: f64,
    pub median_index: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PosteriorBmd {
    pub budget: f64,
    pub draws: Vec<BmdSolution>,
    pub summary: PosteriorBmdSummary,
}

impl PosteriorBmd {
    pub fn from_draws(budget: f64, draws: Vec<BmdSolution>) -> Self {
        let d = draws[0].center.len();
        let m = draws.len() as f64;
        let mean_center: Vec<f64> = (0..d)
            .map(|k| draws.iter().map(|s| s.center[k]).sum::<f64>() / m)
            .collect();
        let median_center: Vec<f64> = (0..d)
            .map(|k| median(draws.iter().map(|s| s.center[k]).collect()))
            .collect();
        let summary = PosteriorBmdSummary {
            mean_center,
            median_center,
            mean_radius: draws.iter().map(|s| s.radius).sum::<f64>() / m,
            median_radius: median(draws.iter().map(|s| s.radius).collect()),
            mean_index: draws.iter().map(|s| s.index).sum::<f64>() / m,
            median_index: median(draws.iter().map(|s| s.index).collect()),
        };
        Self {
            budget,
            draws,
            summary,
        }
    }
}

pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Options for the posterior BMD pipeline (norm order and quadrature for the
/// per-draw objectives).
#[derive(Debug, Clone)]
pub struct PosteriorSolveOptions {
    pub p: f64,
    pub nodes_per_dim: Option<usize>,
}

impl PosteriorSolveOptions {
    pub fn new(p: f64) -> Self {
        Self {
            p,
            nodes_per_dim: None,
        }
    }
}

/// Draws m posterior trajectory pairs and solves the ball problem for each.
pub fn solve_bmd_posterior(
    post_x: &CoefficientPosterior,
    post_y: &CoefficientPosterior,
    c: f64,
    m: usize,
    seed: u64,
    opts: &PosteriorSolveOptions,
    cfg: &OptConfig,
) -> Result<PosteriorBmd, SolveError> {
    if m == 0 {
        return Err(SolveError::ZeroDraws);
    }
    let ground = post_x.basis.ground().clone();
    let nodes = opts
        .nodes_per_dim
        .unwrap_or_else(|| default_nodes_per_dim(ground.dim()));

    // Posterior-mean curves give the warm start shared by all draws.
    let mean_x = post_x.mean_parameter();
    let mean_y = post_y.mean_parameter();
    let mean_obj = DissimilarityObjective::new(
        Arc::new(mean_x),
        Arc::new(mean_y),
        opts.p,
        ground.clone(),
    )?
    .with_nodes_per_dim(nodes);
    let mean_sol = solve_bmd(&mean_obj, c, cfg)?;

    let pairs = inference::posterior_trajectories(post_x, post_y, m, seed)?;
    let warm_cfg = OptConfig::warm(mean_sol.center.clone(), mean_sol.radius);
    let draws: Result<Vec<BmdSolution>, SolveError> = pairs
        .into_par_iter()
        .map(|(tx, ty)| {
            let obj = DissimilarityObjective::new(
                Arc::new(tx),
                Arc::new(ty),
                opts.p,
                ground.clone(),
            )?
            .with_nodes_per_dim(nodes);
            solve_bmd(&obj, c, &warm_cfg)
        })
        .collect();
    Ok(PosteriorBmd::from_draws(c, draws?))
}

/// A cumulative distribution function evaluator for the Youden limit.
pub enum CdfEvaluator {
    Analytic(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    /// Empirical CDF; samples are sorted on construction.
    Empirical(Vec<f64>),
}

impl CdfEvaluator {
    pub fn empirical(mut samples: Vec<f64>) -> Self {
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        CdfEvaluator::Empirical(samples)
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            CdfEvaluator::Analytic(f) => f(t),
            CdfEvaluator::Empirical(samples) => {
                if samples.is_empty() {
                    return 0.0;
                }
                let count = samples.partition_point(|&x| x <= t);
                count as f64 / samples.len() as f64
            }
        }
    }
}

/// Maximizer and maximum of $|F_X - F_Y|$ over a 1-D interval: the Youden
/// J statistic and the Kolmogorov distance.
pub fn youden(
    f_x: &CdfEvaluator,
    f_y: &CdfEvaluator,
    lo: f64,
    hi: f64,
    grid_size: usize,
) -> (f64, f64) {
    let n = grid_size.max(8);
    let gap = |t: f64| (f_x.eval(t) - f_y.eval(t)).abs();
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..=n {
        let t = lo + (hi - lo) * i as f64 / n as f64;
        let v = gap(t);
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let h = (hi - lo) / n as f64;
    let a = (lo + (best_i as f64 - 1.0) * h).max(lo);
    let b = (lo + (best_i as f64 + 1.0) * h).min(hi);
    let (t_star, v_star) = golden_section_max(gap, a, b, 1e-10 * (hi - lo).max(1.0));
    if v_star >= best_v {
        (t_star, v_star)
    } else {
        (lo + best_i as f64 * h, best_v)
    }
}
