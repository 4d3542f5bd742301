//! Ground sets, $L^p$ balls, volumes, the radius bound, and Hausdorff distances.

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::rng::rng_from_seed;

#[derive(Error, Debug)]
pub enum GeometryError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("norm order p must be >= 1, got {0}")]
    InvalidNormOrder(f64),
    #[error("radius must be nonnegative, got {0}")]
    NegativeRadius(f64),
    #[error("volume budget must be nonnegative, got {0}")]
    NegativeBudget(f64),
    #[error("ground set bounds must satisfy lower < upper in every coordinate")]
    EmptyBox,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("balls have mismatched norm orders: {0} vs {1}")]
    NormOrderMismatch(f64, f64),
    #[error("ball center lies outside the ground set")]
    CenterOutsideGround,
}

/// The compact index hyperrectangle $T \subset \mathbf{R}^d$.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl GroundSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, GeometryError> {
        if lower.is_empty() {
            return Err(GeometryError::ZeroDimension);
        }
        if lower.len() != upper.len() {
            return Err(GeometryError::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower
            .iter()
            .zip(&upper)
            .any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(GeometryError::EmptyBox);
        }
        Ok(Self { lower, upper })
    }

    /// The unit interval $[0, 1]$.
    pub fn unit_interval() -> Self {
        Self::new(vec![0.0], vec![1.0]).unwrap()
    }

    /// A 1-D interval $[lo, hi]$.
    pub fn interval(lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Self::new(vec![lo], vec![hi])
    }

    /// The square $[lo, hi]^2$.
    pub fn square(lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Self::new(vec![lo, lo], vec![hi, hi])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Lebesgue measure $|T|$.
    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .product()
    }

    /// Euclidean diameter of the box; used for solver tolerances.
    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    pub fn contains(&self, t: &[f64]) -> bool {
        t.len() == self.dim()
            && t.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *x >= *lo && *x <= *hi)
    }

    /// Distance from `t` to the boundary $\partial T$ (0 outside the box).
    pub fn boundary_distance(&self, t: &[f64]) -> f64 {
        if !self.contains(t) {
            return 0.0;
        }
        t.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(x, (lo, hi))| (x - lo).min(hi - x))
            .fold(f64::INFINITY, f64::min)
    }

    /// Componentwise clamp of `t` into the box.
    pub fn clamp(&self, t: &mut [f64]) {
        for (x, (lo, hi)) in t.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *x = x.clamp(*lo, *hi);
        }
    }
}

/// A closed candidate region $B(t, r) = \{s : \|s - t\|_p \le r\}$.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpBall {
    pub center: Vec<f64>,
    pub radius: f64,
    pub p: f64,
}

impl LpBall {
    pub fn new(center: Vec<f64>, radius: f64, p: f64) -> Result<Self, GeometryError> {
        if center.is_empty() {
            return Err(GeometryError::ZeroDimension);
        }
        if !(radius >= 0.0) {
            return Err(GeometryError::NegativeRadius(radius));
        }
        if !(p >= 1.0) {
            return Err(GeometryError::InvalidNormOrder(p));
        }
        Ok(Self { center, radius, p })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, s: &[f64]) -> bool {
        s.len() == self.dim() && lp_distance(&self.center, s, self.p) <= self.radius
    }

    pub fn volume(&self) -> f64 {
        ball_volume(self.radius, self.dim(), self.p).expect("validated on construction")
    }
}

/// $\|v\|_p$ for $p \ge 1$.
pub fn lp_norm(v: &[f64], p: f64) -> f64 {
    if p == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else if p == 2.0 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    } else {
        v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

pub fn lp_distance(a: &[f64], b: &[f64], p: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    if p == 1.0 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
    } else if p == 2.0 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    } else {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }
}

/// Volume of an $L^p$ ball: $\{2 r \Gamma(1/p + 1)\}^d / \Gamma(d/p + 1)$.
pub fn ball_volume(radius: f64, dim: usize, p: f64) -> Result<f64, GeometryError> {
    if dim == 0 {
        return Err(GeometryError::ZeroDimension);
    }
    if !(p >= 1.0) {
        return Err(GeometryError::InvalidNormOrder(p));
    }
    if !(radius >= 0.0) {
        return Err(GeometryError::NegativeRadius(radius));
    }
    let d = dim as f64;
    Ok((2.0 * radius * gamma(1.0 / p + 1.0)).powi(dim as i32) / gamma(d / p + 1.0))
}

/// Largest feasible radius $R_c$ for a volume budget $c$:
/// $R_c = \{c \Gamma(d/p + 1)\}^{1/d} / \{2 \Gamma(1/p + 1)\}$.
pub fn max_radius(c: f64, dim: usize, p: f64) -> Result<f64, GeometryError> {
    if dim == 0 {
        return Err(GeometryError::ZeroDimension);
    }
    if !(p >= 1.0) {
        return Err(GeometryError::InvalidNormOrder(p));
    }
    if !(c >= 0.0) {
        return Err(GeometryError::NegativeBudget(c));
    }
    let d = dim as f64;
    Ok((c * gamma(d / p + 1.0)).powf(1.0 / d) / (2.0 * gamma(1.0 / p + 1.0)))
}

/// Indicator region $B \cap T$ together with its bounding box; the quadrature
/// routines integrate over the box and test membership per node.
#[derive(Debug, Clone)]
pub struct ClippedRegion {
    pub ball: LpBall,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ClippedRegion {
    pub fn contains(&self, s: &[f64]) -> bool {
        self.ball.contains(s)
    }

    /// True when the bounding box has zero extent in some coordinate.
    pub fn is_degenerate(&self) -> bool {
        self.lower.iter().zip(&self.upper).any(|(lo, hi)| hi <= lo)
    }
}

/// Intersects a ball with the ground set, keeping the indicator form.
pub fn clip_to_ground(ball: &LpBall, ground: &GroundSet) -> Result<ClippedRegion, GeometryError> {
    if ball.dim() != ground.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: ground.dim(),
            got: ball.dim(),
        });
    }
    if !ground.contains(&ball.center) {
        return Err(GeometryError::CenterOutsideGround);
    }
    // An L^p ball with p >= 1 extends exactly r along each axis.
    let lower: Vec<f64> = ball
        .center
        .iter()
        .zip(ground.lower())
        .map(|(c, lo)| (c - ball.radius).max(*lo))
        .collect();
    let upper: Vec<f64> = ball
        .center
        .iter()
        .zip(ground.upper())
        .map(|(c, hi)| (c + ball.radius).min(*hi))
        .collect();
    Ok(ClippedRegion {
        ball: ball.clone(),
        lower,
        upper,
    })
}

/// Hausdorff distance between two same-order balls.
///
/// 1-D intervals and Euclidean balls use the closed forms; any other case
/// falls back to a two-sided max-min over `resolution` boundary samples per
/// ball, which mirrors the numeric route used in practice.
pub fn hausdorff(
    a: &LpBall,
    b: &LpBall,
    ground: &GroundSet,
    resolution: usize,
) -> Result<f64, GeometryError> {
    if a.p != b.p {
        return Err(GeometryError::NormOrderMismatch(a.p, b.p));
    }
    if a.dim() != b.dim() || a.dim() != ground.dim() {
        return Err(GeometryError::DimensionMismatch {
            expected: ground.dim(),
            got: a.dim().max(b.dim()),
        });
    }
    let d = a.dim();
    if d == 1 {
        let lo = ((a.center[0] - a.radius) - (b.center[0] - b.radius)).abs();
        let hi = ((a.center[0] + a.radius) - (b.center[0] + b.radius)).abs();
        return Ok(lo.max(hi));
    }
    if a.p == 2.0 {
        return Ok(lp_distance(&a.center, &b.center, 2.0) + (a.radius - b.radius).abs());
    }
    let dirs = boundary_directions(d, a.p, resolution);
    let one_sided = |from: &LpBall, to: &LpBall| -> f64 {
        let mut worst: f64 = 0.0;
        let mut point = vec![0.0; d];
        for u in &dirs {
            for (k, x) in point.iter_mut().enumerate() {
                *x = from.center[k] + from.radius * u[k];
            }
            if to.contains(&point) {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut other = vec![0.0; d];
            for v in &dirs {
                for (k, x) in other.iter_mut().enumerate() {
                    *x = to.center[k] + to.radius * v[k];
                }
                best = best.min(lp_distance(&point, &other, 2.0));
            }
            worst = worst.max(best);
        }
        worst
    };
    Ok(one_sided(a, b).max(one_sided(b, a)))
}

/// Deterministic unit directions on the $L^p$ sphere.
fn boundary_directions(d: usize, p: f64, resolution: usize) -> Vec<Vec<f64>> {
    let n = resolution.max(4);
    let mut dirs = Vec::with_capacity(n);
    if d == 2 {
        for k in 0..n {
            let phi = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
            let raw = [phi.cos(), phi.sin()];
            let norm = lp_norm(&raw, p);
            dirs.push(vec![raw[0] / norm, raw[1] / norm]);
        }
    } else {
        let mut rng = rng_from_seed(0x4861_7573_646f_7266);
        for _ in 0..n {
            let mut v: Vec<f64> = (0..d)
                .map(|_| {
                    // Box-Muller keeps us off the Distribution trait here.
                    let u1: f64 = rng.gen_range(1e-12..1.0);
                    let u2: f64 = rng.gen_range(0.0..1.0);
                    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
                })
                .collect();
            let norm = lp_norm(&v, p);
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
                dirs.push(v);
            }
        }
    }
    dirs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn ball_volume_matches_known_values() {
        // Disk of radius 1.
        assert_relative_eq!(
            ball_volume(1.0, 2, 2.0).unwrap(),
            std::f64::consts::PI,
            max_relative = 1e-12
        );
        // Interval of half-length 0.05.
        assert_relative_eq!(ball_volume(0.05, 1, 1.0).unwrap(), 0.1, max_relative = 1e-12);
        assert_eq!(ball_volume(0.0, 3, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn unit_l1_diamond_area_matches_direct_integration() {
        // Oracle: area of {|x| + |y| <= 1} by 1-D integration of the width
        // function 2(1 - |x|) over [-1, 1].
        let n = 200_000;
        let h = 2.0 / n as f64;
        let mut area = 0.0;
        for i in 0..n {
            let x = -1.0 + (i as f64 + 0.5) * h;
            area += 2.0 * (1.0 - x.abs()) * h;
        }
        assert_relative_eq!(ball_volume(1.0, 2, 1.0).unwrap(), area, max_relative = 1e-6);
        assert_relative_eq!(ball_volume(1.0, 2, 1.0).unwrap(), 2.0, max_relative = 1e-12);
    }

    #[test]
    fn ball_volume_rejects_bad_arguments() {
        assert!(ball_volume(1.0, 0, 2.0).is_err());
        assert!(ball_volume(1.0, 2, 0.5).is_err());
        assert!(ball_volume(-1.0, 2, 2.0).is_err());
    }

    #[test]
    fn max_radius_known_values() {
        assert_relative_eq!(max_radius(0.2, 1, 1.0).unwrap(), 0.1, max_relative = 1e-12);
        assert_relative_eq!(max_radius(0.2, 1, 7.3).unwrap(), 0.1, max_relative = 1e-12);
        assert_relative_eq!(
            max_radius(4.0 * std::f64::consts::PI, 2, 2.0).unwrap(),
            2.0,
            max_relative = 1e-12
        );
        assert_eq!(max_radius(0.0, 3, 2.0).unwrap(), 0.0);
        assert!(max_radius(-0.1, 1, 2.0).is_err());
    }

    proptest! {
        #[test]
        fn max_radius_inverts_ball_volume(
            c in 1e-6f64..50.0,
            dim in 1usize..4,
            p in 1.0f64..5.0,
        ) {
            let r = max_radius(c, dim, p).unwrap();
            let v = ball_volume(r, dim, p).unwrap();
            prop_assert!((v - c).abs() <= 1e-10 * c.max(1.0));
        }
    }

    #[test]
    fn hausdorff_interval_endpoint_formula() {
        let g = GroundSet::interval(-5.0, 5.0).unwrap();
        let a = LpBall::new(vec![0.5], 0.5, 1.0).unwrap(); // [0, 1]
        let b = LpBall::new(vec![1.0], 0.5, 1.0).unwrap(); // [0.5, 1.5]
        assert_relative_eq!(hausdorff(&a, &b, &g, 100).unwrap(), 0.5);
        assert_eq!(hausdorff(&a, &a, &g, 100).unwrap(), 0.0);
    }

    #[test]
    fn hausdorff_euclidean_closed_form_matches_sampling_oracle() {
        let g = GroundSet::square(-5.0, 5.0).unwrap();
        let a = LpBall::new(vec![0.0, 0.0], 1.0, 2.0).unwrap();
        let b = LpBall::new(vec![1.0, 0.0], 1.0, 2.0).unwrap();
        let exact = hausdorff(&a, &b, &g, 720).unwrap();
        assert_relative_eq!(exact, 1.0, epsilon = 1e-12);

        // Dense boundary-sampling oracle, independent of the closed form.
        let n = 5000usize;
        let sample = |ball: &LpBall, k: usize| {
            let phi = 2.0 * std::f64::consts::PI * (k as f64) / (n as f64);
            [
                ball.center[0] + ball.radius * phi.cos(),
                ball.center[1] + ball.radius * phi.sin(),
            ]
        };
        let mut worst: f64 = 0.0;
        for (x, y) in [(&a, &b), (&b, &a)] {
            for k in 0..n {
                let pt = sample(x, k);
                if y.contains(&pt) {
                    continue;
                }
                let mut best = f64::INFINITY;
                for j in 0..n {
                    let q = sample(y, j);
                    let dd = ((pt[0] - q[0]).powi(2) + (pt[1] - q[1]).powi(2)).sqrt();
                    best = best.min(dd);
                }
                worst = worst.max(best);
            }
        }
        assert_relative_eq!(exact, worst, epsilon = 5e-3);
    }

    #[test]
    fn hausdorff_rejects_mismatched_norms() {
        let g = GroundSet::square(-5.0, 5.0).unwrap();
        let a = LpBall::new(vec![0.0, 0.0], 1.0, 2.0).unwrap();
        let b = LpBall::new(vec![0.0, 0.0], 1.0, 1.0).unwrap();
        assert!(hausdorff(&a, &b, &g, 100).is_err());
    }

    #[test]
    fn discretized_hausdorff_close_to_euclidean_closed_form() {
        // Force the sampling path by evaluating p = 2 balls as if p were
        // unknown: compare against sampled p = 2.0001 balls.
        let g = GroundSet::square(-5.0, 5.0).unwrap();
        let res = 720usize;
        let a = LpBall::new(vec![0.3, -0.2], 0.8, 2.0001).unwrap();
        let b = LpBall::new(vec![-0.5, 0.4], 1.1, 2.0001).unwrap();
        let approx_d = hausdorff(&a, &b, &g, res).unwrap();
        let closed = lp_distance(&a.center, &b.center, 2.0) + (a.radius - b.radius).abs();
        assert!((approx_d - closed).abs() < 2.0 / res as f64);
    }

    proptest! {
        #[test]
        fn hausdorff_is_a_metric_on_intervals(
            c1 in -1.0f64..1.0, r1 in 0.01f64..0.5,
            c2 in -1.0f64..1.0, r2 in 0.01f64..0.5,
            c3 in -1.0f64..1.0, r3 in 0.01f64..0.5,
        ) {
            let g = GroundSet::interval(-2.0, 2.0).unwrap();
            let a = LpBall::new(vec![c1], r1, 1.0).unwrap();
            let b = LpBall::new(vec![c2], r2, 1.0).unwrap();
            let c = LpBall::new(vec![c3], r3, 1.0).unwrap();
            let dab = hausdorff(&a, &b, &g, 64).unwrap();
            let dba = hausdorff(&b, &a, &g, 64).unwrap();
            let dac = hausdorff(&a, &c, &g, 64).unwrap();
            let dbc = hausdorff(&b, &c, &g, 64).unwrap();
            prop_assert!((dab - dba).abs() < 1e-14);
            prop_assert!(dac <= dab + dbc + 1e-12);
            if (c1 - c2).abs() > 1e-9 || (r1 - r2).abs() > 1e-9 {
                prop_assert!(dab > 0.0);
            }
        }
    }

    #[test]
    fn clip_keeps_interior_ball_volume() {
        let g = GroundSet::unit_interval();
        let ball = LpBall::new(vec![0.5], 0.1, 1.0).unwrap();
        let region = clip_to_ground(&ball, &g).unwrap();
        assert_eq!(region.lower, vec![0.4]);
        assert_eq!(region.upper, vec![0.6]);
        assert!(!region.is_degenerate());
    }

    #[test]
    fn clip_at_corner_halves_an_interval() {
        let g = GroundSet::unit_interval();
        let ball = LpBall::new(vec![0.0], 0.2, 1.0).unwrap();
        let region = clip_to_ground(&ball, &g).unwrap();
        assert_eq!(region.upper[0] - region.lower[0], 0.2);
    }

    #[test]
    fn clip_degenerate_and_outside() {
        let g = GroundSet::unit_interval();
        let zero = LpBall::new(vec![0.5], 0.0, 1.0).unwrap();
        assert!(clip_to_ground(&zero, &g).unwrap().is_degenerate());
        let out = LpBall::new(vec![1.5], 0.1, 1.0).unwrap();
        assert!(clip_to_ground(&out, &g).is_err());
    }
}
