//! Basis expansions, link functions, and evaluable functional parameters.
//!
//! A functional parameter is $\theta(t) = g(\beta_0 + \sum_i \beta_i \phi_i(t))$
//! where the $\phi_i$ are B-splines (1-D or a 2-D tensor product) or the
//! constant basis, and $g$ is the identity or the exponential (log link).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use thiserror::Error;

use crate::geometry::GroundSet;

/// Nonzero B-spline values at a point never exceed `degree + 1`.
const MAX_DEGREE: usize = 10;

#[derive(Error, Debug)]
pub enum BasisError {
    #[error("spline degree {0} exceeds the supported maximum of {MAX_DEGREE}")]
    DegreeTooLarge(usize),
    #[error("basis must contain at least one function per dimension")]
    EmptyBasis,
    #[error("interior knots must be strictly inside the ground set and sorted")]
    BadInteriorKnots,
    #[error("tensor basis requires a 2-D ground set, got dimension {0}")]
    NotTwoDimensional(usize),
    #[error("1-D B-spline basis requires a 1-D ground set, got dimension {0}")]
    NotOneDimensional(usize),
    #[error("point lies outside the ground set")]
    PointOutsideGround,
    #[error("empty point list")]
    EmptyPoints,
    #[error("coefficient vector has length {got}, expected {expected}")]
    CoefficientLength { expected: usize, got: usize },
}

/// Inverse link $g$ applied to the linear predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkFunction {
    Identity,
    Log,
}

impl LinkFunction {
    pub fn apply(self, eta: f64) -> f64 {
        match self {
            LinkFunction::Identity => eta,
            LinkFunction::Log => eta.exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasisKind {
    Constant,
    Bspline1d,
    TensorBspline2d,
}

/// One clamped (open uniform) knot vector plus degree; the boundary knots are
/// repeated `degree + 1` times so the basis spans constants exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Axis {
    degree: usize,
    knots: Vec<f64>,
}

impl Axis {
    fn from_interior(lo: f64, hi: f64, degree: usize, interior: &[f64]) -> Result<Self, BasisError> {
        if degree > MAX_DEGREE {
            return Err(BasisError::DegreeTooLarge(degree));
        }
        let mut prev = lo;
        for &k in interior {
            if !(k > prev && k < hi) {
                return Err(BasisError::BadInteriorKnots);
            }
            prev = k;
        }
        let mut knots = Vec::with_capacity(interior.len() + 2 * (degree + 1));
        knots.extend(std::iter::repeat(lo).take(degree + 1));
        knots.extend_from_slice(interior);
        knots.extend(std::iter::repeat(hi).take(degree + 1));
        Ok(Self { degree, knots })
    }

    fn num_basis(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    fn span(&self, x: f64) -> usize {
        let n = self.num_basis();
        let lo = self.degree;
        let hi = n; // knots[n] is the right boundary
        if x >= self.knots[hi] {
            return n - 1;
        }
        if x <= self.knots[lo] {
            return lo;
        }
        // Binary search for knots[span] <= x < knots[span + 1].
        let mut low = lo;
        let mut high = hi;
        while high - low > 1 {
            let mid = (low + high) / 2;
            if x < self.knots[mid] {
                high = mid;
            } else {
                low = mid;
            }
        }
        low
    }

    /// Cox-de Boor: the `degree + 1` nonzero basis values at `x`.
    fn nonzero(&self, x: f64, out: &mut [f64; MAX_DEGREE + 1]) -> usize {
        let span = self.span(x);
        let p = self.degree;
        let mut left = [0.0f64; MAX_DEGREE + 1];
        let mut right = [0.0f64; MAX_DEGREE + 1];
        out[0] = 1.0;
        for j in 1..=p {
            left[j] = x - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = if denom != 0.0 { out[r] / denom } else { 0.0 };
                out[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            out[j] = saved;
        }
        span
    }
}

/// A set of basis functions over a ground set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    kind: BasisKind,
    axes: Vec<Axis>,
    ground: GroundSet,
}

impl BasisSet {
    /// Intercept-only basis: B = 0, the model is just $g(\beta_0)$.
    pub fn constant(ground: GroundSet) -> Self {
        Self {
            kind: BasisKind::Constant,
            axes: Vec::new(),
            ground,
        }
    }

    /// 1-D B-splines with explicit interior knots.
    pub fn bspline_1d(
        ground: GroundSet,
        degree: usize,
        interior_knots: &[f64],
    ) -> Result<Self, BasisError> {
        if ground.dim() != 1 {
            return Err(BasisError::NotOneDimensional(ground.dim()));
        }
        let axis = Axis::from_interior(ground.lower()[0], ground.upper()[0], degree, interior_knots)?;
        Ok(Self {
            kind: BasisKind::Bspline1d,
            axes: vec![axis],
            ground,
        })
    }

    /// 1-D B-splines with `num_basis` functions and uniform interior knots.
    ///
    /// When `num_basis` is too small to carry the requested degree, the degree
    /// drops to `num_basis - 1`; `num_basis = 1` therefore degenerates to the
    /// constant basis.
    pub fn bspline_1d_uniform(
        ground: GroundSet,
        degree: usize,
        num_basis: usize,
    ) -> Result<Self, BasisError> {
        if num_basis == 0 {
            return Err(BasisError::EmptyBasis);
        }
        if ground.dim() != 1 {
            return Err(BasisError::NotOneDimensional(ground.dim()));
        }
        let degree = degree.min(num_basis - 1);
        let interior = uniform_interior(
            ground.lower()[0],
            ground.upper()[0],
            num_basis - degree - 1,
        );
        Self::bspline_1d(ground, degree, &interior)
    }

    /// Tensor product of two uniform 1-D B-spline bases on a 2-D box.
    pub fn tensor_2d_uniform(
        ground: GroundSet,
        degree: usize,
        num_basis_per_dim: [usize; 2],
    ) -> Result<Self, BasisError> {
        if ground.dim() != 2 {
            return Err(BasisError::NotTwoDimensional(ground.dim()));
        }
        let mut axes = Vec::with_capacity(2);
        for (k, &nb) in num_basis_per_dim.iter().enumerate() {
            if nb == 0 {
                return Err(BasisError::EmptyBasis);
            }
            let deg = degree.min(nb - 1);
            let interior = uniform_interior(ground.lower()[k], ground.upper()[k], nb - deg - 1);
            axes.push(Axis::from_interior(
                ground.lower()[k],
                ground.upper()[k],
                deg,
                &interior,
            )?);
        }
        Ok(Self {
            kind: BasisKind::TensorBspline2d,
            axes,
            ground,
        })
    }

    pub fn ground(&self) -> &GroundSet {
        &self.ground
    }

    pub fn kind(&self) -> &BasisKind {
        &self.kind
    }

    /// Total number of basis functions B (product across dimensions).
    pub fn num_basis(&self) -> usize {
        match self.kind {
            BasisKind::Constant => 0,
            _ => self.axes.iter().map(Axis::num_basis).product(),
        }
    }

    /// Dense basis vector $(\phi_1(t), \dots, \phi_B(t))$.
    pub fn eval(&self, t: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_basis()];
        self.eval_into(t, &mut out);
        out
    }

    fn eval_into(&self, t: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        match self.kind {
            BasisKind::Constant => {}
            BasisKind::Bspline1d => {
                let axis = &self.axes[0];
                let mut vals = [0.0; MAX_DEGREE + 1];
                let span = axis.nonzero(t[0], &mut vals);
                for j in 0..=axis.degree {
                    out[span - axis.degree + j] = vals[j];
                }
            }
            BasisKind::TensorBspline2d => {
                let (au, av) = (&self.axes[0], &self.axes[1]);
                let mut vu = [0.0; MAX_DEGREE + 1];
                let mut vv = [0.0; MAX_DEGREE + 1];
                let su = au.nonzero(t[0], &mut vu);
                let sv = av.nonzero(t[1], &mut vv);
                let nv = av.num_basis();
                for i in 0..=au.degree {
                    let row = (su - au.degree + i) * nv;
                    for j in 0..=av.degree {
                        out[row + (sv - av.degree + j)] = vu[i] * vv[j];
                    }
                }
            }
        }
    }

    /// Linear predictor $\beta_0 + \sum_i \beta_i \phi_i(t)$ using only the
    /// nonzero spline values; `coefficients[0]` is the intercept.
    pub fn linear_predictor(&self, t: &[f64], coefficients: &[f64]) -> f64 {
        debug_assert_eq!(coefficients.len(), self.num_basis() + 1);
        let beta = &coefficients[1..];
        let mut eta = coefficients[0];
        match self.kind {
            BasisKind::Constant => {}
            BasisKind::Bspline1d => {
                let axis = &self.axes[0];
                let mut vals = [0.0; MAX_DEGREE + 1];
                let span = axis.nonzero(t[0], &mut vals);
                for j in 0..=axis.degree {
                    eta += beta[span - axis.degree + j] * vals[j];
                }
            }
            BasisKind::TensorBspline2d => {
                let (au, av) = (&self.axes[0], &self.axes[1]);
                let mut vu = [0.0; MAX_DEGREE + 1];
                let mut vv = [0.0; MAX_DEGREE + 1];
                let su = au.nonzero(t[0], &mut vu);
                let sv = av.nonzero(t[1], &mut vv);
                let nv = av.num_basis();
                for i in 0..=au.degree {
                    let row = (su - au.degree + i) * nv;
                    for j in 0..=av.degree {
                        eta += beta[row + (sv - av.degree + j)] * vu[i] * vv[j];
                    }
                }
            }
        }
        eta
    }
}

fn uniform_interior(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let h = (hi - lo) / (count as f64 + 1.0);
    (1..=count).map(|k| lo + h * k as f64).collect()
}

/// Design matrix with an all-ones intercept column followed by the basis
/// columns evaluated at each point.
pub fn design_matrix(basis: &BasisSet, points: &[Vec<f64>]) -> Result<DMatrix<f64>, BasisError> {
    if points.is_empty() {
        return Err(BasisError::EmptyPoints);
    }
    let b = basis.num_basis();
    let mut m = DMatrix::zeros(points.len(), b + 1);
    let mut row = vec![0.0; b];
    for (i, t) in points.iter().enumerate() {
        if !basis.ground().contains(t) {
            return Err(BasisError::PointOutsideGround);
        }
        m[(i, 0)] = 1.0;
        basis.eval_into(t, &mut row);
        for (j, &v) in row.iter().enumerate() {
            m[(i, j + 1)] = v;
        }
    }
    Ok(m)
}

/// Anything evaluable over the ground set; the quadrature and solver layers
/// only see this trait.
pub trait ParamSurface: Send + Sync {
    fn value(&self, t: &[f64]) -> f64;
}

/// A fitted functional parameter $\theta(t) = g(\beta_0 + \sum \beta_i \phi_i(t))$.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalParameter {
    pub basis: BasisSet,
    pub link: LinkFunction,
    /// Length `B + 1`, intercept first.
    pub coefficients: Vec<f64>,
}

impl FunctionalParameter {
    pub fn new(
        basis: BasisSet,
        link: LinkFunction,
        coefficients: Vec<f64>,
    ) -> Result<Self, BasisError> {
        if coefficients.len() != basis.num_basis() + 1 {
            return Err(BasisError::CoefficientLength {
                expected: basis.num_basis() + 1,
                got: coefficients.len(),
            });
        }
        Ok(Self {
            basis,
            link,
            coefficients,
        })
    }

    /// Evaluates at `t`; errors when `t` is outside the ground set.
    pub fn evaluate(&self, t: &[f64]) -> Result<f64, BasisError> {
        if !self.basis.ground().contains(t) {
            return Err(BasisError::PointOutsideGround);
        }
        Ok(self
            .link
            .apply(self.basis.linear_predictor(t, &self.coefficients)))
    }
}

impl ParamSurface for FunctionalParameter {
    fn value(&self, t: &[f64]) -> f64 {
        // Quadrature nodes sit inside the box; clamp guards roundoff at edges.
        if self.basis.ground().contains(t) {
            self.link
                .apply(self.basis.linear_predictor(t, &self.coefficients))
        } else {
            let mut s = t.to_vec();
            self.basis.ground().clamp(&mut s);
            self.link
                .apply(self.basis.linear_predictor(&s, &self.coefficients))
        }
    }
}

/// A closed-form parameter curve/surface, used for simulation truths and test
/// oracles.
#[derive(Clone)]
pub struct AnalyticParameter {
    f: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl AnalyticParameter {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self { f: Arc::new(f) }
    }
}

impl ParamSurface for AnalyticParameter {
    fn value(&self, t: &[f64]) -> f64 {
        (self.f)(t)
    }
}

impl std::fmt::Debug for AnalyticParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("AnalyticParameter")
    }
}
