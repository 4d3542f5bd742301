//! Bound-constrained Nelder-Mead maximization.
//!
//! The BMD objective is cheap, low-dimensional (d or d+1 variables), and
//! derivative-free, so a clamped simplex search with multistarts is the whole
//! optimizer. Feasibility is enforced by projecting every trial point onto the
//! box.

#[derive(Debug, Clone)]
pub struct NelderMeadConfig {
    pub max_iters: usize,
    /// Convergence when the simplex diameter falls below
    /// `tol_frac * diameter(box)`.
    pub tol_frac: f64,
    /// Initial simplex step as a fraction of each box side.
    pub init_step_frac: f64,
}

impl Default for NelderMeadConfig {
    fn default() -> Self {
        Self {
            max_iters: 400,
            tol_frac: 1e-6,
            init_step_frac: 0.1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

fn clamp(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, lo), hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.clamp(*lo, *hi);
    }
}

/// Maximizes `f` over the box `[lower, upper]` starting from `x0`.
pub fn nelder_mead_max<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &NelderMeadConfig,
) -> OptimResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let box_diam = lower
        .iter()
        .zip(upper)
        .map(|(lo, hi)| (hi - lo) * (hi - lo))
        .sum::<f64>()
        .sqrt();
    let tol = cfg.tol_frac * box_diam;
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        f(x)
    };

    // Initial simplex: start point plus one perturbed vertex per coordinate.
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    clamp(&mut start, lower, upper);
    simplex.push(start.clone());
    for i in 0..n {
        let mut v = start.clone();
        let side = upper[i] - lower[i];
        let mut step = cfg.init_step_frac * side;
        if v[i] + step > upper[i] {
            step = -step;
        }
        v[i] += step;
        clamp(&mut v, lower, upper);
        if (v[i] - start[i]).abs() < 1e-14 * side.max(1.0) {
            v[i] = 0.5 * (lower[i] + upper[i]);
        }
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    for _ in 0..cfg.max_iters {
        // Sort descending by value (we maximize).
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
        let simplex_sorted: Vec<Vec<f64>> = order.iter().map(|&i| simplex[i].clone()).collect();
        let values_sorted: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        simplex = simplex_sorted;
        values = values_sorted;

        // Diameter of the simplex.
        let mut diam: f64 = 0.0;
        for i in 0..n {
            let d: f64 = simplex[i + 1]
                .iter()
                .zip(&simplex[0])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            diam = diam.max(d);
        }
        if diam < tol {
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![0.0; n];
        for v in simplex.iter().take(n) {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }

        let worst = simplex[n].clone();
        let mut reflected: Vec<f64> = centroid
            .iter()
            .zip(&worst)
            .map(|(c, w)| c + alpha * (c - w))
            .collect();
        clamp(&mut reflected, lower, upper);
        let fr = eval(&reflected, &mut evals);

        if fr > values[0] {
            // Try expanding further.
            let mut expanded: Vec<f64> = centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + gamma * (c - w))
                .collect();
            clamp(&mut expanded, lower, upper);
            let fe = eval(&expanded, &mut evals);
            if fe > fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr > values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            // Contract toward the centroid.
            let mut contracted: Vec<f64> = centroid
                .iter()
                .zip(&worst)
                .map(|(c, w)| c + rho * (w - c))
                .collect();
            clamp(&mut contracted, lower, upper);
            let fc = eval(&contracted, &mut evals);
            if fc > values[n] {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                // Shrink toward the best vertex.
                for i in 1..=n {
                    let best = simplex[0].clone();
                    for (x, b) in simplex[i].iter_mut().zip(&best) {
                        *x = b + sigma * (*x - b);
                    }
                    clamp(&mut simplex[i], lower, upper);
                    values[i] = eval(&simplex[i], &mut evals);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=n {
        if values[i] > values[best] {
            best = i;
        }
    }
    OptimResult {
        x: simplex[best].clone(),
        value: values[best],
        evaluations: evals,
    }
}

/// Golden-section refinement of a 1-D maximum inside `[a, b]`.
pub fn golden_section_max<F>(mut f: F, a: f64, b: f64, tol: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (a, b);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}
