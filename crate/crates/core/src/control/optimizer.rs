//! Projected BFGS for small box-constrained problems.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiNewtonOptions {
    pub max_iterations: usize,
    /// Stop once the projected gradient norm falls below this.
    pub gradient_tolerance: f64,
    pub max_backtracks: usize,
}

impl Default for QuasiNewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 60,
            gradient_tolerance: 1e-9,
            max_backtracks: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxMinimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&xi, &gi), (&l, &h))| ((xi - gi).clamp(l, h) - xi).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Minimizes `f` over `lo <= x <= hi`. `f` returns the value and gradient.
///
/// Variables sitting on a bound with the gradient pushing outward are frozen
/// for the step; the rest follow the BFGS direction with an Armijo
/// backtracking search along the projected path. Only decreasing steps are
/// taken, so the result is never worse than the (projected) start.
pub fn minimize_box<F>(f: F, start: &[f64], lo: &[f64], hi: &[f64], opts: &QuasiNewtonOptions) -> BoxMinimum
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let n = start.len();
    let mut x = start.to_vec();
    project(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x);
    let mut h = identity(n);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iterations {
        if !fx.is_finite() {
            break;
        }
        if projected_gradient_norm(&x, &g, lo, hi) < opts.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let mut d: Vec<f64> = (0..n)
            .map(|i| {
                if !free[i] {
                    return 0.0;
                }
                -(0..n).filter(|&j| free[j]).map(|j| h[i * n + j] * g[j]).sum::<f64>()
            })
            .collect();
        if dot(&d, &g) >= 0.0 {
            h = identity(n);
            d = (0..n).map(|i| if free[i] { -g[i] } else { 0.0 }).collect();
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..opts.max_backtracks {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            project(&mut trial, lo, hi);
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft <= fx + 1e-4 * dot(&g, &step) && ft < fx {
                accepted = Some((trial, ft, gt, step));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, ft, gt, s)) = accepted else {
            // no descent possible along the projected path
            converged = projected_gradient_norm(&x, &g, lo, hi) < opts.gradient_tolerance.sqrt();
            break;
        };
        let yv: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &yv);
        if sy > 1e-14 {
            bfgs_update(&mut h, &s, &yv, sy);
        }
        x = trial;
        fx = ft;
        g = gt;
    }
    BoxMinimum {
        x,
        value: fx,
        iterations,
        converged,
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inverse-Hessian update `H <- (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [f64], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| (0..n).map(|j| h[i * n + j] * y[j]).sum()).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}
