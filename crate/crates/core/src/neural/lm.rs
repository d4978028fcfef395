use nalgebra::{DMatrix, DVector};

/// Gauss-Newton normal equations at a parameter point.
#[derive(Debug, Clone)]
pub struct NormalEquations {
    /// Sum of squared residuals.
    pub sse: f64,
    /// `J^T J`.
    pub jtj: DMatrix<f64>,
    /// `J^T r`.
    pub jtr: DVector<f64>,
}

/// A nonlinear least-squares problem `min_θ Σ r_i(θ)^2`.
pub trait LeastSquares {
    fn num_params(&self) -> usize;
    fn num_residuals(&self) -> usize;
    /// Sum of squared residuals, `None` if any residual is non-finite.
    fn sse(&self, params: &[f64]) -> Option<f64>;
    /// Residual sum together with `J^T J` and `J^T r`, `None` on non-finite values.
    fn normal_equations(&self, params: &[f64]) -> Option<NormalEquations>;
}

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    pub lambda_init: f64,
    pub lambda_max: f64,
    /// Damping increases tried per iteration before giving up.
    pub max_retries: usize,
}

impl Default for LmOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            lambda_init: 1e-3,
            lambda_max: 1e10,
            max_retries: 12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmReport {
    pub params: Vec<f64>,
    /// Mean squared residual at the starting point.
    pub initial_loss: f64,
    /// Mean squared residual after each accepted iteration.
    pub loss_history: Vec<f64>,
}

impl LmReport {
    pub fn final_loss(&self) -> f64 {
        self.loss_history.last().copied().unwrap_or(self.initial_loss)
    }
}

/// Levenberg-Marquardt with Marquardt diagonal scaling. Only steps that
/// strictly lower the residual sum are accepted, so the loss history is
/// non-increasing. Returns `None` if the starting point is not finite.
pub fn levenberg_marquardt<P: LeastSquares + ?Sized>(
    problem: &P,
    start: &[f64],
    opts: &LmOptions,
) -> Option<LmReport> {
    let m = problem.num_residuals().max(1) as f64;
    let n = problem.num_params();
    let mut params = start.to_vec();
    let mut lambda = opts.lambda_init;
    let mut eq = problem.normal_equations(&params)?;
    let initial_loss = eq.sse / m;
    let mut history = Vec::new();

    'outer: for _ in 0..opts.max_iterations {
        if eq.sse == 0.0 {
            break;
        }
        let max_diag = (0..n).map(|i| eq.jtj[(i, i)]).fold(0.0, f64::max);
        let floor = (max_diag * 1e-12).max(1e-300);
        for _ in 0..opts.max_retries {
            let mut lhs = eq.jtj.clone();
            for i in 0..n {
                lhs[(i, i)] += lambda * eq.jtj[(i, i)].max(floor);
            }
            let step = match lhs.cholesky() {
                Some(chol) => chol.solve(&eq.jtr),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let candidate: Vec<f64> = params.iter().zip(step.iter()).map(|(p, s)| p - s).collect();
            match problem.sse(&candidate) {
                Some(sse) if sse < eq.sse => {
                    params = candidate;
                    lambda = (lambda / 10.0).max(1e-15);
                    match problem.normal_equations(&params) {
                        Some(next) => eq = next,
                        None => break 'outer,
                    }
                    history.push(eq.sse / m);
                    continue 'outer;
                }
                _ => {
                    lambda *= 10.0;
                    if lambda > opts.lambda_max {
                        break 'outer;
                    }
                }
            }
        }
        break;
    }
    Some(LmReport {
        params,
        initial_loss,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Residuals `A θ - b` for a fixed 3x2 system.
    struct Linear2;

    const A: [[f64; 2]; 3] = [[1.0, 2.0], [3.0, -1.0], [0.5, 4.0]];
    const B: [f64; 3] = [1.0, -2.0, 3.5];

    impl LeastSquares for Linear2 {
        fn num_params(&self) -> usize {
            2
        }
        fn num_residuals(&self) -> usize {
            3
        }
        fn sse(&self, p: &[f64]) -> Option<f64> {
            Some((0..3).map(|i| (A[i][0] * p[0] + A[i][1] * p[1] - B[i]).powi(2)).sum())
        }
        fn normal_equations(&self, p: &[f64]) -> Option<NormalEquations> {
            let j = DMatrix::from_fn(3, 2, |i, k| A[i][k]);
            let r = DVector::from_fn(3, |i, _| A[i][0] * p[0] + A[i][1] * p[1] - B[i]);
            Some(NormalEquations {
                sse: r.norm_squared(),
                jtj: j.transpose() * &j,
                jtr: j.transpose() * r,
            })
        }
    }

    #[test]
    fn converges_to_least_squares_solution() {
        // closed form: (A^T A)^-1 A^T b
        let a = DMatrix::from_fn(3, 2, |i, k| A[i][k]);
        let b = DVector::from_column_slice(&B);
        let exact = (a.transpose() * &a).try_inverse().unwrap() * a.transpose() * b;
        let report = levenberg_marquardt(&Linear2, &[10.0, -7.0], &LmOptions::default()).unwrap();
        assert!((report.params[0] - exact[0]).abs() < 1e-8);
        assert!((report.params[1] - exact[1]).abs() < 1e-8);
        assert!(report.loss_history.windows(2).all(|w| w[1] <= w[0]));
    }
}

/// Accumulates `J^T J`, `J^T r` and the residual sum one Jacobian row at a time.
#[derive(Debug, Clone)]
pub(crate) struct NormalAccumulator {
    n: usize,
    jtj: Vec<f64>,
    jtr: Vec<f64>,
    sse: f64,
}

impl NormalAccumulator {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            n,
            jtj: vec![0.0; n * n],
            jtr: vec![0.0; n],
            sse: 0.0,
        }
    }

    /// Adds residual `r` with gradient row `row` (`dr/dθ`).
    pub(crate) fn add(&mut self, row: &[f64], r: f64) {
        let n = self.n;
        self.sse += r * r;
        for i in 0..n {
            let ri = row[i];
            if ri == 0.0 {
                continue;
            }
            self.jtr[i] += ri * r;
            let dst = &mut self.jtj[i * n + i..(i + 1) * n];
            for (d, &rj) in dst.iter_mut().zip(&row[i..]) {
                *d += ri * rj;
            }
        }
    }

    pub(crate) fn finish(self) -> Option<NormalEquations> {
        let n = self.n;
        if !self.sse.is_finite() || self.jtr.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let jtj = DMatrix::from_fn(n, n, |i, j| {
            if i <= j {
                self.jtj[i * n + j]
            } else {
                self.jtj[j * n + i]
            }
        });
        if jtj.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(NormalEquations {
            sse: self.sse,
            jtj,
            jtr: DVector::from_vec(self.jtr),
        })
    }
}
