use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Continuous-time single-input single-output state-space model.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    n: usize,
    /// Row-major `n x n`.
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    d: f64,
}

impl StateSpace {
    pub fn new(n: usize, a: Vec<f64>, b: Vec<f64>, c: Vec<f64>, d: f64) -> Result<Self> {
        if a.len() != n * n {
            return Err(Error::Dimension {
                expected: n * n,
                actual: a.len(),
            });
        }
        for v in [&b, &c] {
            if v.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    actual: v.len(),
                });
            }
        }
        Ok(Self { n, a, b, c, d })
    }

    pub fn order(&self) -> usize {
        self.n
    }
    pub fn a(&self) -> &[f64] {
        &self.a
    }
    pub fn b(&self) -> &[f64] {
        &self.b
    }
    pub fn c(&self) -> &[f64] {
        &self.c
    }
    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn a_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.a)
    }

    /// Frequency response `C (sI - A)^-1 B + D` at `s = re + j im`.
    pub fn eval(&self, re: f64, im: f64) -> (f64, f64) {
        // Solve the 2n real system for x = (sI - A)^-1 B.
        let n = self.n;
        let mut m = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let a = self.a[i * n + j];
                let diag = if i == j { re } else { 0.0 };
                m[(i, j)] = diag - a;
                m[(n + i, n + j)] = diag - a;
            }
            m[(i, n + i)] = -im;
            m[(n + i, i)] = im;
        }
        let mut rhs = DVector::<f64>::zeros(2 * n);
        for i in 0..n {
            rhs[i] = self.b[i];
        }
        let x = m.lu().solve(&rhs).unwrap_or_else(|| DVector::from_element(2 * n, f64::NAN));
        let re_out: f64 = (0..n).map(|i| self.c[i] * x[i]).sum::<f64>() + self.d;
        let im_out: f64 = (0..n).map(|i| self.c[i] * x[n + i]).sum();
        (re_out, im_out)
    }
}

/// Matrix exponential by scaling and squaring with a truncated Taylor series.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(m.is_square(), "expm needs a square matrix");
    let n = m.nrows();
    let norm = m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
    }
    let scaled = m / 2f64.powi(squarings as i32);
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    // ||scaled|| <= 0.5, so 20 terms leave a remainder far below 1e-16
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Exact zero-order-hold discretization.
///
/// `exp([[A, B], [0, 0]] Ts) = [[Ad, Bd], [0, I]]`.
pub fn discretize(ss: &StateSpace, sample_time: f64) -> Result<DiscretePlant> {
    if !(sample_time.is_finite() && sample_time > 0.0) {
        return Err(Error::param("sample_time", format!("must be > 0, got {sample_time}")));
    }
    let n = ss.order();
    let mut aug = DMatrix::<f64>::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = ss.a[i * n + j] * sample_time;
        }
        aug[(i, n)] = ss.b[i] * sample_time;
    }
    let phi = expm(&aug);
    let ad = phi.view((0, 0), (n, n)).into_owned();
    let bd = phi.view((0, n), (n, 1)).column(0).into_owned();
    Ok(DiscretePlant {
        ad,
        bd,
        c: DVector::from_column_slice(&ss.c),
        d: ss.d,
        sample_time,
        state: DVector::zeros(n),
    })
}

/// Sampled plant carrying its own internal state.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretePlant {
    ad: DMatrix<f64>,
    bd: DVector<f64>,
    c: DVector<f64>,
    d: f64,
    sample_time: f64,
    state: DVector<f64>,
}

impl DiscretePlant {
    pub fn sample_time(&self) -> f64 {
        self.sample_time
    }
    pub fn ad(&self) -> &DMatrix<f64> {
        &self.ad
    }
    pub fn bd(&self) -> &DVector<f64> {
        &self.bd
    }
    pub fn state(&self) -> &DVector<f64> {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state.fill(0.0);
    }

    /// Current output `C x` (no feedthrough: the plant is strictly proper).
    pub fn output(&self) -> f64 {
        self.c.dot(&self.state)
    }

    /// Applies `u` for one sample interval and returns the new output.
    pub fn step(&mut self, u: f64) -> Result<f64> {
        if !u.is_finite() {
            return Err(Error::NonFiniteInput(format!("plant input {u}")));
        }
        let next = &self.ad * &self.state + &self.bd * u;
        self.state = next;
        Ok(self.output())
    }

    /// Steady-state output per unit constant input, `C (I - Ad)^-1 Bd`.
    pub fn dc_gain(&self) -> Option<f64> {
        let n = self.state.len();
        let m = DMatrix::<f64>::identity(n, n) - &self.ad;
        m.lu().solve(&self.bd).map(|x| self.c.dot(&x) + self.d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(a: f64) -> StateSpace {
        StateSpace::new(1, vec![a], vec![1.0], vec![1.0], 0.0).unwrap()
    }

    #[test]
    fn integrator_discretizes_to_accumulator() {
        let plant = discretize(&scalar(0.0), 0.1).unwrap();
        assert_eq!(plant.ad()[(0, 0)], 1.0);
        assert!((plant.bd()[0] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn first_order_lag_matches_closed_form() {
        let plant = discretize(&scalar(-1.0), 0.1).unwrap();
        let e = (-0.1f64).exp();
        assert!((plant.ad()[(0, 0)] - e).abs() < 1e-14);
        assert!((plant.bd()[0] - (1.0 - e)).abs() < 1e-14);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let theta = 2.5;
        let m = DMatrix::from_row_slice(2, 2, &[0.0, -theta, theta, 0.0]);
        let e = expm(&m);
        assert!((e[(0, 0)] - theta.cos()).abs() < 1e-13);
        assert!((e[(1, 0)] - theta.sin()).abs() < 1e-13);
    }

    #[test]
    fn zero_state_zero_input_stays_zero() {
        let mut plant = discretize(&scalar(-2.0), 0.1).unwrap();
        for _ in 0..100 {
            assert_eq!(plant.step(0.0).unwrap(), 0.0);
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let mut plant = discretize(&scalar(-2.0), 0.1).unwrap();
        assert!(matches!(plant.step(f64::NAN), Err(Error::NonFiniteInput(_))));
        assert!(discretize(&scalar(-2.0), 0.0).is_err());
    }
}
