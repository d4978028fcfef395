use crate::error::{Error, Result};

use super::StateSpace;

/// Physical constants of the valve actuator and flow sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActuatorParams {
    /// Coil inductance, H.
    pub inductance: f64,
    /// Coil resistance, ohm.
    pub resistance: f64,
    /// Plunger mass, kg.
    pub mass: f64,
    /// Damping, N·s/m.
    pub damper: f64,
    /// Return spring stiffness, N/m.
    pub spring: f64,
    /// Relay force constant, N/A.
    pub relay_gain: f64,
    /// Flow sensor sensitivity, 1/s.
    pub sensor_sensitivity: f64,
}

impl Default for ActuatorParams {
    fn default() -> Self {
        Self {
            inductance: 1.0,
            resistance: 5.0,
            mass: 1.0,
            damper: 1.0,
            spring: 2.0,
            relay_gain: 0.25,
            sensor_sensitivity: 3.0,
        }
    }
}

impl ActuatorParams {
    /// Checks the parameters. `L`, `m` and `p` set the model order and must be
    /// strictly positive; the remaining constants may be zero.
    pub fn validate(&self) -> Result<()> {
        let order_setting = [
            ("inductance", self.inductance),
            ("mass", self.mass),
            ("sensor_sensitivity", self.sensor_sensitivity),
        ];
        for (field, v) in order_setting {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::param(field, format!("must be finite and > 0, got {v}")));
            }
        }
        let non_negative = [
            ("resistance", self.resistance),
            ("damper", self.damper),
            ("spring", self.spring),
            ("relay_gain", self.relay_gain),
        ];
        for (field, v) in non_negative {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::param(field, format!("must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Rational transfer function with coefficients in descending powers of `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    pub numerator: Vec<f64>,
    pub denominator: Vec<f64>,
}

impl TransferFunction {
    pub fn new(numerator: Vec<f64>, denominator: Vec<f64>) -> Result<Self> {
        let numerator = trim_leading_zeros(numerator);
        let denominator = trim_leading_zeros(denominator);
        if denominator.iter().all(|&c| c == 0.0) {
            return Err(Error::Representation("denominator is identically zero".into()));
        }
        if numerator
            .iter()
            .chain(denominator.iter())
            .any(|c| !c.is_finite())
        {
            return Err(Error::Representation("non-finite coefficient".into()));
        }
        Ok(Self {
            numerator,
            denominator,
        })
    }

    /// Degree of the denominator polynomial.
    pub fn order(&self) -> usize {
        self.denominator.len() - 1
    }

    pub fn is_strictly_proper(&self) -> bool {
        let num_degree = self.numerator.len() - 1;
        let num_is_zero = self.numerator.iter().all(|&c| c == 0.0);
        num_is_zero || num_degree < self.order()
    }

    /// Evaluates the transfer function at a complex point `s = re + j im`.
    pub fn eval(&self, re: f64, im: f64) -> (f64, f64) {
        let (nr, ni) = horner_complex(&self.numerator, re, im);
        let (dr, di) = horner_complex(&self.denominator, re, im);
        let den = dr * dr + di * di;
        ((nr * dr + ni * di) / den, (ni * dr - nr * di) / den)
    }

    pub fn dc_gain(&self) -> f64 {
        self.eval(0.0, 0.0).0
    }

    /// Controllable canonical realization.
    ///
    /// With the monic denominator `s^n + a1 s^(n-1) + ... + an`, the state
    /// matrix is the companion matrix whose last row is `[-an, ..., -a1]`,
    /// `B = e_n`, and `C` holds the numerator coefficients in ascending powers.
    pub fn to_state_space(&self) -> Result<StateSpace> {
        if !self.is_strictly_proper() {
            return Err(Error::Representation(format!(
                "transfer function is not strictly proper (numerator degree {}, denominator degree {})",
                self.numerator.len() - 1,
                self.order()
            )));
        }
        let n = self.order();
        if n == 0 {
            return Err(Error::Representation("zero-order denominator".into()));
        }
        let lead = self.denominator[0];
        let mut a = vec![0.0; n * n];
        for i in 0..n - 1 {
            a[i * n + i + 1] = 1.0;
        }
        for j in 0..n {
            // denominator[n - j] is the coefficient of s^j
            a[(n - 1) * n + j] = -self.denominator[n - j] / lead;
        }
        let mut b = vec![0.0; n];
        b[n - 1] = 1.0;
        let mut c = vec![0.0; n];
        for (power, coeff) in self.numerator.iter().rev().enumerate() {
            c[power] = coeff / lead;
        }
        StateSpace::new(n, a, b, c, 0.0)
    }
}

fn trim_leading_zeros(mut coeffs: Vec<f64>) -> Vec<f64> {
    match coeffs.iter().position(|&c| c != 0.0) {
        Some(i) => {
            coeffs.drain(..i);
            coeffs
        }
        None => vec![0.0],
    }
}

fn horner_complex(coeffs: &[f64], re: f64, im: f64) -> (f64, f64) {
    coeffs.iter().fold((0.0, 0.0), |(ar, ai), &c| {
        (ar * re - ai * im + c, ar * im + ai * re)
    })
}

/// Overall voltage-to-flow transfer function
/// `p k_m / ((L s + R)(s + p)(m s^2 + D s + k))`.
pub fn build_transfer_function(params: &ActuatorParams) -> Result<TransferFunction> {
    params.validate()?;
    let coil = [params.inductance, params.resistance];
    let sensor = [1.0, params.sensor_sensitivity];
    let plunger = [params.mass, params.damper, params.spring];
    let numerator = exact_product(&[&[params.sensor_sensitivity], &[params.relay_gain]])
        .unwrap_or_else(|| vec![params.sensor_sensitivity * params.relay_gain]);
    let denominator = exact_product(&[&coil, &sensor, &plunger])
        .unwrap_or_else(|| poly_mul(&poly_mul(&coil, &sensor), &plunger));
    TransferFunction::new(numerator, denominator)
}

pub(crate) fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

const MAX_DECIMAL_PLACES: u32 = 9;

/// Scaled-integer form of a coefficient list: `values[i] = ints[i] / 10^places`.
fn to_scaled_integers(values: &[f64]) -> Option<(Vec<i128>, u32)> {
    'places: for places in 0..=MAX_DECIMAL_PLACES {
        let scale = 10f64.powi(places as i32);
        let mut ints = Vec::with_capacity(values.len());
        for &v in values {
            let scaled = v * scale;
            if scaled.abs() >= 9.0e15 {
                return None;
            }
            let rounded = scaled.round();
            // the decimal literal must reproduce the stored double exactly
            if rounded / scale != v {
                continue 'places;
            }
            ints.push(rounded as i128);
        }
        return Some((ints, places));
    }
    None
}

/// Multiplies polynomials in exact integer arithmetic when every factor has a
/// short decimal representation. The result is the correctly rounded double of
/// the exact rational product.
fn exact_product(factors: &[&[f64]]) -> Option<Vec<f64>> {
    let mut acc: Vec<i128> = vec![1];
    let mut places = 0u32;
    for factor in factors {
        let (ints, p) = to_scaled_integers(factor)?;
        let mut next = vec![0i128; acc.len() + ints.len() - 1];
        for (i, &x) in acc.iter().enumerate() {
            for (j, &y) in ints.iter().enumerate() {
                next[i + j] = next[i + j].checked_add(x.checked_mul(y)?)?;
            }
        }
        acc = next;
        places += p;
    }
    let denom = 10i128.checked_pow(places)?;
    Some(acc.iter().map(|&n| rational_to_f64(n, denom)).collect())
}

fn rational_to_f64(num: i128, denom: i128) -> f64 {
    if num % denom == 0 {
        return (num / denom) as f64;
    }
    // exact operands below 2^53, so the quotient is correctly rounded
    num as f64 / denom as f64
}
