use crate::error::{Error, Result};
use crate::plant::{discretize, DiscretePlant, TransferFunction};

/// Second-order target dynamics `wn^2 / (s^2 + 2 zeta wn s + wn^2)` sampled
/// with a zero-order hold.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceModel {
    pub zeta: f64,
    pub omega_n: f64,
    plant: DiscretePlant,
}

impl ReferenceModel {
    pub const DEFAULT_ZETA: f64 = 0.8;
    pub const DEFAULT_OMEGA_N: f64 = 1.0;

    pub fn new(zeta: f64, omega_n: f64, sample_time: f64) -> Result<Self> {
        if !(zeta > 0.0 && zeta < 1.0) {
            return Err(Error::param("zeta", format!("need 0 < zeta < 1, got {zeta}")));
        }
        if !(omega_n > 0.0 && omega_n.is_finite()) {
            return Err(Error::param("omega_n", format!("need omega_n > 0, got {omega_n}")));
        }
        let w2 = omega_n * omega_n;
        let tf = TransferFunction::new(vec![w2], vec![1.0, 2.0 * zeta * omega_n, w2])?;
        Ok(Self {
            zeta,
            omega_n,
            plant: discretize(&tf.to_state_space()?, sample_time)?,
        })
    }

    pub fn with_defaults(sample_time: f64) -> Result<Self> {
        Self::new(Self::DEFAULT_ZETA, Self::DEFAULT_OMEGA_N, sample_time)
    }

    pub fn sample_time(&self) -> f64 {
        self.plant.sample_time()
    }

    pub fn output(&self) -> f64 {
        self.plant.output()
    }

    /// Holds `r` for one sample and returns the model output at the end of it.
    pub fn step(&mut self, r: f64) -> f64 {
        // r comes from a validated reference signal
        self.plant.step(r).unwrap_or(f64::NAN)
    }

    pub fn reset(&mut self) {
        self.plant.reset();
    }

    /// Model response to the whole reference sequence from rest. Element `k`
    /// is the output at sample `k + 1`.
    pub fn simulate(&self, r: &[f64]) -> Vec<f64> {
        let mut m = self.clone();
        m.reset();
        r.iter().map(|&v| m.step(v)).collect()
    }
}
