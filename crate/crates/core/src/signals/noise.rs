use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Additive sensor disturbance on the measured flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub enabled: bool,
    pub amplitude: f64,
    /// Time constant of the shaping filter, s.
    pub correlation_time: f64,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            amplitude: 0.05,
            correlation_time: 0.5,
            seed: 0,
        }
    }
}

impl NoiseConfig {
    pub fn enabled(seed: u64) -> Self {
        Self {
            enabled: true,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return Err(Error::param("noise_amplitude", "must be finite and >= 0"));
        }
        if !(self.correlation_time > 0.0 && self.correlation_time.is_finite()) {
            return Err(Error::param("noise_correlation_time", "must be > 0"));
        }
        Ok(())
    }
}

/// Hard bound on `|noise| / amplitude`.
const PEAK_BOUND: f64 = 1.5;

/// Band-limited noise: uniform white noise through a first-order low-pass
/// `x[k+1] = a x[k] + b w[k]`, `a = exp(-Ts / tau)`. The input gain is set so
/// the output can never exceed `1.5 * amplitude`; typical peaks over long
/// runs sit near `amplitude`.
#[derive(Debug, Clone)]
pub struct SensorNoise {
    active: bool,
    pole: f64,
    gain: f64,
    state: f64,
    rng: ChaCha8Rng,
}

impl SensorNoise {
    pub fn new(cfg: &NoiseConfig, sample_time: f64) -> Self {
        let pole = (-sample_time / cfg.correlation_time).exp();
        Self {
            active: cfg.enabled && cfg.amplitude > 0.0,
            pole,
            gain: PEAK_BOUND * cfg.amplitude * (1.0 - pole),
            state: 0.0,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        }
    }

    /// Noise value for the current sample, then advances the filter.
    pub fn next_sample(&mut self) -> f64 {
        if !self.active {
            return 0.0;
        }
        let out = self.state;
        let w: f64 = self.rng.gen_range(-1.0..=1.0);
        self.state = self.pole * self.state + self.gain * w;
        out
    }
}

pub fn noise_sequence(cfg: &NoiseConfig, sample_time: f64, n: usize) -> Vec<f64> {
    let mut gen = SensorNoise::new(cfg, sample_time);
    (0..n).map(|_| gen.next_sample()).collect()
}
