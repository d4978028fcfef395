use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceKind {
    Step,
    Sine,
}

/// Desired steam flow as a function of time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceSignal {
    pub kind: ReferenceKind,
    pub amplitude: f64,
    /// Step switch-on time, s.
    pub start_time: f64,
    /// Sine angular frequency, rad/s.
    pub frequency: f64,
    /// Sine phase, rad.
    pub phase: f64,
}

impl ReferenceSignal {
    pub const DEFAULT_SINE_AMPLITUDE: f64 = 4.0;
    pub const DEFAULT_SINE_FREQUENCY: f64 = 0.2;

    pub fn step(amplitude: f64) -> Self {
        Self {
            kind: ReferenceKind::Step,
            amplitude,
            start_time: 0.0,
            frequency: Self::DEFAULT_SINE_FREQUENCY,
            phase: 0.0,
        }
    }

    pub fn sine(amplitude: f64, frequency: f64) -> Self {
        Self {
            kind: ReferenceKind::Sine,
            amplitude,
            start_time: 0.0,
            frequency,
            phase: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(Error::param("amplitude", "must be finite"));
        }
        if !(self.start_time.is_finite() && self.phase.is_finite()) {
            return Err(Error::param("start_time", "start time and phase must be finite"));
        }
        if self.kind == ReferenceKind::Sine && !(self.frequency > 0.0 && self.frequency.is_finite()) {
            return Err(Error::param("frequency", "sine frequency must be > 0"));
        }
        Ok(())
    }

    pub fn sample(&self, t: f64) -> f64 {
        match self.kind {
            ReferenceKind::Step if t < self.start_time => 0.0,
            ReferenceKind::Step => self.amplitude,
            ReferenceKind::Sine => self.amplitude * (self.frequency * t + self.phase).sin(),
        }
    }
}
