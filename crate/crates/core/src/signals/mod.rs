//! Reference signals, sensor noise and response metrics.

mod metrics;
mod noise;
mod reference;

pub use metrics::{step_metrics, step_metrics_with, track_metrics, StepMetrics, StepMetricsConfig, TrackMetrics};
pub use noise::{noise_sequence, NoiseConfig, SensorNoise};
pub use reference::{ReferenceKind, ReferenceSignal};
