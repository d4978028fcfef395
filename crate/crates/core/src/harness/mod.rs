//! Closed-loop experiments: scenario description, the simulation loop, and
//! the table report.

mod bundle;
mod config;
mod output;
mod report;

pub use bundle::{train_bundle, BundleConfig, BundleTraining, ControllerBundle};
pub use config::{parse_scenario_config, scenario_config_keys};
pub use output::{emit_csv, emit_plot, parse_csv, render_csv, render_svg};
pub use report::{reproduce_tables, MetricSummary, Report, Row, ScenarioFamily, SeedDiagnostics, Table};

use std::fmt;
use std::str::FromStr;

use crate::control::Controller;
use crate::error::{Error, Result};
use crate::plant::{paper_plant, DEFAULT_SAMPLE_TIME};
use crate::signals::{
    step_metrics, track_metrics, NoiseConfig, ReferenceKind, ReferenceSignal, SensorNoise, StepMetrics, TrackMetrics,
};

/// Step scenario length, s.
pub const STEP_DURATION: f64 = 30.0;
/// Sine scenario length, s.
pub const SINE_DURATION: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerKind {
    NarmaL2,
    ModelReference,
    NnPredictive,
}

impl ControllerKind {
    pub const ALL: [ControllerKind; 3] = [Self::NarmaL2, Self::ModelReference, Self::NnPredictive];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NarmaL2 => "narma_l2",
            Self::ModelReference => "model_reference",
            Self::NnPredictive => "nn_predictive",
        }
    }

    /// Row label used in the report.
    pub fn label(self) -> &'static str {
        match self {
            Self::NarmaL2 => "NARMA-L2",
            Self::ModelReference => "Model Reference",
            Self::NnPredictive => "NN Predictive",
        }
    }
}

impl fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ControllerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::param("controller", format!("unknown controller `{s}` (narma_l2, model_reference, nn_predictive)")))
    }
}

/// One closed-loop experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub controller: ControllerKind,
    pub reference: ReferenceSignal,
    pub noise: NoiseConfig,
    pub duration: f64,
    pub sample_time: f64,
    /// Training seed of the controller bundle. The noise has its own seed.
    pub seed: u64,
}

impl Scenario {
    /// Unit step for 30 s without noise.
    pub fn step(controller: ControllerKind) -> Self {
        Self {
            controller,
            reference: ReferenceSignal::step(1.0),
            noise: NoiseConfig::default(),
            duration: STEP_DURATION,
            sample_time: DEFAULT_SAMPLE_TIME,
            seed: 0,
        }
    }

    /// Default sine for 100 s without noise.
    pub fn sine(controller: ControllerKind) -> Self {
        Self {
            reference: ReferenceSignal::sine(ReferenceSignal::DEFAULT_SINE_AMPLITUDE, ReferenceSignal::DEFAULT_SINE_FREQUENCY),
            duration: SINE_DURATION,
            ..Self::step(controller)
        }
    }

    pub fn with_noise(mut self, seed: u64) -> Self {
        self.noise = NoiseConfig::enabled(seed);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sample_time > 0.0 && self.sample_time.is_finite()) {
            return Err(Error::param("sample_time", "must be > 0"));
        }
        if !(self.duration >= 10.0 * self.sample_time && self.duration.is_finite()) {
            return Err(Error::param("duration", "must be at least ten sample intervals"));
        }
        self.reference.validate()?;
        self.noise.validate()
    }

    /// Number of simulated samples.
    pub fn steps(&self) -> usize {
        (self.duration / self.sample_time).round() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunMetrics {
    Step(StepMetrics),
    Track(TrackMetrics),
}

/// Controller fault that ended a run early.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFault {
    pub step: usize,
    pub reason: String,
}

/// Simulated time series of one run. Sample `k` holds the reference, the
/// plant output, its measurement, and the input applied over `[t_k, t_k+1)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunRecord {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub y_true: Vec<f64>,
    pub y_measured: Vec<f64>,
    pub u: Vec<f64>,
    pub warnings: Vec<bool>,
    /// Metrics of `y_true`; `None` when the run faulted.
    pub metrics: Option<std::result::Result<RunMetrics, String>>,
    pub fault: Option<RunFault>,
}

impl RunRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn step_metrics(&self) -> Option<&StepMetrics> {
        match self.metrics {
            Some(Ok(RunMetrics::Step(ref m))) => Some(m),
            _ => None,
        }
    }

    pub fn track_metrics(&self) -> Option<&TrackMetrics> {
        match self.metrics {
            Some(Ok(RunMetrics::Track(ref m))) => Some(m),
            _ => None,
        }
    }
}

/// Runs `controller` against a fresh plant. A controller fault ends the run;
/// the samples before it are returned together with the fault.
pub fn simulate(sc: &Scenario, bundle: &ControllerBundle, controller: &mut dyn Controller) -> Result<RunRecord> {
    sc.validate()?;
    if (sc.sample_time - bundle.sample_time).abs() > 1e-12 {
        return Err(Error::param("sample_time", "scenario and trained controllers use different sample times"));
    }
    let mut plant = paper_plant(&bundle.plant, sc.sample_time)?;
    let mut noise = SensorNoise::new(&sc.noise, sc.sample_time);
    controller.reset();
    let reference = |j: usize| sc.reference.sample(j as f64 * sc.sample_time);
    let n = sc.steps();
    let mut rec = RunRecord::default();
    for k in 0..n {
        let t = k as f64 * sc.sample_time;
        let y_true = plant.output();
        let y_meas = y_true + noise.next_sample();
        let action = match controller.control(k, y_meas, &reference) {
            Ok(a) => a,
            Err(e) => {
                rec.fault = Some(RunFault {
                    step: k,
                    reason: e.to_string(),
                });
                return Ok(rec);
            }
        };
        rec.t.push(t);
        rec.r.push(reference(k));
        rec.y_true.push(y_true);
        rec.y_measured.push(y_meas);
        rec.u.push(action.u);
        rec.warnings.push(action.warning);
        plant.step(action.u)?;
    }
    rec.metrics = Some(
        match sc.reference.kind {
            ReferenceKind::Step => {
                let t0 = sc.reference.start_time;
                let start = rec.t.partition_point(|&t| t < t0);
                step_metrics(&rec.t[start..], &rec.y_true[start..], sc.reference.amplitude).map(RunMetrics::Step)
            }
            ReferenceKind::Sine => track_metrics(&rec.y_true).map(RunMetrics::Track),
        }
        .map_err(|e| e.to_string()),
    );
    Ok(rec)
}

/// Runs the scenario's controller from `bundle`.
pub fn run_scenario(sc: &Scenario, bundle: &ControllerBundle) -> Result<RunRecord> {
    let mut controller = bundle.controller(sc.controller)?;
    simulate(sc, bundle, controller.as_mut())
}
