use crate::error::{Error, Result};
use crate::neural::persist::{self, Document, Section};
use crate::neural::{train, Affine, Mlp, TrainConfig, TrainOutcome, DEFAULT_DELAYS, DEFAULT_HIDDEN};

use rayon::prelude::*;

use super::{rmse, split_index, Dataset};

/// One-step-ahead neural predictor
/// `y(k) = N(y(k-1), ..., y(k-ny), u(k-1), ..., u(k-nu))`.
///
/// The network works on signals scaled to `[-1, 1]`; the scalings are part of
/// the model.
#[derive(Debug, Clone, PartialEq)]
pub struct NarxModel {
    pub net: Mlp,
    pub u_scale: Affine,
    pub y_scale: Affine,
    pub input_delays: usize,
    pub output_delays: usize,
}

/// Identified NARX model with its fit statistics.
#[derive(Debug, Clone)]
pub struct NarxIdentification {
    pub model: NarxModel,
    pub training: TrainOutcome,
    /// Spread of the recorded output, used to express errors as fractions.
    pub output_range: f64,
    /// One-step RMSE on the held-out tail of the record.
    pub validation_rmse: f64,
    /// RMSE of a 100-step free-run simulation on the held-out tail.
    pub free_run_rmse: f64,
}

impl NarxIdentification {
    pub fn validation_fraction(&self) -> f64 {
        fraction(self.validation_rmse, self.output_range)
    }
    pub fn free_run_fraction(&self) -> f64 {
        fraction(self.free_run_rmse, self.output_range)
    }
}

pub(crate) fn fraction(err: f64, range: f64) -> f64 {
    if range > 0.0 {
        err / range
    } else {
        err
    }
}

/// Steps simulated in the free-run check.
pub const FREE_RUN_STEPS: usize = 100;

impl NarxModel {
    pub fn regressor_len(&self) -> usize {
        self.input_delays + self.output_delays
    }

    pub fn max_delay(&self) -> usize {
        self.input_delays.max(self.output_delays)
    }

    /// Scaled regressor from physical histories, newest first.
    pub fn regressor(&self, y_hist: &[f64], u_hist: &[f64]) -> Vec<f64> {
        y_hist[..self.output_delays]
            .iter()
            .map(|&y| self.y_scale.normalize(y))
            .chain(u_hist[..self.input_delays].iter().map(|&u| self.u_scale.normalize(u)))
            .collect()
    }

    /// Predicted next output from physical histories `y(k-1).., u(k-1)..`.
    pub fn predict(&self, y_hist: &[f64], u_hist: &[f64]) -> f64 {
        self.y_scale.denormalize(self.net.eval_scalar(&self.regressor(y_hist, u_hist)))
    }

    /// Regressor for predicting `y[k]` from the record.
    pub(crate) fn regressor_at(&self, data: &Dataset, k: usize) -> Vec<f64> {
        let y_hist: Vec<f64> = (1..=self.output_delays).map(|i| data.y[k - i]).collect();
        let u_hist: Vec<f64> = (1..=self.input_delays).map(|i| data.u[k - i]).collect();
        self.regressor(&y_hist, &u_hist)
    }

    /// One-step predictions for every `k` in `range` (each `k >= max_delay`).
    pub fn one_step(&self, data: &Dataset, range: std::ops::Range<usize>) -> Vec<f64> {
        range
            .map(|k| self.y_scale.denormalize(self.net.eval_scalar(&self.regressor_at(data, k))))
            .collect()
    }

    /// Parallel-mode simulation: from sample `start`, feeds predictions back
    /// as output regressors while taking inputs from the record.
    pub fn free_run(&self, data: &Dataset, start: usize, steps: usize) -> Vec<f64> {
        assert!(start >= self.max_delay());
        let mut y: Vec<f64> = data.y[..start].to_vec();
        for k in start..(start + steps).min(data.len()) {
            let y_hist: Vec<f64> = (1..=self.output_delays).map(|i| y[k - i]).collect();
            let u_hist: Vec<f64> = (1..=self.input_delays).map(|i| data.u[k - i]).collect();
            y.push(self.predict(&y_hist, &u_hist));
        }
        y.split_off(start)
    }

    pub fn to_document(&self) -> Document {
        let mut doc = Document::default();
        let mut model = Section::new("model");
        model
            .set("kind", "narx")
            .set("input_delays", self.input_delays)
            .set("output_delays", self.output_delays);
        doc.push(model);
        doc.push(persist::scaling_section("normalization", &[("u", self.u_scale), ("y", self.y_scale)]));
        doc.push(persist::mlp_section("plant", &self.net));
        doc
    }

    pub fn from_document(doc: &Document) -> Result<Self> {
        let model = doc.require("model")?;
        if model.require("kind")? != "narx" {
            return Err(Error::Parse {
                line: 0,
                reason: "model kind is not `narx`".into(),
            });
        }
        let norm = doc.require("normalization")?;
        let out = Self {
            net: persist::read_mlp(doc, "plant")?,
            u_scale: persist::read_scaling(norm, "u")?,
            y_scale: persist::read_scaling(norm, "y")?,
            input_delays: model.parse("input_delays")?,
            output_delays: model.parse("output_delays")?,
        };
        if out.net.input_size() != out.regressor_len() || out.net.output_size() != 1 {
            return Err(Error::Dimension {
                expected: out.regressor_len(),
                actual: out.net.input_size(),
            });
        }
        Ok(out)
    }
}

pub(crate) fn check_length(data: &Dataset, delays: usize) -> Result<()> {
    let needed = delays + 10;
    if data.len() <= needed {
        return Err(Error::InsufficientData {
            needed,
            actual: data.len(),
        });
    }
    Ok(())
}

/// Series-parallel identification with 4/4 delays and 6 hidden units.
/// Initializations tried by [`identify_narx`].
pub const NARX_CANDIDATES: usize = 4;
const CANDIDATE_SEED_STRIDE: u64 = 0x9E37_79B9;

/// Mean squared error of back-to-back free-run windows over `delays..split`.
/// Diverging simulations score infinity.
fn training_free_run_mse(model: &NarxModel, data: &Dataset, delays: usize, split: usize) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    let mut start = delays;
    while start + FREE_RUN_STEPS <= split {
        let sim = model.free_run(data, start, FREE_RUN_STEPS);
        for (a, b) in sim.iter().zip(&data.y[start..]) {
            sum += (a - b).powi(2);
        }
        n += sim.len();
        start += FREE_RUN_STEPS;
    }
    let mse = if n == 0 { 0.0 } else { sum / n as f64 };
    if mse.is_finite() {
        mse
    } else {
        f64::INFINITY
    }
}

pub fn identify_narx(data: &Dataset, cfg: &TrainConfig) -> Result<NarxIdentification> {
    identify_narx_with(data, cfg, DEFAULT_DELAYS, DEFAULT_DELAYS, DEFAULT_HIDDEN, NARX_CANDIDATES)
}

pub fn identify_narx_with(
    data: &Dataset,
    cfg: &TrainConfig,
    input_delays: usize,
    output_delays: usize,
    hidden: usize,
    candidates: usize,
) -> Result<NarxIdentification> {
    if candidates == 0 {
        return Err(Error::param("candidates", "must be at least 1"));
    }
    let delays = input_delays.max(output_delays);
    check_length(data, delays)?;
    let template = NarxModel {
        net: Mlp::new(&[input_delays + output_delays, hidden, 1], cfg.seed),
        u_scale: Affine::fit(&data.u),
        y_scale: Affine::fit(&data.y),
        input_delays,
        output_delays,
    };
    let split = split_index(data.len()).max(delays + 1);
    let inputs: Vec<Vec<f64>> = (delays..split).map(|k| template.regressor_at(data, k)).collect();
    let targets: Vec<Vec<f64>> = (delays..split).map(|k| vec![template.y_scale.normalize(data.y[k])]).collect();

    // A good one-step fit can still be unstable in free run, so several
    // initializations are trained and judged on the training part alone.
    let trained: Vec<Result<(f64, NarxModel, TrainOutcome)>> = (0..candidates as u64)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i * CANDIDATE_SEED_STRIDE);
            let mut model = NarxModel {
                net: Mlp::new(&[input_delays + output_delays, hidden, 1], seed),
                ..template.clone()
            };
            let training = train(&model.net, &inputs, &targets, &TrainConfig { seed, ..*cfg })?;
            model.net = training.net.clone();
            Ok((training_free_run_mse(&model, data, delays, split), model, training))
        })
        .collect();
    let mut best: Option<(f64, NarxModel, TrainOutcome)> = None;
    for c in trained {
        let c = c?;
        if best.as_ref().is_none_or(|b| c.0 < b.0) {
            best = Some(c);
        }
    }
    let (_, model, training) = best.expect("at least one candidate");

    let val_start = split.max(delays);
    let predicted = model.one_step(data, val_start..data.len());
    let validation_rmse = rmse(predicted.iter().copied().zip(data.y[val_start..].iter().copied()));
    let free = model.free_run(data, val_start, super::narx::FREE_RUN_STEPS);
    let free_run_rmse = rmse(free.iter().copied().zip(data.y[val_start..].iter().copied()));
    Ok(NarxIdentification {
        model,
        training,
        output_range: data.output_range(),
        validation_rmse,
        free_run_rmse,
    })
}
