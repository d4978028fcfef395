use crate::error::{Error, Result};

use super::lm::{levenberg_marquardt, LeastSquares, LmOptions, NormalAccumulator, NormalEquations};
use super::Mlp;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainAlgorithm {
    LevenbergMarquardt,
    GradientMomentum,
}

/// Training settings. The epoch budget defaults to 65.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub seed: u64,
    pub algorithm: TrainAlgorithm,
    pub lm_lambda_init: f64,
    pub lr: f64,
    pub momentum: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 65,
            seed: 0,
            algorithm: TrainAlgorithm::LevenbergMarquardt,
            lm_lambda_init: 1e-3,
            lr: 0.05,
            momentum: 0.9,
        }
    }
}

impl TrainConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::param("epochs", "must be at least 1"));
        }
        if !(self.lm_lambda_init > 0.0 && self.lm_lambda_init.is_finite()) {
            return Err(Error::param("lm_lambda_init", "must be finite and > 0"));
        }
        if !(self.lr.is_finite() && self.momentum.is_finite()) {
            return Err(Error::param("lr", "learning rate and momentum must be finite"));
        }
        Ok(())
    }

    pub(crate) fn lm_options(&self) -> LmOptions {
        LmOptions {
            max_iterations: self.epochs,
            lambda_init: self.lm_lambda_init,
            ..LmOptions::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: Mlp,
    pub initial_mse: f64,
    /// Mean squared error after each epoch.
    pub loss_history: Vec<f64>,
}

impl TrainOutcome {
    pub fn final_mse(&self) -> f64 {
        self.loss_history.last().copied().unwrap_or(self.initial_mse)
    }
}

struct MlpFit<'a> {
    net: Mlp,
    inputs: &'a [Vec<f64>],
    targets: &'a [Vec<f64>],
}

impl MlpFit<'_> {
    fn with_params(&self, params: &[f64]) -> Mlp {
        let mut net = self.net.clone();
        net.set_params(params);
        net
    }
}

impl LeastSquares for MlpFit<'_> {
    fn num_params(&self) -> usize {
        self.net.num_params()
    }

    fn num_residuals(&self) -> usize {
        self.inputs.len() * self.net.output_size()
    }

    fn sse(&self, params: &[f64]) -> Option<f64> {
        let net = self.with_params(params);
        let sse: f64 = self
            .inputs
            .iter()
            .zip(self.targets)
            .map(|(x, t)| {
                net.forward_unchecked(x)
                    .iter()
                    .zip(t)
                    .map(|(y, t)| (y - t).powi(2))
                    .sum::<f64>()
            })
            .sum();
        sse.is_finite().then_some(sse)
    }

    fn normal_equations(&self, params: &[f64]) -> Option<NormalEquations> {
        let net = self.with_params(params);
        let n = net.num_params();
        let outputs = net.output_size();
        let mut acc = NormalAccumulator::new(n);
        let mut row = vec![0.0; n];
        let mut seed = vec![0.0; outputs];
        for (x, t) in self.inputs.iter().zip(self.targets) {
            let trace = net.trace_unchecked(x);
            for o in 0..outputs {
                row.iter_mut().for_each(|v| *v = 0.0);
                seed.iter_mut().for_each(|v| *v = 0.0);
                seed[o] = 1.0;
                net.backward(&trace, &seed, Some(&mut row));
                acc.add(&row, trace.output()[o] - t[o]);
            }
        }
        acc.finish()
    }
}

fn check_dataset(net: &Mlp, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if inputs.len() != targets.len() {
        return Err(Error::Dimension {
            expected: inputs.len(),
            actual: targets.len(),
        });
    }
    for (x, t) in inputs.iter().zip(targets) {
        if x.len() != net.input_size() {
            return Err(Error::Dimension {
                expected: net.input_size(),
                actual: x.len(),
            });
        }
        if t.len() != net.output_size() {
            return Err(Error::Dimension {
                expected: net.output_size(),
                actual: t.len(),
            });
        }
        if x.iter().chain(t).any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
    }
    Ok(())
}

/// Fits `net` to the input/target pairs by minimizing the mean squared error.
///
/// The returned network never has a larger training error than the one
/// passed in.
pub fn train(net: &Mlp, inputs: &[Vec<f64>], targets: &[Vec<f64>], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_dataset(net, inputs, targets)?;
    let problem = MlpFit {
        net: net.clone(),
        inputs,
        targets,
    };
    let start = net.params();
    let (params, initial_mse, loss_history) = match cfg.algorithm {
        TrainAlgorithm::LevenbergMarquardt => {
            let report = levenberg_marquardt(&problem, &start, &cfg.lm_options()).ok_or_else(|| {
                Error::TrainingFailed {
                    epoch: 0,
                    reason: "non-finite loss at the initial weights".into(),
                }
            })?;
            (report.params, report.initial_loss, report.loss_history)
        }
        TrainAlgorithm::GradientMomentum => gradient_momentum(&problem, &start, cfg)?,
    };
    Ok(TrainOutcome {
        net: problem.with_params(&params),
        initial_mse,
        loss_history,
    })
}

/// Full-batch gradient descent with heavy-ball momentum, keeping the best
/// iterate seen.
pub(crate) fn gradient_momentum<P: LeastSquares>(
    problem: &P,
    start: &[f64],
    cfg: &TrainConfig,
) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let m = problem.num_residuals().max(1) as f64;
    let mut params = start.to_vec();
    let mut velocity = vec![0.0; params.len()];
    let first = problem.normal_equations(&params).ok_or_else(|| Error::TrainingFailed {
        epoch: 0,
        reason: "non-finite loss at the initial weights".into(),
    })?;
    let initial = first.sse / m;
    let mut best = (initial, params.clone());
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut eq = Some(first);
    for _ in 0..cfg.epochs {
        let Some(current) = eq.take() else { break };
        for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(current.jtr.iter()) {
            // d(mean sq)/dθ = 2 J^T r / m
            *v = cfg.momentum * *v - cfg.lr * 2.0 * g / m;
            *p += *v;
        }
        eq = problem.normal_equations(&params);
        let loss = eq.as_ref().map(|e| e.sse / m).unwrap_or(f64::INFINITY);
        if loss < best.0 {
            best = (loss, params.clone());
        }
        history.push(best.0);
    }
    Ok((best.1, initial, history))
}
