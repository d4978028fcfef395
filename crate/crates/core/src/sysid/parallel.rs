use crate::error::{Error, Result};
use crate::neural::lm::NormalAccumulator;
use crate::neural::{levenberg_marquardt, LeastSquares, Mlp, NormalEquations, TrainConfig};

use super::{rmse, split_index, Dataset, NarxModel, TRAIN_FRACTION};

/// NARX model after free-run refinement.
#[derive(Debug, Clone)]
pub struct ParallelRefinement {
    pub model: NarxModel,
    pub initial_mse: f64,
    pub loss_history: Vec<f64>,
    /// RMSE of one free-run simulation over the whole held-out tail.
    pub validation_free_run_rmse: f64,
}

/// Free-run (parallel) simulation error over windows of the training record.
struct FreeRunFit<'a> {
    template: Mlp,
    model: &'a NarxModel,
    /// Scaled record.
    y: Vec<f64>,
    u: Vec<f64>,
    starts: Vec<usize>,
    window: usize,
}

impl FreeRunFit<'_> {
    fn rollout(&self, params: &[f64], mut acc: Option<&mut NormalAccumulator>) -> Option<f64> {
        let mut net = self.template.clone();
        net.set_params(params);
        let p = params.len();
        let (ny, nu) = (self.model.output_delays, self.model.input_delays);
        let mut sse = 0.0;
        let mut x = vec![0.0; ny + nu];
        for &s in &self.starts {
            let mut y_hist: Vec<f64> = (1..=ny).map(|i| self.y[s - i]).collect();
            let mut sens: Vec<Vec<f64>> = if acc.is_some() { vec![vec![0.0; p]; ny] } else { vec![] };
            for k in s..s + self.window {
                x[..ny].copy_from_slice(&y_hist);
                for i in 0..nu {
                    x[ny + i] = self.u[k - 1 - i];
                }
                let trace = net.trace_unchecked(&x);
                let pred = trace.output()[0];
                let err = pred - self.y[k];
                if !err.is_finite() {
                    return None;
                }
                sse += err * err;
                if let Some(acc) = acc.as_deref_mut() {
                    let mut row = vec![0.0; p];
                    let dx = net.backward(&trace, &[1.0], Some(&mut row));
                    for i in 0..ny {
                        if dx[i] != 0.0 {
                            for (r, s) in row.iter_mut().zip(&sens[i]) {
                                *r += dx[i] * s;
                            }
                        }
                    }
                    acc.add(&row, err);
                    sens.rotate_right(1);
                    sens[0] = row;
                }
                y_hist.rotate_right(1);
                y_hist[0] = pred;
            }
        }
        sse.is_finite().then_some(sse)
    }
}

impl LeastSquares for FreeRunFit<'_> {
    fn num_params(&self) -> usize {
        self.template.num_params()
    }

    fn num_residuals(&self) -> usize {
        self.starts.len() * self.window
    }

    fn sse(&self, params: &[f64]) -> Option<f64> {
        self.rollout(params, None)
    }

    fn normal_equations(&self, params: &[f64]) -> Option<NormalEquations> {
        let mut acc = NormalAccumulator::new(params.len());
        self.rollout(params, Some(&mut acc))?;
        acc.finish()
    }
}

/// Retrains a NARX model on its own free-run error: consecutive windows of
/// `window` samples of the training part of the record are simulated from
/// measured initial histories and the squared simulation error is minimized
/// by Levenberg-Marquardt with forward sensitivities. Series-parallel
/// training fits one-step errors only, which leaves the steady-state gain
/// poorly determined for slow plants; this pass fixes that.
pub fn refine_narx_parallel(
    model: &NarxModel,
    data: &Dataset,
    cfg: &TrainConfig,
    window: usize,
) -> Result<ParallelRefinement> {
    cfg.validate()?;
    if window == 0 {
        return Err(Error::param("window", "must be at least 1"));
    }
    let delays = model.max_delay();
    let split = split_index(data.len());
    let starts: Vec<usize> = (delays..split).step_by(window).filter(|s| s + window <= split).collect();
    if starts.is_empty() {
        return Err(Error::InsufficientData {
            needed: ((delays + window) as f64 / TRAIN_FRACTION).ceil() as usize,
            actual: data.len(),
        });
    }
    let problem = FreeRunFit {
        template: model.net.clone(),
        model,
        y: data.y.iter().map(|&v| model.y_scale.normalize(v)).collect(),
        u: data.u.iter().map(|&v| model.u_scale.normalize(v)).collect(),
        starts,
        window,
    };
    let report = levenberg_marquardt(&problem, &model.net.params(), &cfg.lm_options()).ok_or_else(|| {
        Error::TrainingFailed {
            epoch: 0,
            reason: "free-run simulation is not finite at the starting weights".into(),
        }
    })?;
    let mut refined = model.clone();
    refined.net.set_params(&report.params);
    let start = split;
    let validation_free_run_rmse = if start < data.len() {
        let sim = refined.free_run(data, start, data.len() - start);
        rmse(sim.into_iter().zip(data.y[start..].iter().copied()))
    } else {
        0.0
    };
    Ok(ParallelRefinement {
        model: refined,
        initial_mse: report.initial_loss,
        loss_history: report.loss_history,
        validation_free_run_rmse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Affine;
    use crate::neural::Layer;

    /// Record of `y(k) = 0.9 y(k-1) + 0.1 u(k-1)` under a square wave.
    fn first_order_data() -> Dataset {
        let n = 600;
        let u: Vec<f64> = (0..n).map(|k| if (k / 50) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let mut y = vec![0.0; n];
        for k in 1..n {
            y[k] = 0.9 * y[k - 1] + 0.1 * u[k - 1];
        }
        Dataset::new(u, y, 0.1).unwrap()
    }

    fn linear_model(a: f64, b: f64) -> NarxModel {
        NarxModel {
            net: Mlp::from_layers(vec![Layer {
                inputs: 2,
                outputs: 1,
                weights: vec![a, b],
                bias: vec![0.0],
            }])
            .unwrap(),
            u_scale: Affine::IDENTITY,
            y_scale: Affine::IDENTITY,
            input_delays: 1,
            output_delays: 1,
        }
    }

    #[test]
    fn recovers_gain_from_a_biased_start() {
        let data = first_order_data();
        // one-step error is small but the steady-state gain is 0.12/0.08 = 1.5
        let start = linear_model(0.92, 0.12);
        let cfg = TrainConfig {
            epochs: 50,
            ..TrainConfig::default()
        };
        let out = refine_narx_parallel(&start, &data, &cfg, 100).unwrap();
        let w = &out.model.net.layers()[0].weights;
        assert!((w[0] - 0.9).abs() < 1e-6 && (w[1] - 0.1).abs() < 1e-6, "{w:?}");
        assert!(out.validation_free_run_rmse < 1e-6);
        assert!(out.loss_history.windows(2).all(|p| p[1] <= p[0]));
    }

    #[test]
    fn sensitivities_match_finite_differences() {
        let data = first_order_data();
        let model = NarxModel {
            net: Mlp::new(&[2, 3, 1], 5),
            ..linear_model(0.0, 0.0)
        };
        let problem = FreeRunFit {
            template: model.net.clone(),
            model: &model,
            y: data.y.clone(),
            u: data.u.clone(),
            starts: vec![1, 200],
            window: 80,
        };
        let p = model.net.params();
        let eq = problem.normal_equations(&p).unwrap();
        for i in 0..p.len() {
            let h = 1e-6;
            let (mut a, mut b) = (p.clone(), p.clone());
            a[i] += h;
            b[i] -= h;
            let fd = (problem.sse(&a).unwrap() - problem.sse(&b).unwrap()) / (2.0 * h);
            assert!((fd - 2.0 * eq.jtr[i]).abs() <= 1e-5 * fd.abs().max(1.0), "{i}: {fd} vs {}", 2.0 * eq.jtr[i]);
        }
    }

    #[test]
    fn window_longer_than_record_is_rejected() {
        let data = first_order_data();
        assert!(matches!(
            refine_narx_parallel(&linear_model(0.9, 0.1), &data, &TrainConfig::default(), 1000),
            Err(Error::InsufficientData { .. })
        ));
    }
}
