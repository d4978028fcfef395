use crate::error::{Error, Result};
use crate::neural::lm::NormalAccumulator;
use crate::neural::persist::{self, Document, Section};
use crate::neural::{
    levenberg_marquardt, Affine, LeastSquares, Mlp, NormalEquations, TrainAlgorithm, TrainConfig, DEFAULT_DELAYS,
    DEFAULT_HIDDEN,
};

use super::narx::{check_length, fraction};
use super::{rmse, split_index, Dataset};

/// Structure of the affine-in-control model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NarmaL2Config {
    /// Prediction distance `d` in samples: the model predicts `y(k + d)`.
    pub horizon: usize,
    pub input_delays: usize,
    pub output_delays: usize,
    pub hidden: usize,
    /// Smallest admissible `|g|` in scaled units.
    pub g_floor: f64,
}

impl NarmaL2Config {
    /// Prediction distance used for the valve plant, 1.5 s at 0.1 s sampling.
    pub const PLANT_HORIZON: usize = 15;
}

impl Default for NarmaL2Config {
    fn default() -> Self {
        Self {
            horizon: Self::PLANT_HORIZON,
            input_delays: DEFAULT_DELAYS,
            output_delays: DEFAULT_DELAYS,
            hidden: DEFAULT_HIDDEN,
            g_floor: 1e-3,
        }
    }
}

/// `y(k + d) = f(y(k), ..., u(k-1), ...) + g(y(k), ..., u(k-1), ...) u(k)`,
/// all signals in scaled units.
#[derive(Debug, Clone, PartialEq)]
pub struct NarmaL2Model {
    pub f_net: Mlp,
    pub g_net: Mlp,
    pub u_scale: Affine,
    pub y_scale: Affine,
    pub input_delays: usize,
    pub output_delays: usize,
    pub horizon: usize,
}

#[derive(Debug, Clone)]
pub struct NarmaL2Identification {
    pub model: NarmaL2Model,
    pub initial_mse: f64,
    pub loss_history: Vec<f64>,
    pub output_range: f64,
    /// Held-out RMSE of the `d`-step prediction, physical units.
    pub validation_rmse: f64,
    /// Smallest `|g|` over (up to 1000) training regressors.
    pub min_abs_g: f64,
}

impl NarmaL2Identification {
    pub fn validation_fraction(&self) -> f64 {
        fraction(self.validation_rmse, self.output_range)
    }
}

impl NarmaL2Model {
    pub fn max_delay(&self) -> usize {
        self.output_delays.saturating_sub(1).max(self.input_delays)
    }

    /// Scaled regressor from `y(k), y(k-1), ...` and `u(k-1), u(k-2), ...`.
    pub fn regressor(&self, y_hist: &[f64], u_hist: &[f64]) -> Vec<f64> {
        y_hist[..self.output_delays]
            .iter()
            .map(|&y| self.y_scale.normalize(y))
            .chain(u_hist[..self.input_delays].iter().map(|&u| self.u_scale.normalize(u)))
            .collect()
    }

    /// `(f, g)` in scaled units.
    pub fn f_g(&self, y_hist: &[f64], u_hist: &[f64]) -> (f64, f64) {
        let x = self.regressor(y_hist, u_hist);
        (self.f_net.eval_scalar(&x), self.g_net.eval_scalar(&x))
    }

    /// Predicted `y(k + d)` in physical units for the control `u`.
    pub fn predict(&self, y_hist: &[f64], u_hist: &[f64], u: f64) -> f64 {
        let (f, g) = self.f_g(y_hist, u_hist);
        self.y_scale.denormalize(f + g * self.u_scale.normalize(u))
    }

    fn regressor_at(&self, data: &Dataset, k: usize) -> Vec<f64> {
        let y_hist: Vec<f64> = (0..self.output_delays).map(|i| data.y[k - i]).collect();
        let u_hist: Vec<f64> = (1..=self.input_delays).map(|i| data.u[k - i]).collect();
        self.regressor(&y_hist, &u_hist)
    }

    pub fn to_document(&self) -> Document {
        let mut doc = Document::default();
        let mut model = Section::new("model");
        model
            .set("kind", "narma_l2")
            .set("input_delays", self.input_delays)
            .set("output_delays", self.output_delays)
            .set("horizon", self.horizon);
        doc.push(model);
        doc.push(persist::scaling_section("normalization", &[("u", self.u_scale), ("y", self.y_scale)]));
        doc.push(persist::mlp_section("f", &self.f_net));
        doc.push(persist::mlp_section("g", &self.g_net));
        doc
    }

    pub fn from_document(doc: &Document) -> Result<Self> {
        let model = doc.require("model")?;
        if model.require("kind")? != "narma_l2" {
            return Err(Error::Parse {
                line: 0,
                reason: "model kind is not `narma_l2`".into(),
            });
        }
        let norm = doc.require("normalization")?;
        Ok(Self {
            f_net: persist::read_mlp(doc, "f")?,
            g_net: persist::read_mlp(doc, "g")?,
            u_scale: persist::read_scaling(norm, "u")?,
            y_scale: persist::read_scaling(norm, "y")?,
            input_delays: model.parse("input_delays")?,
            output_delays: model.parse("output_delays")?,
            horizon: model.parse("horizon")?,
        })
    }
}

/// Training rows: regressor, scaled control, scaled target.
struct Rows {
    x: Vec<Vec<f64>>,
    u: Vec<f64>,
    target: Vec<f64>,
}

struct AffineFit<'a> {
    f: Mlp,
    g: Mlp,
    rows: &'a Rows,
}

impl AffineFit<'_> {
    fn nets(&self, params: &[f64]) -> (Mlp, Mlp) {
        let nf = self.f.num_params();
        let mut f = self.f.clone();
        let mut g = self.g.clone();
        f.set_params(&params[..nf]);
        g.set_params(&params[nf..]);
        (f, g)
    }
}

impl LeastSquares for AffineFit<'_> {
    fn num_params(&self) -> usize {
        self.f.num_params() + self.g.num_params()
    }

    fn num_residuals(&self) -> usize {
        self.rows.x.len()
    }

    fn sse(&self, params: &[f64]) -> Option<f64> {
        let (f, g) = self.nets(params);
        let sse: f64 = (0..self.rows.x.len())
            .map(|i| {
                let x = &self.rows.x[i];
                (f.eval_scalar(x) + g.eval_scalar(x) * self.rows.u[i] - self.rows.target[i]).powi(2)
            })
            .sum();
        sse.is_finite().then_some(sse)
    }

    fn normal_equations(&self, params: &[f64]) -> Option<NormalEquations> {
        let (f, g) = self.nets(params);
        let nf = f.num_params();
        let n = nf + g.num_params();
        let mut acc = NormalAccumulator::new(n);
        let mut row = vec![0.0; n];
        for i in 0..self.rows.x.len() {
            let x = &self.rows.x[i];
            let u = self.rows.u[i];
            row.iter_mut().for_each(|v| *v = 0.0);
            let tf = f.trace_unchecked(x);
            let tg = g.trace_unchecked(x);
            f.backward(&tf, &[1.0], Some(&mut row[..nf]));
            g.backward(&tg, &[u], Some(&mut row[nf..]));
            let r = tf.output()[0] + tg.output()[0] * u - self.rows.target[i];
            acc.add(&row, r);
        }
        acc.finish()
    }
}

/// Jointly trains `f` and `g` on the series-parallel `d`-step predictor.
pub fn identify_narma_l2(data: &Dataset, train_cfg: &TrainConfig, cfg: &NarmaL2Config) -> Result<NarmaL2Identification> {
    train_cfg.validate()?;
    if cfg.horizon == 0 {
        return Err(Error::param("horizon", "must be at least 1"));
    }
    let first = cfg.output_delays.saturating_sub(1).max(cfg.input_delays);
    check_length(data, first + cfg.horizon)?;
    let inputs = cfg.input_delays + cfg.output_delays;
    let mut model = NarmaL2Model {
        f_net: Mlp::new(&[inputs, cfg.hidden, 1], train_cfg.seed),
        g_net: Mlp::new(&[inputs, cfg.hidden, 1], train_cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15)),
        u_scale: Affine::fit(&data.u),
        y_scale: Affine::fit(&data.y),
        input_delays: cfg.input_delays,
        output_delays: cfg.output_delays,
        horizon: cfg.horizon,
    };
    // The controller re-solves every sample as if u(k) were held for d
    // samples, so only rows where the record holds u(k) over the horizon are
    // consistent with the model.
    let held = |k: usize| data.u[k..k + cfg.horizon].iter().all(|&v| v == data.u[k]);
    let rows_for = |range: std::ops::Range<usize>| {
        let ks: Vec<usize> = range.filter(|&k| held(k)).collect();
        Rows {
            x: ks.iter().map(|&k| model.regressor_at(data, k)).collect(),
            u: ks.iter().map(|&k| model.u_scale.normalize(data.u[k])).collect(),
            target: ks.iter().map(|&k| model.y_scale.normalize(data.y[k + cfg.horizon])).collect(),
        }
    };
    let last = data.len() - cfg.horizon;
    let split = split_index(last).clamp(first + 1, last);
    let train_rows = rows_for(first..split);
    if train_rows.x.is_empty() {
        return Err(Error::InsufficientData {
            needed: first + cfg.horizon + 1,
            actual: 0,
        });
    }
    let problem = AffineFit {
        f: model.f_net.clone(),
        g: model.g_net.clone(),
        rows: &train_rows,
    };
    let start: Vec<f64> = model.f_net.params().into_iter().chain(model.g_net.params()).collect();
    let (params, initial_mse, loss_history) = match train_cfg.algorithm {
        TrainAlgorithm::LevenbergMarquardt => {
            let report = levenberg_marquardt(&problem, &start, &train_cfg.lm_options()).ok_or_else(|| {
                Error::TrainingFailed {
                    epoch: 0,
                    reason: "non-finite loss at the initial weights".into(),
                }
            })?;
            (report.params, report.initial_loss, report.loss_history)
        }
        TrainAlgorithm::GradientMomentum => crate::neural::train_gradient_momentum(&problem, &start, train_cfg)?,
    };
    let val = rows_for(split..last);
    let (f, g) = problem.nets(&params);
    model.f_net = f;
    model.g_net = g;

    let stride = (train_rows.x.len() / 1000).max(1);
    let g_abs: Vec<f64> = train_rows.x.iter().step_by(stride).map(|x| model.g_net.eval_scalar(x).abs()).collect();
    let min_abs_g = g_abs.iter().copied().fold(f64::INFINITY, f64::min);
    if g_abs.iter().all(|&g| g < cfg.g_floor) {
        return Err(Error::IdentificationFailed(format!(
            "control gain g is below {} on every training regressor",
            cfg.g_floor
        )));
    }

    let validation_rmse = rmse((0..val.x.len()).map(|i| {
        let x = &val.x[i];
        let pred = model.f_net.eval_scalar(x) + model.g_net.eval_scalar(x) * val.u[i];
        (model.y_scale.denormalize(pred), model.y_scale.denormalize(val.target[i]))
    }));
    Ok(NarmaL2Identification {
        model,
        initial_mse,
        loss_history,
        output_range: data.output_range(),
        validation_rmse,
        min_abs_g,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Record of `y(k+1) = 0.5 y(k) + 0.3 u(k)` under random inputs.
    fn affine_system(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut y = vec![0.0; n];
        for k in 0..n - 1 {
            y[k + 1] = 0.5 * y[k] + 0.3 * u[k];
        }
        Dataset::new(u, y, 0.1).unwrap()
    }

    fn one_step_cfg() -> NarmaL2Config {
        NarmaL2Config {
            horizon: 1,
            ..Default::default()
        }
    }

    #[test]
    fn recovers_synthetic_affine_system() {
        let data = affine_system(600, 3);
        let id = identify_narma_l2(&data, &TrainConfig::with_seed(3), &one_step_cfg()).unwrap();
        let split = split_index(data.len() - 1);
        let mut worst = 0.0f64;
        for k in split..data.len() - 1 {
            let y_hist: Vec<f64> = (0..4).map(|i| if k >= i { data.y[k - i] } else { 0.0 }).collect();
            let u_hist: Vec<f64> = (1..=4).map(|i| if k >= i { data.u[k - i] } else { 0.0 }).collect();
            let pred = id.model.predict(&y_hist, &u_hist, data.u[k]);
            worst = worst.max((pred - data.y[k + 1]).abs());
        }
        assert!(worst < 1e-3, "worst held-out error {worst}");
    }

    #[test]
    fn loss_is_non_increasing() {
        let data = affine_system(300, 4);
        let id = identify_narma_l2(&data, &TrainConfig::with_seed(4), &one_step_cfg()).unwrap();
        assert!(id.loss_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(id.loss_history.last().copied().unwrap_or(id.initial_mse) <= id.initial_mse);
    }

    #[test]
    fn input_free_record_has_degenerate_gain() {
        // y does not depend on u at all, and u is zero: g is unidentifiable and
        // stays wherever it started, but u = 0 makes every g a perfect fit.
        let n = 300;
        let y: Vec<f64> = (0..n).map(|k| (k as f64 * 0.05).sin()).collect();
        let data = Dataset::new(vec![0.0; n], y, 0.1).unwrap();
        let cfg = NarmaL2Config {
            g_floor: 1e6,
            ..one_step_cfg()
        };
        assert!(matches!(
            identify_narma_l2(&data, &TrainConfig::default(), &cfg),
            Err(Error::IdentificationFailed(_))
        ));
    }

    #[test]
    fn document_round_trip() {
        let data = affine_system(200, 5);
        let id = identify_narma_l2(
            &data,
            &TrainConfig {
                epochs: 3,
                ..TrainConfig::default()
            },
            &one_step_cfg(),
        )
        .unwrap();
        let doc = Document::parse(&id.model.to_document().render()).unwrap();
        assert_eq!(NarmaL2Model::from_document(&doc).unwrap(), id.model);
    }
}
