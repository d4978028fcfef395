use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::neural::lm::NormalAccumulator;
use crate::neural::persist::{self, Document, Section};
use crate::neural::{levenberg_marquardt, Affine, LeastSquares, Mlp, NormalEquations, TrainConfig, DEFAULT_HIDDEN};
use crate::sysid::NarxModel;

use super::nmpc::OneStepModel;
use super::{ControlAction, Controller, ReferenceModel, DEFAULT_U_LIMITS};

/// Controller-network structure and the training reference signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MrcConfig {
    pub ref_taps: usize,
    pub y_taps: usize,
    pub u_taps: usize,
    pub hidden: usize,
    /// Range of the random training set-points.
    pub reference_range: (f64, f64),
    /// Range of set-point hold times, s.
    pub hold_range: (f64, f64),
    pub segments: usize,
    /// Weight on squared control moves in the training loss.
    pub move_weight: f64,
    pub u_limits: (f64, f64),
    /// Independent initializations; the lowest final loss wins.
    pub restarts: usize,
}

impl Default for MrcConfig {
    fn default() -> Self {
        Self {
            ref_taps: 2,
            y_taps: 2,
            u_taps: 2,
            hidden: DEFAULT_HIDDEN,
            reference_range: (-4.5, 4.5),
            hold_range: (8.0, 15.0),
            segments: 16,
            move_weight: 0.0,
            u_limits: DEFAULT_U_LIMITS,
            restarts: 1,
        }
    }
}

impl MrcConfig {
    fn inputs(&self) -> usize {
        self.ref_taps + self.y_taps + self.u_taps
    }

    pub fn validate(&self) -> Result<()> {
        if self.ref_taps == 0 || self.y_taps == 0 || self.u_taps == 0 {
            return Err(Error::param("taps", "every tap count must be at least 1"));
        }
        if !(self.reference_range.0 <= self.reference_range.1) {
            return Err(Error::param("reference_range", "empty range"));
        }
        if !(self.hold_range.0 > 0.0 && self.hold_range.0 <= self.hold_range.1) {
            return Err(Error::param("hold_range", "need 0 < min <= max"));
        }
        if self.segments == 0 || self.restarts == 0 {
            return Err(Error::param("segments", "segments and restarts must be at least 1"));
        }
        if !(self.u_limits.0 < self.u_limits.1) {
            return Err(Error::param("u_limits", "lower limit must be below upper limit"));
        }
        Ok(())
    }
}

/// Neural controller trained so the closed loop behaves like a reference model.
///
/// At run time only the controller network and live signals are used; the
/// plant surrogate is kept solely for inspection and may be dropped.
#[derive(Debug, Clone)]
pub struct MrcController {
    pub net: Mlp,
    pub u_scale: Affine,
    pub y_scale: Affine,
    pub ref_model: ReferenceModel,
    pub u_limits: (f64, f64),
    ref_taps: usize,
    y_taps: usize,
    u_taps: usize,
    r_hist: Vec<f64>,
    y_hist: Vec<f64>,
    u_hist: Vec<f64>,
    surrogate: Option<NarxModel>,
}

#[derive(Debug, Clone)]
pub struct MrcTraining {
    pub controller: MrcController,
    pub initial_loss: f64,
    pub loss_history: Vec<f64>,
}

impl MrcController {
    pub fn new(
        net: Mlp,
        u_scale: Affine,
        y_scale: Affine,
        ref_model: ReferenceModel,
        taps: (usize, usize, usize),
        u_limits: (f64, f64),
    ) -> Result<Self> {
        let (ref_taps, y_taps, u_taps) = taps;
        if net.input_size() != ref_taps + y_taps + u_taps || net.output_size() != 1 {
            return Err(Error::Dimension {
                expected: ref_taps + y_taps + u_taps,
                actual: net.input_size(),
            });
        }
        let mut out = Self {
            net,
            u_scale,
            y_scale,
            ref_model,
            u_limits,
            ref_taps,
            y_taps,
            u_taps,
            r_hist: vec![],
            y_hist: vec![],
            u_hist: vec![],
            surrogate: None,
        };
        out.reset();
        Ok(out)
    }

    pub fn taps(&self) -> (usize, usize, usize) {
        (self.ref_taps, self.y_taps, self.u_taps)
    }

    pub fn surrogate(&self) -> Option<&NarxModel> {
        self.surrogate.as_ref()
    }

    pub fn drop_surrogate(&mut self) {
        self.surrogate = None;
    }

    fn input(&self) -> Vec<f64> {
        self.r_hist.iter().chain(&self.y_hist).chain(&self.u_hist).copied().collect()
    }

    /// One control step from the set-point `r(k)` and measurement `y(k)`.
    pub fn step(&mut self, r: f64, y_meas: f64) -> f64 {
        push(&mut self.r_hist, self.y_scale.normalize(r));
        push(&mut self.y_hist, self.y_scale.normalize(y_meas));
        let u = self.u_scale.denormalize(self.net.eval_scalar(&self.input()));
        let u = u.clamp(self.u_limits.0, self.u_limits.1);
        push(&mut self.u_hist, self.u_scale.normalize(u));
        u
    }

    pub fn to_document(&self) -> Document {
        let mut doc = Document::default();
        let mut s = Section::new("model");
        s.set("kind", "model_reference")
            .set("ref_taps", self.ref_taps)
            .set("y_taps", self.y_taps)
            .set("u_taps", self.u_taps);
        doc.push(s);
        let mut rm = Section::new("reference_model");
        rm.set_real("zeta", self.ref_model.zeta)
            .set_real("omega_n", self.ref_model.omega_n)
            .set_real("sample_time", self.ref_model.sample_time());
        doc.push(rm);
        let mut lim = Section::new("limits");
        lim.set_real("u_min", self.u_limits.0).set_real("u_max", self.u_limits.1);
        doc.push(lim);
        doc.push(persist::scaling_section("normalization", &[("u", self.u_scale), ("y", self.y_scale)]));
        doc.push(persist::mlp_section("controller", &self.net));
        doc
    }

    pub fn from_document(doc: &Document) -> Result<Self> {
        let s = doc.require("model")?;
        if s.require("kind")? != "model_reference" {
            return Err(Error::Parse {
                line: 0,
                reason: "model kind is not `model_reference`".into(),
            });
        }
        let rm = doc.require("reference_model")?;
        let lim = doc.require("limits")?;
        let norm = doc.require("normalization")?;
        Self::new(
            persist::read_mlp(doc, "controller")?,
            persist::read_scaling(norm, "u")?,
            persist::read_scaling(norm, "y")?,
            ReferenceModel::new(rm.parse("zeta")?, rm.parse("omega_n")?, rm.parse("sample_time")?)?,
            (s.parse("ref_taps")?, s.parse("y_taps")?, s.parse("u_taps")?),
            (lim.parse("u_min")?, lim.parse("u_max")?),
        )
    }
}

fn push(hist: &mut [f64], v: f64) {
    hist.rotate_right(1);
    hist[0] = v;
}

impl Controller for MrcController {
    fn control(&mut self, k: usize, y_meas: f64, reference: &dyn Fn(usize) -> f64) -> Result<ControlAction> {
        let u = self.step(reference(k), y_meas);
        if !u.is_finite() {
            return Err(Error::ControllerFault {
                step: k,
                reason: "controller network output is not finite".into(),
            });
        }
        Ok(ControlAction { u, warning: false })
    }

    fn reset(&mut self) {
        let y0 = self.y_scale.normalize(0.0);
        self.r_hist = vec![y0; self.ref_taps];
        self.y_hist = vec![y0; self.y_taps];
        self.u_hist = vec![self.u_scale.normalize(0.0); self.u_taps];
    }
}

/// Random set-point schedule for training, one value per sample.
pub(crate) fn training_reference(cfg: &MrcConfig, sample_time: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = (cfg.hold_range.0 / sample_time).round().max(1.0) as usize;
    let hi = ((cfg.hold_range.1 / sample_time).round() as usize).max(lo);
    let mut r = Vec::new();
    for _ in 0..cfg.segments {
        let level = if cfg.reference_range.0 == cfg.reference_range.1 {
            cfg.reference_range.0
        } else {
            rng.gen_range(cfg.reference_range.0..=cfg.reference_range.1)
        };
        let len = rng.gen_range(lo..=hi);
        r.extend(std::iter::repeat_n(level, len));
    }
    r
}

/// Closed-loop tracking of the reference model through the plant surrogate,
/// differentiated by forward sensitivity propagation.
struct ClosedLoopFit<'a> {
    template: Mlp,
    surrogate: &'a NarxModel,
    cfg: MrcConfig,
    /// Scaled set-points.
    r: Vec<f64>,
    /// Scaled reference-model outputs, `target[k]` is for sample `k + 1`.
    target: Vec<f64>,
    u_bounds: (f64, f64),
}

impl ClosedLoopFit<'_> {
    fn rollout(&self, params: &[f64], mut acc: Option<&mut NormalAccumulator>) -> Option<f64> {
        let mut net = self.template.clone();
        net.set_params(params);
        let p = params.len();
        let want_jac = acc.is_some();
        let cfg = &self.cfg;
        let sy = self.surrogate.y_scale;
        let su = self.surrogate.u_scale;
        let oy = self.surrogate.output_delays;
        let ou = self.surrogate.input_delays;
        let ny = oy.max(cfg.y_taps);
        let nu = ou.max(cfg.u_taps);
        let zero_sens = || if want_jac { vec![0.0; p] } else { Vec::new() };

        let mut r_hist = vec![sy.normalize(0.0); cfg.ref_taps];
        let mut y_hist = vec![sy.normalize(0.0); ny];
        let mut u_hist = vec![su.normalize(0.0); nu];
        let mut y_sens: Vec<Vec<f64>> = (0..ny).map(|_| zero_sens()).collect();
        let mut u_sens: Vec<Vec<f64>> = (0..nu).map(|_| zero_sens()).collect();
        let mut row = zero_sens();
        let mut sse = 0.0;
        let mut x_ctl = vec![0.0; cfg.inputs()];
        let mut x_plant = vec![0.0; oy + ou];
        let move_w = cfg.move_weight.sqrt();

        for k in 0..self.r.len() {
            push(&mut r_hist, self.r[k]);
            // controller
            x_ctl[..cfg.ref_taps].copy_from_slice(&r_hist);
            x_ctl[cfg.ref_taps..cfg.ref_taps + cfg.y_taps].copy_from_slice(&y_hist[..cfg.y_taps]);
            x_ctl[cfg.ref_taps + cfg.y_taps..].copy_from_slice(&u_hist[..cfg.u_taps]);
            let trace = net.trace_unchecked(&x_ctl);
            let raw = trace.output()[0];
            let u = raw.clamp(self.u_bounds.0, self.u_bounds.1);
            let mut s_u = zero_sens();
            if want_jac && u == raw {
                let dx = net.backward(&trace, &[1.0], Some(&mut s_u));
                for i in 0..cfg.y_taps {
                    axpy(&mut s_u, dx[cfg.ref_taps + i], &y_sens[i]);
                }
                for i in 0..cfg.u_taps {
                    axpy(&mut s_u, dx[cfg.ref_taps + cfg.y_taps + i], &u_sens[i]);
                }
            }
            if move_w > 0.0 {
                let dv = move_w * (u - u_hist[0]);
                sse += dv * dv;
                if let Some(acc) = acc.as_deref_mut() {
                    for ((rv, a), b) in row.iter_mut().zip(&s_u).zip(&u_sens[0]) {
                        *rv = move_w * (a - b);
                    }
                    acc.add(&row, dv);
                }
            }
            push(&mut u_hist, u);
            u_sens.rotate_right(1);
            u_sens[0] = s_u;

            // surrogate plant, y(k+1)
            x_plant[..oy].copy_from_slice(&y_hist[..oy]);
            x_plant[oy..].copy_from_slice(&u_hist[..ou]);
            let (y_next, dx) = self.surrogate.predict_scaled(&x_plant);
            let mut s_y = zero_sens();
            if want_jac {
                for i in 0..oy {
                    axpy(&mut s_y, dx[i], &y_sens[i]);
                }
                for i in 0..ou {
                    axpy(&mut s_y, dx[oy + i], &u_sens[i]);
                }
            }
            let err = y_next - self.target[k];
            if !err.is_finite() {
                return None;
            }
            sse += err * err;
            if let Some(acc) = acc.as_deref_mut() {
                acc.add(&s_y, err);
            }
            push(&mut y_hist, y_next);
            y_sens.rotate_right(1);
            y_sens[0] = s_y;
        }
        sse.is_finite().then_some(sse)
    }
}

fn axpy(dst: &mut [f64], a: f64, x: &[f64]) {
    if a == 0.0 {
        return;
    }
    for (d, &v) in dst.iter_mut().zip(x) {
        *d += a * v;
    }
}

impl LeastSquares for ClosedLoopFit<'_> {
    fn num_params(&self) -> usize {
        self.template.num_params()
    }

    fn num_residuals(&self) -> usize {
        self.r.len() * if self.cfg.move_weight > 0.0 { 2 } else { 1 }
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

/// Trains the controller network through the identified plant so that the
/// surrogate closed loop follows `ref_model` on random set-point steps.
pub fn train_mrc(
    surrogate: &NarxModel,
    ref_model: &ReferenceModel,
    train_cfg: &TrainConfig,
    cfg: &MrcConfig,
) -> Result<MrcTraining> {
    train_cfg.validate()?;
    cfg.validate()?;
    let su = surrogate.u_scale;
    let sy = surrogate.y_scale;
    let r_phys = training_reference(cfg, ref_model.sample_time(), train_cfg.seed);
    let target_phys = ref_model.simulate(&r_phys);
    let (a, b) = (su.normalize(cfg.u_limits.0), su.normalize(cfg.u_limits.1));
    let mut best: Option<(Vec<f64>, f64, Vec<f64>, Mlp)> = None;
    for restart in 0..cfg.restarts {
        let seed = train_cfg.seed.wrapping_add(0x5851_f42d_4c95_7f2d_u64.wrapping_mul(restart as u64 + 1));
        let template = Mlp::new(&[cfg.inputs(), cfg.hidden, 1], seed);
        let problem = ClosedLoopFit {
            template: template.clone(),
            surrogate,
            cfg: *cfg,
            r: r_phys.iter().map(|&v| sy.normalize(v)).collect(),
            target: target_phys.iter().map(|&v| sy.normalize(v)).collect(),
            u_bounds: (a.min(b), a.max(b)),
        };
        let report = levenberg_marquardt(&problem, &template.params(), &train_cfg.lm_options()).ok_or_else(|| {
            Error::TrainingFailed {
                epoch: 0,
                reason: "closed-loop rollout is not finite at the initial weights".into(),
            }
        })?;
        let better = best.as_ref().is_none_or(|(_, loss, _, _)| report.final_loss() < *loss);
        if better {
            let mut net = template;
            net.set_params(&report.params);
            best = Some((vec![report.initial_loss], report.final_loss(), report.loss_history, net));
        }
    }
    let (initial, _, loss_history, net) = best.expect("restarts >= 1");
    let mut controller = MrcController::new(
        net,
        su,
        sy,
        ref_model.clone(),
        (cfg.ref_taps, cfg.y_taps, cfg.u_taps),
        cfg.u_limits,
    )?;
    controller.surrogate = Some(surrogate.clone());
    Ok(MrcTraining {
        controller,
        initial_loss: initial[0],
        loss_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Layer;

    /// Surrogate `y(k+1) = 0.8 y(k) + 0.2 u(k)` (unity DC gain), identity scaling.
    fn first_order_surrogate() -> NarxModel {
        let mut w = vec![0.0; 8];
        w[0] = 0.8;
        w[4] = 0.2;
        NarxModel {
            net: Mlp::from_layers(vec![Layer {
                inputs: 8,
                outputs: 1,
                weights: w,
                bias: vec![0.0],
            }])
            .unwrap(),
            u_scale: Affine::IDENTITY,
            y_scale: Affine::IDENTITY,
            input_delays: 4,
            output_delays: 4,
        }
    }

    fn small_cfg() -> MrcConfig {
        MrcConfig {
            reference_range: (-1.0, 1.0),
            segments: 6,
            u_limits: (-20.0, 20.0),
            ..Default::default()
        }
    }

    #[test]
    fn sensitivities_match_finite_differences() {
        let surrogate = first_order_surrogate();
        let rm = ReferenceModel::with_defaults(0.1).unwrap();
        let cfg = MrcConfig {
            move_weight: 0.01,
            ..small_cfg()
        };
        let r_phys = training_reference(&cfg, 0.1, 1);
        let template = Mlp::new(&[6, 6, 1], 2);
        let problem = ClosedLoopFit {
            template: template.clone(),
            surrogate: &surrogate,
            cfg,
            target: rm.simulate(&r_phys),
            r: r_phys,
            u_bounds: (-20.0, 20.0),
        };
        let p = template.params();
        let eq = problem.normal_equations(&p).unwrap();
        // gradient of sse is 2 J^T r
        for i in (0..p.len()).step_by(5) {
            let h = 1e-6;
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp[i] += h;
            pm[i] -= h;
            let fd = (problem.sse(&pp).unwrap() - problem.sse(&pm).unwrap()) / (2.0 * h);
            let an = 2.0 * eq.jtr[i];
            assert!((fd - an).abs() <= 1e-5 * fd.abs().max(1.0), "param {i}: {fd} vs {an}");
        }
    }

    #[test]
    fn training_reduces_tracking_error_and_is_deterministic() {
        let surrogate = first_order_surrogate();
        let rm = ReferenceModel::with_defaults(0.1).unwrap();
        let train_cfg = TrainConfig {
            epochs: 30,
            ..TrainConfig::with_seed(7)
        };
        let a = train_mrc(&surrogate, &rm, &train_cfg, &small_cfg()).unwrap();
        let b = train_mrc(&surrogate, &rm, &train_cfg, &small_cfg()).unwrap();
        assert_eq!(a.controller.net, b.controller.net);
        assert!(a.loss_history.windows(2).all(|w| w[1] <= w[0]));
        assert!(*a.loss_history.last().unwrap() < 0.1 * a.initial_loss);
    }

    #[test]
    fn runtime_ignores_surrogate() {
        let surrogate = first_order_surrogate();
        let rm = ReferenceModel::with_defaults(0.1).unwrap();
        let train_cfg = TrainConfig {
            epochs: 5,
            ..TrainConfig::with_seed(1)
        };
        let trained = train_mrc(&surrogate, &rm, &train_cfg, &small_cfg()).unwrap().controller;
        assert!(trained.surrogate().is_some());
        let mut with = trained.clone();
        let mut without = trained;
        without.drop_surrogate();
        for k in 0..50 {
            let y = (k as f64 * 0.1).sin();
            assert_eq!(with.step(1.0, y), without.step(1.0, y));
        }
    }

    #[test]
    fn document_round_trip() {
        let ctl = MrcController::new(
            Mlp::new(&[6, 6, 1], 3),
            Affine::from_range(-200.0, 200.0),
            Affine::from_range(-5.0, 5.0),
            ReferenceModel::with_defaults(0.1).unwrap(),
            (2, 2, 2),
            (-200.0, 200.0),
        )
        .unwrap();
        let back = MrcController::from_document(&Document::parse(&ctl.to_document().render()).unwrap()).unwrap();
        assert_eq!(back.net, ctl.net);
        assert_eq!(back.ref_model, ctl.ref_model);
        assert_eq!(back.u_limits, ctl.u_limits);
    }
}
