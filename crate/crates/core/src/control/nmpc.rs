use crate::error::{Error, Result};
use crate::neural::Affine;
use crate::sysid::NarxModel;

use super::optimizer::{minimize_box, BoxMinimum, QuasiNewtonOptions};
use super::{ControlAction, Controller, DEFAULT_U_LIMITS};

/// A one-step-ahead predictor in scaled coordinates, usable for rollouts.
pub trait OneStepModel {
    fn input_delays(&self) -> usize;
    fn output_delays(&self) -> usize;
    fn u_scale(&self) -> Affine;
    fn y_scale(&self) -> Affine;
    /// Scaled prediction of `y(k)` from the scaled regressor
    /// `[y(k-1), ..., u(k-1), ...]`, with its gradient in the regressor.
    fn predict_scaled(&self, x: &[f64]) -> (f64, Vec<f64>);
}

impl OneStepModel for NarxModel {
    fn input_delays(&self) -> usize {
        self.input_delays
    }
    fn output_delays(&self) -> usize {
        self.output_delays
    }
    fn u_scale(&self) -> Affine {
        self.u_scale
    }
    fn y_scale(&self) -> Affine {
        self.y_scale
    }
    fn predict_scaled(&self, x: &[f64]) -> (f64, Vec<f64>) {
        self.net.eval_with_input_grad(x)
    }
}

/// Receding-horizon settings. Tracking errors and control moves are both
/// measured in the model's scaled units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmpcConfig {
    /// First predicted sample included in the tracking cost.
    pub n1: usize,
    /// Last predicted sample included in the tracking cost.
    pub n2: usize,
    /// Number of free moves; later moves repeat the last one.
    pub nu: usize,
    /// Weight on squared control moves.
    pub rho: f64,
    pub u_limits: (f64, f64),
    pub optimizer: QuasiNewtonOptions,
}

impl Default for NmpcConfig {
    fn default() -> Self {
        Self {
            n1: 1,
            n2: 7,
            nu: 2,
            rho: 0.05,
            u_limits: DEFAULT_U_LIMITS,
            optimizer: QuasiNewtonOptions::default(),
        }
    }
}

impl NmpcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.n1 && self.n1 <= self.n2) {
            return Err(Error::param("n1", "need 1 <= N1 <= N2"));
        }
        if !(1 <= self.nu && self.nu <= self.n2) {
            return Err(Error::param("nu", "need 1 <= Nu <= N2"));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::param("rho", "must be >= 0"));
        }
        if !(self.u_limits.0 < self.u_limits.1) {
            return Err(Error::param("u_limits", "lower limit must be below upper limit"));
        }
        Ok(())
    }
}

/// Diagnostics of the most recent optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct NmpcStep {
    /// Applied input, physical units.
    pub u: f64,
    /// Optimal scaled move sequence.
    pub solution: Vec<f64>,
    pub cost: f64,
    /// Cost at the warm-start point.
    pub warm_cost: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct NmpcController<M: OneStepModel = NarxModel> {
    model: M,
    cfg: NmpcConfig,
    /// Scaled `y(k), y(k-1), ...`.
    y_hist: Vec<f64>,
    /// Scaled `u(k-1), u(k-2), ...`.
    u_hist: Vec<f64>,
    previous: Option<Vec<f64>>,
    last: Option<NmpcStep>,
}

impl<M: OneStepModel> NmpcController<M> {
    pub fn new(model: M, cfg: NmpcConfig) -> Result<Self> {
        cfg.validate()?;
        let mut out = Self {
            y_hist: vec![],
            u_hist: vec![],
            model,
            cfg,
            previous: None,
            last: None,
        };
        out.reset_histories();
        Ok(out)
    }

    fn reset_histories(&mut self) {
        let ys = self.model.y_scale();
        let us = self.model.u_scale();
        self.y_hist = vec![ys.normalize(0.0); self.model.output_delays()];
        self.u_hist = vec![us.normalize(0.0); self.model.input_delays()];
        self.previous = None;
        self.last = None;
    }

    pub fn config(&self) -> &NmpcConfig {
        &self.cfg
    }

    pub fn last_step(&self) -> Option<&NmpcStep> {
        self.last.as_ref()
    }

    /// Overwrites the histories (physical units, newest first): `y(k-1), ...`
    /// and `u(k-1), ...`. The next measurement becomes `y(k)`.
    pub fn set_histories(&mut self, y_hist: &[f64], u_hist: &[f64]) {
        let ys = self.model.y_scale();
        let us = self.model.u_scale();
        for (dst, &v) in self.y_hist.iter_mut().zip(y_hist) {
            *dst = ys.normalize(v);
        }
        for (dst, &v) in self.u_hist.iter_mut().zip(u_hist) {
            *dst = us.normalize(v);
        }
    }

    fn scaled_bounds(&self) -> (f64, f64) {
        let us = self.model.u_scale();
        let (a, b) = (us.normalize(self.cfg.u_limits.0), us.normalize(self.cfg.u_limits.1));
        (a.min(b), a.max(b))
    }

    /// Cost and gradient of the scaled move sequence `v` against the scaled
    /// references `r[j]` for samples `k + 1 + j`.
    pub fn cost(&self, v: &[f64], r: &[f64]) -> (f64, Vec<f64>) {
        let cfg = &self.cfg;
        assert!(r.len() >= cfg.n2, "one reference per horizon sample");
        let nu = v.len();
        let oy = self.model.output_delays();
        let ou = self.model.input_delays();
        let mut y_hist: Vec<f64> = self.y_hist.clone();
        let mut y_sens: Vec<Vec<f64>> = vec![vec![0.0; nu]; oy];
        // u(k-1), u(k-2), ... ; sensitivities are zero for past moves
        let mut u_hist: Vec<f64> = self.u_hist.clone();
        let mut u_sens: Vec<Vec<f64>> = vec![vec![0.0; nu]; ou];
        let mut cost = 0.0;
        let mut grad = vec![0.0; nu];
        let mut x = vec![0.0; oy + ou];
        for (j, &rj) in r.iter().enumerate().take(cfg.n2) {
            let m = j.min(nu - 1);
            u_hist.insert(0, v[m]);
            u_hist.truncate(ou);
            let mut e = vec![0.0; nu];
            e[m] = 1.0;
            u_sens.insert(0, e);
            u_sens.truncate(ou);
            x[..oy].copy_from_slice(&y_hist[..oy]);
            x[oy..].copy_from_slice(&u_hist[..ou]);
            let (yp, dx) = self.model.predict_scaled(&x);
            let mut sens = vec![0.0; nu];
            for (i, s) in y_sens.iter().enumerate() {
                for (acc, &sv) in sens.iter_mut().zip(s) {
                    *acc += dx[i] * sv;
                }
            }
            for (i, s) in u_sens.iter().enumerate() {
                for (acc, &sv) in sens.iter_mut().zip(s) {
                    *acc += dx[oy + i] * sv;
                }
            }
            if j + 1 >= cfg.n1 {
                let err = rj - yp;
                cost += err * err;
                for (g, s) in grad.iter_mut().zip(&sens) {
                    *g -= 2.0 * err * s;
                }
            }
            y_hist.insert(0, yp);
            y_hist.truncate(oy);
            y_sens.insert(0, sens);
            y_sens.truncate(oy);
        }
        for j in 0..nu {
            let prev = if j == 0 { self.u_hist[0] } else { v[j - 1] };
            let dv = v[j] - prev;
            cost += cfg.rho * dv * dv;
            grad[j] += 2.0 * cfg.rho * dv;
            if j > 0 {
                grad[j - 1] -= 2.0 * cfg.rho * dv;
            }
        }
        (cost, grad)
    }

    fn cost_with_fallback(&self, v: &[f64], r: &[f64]) -> (f64, Vec<f64>) {
        let (c, g) = self.cost(v, r);
        if g.iter().all(|x| x.is_finite()) {
            return (c, g);
        }
        let h = 1e-6;
        let g = (0..v.len())
            .map(|i| {
                let mut vp = v.to_vec();
                let mut vm = v.to_vec();
                vp[i] += h;
                vm[i] -= h;
                (self.cost(&vp, r).0 - self.cost(&vm, r).0) / (2.0 * h)
            })
            .collect();
        (c, g)
    }

    /// Solves the horizon problem for the current histories and scaled
    /// references, returning the best of the restarts.
    pub fn optimize(&self, r: &[f64]) -> (BoxMinimum, f64) {
        let nu = self.cfg.nu;
        let (lo, hi) = self.scaled_bounds();
        let los = vec![lo; nu];
        let his = vec![hi; nu];
        let warm: Vec<f64> = match &self.previous {
            Some(prev) => (0..nu).map(|j| prev[(j + 1).min(nu - 1)]).collect(),
            None => vec![self.u_hist[0]; nu],
        }
        .into_iter()
        .map(|v| v.clamp(lo, hi))
        .collect();
        let span = 0.1 * (hi - lo);
        let starts = [
            warm.clone(),
            vec![0.5 * (lo + hi); nu],
            warm.iter().map(|v| v + span).collect::<Vec<_>>(),
            warm.iter().map(|v| v - span).collect::<Vec<_>>(),
        ];
        let warm_cost = self.cost(&warm, r).0;
        let f = |v: &[f64]| self.cost_with_fallback(v, r);
        let best = starts
            .iter()
            .map(|s| minimize_box(f, s, &los, &his, &self.cfg.optimizer))
            .reduce(|best, cand| if cand.value < best.value { cand } else { best })
            .expect("at least one start");
        (best, warm_cost)
    }
}

impl<M: OneStepModel> Controller for NmpcController<M> {
    fn control(&mut self, k: usize, y_meas: f64, reference: &dyn Fn(usize) -> f64) -> Result<ControlAction> {
        if !y_meas.is_finite() {
            return Err(Error::ControllerFault {
                step: k,
                reason: format!("measurement is not finite ({y_meas})"),
            });
        }
        let ys = self.model.y_scale();
        self.y_hist.insert(0, ys.normalize(y_meas));
        self.y_hist.truncate(self.model.output_delays());
        let r: Vec<f64> = (1..=self.cfg.n2).map(|j| ys.normalize(reference(k + j))).collect();
        let (best, warm_cost) = self.optimize(&r);
        if !best.value.is_finite() {
            return Err(Error::ControllerFault {
                step: k,
                reason: "prediction cost is not finite".into(),
            });
        }
        let u_scaled = best.x[0];
        let u = self.model.u_scale().denormalize(u_scaled).clamp(self.cfg.u_limits.0, self.cfg.u_limits.1);
        self.u_hist.insert(0, u_scaled);
        self.u_hist.truncate(self.model.input_delays());
        let warning = !best.converged;
        self.last = Some(NmpcStep {
            u,
            solution: best.x.clone(),
            cost: best.value,
            warm_cost,
            converged: best.converged,
        });
        self.previous = Some(best.x);
        Ok(ControlAction { u, warning })
    }

    fn reset(&mut self) {
        self.reset_histories();
    }
}
