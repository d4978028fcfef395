use crate::error::{Error, Result};
use crate::neural::TappedDelayLine;
use crate::sysid::NarmaL2Model;

use super::{clamp_to, ControlAction, Controller};

/// Feedback linearization through the identified `f + g u` model: the input
/// is chosen so the predicted output `d` samples ahead equals the reference.
#[derive(Debug, Clone)]
pub struct NarmaL2Controller {
    model: NarmaL2Model,
    y_history: TappedDelayLine,
    u_history: TappedDelayLine,
    pub g_floor: f64,
    pub u_limits: Option<(f64, f64)>,
    /// Aim at `r(k + d)` instead of `r(k + 1)`. Needs the future reference.
    pub preview: bool,
}

impl NarmaL2Controller {
    pub fn new(model: NarmaL2Model, u_limits: Option<(f64, f64)>) -> Self {
        let y_history = TappedDelayLine::new(model.output_delays);
        let u_history = TappedDelayLine::new(model.input_delays);
        Self {
            model,
            y_history,
            u_history,
            g_floor: 1e-3,
            u_limits,
            preview: false,
        }
    }

    pub fn model(&self) -> &NarmaL2Model {
        &self.model
    }

    /// One control step aiming the output `d` samples ahead at `y_target`.
    pub fn step(&mut self, y_target: f64, y_meas: f64) -> std::result::Result<f64, String> {
        self.y_history.push(y_meas);
        let (f, g) = self.model.f_g(&self.y_history.read(), &self.u_history.read());
        if !(f.is_finite() && g.is_finite()) {
            return Err(format!("model output is not finite (f = {f}, g = {g})"));
        }
        let g_eff = if g < 0.0 { -g.abs().max(self.g_floor) } else { g.max(self.g_floor) };
        let u_scaled = (self.model.y_scale.normalize(y_target) - f) / g_eff;
        let u = clamp_to(self.model.u_scale.denormalize(u_scaled), self.u_limits);
        if !u.is_finite() {
            return Err(format!("control is not finite ({u})"));
        }
        self.u_history.push(u);
        Ok(u)
    }
}

impl Controller for NarmaL2Controller {
    fn control(&mut self, k: usize, y_meas: f64, reference: &dyn Fn(usize) -> f64) -> Result<ControlAction> {
        let ahead = if self.preview { self.model.horizon } else { 1 };
        let target = reference(k + ahead);
        let u = self.step(target, y_meas).map_err(|reason| Error::ControllerFault { step: k, reason })?;
        Ok(ControlAction { u, warning: false })
    }

    fn reset(&mut self) {
        self.y_history.clear();
        self.u_history.clear();
    }
}
