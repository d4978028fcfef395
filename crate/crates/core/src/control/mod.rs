//! Closed-loop neural control laws.
//!
//! Every controller is driven once per sample with the measured output and a
//! reference preview, and returns the plant input for that sample.

mod mrc;
mod narma_l2;
mod nmpc;
mod optimizer;
mod reference_model;

pub use mrc::{train_mrc, MrcConfig, MrcController, MrcTraining};
pub use narma_l2::NarmaL2Controller;
pub use nmpc::{NmpcConfig, NmpcController, NmpcStep, OneStepModel};
pub use optimizer::{minimize_box, BoxMinimum, QuasiNewtonOptions};
pub use reference_model::ReferenceModel;

use crate::error::Result;

/// Default actuator range in volts: the span of the control excitation.
pub const DEFAULT_U_LIMITS: (f64, f64) = (-200.0, 200.0);

/// Plant input chosen for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlAction {
    pub u: f64,
    /// Set when the controller fell back to a non-converged or degraded solution.
    pub warning: bool,
}

/// A discrete-time feedback controller.
pub trait Controller {
    /// Control for sample `k` given the measured output `y_meas = y(k)`.
    /// `reference(j)` returns the reference at sample `j`; controllers may
    /// read `j > k` (preview).
    fn control(&mut self, k: usize, y_meas: f64, reference: &dyn Fn(usize) -> f64) -> Result<ControlAction>;

    /// Clears all histories back to the zero initial condition.
    fn reset(&mut self);
}

pub(crate) fn clamp_to(u: f64, limits: Option<(f64, f64)>) -> f64 {
    match limits {
        Some((lo, hi)) => u.clamp(lo, hi),
        None => u,
    }
}
