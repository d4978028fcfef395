//! Electro-mechanical steam valve plant.
//!
//! The plant is the cascade of the relay coil (`1 / (Ls + R)`), the plunger
//! (`k_m / (m s^2 + D s + k)`) and the flow sensor (`p / (s + p)`), driven by a
//! voltage and producing a steam-flow reading. It is built as a transfer
//! function, realized in controllable canonical form and discretized with an
//! exact zero-order hold.

mod discrete;
mod transfer;

pub use discrete::{discretize, expm, DiscretePlant, StateSpace};
pub use transfer::{build_transfer_function, ActuatorParams, TransferFunction};

/// Loop sample interval used throughout the toolkit, in seconds.
pub const DEFAULT_SAMPLE_TIME: f64 = 0.1;

/// Builds the discretized plant for `params` at `sample_time`.
pub fn paper_plant(params: &ActuatorParams, sample_time: f64) -> crate::Result<DiscretePlant> {
    let tf = build_transfer_function(params)?;
    let ss = tf.to_state_space()?;
    discretize(&ss, sample_time)
}
