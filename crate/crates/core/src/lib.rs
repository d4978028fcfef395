//! Simulation toolkit for neural-network control of a steam-flow valve.
//!
//! The crate covers the whole experiment pipeline:
//!
//! * [`plant`]: the fourth-order electro-mechanical valve model, realized in
//!   state space and discretized with an exact zero-order hold.
//! * [`neural`]: a small tanh multilayer perceptron with exact gradients,
//!   tapped delay lines and a Levenberg-Marquardt trainer.
//! * [`sysid`]: excitation design and neural plant identification (NARX and
//!   the affine-in-control NARMA-L2 form).
//! * [`control`]: NARMA-L2, model-reference and receding-horizon predictive
//!   neural controllers.
//! * [`signals`]: reference signals, sensor noise and response metrics.
//! * [`harness`]: closed-loop scenario runner, report generation and file
//!   output.

// `!(a < b)` checks deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod error;
pub mod harness;
pub mod neural;
pub mod plant;
pub mod signals;
pub mod sysid;

pub use error::{Error, Result};
pub use plant::{ActuatorParams, DiscretePlant, StateSpace, TransferFunction};
