//! Feed-forward networks, delay lines and training.

mod delay;
pub(crate) mod lm;
mod mlp;
pub mod persist;
mod scaling;
mod train;

pub use delay::TappedDelayLine;
pub use lm::{levenberg_marquardt, LeastSquares, LmOptions, LmReport, NormalEquations};
pub use mlp::{Layer, Mlp, Trace};
pub use scaling::Affine;
pub use train::{train, TrainAlgorithm, TrainConfig, TrainOutcome};
pub(crate) use train::gradient_momentum as train_gradient_momentum;

/// Hidden layer width used by every network in the toolkit.
pub const DEFAULT_HIDDEN: usize = 6;
/// Number of delayed plant inputs and outputs fed to the networks.
pub const DEFAULT_DELAYS: usize = 4;
