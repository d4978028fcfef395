//! Open-loop excitation and neural plant identification.

mod dataset;
mod excitation;
mod narma_l2;
mod narx;
mod parallel;

pub use dataset::{collect_dataset, Dataset};
pub use excitation::{generate_excitation, ExcitationConfig};
pub use narma_l2::{identify_narma_l2, NarmaL2Config, NarmaL2Identification, NarmaL2Model};
pub use narx::{identify_narx, identify_narx_with, NarxIdentification, NarxModel, FREE_RUN_STEPS, NARX_CANDIDATES};
pub use parallel::{refine_narx_parallel, ParallelRefinement};

/// Fraction of the record (leading, contiguous) used for training.
pub const TRAIN_FRACTION: f64 = 0.8;

/// Index where validation data starts.
pub(crate) fn split_index(len: usize) -> usize {
    (len as f64 * TRAIN_FRACTION).round() as usize
}

pub(crate) fn rmse(pairs: impl Iterator<Item = (f64, f64)>) -> f64 {
    let (sum, n) = pairs.fold((0.0, 0usize), |(s, n), (a, b)| (s + (a - b).powi(2), n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}
