//! Inverse reinforcement learning: features, inverse Bellman rows,
//! condition-number-driven data selection and the weight solve.

mod basis;
mod rows;
mod stack;

pub use basis::{FeatureBasis, Features, MonomialBasis};
pub use rows::{controller_rows, inverse_bellman_row, row_block, true_weights, WeightVector};
pub use stack::{IrlEntry, IrlHistoryStack};
