//! Permutation-wise re-ranking.
//!
//! Candidate lists are generated by a reward-guided beam search over
//! permutations ([`pmatch`]) and ranked by a bidirectional-LSTM list scorer
//! ([`prank`]). A cascade-browsing simulator ([`simulator`]) and an exhaustive
//! permutation oracle ([`eval`]) provide ground truth.

pub mod datamodel;
pub mod error;
pub mod eval;
pub mod numerics;
pub mod pipeline;
pub mod pmatch;
pub mod prank;
pub mod simulator;
pub mod train;

pub use error::{PrsError, Result};
