//! Dense numeric kernel: matrices, activations, MLP and Bi-LSTM passes,
//! Adam and a finite-difference gradient checker.

pub mod activation;
pub mod adam;
pub mod checkpoint;
pub mod gradcheck;
pub mod lstm;
pub mod matrix;
pub mod mlp;
pub mod params;

pub use activation::{
    bce_logit_centered, bce_loss, bce_single, bce_single_grad, sigmoid, sigmoid_stable, BCE_EPS,
};
pub use adam::AdamState;
pub use checkpoint::Checkpoint;
pub use gradcheck::{grad_check, grad_check_piecewise, GradCheckOptions, GradCheckReport};
pub use lstm::{bilstm_backward, bilstm_forward, BiLstmParams, BiLstmState, CellUpdate};
pub use matrix::DenseMatrix;
pub use mlp::{mlp_backward, mlp_forward, mlp_predict, MlpCache, MlpParams, DEFAULT_HIDDEN};
pub use params::ParamSet;
