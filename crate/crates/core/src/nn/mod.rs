//! Minimal dense-network engine: forward/backward passes, inverted dropout,
//! Adam with decoupled weight decay, masked-MSE and BCE losses, and a
//! finite-difference gradient checker. Everything runs in `f64`.

mod adam;
mod gradcheck;
mod loss;
mod ops;
mod params;

pub use adam::{adam_step, adam_step_masked, AdamState, AdamVec};
pub use gradcheck::grad_check;
pub use loss::{bce_loss, logit, mse_masked_loss, sigmoid, Mask, PROB_CLAMP};
pub use ops::{backward, forward, ActivationTrace, Batch, GradientSet, Mode};
pub use params::{Activation, MlpParams};
