//! From-scratch neural engine: layers, losses, optimizer, gradient checks.
//!
//! All math is `f64`. Batched data is row-major with the batch index
//! outermost. Layers run serially in a fixed order and accumulate parameter
//! gradients into the `grad` buffers of their weight tensors; callers zero
//! those buffers between steps.

pub mod activation;
pub mod adam;
pub mod conv;
pub mod dense;
pub mod dropout;
pub mod gradcheck;
pub mod init;
pub mod loss;
pub mod lstm;

pub use activation::{relu, relu_backward, relu_in_place};
pub use adam::Adam;
pub use conv::{Conv2d, Conv2dCache};
pub use dense::Dense;
pub use dropout::DropoutMask;
pub use loss::{location_loss, location_loss_grad, sequence_loss, sequence_loss_grad};
pub use lstm::{LstmParams, StepCache};
