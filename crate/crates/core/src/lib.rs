//! Left-right contrastive pretraining for wearable accelerometer activity
//! recognition.
//!
//! Two time-synchronised windows, one from each wrist (or limb), are treated
//! as a positive pair; every other window in the minibatch is a negative. A
//! shared 1D-convolutional encoder is pretrained with an NT-Xent objective and
//! later finetuned with a small MLP classifier on few labels.
//!
//! The crate is organised bottom-up:
//!
//! - [`tensor`]: dense f32/f64 tensors with a small reverse-mode tape.
//! - [`model`]: encoder, projection head, classifier and the `LRCK` checkpoint format.
//! - [`contrastive`]: NT-Xent loss, similarity matrices and rotation views.
//! - [`data`]: windowing, the `LRW1` dataset container, dataset adapters and
//!   the synthetic symmetric-activity generator.
//! - [`training`]: optimizers, the cosine schedule and the training loops.
//! - [`eval`]: metrics, aggregation and the experiment grids.
//!
//! With the default `parallel` feature, data-parallel kernels and independent
//! experiment runs are spread over rayon's thread pool. Every parallel path
//! writes disjoint outputs, so results are bitwise identical to the
//! sequential build.

pub mod contrastive;
pub mod data;
mod error;
pub mod eval;
pub mod model;
pub mod par;
mod rng;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
pub use rng::Rng;
pub use tensor::{Element, Tensor};
