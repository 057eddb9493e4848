//! Dense linear algebra and hand-written forward/backward primitives.

mod layer;
mod matrix;
pub mod ops;
mod sgd;

pub use layer::LinearLayer;
pub use matrix::{argmax, cosine, dot, norm, Matrix};
pub use sgd::sgd_step;
