//! A small CPU neural-network toolkit with hand-written backward passes.
//!
//! Everything operates on one sample at a time; batching is done by the
//! callers, which map samples in parallel and sum per-sample gradients in
//! index order.

pub mod adam;
pub mod gradcheck;
pub mod layers;
pub mod ops;
pub mod tensor;
pub mod trunk;

pub use adam::{Adam, AdamConfig};
pub use layers::{AdaIn, Conv2d, Init, Linear, ParamBuilder};
pub use tensor::Tensor3;
pub use trunk::ConvTrunk;

/// Sum per-sample gradient vectors in order, scaled by `scale`.
pub fn reduce_grads(parts: impl IntoIterator<Item = Vec<f64>>, n: usize, scale: f64) -> Vec<f64> {
    let mut acc = vec![0.0; n];
    for part in parts {
        tensor::axpy(&mut acc, scale, &part);
    }
    acc
}
