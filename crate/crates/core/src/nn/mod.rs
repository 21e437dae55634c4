//! Small dense network engine: explicit forward/backward passes, optional
//! binary weight masks, minibatch SGD and sample-weighted losses.

mod layer;
mod loss;
mod network;
mod snapshot;
mod tensor;
mod train;

pub use layer::{sigmoid, Activation, DenseLayer};
pub use loss::{one_hot, weighted_ce_loss, LossKind, LossSummary, PROB_FLOOR};
pub use network::{Backprop, Gradients, LayerGradient, Network};
pub use snapshot::ParamSnapshot;
pub(crate) use snapshot::WordReader;
pub use tensor::Tensor2D;
pub use train::{train_epoch, SgdConfig};

/// Index of the largest entry in each row.
pub fn argmax_rows(t: &Tensor2D) -> Vec<usize> {
    t.iter_rows()
        .map(|r| {
            r.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
                    if v > bv {
                        (i, v)
                    } else {
                        (bi, bv)
                    }
                })
                .0
        })
        .collect()
}
