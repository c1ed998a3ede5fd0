//! Layer primitives, the four question-pair network layouts, mini-batch
//! training and finite-difference gradient checks, all in double precision.

mod arch;
mod error;
pub mod gradcheck;
mod layers;
mod network;
mod persist;
mod tensor;
mod train;
mod vocab;

pub use arch::{architecture_spec, build_architecture, Dims};
pub use error::{Error, Result};
pub use gradcheck::{gradient_check, GradCheckOptions, GradCheckReport};
pub use layers::{Layer, LayerSpec, Mode, ParamShape};
pub use network::{bce_from_logits, BranchSpec, Gradients, Network, NetworkSpec, ParamCount, Trace};
pub use persist::{weights_path, Manifest, ParamEntry};
pub use tensor::Tensor;
pub use train::{evaluate_network, train_network, Adam, EpochStats, History, TrainConfig};
pub use vocab::Vocabulary;

/// Default sizes of the layouts.
pub mod defaults {
    pub use crate::arch::{
        ARCH3_BLOCKS, ARCH4_BLOCKS, CONV_FILTERS, CONV_KERNEL, DROPOUT, EMBED_DIM, SEQ_LEN, WIDTH,
    };
    pub use crate::layers::{DEFAULT_BN_EPS, DEFAULT_BN_MOMENTUM, DEFAULT_PRELU_ALPHA, EMBEDDING_INIT};
}
