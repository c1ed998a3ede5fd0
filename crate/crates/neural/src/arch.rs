//! The four question-pair layouts. Every layout reads two inputs, the
//! padded token indices of question 1 and question 2; branches alternate
//! between them.

use serde::{Deserialize, Serialize};

use crate::layers::LayerSpec;
use crate::network::{BranchSpec, Network, NetworkSpec};
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const SEQ_LEN: usize = 40;
pub const EMBED_DIM: usize = 300;
pub const WIDTH: usize = 300;
pub const DROPOUT: f64 = 0.2;
pub const CONV_FILTERS: usize = 64;
pub const CONV_KERNEL: usize = 3;
pub const ARCH3_BLOCKS: usize = 4;
pub const ARCH4_BLOCKS: usize = 8;

/// Sizes shared by all layouts. [`Dims::default`] holds the full-size
/// values; [`Dims::toy`] shrinks them for tests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dims {
    pub seq_len: usize,
    pub embed_dim: usize,
    /// LSTM units, dense widths and every branch's output width.
    pub width: usize,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub dropout: f64,
    pub recurrent_dropout: f64,
    pub arch3_blocks: usize,
    pub arch4_blocks: usize,
}

impl Default for Dims {
    fn default() -> Self {
        Dims {
            seq_len: SEQ_LEN,
            embed_dim: EMBED_DIM,
            width: WIDTH,
            conv_filters: CONV_FILTERS,
            conv_kernel: CONV_KERNEL,
            dropout: DROPOUT,
            recurrent_dropout: DROPOUT,
            arch3_blocks: ARCH3_BLOCKS,
            arch4_blocks: ARCH4_BLOCKS,
        }
    }
}

impl Dims {
    /// Sequence length `seq` and embedding width `dim`; the other widths
    /// scale by `dim / 300`, with at least four units.
    pub fn toy(seq: usize, dim: usize) -> Self {
        let scale = |full: usize| ((full * dim) as f64 / EMBED_DIM as f64).round().max(4.0) as usize;
        Dims {
            seq_len: seq,
            embed_dim: dim,
            width: scale(WIDTH),
            conv_filters: scale(CONV_FILTERS),
            ..Dims::default()
        }
    }
}

fn embedding(vocab_size: usize, dims: &Dims, trainable: bool) -> LayerSpec {
    LayerSpec::Embedding {
        vocab_size,
        dim: dims.embed_dim,
        trainable,
    }
}

fn lstm_branch(input: usize, vocab_size: usize, dims: &Dims) -> BranchSpec {
    BranchSpec {
        input,
        layers: vec![
            embedding(vocab_size, dims, true),
            LayerSpec::Lstm {
                input_dim: dims.embed_dim,
                units: dims.width,
                recurrent_dropout: dims.recurrent_dropout,
            },
        ],
    }
}

fn sum_branch(input: usize, vocab_size: usize, dims: &Dims) -> BranchSpec {
    BranchSpec {
        input,
        layers: vec![
            embedding(vocab_size, dims, false),
            LayerSpec::TimeDistributedDense {
                input_dim: dims.embed_dim,
                units: dims.width,
            },
            LayerSpec::LambdaSum,
        ],
    }
}

fn conv_branch(input: usize, vocab_size: usize, dims: &Dims) -> BranchSpec {
    let f = dims.conv_filters;
    BranchSpec {
        input,
        layers: vec![
            embedding(vocab_size, dims, false),
            LayerSpec::Conv1d {
                input_dim: dims.embed_dim,
                filters: f,
                kernel: dims.conv_kernel,
            },
            LayerSpec::Dropout { rate: dims.dropout },
            LayerSpec::Conv1d {
                input_dim: f,
                filters: f,
                kernel: dims.conv_kernel,
            },
            LayerSpec::GlobalMaxPool,
            LayerSpec::batch_norm(f),
            LayerSpec::Dense {
                input_dim: f,
                units: dims.width,
            },
            LayerSpec::Dropout { rate: dims.dropout },
        ],
    }
}

fn output_unit(width: usize) -> [LayerSpec; 2] {
    [LayerSpec::Dense { input_dim: width, units: 1 }, LayerSpec::Sigmoid]
}

/// `BN → Dense → PReLU → Dropout → BN → Dense(1) → Sigmoid`
fn simple_head(merge: usize, dims: &Dims) -> Vec<LayerSpec> {
    let w = dims.width;
    let mut head = vec![
        LayerSpec::batch_norm(merge),
        LayerSpec::Dense { input_dim: merge, units: w },
        LayerSpec::Prelu { width: w },
        LayerSpec::Dropout { rate: dims.dropout },
        LayerSpec::batch_norm(w),
    ];
    head.extend(output_unit(w));
    head
}

/// `BN` then `blocks` repeated units, then `Dense(1) → Sigmoid`.
fn deep_head(merge: usize, dims: &Dims, blocks: usize, prelu: bool) -> Vec<LayerSpec> {
    let w = dims.width;
    let mut head = vec![LayerSpec::batch_norm(merge)];
    let mut input = merge;
    for _ in 0..blocks {
        head.push(LayerSpec::Dense { input_dim: input, units: w });
        if prelu {
            head.push(LayerSpec::Prelu { width: w });
        }
        head.push(LayerSpec::Dropout { rate: dims.dropout });
        head.push(LayerSpec::batch_norm(w));
        input = w;
    }
    head.extend(output_unit(input));
    head
}

/// Layout `id` (1–4) as a spec, without weights.
pub fn architecture_spec(id: u8, vocab_size: usize, dims: &Dims) -> Result<NetworkSpec> {
    let mut branches = vec![lstm_branch(0, vocab_size, dims), lstm_branch(1, vocab_size, dims)];
    if id >= 2 {
        branches.push(sum_branch(0, vocab_size, dims));
        branches.push(sum_branch(1, vocab_size, dims));
    }
    if id == 4 {
        branches.push(conv_branch(0, vocab_size, dims));
        branches.push(conv_branch(1, vocab_size, dims));
    }
    let merge = branches.len() * dims.width;
    let head = match id {
        1 | 2 => simple_head(merge, dims),
        3 => deep_head(merge, dims, dims.arch3_blocks, true),
        4 => deep_head(merge, dims, dims.arch4_blocks, false),
        _ => return Err(Error::Invalid(format!("architecture {id} is not one of 1, 2, 3, 4"))),
    };
    Ok(NetworkSpec {
        inputs: vec![vec![dims.seq_len]; 2],
        branches,
        head,
    })
}

/// Builds layout `id` with seeded weights. Layouts 2–4 need a
/// `[vocab_size, embed_dim]` matrix of pre-trained vectors (see
/// [`crate::Vocabulary::pretrained_matrix`]), which is copied into their
/// frozen embedding layers.
pub fn build_architecture(
    id: u8,
    vocab_size: usize,
    pretrained: Option<&Tensor>,
    dims: Option<Dims>,
    seed: u64,
) -> Result<Network> {
    let dims = dims.unwrap_or_default();
    let spec = architecture_spec(id, vocab_size, &dims)?;
    if id >= 2 {
        let Some(matrix) = pretrained else {
            return Err(Error::Invalid(format!(
                "architecture {id} needs pre-trained word vectors"
            )));
        };
        if matrix.shape() != [vocab_size, dims.embed_dim] {
            return Err(Error::Shape(format!(
                "pre-trained matrix is {:?}, expected [{vocab_size}, {}]",
                matrix.shape(),
                dims.embed_dim
            )));
        }
    }
    let mut net = Network::new(spec, seed)?;
    if let Some(matrix) = pretrained.filter(|_| id >= 2) {
        for layer in net.layers_mut() {
            if matches!(layer.spec(), LayerSpec::Embedding { trainable: false, .. }) {
                layer.params_mut()[0] = matrix.clone();
            }
        }
    }
    Ok(net)
}
