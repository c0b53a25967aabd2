//! Minimal neural building blocks on top of candle tensors.

mod conformer;
mod layers;
mod optim;
mod params;

pub use conformer::{BlockConfig, ConformerLiteBlock, ConvModule, RelativeSelfAttention};
pub use layers::{
    log_softmax_last, sigmoid, silu, softmax_last, softsign, Conv1d, DepthwiseConv, FeedForward, LayerNorm, Linear,
};
pub use optim::{Adam, AdamConfig};
pub use params::{get_tensor, host, put_tensor, scalar, ParamStore, Precision};
