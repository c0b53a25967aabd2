use candle_core::{Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::layers::{sigmoid, silu, softmax_last, DepthwiseConv, FeedForward, LayerNorm, Linear};
use crate::nn::params::ParamStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockConfig {
    pub dim: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub conv_kernel: usize,
    /// Relative distances beyond this share one learned bias.
    pub max_relative: usize,
    /// Adds a leading half-step feed-forward (full conformer layout).
    pub macaron: bool,
}

impl BlockConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.heads == 0 || self.dim % self.heads != 0 {
            return Err(Error::config(format!(
                "hidden size {} must be a positive multiple of the head count {}",
                self.dim, self.heads
            )));
        }
        if self.conv_kernel == 0 || self.conv_kernel % 2 == 0 {
            return Err(Error::config("convolution kernel must be odd"));
        }
        Ok(())
    }
}

/// Multi-head self-attention with a learned per-head bias on clipped
/// relative distance.
#[derive(Clone)]
pub struct RelativeSelfAttention {
    query: Linear,
    key: Linear,
    value: Linear,
    out: Linear,
    /// `[heads, 2 * max_relative + 1]`.
    relative_bias: Var,
    heads: usize,
    max_relative: usize,
}

impl RelativeSelfAttention {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, heads: usize, max_relative: usize) -> Result<Self> {
        Ok(Self {
            query: Linear::new(store, &format!("{name}.query"), dim, dim)?,
            key: Linear::new(store, &format!("{name}.key"), dim, dim)?,
            value: Linear::new(store, &format!("{name}.value"), dim, dim)?,
            out: Linear::new(store, &format!("{name}.out"), dim, dim)?,
            relative_bias: store.normal(&format!("{name}.relative_bias"), &[heads, 2 * max_relative + 1], 0.02)?,
            heads,
            max_relative,
        })
    }

    fn bias(&self, t: usize) -> Result<Tensor> {
        let m = self.max_relative as i64;
        let idx: Vec<u32> = (0..t as i64)
            .flat_map(|i| (0..t as i64).map(move |j| ((j - i).clamp(-m, m) + m) as u32))
            .collect();
        let idx = Tensor::from_vec(idx, t * t, self.relative_bias.device())?;
        Ok(self
            .relative_bias
            .as_tensor()
            .index_select(&idx, 1)?
            .reshape((self.heads, t, t))?)
    }

    /// `x: [T, dim]` → `[T, dim]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let (t, dim) = x.dims2()?;
        let dk = dim / self.heads;
        let split = |y: Tensor| -> Result<Tensor> { Ok(y.reshape((t, self.heads, dk))?.transpose(0, 1)?.contiguous()?) };
        let q = split(self.query.forward(x)?)?;
        let k = split(self.key.forward(x)?)?;
        let v = split(self.value.forward(x)?)?;
        let scores = (q.matmul(&k.transpose(1, 2)?.contiguous()?)? / (dk as f64).sqrt())?;
        let scores = (scores + self.bias(t)?)?;
        let attn = softmax_last(&scores)?;
        let ctx = attn.matmul(&v)?.transpose(0, 1)?.contiguous()?.reshape((t, dim))?;
        self.out.forward(&ctx)
    }
}

/// Pointwise expansion, GLU, depthwise convolution, SiLU, pointwise projection.
#[derive(Clone)]
pub struct ConvModule {
    expand: Linear,
    depthwise: DepthwiseConv,
    project: Linear,
    dim: usize,
}

impl ConvModule {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, kernel: usize) -> Result<Self> {
        Ok(Self {
            expand: Linear::new(store, &format!("{name}.expand"), dim, 2 * dim)?,
            depthwise: DepthwiseConv::new(store, &format!("{name}.depthwise"), dim, kernel)?,
            project: Linear::new(store, &format!("{name}.project"), dim, dim)?,
            dim,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let e = self.expand.forward(x)?;
        let glu = e.narrow(1, 0, self.dim)?.mul(&sigmoid(&e.narrow(1, self.dim, self.dim)?)?)?;
        let h = silu(&self.depthwise.forward(&glu)?)?;
        self.project.forward(&h)
    }
}

/// Pre-norm residual block: attention, convolution, feed-forward, final norm.
#[derive(Clone)]
pub struct ConformerLiteBlock {
    macaron: Option<(LayerNorm, FeedForward)>,
    attn_norm: LayerNorm,
    attn: RelativeSelfAttention,
    conv_norm: LayerNorm,
    conv: ConvModule,
    ff_norm: LayerNorm,
    ff: FeedForward,
    final_norm: LayerNorm,
    macaron_scale: f64,
}

impl ConformerLiteBlock {
    pub fn new(store: &mut ParamStore, name: &str, cfg: &BlockConfig) -> Result<Self> {
        cfg.validate()?;
        let macaron = if cfg.macaron {
            Some((
                LayerNorm::new(store, &format!("{name}.pre_ff_norm"), cfg.dim)?,
                FeedForward::new(store, &format!("{name}.pre_ff"), cfg.dim, cfg.ff_dim)?,
            ))
        } else {
            None
        };
        Ok(Self {
            macaron,
            attn_norm: LayerNorm::new(store, &format!("{name}.attn_norm"), cfg.dim)?,
            attn: RelativeSelfAttention::new(store, &format!("{name}.attn"), cfg.dim, cfg.heads, cfg.max_relative)?,
            conv_norm: LayerNorm::new(store, &format!("{name}.conv_norm"), cfg.dim)?,
            conv: ConvModule::new(store, &format!("{name}.conv"), cfg.dim, cfg.conv_kernel)?,
            ff_norm: LayerNorm::new(store, &format!("{name}.ff_norm"), cfg.dim)?,
            ff: FeedForward::new(store, &format!("{name}.ff"), cfg.dim, cfg.ff_dim)?,
            final_norm: LayerNorm::new(store, &format!("{name}.final_norm"), cfg.dim)?,
            macaron_scale: if cfg.macaron { 0.5 } else { 1.0 },
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        if let Some((norm, ff)) = &self.macaron {
            h = (&h + (ff.forward(&norm.forward(&h)?)? * 0.5)?)?;
        }
        h = (&h + self.attn.forward(&self.attn_norm.forward(&h)?)?)?;
        h = (&h + self.conv.forward(&self.conv_norm.forward(&h)?)?)?;
        h = (&h + (self.ff.forward(&self.ff_norm.forward(&h)?)? * self.macaron_scale)?)?;
        self.final_norm.forward(&h)
    }
}
