use candle_core::{Tensor, Var, D};

use crate::error::Result;
use crate::nn::params::ParamStore;

pub fn sigmoid(x: &Tensor) -> Result<Tensor> {
    Ok((x.neg()?.exp()? + 1.0)?.recip()?)
}

/// x / (1 + |x|), strictly inside (-1, 1).
pub fn softsign(x: &Tensor) -> Result<Tensor> {
    Ok(x.broadcast_div(&(x.abs()? + 1.0)?)?)
}

pub fn silu(x: &Tensor) -> Result<Tensor> {
    Ok(x.silu()?)
}

/// Softmax over the last dimension.
pub fn softmax_last(x: &Tensor) -> Result<Tensor> {
    let max = x.max_keepdim(D::Minus1)?.detach();
    let e = x.broadcast_sub(&max)?.exp()?;
    Ok(e.broadcast_div(&e.sum_keepdim(D::Minus1)?)?)
}

/// Log-softmax over the last dimension.
pub fn log_softmax_last(x: &Tensor) -> Result<Tensor> {
    let max = x.max_keepdim(D::Minus1)?.detach();
    let shifted = x.broadcast_sub(&max)?;
    let lse = shifted.exp()?.sum_keepdim(D::Minus1)?.log()?;
    Ok(shifted.broadcast_sub(&lse)?)
}

/// Zero rows above and below a `[T, C]` matrix.
fn pad_rows(x: &Tensor, before: usize, after: usize) -> Result<Tensor> {
    Ok(x.pad_with_zeros(0, before, after)?)
}

#[derive(Clone)]
pub struct Linear {
    pub weight: Var,
    pub bias: Var,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize) -> Result<Self> {
        let std = (1.0 / input as f64).sqrt();
        Ok(Self {
            weight: store.normal(&format!("{name}.weight"), &[input, output], std)?,
            bias: store.constant(&format!("{name}.bias"), &[output], 0.0)?,
        })
    }

    /// `x: [T, input]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.matmul(self.weight.as_tensor())?.broadcast_add(self.bias.as_tensor())?)
    }
}

#[derive(Clone)]
pub struct LayerNorm {
    pub gain: Var,
    pub shift: Var,
    pub eps: f64,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Result<Self> {
        Ok(Self {
            gain: store.constant(&format!("{name}.gain"), &[dim], 1.0)?,
            shift: store.constant(&format!("{name}.shift"), &[dim], 0.0)?,
            eps: 1e-5,
        })
    }

    /// Per-row standardization before the learned affine map.
    pub fn normalize(&self, x: &Tensor) -> Result<Tensor> {
        let mean = x.mean_keepdim(D::Minus1)?;
        let centered = x.broadcast_sub(&mean)?;
        let var = centered.sqr()?.mean_keepdim(D::Minus1)?;
        Ok(centered.broadcast_div(&(var + self.eps)?.sqrt()?)?)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self
            .normalize(x)?
            .broadcast_mul(self.gain.as_tensor())?
            .broadcast_add(self.shift.as_tensor())?)
    }
}

/// Length-preserving 1-D convolution over rows of `[T, C_in]`.
#[derive(Clone)]
pub struct Conv1d {
    /// `[kernel * C_in, C_out]`, tap-major.
    pub weight: Var,
    pub bias: Var,
    pub kernel: usize,
}

impl Conv1d {
    pub fn new(store: &mut ParamStore, name: &str, input: usize, output: usize, kernel: usize) -> Result<Self> {
        let std = (1.0 / (input * kernel) as f64).sqrt();
        Ok(Self {
            weight: store.normal(&format!("{name}.weight"), &[kernel * input, output], std)?,
            bias: store.constant(&format!("{name}.bias"), &[output], 0.0)?,
            kernel,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let t = x.dim(0)?;
        let left = (self.kernel - 1) / 2;
        let padded = pad_rows(x, left, self.kernel - 1 - left)?;
        let taps: Vec<Tensor> = (0..self.kernel)
            .map(|j| padded.narrow(0, j, t))
            .collect::<candle_core::Result<_>>()?;
        let cols = Tensor::cat(&taps, 1)?;
        Ok(cols.matmul(self.weight.as_tensor())?.broadcast_add(self.bias.as_tensor())?)
    }
}

/// Per-channel 1-D convolution over rows of `[T, C]`.
#[derive(Clone)]
pub struct DepthwiseConv {
    /// `[kernel, C]`.
    pub weight: Var,
    pub bias: Var,
    pub kernel: usize,
}

impl DepthwiseConv {
    pub fn new(store: &mut ParamStore, name: &str, channels: usize, kernel: usize) -> Result<Self> {
        let std = (1.0 / kernel as f64).sqrt();
        Ok(Self {
            weight: store.normal(&format!("{name}.weight"), &[kernel, channels], std)?,
            bias: store.constant(&format!("{name}.bias"), &[channels], 0.0)?,
            kernel,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let t = x.dim(0)?;
        let left = (self.kernel - 1) / 2;
        let padded = pad_rows(x, left, self.kernel - 1 - left)?;
        let w = self.weight.as_tensor();
        let mut acc = padded.narrow(0, 0, t)?.broadcast_mul(&w.narrow(0, 0, 1)?)?;
        for j in 1..self.kernel {
            acc = (acc + padded.narrow(0, j, t)?.broadcast_mul(&w.narrow(0, j, 1)?)?)?;
        }
        Ok(acc.broadcast_add(self.bias.as_tensor())?)
    }
}

#[derive(Clone)]
pub struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

impl FeedForward {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize, inner: usize) -> Result<Self> {
        Ok(Self {
            up: Linear::new(store, &format!("{name}.up"), dim, inner)?,
            down: Linear::new(store, &format!("{name}.down"), inner, dim)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.down.forward(&silu(&self.up.forward(x)?)?)
    }
}
