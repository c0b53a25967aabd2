use std::collections::BTreeMap;

use candle_core::backprop::GradStore;
use candle_core::{DType, Tensor};
use serde::{Deserialize, Serialize};

use crate::container::{ArrayData, Container};
use crate::error::{Error, Result};
use crate::nn::params::{get_tensor, put_tensor, scalar, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Linear warmup length; 0 keeps the rate constant.
    pub warmup_steps: u64,
    /// Global gradient-norm clip; `None` disables clipping.
    pub clip_norm: Option<f64>,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.98,
            eps: 1e-9,
            warmup_steps: 400,
            clip_norm: Some(1.0),
        }
    }
}

impl AdamConfig {
    /// Rate at 1-based `step`: linear warmup, then inverse square-root decay.
    pub fn rate(&self, step: u64) -> f64 {
        if self.warmup_steps == 0 {
            return self.learning_rate;
        }
        let s = step.max(1) as f64;
        let w = self.warmup_steps as f64;
        self.learning_rate * (s / w).min((w / s).sqrt())
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.clip_norm.is_none_or(|c| c > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// Adam with bias correction. Moments are keyed by parameter name.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    first: BTreeMap<String, Tensor>,
    second: BTreeMap<String, Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        })
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Global L2 norm of the gradients present for `params`.
    pub fn grad_norm(params: &ParamStore, grads: &GradStore) -> Result<f64> {
        let mut total = 0.0;
        for (_, var) in params.iter() {
            if let Some(g) = grads.get(var.as_tensor()) {
                total += scalar(&g.to_dtype(DType::F64)?.sqr()?.sum_all()?)?;
            }
        }
        Ok(total.sqrt())
    }

    /// One update; parameters without a gradient are left untouched.
    /// Returns the pre-clip gradient norm.
    pub fn apply(&mut self, params: &ParamStore, grads: &GradStore) -> Result<f64> {
        self.step += 1;
        let norm = Self::grad_norm(params, grads)?;
        if !norm.is_finite() {
            return Err(Error::contract(format!("non-finite gradient norm at step {}", self.step)));
        }
        let clip = match self.config.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };
        let c = &self.config;
        let lr = c.rate(self.step);
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        for (name, var) in params.iter() {
            let Some(g) = grads.get(var.as_tensor()) else {
                continue;
            };
            let g = (g.detach() * clip)?;
            let m_prev = match self.first.get(name) {
                Some(m) => m.clone(),
                None => g.zeros_like()?,
            };
            let v_prev = match self.second.get(name) {
                Some(v) => v.clone(),
                None => g.zeros_like()?,
            };
            let m = ((m_prev * c.beta1)? + (&g * (1.0 - c.beta1))?)?;
            let v = ((v_prev * c.beta2)? + (g.sqr()? * (1.0 - c.beta2))?)?;
            let denom = ((&v / bc2)?.sqrt()? + c.eps)?;
            let update = ((&m / bc1)?.div(&denom)? * lr)?;
            var.set(&(var.as_tensor().detach() - update)?)?;
            self.first.insert(name.clone(), m);
            self.second.insert(name.clone(), v);
        }
        Ok(norm)
    }

    /// Appends zero moment rows along dim 0 after a parameter grows.
    pub fn grow_rows(&mut self, name: &str, extra: usize) -> Result<()> {
        for moments in [&mut self.first, &mut self.second] {
            if let Some(m) = moments.get(name) {
                let grown = m.pad_with_zeros(0, 0, extra)?;
                moments.insert(name.to_string(), grown);
            }
        }
        Ok(())
    }

    pub fn save_into(&self, container: &mut Container, prefix: &str) -> Result<()> {
        container.insert(
            format!("{prefix}step"),
            vec![1],
            ArrayData::F64(vec![self.step as f64]),
        )?;
        for (name, m) in &self.first {
            put_tensor(container, &format!("{prefix}m.{name}"), m)?;
        }
        for (name, v) in &self.second {
            put_tensor(container, &format!("{prefix}v.{name}"), v)?;
        }
        Ok(())
    }

    pub fn load_from(&mut self, container: &Container, prefix: &str, params: &ParamStore) -> Result<()> {
        self.step = container.f64(&format!("{prefix}step"))?.1[0] as u64;
        self.first.clear();
        self.second.clear();
        for name in params.names() {
            for (tag, map) in [("m", &mut self.first), ("v", &mut self.second)] {
                let key = format!("{prefix}{tag}.{name}");
                if container.arrays.contains_key(&key) {
                    let t = get_tensor(container, &key, params.device())?.to_dtype(params.dtype())?;
                    map.insert(name.to_string(), t);
                }
            }
        }
        Ok(())
    }
}
