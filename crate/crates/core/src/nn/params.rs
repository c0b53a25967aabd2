use std::collections::BTreeMap;

use candle_core::{DType, Device, Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::container::{ArrayData, Container};
use crate::error::{Error, Result};

/// Named trainable parameters with deterministic initialization.
///
/// Parameters are created in a fixed order by model constructors, so a given
/// seed always produces the same values.
pub struct ParamStore {
    vars: BTreeMap<String, Var>,
    device: Device,
    dtype: DType,
    rng: ChaCha8Rng,
}

impl ParamStore {
    pub fn new(seed: u64, dtype: DType) -> Self {
        Self {
            vars: BTreeMap::new(),
            device: Device::Cpu,
            dtype,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    fn insert(&mut self, name: &str, data: Vec<f64>, shape: &[usize]) -> Result<Var> {
        if self.vars.contains_key(name) {
            return Err(Error::config(format!("parameter {name} defined twice")));
        }
        let t = Tensor::from_vec(data, shape, &self.device)?.to_dtype(self.dtype)?;
        let var = Var::from_tensor(&t)?;
        self.vars.insert(name.to_string(), var.clone());
        Ok(var)
    }

    /// Normal(0, std²) initialization.
    pub fn normal(&mut self, name: &str, shape: &[usize], std: f64) -> Result<Var> {
        let n: usize = shape.iter().product();
        let dist = Normal::new(0.0, std.max(1e-12)).map_err(|e| Error::config(e.to_string()))?;
        let data: Vec<f64> = (0..n).map(|_| dist.sample(&mut self.rng)).collect();
        self.insert(name, data, shape)
    }

    pub fn constant(&mut self, name: &str, shape: &[usize], value: f64) -> Result<Var> {
        let n: usize = shape.iter().product();
        self.insert(name, vec![value; n], shape)
    }

    /// Replaces an existing parameter with a new tensor of any shape.
    pub fn replace(&mut self, name: &str, tensor: &Tensor) -> Result<Var> {
        if !self.vars.contains_key(name) {
            return Err(Error::config(format!("unknown parameter {name}")));
        }
        let var = Var::from_tensor(&tensor.to_dtype(self.dtype)?)?;
        self.vars.insert(name.to_string(), var.clone());
        Ok(var)
    }

    pub fn get(&self, name: &str) -> Result<&Var> {
        self.vars
            .get(name)
            .ok_or_else(|| Error::config(format!("unknown parameter {name}")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Var)> {
        self.vars.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.vars.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    pub fn element_count(&self) -> usize {
        self.vars.values().map(|v| v.elem_count()).sum()
    }

    /// Stores every parameter under `prefix + name`.
    pub fn save_into(&self, container: &mut Container, prefix: &str) -> Result<()> {
        for (name, var) in &self.vars {
            put_tensor(container, &format!("{prefix}{name}"), var.as_tensor())?;
        }
        Ok(())
    }

    /// Overwrites parameter values from a container; shapes must match.
    pub fn load_from(&mut self, container: &Container, prefix: &str) -> Result<()> {
        for (name, var) in &self.vars {
            let t = get_tensor(container, &format!("{prefix}{name}"), &self.device)?;
            if t.dims() != var.dims() {
                return Err(Error::shape(format!(
                    "checkpoint parameter {name} has shape {:?}, model expects {:?}",
                    t.dims(),
                    var.dims()
                )));
            }
            var.set(&t.to_dtype(self.dtype)?)?;
        }
        Ok(())
    }
}

/// Writes a tensor as f64 so that any parameter dtype round-trips exactly.
pub fn put_tensor(container: &mut Container, name: &str, t: &Tensor) -> Result<()> {
    let data: Vec<f64> = t.flatten_all()?.to_dtype(DType::F64)?.to_vec1()?;
    container.insert(name, t.dims().to_vec(), ArrayData::F64(data))
}

pub fn get_tensor(container: &Container, name: &str, device: &Device) -> Result<Tensor> {
    let (shape, data) = container.f64(name)?;
    Ok(Tensor::from_vec(data.to_vec(), shape, device)?)
}

/// Scalar value of a 0-d tensor of any float dtype.
pub fn scalar(t: &Tensor) -> Result<f64> {
    Ok(t.to_dtype(DType::F64)?.to_scalar::<f64>()?)
}

/// Host tensor from f32 data in the store's dtype.
pub fn host(data: &[f32], shape: &[usize], dtype: DType, device: &Device) -> Result<Tensor> {
    Ok(Tensor::from_slice(data, shape, device)?.to_dtype(dtype)?)
}

/// Floating-point precision of a model's parameters and activations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn dtype(self) -> DType {
        match self {
            Precision::F32 => DType::F32,
            Precision::F64 => DType::F64,
        }
    }
}
