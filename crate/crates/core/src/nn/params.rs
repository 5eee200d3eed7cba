use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

/// Every trainable tensor of a model, addressed by [`ParamId`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore<F> {
    names: Vec<String>,
    tensors: Vec<Tensor<F>>,
}

impl<F: Scalar> Default for ParamStore<F> {
    fn default() -> Self {
        ParamStore {
            names: Vec::new(),
            tensors: Vec::new(),
        }
    }
}

impl<F: Scalar> ParamStore<F> {
    pub fn add(&mut self, name: impl Into<String>, value: Tensor<F>) -> ParamId {
        self.names.push(name.into());
        self.tensors.push(value);
        ParamId(self.tensors.len() - 1)
    }

    /// Uniform init with the given standard deviation.
    pub fn add_random(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        std: f64,
        rng: &mut impl Rng,
    ) -> ParamId {
        let half = std * 3f64.sqrt();
        let data = (0..rows * cols)
            .map(|_| F::of(rng.gen_range(-half..=half)))
            .collect();
        self.add(name, Tensor::from_vec(rows, cols, data))
    }

    pub fn add_const(&mut self, name: impl Into<String>, rows: usize, cols: usize, v: f64) -> ParamId {
        self.add(name, Tensor::from_vec(rows, cols, vec![F::of(v); rows * cols]))
    }

    pub fn get(&self, id: ParamId) -> &Tensor<F> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.tensors[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn zeros_like(&self) -> Grads<F> {
        Grads {
            tensors: self
                .tensors
                .iter()
                .map(|t| Tensor::zeros(t.rows, t.cols))
                .collect(),
        }
    }

    pub fn to_file(&self) -> ParamsFile {
        ParamsFile {
            tensors: self
                .names
                .iter()
                .zip(&self.tensors)
                .map(|(n, t)| NamedTensor {
                    name: n.clone(),
                    rows: t.rows,
                    cols: t.cols,
                    data: t.data.iter().map(|x| x.as_f64()).collect(),
                })
                .collect(),
        }
    }

    /// Overwrite values from a file made by a store of identical layout.
    pub fn load_file(&mut self, file: &ParamsFile) -> Result<()> {
        if file.tensors.len() != self.tensors.len() {
            return Err(Error::Shape(format!(
                "checkpoint has {} tensors, model expects {}",
                file.tensors.len(),
                self.tensors.len()
            )));
        }
        for ((name, t), nt) in self.names.iter().zip(&mut self.tensors).zip(&file.tensors) {
            if *name != nt.name || t.rows != nt.rows || t.cols != nt.cols || nt.data.len() != t.len() {
                return Err(Error::Shape(format!(
                    "checkpoint tensor `{}` {}x{} does not match model tensor `{}` {}x{}",
                    nt.name, nt.rows, nt.cols, name, t.rows, t.cols
                )));
            }
            t.data = nt.data.iter().map(|&x| F::of(x)).collect();
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsFile {
    pub tensors: Vec<NamedTensor>,
}

/// Gradient accumulator with the layout of a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Grads<F> {
    pub(crate) tensors: Vec<Tensor<F>>,
}

impl<F: Scalar> Grads<F> {
    pub fn get(&self, id: ParamId) -> &Tensor<F> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<F> {
        &mut self.tensors[id.0]
    }

    pub fn add_assign(&mut self, other: &Grads<F>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, s: F) {
        for t in &mut self.tensors {
            t.scale_assign(s);
        }
    }

    pub fn global_norm(&self) -> F {
        self.tensors.iter().map(Tensor::sum_sq).sum::<F>().sqrt()
    }

    pub fn clip_global_norm(&mut self, max_norm: F) {
        let n = self.global_norm();
        if n > max_norm {
            self.scale(max_norm / n);
        }
    }
}
