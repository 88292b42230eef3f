use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{NnError, Tensor};

/// How the optimizer treats one parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamOptions {
    /// Learning rate used instead of the optimizer's global one.
    pub learning_rate: Option<f64>,
    pub weight_decay: bool,
    pub frozen: bool,
}

impl Default for ParamOptions {
    fn default() -> Self {
        Self {
            learning_rate: None,
            weight_decay: true,
            frozen: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub tensor: Tensor,
    pub options: ParamOptions,
    pub(crate) first_moment: Vec<f64>,
    pub(crate) second_moment: Vec<f64>,
}

/// Named parameters with per-parameter optimizer state. Shapes are fixed at
/// insertion; names are unique.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    params: BTreeMap<String, Param>,
    pub(crate) step: u64,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) -> Result<(), NnError> {
        self.insert_with(name, tensor, ParamOptions::default())
    }

    pub fn insert_with(&mut self, name: &str, tensor: Tensor, options: ParamOptions) -> Result<(), NnError> {
        if self.params.contains_key(name) {
            return Err(NnError::DuplicateParam(name.to_string()));
        }
        let n = tensor.len();
        self.params.insert(
            name.to_string(),
            Param {
                tensor,
                options,
                first_moment: vec![0.0; n],
                second_moment: vec![0.0; n],
            },
        );
        Ok(())
    }

    /// Gaussian-initialized `rows×cols` parameter with the given standard deviation.
    pub fn insert_normal<R: Rng>(
        &mut self,
        name: &str,
        rows: usize,
        cols: usize,
        std: f64,
        rng: &mut R,
    ) -> Result<(), NnError> {
        let v = (0..rows * cols).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        self.insert(name, Tensor::matrix(rows, cols, v)?)
    }

    pub fn insert_constant(&mut self, name: &str, rows: usize, cols: usize, value: f64) -> Result<(), NnError> {
        self.insert(name, Tensor::matrix(rows, cols, vec![value; rows * cols])?)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, NnError> {
        self.params
            .get(name)
            .map(|p| &p.tensor)
            .ok_or_else(|| NnError::MissingParam(name.to_string()))
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.get(name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Param> {
        self.params.get_mut(name)
    }

    /// Overwrites values in place; the shape must match.
    pub fn set_values(&mut self, name: &str, values: Vec<f64>) -> Result<(), NnError> {
        let p = self
            .params
            .get_mut(name)
            .ok_or_else(|| NnError::MissingParam(name.to_string()))?;
        if p.tensor.len() != values.len() {
            return Err(NnError::Shape(format!(
                "{name}: {} values for {:?}",
                values.len(),
                p.tensor.shape()
            )));
        }
        p.tensor.values_mut().copy_from_slice(&values);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub(crate) fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Param)> {
        self.params.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn total_size(&self) -> usize {
        self.params.values().map(|p| p.tensor.len()).sum()
    }

    /// Number of optimizer steps taken so far.
    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Sets every gradient to zero, allocating where absent.
    pub fn zero_grad(&mut self) {
        for p in self.params.values_mut() {
            p.tensor.zero_grad();
        }
    }

    /// Adds `scale · grad` to the stored gradients. Unknown names are an error.
    pub fn accumulate_grads(&mut self, grads: &BTreeMap<String, Vec<f64>>, scale: f64) -> Result<(), NnError> {
        for (name, g) in grads {
            let p = self
                .params
                .get_mut(name)
                .ok_or_else(|| NnError::MissingParam(name.clone()))?;
            let n = p.tensor.len();
            if g.len() != n {
                return Err(NnError::Shape(format!("{name}: gradient of {} for {n} values", g.len())));
            }
            if p.tensor.grad().is_none() {
                p.tensor.set_grad(Some(vec![0.0; n]));
            }
            let acc = p.tensor.grad_mut().expect("allocated above");
            acc.iter_mut().zip(g).for_each(|(a, b)| *a += scale * b);
        }
        Ok(())
    }
}
