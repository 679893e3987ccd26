//! Parameters, Adam with decoupled weight decay, and Kaiming initialization.

use std::collections::HashMap;
use std::rc::Rc;

use rand_distr::{Distribution, Normal};

use super::elem::Elem;
use super::tape::Tape;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled decay (applied outside the moment estimates) by default;
    /// switch to fold L2 decay into gradients instead.
    pub decoupled_decay: bool,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            learning_rate: 1e-4,
            weight_decay: 5e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            decoupled_decay: true,
        }
    }
}

impl OptimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate < 0.0 {
            return Err(Error::Config("learning_rate must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("beta1/beta2 must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// A named trainable tensor with Adam moment buffers.
pub struct Parameter<T: Elem> {
    pub name: String,
    pub data: Rc<Vec<T>>,
    pub shape: Vec<usize>,
    pub grad: Option<Vec<T>>,
    pub adam_m: Vec<T>,
    pub adam_v: Vec<T>,
    pub step_count: u64,
    /// Excluded from weight decay (normalization-mapping biases and the like).
    pub no_decay: bool,
}

impl<T: Elem> Parameter<T> {
    pub fn new(name: impl Into<String>, values: Vec<T>, shape: Vec<usize>) -> Self {
        assert_eq!(shape.iter().product::<usize>(), values.len());
        let n = values.len();
        Parameter {
            name: name.into(),
            data: Rc::new(values),
            shape,
            grad: None,
            adam_m: vec![T::zero(); n],
            adam_v: vec![T::zero(); n],
            step_count: 0,
            no_decay: false,
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// Binds this parameter onto a tape as a tracked leaf (zero-copy).
    pub fn bind(&self, tape: &Tape<T>) -> Tensor<T> {
        tape.leaf_shared(self.data.clone(), self.shape.clone())
    }

    /// Constant view, for frozen-network passes.
    pub fn constant(&self) -> Tensor<T> {
        Tensor { data: self.data.clone(), shape: self.shape.clone(), node: None }
    }

    pub fn accumulate_grad(&mut self, g: &Tensor<T>) {
        debug_assert_eq!(g.numel(), self.numel());
        let grad = self.grad.get_or_insert_with(|| vec![T::zero(); self.data.len()]);
        for (a, b) in grad.iter_mut().zip(g.values()) {
            *a += *b;
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }
}

/// Insertion-ordered parameter collection; iteration order is the update
/// and serialization order.
pub struct ParamSet<T: Elem> {
    params: Vec<Parameter<T>>,
    by_name: HashMap<String, usize>,
}

impl<T: Elem> Default for ParamSet<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Elem> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet { params: Vec::new(), by_name: HashMap::new() }
    }

    pub fn insert(&mut self, p: Parameter<T>) -> usize {
        assert!(
            !self.by_name.contains_key(&p.name),
            "duplicate parameter name {}",
            p.name
        );
        self.by_name.insert(p.name.clone(), self.params.len());
        self.params.push(p);
        self.params.len() - 1
    }

    pub fn get(&self, idx: usize) -> &Parameter<T> {
        &self.params[idx]
    }

    pub fn get_mut(&mut self, idx: usize) -> &mut Parameter<T> {
        &mut self.params[idx]
    }

    pub fn by_name(&self, name: &str) -> Option<&Parameter<T>> {
        self.by_name.get(name).map(|&i| &self.params[i])
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Parameter<T>> {
        let idx = *self.by_name.get(name)?;
        Some(&mut self.params[idx])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter<T>> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter<T>> {
        self.params.iter_mut()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn total_values(&self) -> usize {
        self.params.iter().map(|p| p.numel()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.zero_grad();
        }
    }

    /// True when every gradient buffer is absent or all zeros.
    pub fn grads_are_zero(&self) -> bool {
        self.params.iter().all(|p| match &p.grad {
            None => true,
            Some(g) => g.iter().all(|v| *v == T::zero()),
        })
    }
}

/// One bias-corrected Adam step over every parameter in the set. Decoupled
/// weight decay shrinks the parameter before the Adam delta; gradients are
/// zeroed afterwards. Missing gradients are an error listing the names.
pub fn adam_step<T: Elem>(params: &mut ParamSet<T>, config: &OptimConfig) -> Result<()> {
    config.validate()?;
    let missing: Vec<&str> = params
        .iter()
        .filter(|p| p.grad.is_none())
        .map(|p| p.name.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingGradient(missing.join(", ")));
    }

    let lr = T::from_f64(config.learning_rate);
    let beta1 = T::from_f64(config.beta1);
    let beta2 = T::from_f64(config.beta2);
    let eps = T::from_f64(config.epsilon);
    let one = T::one();

    for p in params.iter_mut() {
        let mut grad = p.grad.take().unwrap();
        let wd = if p.no_decay { 0.0 } else { config.weight_decay };
        if !config.decoupled_decay && wd != 0.0 {
            let wdt = T::from_f64(wd);
            for (g, &w) in grad.iter_mut().zip(p.data.iter()) {
                *g += wdt * w;
            }
        }
        p.step_count += 1;
        let t = p.step_count as i32;
        let bc1 = one - beta1.powi(t);
        let bc2 = one - beta2.powi(t);
        let data = Rc::make_mut(&mut p.data);
        if config.decoupled_decay && wd != 0.0 {
            // p <- p - lr*wd*p before the Adam delta
            let factor = one - lr * T::from_f64(wd);
            for w in data.iter_mut() {
                *w *= factor;
            }
        }
        for i in 0..data.len() {
            let g = grad[i];
            p.adam_m[i] = beta1 * p.adam_m[i] + (one - beta1) * g;
            p.adam_v[i] = beta2 * p.adam_v[i] + (one - beta2) * g * g;
            let m_hat = p.adam_m[i] / bc1;
            let v_hat = p.adam_v[i] / bc2;
            data[i] = data[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

/// Kaiming-normal tensor: N(0, sqrt(2 / fan_in)), deterministic per stream.
pub fn kaiming_init<T: Elem>(
    shape: Vec<usize>,
    fan_in: usize,
    seeds: &SeedStream,
    name: &str,
) -> Tensor<T> {
    assert!(fan_in >= 1, "fan_in must be >= 1");
    let std = (2.0f64 / fan_in as f64).sqrt();
    let normal = Normal::new(0.0f64, std).unwrap();
    let mut rng = seeds.stream(name);
    let n: usize = shape.iter().product();
    let data: Vec<T> = (0..n).map(|_| T::from_f64(normal.sample(&mut rng))).collect();
    Tensor::from_vec(data, shape)
}
