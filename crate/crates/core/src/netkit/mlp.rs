use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{shape_err, NetError, Result};
use crate::numkit::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Architecture `p → h₁ → … → k`; the output layer is linear.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub layer_sizes: Vec<usize>,
    pub activations: Vec<Activation>,
}

impl MlpSpec {
    pub fn new(layer_sizes: Vec<usize>, activations: Vec<Activation>) -> Result<Self> {
        let spec = Self { layer_sizes, activations };
        spec.validate()?;
        Ok(spec)
    }

    /// Same activation on every hidden layer.
    pub fn uniform(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        let hidden = layer_sizes.len().saturating_sub(2);
        Self::new(layer_sizes, vec![activation; hidden])
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(NetError::InvalidConfig("an MLP needs at least one layer".into()));
        }
        if self.layer_sizes.iter().any(|&s| s == 0) {
            return Err(NetError::InvalidConfig("layer sizes must be positive".into()));
        }
        if self.activations.len() != self.layer_sizes.len() - 2 {
            return Err(NetError::InvalidConfig(format!(
                "expected {} hidden activations, got {}",
                self.layer_sizes.len() - 2,
                self.activations.len()
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Width of the last hidden representation (the input for a 1-layer net).
    pub fn penultimate_dim(&self) -> usize {
        self.layer_sizes[self.layer_sizes.len() - 2]
    }

    pub fn layer_param_count(&self, layer: usize) -> usize {
        (self.layer_sizes[layer] + 1) * self.layer_sizes[layer + 1]
    }

    pub fn param_count(&self) -> usize {
        (0..self.num_layers()).map(|l| self.layer_param_count(l)).sum()
    }

    /// Offset of each layer's block in the flat vector.
    pub fn layer_offsets(&self) -> Vec<usize> {
        let mut offs = Vec::with_capacity(self.num_layers());
        let mut acc = 0;
        for l in 0..self.num_layers() {
            offs.push(acc);
            acc += self.layer_param_count(l);
        }
        offs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatWeights {
    pub values: Vec<f64>,
}

impl FlatWeights {
    pub fn new(spec: &MlpSpec, values: Vec<f64>) -> Result<Self> {
        let w = Self { values };
        w.check(spec)?;
        Ok(w)
    }

    pub fn zeros(spec: &MlpSpec) -> Self {
        Self { values: vec![0.0; spec.param_count()] }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn check(&self, spec: &MlpSpec) -> Result<()> {
        if self.values.len() != spec.param_count() {
            return Err(shape_err("weights", spec.param_count(), self.values.len()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(NetError::InvalidConfig("weights contain non-finite values".into()));
        }
        Ok(())
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.values)
    }
}

/// He-style uniform initialization: weights in `±√(6/fan_in)`, zero biases.
pub fn init_weights(spec: &MlpSpec, rng: &mut Rng) -> FlatWeights {
    let mut values = Vec::with_capacity(spec.param_count());
    for l in 0..spec.num_layers() {
        let (fan_in, fan_out) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
        let bound = (6.0 / fan_in as f64).sqrt();
        for _ in 0..fan_in * fan_out {
            values.push(rng.uniform_range(-bound, bound));
        }
        values.extend(std::iter::repeat_n(0.0, fan_out));
    }
    FlatWeights { values }
}

struct Layer {
    w: DMatrix<f64>,
    b: DVector<f64>,
}

fn unpack(spec: &MlpSpec, w: &[f64]) -> Vec<Layer> {
    let mut layers = Vec::with_capacity(spec.num_layers());
    let mut off = 0;
    for l in 0..spec.num_layers() {
        let (fi, fo) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
        let wm = DMatrix::from_row_slice(fo, fi, &w[off..off + fi * fo]);
        off += fi * fo;
        let b = DVector::from_column_slice(&w[off..off + fo]);
        off += fo;
        layers.push(Layer { w: wm, b });
    }
    layers
}

/// Activations of a forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `acts[0]` is the input; `acts[l]` the post-activation of layer `l`.
    pub acts: Vec<DMatrix<f64>>,
    /// Pre-activations of every layer; the last entry is the logits.
    pub pre: Vec<DMatrix<f64>>,
}

impl ForwardCache {
    pub fn logits(&self) -> &DMatrix<f64> {
        self.pre.last().unwrap()
    }

    /// Input to the output layer.
    pub fn penultimate(&self) -> &DMatrix<f64> {
        &self.acts[self.acts.len() - 1]
    }
}

fn check_inputs(spec: &MlpSpec, w: &FlatWeights, inputs: &DMatrix<f64>) -> Result<()> {
    spec.validate()?;
    if w.values.len() != spec.param_count() {
        return Err(shape_err("weights", spec.param_count(), w.values.len()));
    }
    if inputs.ncols() != spec.input_dim() {
        return Err(shape_err("input columns", spec.input_dim(), inputs.ncols()));
    }
    Ok(())
}

fn affine(a: &DMatrix<f64>, layer: &Layer) -> DMatrix<f64> {
    let mut z = a * layer.w.transpose();
    for mut row in z.row_iter_mut() {
        row += layer.b.transpose();
    }
    z
}

pub fn forward_cached(spec: &MlpSpec, w: &FlatWeights, inputs: &DMatrix<f64>) -> Result<ForwardCache> {
    check_inputs(spec, w, inputs)?;
    let layers = unpack(spec, &w.values);
    let mut acts = vec![inputs.clone()];
    let mut pre = Vec::with_capacity(layers.len());
    for (l, layer) in layers.iter().enumerate() {
        let z = affine(acts.last().unwrap(), layer);
        if l + 1 < layers.len() {
            let act = spec.activations[l];
            acts.push(z.map(|x| act.apply(x)));
        }
        pre.push(z);
    }
    Ok(ForwardCache { acts, pre })
}

/// Logits for each input row (`m × k`).
pub fn forward(spec: &MlpSpec, w: &FlatWeights, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut cache = forward_cached(spec, w, inputs)?;
    Ok(cache.pre.pop().unwrap())
}

/// Gradient w.r.t. the flat weights given `∂L/∂logits` (`m × k`), summed
/// over rows. `d_penultimate` injects an extra gradient on the output
/// layer's input.
pub fn backward(
    spec: &MlpSpec,
    w: &FlatWeights,
    cache: &ForwardCache,
    d_logits: &DMatrix<f64>,
    d_penultimate: Option<&DMatrix<f64>>,
) -> Result<Vec<f64>> {
    let logits = cache.logits();
    if d_logits.shape() != logits.shape() {
        return Err(shape_err("logit gradient", format!("{:?}", logits.shape()), format!("{:?}", d_logits.shape())));
    }
    let layers = unpack(spec, &w.values);
    let offsets = spec.layer_offsets();
    let mut grad = vec![0.0; spec.param_count()];
    let mut dz = d_logits.clone();
    for l in (0..layers.len()).rev() {
        let a_prev = &cache.acts[l];
        let (fi, fo) = (spec.layer_sizes[l], spec.layer_sizes[l + 1]);
        let dw = dz.transpose() * a_prev;
        let off = offsets[l];
        for o in 0..fo {
            for i in 0..fi {
                grad[off + o * fi + i] = dw[(o, i)];
            }
            grad[off + fi * fo + o] = dz.column(o).sum();
        }
        if l == 0 {
            break;
        }
        let mut da = &dz * &layers[l].w;
        if l == layers.len() - 1 {
            if let Some(extra) = d_penultimate {
                if extra.shape() != da.shape() {
                    return Err(shape_err("penultimate gradient", format!("{:?}", da.shape()), format!("{:?}", extra.shape())));
                }
                da += extra;
            }
        }
        let act = spec.activations[l - 1];
        let zp = &cache.pre[l - 1];
        dz = da.zip_map(zp, |g, z| g * act.derivative(z));
    }
    Ok(grad)
}

/// Vector-Jacobian product: `Σ_rows Jᵀ c` for cotangents `c` (`m × k`).
pub fn vjp(spec: &MlpSpec, w: &FlatWeights, inputs: &DMatrix<f64>, cotangent: &DMatrix<f64>) -> Result<Vec<f64>> {
    let cache = forward_cached(spec, w, inputs)?;
    backward(spec, w, &cache, cotangent, None)
}

/// Jacobian-vector product: directional derivative of the logits along `tangent`.
pub fn jvp(spec: &MlpSpec, w: &FlatWeights, inputs: &DMatrix<f64>, tangent: &[f64]) -> Result<DMatrix<f64>> {
    check_inputs(spec, w, inputs)?;
    if tangent.len() != spec.param_count() {
        return Err(shape_err("tangent", spec.param_count(), tangent.len()));
    }
    let layers = unpack(spec, &w.values);
    let dlayers = unpack(spec, tangent);
    let mut a = inputs.clone();
    let mut da = DMatrix::zeros(inputs.nrows(), inputs.ncols());
    for (l, (layer, dlayer)) in layers.iter().zip(&dlayers).enumerate() {
        let z = affine(&a, layer);
        let dz = &da * layer.w.transpose() + affine(&a, dlayer);
        if l + 1 == layers.len() {
            return Ok(dz);
        }
        let act = spec.activations[l];
        da = dz.zip_map(&z, |d, zz| d * act.derivative(zz));
        a = z.map(|x| act.apply(x));
    }
    unreachable!("an MLP has at least one layer")
}

/// `k × d` matrix whose row `c` is `∇_w f_c(x)`.
pub fn per_example_jacobian(spec: &MlpSpec, w: &FlatWeights, x: &[f64]) -> Result<DMatrix<f64>> {
    let inputs = DMatrix::from_row_slice(1, x.len(), x);
    let cache = forward_cached(spec, w, &inputs)?;
    let k = spec.output_dim();
    let d = spec.param_count();
    let mut jac = DMatrix::zeros(k, d);
    for c in 0..k {
        let mut e = DMatrix::zeros(1, k);
        e[(0, c)] = 1.0;
        let g = backward(spec, w, &cache, &e, None)?;
        jac.row_mut(c).copy_from_slice(&g);
    }
    Ok(jac)
}
