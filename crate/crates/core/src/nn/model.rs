use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{relu_backward, relu_forward, AvgPool2d, Conv2d, Dense};
use super::{NnError, Real, Scores, Tensor4};
use crate::dsp::FeatureKind;
use crate::exec::Exec;

/// The four input-specific network variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    /// Radar cube, input 4 x 256 x 128.
    Rc,
    /// Range-velocity map, input 1 x 256 x 128.
    Rv,
    /// Range-angle map with a 64-point angle FFT, input 1 x 256 x 64.
    Ra64,
    /// Range-angle map with a 4-point angle FFT, input 1 x 256 x 4.
    Ra4,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Rc, Variant::Rv, Variant::Ra64, Variant::Ra4];

    pub fn feature_kind(self) -> FeatureKind {
        match self {
            Variant::Rc => FeatureKind::RadarCube,
            Variant::Rv => FeatureKind::RangeVelocity,
            Variant::Ra64 => FeatureKind::RA64,
            Variant::Ra4 => FeatureKind::RA4,
        }
    }

    /// Input shape for the default 4 x 256 x 128 radar.
    pub fn input_shape(self) -> [usize; 3] {
        self.feature_kind().shape([4, 256, 128])
    }

    pub(crate) fn tag(self) -> u32 {
        match self {
            Variant::Rc => 0,
            Variant::Rv => 1,
            Variant::Ra64 => 2,
            Variant::Ra4 => 3,
        }
    }

    pub(crate) fn from_tag(tag: u32) -> Option<Self> {
        Variant::ALL.into_iter().find(|v| v.tag() == tag)
    }

    /// Layer plan: five 3x3 convolutions (8, 16, 8, 4, 2 channels, ReLU),
    /// average pools after CNN-2..5, then dense 256 -> 128 -> 64 with the
    /// first dense width inferred from the flatten size.
    pub fn spec(self, n_outputs: usize) -> ModelSpec {
        self.spec_for([4, 256, 128], n_outputs)
    }

    /// [`Variant::spec`] for a radar cube of shape `[M_r, S, A]`.
    pub fn spec_for(self, cube_shape: [usize; 3], n_outputs: usize) -> ModelSpec {
        let (first_pool, later_pool) = match self {
            Variant::Rc | Variant::Rv => (Some((2, 1)), (2, 2)),
            Variant::Ra64 => (None, (2, 2)),
            Variant::Ra4 => (None, (2, 1)),
        };
        ModelSpec {
            input_shape: self.feature_kind().shape(cube_shape),
            convs: vec![
                ConvSpec { channels: 8, pool: None },
                ConvSpec { channels: 16, pool: first_pool },
                ConvSpec { channels: 8, pool: Some(later_pool) },
                ConvSpec { channels: 4, pool: Some(later_pool) },
                ConvSpec { channels: 2, pool: Some(later_pool) },
            ],
            hidden: vec![256, 128],
            n_outputs,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Rc => "rc",
            Variant::Rv => "rv",
            Variant::Ra64 => "ra64",
            Variant::Ra4 => "ra4",
        })
    }
}

impl FromStr for Variant {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rc" => Ok(Variant::Rc),
            "rv" => Ok(Variant::Rv),
            "ra64" => Ok(Variant::Ra64),
            "ra4" => Ok(Variant::Ra4),
            _ => Err(NnError::UnknownVariant(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub channels: usize,
    /// Average pool applied after this layer's ReLU.
    pub pool: Option<(usize, usize)>,
}

/// Generic conv-then-dense architecture description.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub input_shape: [usize; 3],
    pub convs: Vec<ConvSpec>,
    /// Widths of the hidden dense layers (each followed by ReLU).
    pub hidden: Vec<usize>,
    pub n_outputs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer<T> {
    Conv(Conv2d<T>),
    Relu,
    Pool(AvgPool2d),
    /// Consumes its input flattened.
    Dense(Dense<T>),
}

/// Sequential CNN. `shapes[i]` is the input shape of `layers[i]`;
/// `shapes[layers.len()]` is `[n_outputs, 1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnModel<T> {
    pub variant: Option<Variant>,
    pub layers: Vec<Layer<T>>,
    pub shapes: Vec<[usize; 3]>,
}

/// Per-tensor gradients, in parameter declaration order (weight then bias
/// of each conv/dense layer).
pub type Grads<T> = Vec<Vec<T>>;

/// Per-sample intermediate values kept for the backward pass.
#[derive(Debug, Default)]
pub struct Workspace<T> {
    acts: Vec<Vec<T>>,
    col: Vec<T>,
    dcol: Vec<T>,
    grad_a: Vec<T>,
    grad_b: Vec<T>,
}

impl<T: Real> CnnModel<T> {
    /// Builds a model for `spec`, initializing weights from `seed`.
    pub fn from_spec(spec: &ModelSpec, variant: Option<Variant>, seed: u64) -> Result<Self, NnError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        let mut shapes = vec![spec.input_shape];
        let [mut c, mut h, mut w] = spec.input_shape;
        if c * h * w == 0 {
            return Err(NnError::InvalidConfig(format!("empty input shape {:?}", spec.input_shape)));
        }
        for conv in &spec.convs {
            layers.push(Layer::Conv(Conv2d::new(c, conv.channels, (3, 3), &mut rng)));
            c = conv.channels;
            shapes.push([c, h, w]);
            layers.push(Layer::Relu);
            shapes.push([c, h, w]);
            if let Some(kernel) = conv.pool {
                let pool = AvgPool2d { kernel };
                (h, w) = pool.output_hw(h, w);
                if h * w == 0 {
                    return Err(NnError::InvalidConfig(format!("pooling {kernel:?} collapses the feature map")));
                }
                layers.push(Layer::Pool(pool));
                shapes.push([c, h, w]);
            }
        }
        let mut width = c * h * w;
        for &hidden in &spec.hidden {
            layers.push(Layer::Dense(Dense::new(width, hidden, &mut rng)));
            shapes.push([hidden, 1, 1]);
            layers.push(Layer::Relu);
            shapes.push([hidden, 1, 1]);
            width = hidden;
        }
        layers.push(Layer::Dense(Dense::new(width, spec.n_outputs, &mut rng)));
        shapes.push([spec.n_outputs, 1, 1]);
        Ok(CnnModel { variant, layers, shapes })
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.shapes[0]
    }

    pub fn n_outputs(&self) -> usize {
        self.shapes.last().unwrap()[0]
    }

    /// Width of the first dense layer's input.
    pub fn flatten_size(&self) -> usize {
        self.layers
            .iter()
            .find_map(|l| match l {
                Layer::Dense(d) => Some(d.inputs),
                _ => None,
            })
            .unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn params(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => out.extend([c.weight.as_slice(), c.bias.as_slice()]),
                Layer::Dense(d) => out.extend([d.weight.as_slice(), d.bias.as_slice()]),
                _ => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Conv(c) => out.extend([&mut c.weight, &mut c.bias]),
                Layer::Dense(d) => out.extend([&mut d.weight, &mut d.bias]),
                _ => {}
            }
        }
        out
    }

    pub fn zero_grads(&self) -> Grads<T> {
        self.params().iter().map(|p| vec![T::zero(); p.len()]).collect()
    }

    /// Converts parameters to another precision.
    pub fn cast<U: Real>(&self) -> CnnModel<U> {
        let conv = |v: &[T]| v.iter().map(|&x| U::from_f64_lossy(x.as_f64())).collect();
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv(c) => Layer::Conv(Conv2d {
                    in_channels: c.in_channels,
                    out_channels: c.out_channels,
                    kernel: c.kernel,
                    weight: conv(&c.weight),
                    bias: conv(&c.bias),
                }),
                Layer::Dense(d) => Layer::Dense(Dense {
                    inputs: d.inputs,
                    outputs: d.outputs,
                    weight: conv(&d.weight),
                    bias: conv(&d.bias),
                }),
                Layer::Relu => Layer::Relu,
                Layer::Pool(p) => Layer::Pool(*p),
            })
            .collect();
        CnnModel { variant: self.variant, layers, shapes: self.shapes.clone() }
    }

    fn check_input(&self, len: usize) -> Result<(), NnError> {
        let expected: usize = self.input_shape().iter().product();
        if len != expected {
            return Err(NnError::ShapeMismatch(format!(
                "input of {len} values, model expects {:?} ({expected})",
                self.input_shape()
            )));
        }
        Ok(())
    }

    /// Runs one sample, keeping every layer input in `ws` for
    /// [`CnnModel::backward_sample`]. Returns the logits.
    pub fn forward_sample<'w>(&self, input: &[T], ws: &'w mut Workspace<T>) -> Result<&'w [T], NnError> {
        self.check_input(input.len())?;
        ws.acts.resize_with(self.layers.len() + 1, Vec::new);
        ws.acts[0].clear();
        ws.acts[0].extend_from_slice(input);
        for (i, layer) in self.layers.iter().enumerate() {
            let [c, h, w] = self.shapes[i];
            let out_len: usize = self.shapes[i + 1].iter().product();
            let (before, after) = ws.acts.split_at_mut(i + 1);
            let x = &before[i];
            let y = &mut after[0];
            y.clear();
            y.resize(out_len, T::zero());
            match layer {
                Layer::Conv(conv) => conv.forward(x, h, w, y, &mut ws.col),
                Layer::Relu => {
                    y.copy_from_slice(x);
                    relu_forward(y);
                }
                Layer::Pool(pool) => pool.forward(x, c, h, w, y),
                Layer::Dense(dense) => dense.forward(x, y),
            }
        }
        Ok(&ws.acts[self.layers.len()])
    }

    /// Back-propagates `dlogits` through the activations stored by the last
    /// [`CnnModel::forward_sample`] call, adding into `grads`.
    pub fn backward_sample(&self, dlogits: &[T], grads: &mut Grads<T>, ws: &mut Workspace<T>) {
        let mut param_idx = grads.len();
        ws.grad_a.clear();
        ws.grad_a.extend_from_slice(dlogits);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let [c, h, w] = self.shapes[i];
            let in_len = c * h * w;
            let need_input_grad = i > 0;
            ws.grad_b.clear();
            ws.grad_b.resize(in_len, T::zero());
            let x = &ws.acts[i];
            match layer {
                Layer::Conv(conv) => {
                    param_idx -= 2;
                    let (gw, gb) = grads[param_idx..].split_at_mut(1);
                    conv.backward(
                        x,
                        h,
                        w,
                        &ws.grad_a,
                        &mut gw[0],
                        &mut gb[0],
                        need_input_grad.then_some(ws.grad_b.as_mut_slice()),
                        &mut ws.col,
                        &mut ws.dcol,
                    );
                }
                Layer::Relu => {
                    ws.grad_b.copy_from_slice(&ws.grad_a);
                    relu_backward(&ws.acts[i + 1], &mut ws.grad_b);
                }
                Layer::Pool(pool) => pool.backward(&ws.grad_a, c, h, w, &mut ws.grad_b),
                Layer::Dense(dense) => {
                    param_idx -= 2;
                    let (gw, gb) = grads[param_idx..].split_at_mut(1);
                    dense.backward(
                        x,
                        &ws.grad_a,
                        &mut gw[0],
                        &mut gb[0],
                        need_input_grad.then_some(ws.grad_b.as_mut_slice()),
                    );
                }
            }
            std::mem::swap(&mut ws.grad_a, &mut ws.grad_b);
        }
    }

    /// Logits for a single sample.
    pub fn logits(&self, input: &[T]) -> Result<Vec<T>, NnError> {
        let mut ws = Workspace::default();
        Ok(self.forward_sample(input, &mut ws)?.to_vec())
    }

    /// Raw scores (logits) for every sample of `batch`.
    pub fn forward(&self, batch: &Tensor4<T>) -> Result<Scores<T>, NnError> {
        self.forward_with(batch, Exec::Parallel)
    }

    pub fn forward_with(&self, batch: &Tensor4<T>, exec: Exec) -> Result<Scores<T>, NnError> {
        let [_, c, h, w] = batch.shape;
        if [c, h, w] != self.input_shape() {
            return Err(NnError::ShapeMismatch(format!(
                "batch samples {:?}, model expects {:?}",
                [c, h, w],
                self.input_shape()
            )));
        }
        let rows = exec.try_map_range(batch.batch(), |i| self.logits(batch.sample(i)))?;
        let cols = self.n_outputs();
        Ok(Scores { rows: rows.len(), cols, data: rows.into_iter().flatten().collect() })
    }
}

/// Builds a Table-style model for `variant` with 64 outputs.
pub fn build_model(variant: Variant, seed: u64) -> CnnModel<f32> {
    CnnModel::from_spec(&variant.spec(64), Some(variant), seed).expect("variant specs are valid")
}

/// Model for `variant` on a non-default radar cube shape; fails when the
/// pooling stack does not fit the input.
pub fn build_model_for(
    variant: Variant,
    cube_shape: [usize; 3],
    n_outputs: usize,
    seed: u64,
) -> Result<CnnModel<f32>, NnError> {
    CnnModel::from_spec(&variant.spec_for(cube_shape, n_outputs), Some(variant), seed)
}
