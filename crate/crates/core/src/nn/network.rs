use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::nn::ops::{self, Conv1dGeometry, Mode};
use crate::nn::tensor::{Scalar, Tensor};

/// One entry of a layer stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel_size: usize,
        stride: usize,
        padding: usize,
    },
    Dense {
        in_features: usize,
        out_features: usize,
    },
    Maxpool1d {
        window: usize,
        stride: usize,
    },
    Dropout {
        rate: f64,
    },
    LeakyRelu {
        alpha: f64,
    },
    Softmax,
    Flatten,
}

impl LayerSpec {
    pub fn conv1d(in_channels: usize, out_channels: usize, kernel_size: usize, padding: usize) -> Self {
        LayerSpec::Conv1d {
            in_channels,
            out_channels,
            kernel_size,
            stride: 1,
            padding,
        }
    }

    pub fn dense(in_features: usize, out_features: usize) -> Self {
        LayerSpec::Dense {
            in_features,
            out_features,
        }
    }

    /// Weight and bias shapes for layers that own parameters.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel_size,
                ..
            } => Some((vec![out_channels, in_channels, kernel_size], vec![out_channels])),
            LayerSpec::Dense {
                in_features,
                out_features,
            } => Some((vec![out_features, in_features], vec![out_features])),
            _ => None,
        }
    }

    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                kernel_size,
                ..
            } => in_channels * kernel_size,
            LayerSpec::Dense { in_features, .. } => in_features,
            _ => 0,
        }
    }

    fn geometry(&self) -> Option<Conv1dGeometry> {
        match *self {
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                padding,
            } => Some(Conv1dGeometry {
                in_channels,
                out_channels,
                kernel_size,
                stride,
                padding,
            }),
            _ => None,
        }
    }

    /// Output shape for the given input shape, or an error naming both.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            LayerSpec::Conv1d { in_channels, .. } => {
                let geom = self.geometry().expect("conv layer");
                match *input {
                    [c, l] if c == in_channels => Ok(vec![geom.out_channels, geom.output_len(l)?]),
                    _ => Err(shape_err(format!("[{in_channels}, _]"), input)),
                }
            }
            LayerSpec::Dense {
                in_features,
                out_features,
            } => match *input {
                [n] if n == in_features => Ok(vec![out_features]),
                _ => Err(shape_err([in_features], input)),
            },
            LayerSpec::Maxpool1d { window, stride } => match *input {
                [_, _] if window == 0 || stride == 0 => Err(Error::InvalidNetwork(
                    "maxpool window and stride must be positive".into(),
                )),
                [c, l] if window <= l => Ok(vec![c, (l - window) / stride + 1]),
                _ => Err(Error::InvalidNetwork(format!(
                    "maxpool window {window} does not fit input {input:?} (pooled length < 1)"
                ))),
            },
            LayerSpec::Dropout { rate } => {
                if (0.0..1.0).contains(&rate) {
                    Ok(input.to_vec())
                } else {
                    Err(Error::InvalidNetwork(format!("dropout rate {rate} outside [0, 1)")))
                }
            }
            LayerSpec::LeakyRelu { alpha } => {
                if alpha > 0.0 && alpha < 1.0 {
                    Ok(input.to_vec())
                } else {
                    Err(Error::InvalidNetwork(format!("leaky_relu alpha {alpha} outside (0, 1)")))
                }
            }
            LayerSpec::Softmax => match *input {
                [_] => Ok(input.to_vec()),
                _ => Err(shape_err("[n]", input)),
            },
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
        }
    }
}

/// Input shape of a network: `channels` sequences of `length` values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub channels: usize,
    pub length: usize,
}

/// A layer stack plus its input shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    /// Checks shape compatibility and returns the output shape of every layer.
    pub fn validate(&self) -> Result<Vec<Vec<usize>>> {
        if self.input.channels == 0 || self.input.length == 0 {
            return Err(Error::InvalidNetwork(format!("empty input shape {:?}", self.input)));
        }
        let mut shape = vec![self.input.channels, self.input.length];
        let mut shapes = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            if matches!(layer, LayerSpec::Softmax) && i + 1 != self.layers.len() {
                return Err(Error::InvalidNetwork(format!(
                    "softmax at layer {i} must be the final layer"
                )));
            }
            shape = layer.output_shape(&shape).map_err(|e| {
                Error::InvalidNetwork(format!("layer {i} ({layer:?}): {e}"))
            })?;
            shapes.push(shape.clone());
        }
        Ok(shapes)
    }

    pub fn output_len(&self) -> Result<usize> {
        Ok(self
            .validate()?
            .last()
            .map(|s| s.iter().product())
            .unwrap_or(self.input.channels * self.input.length))
    }

    /// Exact number of weight and bias elements.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .filter_map(LayerSpec::param_shapes)
            .map(|(w, b)| w.iter().product::<usize>() + b.iter().product::<usize>())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams<T = f32> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

/// Trained weights keyed by layer index. Only conv1d and dense layers appear.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSet<T = f32> {
    layers: BTreeMap<usize, LayerParams<T>>,
}

impl<T: Scalar> ParameterSet<T> {
    /// He-normal weights (`std = sqrt(2 / fan_in)`), zero biases.
    pub fn init<R: Rng + ?Sized>(spec: &NetworkSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let mut layers = BTreeMap::new();
        for (i, layer) in spec.layers.iter().enumerate() {
            if let Some((wshape, bshape)) = layer.param_shapes() {
                let std = (2.0 / layer.fan_in() as f64).sqrt();
                let n: usize = wshape.iter().product();
                let w = (0..n)
                    .map(|_| {
                        let z: f64 = StandardNormal.sample(rng);
                        T::of(z * std)
                    })
                    .collect();
                layers.insert(
                    i,
                    LayerParams {
                        weight: Tensor::new(wshape, w)?,
                        bias: Tensor::zeros(bshape),
                    },
                );
            }
        }
        Ok(Self { layers })
    }

    pub fn zeros(spec: &NetworkSpec) -> Self {
        let layers = spec
            .layers
            .iter()
            .enumerate()
            .filter_map(|(i, l)| {
                l.param_shapes().map(|(w, b)| {
                    (
                        i,
                        LayerParams {
                            weight: Tensor::zeros(w),
                            bias: Tensor::zeros(b),
                        },
                    )
                })
            })
            .collect();
        Self { layers }
    }

    /// Builds a set from explicit `(layer index, weight, bias)` entries.
    pub fn from_layers(entries: impl IntoIterator<Item = (usize, LayerParams<T>)>) -> Self {
        Self {
            layers: entries.into_iter().collect(),
        }
    }

    pub fn get(&self, layer: usize) -> Option<&LayerParams<T>> {
        self.layers.get(&layer)
    }

    pub fn get_mut(&mut self, layer: usize) -> Option<&mut LayerParams<T>> {
        self.layers.get_mut(&layer)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &LayerParams<T>)> {
        self.layers.iter().map(|(&i, p)| (i, p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (usize, &mut LayerParams<T>)> {
        self.layers.iter_mut().map(|(&i, p)| (i, p))
    }

    pub fn total_count(&self) -> usize {
        self.layers
            .values()
            .map(|p| p.weight.len() + p.bias.len())
            .sum()
    }

    /// True when every parameter-owning layer of `spec` has tensors of the right shape.
    pub fn matches_spec(&self, spec: &NetworkSpec) -> bool {
        let expected: Vec<_> = spec
            .layers
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.param_shapes().map(|s| (i, s)))
            .collect();
        expected.len() == self.layers.len()
            && expected.iter().all(|(i, (w, b))| {
                self.layers
                    .get(i)
                    .is_some_and(|p| p.weight.shape() == w.as_slice() && p.bias.shape() == b.as_slice())
            })
    }

    pub fn is_congruent(&self, other: &Self) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|((i, a), (j, b))| {
                i == j && a.weight.shape() == b.weight.shape() && a.bias.shape() == b.bias.shape()
            })
    }

    /// All values in layer order, weights before biases.
    pub fn flat_values(&self) -> impl Iterator<Item = T> + '_ {
        self.layers
            .values()
            .flat_map(|p| p.weight.data().iter().chain(p.bias.data()).copied())
    }

    pub fn cast<U: Scalar>(&self) -> ParameterSet<U> {
        ParameterSet {
            layers: self
                .layers
                .iter()
                .map(|(&i, p)| {
                    (
                        i,
                        LayerParams {
                            weight: p.weight.cast(),
                            bias: p.bias.cast(),
                        },
                    )
                })
                .collect(),
        }
    }
}

/// Gradients with the same keying and shapes as a [`ParameterSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet<T = f32>(ParameterSet<T>);

impl<T: Scalar> GradientSet<T> {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        Self(ParameterSet::zeros(spec))
    }

    pub fn as_params(&self) -> &ParameterSet<T> {
        &self.0
    }

    pub fn get(&self, layer: usize) -> Option<&LayerParams<T>> {
        self.0.get(layer)
    }

    pub fn is_congruent_with(&self, params: &ParameterSet<T>) -> bool {
        self.0.is_congruent(params)
    }

    /// `self += other`
    pub fn accumulate(&mut self, other: &GradientSet<T>) -> Result<()> {
        if !self.0.is_congruent(&other.0) {
            return Err(Error::InvalidParameter("gradient sets are not congruent".into()));
        }
        for ((_, a), (_, b)) in self.0.iter_mut().zip(other.0.iter()) {
            for (x, &y) in a.weight.data_mut().iter_mut().zip(b.weight.data()) {
                *x += y;
            }
            for (x, &y) in a.bias.data_mut().iter_mut().zip(b.bias.data()) {
                *x += y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for (_, p) in self.0.iter_mut() {
            p.weight.data_mut().iter_mut().for_each(|v| *v *= factor);
            p.bias.data_mut().iter_mut().for_each(|v| *v *= factor);
        }
    }

    pub fn max_abs(&self) -> T {
        self.0
            .flat_values()
            .fold(T::zero(), |m, v| if v.abs() > m { v.abs() } else { m })
    }
}

impl<T> From<ParameterSet<T>> for GradientSet<T> {
    fn from(p: ParameterSet<T>) -> Self {
        Self(p)
    }
}

#[derive(Debug, Clone)]
enum LayerCache<T> {
    Input(Tensor<T>),
    Argmax { input_shape: Vec<usize>, argmax: Vec<usize> },
    Mask(Option<Vec<T>>),
    Shape(Vec<usize>),
    None,
}

/// Per-layer state recorded by a training-mode forward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache<T = f32> {
    layers: Vec<LayerCache<T>>,
    probs: Vec<f64>,
}

impl<T> ForwardCache<T> {
    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn clear(&mut self) {
        self.layers.clear();
        self.probs.clear();
    }
}

/// A validated layer stack ending in softmax, with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T = f32> {
    spec: NetworkSpec,
    params: ParameterSet<T>,
}

impl<T: Scalar> Network<T> {
    pub fn new(spec: NetworkSpec, params: ParameterSet<T>) -> Result<Self> {
        spec.validate()?;
        if !matches!(spec.layers.last(), Some(LayerSpec::Softmax)) {
            return Err(Error::InvalidNetwork("network must end with a softmax layer".into()));
        }
        if !params.matches_spec(&spec) {
            return Err(Error::InvalidNetwork(
                "parameter set is not shape-congruent with the layer stack".into(),
            ));
        }
        Ok(Self { spec, params })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParameterSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet<T> {
        &mut self.params
    }

    pub fn into_params(self) -> ParameterSet<T> {
        self.params
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let expected = [self.spec.input.channels, self.spec.input.length];
        if x.shape() != expected {
            return Err(shape_err(expected, x.shape()));
        }
        x.check_finite()
    }

    /// Inference pass: dropout is the identity. Returns class probabilities.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            h = match layer {
                LayerSpec::Conv1d { .. } => {
                    let p = &self.params.layers[&i];
                    ops::conv1d_forward(&h, &layer.geometry().expect("conv"), &p.weight, &p.bias)?
                }
                LayerSpec::Dense { .. } => {
                    let p = &self.params.layers[&i];
                    ops::dense_forward(&h, &p.weight, &p.bias)?
                }
                LayerSpec::Maxpool1d { window, stride } => ops::maxpool1d_forward(&h, *window, *stride)?.0,
                LayerSpec::Dropout { .. } => h,
                LayerSpec::LeakyRelu { alpha } => ops::leaky_relu(&h, T::of(*alpha))?,
                LayerSpec::Flatten => {
                    let n = h.len();
                    h.reshape(vec![n])?
                }
                LayerSpec::Softmax => {
                    let logits: Vec<f64> = h.data().iter().map(|v| v.as_f64()).collect();
                    return ops::softmax(&logits);
                }
            };
        }
        unreachable!("validated networks end with softmax")
    }

    /// Training pass: samples dropout masks from `rng` and records everything
    /// `backward` needs into `cache`. Returns class probabilities.
    pub fn forward_train<R: Rng + ?Sized>(
        &self,
        x: &Tensor<T>,
        rng: &mut R,
        cache: &mut ForwardCache<T>,
    ) -> Result<Vec<f64>> {
        cache.clear();
        self.check_input(x)?;
        let mut h = x.clone();
        for (i, layer) in self.spec.layers.iter().enumerate() {
            let (next, entry) = match layer {
                LayerSpec::Conv1d { .. } => {
                    let p = &self.params.layers[&i];
                    let y = ops::conv1d_forward(&h, &layer.geometry().expect("conv"), &p.weight, &p.bias)?;
                    (y, LayerCache::Input(h))
                }
                LayerSpec::Dense { .. } => {
                    let p = &self.params.layers[&i];
                    let y = ops::dense_forward(&h, &p.weight, &p.bias)?;
                    (y, LayerCache::Input(h))
                }
                LayerSpec::Maxpool1d { window, stride } => {
                    let (y, argmax) = ops::maxpool1d_forward(&h, *window, *stride)?;
                    let input_shape = h.shape().to_vec();
                    (y, LayerCache::Argmax { input_shape, argmax })
                }
                LayerSpec::Dropout { rate } => {
                    let (y, mask) = ops::dropout_apply(&h, *rate, Mode::Train, rng)?;
                    (y, LayerCache::Mask(mask))
                }
                LayerSpec::LeakyRelu { alpha } => {
                    let y = ops::leaky_relu(&h, T::of(*alpha))?;
                    (y, LayerCache::Input(h))
                }
                LayerSpec::Flatten => {
                    let shape = h.shape().to_vec();
                    let n = h.len();
                    (h.reshape(vec![n])?, LayerCache::Shape(shape))
                }
                LayerSpec::Softmax => {
                    let logits: Vec<f64> = h.data().iter().map(|v| v.as_f64()).collect();
                    cache.probs = ops::softmax(&logits)?;
                    cache.layers.push(LayerCache::None);
                    return Ok(cache.probs.clone());
                }
            };
            cache.layers.push(entry);
            h = next;
        }
        unreachable!("validated networks end with softmax")
    }

    /// Gradients of `cross_entropy(probs, label)` for the pass recorded in `cache`.
    pub fn backward(&self, cache: &ForwardCache<T>, label: usize) -> Result<GradientSet<T>> {
        if cache.layers.len() != self.spec.layers.len() || cache.probs.is_empty() {
            return Err(Error::NoForwardPass);
        }
        let dlogits = ops::softmax_cross_entropy_grad(&cache.probs, label)?;
        let mut grad = Tensor::from_vec(dlogits.into_iter().map(T::of).collect());
        let mut grads = GradientSet::zeros(&self.spec);
        let last = self.spec.layers.len() - 1;
        for i in (0..last).rev() {
            let layer = &self.spec.layers[i];
            grad = match (layer, &cache.layers[i]) {
                (LayerSpec::Conv1d { .. }, LayerCache::Input(x)) => {
                    let p = &self.params.layers[&i];
                    let (gx, gw, gb) =
                        ops::conv1d_backward(x, &layer.geometry().expect("conv"), &p.weight, &grad)?;
                    let slot = grads.0.get_mut(i).expect("param layer");
                    slot.weight = gw;
                    slot.bias = gb;
                    gx
                }
                (LayerSpec::Dense { .. }, LayerCache::Input(x)) => {
                    let p = &self.params.layers[&i];
                    let (gx, gw, gb) = ops::dense_backward(x, &p.weight, &grad)?;
                    let slot = grads.0.get_mut(i).expect("param layer");
                    slot.weight = gw;
                    slot.bias = gb;
                    gx
                }
                (LayerSpec::Maxpool1d { .. }, LayerCache::Argmax { input_shape, argmax }) => {
                    ops::maxpool1d_backward(input_shape, argmax, &grad)?
                }
                (LayerSpec::Dropout { .. }, LayerCache::Mask(mask)) => {
                    ops::dropout_backward(mask.as_deref(), &grad)?
                }
                (LayerSpec::LeakyRelu { alpha }, LayerCache::Input(x)) => {
                    ops::leaky_relu_backward(x, T::of(*alpha), &grad)?
                }
                (LayerSpec::Flatten, LayerCache::Shape(shape)) => grad.reshape(shape.clone())?,
                _ => return Err(Error::NoForwardPass),
            };
        }
        Ok(grads)
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        Network {
            spec: self.spec.clone(),
            params: self.params.cast(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tiny_spec() -> NetworkSpec {
        NetworkSpec {
            input: InputShape { channels: 2, length: 8 },
            layers: vec![
                LayerSpec::conv1d(2, 3, 3, 1),
                LayerSpec::LeakyRelu { alpha: 0.1 },
                LayerSpec::Maxpool1d { window: 2, stride: 2 },
                LayerSpec::Dropout { rate: 0.25 },
                LayerSpec::Flatten,
                LayerSpec::dense(12, 2),
                LayerSpec::Softmax,
            ],
        }
    }

    #[test]
    fn validate_reports_shapes() {
        let shapes = tiny_spec().validate().unwrap();
        assert_eq!(shapes[0], vec![3, 8]);
        assert_eq!(shapes[2], vec![3, 4]);
        assert_eq!(shapes[4], vec![12]);
        assert_eq!(shapes.last().unwrap(), &vec![2]);
    }

    #[test]
    fn incompatible_layers_fail_at_build_time() {
        let mut spec = tiny_spec();
        spec.layers[5] = LayerSpec::dense(10, 2);
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("[10]") && err.contains("[12]"), "{err}");
        let mut spec = tiny_spec();
        spec.layers.swap(5, 6);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn param_count_examples() {
        let dense = NetworkSpec {
            input: InputShape { channels: 1, length: 4 },
            layers: vec![LayerSpec::Flatten, LayerSpec::dense(4, 2)],
        };
        assert_eq!(dense.param_count(), 10);
        let conv = NetworkSpec {
            input: InputShape { channels: 2, length: 5 },
            layers: vec![LayerSpec::conv1d(2, 3, 3, 0)],
        };
        assert_eq!(conv.param_count(), 21);
        let none = NetworkSpec {
            input: InputShape { channels: 2, length: 8 },
            layers: vec![
                LayerSpec::Maxpool1d { window: 2, stride: 2 },
                LayerSpec::LeakyRelu { alpha: 0.1 },
            ],
        };
        assert_eq!(none.param_count(), 0);
    }

    #[test]
    fn init_counts_and_zero_biases() {
        let spec = tiny_spec();
        let params = ParameterSet::<f32>::init(&spec, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(params.total_count(), spec.param_count());
        assert!(params.iter().all(|(_, p)| p.bias.data().iter().all(|&b| b == 0.0)));
        assert!(params.iter().map(|(i, _)| i).eq([0, 5]));
    }

    #[test]
    fn backward_without_forward_is_an_error() {
        let spec = tiny_spec();
        let net = Network::new(spec.clone(), ParameterSet::<f32>::zeros(&spec)).unwrap();
        assert!(matches!(
            net.backward(&ForwardCache::default(), 0),
            Err(Error::NoForwardPass)
        ));
    }

    #[test]
    fn inference_is_bit_deterministic() {
        let spec = tiny_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = Network::new(spec.clone(), ParameterSet::<f32>::init(&spec, &mut rng).unwrap()).unwrap();
        let x = Tensor::new(vec![2, 8], (0..16).map(|i| (i as f32 * 0.37).sin()).collect()).unwrap();
        let a = net.forward(&x).unwrap();
        let b = net.forward(&x).unwrap();
        assert_eq!(a.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn saturated_prediction_has_zero_gradient() {
        // dense 1 -> 2 with logits (+50, -50) for label 0: probs are onehot after clamping
        let spec = NetworkSpec {
            input: InputShape { channels: 1, length: 1 },
            layers: vec![LayerSpec::Flatten, LayerSpec::dense(1, 2), LayerSpec::Softmax],
        };
        let params = ParameterSet::from_layers([(
            1,
            LayerParams {
                weight: Tensor::new(vec![2, 1], vec![0.0f64, 0.0]).unwrap(),
                bias: Tensor::from_vec(vec![50.0, -50.0]),
            },
        )]);
        let net = Network::new(spec, params).unwrap();
        let mut cache = ForwardCache::default();
        net.forward_train(&Tensor::new(vec![1, 1], vec![1.0]).unwrap(), &mut ChaCha8Rng::seed_from_u64(0), &mut cache)
            .unwrap();
        let g = net.backward(&cache, 0).unwrap();
        assert!(g.max_abs() < 1e-40);
    }
}
