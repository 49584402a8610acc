//! Layer kernels: forward passes and their hand-written gradients.
//!
//! Feature maps are `[channels, length]`; conv weights are `[out, in, kernel]`
//! and dense weights are `[out, in]`, all row-major.

use rand::Rng;

use crate::error::{shape_err, Error, Result};
use crate::nn::tensor::{Scalar, Tensor};

/// Probabilities are clamped to this floor before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Hyperparameters of a 1-D convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv1dGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_size: usize,
    pub stride: usize,
    pub padding: usize,
}

impl Conv1dGeometry {
    pub fn output_len(&self, len: usize) -> Result<usize> {
        if self.kernel_size == 0 || self.stride == 0 {
            return Err(Error::InvalidParameter(
                "conv1d kernel_size and stride must be positive".into(),
            ));
        }
        let padded = len + 2 * self.padding;
        if padded < self.kernel_size {
            return Err(Error::Shape {
                expected: format!("padded length >= kernel {}", self.kernel_size),
                actual: format!("padded length {padded}"),
            });
        }
        Ok((padded - self.kernel_size) / self.stride + 1)
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        vec![self.out_channels, self.in_channels, self.kernel_size]
    }
}

fn channels_len<T: Scalar>(x: &Tensor<T>) -> Result<(usize, usize)> {
    match *x.shape() {
        [c, l] => Ok((c, l)),
        _ => Err(shape_err("[channels, length]", x.shape())),
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "leaky_relu alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

/// `x` where positive, `alpha * x` otherwise.
pub fn leaky_relu<T: Scalar>(x: &Tensor<T>, alpha: T) -> Result<Tensor<T>> {
    check_alpha(alpha.as_f64())?;
    x.check_finite()?;
    Ok(x.map(|v| if v > T::zero() { v } else { alpha * v }))
}

pub fn leaky_relu_backward<T: Scalar>(x: &Tensor<T>, alpha: T, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    if x.shape() != grad_out.shape() {
        return Err(shape_err(x.shape(), grad_out.shape()));
    }
    let data = x
        .data()
        .iter()
        .zip(grad_out.data())
        .map(|(&v, &g)| if v > T::zero() { g } else { alpha * g })
        .collect();
    Tensor::new(x.shape().to_vec(), data)
}

/// Cross-correlation `y[o,t] = b[o] + sum_{c,k} w[o,c,k] * x[c, t*stride + k - pad]`
/// with zero padding.
pub fn conv1d_forward<T: Scalar>(
    x: &Tensor<T>,
    geom: &Conv1dGeometry,
    weight: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    let (c_in, len) = channels_len(x)?;
    if c_in != geom.in_channels {
        return Err(shape_err(
            [geom.in_channels, len],
            x.shape(),
        ));
    }
    if weight.shape() != geom.weight_shape().as_slice() {
        return Err(shape_err(geom.weight_shape(), weight.shape()));
    }
    if bias.shape() != [geom.out_channels] {
        return Err(shape_err([geom.out_channels], bias.shape()));
    }
    let out_len = geom.output_len(len)?;
    let k = geom.kernel_size;
    let (xd, wd, bd) = (x.data(), weight.data(), bias.data());
    let mut out = vec![T::zero(); geom.out_channels * out_len];
    for o in 0..geom.out_channels {
        let row = &mut out[o * out_len..(o + 1) * out_len];
        row.iter_mut().for_each(|v| *v = bd[o]);
        for c in 0..c_in {
            let xrow = &xd[c * len..(c + 1) * len];
            let wrow = &wd[(o * c_in + c) * k..(o * c_in + c + 1) * k];
            for (t, acc) in row.iter_mut().enumerate() {
                let start = (t * geom.stride) as isize - geom.padding as isize;
                let mut s = T::zero();
                for (j, &w) in wrow.iter().enumerate() {
                    let pos = start + j as isize;
                    if pos >= 0 && (pos as usize) < len {
                        s += w * xrow[pos as usize];
                    }
                }
                *acc += s;
            }
        }
    }
    Tensor::new(vec![geom.out_channels, out_len], out)
}

/// Gradients of a conv1d layer: `(d_input, d_weight, d_bias)`.
pub fn conv1d_backward<T: Scalar>(
    x: &Tensor<T>,
    geom: &Conv1dGeometry,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (c_in, len) = channels_len(x)?;
    let out_len = geom.output_len(len)?;
    if grad_out.shape() != [geom.out_channels, out_len] {
        return Err(shape_err([geom.out_channels, out_len], grad_out.shape()));
    }
    let k = geom.kernel_size;
    let (xd, wd, gd) = (x.data(), weight.data(), grad_out.data());
    let mut gx = vec![T::zero(); c_in * len];
    let mut gw = vec![T::zero(); geom.out_channels * c_in * k];
    let mut gb = vec![T::zero(); geom.out_channels];
    for o in 0..geom.out_channels {
        let grow = &gd[o * out_len..(o + 1) * out_len];
        gb[o] = grow.iter().copied().sum();
        for c in 0..c_in {
            let base = (o * c_in + c) * k;
            for (t, &g) in grow.iter().enumerate() {
                let start = (t * geom.stride) as isize - geom.padding as isize;
                for j in 0..k {
                    let pos = start + j as isize;
                    if pos >= 0 && (pos as usize) < len {
                        let p = c * len + pos as usize;
                        gw[base + j] += g * xd[p];
                        gx[p] += g * wd[base + j];
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(vec![c_in, len], gx)?,
        Tensor::new(geom.weight_shape(), gw)?,
        Tensor::new(vec![geom.out_channels], gb)?,
    ))
}

/// `y = W x + b` for `W` of shape `[out, in]`.
pub fn dense_forward<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let [out_f, in_f] = *weight.shape() else {
        return Err(shape_err("[out, in]", weight.shape()));
    };
    if x.len() != in_f {
        return Err(Error::Shape {
            expected: format!("{in_f} input features"),
            actual: format!("{} input features", x.len()),
        });
    }
    if bias.shape() != [out_f] {
        return Err(shape_err([out_f], bias.shape()));
    }
    let (xd, wd) = (x.data(), weight.data());
    let out = (0..out_f)
        .map(|o| {
            let row = &wd[o * in_f..(o + 1) * in_f];
            bias.data()[o] + row.iter().zip(xd).map(|(&w, &v)| w * v).sum::<T>()
        })
        .collect();
    Ok(Tensor::from_vec(out))
}

/// Gradients of a dense layer: `(d_input, d_weight, d_bias)`.
pub fn dense_backward<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let [out_f, in_f] = *weight.shape() else {
        return Err(shape_err("[out, in]", weight.shape()));
    };
    if grad_out.len() != out_f || x.len() != in_f {
        return Err(shape_err([out_f, in_f], [grad_out.len(), x.len()]));
    }
    let (xd, wd, gd) = (x.data(), weight.data(), grad_out.data());
    let mut gx = vec![T::zero(); in_f];
    let mut gw = vec![T::zero(); out_f * in_f];
    for o in 0..out_f {
        let g = gd[o];
        let wrow = &wd[o * in_f..(o + 1) * in_f];
        let gwrow = &mut gw[o * in_f..(o + 1) * in_f];
        for i in 0..in_f {
            gwrow[i] = g * xd[i];
            gx[i] += g * wrow[i];
        }
    }
    Ok((
        Tensor::new(x.shape().to_vec(), gx)?,
        Tensor::new(vec![out_f, in_f], gw)?,
        Tensor::from_vec(gd.to_vec()),
    ))
}

/// Max over sliding windows. Returns the pooled map and, for every output
/// cell, the flat input index that produced it. Ties go to the lowest index.
pub fn maxpool1d_forward<T: Scalar>(
    x: &Tensor<T>,
    window: usize,
    stride: usize,
) -> Result<(Tensor<T>, Vec<usize>)> {
    let (c, len) = channels_len(x)?;
    if window == 0 || stride == 0 {
        return Err(Error::InvalidParameter(
            "maxpool window and stride must be positive".into(),
        ));
    }
    if window > len {
        return Err(Error::Shape {
            expected: format!("length >= window {window}"),
            actual: format!("length {len}"),
        });
    }
    let out_len = (len - window) / stride + 1;
    let xd = x.data();
    let mut out = Vec::with_capacity(c * out_len);
    let mut argmax = Vec::with_capacity(c * out_len);
    for ch in 0..c {
        for t in 0..out_len {
            let start = ch * len + t * stride;
            let mut best = start;
            for i in start + 1..start + window {
                if xd[i] > xd[best] {
                    best = i;
                }
            }
            out.push(xd[best]);
            argmax.push(best);
        }
    }
    Ok((Tensor::new(vec![c, out_len], out)?, argmax))
}

/// Routes each output gradient to the single input element that won the window.
pub fn maxpool1d_backward<T: Scalar>(
    input_shape: &[usize],
    argmax: &[usize],
    grad_out: &Tensor<T>,
) -> Result<Tensor<T>> {
    if argmax.len() != grad_out.len() {
        return Err(shape_err(argmax.len(), grad_out.len()));
    }
    let mut gx = Tensor::zeros(input_shape.to_vec());
    let gxd = gx.data_mut();
    for (&i, &g) in argmax.iter().zip(grad_out.data()) {
        gxd[i] += g;
    }
    Ok(gx)
}

/// Inverted dropout. In training mode each element is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`; the returned mask holds
/// the per-element multiplier. Inference is the identity and records no mask.
pub fn dropout_apply<T: Scalar, R: Rng + ?Sized>(
    x: &Tensor<T>,
    rate: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor<T>, Option<Vec<T>>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::InvalidParameter(format!(
            "dropout rate must lie in [0, 1), got {rate}"
        )));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok((x.clone(), None));
    }
    let keep = T::of(1.0 / (1.0 - rate));
    let mask: Vec<T> = (0..x.len())
        .map(|_| {
            if rng.random::<f64>() < rate {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    let data = x.data().iter().zip(&mask).map(|(&v, &m)| v * m).collect();
    Ok((Tensor::new(x.shape().to_vec(), data)?, Some(mask)))
}

pub fn dropout_backward<T: Scalar>(mask: Option<&[T]>, grad_out: &Tensor<T>) -> Result<Tensor<T>> {
    match mask {
        None => Ok(grad_out.clone()),
        Some(m) if m.len() == grad_out.len() => Tensor::new(
            grad_out.shape().to_vec(),
            grad_out.data().iter().zip(m).map(|(&g, &k)| g * k).collect(),
        ),
        Some(m) => Err(shape_err(m.len(), grad_out.len())),
    }
}

/// Max-shifted softmax, evaluated in double precision.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(Error::InvalidParameter("softmax of an empty vector".into()));
    }
    if let Some(index) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `-ln(max(pred[label], 1e-12))`.
pub fn cross_entropy(pred: &[f64], label: usize) -> Result<f64> {
    let p = pred
        .get(label)
        .ok_or(Error::InvalidLabel(label as i64))?;
    Ok(-p.max(PROB_FLOOR).ln())
}

/// Gradient of `cross_entropy(softmax(z), label)` with respect to `z`: `p - onehot`.
pub fn softmax_cross_entropy_grad(probs: &[f64], label: usize) -> Result<Vec<f64>> {
    if label >= probs.len() {
        return Err(Error::InvalidLabel(label as i64));
    }
    Ok(probs
        .iter()
        .enumerate()
        .map(|(i, &p)| if i == label { p - 1.0 } else { p })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn leaky_relu_matches_both_branches() {
        let y = leaky_relu(&t(&[3], &[2.0, -10.0, 0.0]), 0.1).unwrap();
        assert_eq!(y.data(), &[2.0, -1.0, 0.0]);
    }

    #[test]
    fn leaky_relu_rejects_nan_with_index() {
        let err = leaky_relu(&t(&[3], &[1.0, f64::NAN, 0.0]), 0.1).unwrap_err();
        assert!(matches!(err, Error::NonFinite { index: 1 }));
        assert!(leaky_relu(&t(&[1], &[1.0]), 1.0).is_err());
    }

    fn geom(cin: usize, cout: usize, k: usize, pad: usize) -> Conv1dGeometry {
        Conv1dGeometry {
            in_channels: cin,
            out_channels: cout,
            kernel_size: k,
            stride: 1,
            padding: pad,
        }
    }

    #[test]
    fn conv1d_identity_and_sliding_sum() {
        let x = t(&[1, 3], &[1.0, 2.0, 3.0]);
        let y = conv1d_forward(&x, &geom(1, 1, 1, 0), &t(&[1, 1, 1], &[1.0]), &t(&[1], &[0.0])).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0]);
        let y = conv1d_forward(&x, &geom(1, 1, 2, 0), &t(&[1, 1, 2], &[1.0, 1.0]), &t(&[1], &[0.0])).unwrap();
        assert_eq!(y.shape(), &[1, 2]);
        assert_eq!(y.data(), &[3.0, 5.0]);
    }

    #[test]
    fn conv1d_output_shape() {
        let x = Tensor::<f64>::zeros(vec![2, 9]);
        let g = geom(2, 3, 3, 0);
        let y = conv1d_forward(&x, &g, &Tensor::zeros(g.weight_shape()), &Tensor::zeros(vec![3])).unwrap();
        assert_eq!(y.shape(), &[3, 7]);
        // same padding keeps the length
        let g = geom(2, 3, 3, 1);
        let y = conv1d_forward(&x, &g, &Tensor::zeros(g.weight_shape()), &Tensor::zeros(vec![3])).unwrap();
        assert_eq!(y.shape(), &[3, 9]);
    }

    #[test]
    fn conv1d_rejects_channel_mismatch() {
        let x = Tensor::<f64>::zeros(vec![3, 9]);
        let g = geom(2, 3, 3, 0);
        let err = conv1d_forward(&x, &g, &Tensor::zeros(g.weight_shape()), &Tensor::zeros(vec![3])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 9]") && msg.contains("[3, 9]"), "{msg}");
    }

    #[test]
    fn dense_examples() {
        let eye = t(&[3, 3], &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let y = dense_forward(&t(&[3], &[1.0, 2.0, 3.0]), &eye, &t(&[3], &[0.0; 3])).unwrap();
        assert_eq!(y.data(), &[1.0, 2.0, 3.0]);
        let w = t(&[2, 2], &[1.0, 1.0, 1.0, -1.0]);
        let y = dense_forward(&t(&[2], &[2.0, 3.0]), &w, &t(&[2], &[0.0, 1.0])).unwrap();
        assert_eq!(y.data(), &[5.0, 0.0]);
        let w = Tensor::<f64>::zeros(vec![2, 134]);
        let y = dense_forward(&Tensor::zeros(vec![134]), &w, &Tensor::zeros(vec![2])).unwrap();
        assert_eq!(y.len(), 2);
    }

    #[test]
    fn dense_length_mismatch_names_both() {
        let w = Tensor::<f64>::zeros(vec![2, 4]);
        let msg = dense_forward(&Tensor::zeros(vec![3]), &w, &Tensor::zeros(vec![2]))
            .unwrap_err()
            .to_string();
        assert!(msg.contains("4 input") && msg.contains("3 input"), "{msg}");
    }

    #[test]
    fn maxpool_examples() {
        let (y, _) = maxpool1d_forward(&t(&[1, 4], &[1.0, 3.0, 2.0, 4.0]), 2, 2).unwrap();
        assert_eq!(y.data(), &[3.0, 4.0]);
        let (y, idx) = maxpool1d_forward(&t(&[1, 2], &[5.0, 5.0]), 2, 2).unwrap();
        assert_eq!(y.data(), &[5.0]);
        assert_eq!(idx, vec![0]);
        let (y, _) = maxpool1d_forward(&t(&[1, 5], &[1.0, 2.0, 3.0, 4.0, 5.0]), 2, 2).unwrap();
        assert_eq!(y.data(), &[2.0, 4.0]);
        assert!(maxpool1d_forward(&t(&[1, 1], &[1.0]), 2, 2).is_err());
    }

    #[test]
    fn maxpool_gradient_goes_to_one_element() {
        let x = t(&[1, 4], &[7.0, 7.0, 1.0, 2.0]);
        let (_, idx) = maxpool1d_forward(&x, 2, 2).unwrap();
        let g = maxpool1d_backward(x.shape(), &idx, &t(&[1, 2], &[1.0, 1.0])).unwrap();
        assert_eq!(g.data(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = t(&[4], &[1.0, -2.0, 3.0, 4.0]);
        let (y, m) = dropout_apply(&x, 0.5, Mode::Infer, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(m.is_none());
        let (y, _) = dropout_apply(&x, 0.0, Mode::Train, &mut rng).unwrap();
        assert_eq!(y, x);
        assert!(dropout_apply(&x, 1.0, Mode::Train, &mut rng).is_err());
    }

    #[test]
    fn dropout_preserves_expectation() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = Tensor::<f32>::from_vec(vec![1.0; 1_000_000]);
        let (y, _) = dropout_apply(&x, 0.5, Mode::Train, &mut rng).unwrap();
        let mean = y.data().iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let p = softmax(&[2f64.ln(), 0.0]).unwrap();
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-12 && (p[1] - 1.0 / 3.0).abs() < 1e-12);
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1] < 1e-300);
        assert!(softmax(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[1.0, 0.0], 0).unwrap(), 0.0);
        assert!((cross_entropy(&[0.5, 0.5], 1).unwrap() - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((cross_entropy(&[0.25, 0.75], 0).unwrap() - 1.386294).abs() < 1e-6);
        assert!((cross_entropy(&[1.0, 0.0], 1).unwrap() - 27.631021).abs() < 1e-5);
        assert!(matches!(cross_entropy(&[0.5, 0.5], 2), Err(Error::InvalidLabel(2))));
    }
}
