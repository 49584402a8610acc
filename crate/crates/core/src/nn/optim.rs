use crate::error::{Error, Result};
use crate::nn::network::{GradientSet, ParameterSet};
use crate::nn::tensor::Scalar;

/// SGD with classical momentum: `v <- momentum * v + g; w <- w - lr * v`.
#[derive(Debug, Clone)]
pub struct Sgd<T = f32> {
    lr: T,
    momentum: T,
    velocity: Option<ParameterSet<T>>,
}

impl<T: Scalar> Sgd<T> {
    /// `lr` may be zero (a frozen run); negative or non-finite values are rejected.
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !(lr.is_finite() && lr >= 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate must be >= 0, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidParameter(format!(
                "momentum must lie in [0, 1), got {momentum}"
            )));
        }
        Ok(Self {
            lr: T::of(lr),
            momentum: T::of(momentum),
            velocity: None,
        })
    }

    pub fn step(&mut self, params: &mut ParameterSet<T>, grads: &GradientSet<T>) -> Result<()> {
        if !grads.is_congruent_with(params) {
            return Err(Error::Shape {
                expected: "gradients congruent with parameters".into(),
                actual: "mismatched layer keys or tensor shapes".into(),
            });
        }
        let velocity = self.velocity.get_or_insert_with(|| {
            let mut v = params.clone();
            for (_, p) in v.iter_mut() {
                p.weight.data_mut().iter_mut().for_each(|x| *x = T::zero());
                p.bias.data_mut().iter_mut().for_each(|x| *x = T::zero());
            }
            v
        });
        if !velocity.is_congruent(params) {
            return Err(Error::Shape {
                expected: "parameters congruent with optimizer state".into(),
                actual: "mismatched layer keys or tensor shapes".into(),
            });
        }
        let (lr, mu) = (self.lr, self.momentum);
        for (((_, p), (_, v)), (_, g)) in params
            .iter_mut()
            .zip(velocity.iter_mut())
            .zip(grads.as_params().iter())
        {
            update(p.weight.data_mut(), v.weight.data_mut(), g.weight.data(), lr, mu);
            update(p.bias.data_mut(), v.bias.data_mut(), g.bias.data(), lr, mu);
        }
        Ok(())
    }
}

fn update<T: Scalar>(w: &mut [T], v: &mut [T], g: &[T], lr: T, mu: T) {
    for ((w, v), &g) in w.iter_mut().zip(v.iter_mut()).zip(g) {
        *v = mu * *v + g;
        *w = *w - lr * *v;
    }
}
