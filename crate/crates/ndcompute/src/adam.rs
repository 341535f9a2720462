use crate::error::NdError;
use crate::tensor::Tensor;
use crate::Scalar;

/// Bias-corrected Adam over a fixed list of parameter tensors.
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new(lr: T, shapes: &[Vec<usize>]) -> Self {
        Adam {
            lr,
            beta1: T::from_f64c(0.9),
            beta2: T::from_f64c(0.999),
            eps: T::from_f64c(1e-8),
            step: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s.clone())).collect(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[Tensor<T>]) -> Result<(), NdError> {
        assert_eq!(params.len(), self.m.len());
        for (p, g) in params.iter().zip(grads.iter()) {
            if p.shape() != g.shape() {
                return Err(NdError::ShapeMismatch {
                    op: "adam_step",
                    lhs: p.shape().to_vec(),
                    rhs: g.shape().to_vec(),
                });
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = T::one() - self.beta1.powi(t);
        let bc2 = T::one() - self.beta2.powi(t);
        for k in 0..params.len() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            let g = &grads[k];
            for ((mi, vi), (&gi, pi)) in m
                .data_mut()
                .iter_mut()
                .zip(v.data_mut().iter_mut())
                .zip(g.data().iter().zip(params[k].data_mut().iter_mut()))
            {
                *mi = self.beta1 * *mi + (T::one() - self.beta1) * gi;
                *vi = self.beta2 * *vi + (T::one() - self.beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *pi = *pi - self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}
