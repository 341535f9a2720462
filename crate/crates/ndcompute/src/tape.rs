//! Reverse-mode autodiff on an append-only operation tape.
//!
//! Forward calls record nodes in topological order; `backward` walks the
//! tape once in reverse. Re-running `backward` on the same tape is pure and
//! yields identical gradients.

use crate::error::NdError;
use crate::kernels;
use crate::tensor::Tensor;
use crate::Scalar;

const STD_EPS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub usize);

#[derive(Debug, Clone)]
enum Op<T> {
    Leaf,
    StopGrad(#[allow(dead_code)] usize),
    MatMul(usize, usize),
    Conv2d {
        x: usize,
        w: usize,
        stride: usize,
        pad: usize,
    },
    Add(usize, usize),
    AddRow {
        x: usize,
        b: usize,
    },
    AddChan {
        x: usize,
        b: usize,
    },
    Mul(usize, usize),
    Affine {
        x: usize,
        mul: T,
        #[allow(dead_code)]
        add: T,
    },
    Relu(usize),
    Tanh(usize),
    Mean(usize),
    L1Loss(usize, usize),
    MseLoss(usize, usize),
    Concat(Vec<usize>),
    Reshape(usize),
    GatherRows {
        x: usize,
        idx: Vec<usize>,
    },
    ColStd(usize),
    CovPenalty(usize),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

pub struct Tape<T> {
    nodes: Vec<Node<T>>,
    param_ids: Vec<usize>,
}

pub struct Grads<T> {
    by_node: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Grads<T> {
    pub fn get(&self, v: Var) -> Option<&Tensor<T>> {
        self.by_node[v.0].as_ref()
    }
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            param_ids: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// Constant input; gradients are computed but not registered anywhere.
    pub fn input(&mut self, t: Tensor<T>) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Trainable parameter; registration order defines `param_grads` order.
    pub fn param(&mut self, t: Tensor<T>) -> Var {
        let v = self.push(t, Op::Leaf);
        self.param_ids.push(v.0);
        v
    }

    pub fn param_vars(&self) -> Vec<Var> {
        self.param_ids.iter().map(|&i| Var(i)).collect()
    }

    /// Gradients for registered params, zeros where the loss does not reach.
    pub fn param_grads(&self, grads: &Grads<T>) -> Vec<Tensor<T>> {
        self.param_ids
            .iter()
            .map(|&i| match &grads.by_node[i] {
                Some(g) => g.clone(),
                None => Tensor::zeros(self.nodes[i].value.shape().to_vec()),
            })
            .collect()
    }

    pub fn stop_grad(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.clone();
        self.push(v, Op::StopGrad(a.0))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NdError> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(NdError::ShapeMismatch {
                op: "matmul",
                lhs: sa,
                rhs: sb,
            });
        }
        let y = kernels::matmul(self.value(a), self.value(b));
        Ok(self.push(y, Op::MatMul(a.0, b.0)))
    }

    pub fn conv2d(&mut self, x: Var, w: Var, stride: usize, pad: usize) -> Result<Var, NdError> {
        let (sx, sw) = (self.shape(x), self.shape(w));
        if sx.len() != 4 || sw.len() != 4 || sx[1] != sw[1] {
            return Err(NdError::ShapeMismatch {
                op: "conv2d",
                lhs: sx,
                rhs: sw,
            });
        }
        if sx[2] + 2 * pad < sw[2] || sx[3] + 2 * pad < sw[3] {
            return Err(NdError::ShapeMismatch {
                op: "conv2d",
                lhs: sx,
                rhs: sw,
            });
        }
        let y = kernels::conv2d(self.value(x), self.value(w), stride, pad);
        Ok(self.push(
            y,
            Op::Conv2d {
                x: x.0,
                w: w.0,
                stride,
                pad,
            },
        ))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NdError> {
        self.check_same("add", a, b)?;
        let y = self.value(a).zip(self.value(b), |x, y| x + y);
        Ok(self.push(y, Op::Add(a.0, b.0)))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NdError> {
        let nb = self.affine(b, T::from_f64c(-1.0), T::zero());
        self.add(a, nb)
    }

    /// `[n,d] + [d]` row-broadcast bias.
    pub fn add_row(&mut self, x: Var, b: Var) -> Result<Var, NdError> {
        let (sx, sb) = (self.shape(x), self.shape(b));
        if sx.len() != 2 || sb.len() != 1 || sx[1] != sb[0] {
            return Err(NdError::ShapeMismatch {
                op: "add_row",
                lhs: sx,
                rhs: sb,
            });
        }
        let d = sx[1];
        let bd = self.value(b).data().to_vec();
        let mut y = self.value(x).clone();
        for (i, v) in y.data_mut().iter_mut().enumerate() {
            *v = *v + bd[i % d];
        }
        Ok(self.push(y, Op::AddRow { x: x.0, b: b.0 }))
    }

    /// `[n,c,h,w] + [c]` channel-broadcast bias.
    pub fn add_chan(&mut self, x: Var, b: Var) -> Result<Var, NdError> {
        let (sx, sb) = (self.shape(x), self.shape(b));
        if sx.len() != 4 || sb.len() != 1 || sx[1] != sb[0] {
            return Err(NdError::ShapeMismatch {
                op: "add_chan",
                lhs: sx,
                rhs: sb,
            });
        }
        let (c, hw) = (sx[1], sx[2] * sx[3]);
        let bd = self.value(b).data().to_vec();
        let mut y = self.value(x).clone();
        for (i, v) in y.data_mut().iter_mut().enumerate() {
            *v = *v + bd[(i / hw) % c];
        }
        Ok(self.push(y, Op::AddChan { x: x.0, b: b.0 }))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NdError> {
        self.check_same("mul", a, b)?;
        let y = self.value(a).zip(self.value(b), |x, y| x * y);
        Ok(self.push(y, Op::Mul(a.0, b.0)))
    }

    /// Elementwise `mul * x + add`.
    pub fn affine(&mut self, x: Var, mul: T, add: T) -> Var {
        let y = self.value(x).map(|v| mul * v + add);
        self.push(y, Op::Affine { x: x.0, mul, add })
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|v| if v > T::zero() { v } else { T::zero() });
        self.push(y, Op::Relu(x.0))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let y = self.value(x).map(|v| v.tanh());
        self.push(y, Op::Tanh(x.0))
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let n = T::from_f64c(t.len() as f64);
        let s: T = t.data().iter().copied().sum();
        self.push(Tensor::scalar(s / n), Op::Mean(x.0))
    }

    /// Mean absolute difference over all elements.
    pub fn l1_loss(&mut self, a: Var, b: Var) -> Result<Var, NdError> {
        self.check_same("l1_loss", a, b)?;
        let n = T::from_f64c(self.value(a).len() as f64);
        let s: T = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data().iter())
            .map(|(&x, &y)| (x - y).abs())
            .sum();
        Ok(self.push(Tensor::scalar(s / n), Op::L1Loss(a.0, b.0)))
    }

    /// Mean squared difference over all elements.
    pub fn mse_loss(&mut self, a: Var, b: Var) -> Result<Var, NdError> {
        self.check_same("mse_loss", a, b)?;
        let n = T::from_f64c(self.value(a).len() as f64);
        let s: T = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data().iter())
            .map(|(&x, &y)| (x - y) * (x - y))
            .sum();
        Ok(self.push(Tensor::scalar(s / n), Op::MseLoss(a.0, b.0)))
    }

    /// Concatenate rank-2 tensors along the feature axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var, NdError> {
        let n = self.shape(parts[0])[0];
        for &p in parts {
            let s = self.shape(p);
            if s.len() != 2 || s[0] != n {
                return Err(NdError::ShapeMismatch {
                    op: "concat",
                    lhs: self.shape(parts[0]),
                    rhs: s,
                });
            }
        }
        let dims: Vec<usize> = parts.iter().map(|&p| self.shape(p)[1]).collect();
        let d: usize = dims.iter().sum();
        let mut data = vec![T::zero(); n * d];
        let mut off = 0;
        for (&p, &dp) in parts.iter().zip(dims.iter()) {
            let src = self.value(p).data();
            for r in 0..n {
                data[r * d + off..r * d + off + dp].copy_from_slice(&src[r * dp..(r + 1) * dp]);
            }
            off += dp;
        }
        let y = Tensor::new(vec![n, d], data).unwrap();
        Ok(self.push(y, Op::Concat(parts.iter().map(|v| v.0).collect())))
    }

    pub fn reshape(&mut self, x: Var, shape: Vec<usize>) -> Result<Var, NdError> {
        let y = self.value(x).reshaped(shape)?;
        Ok(self.push(y, Op::Reshape(x.0)))
    }

    /// Select rows of a rank-2 tensor; backward scatter-adds.
    pub fn gather_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var, NdError> {
        let s = self.shape(x);
        if s.len() != 2 || idx.iter().any(|&i| i >= s[0]) {
            return Err(NdError::BadShape {
                op: "gather_rows",
                shape: s,
                reason: "index out of range or not rank-2".into(),
            });
        }
        let d = s[1];
        let src = self.value(x).data();
        let mut data = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            data.extend_from_slice(&src[i * d..(i + 1) * d]);
        }
        let y = Tensor::new(vec![idx.len(), d], data).unwrap();
        Ok(self.push(
            y,
            Op::GatherRows {
                x: x.0,
                idx: idx.to_vec(),
            },
        ))
    }

    /// Per-dimension sample std over the batch axis of `[n,d]`, with an
    /// epsilon inside the sqrt.
    pub fn col_std(&mut self, x: Var) -> Result<Var, NdError> {
        let s = self.shape(x);
        if s.len() != 2 || s[0] < 2 {
            return Err(NdError::BadShape {
                op: "col_std",
                shape: s,
                reason: "needs rank-2 with batch >= 2".into(),
            });
        }
        let (n, d) = (s[0], s[1]);
        let xd = self.value(x).data();
        let mut out = vec![T::zero(); d];
        let denom = T::from_f64c((n - 1) as f64);
        for j in 0..d {
            let mu: T = (0..n).map(|i| xd[i * d + j]).sum::<T>() / T::from_f64c(n as f64);
            let var: T = (0..n)
                .map(|i| {
                    let c = xd[i * d + j] - mu;
                    c * c
                })
                .sum::<T>()
                / denom;
            out[j] = (var + T::from_f64c(STD_EPS)).sqrt();
        }
        let y = Tensor::from_vec(out);
        Ok(self.push(y, Op::ColStd(x.0)))
    }

    /// Mean squared off-diagonal covariance of `[n,d]`, normalized by `d`.
    pub fn cov_penalty(&mut self, x: Var) -> Result<Var, NdError> {
        let s = self.shape(x);
        if s.len() != 2 || s[0] < 2 {
            return Err(NdError::BadShape {
                op: "cov_penalty",
                shape: s,
                reason: "needs rank-2 with batch >= 2".into(),
            });
        }
        let c = self.centered_cov(x);
        let d = s[1];
        let mut l = T::zero();
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    let v = c.data()[i * d + j];
                    l = l + v * v;
                }
            }
        }
        l = l / T::from_f64c(d as f64);
        Ok(self.push(Tensor::scalar(l), Op::CovPenalty(x.0)))
    }

    fn centered_cov(&self, x: Var) -> Tensor<T> {
        let s = self.shape(x);
        let n = s[0];
        let xc = center_cols(self.value(x));
        let mut c = kernels::matmul_tn(&xc, &xc);
        let denom = T::from_f64c((n - 1) as f64);
        for v in c.data_mut() {
            *v = *v / denom;
        }
        c
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes[v.0].value.shape().to_vec()
    }

    fn check_same(&self, op: &'static str, a: Var, b: Var) -> Result<(), NdError> {
        if self.shape(a) != self.shape(b) {
            return Err(NdError::ShapeMismatch {
                op,
                lhs: self.shape(a),
                rhs: self.shape(b),
            });
        }
        Ok(())
    }

    /// Reverse pass from a scalar loss node.
    pub fn backward(&self, loss: Var) -> Result<Grads<T>, NdError> {
        if self.value(loss).len() != 1 {
            return Err(NdError::NotScalar {
                elems: self.value(loss).len(),
            });
        }
        let mut by_node: Vec<Option<Tensor<T>>> = vec![None; self.nodes.len()];
        by_node[loss.0] = Some(Tensor::scalar(T::one()));
        for i in (0..=loss.0).rev() {
            let g = match by_node[i].take() {
                Some(g) => g,
                None => continue,
            };
            self.backprop_node(i, &g, &mut by_node);
            by_node[i] = Some(g);
        }
        Ok(Grads { by_node })
    }

    fn accumulate(by_node: &mut [Option<Tensor<T>>], id: usize, g: Tensor<T>) {
        match &mut by_node[id] {
            Some(acc) => acc.add_assign(&g),
            slot => *slot = Some(g),
        }
    }

    fn backprop_node(&self, i: usize, g: &Tensor<T>, by_node: &mut [Option<Tensor<T>>]) {
        match &self.nodes[i].op {
            Op::Leaf | Op::StopGrad(_) => {}
            Op::MatMul(a, b) => {
                let da = kernels::matmul_nt(g, &self.nodes[*b].value);
                let db = kernels::matmul_tn(&self.nodes[*a].value, g);
                Self::accumulate(by_node, *a, da);
                Self::accumulate(by_node, *b, db);
            }
            Op::Conv2d { x, w, stride, pad } => {
                let (dx, dw) =
                    kernels::conv2d_backward(&self.nodes[*x].value, &self.nodes[*w].value, g, *stride, *pad);
                Self::accumulate(by_node, *x, dx);
                Self::accumulate(by_node, *w, dw);
            }
            Op::Add(a, b) => {
                Self::accumulate(by_node, *a, g.clone());
                Self::accumulate(by_node, *b, g.clone());
            }
            Op::AddRow { x, b } => {
                let d = self.nodes[*b].value.len();
                let mut db = vec![T::zero(); d];
                for (k, &v) in g.data().iter().enumerate() {
                    db[k % d] = db[k % d] + v;
                }
                Self::accumulate(by_node, *x, g.clone());
                Self::accumulate(by_node, *b, Tensor::from_vec(db));
            }
            Op::AddChan { x, b } => {
                let s = self.nodes[*x].value.shape().to_vec();
                let (c, hw) = (s[1], s[2] * s[3]);
                let mut db = vec![T::zero(); c];
                for (k, &v) in g.data().iter().enumerate() {
                    let ch = (k / hw) % c;
                    db[ch] = db[ch] + v;
                }
                Self::accumulate(by_node, *x, g.clone());
                Self::accumulate(by_node, *b, Tensor::from_vec(db));
            }
            Op::Mul(a, b) => {
                let da = g.zip(&self.nodes[*b].value, |gv, bv| gv * bv);
                let db = g.zip(&self.nodes[*a].value, |gv, av| gv * av);
                Self::accumulate(by_node, *a, da);
                Self::accumulate(by_node, *b, db);
            }
            Op::Affine { x, mul, .. } => {
                let m = *mul;
                Self::accumulate(by_node, *x, g.map(|v| v * m));
            }
            Op::Relu(x) => {
                let dx = g.zip(&self.nodes[*x].value, |gv, xv| {
                    if xv > T::zero() {
                        gv
                    } else {
                        T::zero()
                    }
                });
                Self::accumulate(by_node, *x, dx);
            }
            Op::Tanh(x) => {
                let dx = g.zip(&self.nodes[i].value, |gv, yv| gv * (T::one() - yv * yv));
                Self::accumulate(by_node, *x, dx);
            }
            Op::Mean(x) => {
                let n = self.nodes[*x].value.len();
                let gv = g.item() / T::from_f64c(n as f64);
                Self::accumulate(
                    by_node,
                    *x,
                    Tensor::full(self.nodes[*x].value.shape().to_vec(), gv),
                );
            }
            Op::L1Loss(a, b) => {
                let n = T::from_f64c(self.nodes[*a].value.len() as f64);
                let gv = g.item() / n;
                let da = self.nodes[*a].value.zip(&self.nodes[*b].value, |x, y| {
                    if x > y {
                        gv
                    } else if x < y {
                        -gv
                    } else {
                        T::zero()
                    }
                });
                let db = da.map(|v| -v);
                Self::accumulate(by_node, *a, da);
                Self::accumulate(by_node, *b, db);
            }
            Op::MseLoss(a, b) => {
                let n = T::from_f64c(self.nodes[*a].value.len() as f64);
                let two = T::from_f64c(2.0);
                let gv = g.item();
                let da = self.nodes[*a].value.zip(&self.nodes[*b].value, |x, y| {
                    two * (x - y) / n * gv
                });
                let db = da.map(|v| -v);
                Self::accumulate(by_node, *a, da);
                Self::accumulate(by_node, *b, db);
            }
            Op::Concat(parts) => {
                let n = g.shape()[0];
                let d = g.shape()[1];
                let mut off = 0;
                for &p in parts {
                    let dp = self.nodes[p].value.shape()[1];
                    let mut data = Vec::with_capacity(n * dp);
                    for r in 0..n {
                        data.extend_from_slice(&g.data()[r * d + off..r * d + off + dp]);
                    }
                    Self::accumulate(by_node, p, Tensor::new(vec![n, dp], data).unwrap());
                    off += dp;
                }
            }
            Op::Reshape(x) => {
                let dx = g
                    .reshaped(self.nodes[*x].value.shape().to_vec())
                    .expect("reshape backward");
                Self::accumulate(by_node, *x, dx);
            }
            Op::GatherRows { x, idx } => {
                let d = self.nodes[*x].value.shape()[1];
                let mut dx = Tensor::zeros(self.nodes[*x].value.shape().to_vec());
                for (r, &src) in idx.iter().enumerate() {
                    let gd = &g.data()[r * d..(r + 1) * d];
                    let xd = &mut dx.data_mut()[src * d..(src + 1) * d];
                    for (a, &b) in xd.iter_mut().zip(gd.iter()) {
                        *a = *a + b;
                    }
                }
                Self::accumulate(by_node, *x, dx);
            }
            Op::ColStd(x) => {
                let s = self.nodes[*x].value.shape().to_vec();
                let (n, d) = (s[0], s[1]);
                let xd = self.nodes[*x].value.data();
                let std = self.nodes[i].value.data();
                let denom = T::from_f64c((n - 1) as f64);
                let nn = T::from_f64c(n as f64);
                let mut dx = vec![T::zero(); n * d];
                for j in 0..d {
                    let mu: T = (0..n).map(|r| xd[r * d + j]).sum::<T>() / nn;
                    let gj = g.data()[j];
                    for r in 0..n {
                        dx[r * d + j] = gj * (xd[r * d + j] - mu) / (denom * std[j]);
                    }
                }
                Self::accumulate(by_node, *x, Tensor::new(s, dx).unwrap());
            }
            Op::CovPenalty(x) => {
                let s = self.nodes[*x].value.shape().to_vec();
                let (n, d) = (s[0], s[1]);
                let xc = center_cols(&self.nodes[*x].value);
                let mut c = kernels::matmul_tn(&xc, &xc);
                let denom = T::from_f64c((n - 1) as f64);
                for v in c.data_mut() {
                    *v = *v / denom;
                }
                // dL/dXc = Xc * (4 / (d*(n-1))) * (C with zeroed diagonal)
                for i2 in 0..d {
                    c.data_mut()[i2 * d + i2] = T::zero();
                }
                let scale = T::from_f64c(4.0) * g.item() / (T::from_f64c(d as f64) * denom);
                let mut dxc = kernels::matmul(&xc, &c);
                for v in dxc.data_mut() {
                    *v = *v * scale;
                }
                // chain through centering: subtract per-column mean
                let dx = center_cols(&dxc);
                Self::accumulate(by_node, *x, dx);
            }
        }
    }
}

fn center_cols<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let (n, d) = (x.shape()[0], x.shape()[1]);
    let nn = T::from_f64c(n as f64);
    let mut mu = vec![T::zero(); d];
    for r in 0..n {
        for j in 0..d {
            mu[j] = mu[j] + x.data()[r * d + j];
        }
    }
    for m in mu.iter_mut() {
        *m = *m / nn;
    }
    let mut out = x.clone();
    for r in 0..n {
        for j in 0..d {
            let v = &mut out.data_mut()[r * d + j];
            *v = *v - mu[j];
        }
    }
    out
}
