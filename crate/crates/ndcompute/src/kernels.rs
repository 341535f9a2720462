//! Raw compute kernels shared by the tape ops and the no-grad inference path.

use crate::tensor::Tensor;
use crate::Scalar;

/// C[m,n] = A[m,k] * B[k,n]
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    debug_assert_eq!(k, b.shape()[0]);
    let mut out = vec![T::zero(); m * n];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let arow = &ad[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                *o = *o + av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out).unwrap()
}

/// C[m,k] = A[m,n] * B[k,n]^T
pub fn matmul_nt<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (m, n) = (a.shape()[0], a.shape()[1]);
    let k = b.shape()[0];
    debug_assert_eq!(n, b.shape()[1]);
    let mut out = vec![T::zero(); m * k];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let arow = &ad[i * n..(i + 1) * n];
        for j in 0..k {
            let brow = &bd[j * n..(j + 1) * n];
            let mut s = T::zero();
            for (&av, &bv) in arow.iter().zip(brow.iter()) {
                s = s + av * bv;
            }
            out[i * k + j] = s;
        }
    }
    Tensor::new(vec![m, k], out).unwrap()
}

/// C[k,n] = A[m,k]^T * B[m,n]
pub fn matmul_tn<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Tensor<T> {
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    debug_assert_eq!(m, b.shape()[0]);
    let mut out = vec![T::zero(); k * n];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let arow = &ad[i * k..(i + 1) * k];
        let brow = &bd[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == T::zero() {
                continue;
            }
            let orow = &mut out[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow.iter()) {
                *o = *o + av * bv;
            }
        }
    }
    Tensor::new(vec![k, n], out).unwrap()
}

pub fn conv2d_out_dim(h: usize, k: usize, stride: usize, pad: usize) -> usize {
    (h + 2 * pad - k) / stride + 1
}

/// y[n,co,oh,ow] for x[n,ci,h,w], w[co,ci,kh,kw].
pub fn conv2d<T: Scalar>(x: &Tensor<T>, w: &Tensor<T>, stride: usize, pad: usize) -> Tensor<T> {
    let (n, ci, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (co, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
    debug_assert_eq!(ci, w.shape()[1]);
    let oh = conv2d_out_dim(h, kh, stride, pad);
    let ow = conv2d_out_dim(wd, kw, stride, pad);
    let mut out = vec![T::zero(); n * co * oh * ow];
    let (xd, wdt) = (x.data(), w.data());
    for b in 0..n {
        for oc in 0..co {
            let obase = (b * co + oc) * oh * ow;
            for ic in 0..ci {
                let xbase = (b * ci + ic) * h * wd;
                let wbase = (oc * ci + ic) * kh * kw;
                for dk in 0..kh {
                    for dl in 0..kw {
                        let wv = wdt[wbase + dk * kw + dl];
                        if wv == T::zero() {
                            continue;
                        }
                        for oy in 0..oh {
                            let iy = (oy * stride + dk) as isize - pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let xrow = xbase + iy as usize * wd;
                            let orow = obase + oy * ow;
                            for ox in 0..ow {
                                let ix = (ox * stride + dl) as isize - pad as isize;
                                if ix < 0 || ix >= wd as isize {
                                    continue;
                                }
                                out[orow + ox] = out[orow + ox] + wv * xd[xrow + ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![n, co, oh, ow], out).unwrap()
}

/// Gradients w.r.t. conv2d input and weight given upstream dy.
pub fn conv2d_backward<T: Scalar>(
    x: &Tensor<T>,
    w: &Tensor<T>,
    dy: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> (Tensor<T>, Tensor<T>) {
    let (n, ci, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2], x.shape()[3]);
    let (co, kh, kw) = (w.shape()[0], w.shape()[2], w.shape()[3]);
    let (oh, ow) = (dy.shape()[2], dy.shape()[3]);
    let mut dx = vec![T::zero(); x.len()];
    let mut dw = vec![T::zero(); w.len()];
    let (xd, wdt, dyd) = (x.data(), w.data(), dy.data());
    for b in 0..n {
        for oc in 0..co {
            let obase = (b * co + oc) * oh * ow;
            for ic in 0..ci {
                let xbase = (b * ci + ic) * h * wd;
                let wbase = (oc * ci + ic) * kh * kw;
                for dk in 0..kh {
                    for dl in 0..kw {
                        let wv = wdt[wbase + dk * kw + dl];
                        let mut wg = T::zero();
                        for oy in 0..oh {
                            let iy = (oy * stride + dk) as isize - pad as isize;
                            if iy < 0 || iy >= h as isize {
                                continue;
                            }
                            let xrow = xbase + iy as usize * wd;
                            let orow = obase + oy * ow;
                            for ox in 0..ow {
                                let ix = (ox * stride + dl) as isize - pad as isize;
                                if ix < 0 || ix >= wd as isize {
                                    continue;
                                }
                                let g = dyd[orow + ox];
                                wg = wg + g * xd[xrow + ix as usize];
                                dx[xrow + ix as usize] = dx[xrow + ix as usize] + g * wv;
                            }
                        }
                        dw[wbase + dk * kw + dl] = dw[wbase + dk * kw + dl] + wg;
                    }
                }
            }
        }
    }
    (
        Tensor::new(x.shape().to_vec(), dx).unwrap(),
        Tensor::new(w.shape().to_vec(), dw).unwrap(),
    )
}
