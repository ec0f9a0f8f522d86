//! Forward and backward kernels for the individual LeNet layers.
//!
//! Each backward function takes whatever its forward pass needs to have
//! cached (the input, the kernel, or the activation output) together with the
//! upstream gradient, and returns exact gradients of the forward formula.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Valid (unpadded, stride 1) 2-D cross-correlation.
///
/// `x` is `[N, Cin, H, W]`, `kernel` is `[Cout, Cin, KH, KW]`, `bias` is
/// `[Cout]`; the result is `[N, Cout, H-KH+1, W-KW+1]`.
pub fn conv2d_forward(x: &Tensor, kernel: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let g = ConvGeometry::new(x, kernel)?;
    if bias.shape() != [g.cout] {
        return Err(Error::shape(format!(
            "conv bias {:?} does not match {} output channels",
            bias.shape(),
            g.cout
        )));
    }
    let xd = x.data();
    let kd = kernel.data();
    let mut out = vec![0.0; g.n * g.cout * g.oh * g.ow];
    for n in 0..g.n {
        for o in 0..g.cout {
            let plane = &mut out[g.out_plane(n, o)];
            plane.fill(bias.data()[o]);
            for c in 0..g.cin {
                let x_base = g.in_offset(n, c);
                for u in 0..g.kh {
                    for v in 0..g.kw {
                        let k = kd[g.kernel_index(o, c, u, v)];
                        for i in 0..g.oh {
                            let src = x_base + (i + u) * g.w + v;
                            let xs = &xd[src..src + g.ow];
                            let row = &mut plane[i * g.ow..(i + 1) * g.ow];
                            for (acc, &xv) in row.iter_mut().zip(xs) {
                                *acc += xv * k;
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[g.n, g.cout, g.oh, g.ow], out)
}

/// Gradients of [`conv2d_forward`] with respect to input, kernel and bias.
pub fn conv2d_backward(
    x: &Tensor,
    kernel: &Tensor,
    dout: &Tensor,
) -> Result<(Tensor, Tensor, Tensor)> {
    let g = ConvGeometry::new(x, kernel)?;
    if dout.shape() != [g.n, g.cout, g.oh, g.ow] {
        return Err(Error::shape(format!(
            "conv upstream gradient {:?}, expected {:?}",
            dout.shape(),
            [g.n, g.cout, g.oh, g.ow]
        )));
    }
    let xd = x.data();
    let kd = kernel.data();
    let dd = dout.data();
    let mut dx = vec![0.0; xd.len()];
    let mut dk = vec![0.0; kd.len()];
    let mut db = vec![0.0; g.cout];
    for n in 0..g.n {
        for o in 0..g.cout {
            let dplane = &dd[g.out_plane(n, o)];
            db[o] += dplane.iter().sum::<f64>();
            for c in 0..g.cin {
                let x_base = g.in_offset(n, c);
                for u in 0..g.kh {
                    for v in 0..g.kw {
                        let ki = g.kernel_index(o, c, u, v);
                        let k = kd[ki];
                        let mut acc = 0.0;
                        for i in 0..g.oh {
                            let src = x_base + (i + u) * g.w + v;
                            let drow = &dplane[i * g.ow..(i + 1) * g.ow];
                            let xs = &xd[src..src + g.ow];
                            let dxs = &mut dx[src..src + g.ow];
                            for ((&d, &xv), dxv) in drow.iter().zip(xs).zip(dxs) {
                                acc += d * xv;
                                *dxv += d * k;
                            }
                        }
                        dk[ki] += acc;
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(x.shape(), dx)?,
        Tensor::new(kernel.shape(), dk)?,
        Tensor::new(&[g.cout], db)?,
    ))
}

struct ConvGeometry {
    n: usize,
    cin: usize,
    h: usize,
    w: usize,
    cout: usize,
    kh: usize,
    kw: usize,
    oh: usize,
    ow: usize,
}

impl ConvGeometry {
    fn new(x: &Tensor, kernel: &Tensor) -> Result<Self> {
        let (n, cin, h, w) = x.dims4()?;
        let (cout, kcin, kh, kw) = kernel.dims4()?;
        if kcin != cin {
            return Err(Error::shape(format!(
                "conv kernel {:?} expects {kcin} input channels, input {:?} has {cin}",
                kernel.shape(),
                x.shape()
            )));
        }
        if kh > h || kw > w {
            return Err(Error::shape(format!(
                "conv kernel {kh}x{kw} larger than input {h}x{w}"
            )));
        }
        Ok(ConvGeometry {
            n,
            cin,
            h,
            w,
            cout,
            kh,
            kw,
            oh: h - kh + 1,
            ow: w - kw + 1,
        })
    }

    #[inline]
    fn in_offset(&self, n: usize, c: usize) -> usize {
        (n * self.cin + c) * self.h * self.w
    }

    #[inline]
    fn out_plane(&self, n: usize, o: usize) -> std::ops::Range<usize> {
        let size = self.oh * self.ow;
        let start = (n * self.cout + o) * size;
        start..start + size
    }

    #[inline]
    fn kernel_index(&self, o: usize, c: usize, u: usize, v: usize) -> usize {
        ((o * self.cin + c) * self.kh + u) * self.kw + v
    }
}

fn pool_dims(shape: &[usize]) -> Result<(usize, usize, usize, usize)> {
    let &[n, c, h, w] = shape else {
        return Err(Error::shape(format!(
            "average pooling expects a rank-4 tensor, got {shape:?}"
        )));
    };
    if h % 2 != 0 || w % 2 != 0 {
        return Err(Error::shape(format!(
            "average pooling needs even height and width, got {h}x{w}"
        )));
    }
    Ok((n, c, h, w))
}

/// 2x2 average pooling with stride 2.
pub fn avgpool2d_forward(x: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = pool_dims(x.shape())?;
    let (oh, ow) = (h / 2, w / 2);
    let xd = x.data();
    let mut out = vec![0.0; n * c * oh * ow];
    for plane in 0..n * c {
        let src = &xd[plane * h * w..(plane + 1) * h * w];
        let dst = &mut out[plane * oh * ow..(plane + 1) * oh * ow];
        for i in 0..oh {
            for j in 0..ow {
                let top = 2 * i * w + 2 * j;
                let bottom = top + w;
                dst[i * ow + j] = (src[top] + src[top + 1] + src[bottom] + src[bottom + 1]) / 4.0;
            }
        }
    }
    Tensor::new(&[n, c, oh, ow], out)
}

/// Spreads each upstream element as `dout / 4` over its source window.
pub fn avgpool2d_backward(input_shape: &[usize], dout: &Tensor) -> Result<Tensor> {
    let (n, c, h, w) = pool_dims(input_shape)?;
    let (oh, ow) = (h / 2, w / 2);
    if dout.shape() != [n, c, oh, ow] {
        return Err(Error::shape(format!(
            "pool upstream gradient {:?}, expected {:?}",
            dout.shape(),
            [n, c, oh, ow]
        )));
    }
    let dd = dout.data();
    let mut dx = vec![0.0; n * c * h * w];
    for plane in 0..n * c {
        let src = &dd[plane * oh * ow..(plane + 1) * oh * ow];
        let dst = &mut dx[plane * h * w..(plane + 1) * h * w];
        for i in 0..oh {
            for j in 0..ow {
                let g = src[i * ow + j] / 4.0;
                let top = 2 * i * w + 2 * j;
                dst[top] = g;
                dst[top + 1] = g;
                dst[top + w] = g;
                dst[top + w + 1] = g;
            }
        }
    }
    Tensor::new(input_shape, dx)
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn sigmoid_forward(x: &Tensor) -> Tensor {
    x.map(sigmoid)
}

/// `dx = dy * y * (1 - y)` where `y` is the cached forward output.
pub fn sigmoid_backward(y: &Tensor, dy: &Tensor) -> Result<Tensor> {
    if y.shape() != dy.shape() {
        return Err(Error::shape(format!(
            "sigmoid upstream gradient {:?}, expected {:?}",
            dy.shape(),
            y.shape()
        )));
    }
    let data = y
        .data()
        .iter()
        .zip(dy.data())
        .map(|(&y, &d)| d * y * (1.0 - y))
        .collect();
    Tensor::new(y.shape(), data)
}

/// Fully connected layer: `x · w + b` with the bias added to every row.
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (_, out_dim) = w.dims2()?;
    if b.shape() != [out_dim] {
        return Err(Error::shape(format!(
            "dense bias {:?} does not match weight {:?}",
            b.shape(),
            w.shape()
        )));
    }
    let mut out = x.matmul(w)?;
    for row in out.data_mut().chunks_exact_mut(out_dim) {
        for (o, &bias) in row.iter_mut().zip(b.data()) {
            *o += bias;
        }
    }
    Ok(out)
}

/// Returns `(dx, dw, db)` for [`dense_forward`].
pub fn dense_backward(x: &Tensor, w: &Tensor, dout: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    let (batch, in_dim) = x.dims2()?;
    let (w_in, out_dim) = w.dims2()?;
    if w_in != in_dim || dout.shape() != [batch, out_dim] {
        return Err(Error::shape(format!(
            "dense backward: input {:?}, weight {:?}, upstream {:?}",
            x.shape(),
            w.shape(),
            dout.shape()
        )));
    }
    let dw = x.transpose()?.matmul(dout)?;
    let dx = dout.matmul(&w.transpose()?)?;
    let mut db = vec![0.0; out_dim];
    for row in dout.data().chunks_exact(out_dim) {
        for (acc, &d) in db.iter_mut().zip(row) {
            *acc += d;
        }
    }
    Ok((dx, dw, Tensor::new(&[out_dim], db)?))
}

/// Row-wise softmax with the max-shift for stability.
pub fn softmax(z: &Tensor) -> Result<Tensor> {
    let (_, k) = z.dims2()?;
    let mut out = z.clone();
    for row in out.data_mut().chunks_exact_mut(k) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            total += *v;
        }
        for v in row.iter_mut() {
            *v /= total;
        }
    }
    Ok(out)
}

/// Pulls a gradient with respect to softmax outputs back to the logits.
pub fn softmax_backward(probs: &Tensor, dprobs: &Tensor) -> Result<Tensor> {
    let (_, k) = probs.dims2()?;
    if probs.shape() != dprobs.shape() {
        return Err(Error::shape(format!(
            "softmax upstream gradient {:?}, expected {:?}",
            dprobs.shape(),
            probs.shape()
        )));
    }
    let mut dz = Vec::with_capacity(probs.len());
    for (p, dp) in probs
        .data()
        .chunks_exact(k)
        .zip(dprobs.data().chunks_exact(k))
    {
        let dot: f64 = p.iter().zip(dp).map(|(a, b)| a * b).sum();
        dz.extend(p.iter().zip(dp).map(|(&pi, &di)| pi * (di - dot)));
    }
    Tensor::new(probs.shape(), dz)
}
