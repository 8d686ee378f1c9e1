//! Layer forward/backward kernels: 3x3 same-padding convolution, 2x2/stride-2
//! max pooling, dense, ReLU, flatten.
//!
//! The convolution is fixed to the encoder's geometry (3x3 kernel, stride 1,
//! pad 1) and written as shifted row AXPYs so the inner loops stay on
//! contiguous slices.

use crate::error::{Error, Result};
use crate::nn::tensor::{Scalar, Tensor};

/// Row range over which a kernel tap at offset `d` overlaps a length-`n` axis.
#[inline]
fn valid_range(n: usize, d: isize) -> (usize, usize) {
    let lo = if d < 0 { (-d) as usize } else { 0 };
    let hi = if d > 0 { n - d as usize } else { n };
    (lo, hi)
}

/// out[oc] += sum_ic conv(in[ic], w[oc][ic]) + b[oc]; spatial dims preserved.
pub(crate) fn conv2d_slice<T: Scalar>(
    input: &[T],
    in_ch: usize,
    h: usize,
    w: usize,
    weight: &[T],
    bias: &[T],
    out_ch: usize,
    out: &mut [T],
) {
    let plane = h * w;
    debug_assert_eq!(input.len(), in_ch * plane);
    debug_assert_eq!(weight.len(), out_ch * in_ch * 9);
    debug_assert_eq!(bias.len(), out_ch);
    debug_assert_eq!(out.len(), out_ch * plane);
    for oc in 0..out_ch {
        let out_plane = &mut out[oc * plane..(oc + 1) * plane];
        out_plane.fill(bias[oc]);
        for ic in 0..in_ch {
            let in_plane = &input[ic * plane..(ic + 1) * plane];
            let wbase = (oc * in_ch + ic) * 9;
            for ky in 0..3usize {
                let dy = ky as isize - 1;
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..3usize {
                    let wv = weight[wbase + ky * 3 + kx];
                    if wv == T::zero() {
                        continue;
                    }
                    let dx = kx as isize - 1;
                    let (x0, x1) = valid_range(w, dx);
                    if x0 >= x1 {
                        continue;
                    }
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let orow = &mut out_plane[y * w + x0..y * w + x1];
                        let ioff = sy * w + (x0 as isize + dx) as usize;
                        let irow = &in_plane[ioff..ioff + (x1 - x0)];
                        for (o, &i) in orow.iter_mut().zip(irow) {
                            *o += wv * i;
                        }
                    }
                }
            }
        }
    }
}

/// Gradients of `conv2d_slice` accumulated into the provided buffers
/// (`grad_in` may be `None` for the first layer).
#[allow(clippy::too_many_arguments)]
pub(crate) fn conv2d_grad_slice<T: Scalar>(
    input: &[T],
    in_ch: usize,
    h: usize,
    w: usize,
    weight: &[T],
    out_ch: usize,
    grad_out: &[T],
    grad_in: Option<&mut [T]>,
    grad_w: &mut [T],
    grad_b: &mut [T],
) {
    let plane = h * w;
    for oc in 0..out_ch {
        let gout_plane = &grad_out[oc * plane..(oc + 1) * plane];
        let mut gb = T::zero();
        for &g in gout_plane {
            gb += g;
        }
        grad_b[oc] += gb;
        for ic in 0..in_ch {
            let in_plane = &input[ic * plane..(ic + 1) * plane];
            let wbase = (oc * in_ch + ic) * 9;
            for ky in 0..3usize {
                let dy = ky as isize - 1;
                let (y0, y1) = valid_range(h, dy);
                for kx in 0..3usize {
                    let dx = kx as isize - 1;
                    let (x0, x1) = valid_range(w, dx);
                    if x0 >= x1 {
                        continue;
                    }
                    let mut acc = T::zero();
                    for y in y0..y1 {
                        let sy = (y as isize + dy) as usize;
                        let grow = &gout_plane[y * w + x0..y * w + x1];
                        let ioff = sy * w + (x0 as isize + dx) as usize;
                        let irow = &in_plane[ioff..ioff + (x1 - x0)];
                        for (&g, &i) in grow.iter().zip(irow) {
                            acc += g * i;
                        }
                    }
                    grad_w[wbase + ky * 3 + kx] += acc;
                }
            }
        }
    }
    if let Some(grad_in) = grad_in {
        for ic in 0..in_ch {
            let gin_plane = &mut grad_in[ic * plane..(ic + 1) * plane];
            for oc in 0..out_ch {
                let gout_plane = &grad_out[oc * plane..(oc + 1) * plane];
                let wbase = (oc * in_ch + ic) * 9;
                for ky in 0..3usize {
                    let dy = ky as isize - 1;
                    let (y0, y1) = valid_range(h, dy);
                    for kx in 0..3usize {
                        let wv = weight[wbase + ky * 3 + kx];
                        if wv == T::zero() {
                            continue;
                        }
                        let dx = kx as isize - 1;
                        let (x0, x1) = valid_range(w, dx);
                        if x0 >= x1 {
                            continue;
                        }
                        for y in y0..y1 {
                            let sy = (y as isize + dy) as usize;
                            let grow = &gout_plane[y * w + x0..y * w + x1];
                            let ioff = sy * w + (x0 as isize + dx) as usize;
                            let irow = &mut gin_plane[ioff..ioff + (x1 - x0)];
                            for (i, &g) in irow.iter_mut().zip(grow) {
                                *i += wv * g;
                            }
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn maxpool2_slice<T: Scalar>(
    input: &[T],
    ch: usize,
    h: usize,
    w: usize,
) -> (Vec<T>, Vec<u32>, usize, usize) {
    let (oh, ow) = (h / 2, w / 2);
    let plane = h * w;
    let mut out = Vec::with_capacity(ch * oh * ow);
    let mut argmax = Vec::with_capacity(ch * oh * ow);
    for c in 0..ch {
        let base = c * plane;
        for oy in 0..oh {
            for ox in 0..ow {
                let i00 = base + (2 * oy) * w + 2 * ox;
                // Window scan order (0,0),(0,1),(1,0),(1,1); strict > keeps
                // the first index on ties.
                let mut best = input[i00];
                let mut best_i = i00;
                let i01 = i00 + 1;
                if input[i01] > best {
                    best = input[i01];
                    best_i = i01;
                }
                let i10 = i00 + w;
                if input[i10] > best {
                    best = input[i10];
                    best_i = i10;
                }
                let i11 = i10 + 1;
                if input[i11] > best {
                    best = input[i11];
                    best_i = i11;
                }
                out.push(best);
                argmax.push(best_i as u32);
            }
        }
    }
    (out, argmax, oh, ow)
}

pub(crate) fn maxpool2_grad_slice<T: Scalar>(
    grad_out: &[T],
    argmax: &[u32],
    input_len: usize,
) -> Vec<T> {
    let mut grad_in = vec![T::zero(); input_len];
    for (&g, &i) in grad_out.iter().zip(argmax) {
        grad_in[i as usize] += g;
    }
    grad_in
}

pub(crate) fn relu_slice<T: Scalar>(x: &mut [T]) {
    for v in x {
        if *v < T::zero() {
            *v = T::zero();
        }
    }
}

/// grad wrt pre-activation; relu'(0) = 0 by the strict comparison.
pub(crate) fn relu_grad_slice<T: Scalar>(grad_out: &[T], pre: &[T]) -> Vec<T> {
    grad_out
        .iter()
        .zip(pre)
        .map(|(&g, &p)| if p > T::zero() { g } else { T::zero() })
        .collect()
}

pub(crate) fn dense_slice<T: Scalar>(
    x: &[T],
    weight: &[T],
    bias: &[T],
    out_dim: usize,
    in_dim: usize,
    out: &mut [T],
) {
    debug_assert_eq!(x.len(), in_dim);
    debug_assert_eq!(weight.len(), out_dim * in_dim);
    for o in 0..out_dim {
        let row = &weight[o * in_dim..(o + 1) * in_dim];
        let mut acc = bias[o];
        for (&wv, &xv) in row.iter().zip(x) {
            acc += wv * xv;
        }
        out[o] = acc;
    }
}

pub(crate) fn dense_grad_slice<T: Scalar>(
    x: &[T],
    weight: &[T],
    grad_out: &[T],
    out_dim: usize,
    in_dim: usize,
    grad_x: &mut [T],
    grad_w: &mut [T],
    grad_b: &mut [T],
) {
    for o in 0..out_dim {
        let g = grad_out[o];
        grad_b[o] += g;
        if g == T::zero() {
            continue;
        }
        let wrow = &weight[o * in_dim..(o + 1) * in_dim];
        let gwrow = &mut grad_w[o * in_dim..(o + 1) * in_dim];
        for ((gw, gx), (&wv, &xv)) in gwrow
            .iter_mut()
            .zip(grad_x.iter_mut())
            .zip(wrow.iter().zip(x))
        {
            *gw += g * xv;
            *gx += g * wv;
        }
    }
}

// ---------------------------------------------------------------------------
// Tensor-level API
// ---------------------------------------------------------------------------

/// 3x3/stride-1/pad-1 convolution: input `[C_in, H, W]`, weight
/// `[C_out, C_in, 3, 3]`, bias `[C_out]` -> `[C_out, H, W]`.
pub fn conv2d<T: Scalar>(input: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let (in_ch, h, w) = expect_3d(input, "conv2d input")?;
    let ws = weight.shape();
    if ws.len() != 4 || ws[1] != in_ch || ws[2] != 3 || ws[3] != 3 {
        return Err(Error::shape(
            "conv2d weight",
            format!("{ws:?} does not match input channels {in_ch} / 3x3 kernel"),
        ));
    }
    let out_ch = ws[0];
    if bias.shape() != [out_ch] {
        return Err(Error::shape("conv2d bias", format!("{:?}", bias.shape())));
    }
    let mut out = vec![T::zero(); out_ch * h * w];
    conv2d_slice(input.data(), in_ch, h, w, weight.data(), bias.data(), out_ch, &mut out);
    Tensor::new(vec![out_ch, h, w], out)
}

/// Gradients of [`conv2d`] wrt input, weight, and bias.
pub fn conv2d_grad<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (in_ch, h, w) = expect_3d(input, "conv2d input")?;
    let out_ch = weight.shape()[0];
    if grad_out.shape() != [out_ch, h, w] {
        return Err(Error::shape(
            "conv2d grad_out",
            format!("{:?}", grad_out.shape()),
        ));
    }
    let mut grad_in = vec![T::zero(); input.numel()];
    let mut grad_w = vec![T::zero(); weight.numel()];
    let mut grad_b = vec![T::zero(); out_ch];
    conv2d_grad_slice(
        input.data(),
        in_ch,
        h,
        w,
        weight.data(),
        out_ch,
        grad_out.data(),
        Some(&mut grad_in),
        &mut grad_w,
        &mut grad_b,
    );
    Ok((
        Tensor::new(input.shape().to_vec(), grad_in)?,
        Tensor::new(weight.shape().to_vec(), grad_w)?,
        Tensor::new(vec![out_ch], grad_b)?,
    ))
}

/// 2x2/stride-2 max pool; odd trailing row/column dropped. Also returns the
/// flat argmax indices used for gradient routing.
pub fn maxpool2<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, Vec<u32>)> {
    let (ch, h, w) = expect_3d(input, "maxpool2 input")?;
    if h < 2 || w < 2 {
        return Err(Error::shape(
            "maxpool2",
            format!("spatial dims {h}x{w} below 2x2"),
        ));
    }
    let (out, argmax, oh, ow) = maxpool2_slice(input.data(), ch, h, w);
    Ok((Tensor::new(vec![ch, oh, ow], out)?, argmax))
}

pub fn maxpool2_grad<T: Scalar>(
    grad_out: &Tensor<T>,
    argmax: &[u32],
    input_shape: &[usize],
) -> Result<Tensor<T>> {
    if grad_out.numel() != argmax.len() {
        return Err(Error::shape("maxpool2 grad", "argmax length mismatch"));
    }
    let len = input_shape.iter().product();
    let grad_in = maxpool2_grad_slice(grad_out.data(), argmax, len);
    Tensor::new(input_shape.to_vec(), grad_in)
}

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    let mut out = input.clone();
    relu_slice(out.data_mut());
    out
}

pub fn relu_grad<T: Scalar>(grad_out: &Tensor<T>, pre_activation: &Tensor<T>) -> Result<Tensor<T>> {
    if grad_out.shape() != pre_activation.shape() {
        return Err(Error::shape("relu grad", "shape mismatch"));
    }
    Tensor::new(
        grad_out.shape().to_vec(),
        relu_grad_slice(grad_out.data(), pre_activation.data()),
    )
}

pub fn flatten<T: Scalar>(input: Tensor<T>) -> Tensor<T> {
    let numel = input.numel();
    input.reshaped(vec![numel]).expect("flatten preserves numel")
}

/// Affine layer: x `[In]`, weight `[Out, In]`, bias `[Out]` -> `[Out]`.
pub fn dense<T: Scalar>(x: &Tensor<T>, weight: &Tensor<T>, bias: &Tensor<T>) -> Result<Tensor<T>> {
    let ws = weight.shape();
    if ws.len() != 2 || x.shape() != [ws[1]] || bias.shape() != [ws[0]] {
        return Err(Error::shape(
            "dense",
            format!(
                "x {:?}, weight {:?}, bias {:?}",
                x.shape(),
                ws,
                bias.shape()
            ),
        ));
    }
    let (out_dim, in_dim) = (ws[0], ws[1]);
    let mut out = vec![T::zero(); out_dim];
    dense_slice(x.data(), weight.data(), bias.data(), out_dim, in_dim, &mut out);
    Tensor::new(vec![out_dim], out)
}

pub fn dense_grad<T: Scalar>(
    x: &Tensor<T>,
    weight: &Tensor<T>,
    grad_out: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let ws = weight.shape();
    let (out_dim, in_dim) = (ws[0], ws[1]);
    if grad_out.shape() != [out_dim] {
        return Err(Error::shape("dense grad", format!("{:?}", grad_out.shape())));
    }
    let mut gx = vec![T::zero(); in_dim];
    let mut gw = vec![T::zero(); out_dim * in_dim];
    let mut gb = vec![T::zero(); out_dim];
    dense_grad_slice(
        x.data(),
        weight.data(),
        grad_out.data(),
        out_dim,
        in_dim,
        &mut gx,
        &mut gw,
        &mut gb,
    );
    Ok((
        Tensor::new(vec![in_dim], gx)?,
        Tensor::new(vec![out_dim, in_dim], gw)?,
        Tensor::new(vec![out_dim], gb)?,
    ))
}

fn expect_3d<T: Scalar>(t: &Tensor<T>, ctx: &str) -> Result<(usize, usize, usize)> {
    let s = t.shape();
    if s.len() != 3 {
        return Err(Error::shape(ctx, format!("expected [C,H,W], got {s:?}")));
    }
    Ok((s[0], s[1], s[2]))
}
