//! Minimal CPU tensor kernels with hand-written backward passes.
//!
//! Tensors are single images in channel-major layout (`[c][y][x]`), `f64` throughout so
//! that finite-difference checks stay meaningful.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Tensor {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::Shape(format!(
                "tensor {channels}x{height}x{width} needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        Ok(Tensor {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn same_shape(&self, other: &Tensor) -> bool {
        self.channels == other.channels && self.height == other.height && self.width == other.width
    }

    /// Stacks tensors of equal spatial size along the channel axis.
    pub fn concat(parts: &[&Tensor]) -> Tensor {
        let (h, w) = (parts[0].height, parts[0].width);
        let mut data = Vec::new();
        let mut channels = 0;
        for p in parts {
            assert_eq!((p.height, p.width), (h, w), "concat spatial mismatch");
            data.extend_from_slice(&p.data);
            channels += p.channels;
        }
        Tensor {
            channels,
            height: h,
            width: w,
            data,
        }
    }

    /// Splits along channels into chunks of the given sizes.
    pub fn split(&self, sizes: &[usize]) -> Vec<Tensor> {
        let n = self.plane_len();
        let mut start = 0;
        sizes
            .iter()
            .map(|&c| {
                let t = Tensor {
                    channels: c,
                    height: self.height,
                    width: self.width,
                    data: self.data[start * n..(start + c) * n].to_vec(),
                };
                start += c;
                t
            })
            .collect()
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }
}

/// 2-D convolution geometry. Weights are laid out `[out][in][ky][kx]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub dilation: usize,
}

impl ConvGeometry {
    pub fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel * self.kernel
    }

    pub fn output_size(&self, h: usize, w: usize) -> (usize, usize) {
        let span = self.dilation * (self.kernel - 1) + 1;
        let oh = (h + 2 * self.padding).saturating_sub(span) / self.stride + 1;
        let ow = (w + 2 * self.padding).saturating_sub(span) / self.stride + 1;
        (oh, ow)
    }

    /// Output index range `[lo, hi)` for which `o * stride + offset` lands inside `0..len`.
    fn valid_range(&self, offset: isize, len: usize, out_len: usize) -> (usize, usize) {
        let s = self.stride as isize;
        let lo = if offset >= 0 { 0 } else { (-offset + s - 1) / s };
        let last = len as isize - 1 - offset;
        if last < 0 {
            return (0, 0);
        }
        let hi = (last / s + 1).min(out_len as isize);
        (lo.max(0) as usize, hi.max(lo.max(0)) as usize)
    }

    fn offset(&self, k: usize) -> isize {
        (k * self.dilation) as isize - self.padding as isize
    }
}

pub fn conv2d(input: &Tensor, geo: &ConvGeometry, weight: &[f64], bias: Option<&[f64]>) -> Tensor {
    assert_eq!(input.channels, geo.in_channels, "conv input channels");
    assert_eq!(weight.len(), geo.weight_len(), "conv weight length");
    let (oh, ow) = geo.output_size(input.height, input.width);
    let mut out = Tensor::zeros(geo.out_channels, oh, ow);
    let k = geo.kernel;
    for oc in 0..geo.out_channels {
        let out_plane = out.plane_mut(oc);
        if let Some(b) = bias {
            out_plane.iter_mut().for_each(|v| *v = b[oc]);
        }
        for ic in 0..geo.in_channels {
            let in_plane = input.plane(ic);
            for ky in 0..k {
                let oy_off = geo.offset(ky);
                let (y_lo, y_hi) = geo.valid_range(oy_off, input.height, oh);
                for kx in 0..k {
                    let wv = weight[((oc * geo.in_channels + ic) * k + ky) * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let ox_off = geo.offset(kx);
                    let (x_lo, x_hi) = geo.valid_range(ox_off, input.width, ow);
                    if x_lo >= x_hi {
                        continue;
                    }
                    for oy in y_lo..y_hi {
                        let iy = (oy * geo.stride) as isize + oy_off;
                        let in_row = &in_plane[iy as usize * input.width..];
                        let out_row = &mut out_plane[oy * ow..(oy + 1) * ow];
                        if geo.stride == 1 {
                            let ix0 = (x_lo as isize + ox_off) as usize;
                            let src = &in_row[ix0..ix0 + (x_hi - x_lo)];
                            for (o, &i) in out_row[x_lo..x_hi].iter_mut().zip(src) {
                                *o += wv * i;
                            }
                        } else {
                            for ox in x_lo..x_hi {
                                let ix = (ox * geo.stride) as isize + ox_off;
                                out_row[ox] += wv * in_row[ix as usize];
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients of a convolution. `grad_weight`/`grad_bias` are accumulated into when given.
pub fn conv2d_backward(
    input: &Tensor,
    geo: &ConvGeometry,
    weight: &[f64],
    grad_out: &Tensor,
    want_input_grad: bool,
    grad_weight: Option<&mut [f64]>,
    grad_bias: Option<&mut [f64]>,
) -> Option<Tensor> {
    let (oh, ow) = (grad_out.height, grad_out.width);
    let k = geo.kernel;
    if let Some(gb) = grad_bias {
        for oc in 0..geo.out_channels {
            gb[oc] += grad_out.plane(oc).iter().sum::<f64>();
        }
    }
    if let Some(gw) = grad_weight {
        for oc in 0..geo.out_channels {
            let g_plane = grad_out.plane(oc);
            for ic in 0..geo.in_channels {
                let in_plane = input.plane(ic);
                for ky in 0..k {
                    let oy_off = geo.offset(ky);
                    let (y_lo, y_hi) = geo.valid_range(oy_off, input.height, oh);
                    for kx in 0..k {
                        let ox_off = geo.offset(kx);
                        let (x_lo, x_hi) = geo.valid_range(ox_off, input.width, ow);
                        let mut acc = 0.0;
                        for oy in y_lo..y_hi {
                            let iy = ((oy * geo.stride) as isize + oy_off) as usize;
                            let in_row = &in_plane[iy * input.width..(iy + 1) * input.width];
                            let g_row = &g_plane[oy * ow..(oy + 1) * ow];
                            if geo.stride == 1 {
                                let ix0 = (x_lo as isize + ox_off) as usize;
                                acc += g_row[x_lo..x_hi]
                                    .iter()
                                    .zip(&in_row[ix0..ix0 + (x_hi - x_lo)])
                                    .map(|(a, b)| a * b)
                                    .sum::<f64>();
                            } else {
                                for ox in x_lo..x_hi {
                                    let ix = ((ox * geo.stride) as isize + ox_off) as usize;
                                    acc += g_row[ox] * in_row[ix];
                                }
                            }
                        }
                        gw[((oc * geo.in_channels + ic) * k + ky) * k + kx] += acc;
                    }
                }
            }
        }
    }
    if !want_input_grad {
        return None;
    }
    let mut grad_in = Tensor::zeros(input.channels, input.height, input.width);
    for oc in 0..geo.out_channels {
        let g_plane = grad_out.plane(oc);
        for ic in 0..geo.in_channels {
            let gi_plane = grad_in.plane_mut(ic);
            for ky in 0..k {
                let oy_off = geo.offset(ky);
                let (y_lo, y_hi) = geo.valid_range(oy_off, input.height, oh);
                for kx in 0..k {
                    let wv = weight[((oc * geo.in_channels + ic) * k + ky) * k + kx];
                    if wv == 0.0 {
                        continue;
                    }
                    let ox_off = geo.offset(kx);
                    let (x_lo, x_hi) = geo.valid_range(ox_off, input.width, ow);
                    if x_lo >= x_hi {
                        continue;
                    }
                    for oy in y_lo..y_hi {
                        let iy = ((oy * geo.stride) as isize + oy_off) as usize;
                        let g_row = &g_plane[oy * ow..(oy + 1) * ow];
                        let gi_row = &mut gi_plane[iy * input.width..(iy + 1) * input.width];
                        if geo.stride == 1 {
                            let ix0 = (x_lo as isize + ox_off) as usize;
                            for (gi, &g) in gi_row[ix0..ix0 + (x_hi - x_lo)]
                                .iter_mut()
                                .zip(&g_row[x_lo..x_hi])
                            {
                                *gi += wv * g;
                            }
                        } else {
                            for ox in x_lo..x_hi {
                                let ix = ((ox * geo.stride) as isize + ox_off) as usize;
                                gi_row[ix] += wv * g_row[ox];
                            }
                        }
                    }
                }
            }
        }
    }
    Some(grad_in)
}

pub fn relu(input: &Tensor) -> Tensor {
    Tensor {
        channels: input.channels,
        height: input.height,
        width: input.width,
        data: input.data.iter().map(|&v| v.max(0.0)).collect(),
    }
}

/// How rectifier units propagate gradients on the backward pass.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BackpropRule {
    /// Ordinary derivative: pass where the forward input was positive.
    #[default]
    Plain,
    /// Pass only where the forward input and the upstream gradient are both positive.
    Guided,
}

/// Backward through a rectifier given its forward *input*.
pub fn relu_backward(pre: &Tensor, grad_out: &Tensor, rule: BackpropRule) -> Tensor {
    let data = pre
        .data
        .iter()
        .zip(&grad_out.data)
        .map(|(&x, &g)| match rule {
            BackpropRule::Plain if x > 0.0 => g,
            BackpropRule::Guided if x > 0.0 && g > 0.0 => g,
            _ => 0.0,
        })
        .collect();
    Tensor {
        channels: pre.channels,
        height: pre.height,
        width: pre.width,
        data,
    }
}

/// Max pooling without padding; returns the pooled tensor and the flat argmax of each cell.
pub fn max_pool(input: &Tensor, kernel: usize, stride: usize) -> (Tensor, Vec<usize>) {
    let oh = (input.height - kernel) / stride + 1;
    let ow = (input.width - kernel) / stride + 1;
    let mut out = Tensor::zeros(input.channels, oh, ow);
    let mut arg = Vec::with_capacity(out.data.len());
    for c in 0..input.channels {
        let plane = input.plane(c);
        let base = c * input.plane_len();
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f64::NEG_INFINITY;
                let mut best_i = 0;
                for ky in 0..kernel {
                    for kx in 0..kernel {
                        let i = (oy * stride + ky) * input.width + ox * stride + kx;
                        if plane[i] > best {
                            best = plane[i];
                            best_i = i;
                        }
                    }
                }
                out.data[(c * oh + oy) * ow + ox] = best;
                arg.push(base + best_i);
            }
        }
    }
    (out, arg)
}

pub fn max_pool_backward(input: &Tensor, argmax: &[usize], grad_out: &Tensor) -> Tensor {
    let mut g = Tensor::zeros(input.channels, input.height, input.width);
    for (&i, &v) in argmax.iter().zip(&grad_out.data) {
        g.data[i] += v;
    }
    g
}

fn adaptive_bins(len: usize, out: usize) -> Vec<(usize, usize)> {
    (0..out)
        .map(|i| {
            let start = i * len / out;
            let end = ((i + 1) * len).div_ceil(out);
            (start, end.max(start + 1))
        })
        .collect()
}

/// Adaptive average pooling to `(oh, ow)` using PyTorch's bin boundaries.
pub fn adaptive_avg_pool(input: &Tensor, oh: usize, ow: usize) -> Tensor {
    let ybins = adaptive_bins(input.height, oh);
    let xbins = adaptive_bins(input.width, ow);
    let mut out = Tensor::zeros(input.channels, oh, ow);
    for c in 0..input.channels {
        let plane = input.plane(c);
        for (oy, &(y0, y1)) in ybins.iter().enumerate() {
            for (ox, &(x0, x1)) in xbins.iter().enumerate() {
                let mut s = 0.0;
                for y in y0..y1 {
                    s += plane[y * input.width + x0..y * input.width + x1]
                        .iter()
                        .sum::<f64>();
                }
                out.data[(c * oh + oy) * ow + ox] = s / ((y1 - y0) * (x1 - x0)) as f64;
            }
        }
    }
    out
}

pub fn adaptive_avg_pool_backward(input: &Tensor, grad_out: &Tensor) -> Tensor {
    let (oh, ow) = (grad_out.height, grad_out.width);
    let ybins = adaptive_bins(input.height, oh);
    let xbins = adaptive_bins(input.width, ow);
    let mut g = Tensor::zeros(input.channels, input.height, input.width);
    for c in 0..input.channels {
        for (oy, &(y0, y1)) in ybins.iter().enumerate() {
            for (ox, &(x0, x1)) in xbins.iter().enumerate() {
                let share = grad_out.data[(c * oh + oy) * ow + ox] / ((y1 - y0) * (x1 - x0)) as f64;
                let plane = g.plane_mut(c);
                for y in y0..y1 {
                    for x in x0..x1 {
                        plane[y * input.width + x] += share;
                    }
                }
            }
        }
    }
    g
}

/// `y = W x + b` with `W` laid out `[out][in]`.
pub fn linear(input: &[f64], weight: &[f64], bias: Option<&[f64]>, out_features: usize) -> Vec<f64> {
    let n = input.len();
    (0..out_features)
        .map(|o| {
            let row = &weight[o * n..(o + 1) * n];
            let dot: f64 = row.iter().zip(input).map(|(w, x)| w * x).sum();
            dot + bias.map_or(0.0, |b| b[o])
        })
        .collect()
}

pub fn linear_backward_input(grad_out: &[f64], weight: &[f64], in_features: usize) -> Vec<f64> {
    let mut g = vec![0.0; in_features];
    for (o, &go) in grad_out.iter().enumerate() {
        if go == 0.0 {
            continue;
        }
        let row = &weight[o * in_features..(o + 1) * in_features];
        for (gi, &w) in g.iter_mut().zip(row) {
            *gi += go * w;
        }
    }
    g
}

/// Bilinear resize of every channel with half-pixel centres.
pub fn upsample_bilinear(input: &Tensor, oh: usize, ow: usize) -> Tensor {
    let ys = axis_weights(input.height, oh);
    let xs = axis_weights(input.width, ow);
    let mut out = Tensor::zeros(input.channels, oh, ow);
    for c in 0..input.channels {
        let src = input.plane(c);
        let w = input.width;
        for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                let top = src[y0 * w + x0] * (1.0 - fx) + src[y0 * w + x1] * fx;
                let bot = src[y1 * w + x0] * (1.0 - fx) + src[y1 * w + x1] * fx;
                out.data[(c * oh + oy) * ow + ox] = top * (1.0 - fy) + bot * fy;
            }
        }
    }
    out
}

pub fn upsample_bilinear_backward(input_shape: (usize, usize, usize), grad_out: &Tensor) -> Tensor {
    let (c_n, h, w) = input_shape;
    let ys = axis_weights(h, grad_out.height);
    let xs = axis_weights(w, grad_out.width);
    let mut g = Tensor::zeros(c_n, h, w);
    for c in 0..c_n {
        let go = grad_out.plane(c);
        let gp = g.plane_mut(c);
        for (oy, &(y0, y1, fy)) in ys.iter().enumerate() {
            for (ox, &(x0, x1, fx)) in xs.iter().enumerate() {
                let v = go[oy * grad_out.width + ox];
                gp[y0 * w + x0] += v * (1.0 - fy) * (1.0 - fx);
                gp[y0 * w + x1] += v * (1.0 - fy) * fx;
                gp[y1 * w + x0] += v * fy * (1.0 - fx);
                gp[y1 * w + x1] += v * fy * fx;
            }
        }
    }
    g
}

fn axis_weights(src: usize, dst: usize) -> Vec<(usize, usize, f64)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).max(0.0);
            let i0 = (pos.floor() as usize).min(src - 1);
            let i1 = (i0 + 1).min(src - 1);
            (i0, i1, if i0 == i1 { 0.0 } else { pos - i0 as f64 })
        })
        .collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}
