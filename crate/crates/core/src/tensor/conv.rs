//! 2D convolution blocks.
//!
//! A block is convolution + bias + optional SiLU, with "same" padding
//! `(k-1)/2` so stride-1 output keeps the input's spatial size and stride-s
//! output is `ceil(size / s)`. Grouped convolution covers both dense
//! (`groups = 1`) and depthwise (`groups = in_channels`) cases.

use crate::error::{Error, Result};
use crate::tensor::TensorMap;
use rayon::prelude::*;

/// Pointwise nonlinearity applied after bias.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Silu,
    None,
}

impl Activation {
    #[inline]
    pub fn apply(self, v: f32) -> f32 {
        match self {
            Activation::Silu => v / (1.0 + (-v).exp()),
            Activation::None => v,
        }
    }
}

/// Weights and geometry of one convolution block.
///
/// Weight layout is `out x (in/groups) x k x k`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlockParams {
    in_channels: usize,
    out_channels: usize,
    kernel: usize,
    stride: usize,
    groups: usize,
    weights: Vec<f32>,
    bias: Vec<f32>,
    activation: Activation,
}

impl ConvBlockParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        groups: usize,
        weights: Vec<f32>,
        bias: Vec<f32>,
        activation: Activation,
    ) -> Result<Self> {
        if in_channels == 0 || out_channels == 0 || kernel == 0 || stride == 0 || groups == 0 {
            return Err(Error::InvalidParameter(
                "convolution dimensions must be >= 1".into(),
            ));
        }
        if kernel.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!(
                "kernel size must be odd, got {kernel}"
            )));
        }
        if !in_channels.is_multiple_of(groups) || !out_channels.is_multiple_of(groups) {
            return Err(Error::InvalidParameter(format!(
                "groups {groups} must divide in_channels {in_channels} and out_channels {out_channels}"
            )));
        }
        let expect = out_channels * (in_channels / groups) * kernel * kernel;
        if weights.len() != expect {
            return Err(Error::ShapeMismatch(format!(
                "weights length {} does not match {out_channels}x{}x{kernel}x{kernel}",
                weights.len(),
                in_channels / groups
            )));
        }
        if bias.len() != out_channels {
            return Err(Error::ShapeMismatch(format!(
                "bias length {} does not match out_channels {out_channels}",
                bias.len()
            )));
        }
        Ok(Self {
            in_channels,
            out_channels,
            kernel,
            stride,
            groups,
            weights,
            bias,
            activation,
        })
    }

    /// 1x1 convolution that maps each channel to itself.
    pub fn identity_1x1(channels: usize, activation: Activation) -> Result<Self> {
        let mut weights = vec![0.0; channels * channels];
        for c in 0..channels {
            weights[c * channels + c] = 1.0;
        }
        Self::new(
            channels,
            channels,
            1,
            1,
            1,
            weights,
            vec![0.0; channels],
            activation,
        )
    }

    /// Fan-in scaled uniform init: weights in
    /// `(-sqrt(6/fan_in), sqrt(6/fan_in))` (variance-preserving through
    /// depth), zero bias.
    pub fn seeded<R: rand::Rng>(
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        groups: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let fan_in = (in_channels / groups.max(1)) * kernel * kernel;
        let bound = (6.0 / fan_in.max(1) as f32).sqrt();
        let count = out_channels * (in_channels / groups.max(1)) * kernel * kernel;
        let weights = (0..count)
            .map(|_| (rng.random::<f32>() * 2.0 - 1.0) * bound)
            .collect();
        Self::new(
            in_channels,
            out_channels,
            kernel,
            stride,
            groups,
            weights,
            vec![0.0; out_channels],
            activation,
        )
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn kernel(&self) -> usize {
        self.kernel
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn groups(&self) -> usize {
        self.groups
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub(crate) fn replace_tensors(&mut self, weights: Vec<f32>, bias: Vec<f32>) -> Result<()> {
        if weights.len() != self.weights.len() || bias.len() != self.bias.len() {
            return Err(Error::ShapeMismatch(
                "replacement tensors do not match block geometry".into(),
            ));
        }
        self.weights = weights;
        self.bias = bias;
        Ok(())
    }
}

/// Applies one convolution block. Output spatial size is
/// `ceil(input / stride)` per axis; the activation runs last.
pub fn conv2d_block(x: &TensorMap, p: &ConvBlockParams) -> Result<TensorMap> {
    if x.channels() != p.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "input has {} channels, block expects {}",
            x.channels(),
            p.in_channels
        )));
    }
    let (batch, channels, ih, iw) = x.shape();
    let oh = (ih - 1) / p.stride + 1;
    let ow = (iw - 1) / p.stride + 1;
    let mut out = TensorMap::zeros(batch, p.out_channels, oh, ow)?;
    let plane_len = oh * ow;

    // Stride-1 kernels larger than 1x1 run over an explicitly zero-padded
    // copy, which removes every boundary branch from the hot loops. The
    // padding contributes exact `+0.0` terms, so sums are unchanged.
    let pad = (p.kernel - 1) / 2;
    let padded: Option<(Vec<f32>, usize, usize)> = if p.stride == 1 && pad > 0 {
        let (ph, pw) = (ih + 2 * pad, iw + 2 * pad);
        let mut buf = vec![0.0f32; batch * channels * ph * pw];
        for b in 0..batch {
            for c in 0..channels {
                let src = x.plane(b, c);
                let dst = &mut buf[(b * channels + c) * ph * pw..];
                for y in 0..ih {
                    dst[(y + pad) * pw + pad..(y + pad) * pw + pad + iw]
                        .copy_from_slice(&src[y * iw..(y + 1) * iw]);
                }
            }
        }
        Some((buf, ph, pw))
    } else {
        None
    };

    out.data_mut()
        .par_chunks_mut(plane_len)
        .enumerate()
        .for_each(|(idx, plane)| {
            let b = idx / p.out_channels;
            let oc = idx % p.out_channels;
            conv_plane(plane, x, p, padded.as_ref(), b, oc, oh, ow);
        });
    Ok(out)
}

/// One output `(batch, channel)` plane. Per output element the accumulation
/// order is fixed to `(in_channel, ky, kx)` so results are reproducible
/// regardless of how planes are scheduled or which inner kernel runs.
#[allow(clippy::too_many_arguments)]
fn conv_plane(
    plane: &mut [f32],
    x: &TensorMap,
    p: &ConvBlockParams,
    padded: Option<&(Vec<f32>, usize, usize)>,
    b: usize,
    oc: usize,
    oh: usize,
    ow: usize,
) {
    let k = p.kernel;
    let stride = p.stride;
    let (_, channels, ih, iw) = x.shape();
    let in_per_group = p.in_channels / p.groups;
    let group = oc / (p.out_channels / p.groups);
    let ic0 = group * in_per_group;

    plane.fill(p.bias[oc]);
    if stride == 1 && k == 1 {
        let taps = &p.weights[oc * in_per_group..(oc + 1) * in_per_group];
        accumulate_1x1(plane, x, ic0, in_per_group, taps, b);
    } else if let Some((buf, ph, pw)) = padded {
        for icl in 0..in_per_group {
            let base = (b * channels + ic0 + icl) * ph * pw;
            let in_plane = &buf[base..base + ph * pw];
            let taps = &p.weights
                [(oc * in_per_group + icl) * k * k..(oc * in_per_group + icl + 1) * k * k];
            match k {
                3 => accumulate_padded::<3>(plane, in_plane, taps, oh, ow, *pw),
                5 => accumulate_padded::<5>(plane, in_plane, taps, oh, ow, *pw),
                7 => accumulate_padded::<7>(plane, in_plane, taps, oh, ow, *pw),
                9 => accumulate_padded::<9>(plane, in_plane, taps, oh, ow, *pw),
                _ => accumulate_padded_dyn(plane, in_plane, taps, k, oh, ow, *pw),
            }
        }
    } else {
        for icl in 0..in_per_group {
            let in_plane = x.plane(b, ic0 + icl);
            let taps = &p.weights
                [(oc * in_per_group + icl) * k * k..(oc * in_per_group + icl + 1) * k * k];
            accumulate_strided(plane, in_plane, taps, k, stride, oh, ow, ih, iw);
        }
    }
    if p.activation == Activation::Silu {
        for v in plane.iter_mut() {
            *v = Activation::Silu.apply(*v);
        }
    }
}

/// 1x1 stride-1 accumulation, blocked over input channels so each pass over
/// the output row retires several channels. Within a block the channels are
/// added in ascending order, so the per-element sum order is unchanged.
fn accumulate_1x1(
    plane: &mut [f32],
    x: &TensorMap,
    ic0: usize,
    count: usize,
    taps: &[f32],
    b: usize,
) {
    const BLOCK: usize = 8;
    let mut icl = 0;
    while icl < count {
        let blk = BLOCK.min(count - icl);
        if blk == BLOCK {
            let rows: [&[f32]; BLOCK] = std::array::from_fn(|j| x.plane(b, ic0 + icl + j));
            let w: [f32; BLOCK] = std::array::from_fn(|j| taps[icl + j]);
            for (i, o) in plane.iter_mut().enumerate() {
                let mut acc = *o;
                for j in 0..BLOCK {
                    acc += w[j] * rows[j][i];
                }
                *o = acc;
            }
        } else {
            for j in 0..blk {
                let row = x.plane(b, ic0 + icl + j);
                let w = taps[icl + j];
                for (o, v) in plane.iter_mut().zip(row) {
                    *o += w * *v;
                }
            }
        }
        icl += blk;
    }
}

/// Stride-1 accumulation over the zero-padded plane: no boundary branches,
/// full rows, kernel row held in registers.
fn accumulate_padded<const K: usize>(
    plane: &mut [f32],
    in_plane: &[f32],
    taps: &[f32],
    oh: usize,
    ow: usize,
    pw: usize,
) {
    for ky in 0..K {
        let row_taps: [f32; K] = taps[ky * K..(ky + 1) * K].try_into().unwrap();
        for oy in 0..oh {
            let in_row = &in_plane[(oy + ky) * pw..(oy + ky) * pw + pw];
            let out_row = &mut plane[oy * ow..oy * ow + ow];
            for (o, win) in out_row.iter_mut().zip(in_row.windows(K)) {
                let mut acc = *o;
                for kx in 0..K {
                    acc += row_taps[kx] * win[kx];
                }
                *o = acc;
            }
        }
    }
}

fn accumulate_padded_dyn(
    plane: &mut [f32],
    in_plane: &[f32],
    taps: &[f32],
    k: usize,
    oh: usize,
    ow: usize,
    pw: usize,
) {
    for ky in 0..k {
        let row_taps = &taps[ky * k..(ky + 1) * k];
        for oy in 0..oh {
            let in_row = &in_plane[(oy + ky) * pw..(oy + ky) * pw + pw];
            let out_row = &mut plane[oy * ow..oy * ow + ow];
            for (o, win) in out_row.iter_mut().zip(in_row.windows(k)) {
                let mut acc = *o;
                for (kx, &w) in row_taps.iter().enumerate() {
                    acc += w * win[kx];
                }
                *o = acc;
            }
        }
    }
}

/// General strided accumulation, one tap at a time.
#[allow(clippy::too_many_arguments)]
fn accumulate_strided(
    plane: &mut [f32],
    in_plane: &[f32],
    taps: &[f32],
    k: usize,
    stride: usize,
    oh: usize,
    ow: usize,
    ih: usize,
    iw: usize,
) {
    let pad = (k - 1) / 2;
    for ky in 0..k {
        for oy in 0..oh {
            let iy = (oy * stride + ky) as isize - pad as isize;
            if iy < 0 || iy >= ih as isize {
                continue;
            }
            let in_row = &in_plane[iy as usize * iw..iy as usize * iw + iw];
            let out_row = &mut plane[oy * ow..oy * ow + ow];
            for kx in 0..k {
                let w = taps[ky * k + kx];
                let dx = kx as isize - pad as isize;
                let ox0 = if dx < 0 {
                    ((-dx) as usize).div_ceil(stride)
                } else {
                    0
                };
                let span = iw as isize - 1 - dx;
                if span < 0 {
                    continue;
                }
                let ox1 = (span as usize / stride + 1).min(ow);
                for (ox, o) in out_row.iter_mut().enumerate().take(ox1).skip(ox0) {
                    let ix = (ox * stride) as isize + dx;
                    *o += w * in_row[ix as usize];
                }
            }
        }
    }
}

/// Depthwise-separable block: a depthwise spatial convolution followed by a
/// 1x1 pointwise convolution.
pub fn dsconv_block(
    x: &TensorMap,
    depthwise: &ConvBlockParams,
    pointwise: &ConvBlockParams,
) -> Result<TensorMap> {
    if depthwise.groups != depthwise.in_channels {
        return Err(Error::InvalidParameter(format!(
            "depthwise stage must have groups = in_channels, got groups {} for {} channels",
            depthwise.groups, depthwise.in_channels
        )));
    }
    if pointwise.kernel != 1 {
        return Err(Error::InvalidParameter(format!(
            "pointwise stage must use a 1x1 kernel, got {}",
            pointwise.kernel
        )));
    }
    conv2d_block(&conv2d_block(x, depthwise)?, pointwise)
}
