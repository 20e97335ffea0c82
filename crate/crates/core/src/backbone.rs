//! Five-stage toy backbone built from mixed-aggregation (MANet) blocks.
//!
//! Stage 1 is a single stride-2 convolution; stages 2..5 each downsample by
//! two and run one MANet block. The block splits a `2c`-wide trunk into a
//! 1x1 bypass branch, a depthwise-separable branch and a residual chain of
//! `n` two-convolution units, then fuses all `(4+n)` c-wide branches back to
//! `2c` with a 1x1 convolution.

use crate::error::{Error, Result};
use crate::neck::FeaturePyramid;
use crate::preset::ScalePreset;
use crate::tensor::{
    concat_channels, conv2d_block, dsconv_block, split_channels, Activation, ConvBlockParams,
    TensorMap,
};

/// Scale preset plus the derived per-stage geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BackboneConfig {
    preset: ScalePreset,
}

impl BackboneConfig {
    pub fn new(preset: ScalePreset) -> Self {
        Self { preset }
    }

    pub fn preset(&self) -> ScalePreset {
        self.preset
    }

    /// Channel widths of B1..B5.
    pub fn stage_widths(&self) -> [usize; 5] {
        self.preset.channel_widths()
    }

    /// Chain depths for stages 2..5.
    pub fn manet_depths(&self) -> [usize; 4] {
        self.preset.manet_depths()
    }

    /// Kernel sizes for stages 2..5.
    pub fn manet_kernels(&self) -> [usize; 4] {
        self.preset.manet_kernels()
    }
}

/// One `ConvNeck`-style unit of the residual chain: two same-width
/// convolutions; the surrounding block adds the unit's input back on.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualUnit {
    conv_a: ConvBlockParams,
    conv_b: ConvBlockParams,
}

impl ResidualUnit {
    pub fn new(conv_a: ConvBlockParams, conv_b: ConvBlockParams) -> Result<Self> {
        let c = conv_a.in_channels();
        if conv_a.out_channels() != c || conv_b.in_channels() != c || conv_b.out_channels() != c {
            return Err(Error::ShapeMismatch(
                "residual unit convolutions must preserve width".into(),
            ));
        }
        if conv_a.stride() != 1 || conv_b.stride() != 1 {
            return Err(Error::InvalidParameter(
                "residual unit convolutions must be stride 1".into(),
            ));
        }
        if conv_a.kernel() != conv_b.kernel() {
            return Err(Error::InvalidParameter(
                "residual unit convolutions must share a kernel size".into(),
            ));
        }
        Ok(Self { conv_a, conv_b })
    }

    pub fn conv_a(&self) -> &ConvBlockParams {
        &self.conv_a
    }

    pub fn conv_b(&self) -> &ConvBlockParams {
        &self.conv_b
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut ConvBlockParams, &mut ConvBlockParams) {
        (&mut self.conv_a, &mut self.conv_b)
    }

    fn apply(&self, x: &TensorMap) -> Result<TensorMap> {
        conv2d_block(&conv2d_block(x, &self.conv_a)?, &self.conv_b)
    }
}

/// Weights of one mixed-aggregation block.
#[derive(Debug, Clone, PartialEq)]
pub struct ManetParams {
    conv1: ConvBlockParams,
    conv2: ConvBlockParams,
    conv3: ConvBlockParams,
    ds_depthwise: ConvBlockParams,
    ds_pointwise: ConvBlockParams,
    chain: Vec<ResidualUnit>,
    conv_o: ConvBlockParams,
}

impl ManetParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        conv1: ConvBlockParams,
        conv2: ConvBlockParams,
        conv3: ConvBlockParams,
        ds_depthwise: ConvBlockParams,
        ds_pointwise: ConvBlockParams,
        chain: Vec<ResidualUnit>,
        conv_o: ConvBlockParams,
    ) -> Result<Self> {
        let two_c = conv1.out_channels();
        if !two_c.is_multiple_of(2) {
            return Err(Error::InvalidParameter(
                "trunk width must be even (2c)".into(),
            ));
        }
        let c = two_c / 2;
        let n = chain.len();
        let widths_ok = conv2.in_channels() == two_c
            && conv2.out_channels() == c
            && conv3.in_channels() == two_c
            && conv3.out_channels() == c
            && ds_depthwise.in_channels() == c
            && ds_depthwise.out_channels() == c
            && ds_depthwise.groups() == c
            && ds_pointwise.in_channels() == c
            && ds_pointwise.out_channels() == c
            && ds_pointwise.kernel() == 1
            && chain.iter().all(|u| u.conv_a.in_channels() == c)
            && conv_o.in_channels() == (4 + n) * c
            && conv_o.out_channels() == two_c;
        if !widths_ok {
            return Err(Error::ShapeMismatch(
                "mixed-aggregation branch widths are inconsistent".into(),
            ));
        }
        let one_by_one = conv1.kernel() == 1
            && conv2.kernel() == 1
            && conv3.kernel() == 1
            && conv_o.kernel() == 1;
        if !one_by_one {
            return Err(Error::InvalidParameter(
                "trunk, branch and fuse convolutions must be 1x1".into(),
            ));
        }
        let k = ds_depthwise.kernel();
        if chain.iter().any(|u| u.conv_a.kernel() != k) {
            return Err(Error::InvalidParameter(
                "chain kernel must match the depthwise kernel".into(),
            ));
        }
        Ok(Self {
            conv1,
            conv2,
            conv3,
            ds_depthwise,
            ds_pointwise,
            chain,
            conv_o,
        })
    }

    /// Fan-in uniform init for a block mapping `in_channels` to `2c`.
    pub fn seeded<R: rand::Rng>(
        in_channels: usize,
        c: usize,
        n: usize,
        k: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let act = Activation::Silu;
        let conv1 = ConvBlockParams::seeded(in_channels, 2 * c, 1, 1, 1, act, rng)?;
        let conv2 = ConvBlockParams::seeded(2 * c, c, 1, 1, 1, act, rng)?;
        let conv3 = ConvBlockParams::seeded(2 * c, c, 1, 1, 1, act, rng)?;
        let ds_depthwise = ConvBlockParams::seeded(c, c, k, 1, c, act, rng)?;
        let ds_pointwise = ConvBlockParams::seeded(c, c, 1, 1, 1, act, rng)?;
        let chain = (0..n)
            .map(|_| {
                ResidualUnit::new(
                    ConvBlockParams::seeded(c, c, k, 1, 1, act, rng)?,
                    ConvBlockParams::seeded(c, c, k, 1, 1, act, rng)?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let conv_o = ConvBlockParams::seeded((4 + n) * c, 2 * c, 1, 1, 1, act, rng)?;
        Self::new(
            conv1,
            conv2,
            conv3,
            ds_depthwise,
            ds_pointwise,
            chain,
            conv_o,
        )
    }

    pub fn in_channels(&self) -> usize {
        self.conv1.in_channels()
    }

    pub fn out_channels(&self) -> usize {
        self.conv_o.out_channels()
    }

    /// Branch width `c`.
    pub fn branch_channels(&self) -> usize {
        self.conv1.out_channels() / 2
    }

    pub fn depth(&self) -> usize {
        self.chain.len()
    }

    pub fn kernel(&self) -> usize {
        self.ds_depthwise.kernel()
    }

    pub fn conv_o(&self) -> &ConvBlockParams {
        &self.conv_o
    }

    pub(crate) fn parts_mut(
        &mut self,
    ) -> (
        &mut ConvBlockParams,
        &mut ConvBlockParams,
        &mut ConvBlockParams,
        &mut ConvBlockParams,
        &mut ConvBlockParams,
        &mut [ResidualUnit],
        &mut ConvBlockParams,
    ) {
        (
            &mut self.conv1,
            &mut self.conv2,
            &mut self.conv3,
            &mut self.ds_depthwise,
            &mut self.ds_pointwise,
            &mut self.chain,
            &mut self.conv_o,
        )
    }

    pub(crate) fn parts(
        &self,
    ) -> (
        &ConvBlockParams,
        &ConvBlockParams,
        &ConvBlockParams,
        &ConvBlockParams,
        &ConvBlockParams,
        &[ResidualUnit],
        &ConvBlockParams,
    ) {
        (
            &self.conv1,
            &self.conv2,
            &self.conv3,
            &self.ds_depthwise,
            &self.ds_pointwise,
            &self.chain,
            &self.conv_o,
        )
    }
}

fn add_maps(a: &TensorMap, b: &TensorMap) -> Result<TensorMap> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(
            "residual add requires matching shapes".into(),
        ));
    }
    let mut out = a.clone();
    for (o, v) in out.data_mut().iter_mut().zip(b.data()) {
        *o += *v;
    }
    Ok(out)
}

/// Applies one mixed-aggregation block: trunk to `2c`, bypass / depthwise /
/// split branches, `n` residual chain steps, concat of all `(4+n)` branches,
/// 1x1 fuse back to `2c`. Spatial size is preserved.
pub fn manet_block(x: &TensorMap, p: &ManetParams) -> Result<TensorMap> {
    if x.channels() != p.in_channels() {
        return Err(Error::ShapeMismatch(format!(
            "input has {} channels, block expects {}",
            x.channels(),
            p.in_channels()
        )));
    }
    let c = p.branch_channels();
    let x_mid = conv2d_block(x, &p.conv1)?;
    let x1 = conv2d_block(&x_mid, &p.conv2)?;
    let x2 = dsconv_block(
        &conv2d_block(&x_mid, &p.conv3)?,
        &p.ds_depthwise,
        &p.ds_pointwise,
    )?;
    let split = split_channels(&x_mid, &[c, c])?;
    let mut branches = vec![x1, x2];
    branches.extend(split);
    let mut prev = branches.last().unwrap().clone();
    for unit in &p.chain {
        let next = add_maps(&unit.apply(&prev)?, &prev)?;
        branches.push(next.clone());
        prev = next;
    }
    conv2d_block(&concat_channels(&branches)?, &p.conv_o)
}

/// Weights of one backbone stage: stride-2 entry convolution plus the
/// stage's mixed-aggregation block.
#[derive(Debug, Clone, PartialEq)]
pub struct StageWeights {
    pub down: ConvBlockParams,
    pub manet: ManetParams,
}

/// Full backbone weights: the stage-1 stem plus four block stages.
#[derive(Debug, Clone, PartialEq)]
pub struct BackboneWeights {
    config: BackboneConfig,
    stem: ConvBlockParams,
    stages: Vec<StageWeights>,
}

impl BackboneWeights {
    pub fn seeded<R: rand::Rng>(config: BackboneConfig, rng: &mut R) -> Result<Self> {
        let widths = config.stage_widths();
        let depths = config.manet_depths();
        let kernels = config.manet_kernels();
        let stem = ConvBlockParams::seeded(3, widths[0], 3, 2, 1, Activation::Silu, rng)?;
        let mut stages = Vec::with_capacity(4);
        for stage in 0..4 {
            let (w_in, w_out) = (widths[stage], widths[stage + 1]);
            let down = ConvBlockParams::seeded(w_in, w_out, 3, 2, 1, Activation::Silu, rng)?;
            let manet = ManetParams::seeded(w_out, w_out / 2, depths[stage], kernels[stage], rng)?;
            stages.push(StageWeights { down, manet });
        }
        Ok(Self {
            config,
            stem,
            stages,
        })
    }

    pub fn config(&self) -> BackboneConfig {
        self.config
    }

    pub fn stem(&self) -> &ConvBlockParams {
        &self.stem
    }

    pub fn stages(&self) -> &[StageWeights] {
        &self.stages
    }

    pub(crate) fn stem_mut(&mut self) -> &mut ConvBlockParams {
        &mut self.stem
    }

    pub(crate) fn stages_mut(&mut self) -> &mut [StageWeights] {
        &mut self.stages
    }
}

/// Runs the backbone over a 3-channel image whose sides are divisible
/// by 32, capturing B1..B5 at strides 2/4/8/16/32.
pub fn backbone_forward(image: &TensorMap, weights: &BackboneWeights) -> Result<FeaturePyramid> {
    if image.channels() != 3 {
        return Err(Error::ShapeMismatch(format!(
            "backbone expects 3 input channels, got {}",
            image.channels()
        )));
    }
    if !image.height().is_multiple_of(32) || !image.width().is_multiple_of(32) {
        return Err(Error::InvalidParameter(format!(
            "input size {}x{} must be divisible by 32",
            image.height(),
            image.width()
        )));
    }
    let b1 = conv2d_block(image, &weights.stem)?;
    let mut levels = Vec::with_capacity(5);
    let mut current = b1.clone();
    levels.push(b1);
    for stage in &weights.stages {
        current = manet_block(&conv2d_block(&current, &stage.down)?, &stage.manet)?;
        levels.push(current.clone());
    }
    let mut it = levels.into_iter();
    FeaturePyramid::new(
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
        it.next().unwrap(),
    )
}
