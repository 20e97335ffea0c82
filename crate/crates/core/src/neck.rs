//! Cross-level feature fusion neck built on hypergraph computation.
//!
//! The pipeline has four stages: collect the selected pyramid levels onto a
//! shared grid and fuse them into one semantic point set; run correlation
//! learning over that point set (none, low-order graph, or high-order
//! hypergraph); scatter the result back alongside B3/B4/B5; and run a
//! progressive bottom-up fusion to produce the three output scales.

use crate::error::{Error, Result};
use crate::hypergraph::{
    build_epsilon_ball_hypergraph, graphconv_low_order, hyperconv, EpsilonBallParams, Hypergraph,
    Theta,
};
use crate::preset::ScalePreset;
use crate::tensor::{
    concat_channels, conv2d_block, from_vertices, resample, to_vertices, Activation,
    ConvBlockParams, FeatureMatrix, ResampleMode, TensorMap,
};

/// Strides of the five pyramid levels relative to the input image.
pub const LEVEL_STRIDES: [usize; 5] = [2, 4, 8, 16, 32];

/// Default grid on which the semantic point set lives.
pub const DEFAULT_TARGET_STRIDE: usize = 16;

/// One of the five backbone levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Level {
    B1,
    B2,
    B3,
    B4,
    B5,
}

impl Level {
    pub const ALL: [Level; 5] = [Level::B1, Level::B2, Level::B3, Level::B4, Level::B5];

    pub fn index(self) -> usize {
        match self {
            Level::B1 => 0,
            Level::B2 => 1,
            Level::B3 => 2,
            Level::B4 => 3,
            Level::B5 => 4,
        }
    }

    pub fn stride(self) -> usize {
        LEVEL_STRIDES[self.index()]
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_uppercase().as_str() {
            "B1" => Ok(Level::B1),
            "B2" => Ok(Level::B2),
            "B3" => Ok(Level::B3),
            "B4" => Ok(Level::B4),
            "B5" => Ok(Level::B5),
            other => Err(Error::InvalidParameter(format!(
                "unknown pyramid level: {other}"
            ))),
        }
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "B{}", self.index() + 1)
    }
}

/// The five backbone stage outputs B1..B5 at strides 2/4/8/16/32.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePyramid {
    levels: Vec<TensorMap>,
}

impl FeaturePyramid {
    pub fn new(
        b1: TensorMap,
        b2: TensorMap,
        b3: TensorMap,
        b4: TensorMap,
        b5: TensorMap,
    ) -> Result<Self> {
        let levels = vec![b1, b2, b3, b4, b5];
        let batch = levels[0].batch();
        for i in 0..4 {
            if levels[i + 1].batch() != batch {
                return Err(Error::ShapeMismatch(
                    "pyramid levels disagree on batch size".into(),
                ));
            }
            if levels[i].height() != 2 * levels[i + 1].height()
                || levels[i].width() != 2 * levels[i + 1].width()
            {
                return Err(Error::ShapeMismatch(format!(
                    "level B{} ({}x{}) must halve B{} ({}x{})",
                    i + 2,
                    levels[i + 1].height(),
                    levels[i + 1].width(),
                    i + 1,
                    levels[i].height(),
                    levels[i].width()
                )));
            }
        }
        Ok(Self { levels })
    }

    /// Random pyramid with the preset's channel widths, for tests and
    /// benchmarks. `input_h`/`input_w` must be divisible by 32.
    pub fn seeded<R: rand::Rng>(
        preset: ScalePreset,
        batch: usize,
        input_h: usize,
        input_w: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if !input_h.is_multiple_of(32) || !input_w.is_multiple_of(32) {
            return Err(Error::InvalidParameter(
                "pyramid input size must be divisible by 32".into(),
            ));
        }
        let widths = preset.channel_widths();
        let mut levels = Vec::with_capacity(5);
        for (i, &c) in widths.iter().enumerate() {
            let stride = LEVEL_STRIDES[i];
            levels.push(crate::init::random_map(
                batch,
                c,
                input_h / stride,
                input_w / stride,
                -1.0,
                1.0,
                rng,
            )?);
        }
        let mut it = levels.into_iter();
        Self::new(
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
        )
    }

    pub fn level(&self, index: usize) -> &TensorMap {
        &self.levels[index]
    }

    pub fn get(&self, level: Level) -> &TensorMap {
        &self.levels[level.index()]
    }

    pub fn batch(&self) -> usize {
        self.levels[0].batch()
    }

    /// Input image size implied by B1's stride-2 geometry.
    pub fn input_size(&self) -> (usize, usize) {
        (self.levels[0].height() * 2, self.levels[0].width() * 2)
    }

    /// Single-image slice of every level.
    pub fn image(&self, b: usize) -> Result<Self> {
        let sliced: Result<Vec<TensorMap>> = self.levels.iter().map(|l| l.image(b)).collect();
        let mut it = sliced?.into_iter();
        Self::new(
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
        )
    }
}

/// Correlation-learning mode of the semantic stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelationMode {
    /// Pass the point set through unchanged.
    None,
    /// Classic symmetric-normalised graph convolution on the epsilon graph.
    LowOrder,
    /// Epsilon-ball hypergraph convolution.
    HighOrder,
}

impl CorrelationMode {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(CorrelationMode::None),
            "low_order" | "low" => Ok(CorrelationMode::LowOrder),
            "high_order" | "high" => Ok(CorrelationMode::HighOrder),
            other => Err(Error::InvalidParameter(format!("unknown mode: {other}"))),
        }
    }
}

impl std::fmt::Display for CorrelationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            CorrelationMode::None => "none",
            CorrelationMode::LowOrder => "low_order",
            CorrelationMode::HighOrder => "high_order",
        };
        f.write_str(s)
    }
}

/// How vertices are pooled before structure construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pooling {
    /// One structure per image over that image's vertices only.
    PerImage,
    /// One structure over the vertices of the whole batch.
    CrossBatch,
}

impl Pooling {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "per_image" => Ok(Pooling::PerImage),
            "cross_batch" => Ok(Pooling::CrossBatch),
            other => Err(Error::InvalidParameter(format!("unknown pooling: {other}"))),
        }
    }
}

impl std::fmt::Display for Pooling {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Pooling::PerImage => "per_image",
            Pooling::CrossBatch => "cross_batch",
        })
    }
}

/// Scale-dependent neck parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct NeckConfig {
    pub collecting_set: Vec<Level>,
    pub target_stride: usize,
    pub epsilon: f64,
    pub hyper_channels: usize,
    pub mode: CorrelationMode,
    pub pooling: Pooling,
}

impl NeckConfig {
    /// Preset defaults: all five levels, stride-16 grid, the preset's
    /// threshold and channel count, high-order mode, per-image pooling.
    pub fn for_scale(preset: ScalePreset) -> Self {
        Self {
            collecting_set: Level::ALL.to_vec(),
            target_stride: DEFAULT_TARGET_STRIDE,
            epsilon: preset.epsilon(),
            hyper_channels: preset.hyper_channels(),
            mode: CorrelationMode::HighOrder,
            pooling: Pooling::PerImage,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.collecting_set.is_empty() {
            return Err(Error::InvalidParameter(
                "collecting set must be non-empty".into(),
            ));
        }
        let mut sorted = self.collecting_set.clone();
        sorted.sort();
        sorted.dedup();
        if sorted != self.collecting_set {
            return Err(Error::InvalidParameter(
                "collecting set must be sorted and duplicate-free".into(),
            ));
        }
        if self.hyper_channels == 0 {
            return Err(Error::InvalidParameter(
                "hyper_channels must be >= 1".into(),
            ));
        }
        if self.target_stride == 0 {
            return Err(Error::InvalidParameter("target_stride must be >= 1".into()));
        }
        if !self.epsilon.is_finite() || self.epsilon < 0.0 {
            return Err(Error::InvalidParameter(
                "epsilon must be finite and >= 0".into(),
            ));
        }
        Ok(())
    }

    /// Applies one `key=value` override (the same keys the config file
    /// uses): `mode`, `epsilon`, `target_stride`, `collecting_set`,
    /// `pooling`.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mode" => self.mode = CorrelationMode::parse(value)?,
            "epsilon" => {
                self.epsilon = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad epsilon: {value}")))?
            }
            "target_stride" => {
                self.target_stride = value
                    .trim()
                    .parse()
                    .map_err(|_| Error::InvalidParameter(format!("bad target_stride: {value}")))?
            }
            "collecting_set" => {
                let levels: Result<Vec<Level>> = value.split(',').map(Level::parse).collect();
                self.collecting_set = levels?;
            }
            "pooling" => self.pooling = Pooling::parse(value)?,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown config key: {other}"
                )))
            }
        }
        Ok(())
    }

    /// Resolves a parsed `key=value` list into a scale plus config. A
    /// `scale` entry seeds the defaults; remaining keys override them.
    pub fn from_kv(
        pairs: &[(String, String)],
        default_scale: ScalePreset,
    ) -> Result<(ScalePreset, NeckConfig)> {
        let scale = match pairs.iter().rev().find(|(k, _)| k == "scale") {
            Some((_, v)) => ScalePreset::parse(v)?,
            None => default_scale,
        };
        let mut config = NeckConfig::for_scale(scale);
        for (key, value) in pairs {
            if key == "scale" {
                continue;
            }
            config.apply_kv(key, value)?;
        }
        config.validate()?;
        Ok((scale, config))
    }

    /// Sum of the selected levels' channel widths for a preset.
    pub fn collected_width(&self, widths: [usize; 5]) -> usize {
        self.collecting_set.iter().map(|l| widths[l.index()]).sum()
    }
}

/// One bottom-up step: stride-2 downsample of the finer output, then a 1x1
/// fuse of the concatenation with the lateral input.
#[derive(Debug, Clone, PartialEq)]
pub struct BottomUpStep {
    pub down: ConvBlockParams,
    pub fuse: ConvBlockParams,
}

/// All trainable state of the neck.
#[derive(Debug, Clone, PartialEq)]
pub struct NeckWeights {
    fuse: ConvBlockParams,
    theta: Theta,
    scatter: Vec<ConvBlockParams>,
    bottom_up: Vec<BottomUpStep>,
}

impl NeckWeights {
    pub fn new(
        fuse: ConvBlockParams,
        theta: Theta,
        scatter: Vec<ConvBlockParams>,
        bottom_up: Vec<BottomUpStep>,
    ) -> Result<Self> {
        if theta.in_channels() != theta.out_channels() {
            return Err(Error::ShapeMismatch("neck theta must be square".into()));
        }
        if fuse.out_channels() != theta.in_channels() {
            return Err(Error::ShapeMismatch(format!(
                "fuse conv emits {} channels, theta expects {}",
                fuse.out_channels(),
                theta.in_channels()
            )));
        }
        if scatter.len() != 3 {
            return Err(Error::ShapeMismatch(
                "scatter expects exactly three 1x1 fusions".into(),
            ));
        }
        if bottom_up.len() != 2 {
            return Err(Error::ShapeMismatch(
                "bottom-up expects exactly two steps".into(),
            ));
        }
        Ok(Self {
            fuse,
            theta,
            scatter,
            bottom_up,
        })
    }

    /// Fan-in uniform init for a config and preset widths.
    pub fn seeded<R: rand::Rng>(
        config: &NeckConfig,
        widths: [usize; 5],
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let act = Activation::Silu;
        let collected = config.collected_width(widths);
        let fuse = ConvBlockParams::seeded(collected, config.hyper_channels, 1, 1, 1, act, rng)?;
        let theta = Theta::seeded(config.hyper_channels, rng);
        let scatter = [2usize, 3, 4]
            .iter()
            .map(|&i| {
                ConvBlockParams::seeded(
                    config.hyper_channels + widths[i],
                    widths[i],
                    1,
                    1,
                    1,
                    act,
                    rng,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let bottom_up = (0..2)
            .map(|step| {
                let (fine, coarse) = (widths[2 + step], widths[3 + step]);
                Ok(BottomUpStep {
                    down: ConvBlockParams::seeded(fine, fine, 3, 2, 1, act, rng)?,
                    fuse: ConvBlockParams::seeded(fine + coarse, coarse, 1, 1, 1, act, rng)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(fuse, theta, scatter, bottom_up)
    }

    pub fn fuse(&self) -> &ConvBlockParams {
        &self.fuse
    }

    pub fn theta(&self) -> &Theta {
        &self.theta
    }

    pub fn scatter(&self) -> &[ConvBlockParams] {
        &self.scatter
    }

    pub fn bottom_up(&self) -> &[BottomUpStep] {
        &self.bottom_up
    }

    pub(crate) fn parts_mut(
        &mut self,
    ) -> (
        &mut ConvBlockParams,
        &mut Theta,
        &mut [ConvBlockParams],
        &mut [BottomUpStep],
    ) {
        (
            &mut self.fuse,
            &mut self.theta,
            &mut self.scatter,
            &mut self.bottom_up,
        )
    }
}

/// The three neck outputs at strides 8/16/32.
#[derive(Debug, Clone, PartialEq)]
pub struct NeckOutputs {
    pub n3: TensorMap,
    pub n4: TensorMap,
    pub n5: TensorMap,
}

/// Intermediates of one forward pass, for inspection and export.
#[derive(Debug, Clone)]
pub struct NeckTrace {
    /// Fused semantic point set before correlation learning.
    pub collected: FeatureMatrix,
    /// Point set after correlation learning (equals `collected` for mode
    /// `none`).
    pub propagated: FeatureMatrix,
    /// Constructed hypergraphs (high-order mode only; one per pooling
    /// group).
    pub hypergraphs: Vec<Hypergraph>,
    pub outputs: NeckOutputs,
}

/// Configured neck instance.
#[derive(Debug, Clone)]
pub struct Neck {
    config: NeckConfig,
    weights: NeckWeights,
}

fn resample_to(x: &TensorMap, target_h: usize, target_w: usize) -> Result<TensorMap> {
    if x.height() == target_h && x.width() == target_w {
        Ok(x.clone())
    } else if target_h >= x.height() {
        resample(x, target_h, target_w, ResampleMode::NearestUp)
    } else {
        resample(x, target_h, target_w, ResampleMode::AvgDown)
    }
}

impl Neck {
    pub fn new(config: NeckConfig, weights: NeckWeights) -> Result<Self> {
        config.validate()?;
        if weights.fuse.out_channels() != config.hyper_channels {
            return Err(Error::ShapeMismatch(format!(
                "fuse conv emits {} channels, config expects {}",
                weights.fuse.out_channels(),
                config.hyper_channels
            )));
        }
        Ok(Self { config, weights })
    }

    pub fn seeded<R: rand::Rng>(
        config: NeckConfig,
        preset: ScalePreset,
        rng: &mut R,
    ) -> Result<Self> {
        let weights = NeckWeights::seeded(&config, preset.channel_widths(), rng)?;
        Self::new(config, weights)
    }

    pub fn config(&self) -> &NeckConfig {
        &self.config
    }

    pub fn weights(&self) -> &NeckWeights {
        &self.weights
    }

    /// Resamples every selected level onto the target grid, concatenates
    /// them channel-wise (B1..B5 order), fuses to `hyper_channels` with the
    /// 1x1 conv and flattens to a vertex matrix with grid provenance.
    pub fn semantic_collect(&self, pyramid: &FeaturePyramid) -> Result<FeatureMatrix> {
        let (in_h, in_w) = pyramid.input_size();
        let ts = self.config.target_stride;
        if in_h % ts != 0 || in_w % ts != 0 {
            return Err(Error::InvalidParameter(format!(
                "input {in_h}x{in_w} is not divisible by target stride {ts}"
            )));
        }
        let (gh, gw) = (in_h / ts, in_w / ts);
        let mut selected = Vec::with_capacity(self.config.collecting_set.len());
        for level in &self.config.collecting_set {
            selected.push(resample_to(pyramid.get(*level), gh, gw)?);
        }
        let mixed = concat_channels(&selected)?;
        if mixed.channels() != self.weights.fuse.in_channels() {
            return Err(Error::ShapeMismatch(format!(
                "collected width {} does not match fuse conv input {}",
                mixed.channels(),
                self.weights.fuse.in_channels()
            )));
        }
        let fused = conv2d_block(&mixed, &self.weights.fuse)?;
        Ok(to_vertices(&fused))
    }

    /// Correlation learning over the semantic point set. Mode `none`
    /// returns the input unchanged; the other modes build their structure
    /// per image or over the pooled batch and run the matching convolution.
    /// Returns the propagated features and any constructed hypergraphs.
    pub fn hypergraph_compute(
        &self,
        mixed: &FeatureMatrix,
    ) -> Result<(FeatureMatrix, Vec<Hypergraph>)> {
        if mixed.channels() != self.config.hyper_channels {
            return Err(Error::ShapeMismatch(format!(
                "point set has {} channels, config expects {}",
                mixed.channels(),
                self.config.hyper_channels
            )));
        }
        if self.config.mode == CorrelationMode::None {
            return Ok((mixed.clone(), Vec::new()));
        }
        let groups: Vec<(usize, usize)> = match self.config.pooling {
            Pooling::CrossBatch => vec![(0, mixed.vertices())],
            Pooling::PerImage => {
                let meta = mixed.grid_meta().ok_or_else(|| {
                    Error::InvalidParameter("per_image pooling requires grid provenance".into())
                })?;
                let per = meta.height * meta.width;
                (0..meta.batch).map(|b| (b * per, (b + 1) * per)).collect()
            }
        };
        let params = EpsilonBallParams::new(self.config.epsilon)?;
        let mut out = mixed.clone();
        let mut hypergraphs = Vec::new();
        for &(start, end) in &groups {
            let part = if groups.len() == 1 && start == 0 && end == mixed.vertices() {
                mixed.clone()
            } else {
                mixed.slice_rows(start, end)?
            };
            let propagated = match self.config.mode {
                CorrelationMode::HighOrder => {
                    let graph = build_epsilon_ball_hypergraph(&part, &params)?;
                    let result = hyperconv(&part, &graph, &self.weights.theta)?;
                    hypergraphs.push(graph);
                    result
                }
                CorrelationMode::LowOrder => {
                    graphconv_low_order(&part, &params, &self.weights.theta)?
                }
                CorrelationMode::None => unreachable!(),
            };
            out.copy_rows_from(start, &propagated);
        }
        Ok((out, hypergraphs))
    }

    /// Reshapes the propagated point set to its grid, resamples it to
    /// strides 8/16/32, concatenates with B3/B4/B5 and fuses back to each
    /// level's width.
    pub fn semantic_scatter(
        &self,
        propagated: &FeatureMatrix,
        pyramid: &FeaturePyramid,
    ) -> Result<(TensorMap, TensorMap, TensorMap)> {
        if propagated.grid_meta().is_none() {
            return Err(Error::InvalidParameter(
                "semantic scatter requires grid provenance".into(),
            ));
        }
        let grid = from_vertices(propagated)?;
        let mut scattered = Vec::with_capacity(3);
        for (i, level) in [Level::B3, Level::B4, Level::B5].iter().enumerate() {
            let lateral = pyramid.get(*level);
            let aligned = resample_to(&grid, lateral.height(), lateral.width())?;
            let cat = concat_channels(&[aligned, lateral.clone()])?;
            scattered.push(conv2d_block(&cat, &self.weights.scatter[i])?);
        }
        let mut it = scattered.into_iter();
        Ok((it.next().unwrap(), it.next().unwrap(), it.next().unwrap()))
    }

    /// Progressive bottom-up fusion: `N3 = S3`, then each coarser output
    /// fuses the downsampled finer output with its lateral input.
    pub fn bottom_up(&self, s3: TensorMap, s4: TensorMap, s5: TensorMap) -> Result<NeckOutputs> {
        let n3 = s3;
        let d3 = conv2d_block(&n3, &self.weights.bottom_up[0].down)?;
        let n4 = conv2d_block(
            &concat_channels(&[d3, s4])?,
            &self.weights.bottom_up[0].fuse,
        )?;
        let d4 = conv2d_block(&n4, &self.weights.bottom_up[1].down)?;
        let n5 = conv2d_block(
            &concat_channels(&[d4, s5])?,
            &self.weights.bottom_up[1].fuse,
        )?;
        Ok(NeckOutputs { n3, n4, n5 })
    }

    /// Full collect / compute / scatter / bottom-up composition.
    pub fn forward(&self, pyramid: &FeaturePyramid) -> Result<NeckOutputs> {
        Ok(self.forward_trace(pyramid)?.outputs)
    }

    /// As [`Neck::forward`], also returning the intermediates.
    pub fn forward_trace(&self, pyramid: &FeaturePyramid) -> Result<NeckTrace> {
        let collected = self.semantic_collect(pyramid)?;
        let (propagated, hypergraphs) = self.hypergraph_compute(&collected)?;
        let (s3, s4, s5) = self.semantic_scatter(&propagated, pyramid)?;
        let outputs = self.bottom_up(s3, s4, s5)?;
        Ok(NeckTrace {
            collected,
            propagated,
            hypergraphs,
            outputs,
        })
    }
}
