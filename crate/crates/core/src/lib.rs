//! Hypergraph-computation core for cross-level visual feature fusion.
//!
//! The crate provides, bottom up:
//!
//! - [`tensor`]: dense `(batch, channel, row, column)` maps, convolution
//!   blocks, integer-ratio resampling, channel concat/split and
//!   grid-to-vertex flattening;
//! - [`hypergraph`]: epsilon-ball hypergraph construction over vertex
//!   feature matrices, degree bookkeeping, residual degree-normalised
//!   hypergraph convolution (sparse matrix form plus its literal two-stage
//!   reference), the analytic parameter gradient, and the classic
//!   normalised graph convolution used for low-order comparison;
//! - [`backbone`]: a five-stage toy backbone of mixed-aggregation blocks
//!   producing a feature pyramid at strides 2/4/8/16/32;
//! - [`neck`]: the collect / hyper-compute / scatter / bottom-up fusion
//!   pipeline turning the pyramid into three output scales;
//! - [`io`]: the `HYT1` tensor file format, `key=value` configs and weight
//!   directories;
//! - [`synth`], [`fitting`], [`checks`]: synthetic clustered data, the
//!   correlation-mode ablation, a gradient-descent demonstration for the
//!   mixing matrix, and the runnable invariant suite.
//!
//! Everything is deterministic: stochastic paths take explicit seeds and
//! per-element accumulation orders are fixed, so identical inputs give
//! bit-identical outputs.

pub mod backbone;
pub mod checks;
pub mod error;
pub mod fitting;
pub mod hypergraph;
pub mod init;
pub mod io;
pub mod neck;
pub mod preset;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use hypergraph::{EpsilonBallParams, Hypergraph, Theta};
pub use neck::{CorrelationMode, FeaturePyramid, Neck, NeckConfig, NeckOutputs, Pooling};
pub use preset::ScalePreset;
pub use tensor::{FeatureMatrix, TensorMap};
