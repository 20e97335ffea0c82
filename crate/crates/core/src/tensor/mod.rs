//! Dense tensor containers and the reshaping operations the rest of the
//! crate composes: channel concat/split and the grid-to-vertex flattening
//! used to move between spatial maps and point sets.
//!
//! Layout is fixed everywhere: `TensorMap` is row-major `(batch, channel,
//! row, column)` with the column index fastest; `FeatureMatrix` is row-major
//! `(vertex, channel)` with vertex order `(batch, row, column)` lexicographic.

mod conv;
mod resample;

pub use conv::{conv2d_block, dsconv_block, Activation, ConvBlockParams};
pub use resample::{resample, ResampleMode};

use crate::error::{Error, Result};
use num_traits::Float;

/// Scalar element type for feature matrices. `f32` drives the forward
/// pipeline; `f64` backs the gradient verification path.
pub trait Scalar: Float + Send + Sync + std::fmt::Debug + 'static {
    fn as_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
}

/// Dense 4-axis feature map `(batch, channels, height, width)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorMap {
    batch: usize,
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl TensorMap {
    /// Wraps row-major data; every dimension must be at least 1 and the
    /// data length must equal the dimension product.
    pub fn new(
        batch: usize,
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        if batch == 0 || channels == 0 || height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "tensor dimensions must be >= 1, got {batch}x{channels}x{height}x{width}"
            )));
        }
        let expect = batch * channels * height * width;
        if data.len() != expect {
            return Err(Error::ShapeMismatch(format!(
                "tensor data length {} does not match {batch}x{channels}x{height}x{width} = {expect}",
                data.len()
            )));
        }
        Ok(Self {
            batch,
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(batch: usize, channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::new(
            batch,
            channels,
            height,
            width,
            vec![0.0; batch * channels * height * width],
        )
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(batch, channels, height, width)`.
    pub fn shape(&self) -> (usize, usize, usize, usize) {
        (self.batch, self.channels, self.height, self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn at(&self, b: usize, c: usize, y: usize, x: usize) -> f32 {
        self.data[((b * self.channels + c) * self.height + y) * self.width + x]
    }

    /// One `(batch, channel)` plane as a contiguous slice.
    pub(crate) fn plane(&self, b: usize, c: usize) -> &[f32] {
        let len = self.height * self.width;
        let start = (b * self.channels + c) * len;
        &self.data[start..start + len]
    }

    /// Copies out a single image as a batch-1 map.
    pub fn image(&self, b: usize) -> Result<Self> {
        if b >= self.batch {
            return Err(Error::InvalidParameter(format!(
                "image index {b} out of range for batch {}",
                self.batch
            )));
        }
        let len = self.channels * self.height * self.width;
        let data = self.data[b * len..(b + 1) * len].to_vec();
        Self::new(1, self.channels, self.height, self.width, data)
    }
}

/// Grid provenance of a flattened feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridMeta {
    pub batch: usize,
    pub height: usize,
    pub width: usize,
}

/// `V x C` vertex feature table, the point set fed to hypergraph
/// computation. Optionally remembers the grid it was flattened from.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T: Scalar = f32> {
    vertices: usize,
    channels: usize,
    data: Vec<T>,
    grid_meta: Option<GridMeta>,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn new(vertices: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if vertices == 0 || channels == 0 {
            return Err(Error::InvalidParameter(format!(
                "feature matrix dimensions must be >= 1, got {vertices}x{channels}"
            )));
        }
        if data.len() != vertices * channels {
            return Err(Error::ShapeMismatch(format!(
                "feature data length {} does not match {vertices}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            vertices,
            channels,
            data,
            grid_meta: None,
        })
    }

    pub fn zeros(vertices: usize, channels: usize) -> Result<Self> {
        Self::new(vertices, channels, vec![T::zero(); vertices * channels])
    }

    /// Attaches grid provenance; the vertex count must equal
    /// `batch * height * width`.
    pub fn with_grid_meta(mut self, meta: GridMeta) -> Result<Self> {
        if meta.batch * meta.height * meta.width != self.vertices {
            return Err(Error::ShapeMismatch(format!(
                "grid {}x{}x{} does not flatten to {} vertices",
                meta.batch, meta.height, meta.width, self.vertices
            )));
        }
        self.grid_meta = Some(meta);
        Ok(self)
    }

    pub fn vertices(&self) -> usize {
        self.vertices
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn grid_meta(&self) -> Option<GridMeta> {
        self.grid_meta
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, v: usize) -> &[T] {
        &self.data[v * self.channels..(v + 1) * self.channels]
    }

    /// Copies a contiguous vertex range into a new matrix (grid provenance
    /// does not survive slicing).
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.vertices {
            return Err(Error::InvalidParameter(format!(
                "row range {start}..{end} out of bounds for {} vertices",
                self.vertices
            )));
        }
        Self::new(
            end - start,
            self.channels,
            self.data[start * self.channels..end * self.channels].to_vec(),
        )
    }

    pub(crate) fn copy_rows_from(&mut self, start: usize, other: &Self) {
        let dst = &mut self.data[start * self.channels..(start + other.vertices) * self.channels];
        dst.copy_from_slice(&other.data);
    }

    pub fn has_finite_entries(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl FeatureMatrix<f64> {
    /// Widens an `f32` matrix for 64-bit verification arithmetic.
    pub fn widened(src: &FeatureMatrix<f32>) -> Self {
        let data = src.data().iter().map(|&v| v as f64).collect();
        Self {
            vertices: src.vertices,
            channels: src.channels,
            data,
            grid_meta: src.grid_meta,
        }
    }
}

/// Concatenates maps along the channel axis, preserving input order.
pub fn concat_channels(xs: &[TensorMap]) -> Result<TensorMap> {
    let first = xs.first().ok_or_else(|| {
        Error::InvalidParameter("concat_channels needs at least one input".into())
    })?;
    let (b, h, w) = (first.batch, first.height, first.width);
    let mut channels = 0;
    for x in xs {
        if x.batch != b || x.height != h || x.width != w {
            return Err(Error::ShapeMismatch(format!(
                "concat_channels spatial mismatch: {}x{}x{} vs {}x{}x{}",
                x.batch, x.height, x.width, b, h, w
            )));
        }
        channels += x.channels;
    }
    let plane = h * w;
    let mut data = Vec::with_capacity(b * channels * plane);
    for bi in 0..b {
        for x in xs {
            for c in 0..x.channels {
                data.extend_from_slice(x.plane(bi, c));
            }
        }
    }
    TensorMap::new(b, channels, h, w, data)
}

/// Splits a map into contiguous channel slices of the given sizes.
pub fn split_channels(x: &TensorMap, sizes: &[usize]) -> Result<Vec<TensorMap>> {
    let total: usize = sizes.iter().sum();
    if total != x.channels {
        return Err(Error::ShapeMismatch(format!(
            "split sizes sum to {total}, map has {} channels",
            x.channels
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::InvalidParameter("split sizes must be >= 1".into()));
    }
    let plane = x.height * x.width;
    let mut out = Vec::with_capacity(sizes.len());
    let mut offset = 0;
    for &size in sizes {
        let mut data = Vec::with_capacity(x.batch * size * plane);
        for b in 0..x.batch {
            for c in offset..offset + size {
                data.extend_from_slice(x.plane(b, c));
            }
        }
        out.push(TensorMap::new(x.batch, size, x.height, x.width, data)?);
        offset += size;
    }
    Ok(out)
}

/// Flattens a map into a `V x C` matrix with vertex order
/// `(batch, row, column)` lexicographic. Grid provenance is retained so the
/// flattening can be inverted.
pub fn to_vertices(x: &TensorMap) -> FeatureMatrix<f32> {
    let (b, c, h, w) = x.shape();
    let mut data = vec![0.0f32; b * h * w * c];
    for bi in 0..b {
        for ci in 0..c {
            let plane = x.plane(bi, ci);
            for (p, &value) in plane.iter().enumerate() {
                data[(bi * h * w + p) * c + ci] = value;
            }
        }
    }
    FeatureMatrix::new(b * h * w, c, data)
        .and_then(|m| {
            m.with_grid_meta(GridMeta {
                batch: b,
                height: h,
                width: w,
            })
        })
        .expect("dimensions are consistent by construction")
}

/// Inverts [`to_vertices`]; requires the matrix to carry grid provenance.
pub fn from_vertices(m: &FeatureMatrix<f32>) -> Result<TensorMap> {
    let meta = m
        .grid_meta()
        .ok_or_else(|| Error::InvalidParameter("from_vertices requires grid metadata".into()))?;
    let (b, h, w) = (meta.batch, meta.height, meta.width);
    let c = m.channels();
    let plane = h * w;
    let mut data = vec![0.0f32; b * c * plane];
    for bi in 0..b {
        for p in 0..plane {
            let row = m.row(bi * plane + p);
            for (ci, &value) in row.iter().enumerate() {
                data[(bi * c + ci) * plane + p] = value;
            }
        }
    }
    TensorMap::new(b, c, h, w, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(b: usize, c: usize, h: usize, w: usize) -> TensorMap {
        let data = (0..b * c * h * w).map(|i| i as f32 * 0.25 - 3.0).collect();
        TensorMap::new(b, c, h, w, data).unwrap()
    }

    #[test]
    fn rejects_bad_dimensions_and_lengths() {
        assert!(TensorMap::new(0, 1, 1, 1, vec![]).is_err());
        assert!(TensorMap::new(1, 1, 2, 2, vec![0.0; 3]).is_err());
        assert!(FeatureMatrix::<f32>::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn vertex_layout_matches_definition() {
        // 1x2x2x2 map -> 4x2 matrix, row 0 = pixel (0,0).
        let x = TensorMap::new(
            1,
            2,
            2,
            2,
            vec![
                0.0, 1.0, 2.0, 3.0, // channel 0
                10.0, 11.0, 12.0, 13.0, // channel 1
            ],
        )
        .unwrap();
        let m = to_vertices(&x);
        assert_eq!(m.vertices(), 4);
        assert_eq!(m.channels(), 2);
        assert_eq!(m.row(0), &[0.0, 10.0]);
        assert_eq!(m.row(1), &[1.0, 11.0]);
        assert_eq!(m.row(3), &[3.0, 13.0]);
    }

    #[test]
    fn vertex_rows_are_grouped_by_image() {
        let x = ramp(2, 3, 2, 2);
        let m = to_vertices(&x);
        let hw = 4;
        for p in 0..hw {
            assert_eq!(m.row(p)[0], x.at(0, 0, p / 2, p % 2));
            assert_eq!(m.row(hw + p)[0], x.at(1, 0, p / 2, p % 2));
        }
    }

    #[test]
    fn vertex_round_trip_is_bitwise() {
        let x = ramp(2, 3, 4, 5);
        let back = from_vertices(&to_vertices(&x)).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn from_vertices_requires_grid_meta() {
        let m = FeatureMatrix::new(4, 2, vec![0.0; 8]).unwrap();
        assert!(matches!(from_vertices(&m), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn concat_preserves_order_and_sums_channels() {
        let widths = [32usize, 64, 128, 256, 512];
        let maps: Vec<TensorMap> = widths.iter().map(|&c| ramp(1, c, 2, 2)).collect();
        let cat = concat_channels(&maps).unwrap();
        assert_eq!(cat.channels(), 992);
        assert_eq!(cat.plane(0, 0), maps[0].plane(0, 0));
        assert_eq!(cat.plane(0, 32), maps[1].plane(0, 0));
        assert_eq!(cat.plane(0, 32 + 64 + 128 + 256), maps[4].plane(0, 0));
    }

    #[test]
    fn concat_single_input_is_identity() {
        let x = ramp(1, 3, 2, 2);
        assert_eq!(concat_channels(std::slice::from_ref(&x)).unwrap(), x);
    }

    #[test]
    fn concat_rejects_spatial_mismatch() {
        let a = ramp(1, 2, 2, 2);
        let b = ramp(1, 2, 2, 3);
        assert!(concat_channels(&[a, b]).is_err());
    }

    #[test]
    fn split_then_concat_round_trips() {
        let x = ramp(2, 8, 3, 3);
        let parts = split_channels(&x, &[4, 4]).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0].channels(), 4);
        assert_eq!(concat_channels(&parts).unwrap(), x);

        let whole = split_channels(&x, &[8]).unwrap();
        assert_eq!(whole[0], x);
    }

    #[test]
    fn split_rejects_size_mismatch() {
        let x = ramp(1, 4, 2, 2);
        assert!(split_channels(&x, &[3, 2]).is_err());
    }

    #[test]
    fn image_slice_matches_batch_entry() {
        let x = ramp(3, 2, 2, 2);
        let one = x.image(1).unwrap();
        assert_eq!(one.batch(), 1);
        assert_eq!(one.at(0, 1, 1, 0), x.at(1, 1, 1, 0));
        assert!(x.image(3).is_err());
    }
}
