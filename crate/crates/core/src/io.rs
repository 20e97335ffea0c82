//! On-disk formats: the `HYT1` binary tensor format, `key=value` config
//! text, and weight directories (a manifest naming one `HYT1` file per
//! tensor).
//!
//! `HYT1` layout: bytes 0-3 magic ASCII `HYT1`; byte 4 dtype (0 = 32-bit
//! float); byte 5 rank; bytes 6-7 reserved zero; then `rank` little-endian
//! u32 dimensions; then the payload as little-endian IEEE-754 values,
//! row-major with the last dimension fastest.

use crate::backbone::BackboneWeights;
use crate::error::{Error, Result};
use crate::neck::NeckWeights;
use crate::tensor::{ConvBlockParams, FeatureMatrix, TensorMap};
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

const MAGIC: &[u8; 4] = b"HYT1";
const DTYPE_F32: u8 = 0;

/// A dimensioned block of `f32` values, the unit of tensor file I/O.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    dims: Vec<u32>,
    data: Vec<f32>,
}

impl RawTensor {
    pub fn new(dims: Vec<u32>, data: Vec<f32>) -> Result<Self> {
        let count = dims.iter().map(|&d| d as u64).product::<u64>();
        if count != data.len() as u64 {
            return Err(Error::ShapeMismatch(format!(
                "tensor data length {} does not match dims {dims:?}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn from_map(x: &TensorMap) -> Self {
        let (b, c, h, w) = x.shape();
        Self {
            dims: vec![b as u32, c as u32, h as u32, w as u32],
            data: x.data().to_vec(),
        }
    }

    pub fn to_map(&self) -> Result<TensorMap> {
        if self.dims.len() != 4 {
            return Err(Error::ShapeMismatch(format!(
                "expected rank 4 tensor, got rank {}",
                self.dims.len()
            )));
        }
        TensorMap::new(
            self.dims[0] as usize,
            self.dims[1] as usize,
            self.dims[2] as usize,
            self.dims[3] as usize,
            self.data.clone(),
        )
    }

    pub fn from_matrix(m: &FeatureMatrix) -> Self {
        Self {
            dims: vec![m.vertices() as u32, m.channels() as u32],
            data: m.data().to_vec(),
        }
    }

    pub fn to_matrix(&self) -> Result<FeatureMatrix> {
        if self.dims.len() != 2 {
            return Err(Error::ShapeMismatch(format!(
                "expected rank 2 tensor, got rank {}",
                self.dims.len()
            )));
        }
        FeatureMatrix::new(
            self.dims[0] as usize,
            self.dims[1] as usize,
            self.data.clone(),
        )
    }
}

pub fn tensor_to_bytes(t: &RawTensor) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + t.dims.len() * 4 + t.data.len() * 4);
    out.extend_from_slice(MAGIC);
    out.push(DTYPE_F32);
    out.push(t.dims.len() as u8);
    out.extend_from_slice(&[0u8, 0u8]);
    for &d in &t.dims {
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in &t.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn tensor_from_bytes(bytes: &[u8]) -> Result<RawTensor> {
    if bytes.len() < 8 {
        return Err(Error::Format("tensor file shorter than header".into()));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic, expected HYT1".into()));
    }
    if bytes[4] != DTYPE_F32 {
        return Err(Error::Format(format!("unsupported dtype {}", bytes[4])));
    }
    let rank = bytes[5] as usize;
    if bytes[6] != 0 || bytes[7] != 0 {
        return Err(Error::Format("reserved header bytes must be zero".into()));
    }
    let dims_end = 8 + rank * 4;
    if bytes.len() < dims_end {
        return Err(Error::Format(
            "tensor file truncated in dimension list".into(),
        ));
    }
    let dims: Vec<u32> = (0..rank)
        .map(|i| u32::from_le_bytes(bytes[8 + i * 4..12 + i * 4].try_into().unwrap()))
        .collect();
    let count = dims.iter().map(|&d| d as u64).product::<u64>();
    let want = dims_end as u64 + count * 4;
    if bytes.len() as u64 != want {
        return Err(Error::Format(format!(
            "tensor payload length {} does not match dims {dims:?}",
            bytes.len() - dims_end
        )));
    }
    let data: Vec<f32> = bytes[dims_end..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    RawTensor::new(dims, data)
}

pub fn write_tensor(path: &Path, t: &RawTensor) -> Result<()> {
    Ok(std::fs::write(path, tensor_to_bytes(t))?)
}

pub fn read_tensor(path: &Path) -> Result<RawTensor> {
    tensor_from_bytes(&std::fs::read(path)?)
}

/// Parses `key=value` lines; `#` lines and blank lines are skipped.
pub fn parse_kv_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("expected key=value, got: {line}")))?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// Writes one `HYT1` file per entry plus `manifest.txt` mapping
/// `name=file`.
pub fn save_tensor_dir(dir: &Path, entries: &[(String, RawTensor)]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut manifest = std::fs::File::create(dir.join("manifest.txt"))?;
    for (name, tensor) in entries {
        let file = format!("{name}.hyt");
        write_tensor(&dir.join(&file), tensor)?;
        writeln!(manifest, "{name}={file}")?;
    }
    Ok(())
}

/// Loads every tensor named by `manifest.txt`, in manifest order.
pub fn load_tensor_dir(dir: &Path) -> Result<Vec<(String, RawTensor)>> {
    let manifest = std::fs::read_to_string(dir.join("manifest.txt"))?;
    let mut entries = Vec::new();
    for (name, file) in parse_kv_text(&manifest)? {
        entries.push((name, read_tensor(&dir.join(file))?));
    }
    Ok(entries)
}

fn push_conv(name: &str, p: &ConvBlockParams, out: &mut Vec<(String, RawTensor)>) {
    let dims = vec![
        p.out_channels() as u32,
        (p.in_channels() / p.groups()) as u32,
        p.kernel() as u32,
        p.kernel() as u32,
    ];
    out.push((
        format!("{name}.weight"),
        RawTensor {
            dims,
            data: p.weights().to_vec(),
        },
    ));
    out.push((
        format!("{name}.bias"),
        RawTensor {
            dims: vec![p.out_channels() as u32],
            data: p.bias().to_vec(),
        },
    ));
}

fn take<'m>(map: &'m HashMap<String, RawTensor>, name: &str) -> Result<&'m RawTensor> {
    map.get(name)
        .ok_or_else(|| Error::Format(format!("weight directory is missing tensor: {name}")))
}

fn assign_conv(
    p: &mut ConvBlockParams,
    map: &HashMap<String, RawTensor>,
    name: &str,
) -> Result<()> {
    let weight = take(map, &format!("{name}.weight"))?;
    let want = [
        p.out_channels() as u32,
        (p.in_channels() / p.groups()) as u32,
        p.kernel() as u32,
        p.kernel() as u32,
    ];
    if weight.dims() != want {
        return Err(Error::ShapeMismatch(format!(
            "{name}.weight has dims {:?}, expected {want:?}",
            weight.dims()
        )));
    }
    let bias = take(map, &format!("{name}.bias"))?;
    if bias.dims() != [p.out_channels() as u32] {
        return Err(Error::ShapeMismatch(format!(
            "{name}.bias has dims {:?}",
            bias.dims()
        )));
    }
    p.replace_tensors(weight.data().to_vec(), bias.data().to_vec())
}

/// Flattens backbone weights to named tensors.
pub fn backbone_named_tensors(w: &BackboneWeights) -> Vec<(String, RawTensor)> {
    let mut out = Vec::new();
    push_conv("stage1.down", w.stem(), &mut out);
    for (i, stage) in w.stages().iter().enumerate() {
        let s = i + 2;
        push_conv(&format!("stage{s}.down"), &stage.down, &mut out);
        let (conv1, conv2, conv3, dw, pw, chain, conv_o) = stage.manet.parts();
        push_conv(&format!("stage{s}.manet.conv1"), conv1, &mut out);
        push_conv(&format!("stage{s}.manet.conv2"), conv2, &mut out);
        push_conv(&format!("stage{s}.manet.conv3"), conv3, &mut out);
        push_conv(&format!("stage{s}.manet.ds_depthwise"), dw, &mut out);
        push_conv(&format!("stage{s}.manet.ds_pointwise"), pw, &mut out);
        for (j, unit) in chain.iter().enumerate() {
            push_conv(
                &format!("stage{s}.manet.res{}.conv_a", j + 1),
                unit.conv_a(),
                &mut out,
            );
            push_conv(
                &format!("stage{s}.manet.res{}.conv_b", j + 1),
                unit.conv_b(),
                &mut out,
            );
        }
        push_conv(&format!("stage{s}.manet.conv_o"), conv_o, &mut out);
    }
    out
}

/// Overwrites backbone weights in place from named tensors; the directory
/// must match the architecture exactly.
pub fn backbone_fill_from(
    w: &mut BackboneWeights,
    entries: Vec<(String, RawTensor)>,
) -> Result<()> {
    let map: HashMap<String, RawTensor> = entries.into_iter().collect();
    assign_conv(w.stem_mut(), &map, "stage1.down")?;
    for (i, stage) in w.stages_mut().iter_mut().enumerate() {
        let s = i + 2;
        assign_conv(&mut stage.down, &map, &format!("stage{s}.down"))?;
        let (conv1, conv2, conv3, dw, pw, chain, conv_o) = stage.manet.parts_mut();
        assign_conv(conv1, &map, &format!("stage{s}.manet.conv1"))?;
        assign_conv(conv2, &map, &format!("stage{s}.manet.conv2"))?;
        assign_conv(conv3, &map, &format!("stage{s}.manet.conv3"))?;
        assign_conv(dw, &map, &format!("stage{s}.manet.ds_depthwise"))?;
        assign_conv(pw, &map, &format!("stage{s}.manet.ds_pointwise"))?;
        for (j, unit) in chain.iter_mut().enumerate() {
            let (a, b) = unit.parts_mut();
            assign_conv(a, &map, &format!("stage{s}.manet.res{}.conv_a", j + 1))?;
            assign_conv(b, &map, &format!("stage{s}.manet.res{}.conv_b", j + 1))?;
        }
        assign_conv(conv_o, &map, &format!("stage{s}.manet.conv_o"))?;
    }
    Ok(())
}

/// Flattens neck weights to named tensors.
pub fn neck_named_tensors(w: &NeckWeights) -> Vec<(String, RawTensor)> {
    let mut out = Vec::new();
    push_conv("fuse", w.fuse(), &mut out);
    let theta = w.theta();
    out.push((
        "theta".to_string(),
        RawTensor {
            dims: vec![theta.in_channels() as u32, theta.out_channels() as u32],
            data: theta.data().to_vec(),
        },
    ));
    for (i, conv) in w.scatter().iter().enumerate() {
        push_conv(&format!("scatter_n{}", i + 3), conv, &mut out);
    }
    for (i, step) in w.bottom_up().iter().enumerate() {
        push_conv(&format!("bottom_up_n{}.down", i + 4), &step.down, &mut out);
        push_conv(&format!("bottom_up_n{}.fuse", i + 4), &step.fuse, &mut out);
    }
    out
}

/// Overwrites neck weights in place from named tensors.
pub fn neck_fill_from(w: &mut NeckWeights, entries: Vec<(String, RawTensor)>) -> Result<()> {
    let map: HashMap<String, RawTensor> = entries.into_iter().collect();
    let (fuse, theta, scatter, bottom_up) = w.parts_mut();
    assign_conv(fuse, &map, "fuse")?;
    let raw = take(&map, "theta")?;
    if raw.dims() != [theta.in_channels() as u32, theta.out_channels() as u32] {
        return Err(Error::ShapeMismatch(format!(
            "theta has dims {:?}",
            raw.dims()
        )));
    }
    theta.data_mut().copy_from_slice(raw.data());
    for (i, conv) in scatter.iter_mut().enumerate() {
        assign_conv(conv, &map, &format!("scatter_n{}", i + 3))?;
    }
    for (i, step) in bottom_up.iter_mut().enumerate() {
        assign_conv(&mut step.down, &map, &format!("bottom_up_n{}.down", i + 4))?;
        assign_conv(&mut step.fuse, &map, &format!("bottom_up_n{}.fuse", i + 4))?;
    }
    Ok(())
}
