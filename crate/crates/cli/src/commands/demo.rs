//! `demo`: runs the backbone and neck over an image (or synthetic noise),
//! prints the resolved configuration, every stage's shape and value
//! statistics, the point set's pairwise-distance profile and the
//! hypergraph degree profile, and exports channel-mean heatmaps of the
//! semantic point set before and after propagation.

use super::{fmt_f64, slice_stats, Params};
use crate::pnm::{export_heatmap, load_pgm_ppm};
use crate::{CmdError, CmdResult};
use clap::Args;
use hyperneck_core::backbone::{backbone_forward, BackboneConfig, BackboneWeights};
use hyperneck_core::init::{random_map, seeded_rng};
use hyperneck_core::io::{
    backbone_fill_from, backbone_named_tensors, load_tensor_dir, neck_fill_from,
    neck_named_tensors, save_tensor_dir,
};
use hyperneck_core::neck::{CorrelationMode, Neck, NeckConfig};
use hyperneck_core::preset::ScalePreset;
use hyperneck_core::tensor::{from_vertices, TensorMap};
use hyperneck_core::Hypergraph;
use std::io::Write;
use std::path::PathBuf;

const NECK_KEYS: [&str; 6] = [
    "scale",
    "mode",
    "epsilon",
    "target_stride",
    "collecting_set",
    "pooling",
];
const ALL_KEYS: [&str; 11] = [
    "scale",
    "mode",
    "epsilon",
    "target_stride",
    "collecting_set",
    "pooling",
    "input",
    "size",
    "batch",
    "seed",
    "out",
];

#[derive(Debug, Args)]
pub struct DemoArgs {
    /// Optional key=value config file (keys: scale, mode, epsilon,
    /// target_stride, collecting_set, pooling, input, size, batch, seed, out)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Scale preset: N | S | M | L
    #[arg(long)]
    pub scale: Option<String>,
    /// Correlation mode: none | low_order | high_order
    #[arg(long)]
    pub mode: Option<String>,
    /// Distance threshold for structure construction
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Stride of the grid the semantic point set lives on
    #[arg(long)]
    pub target_stride: Option<usize>,
    /// Comma-separated pyramid levels to collect, e.g. B3,B4,B5
    #[arg(long)]
    pub collecting_set: Option<String>,
    /// Vertex pooling: per_image | cross_batch
    #[arg(long)]
    pub pooling: Option<String>,
    /// Input image (binary PGM/PPM); synthetic noise when absent
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Side length of the synthetic noise input (divisible by 32)
    #[arg(long)]
    pub size: Option<usize>,
    /// Batch size for synthetic input
    #[arg(long)]
    pub batch: Option<usize>,
    /// Seed for weights and synthetic input
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for heatmap artifacts
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Save the seeded weights as manifest + HYT1 directories under this path
    #[arg(long)]
    pub save_weights: Option<PathBuf>,
    /// Load backbone and neck weights from directories saved by --save-weights
    #[arg(long)]
    pub load_weights: Option<PathBuf>,
}

fn stats_line(name: &str, x: &TensorMap) -> String {
    let (b, c, h, w) = x.shape();
    let (mean, std, min, max) = slice_stats(x.data());
    format!(
        "  {name} {b}x{c}x{h}x{w} mean={} std={} min={} max={}",
        fmt_f64(mean),
        fmt_f64(std),
        fmt_f64(min as f64),
        fmt_f64(max as f64)
    )
}

/// Min/mean/max pairwise Euclidean distance between the first image's
/// vertices, a guide for choosing the ball threshold.
fn distance_summary(points: &hyperneck_core::FeatureMatrix) -> String {
    let n = points.vertices();
    if n < 2 {
        return "n/a (single vertex)".to_string();
    }
    let mut min = f64::INFINITY;
    let mut max = 0.0f64;
    let mut sum = 0.0f64;
    let mut count = 0u64;
    for i in 0..n {
        let a = points.row(i);
        for j in i + 1..n {
            let d: f64 = a
                .iter()
                .zip(points.row(j))
                .map(|(x, y)| ((x - y) as f64) * ((x - y) as f64))
                .sum::<f64>()
                .sqrt();
            min = min.min(d);
            max = max.max(d);
            sum += d;
            count += 1;
        }
    }
    format!(
        "min={} mean={} max={}",
        fmt_f64(min),
        fmt_f64(sum / count as f64),
        fmt_f64(max)
    )
}

fn degree_summary(values: &[usize]) -> String {
    let min = values.iter().min().copied().unwrap_or(0);
    let max = values.iter().max().copied().unwrap_or(0);
    let mean = values.iter().sum::<usize>() as f64 / values.len().max(1) as f64;
    format!("min={min} mean={} max={max}", fmt_f64(mean))
}

fn hypergraph_lines(out: &mut impl Write, graphs: &[Hypergraph]) -> CmdResult<()> {
    for (i, g) in graphs.iter().enumerate() {
        let degrees = g.degrees();
        writeln!(
            out,
            "  hypergraph[{i}] vertices={} hyperedges={} incidences={}",
            g.vertex_count(),
            g.hyperedge_count(),
            degrees.incidences()
        )?;
        writeln!(
            out,
            "    vertex_degree {}",
            degree_summary(&degrees.vertex_degrees)
        )?;
        writeln!(
            out,
            "    hyperedge_degree {}",
            degree_summary(&degrees.hyperedge_degrees)
        )?;
    }
    Ok(())
}

pub fn run(args: &DemoArgs, out: &mut impl Write) -> CmdResult<()> {
    let params = Params::from_config(args.config.as_deref(), &ALL_KEYS)?;

    // Resolve the neck configuration: config-file pairs first, explicit
    // flags appended last so they win.
    let mut pairs: Vec<(String, String)> = Vec::new();
    for key in NECK_KEYS {
        if let Some(value) = params.get(key) {
            pairs.push((key.to_string(), value.to_string()));
        }
    }
    let flag_pairs: [(&str, Option<String>); 6] = [
        ("scale", args.scale.clone()),
        ("mode", args.mode.clone()),
        ("epsilon", args.epsilon.map(|v| v.to_string())),
        ("target_stride", args.target_stride.map(|v| v.to_string())),
        ("collecting_set", args.collecting_set.clone()),
        ("pooling", args.pooling.clone()),
    ];
    for (key, value) in flag_pairs {
        if let Some(value) = value {
            pairs.push((key.to_string(), value));
        }
    }
    let (scale, neck_config) = NeckConfig::from_kv(&pairs, ScalePreset::S)?;

    let seed = params.resolve("seed", &args.seed, 42u64)?;
    let size = params.resolve("size", &args.size, 256usize)?;
    let batch = params.resolve("batch", &args.batch, 1usize)?;
    let out_dir = params.resolve("out", &args.out, PathBuf::from("out"))?;
    let input_path = match &args.input {
        Some(path) => Some(path.clone()),
        None => params.get("input").map(PathBuf::from),
    };

    writeln!(out, "demo seed={seed}")?;
    writeln!(out, "config:")?;
    writeln!(out, "  scale={scale}")?;
    writeln!(out, "  mode={}", neck_config.mode)?;
    writeln!(out, "  epsilon={}", neck_config.epsilon)?;
    writeln!(out, "  target_stride={}", neck_config.target_stride)?;
    let set: Vec<String> = neck_config
        .collecting_set
        .iter()
        .map(|l| l.to_string())
        .collect();
    writeln!(out, "  collecting_set={}", set.join(","))?;
    writeln!(out, "  pooling={}", neck_config.pooling)?;
    writeln!(out, "  hyper_channels={}", neck_config.hyper_channels)?;
    let widths: Vec<String> = scale
        .channel_widths()
        .iter()
        .map(|w| w.to_string())
        .collect();
    writeln!(out, "  channel_widths={}", widths.join(","))?;
    let depths: Vec<String> = scale.manet_depths().iter().map(|d| d.to_string()).collect();
    writeln!(out, "  manet_depths={}", depths.join(","))?;
    let kernels: Vec<String> = scale
        .manet_kernels()
        .iter()
        .map(|k| k.to_string())
        .collect();
    writeln!(out, "  manet_kernels={}", kernels.join(","))?;

    // Weight init order is fixed (backbone, then neck) so a given seed
    // always produces the same model regardless of input source.
    let mut rng = seeded_rng(seed);
    let mut backbone_weights = BackboneWeights::seeded(BackboneConfig::new(scale), &mut rng)?;
    let mut neck = Neck::seeded(neck_config.clone(), scale, &mut rng)?;
    if let Some(dir) = &args.load_weights {
        backbone_fill_from(
            &mut backbone_weights,
            load_tensor_dir(&dir.join("backbone"))?,
        )?;
        let mut weights = neck.weights().clone();
        neck_fill_from(&mut weights, load_tensor_dir(&dir.join("neck"))?)?;
        neck = Neck::new(neck_config.clone(), weights)?;
        writeln!(out, "weights: loaded from {}", dir.display())?;
    }
    if let Some(dir) = &args.save_weights {
        save_tensor_dir(
            &dir.join("backbone"),
            &backbone_named_tensors(&backbone_weights),
        )?;
        save_tensor_dir(&dir.join("neck"), &neck_named_tensors(neck.weights()))?;
        writeln!(out, "weights: saved to {}", dir.display())?;
    }

    let image = match &input_path {
        Some(path) => {
            let img = load_pgm_ppm(path)?;
            writeln!(
                out,
                "input: {} {}x{}x{}x{}",
                path.display(),
                img.batch(),
                3,
                img.height(),
                img.width()
            )?;
            img
        }
        None => {
            if size % 32 != 0 {
                return Err(CmdError::BadInput(format!(
                    "size {size} must be divisible by 32"
                )));
            }
            let img = random_map(batch, 3, size, size, 0.0, 1.0, &mut rng)?;
            writeln!(out, "input: synthetic noise {batch}x3x{size}x{size}")?;
            img
        }
    };
    if image.height() % 32 != 0 || image.width() % 32 != 0 {
        return Err(CmdError::BadInput(format!(
            "input size {}x{} must be divisible by 32",
            image.height(),
            image.width()
        )));
    }

    let pyramid = backbone_forward(&image, &backbone_weights)?;
    writeln!(out, "backbone:")?;
    for i in 0..5 {
        writeln!(
            out,
            "{}",
            stats_line(&format!("B{}", i + 1), pyramid.level(i))
        )?;
    }

    let trace = neck.forward_trace(&pyramid)?;
    writeln!(out, "neck:")?;
    let meta = trace
        .collected
        .grid_meta()
        .expect("collect always attaches grid provenance");
    writeln!(
        out,
        "  vertices={} grid={}x{} batch={} channels={}",
        trace.collected.vertices(),
        meta.height,
        meta.width,
        meta.batch,
        trace.collected.channels()
    )?;
    let first_image = trace.collected.slice_rows(0, meta.height * meta.width)?;
    writeln!(
        out,
        "  pairwise_distance {}",
        distance_summary(&first_image)
    )?;
    match neck.config().mode {
        CorrelationMode::HighOrder => hypergraph_lines(out, &trace.hypergraphs)?,
        CorrelationMode::LowOrder => writeln!(
            out,
            "  low-order graph propagation (no hypergraph statistics)"
        )?,
        CorrelationMode::None => writeln!(out, "  correlation learning disabled")?,
    }
    writeln!(out, "{}", stats_line("N3", &trace.outputs.n3))?;
    writeln!(out, "{}", stats_line("N4", &trace.outputs.n4))?;
    writeln!(out, "{}", stats_line("N5", &trace.outputs.n5))?;

    let pre = from_vertices(&trace.collected)?;
    let post = from_vertices(&trace.propagated)?;
    let pre_path = out_dir.join("features_pre.pgm");
    let post_path = out_dir.join("features_post.pgm");
    export_heatmap(&pre.image(0)?, &pre_path)?;
    export_heatmap(&post.image(0)?, &post_path)?;
    writeln!(out, "artifacts:")?;
    writeln!(out, "  {}", pre_path.display())?;
    writeln!(out, "  {}", post_path.display())?;
    Ok(())
}
