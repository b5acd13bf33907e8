// Copyright 2026 The DAV Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied. See the License for the specific language governing
// permissions and limitations under the License.

//! The `dav` command-line tool.
//!
//! Exit codes: 0 success, 1 failed grad-check or unwritable output,
//! 2 missing or unreadable input, 3 degenerate input, 4 configuration
//! error (including bad flags), 5 divergence.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::block::{toy_train, BlockConfig, ToyTrainConfig};
use crate::dav::{attention_slice, ground_truth_dav, DavConfig, Variant};
use crate::error::{Error, Result};
use crate::geometry::{back_project, CameraIntrinsics, DepthMap};
use crate::gradcheck::{check_block, flip_orange_weight, GradCheckConfig};
use crate::io::{self, Colormap, HeatmapStyle, PlaneList, PlaneRecord};
use crate::losses::LossWeights;
use crate::metrics::{evaluate, EvalOptions, EDGE_THRESHOLD, MAX_DEPTH, REFERENCE_DEPTH};
use crate::plane_detection::{extract_planes, RansacConfig};
use crate::synth::{make_room, render};

#[derive(Parser, Debug)]
#[command(name = "dav", version, about = "Depth-attention volumes: generation, training and evaluation")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = VariantArg::Literal)]
    pub variant: VariantArg,
    #[arg(long, global = true, default_value_t = 8)]
    pub factor: usize,
    #[arg(long, global = true, default_value_t = 5)]
    pub max_planes: usize,
    /// Meters for metric planes.
    #[arg(long, global = true, default_value_t = 0.01)]
    pub inlier_threshold: f64,
    #[arg(long, global = true, default_value_t = 0.07)]
    pub min_coverage: f64,
    #[arg(long, global = true, default_value_t = 100)]
    pub max_iter: usize,
    /// Worker threads; all cores when absent. Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum VariantArg {
    Literal,
    Rescaled,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Literal => Variant::Literal,
            VariantArg::Rescaled => Variant::Rescaled,
        }
    }
}

impl GlobalArgs {
    pub fn ransac(&self) -> RansacConfig {
        RansacConfig {
            inlier_threshold: self.inlier_threshold,
            max_iterations: self.max_iter,
            max_planes: self.max_planes,
            min_coverage: self.min_coverage,
            seed: self.seed,
        }
    }

    pub fn dav(&self) -> DavConfig {
        DavConfig {
            ransac: self.ransac(),
            factor: self.factor,
            variant: self.variant.into(),
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render a synthetic room to PFM depth, a plane list and a label image.
    Synth(SynthArgs),
    /// Build the ground-truth DAV of a depth map.
    GenDav(GenDavArgs),
    /// Extract metric planes from a depth map.
    FitPlanes(FitPlanesArgs),
    /// Evaluate a predicted depth map against ground truth.
    Eval(EvalArgs),
    /// Compare the block's analytic gradients with finite differences.
    GradCheck(GradCheckArgs),
    /// Fit the DAV predictor to a scene and write the loss trace.
    ToyTrain(ToyTrainArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 3)]
    pub planes: usize,
    /// `HxW`, e.g. 48x64.
    #[arg(long, default_value = "48x64", value_parser = parse_size)]
    pub size: (usize, usize),
    /// Focal length in pixels; 0.8 · width when absent.
    #[arg(long)]
    pub focal: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub planes_out: Option<PathBuf>,
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
    #[arg(long)]
    pub intrinsics_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GenDavArgs {
    #[arg(long)]
    pub depth: PathBuf,
    /// Checked against the depth map size when given.
    #[arg(long)]
    pub intrinsics: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Query cell `x,y` (column, row) on the subsampled grid.
    #[arg(long, value_parser = parse_pair)]
    pub attn_map: Option<(usize, usize)>,
    #[arg(long, requires = "attn_map")]
    pub map_out: Option<PathBuf>,
    /// Planes found in `(x_norm, y_norm, depth)` space.
    #[arg(long)]
    pub planes_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FitPlanesArgs {
    #[arg(long)]
    pub depth: PathBuf,
    #[arg(long)]
    pub intrinsics: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Label PGM of annotated planes (255 = none); needs --intrinsics.
    #[arg(long, requires = "intrinsics")]
    pub planes: Option<PathBuf>,
    #[arg(long)]
    pub intrinsics: Option<PathBuf>,
    /// TOML report path; printed to stdout when absent.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Grayscale PGM of the per-pixel absolute error.
    #[arg(long)]
    pub heatmap: Option<PathBuf>,
    #[arg(long, default_value_t = EDGE_THRESHOLD)]
    pub edge_threshold: f64,
    #[arg(long, default_value_t = REFERENCE_DEPTH)]
    pub reference: f64,
    #[arg(long, default_value_t = MAX_DEPTH)]
    pub max_depth: f64,
}

#[derive(Args, Debug)]
pub struct GradCheckArgs {
    /// Finite-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// `HxWxC` of the input features.
    #[arg(long, default_value = "4x4x8", value_parser = parse_shape)]
    pub shape: (usize, usize, usize),
    #[arg(long, default_value_t = 32)]
    pub c_embed: usize,
    #[arg(long, default_value_t = 8)]
    pub c_orange: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    /// Negative control: corrupt one analytic gradient before comparing.
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Args, Debug)]
pub struct ToyTrainArgs {
    /// PFM depth map.
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lr: f64,
    /// `step,value` lines.
    #[arg(long)]
    pub trace_out: PathBuf,
    /// Trained parameters in the DAVP binary format.
    #[arg(long)]
    pub params_out: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    pub c_in: usize,
    #[arg(long, default_value_t = 32)]
    pub c_embed: usize,
    #[arg(long, default_value_t = 8)]
    pub c_orange: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
}

fn parse_dims(text: &str, n: usize) -> std::result::Result<Vec<usize>, String> {
    let parts: Vec<&str> = text.split(['x', 'X']).collect();
    if parts.len() != n {
        return Err(format!("expected {n} dimensions separated by 'x', got {text:?}"));
    }
    parts
        .iter()
        .map(|p| match p.trim().parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(format!("bad dimension {p:?}")),
        })
        .collect()
}

fn parse_size(text: &str) -> std::result::Result<(usize, usize), String> {
    let d = parse_dims(text, 2)?;
    Ok((d[0], d[1]))
}

fn parse_shape(text: &str) -> std::result::Result<(usize, usize, usize), String> {
    let d = parse_dims(text, 3)?;
    Ok((d[0], d[1], d[2]))
}

fn parse_pair(text: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = text.split_once(',').ok_or_else(|| format!("expected x,y, got {text:?}"))?;
    let p = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
    Ok((p(a)?, p(b)?))
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Read { .. } | Error::Format { .. } => 2,
        Error::Degenerate(_) => 3,
        Error::Config(_) | Error::Bounds(_) | Error::Generation(_) => 4,
        Error::Divergence { .. } => 5,
        Error::Write { .. } => 1,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("dav: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(cli: &Cli) -> Result<i32> {
    let g = &cli.global;
    if g.factor == 0 {
        return Err(Error::config("--factor must be at least 1"));
    }
    g.ransac().validate()?;
    let work = || match &cli.command {
        Command::Synth(a) => cmd_synth(g, a),
        Command::GenDav(a) => cmd_gen_dav(g, a),
        Command::FitPlanes(a) => cmd_fit_planes(g, a),
        Command::Eval(a) => cmd_eval(a),
        Command::GradCheck(a) => cmd_grad_check(g, a),
        Command::ToyTrain(a) => cmd_toy_train(g, a),
    };
    match g.threads {
        Some(0) => Err(Error::config("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::config(e.to_string()))?
            .install(work),
        None => work(),
    }
}

fn read_depth(path: &Path) -> Result<DepthMap> {
    io::read_pfm(path)
}

fn check_intrinsics(k: &CameraIntrinsics, depth: &DepthMap) -> Result<()> {
    if k.width != depth.width() || k.height != depth.height() {
        return Err(Error::config(format!(
            "intrinsics describe {}x{} but the depth map is {}x{}",
            k.height,
            k.width,
            depth.height(),
            depth.width()
        )));
    }
    Ok(())
}

fn cmd_synth(g: &GlobalArgs, a: &SynthArgs) -> Result<i32> {
    let (h, w) = a.size;
    let camera = CameraIntrinsics::centered(w, h, a.focal.unwrap_or(0.8 * w as f64));
    let mut spec = make_room(g.seed, a.planes, &camera)?;
    spec.noise_sigma = a.noise;
    let scene = render(&spec)?;
    io::write_pfm(&scene.depth, &a.out)?;
    if let Some(path) = &a.planes_out {
        let total = scene.depth.len() as f64;
        let planes = spec
            .planes
            .iter()
            .zip(scene.label_counts())
            .map(|(p, n)| PlaneRecord::new(p, n, n as f64 / total))
            .collect();
        io::write_plane_list(
            &PlaneList {
                space: Some("metric".into()),
                planes,
            },
            path,
        )?;
    }
    if let Some(path) = &a.labels_out {
        io::write_pnm(&io::labels_image(&scene.labels, h, w)?, path)?;
    }
    if let Some(path) = &a.intrinsics_out {
        io::write_intrinsics(&camera, path)?;
    }
    Ok(0)
}

fn cmd_gen_dav(g: &GlobalArgs, a: &GenDavArgs) -> Result<i32> {
    let depth = read_depth(&a.depth)?;
    if let Some(path) = &a.intrinsics {
        check_intrinsics(&io::read_intrinsics(path)?, &depth)?;
    }
    let cfg = g.dav();
    let (dav, planes) = ground_truth_dav(&depth, &cfg)?;
    io::write_dav(&dav, &a.out)?;
    if let Some(path) = &a.planes_out {
        let list = PlaneList {
            space: Some("normalized".into()),
            planes: planes.iter().map(PlaneRecord::from).collect(),
        };
        io::write_plane_list(&list, path)?;
    }
    if let (Some((x, y)), Some(path)) = (a.attn_map, &a.map_out) {
        let slice = attention_slice(&dav, y, x)?;
        let style = HeatmapStyle {
            min: 0.0,
            max: cfg.variant.max_score(),
            colormap: Colormap::WarmCool,
        };
        io::write_heatmap(&slice, dav.h, dav.w, &style, path)?;
    }
    Ok(0)
}

fn cmd_fit_planes(g: &GlobalArgs, a: &FitPlanesArgs) -> Result<i32> {
    let depth = read_depth(&a.depth)?;
    let k = io::read_intrinsics(&a.intrinsics)?;
    check_intrinsics(&k, &depth)?;
    if depth.valid_count() == 0 {
        return Err(Error::degenerate("depth map has no valid pixel"));
    }
    let points = back_project(&depth, &k)?;
    let planes = extract_planes(&points, depth.len(), &g.ransac())?;
    let list = PlaneList {
        space: Some("metric".into()),
        planes: planes.iter().map(PlaneRecord::from).collect(),
    };
    io::write_plane_list(&list, &a.out)?;
    Ok(0)
}

fn cmd_eval(a: &EvalArgs) -> Result<i32> {
    let pred = read_depth(&a.pred)?;
    let gt = read_depth(&a.gt)?;
    let mut opts = EvalOptions {
        max_depth: a.max_depth,
        edge_threshold: a.edge_threshold,
        reference: a.reference,
        ..Default::default()
    };
    if let (Some(labels), Some(k)) = (&a.planes, &a.intrinsics) {
        let k = io::read_intrinsics(k)?;
        check_intrinsics(&k, &gt)?;
        let img = io::read_pnm(labels)?;
        if img.channels != 1 || img.width != gt.width() || img.height != gt.height() {
            return Err(Error::config("label image must be a gray image of the depth size"));
        }
        let mut regions: Vec<Vec<usize>> = Vec::new();
        for (i, l) in img.data.iter().enumerate().filter(|(_, l)| **l != 255) {
            let l = *l as usize;
            if regions.len() <= l {
                regions.resize(l + 1, Vec::new());
            }
            regions[l].push(i);
        }
        regions.retain(|r| !r.is_empty());
        opts.intrinsics = Some(k);
        opts.regions = regions;
    }
    let report = evaluate(&pred, &gt, &opts)?;
    let text = io::text::to_toml(&report)?;
    match &a.report {
        Some(path) => io::write_file(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    if let Some(path) = &a.heatmap {
        let err: Vec<f64> = (0..gt.len())
            .map(|i| {
                if pred.mask()[i] && gt.mask()[i] {
                    (pred.values()[i] - gt.values()[i]).abs()
                } else {
                    0.0
                }
            })
            .collect();
        let max = err.iter().copied().fold(0.0, f64::max);
        let style = HeatmapStyle {
            min: 0.0,
            max: if max > 0.0 { max } else { 1.0 },
            colormap: Colormap::Grayscale,
        };
        io::write_heatmap(&err, gt.height(), gt.width(), &style, path)?;
    }
    Ok(0)
}

fn cmd_grad_check(g: &GlobalArgs, a: &GradCheckArgs) -> Result<i32> {
    let (h, w, c) = a.shape;
    let cfg = GradCheckConfig {
        h,
        w,
        block: BlockConfig {
            c_in: c,
            c_embed: a.c_embed,
            c_orange: a.c_orange,
            ..Default::default()
        },
        step: a.eps,
        tolerance: a.tolerance,
        seed: g.seed,
        ..Default::default()
    };
    let report = check_block(&cfg, a.corrupt.then_some(flip_orange_weight as _))?;
    print!("{}", report.table());
    let passed = report.passed();
    println!("{}", if passed { "all gradients pass" } else { "gradient check FAILED" });
    Ok(if passed { 0 } else { 1 })
}

fn cmd_toy_train(g: &GlobalArgs, a: &ToyTrainArgs) -> Result<i32> {
    let scene = read_depth(&a.scene)?;
    let cfg = ToyTrainConfig {
        block: BlockConfig {
            c_in: a.c_in,
            c_embed: a.c_embed,
            c_orange: a.c_orange,
            ..Default::default()
        },
        dav: g.dav(),
        weights: LossWeights {
            lambda: a.lambda,
            ..Default::default()
        },
        seed: g.seed,
    };
    let run = toy_train(&scene, &cfg, a.steps, a.lr)?;
    let mut text = Vec::new();
    for (step, value) in run.trace.iter().enumerate() {
        writeln!(text, "{step},{value}").expect("writing to memory");
    }
    io::write_file(&a.trace_out, &text)?;
    if let Some(path) = &a.params_out {
        io::write_params(&cfg.block, &run.params, path)?;
    }
    Ok(0)
}
