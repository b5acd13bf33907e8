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

//! Depth evaluation metrics.
//!
//! A pixel takes part when the ground truth lies in `(0, max_depth]` and the
//! prediction is valid (finite and positive). `T` below is that count.
//!
//! * relative and absolute errors: REL, RMSE, sqREL, log10 (RMSE of
//!   `log10` depths), iMAE and iRMSE on inverse depths
//! * thresholded accuracy `δ_i`: share of pixels with `max(d̂/d, d/d̂) < 1.25^i`
//! * SI: `(1/2T) Σ_i [log d̂_i - log d_i + (1/T) Σ_j (log d_j - log d̂_j)]²`
//! * planarity: flatness (cm) and orientation (degrees) over annotated regions
//! * depth boundaries: accuracy and completeness of Sobel edge maps, in pixels
//! * directed errors against a fronto-parallel reference plane, in percent

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    fit_plane_lsq, neighborhood_valid, sobel_gradients, CameraIntrinsics, DepthMap, Point3,
};

/// Largest ground-truth depth that takes part in evaluation, in meters.
pub const MAX_DEPTH: f64 = 10.0;
/// Distance of the reference plane for directed errors, in meters.
pub const REFERENCE_DEPTH: f64 = 3.0;
/// Sobel-magnitude threshold for boundary edges.
pub const EDGE_THRESHOLD: f64 = 0.5;

/// Joint evaluation mask.
pub fn evaluation_mask(pred: &DepthMap, gt: &DepthMap, max_depth: f64) -> Result<Vec<bool>> {
    if !pred.same_shape(gt) {
        return Err(Error::config(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    let mask: Vec<bool> = (0..gt.len())
        .map(|i| pred.mask()[i] && gt.mask()[i] && gt.values()[i] <= max_depth)
        .collect();
    if !mask.iter().any(|m| *m) {
        return Err(Error::degenerate("no pixel is valid in both maps within range"));
    }
    Ok(mask)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasicMetrics {
    pub rel: f64,
    pub rmse: f64,
    pub log10: f64,
    pub sqrel: f64,
    pub si: f64,
    pub imae: f64,
    pub irmse: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    /// Pixels that took part.
    pub count: usize,
}

pub fn basic_metrics(pred: &DepthMap, gt: &DepthMap, max_depth: f64) -> Result<BasicMetrics> {
    let mask = evaluation_mask(pred, gt, max_depth)?;
    let pairs: Vec<(f64, f64)> = (0..mask.len())
        .filter(|&i| mask[i])
        .map(|i| (pred.values()[i], gt.values()[i]))
        .collect();
    let t = pairs.len() as f64;
    let mean = |f: &dyn Fn(f64, f64) -> f64| pairs.iter().map(|&(p, g)| f(p, g)).sum::<f64>() / t;
    let delta = |k: i32| {
        let bound = 1.25f64.powi(k);
        pairs.iter().filter(|&&(p, g)| (p / g).max(g / p) < bound).count() as f64 / t
    };
    let mean_log_gap = mean(&|p, g| g.ln() - p.ln());
    Ok(BasicMetrics {
        rel: mean(&|p, g| (p - g).abs() / g),
        rmse: mean(&|p, g| (p - g).powi(2)).sqrt(),
        log10: mean(&|p, g| (p.log10() - g.log10()).powi(2)).sqrt(),
        sqrel: mean(&|p, g| (p - g).powi(2) / (g * g)),
        si: 0.5 * mean(&|p, g| (p.ln() - g.ln() + mean_log_gap).powi(2)),
        imae: mean(&|p, g| (1.0 / p - 1.0 / g).abs()),
        irmse: mean(&|p, g| (1.0 / p - 1.0 / g).powi(2)).sqrt(),
        delta1: delta(1),
        delta2: delta(2),
        delta3: delta(3),
        count: pairs.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarityErrors {
    /// Mean over regions of the std of point-to-plane distances, in cm.
    pub eps_plan: f64,
    /// Mean angle between fitted GT and predicted normals, in degrees.
    pub eps_orie: f64,
    pub regions_used: usize,
    pub regions_skipped: usize,
}

fn region_points(depth: &DepthMap, k: &CameraIntrinsics, pixels: &[usize]) -> Vec<Point3> {
    let w = depth.width();
    pixels
        .iter()
        .map(|&i| {
            let z = depth.values()[i];
            let ray = k.ray((i % w) as f64, (i / w) as f64);
            Point3::new(ray.x * z, ray.y * z, z)
        })
        .collect()
}

/// Planarity errors over annotated regions, each a list of pixel indices.
/// Regions whose fit is degenerate in either map are skipped.
pub fn planarity_errors(
    pred: &DepthMap,
    gt: &DepthMap,
    k: &CameraIntrinsics,
    regions: &[Vec<usize>],
    max_depth: f64,
) -> Result<PlanarityErrors> {
    k.validate()?;
    let mask = evaluation_mask(pred, gt, max_depth)?;
    if gt.width() != k.width || gt.height() != k.height {
        return Err(Error::config("intrinsics do not match the depth map size"));
    }
    let (mut plan, mut orie, mut used, mut skipped) = (0.0, 0.0, 0usize, 0usize);
    for (r, region) in regions.iter().enumerate() {
        let pixels: Vec<usize> = region.iter().copied().filter(|&i| i < mask.len() && mask[i]).collect();
        let p_pts = region_points(pred, k, &pixels);
        let g_pts = region_points(gt, k, &pixels);
        let (Ok(p_plane), Ok(g_plane)) = (fit_plane_lsq(&p_pts), fit_plane_lsq(&g_pts)) else {
            log::warn!("planarity region {r} skipped: degenerate fit");
            skipped += 1;
            continue;
        };
        let dist: Vec<f64> = p_pts.iter().map(|p| p_plane.signed_distance(*p)).collect();
        let m = dist.iter().sum::<f64>() / dist.len() as f64;
        let var = dist.iter().map(|d| (d - m).powi(2)).sum::<f64>() / dist.len() as f64;
        plan += 100.0 * var.sqrt();
        orie += p_plane.angle_deg(&g_plane);
        used += 1;
    }
    if used == 0 {
        return Err(Error::degenerate("no annotated region admits a plane fit"));
    }
    Ok(PlanarityErrors {
        eps_plan: plan / used as f64,
        eps_orie: orie / used as f64,
        regions_used: used,
        regions_skipped: skipped,
    })
}

/// Binary edges and the distance of every pixel to the nearest edge.
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeMaps {
    pub height: usize,
    pub width: usize,
    pub edges: Vec<bool>,
    pub distance: Vec<f64>,
}

impl EdgeMaps {
    pub fn from_edges(height: usize, width: usize, edges: Vec<bool>) -> Self {
        let distance = distance_transform(&edges, height, width);
        Self {
            height,
            width,
            edges,
            distance,
        }
    }

    pub fn edge_count(&self) -> usize {
        self.edges.iter().filter(|e| **e).count()
    }
}

/// Pixels whose Sobel gradient magnitude exceeds `threshold`; only pixels
/// with a fully valid neighborhood inside `mask` can be edges.
pub fn sobel_edges(depth: &DepthMap, mask: &[bool], threshold: f64) -> Vec<bool> {
    let (h, w) = (depth.height(), depth.width());
    let (gx, gy) = sobel_gradients(depth.values(), h, w);
    (0..h * w)
        .map(|i| {
            mask[i]
                && neighborhood_valid(mask, h, w, i / w, i % w)
                && gx[i].hypot(gy[i]) > threshold
        })
        .collect()
}

/// 1-D squared distance transform of `f` (lower envelope of parabolas).
/// Infinite entries never become sites.
fn dt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let sites: Vec<usize> = (0..n).filter(|&q| f[q].is_finite()).collect();
    if sites.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut v = Vec::with_capacity(sites.len());
    let mut z: Vec<f64> = Vec::with_capacity(sites.len() + 1);
    v.push(sites[0]);
    z.push(f64::NEG_INFINITY);
    z.push(f64::INFINITY);
    let meet = |q: usize, p: usize| {
        let (qf, pf) = (q as f64, p as f64);
        ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf))
    };
    for &q in &sites[1..] {
        let mut s = meet(q, *v.last().unwrap());
        while s <= z[v.len() - 1] {
            v.pop();
            z.pop();
            s = meet(q, *v.last().unwrap());
        }
        v.push(q);
        *z.last_mut().unwrap() = s;
        z.push(f64::INFINITY);
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - v[k] as f64;
        *o = d * d + f[v[k]];
    }
}

/// Exact Euclidean distance to the nearest `true` pixel, by separable
/// lower-envelope passes over columns then rows. All `+inf` when there
/// is no edge.
pub fn distance_transform(edges: &[bool], height: usize, width: usize) -> Vec<f64> {
    assert_eq!(edges.len(), height * width, "edge grid size mismatch");
    let mut sq: Vec<f64> = edges.iter().map(|e| if *e { 0.0 } else { f64::INFINITY }).collect();
    let mut col = vec![0.0; height];
    let mut buf = vec![0.0; height.max(width)];
    for c in 0..width {
        for r in 0..height {
            col[r] = sq[r * width + c];
        }
        dt_1d(&col, &mut buf[..height]);
        for r in 0..height {
            sq[r * width + c] = buf[r];
        }
    }
    for r in 0..height {
        let row = sq[r * width..(r + 1) * width].to_vec();
        dt_1d(&row, &mut sq[r * width..(r + 1) * width]);
    }
    sq.iter().map(|d| d.sqrt()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryErrors {
    /// Predicted edges scored by distance to GT edges; `None` without
    /// predicted edges.
    pub eps_acc: Option<f64>,
    /// GT edges scored by distance to predicted edges; `None` without GT edges.
    pub eps_comp: Option<f64>,
    pub pred_edges: EdgeMaps,
    pub gt_edges: EdgeMaps,
}

/// Boundary accuracy and completeness in pixels.
///
/// When one map has no edges its distance map is infinite; distances are
/// capped at the image diagonal so the other score stays finite.
pub fn boundary_errors(
    pred: &DepthMap,
    gt: &DepthMap,
    edge_threshold: f64,
    max_depth: f64,
) -> Result<BoundaryErrors> {
    if !(edge_threshold.is_finite() && edge_threshold >= 0.0) {
        return Err(Error::config("edge threshold must be finite and non-negative"));
    }
    let mask = evaluation_mask(pred, gt, max_depth)?;
    let (h, w) = (gt.height(), gt.width());
    let pred_edges = EdgeMaps::from_edges(h, w, sobel_edges(pred, &mask, edge_threshold));
    let gt_edges = EdgeMaps::from_edges(h, w, sobel_edges(gt, &mask, edge_threshold));
    let cap = ((h * h + w * w) as f64).sqrt();
    let score = |edges: &EdgeMaps, dist: &EdgeMaps| {
        let n = edges.edge_count();
        (n > 0).then(|| {
            let total: f64 = (0..h * w)
                .filter(|&i| edges.edges[i])
                .map(|i| dist.distance[i].min(cap))
                .sum();
            total / n as f64
        })
    };
    Ok(BoundaryErrors {
        eps_acc: score(&pred_edges, &gt_edges),
        eps_comp: score(&gt_edges, &pred_edges),
        pred_edges,
        gt_edges,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DirectedErrors {
    /// Percent of pixels predicted on the same side of the reference as GT.
    pub eps_0: f64,
    /// Percent with GT behind the reference but predicted in front of it.
    pub eps_minus: f64,
    /// Percent with GT in front of the reference but predicted behind it.
    pub eps_plus: f64,
}

/// A depth is in front of the reference when strictly closer than it.
pub fn directed_depth_errors(
    pred: &DepthMap,
    gt: &DepthMap,
    reference: f64,
    max_depth: f64,
) -> Result<DirectedErrors> {
    let mask = evaluation_mask(pred, gt, max_depth)?;
    let (mut same, mut minus, mut plus, mut n) = (0usize, 0usize, 0usize, 0usize);
    for i in (0..mask.len()).filter(|&i| mask[i]) {
        n += 1;
        let g_front = gt.values()[i] < reference;
        let p_front = pred.values()[i] < reference;
        match (g_front, p_front) {
            (a, b) if a == b => same += 1,
            (false, true) => minus += 1,
            _ => plus += 1,
        }
    }
    let pct = |k: usize| 100.0 * k as f64 / n as f64;
    Ok(DirectedErrors {
        eps_0: pct(same),
        eps_minus: pct(minus),
        eps_plus: pct(plus),
    })
}

/// Every metric for one prediction; fields that could not be computed are
/// absent.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rel: Option<f64>,
    pub rmse: Option<f64>,
    pub log10: Option<f64>,
    pub sqrel: Option<f64>,
    pub si: Option<f64>,
    pub imae: Option<f64>,
    pub irmse: Option<f64>,
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub delta3: Option<f64>,
    pub eps_plan: Option<f64>,
    pub eps_orie: Option<f64>,
    pub eps_acc: Option<f64>,
    pub eps_comp: Option<f64>,
    pub eps_0: Option<f64>,
    pub eps_minus: Option<f64>,
    pub eps_plus: Option<f64>,
    pub pixels: Option<usize>,
    /// How `eps_plan` aggregates, present together with it.
    pub eps_plan_aggregation: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalOptions {
    pub max_depth: f64,
    pub edge_threshold: f64,
    pub reference: f64,
    /// Needed for planarity errors together with `regions`.
    pub intrinsics: Option<CameraIntrinsics>,
    pub regions: Vec<Vec<usize>>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            max_depth: MAX_DEPTH,
            edge_threshold: EDGE_THRESHOLD,
            reference: REFERENCE_DEPTH,
            intrinsics: None,
            regions: Vec::new(),
        }
    }
}

/// Full report. Basic and directed errors are required; planarity is
/// attempted only when intrinsics and regions are supplied.
pub fn evaluate(pred: &DepthMap, gt: &DepthMap, opts: &EvalOptions) -> Result<MetricsReport> {
    let b = basic_metrics(pred, gt, opts.max_depth)?;
    let d = directed_depth_errors(pred, gt, opts.reference, opts.max_depth)?;
    let edges = boundary_errors(pred, gt, opts.edge_threshold, opts.max_depth)?;
    let mut report = MetricsReport {
        rel: Some(b.rel),
        rmse: Some(b.rmse),
        log10: Some(b.log10),
        sqrel: Some(b.sqrel),
        si: Some(b.si),
        imae: Some(b.imae),
        irmse: Some(b.irmse),
        delta1: Some(b.delta1),
        delta2: Some(b.delta2),
        delta3: Some(b.delta3),
        eps_acc: edges.eps_acc,
        eps_comp: edges.eps_comp,
        eps_0: Some(d.eps_0),
        eps_minus: Some(d.eps_minus),
        eps_plus: Some(d.eps_plus),
        pixels: Some(b.count),
        ..Default::default()
    };
    if let (Some(k), false) = (&opts.intrinsics, opts.regions.is_empty()) {
        match planarity_errors(pred, gt, k, &opts.regions, opts.max_depth) {
            Ok(p) => {
                report.eps_plan = Some(p.eps_plan);
                report.eps_orie = Some(p.eps_orie);
                report.eps_plan_aggregation =
                    Some("std of point-to-plane distance per region, mean over regions".into());
            }
            Err(Error::Degenerate(msg)) => log::warn!("planarity errors skipped: {msg}"),
            Err(e) => return Err(e),
        }
    }
    Ok(report)
}
