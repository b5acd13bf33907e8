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

//! Training losses with analytic gradients.
//!
//! Attention losses compare `(HW) × (HW)` DAV matrices:
//!
//! * `l_mae = mean |Â - A|`
//! * `l_ang = (1/HW) (Σ_rows |1 - cos(Â_i, A_i)| + Σ_cols |1 - cos(Â_j, A_j)|)`
//! * `l_attention = l_mae + λ l_ang`
//!
//! Depth losses compare depth maps over the pixels valid in both, with
//! `F(t) = log(|t| + α)`:
//!
//! * `l_log = (1/M) Σ F(d̂ - d)`
//! * `l_grad = (1/M) Σ F(∂x|e|) + F(∂y|e|)` with `e = d̂ - d`, Sobel derivatives
//! * `l_norm = (1/M) Σ |1 - n̂·n|` with Sobel normals
//! * `l_depth = l_log + μ l_grad + θ l_norm`, `l_total = l_attention + γ l_depth`
//!
//! Gradients use `sign(0) = 0` at absolute-value kinks.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    neighborhood_valid, normal_from_gradient, sobel_adjoint, sobel_gradients, DepthMap,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda: f64,
    pub mu: f64,
    pub theta: f64,
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            mu: 1.0,
            theta: 1.0,
            gamma: 1.0,
            alpha: 0.5,
        }
    }
}

impl LossWeights {
    /// Weights must be finite and non-negative; `alpha` strictly positive.
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !(ok(self.lambda) && ok(self.mu) && ok(self.theta) && ok(self.gamma)) {
            return Err(Error::config("loss weights must be finite and non-negative"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::config("alpha must be positive"));
        }
        Ok(())
    }
}

/// Loss value plus its gradient with respect to the prediction.
#[derive(Clone, Debug, PartialEq)]
pub struct LossValue<G> {
    pub value: f64,
    pub gradient: G,
    /// Set when a degenerate slice (all-zero prediction row or column) was met.
    pub warning: bool,
}

pub type DavLoss = LossValue<DMatrix<f64>>;
/// Depth gradients are row-major grids, zero outside the shared mask.
pub type DepthLoss = LossValue<Vec<f64>>;

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_dav_shapes(pred: &DMatrix<f64>, gt: &DMatrix<f64>) -> Result<()> {
    if pred.shape() != gt.shape() || !pred.is_square() {
        return Err(Error::config(format!(
            "DAV shapes differ or are not square: {:?} vs {:?}",
            pred.shape(),
            gt.shape()
        )));
    }
    Ok(())
}

pub fn l_mae(pred: &DMatrix<f64>, gt: &DMatrix<f64>) -> Result<DavLoss> {
    check_dav_shapes(pred, gt)?;
    let count = pred.len().max(1) as f64;
    let value = pred.iter().zip(gt.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>() / count;
    let gradient = pred.zip_map(gt, |a, b| sign(a - b) / count);
    Ok(LossValue {
        value,
        gradient,
        warning: false,
    })
}

/// `Σ |1 - cos(p_k, g_k)|` over slices `k`, accumulating its gradient.
/// `slices` yields (prediction, target) views of each row or column.
fn cosine_terms<'a>(
    pairs: impl Iterator<Item = (Vec<f64>, Vec<f64>)> + 'a,
) -> (f64, Vec<Vec<f64>>, bool) {
    let mut total = 0.0;
    let mut grads = Vec::new();
    let mut warning = false;
    for (p, g) in pairs {
        let pp: f64 = p.iter().map(|v| v * v).sum();
        let gg: f64 = g.iter().map(|v| v * v).sum();
        let (pn, gn) = (pp.sqrt(), gg.sqrt());
        if pn == 0.0 || gn == 0.0 {
            warning = true;
            total += 1.0;
            grads.push(vec![0.0; p.len()]);
            continue;
        }
        let dot: f64 = p.iter().zip(&g).map(|(a, b)| a * b).sum();
        // One square root keeps cos(a, a) exactly 1.
        let cos = dot / (pp * gg).sqrt();
        total += (1.0 - cos).abs();
        // d|1 - cos|/dp = -sign(1 - cos) (g/(|p||g|) - cos p/|p|²)
        let s = -sign(1.0 - cos);
        grads.push(
            p.iter()
                .zip(&g)
                .map(|(pi, gi)| s * (gi / (pn * gn) - cos * pi / (pn * pn)))
                .collect(),
        );
    }
    (total, grads, warning)
}

pub fn l_ang(pred: &DMatrix<f64>, gt: &DMatrix<f64>) -> Result<DavLoss> {
    check_dav_shapes(pred, gt)?;
    let n = pred.nrows();
    let rows = (0..n).map(|i| {
        (
            pred.row(i).iter().copied().collect(),
            gt.row(i).iter().copied().collect(),
        )
    });
    let (row_total, row_grads, row_warn) = cosine_terms(rows);
    let cols = (0..n).map(|j| {
        (
            pred.column(j).iter().copied().collect(),
            gt.column(j).iter().copied().collect(),
        )
    });
    let (col_total, col_grads, col_warn) = cosine_terms(cols);
    let scale = 1.0 / n.max(1) as f64;
    let gradient = DMatrix::from_fn(n, n, |i, j| scale * (row_grads[i][j] + col_grads[j][i]));
    Ok(LossValue {
        value: scale * (row_total + col_total),
        gradient,
        warning: row_warn || col_warn,
    })
}

pub fn l_attention(pred: &DMatrix<f64>, gt: &DMatrix<f64>, w: &LossWeights) -> Result<DavLoss> {
    w.validate()?;
    let mae = l_mae(pred, gt)?;
    let ang = l_ang(pred, gt)?;
    Ok(LossValue {
        value: mae.value + w.lambda * ang.value,
        gradient: mae.gradient + ang.gradient * w.lambda,
        warning: ang.warning,
    })
}

fn shared_mask(pred: &DepthMap, gt: &DepthMap) -> Result<Vec<bool>> {
    if !pred.same_shape(gt) {
        return Err(Error::config(format!(
            "depth maps differ in size: {}x{} vs {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    let mask: Vec<bool> = pred.mask().iter().zip(gt.mask()).map(|(a, b)| *a && *b).collect();
    if !mask.iter().any(|m| *m) {
        return Err(Error::degenerate("no pixel is valid in both depth maps"));
    }
    Ok(mask)
}

pub fn l_log(pred: &DepthMap, gt: &DepthMap, alpha: f64) -> Result<DepthLoss> {
    let mask = shared_mask(pred, gt)?;
    let m = mask.iter().filter(|v| **v).count() as f64;
    let mut value = 0.0;
    let mut gradient = vec![0.0; mask.len()];
    for (i, _) in mask.iter().enumerate().filter(|(_, ok)| **ok) {
        let e = pred.values()[i] - gt.values()[i];
        value += (e.abs() + alpha).ln();
        gradient[i] = sign(e) / ((e.abs() + alpha) * m);
    }
    Ok(LossValue {
        value: value / m,
        gradient,
        warning: false,
    })
}

pub fn l_grad(pred: &DepthMap, gt: &DepthMap, alpha: f64) -> Result<DepthLoss> {
    let mask = shared_mask(pred, gt)?;
    let (h, w) = (pred.height(), pred.width());
    let m = mask.iter().filter(|v| **v).count() as f64;
    let err: Vec<f64> = (0..mask.len())
        .map(|i| if mask[i] { pred.values()[i] - gt.values()[i] } else { 0.0 })
        .collect();
    let abs_err: Vec<f64> = err.iter().map(|e| e.abs()).collect();
    let (gx, gy) = sobel_gradients(&abs_err, h, w);
    let mut value = 0.0;
    let mut dgx = vec![0.0; mask.len()];
    let mut dgy = vec![0.0; mask.len()];
    for i in (0..mask.len()).filter(|&i| mask[i]) {
        value += (gx[i].abs() + alpha).ln() + (gy[i].abs() + alpha).ln();
        dgx[i] = sign(gx[i]) / ((gx[i].abs() + alpha) * m);
        dgy[i] = sign(gy[i]) / ((gy[i].abs() + alpha) * m);
    }
    let dabs = sobel_adjoint(&dgx, &dgy, h, w);
    let gradient = (0..mask.len())
        .map(|i| if mask[i] { dabs[i] * sign(err[i]) } else { 0.0 })
        .collect();
    Ok(LossValue {
        value: value / m,
        gradient,
        warning: false,
    })
}

/// Normal-angle loss over pixels where both maps have a fully valid 3×3
/// neighborhood; `M` counts those pixels.
pub fn l_norm(pred: &DepthMap, gt: &DepthMap) -> Result<DepthLoss> {
    let mask = shared_mask(pred, gt)?;
    let (h, w) = (pred.height(), pred.width());
    let (pgx, pgy) = sobel_gradients(pred.values(), h, w);
    let (tgx, tgy) = sobel_gradients(gt.values(), h, w);
    let used: Vec<usize> = (0..mask.len())
        .filter(|&i| {
            mask[i]
                && neighborhood_valid(pred.mask(), h, w, i / w, i % w)
                && neighborhood_valid(gt.mask(), h, w, i / w, i % w)
        })
        .collect();
    if used.is_empty() {
        return Err(Error::degenerate("no pixel has a normal in both maps"));
    }
    let m = used.len() as f64;
    let mut value = 0.0;
    let mut dgx = vec![0.0; mask.len()];
    let mut dgy = vec![0.0; mask.len()];
    for &i in &used {
        let np = normal_from_gradient(pgx[i], pgy[i]);
        let nt = normal_from_gradient(tgx[i], tgy[i]);
        let dot = np[0] * nt[0] + np[1] * nt[1] + np[2] * nt[2];
        value += (1.0 - dot).abs();
        let s = -sign(1.0 - dot) / m;
        // n̂ = v/|v| with v = (-gx, -gy, 1); d(n̂·n)/dv = (n - (n̂·n) n̂)/|v|.
        let len = (pgx[i] * pgx[i] + pgy[i] * pgy[i] + 1.0).sqrt();
        let dv0 = (nt[0] - dot * np[0]) / len;
        let dv1 = (nt[1] - dot * np[1]) / len;
        dgx[i] = -s * dv0;
        dgy[i] = -s * dv1;
    }
    let gradient = sobel_adjoint(&dgx, &dgy, h, w);
    Ok(LossValue {
        value: value / m,
        gradient,
        warning: false,
    })
}

pub fn l_depth(pred: &DepthMap, gt: &DepthMap, w: &LossWeights) -> Result<DepthLoss> {
    w.validate()?;
    let log = l_log(pred, gt, w.alpha)?;
    let grad = l_grad(pred, gt, w.alpha)?;
    let norm = l_norm(pred, gt)?;
    let gradient = (0..log.gradient.len())
        .map(|i| log.gradient[i] + w.mu * grad.gradient[i] + w.theta * norm.gradient[i])
        .collect();
    Ok(LossValue {
        value: log.value + w.mu * grad.value + w.theta * norm.value,
        gradient,
        warning: false,
    })
}

/// Full objective with both gradient domains.
#[derive(Clone, Debug, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    pub dav_gradient: DMatrix<f64>,
    pub depth_gradient: Vec<f64>,
    pub warning: bool,
}

pub fn l_total(
    dav_pred: &DMatrix<f64>,
    dav_gt: &DMatrix<f64>,
    d_pred: &DepthMap,
    d_gt: &DepthMap,
    w: &LossWeights,
) -> Result<TotalLoss> {
    let att = l_attention(dav_pred, dav_gt, w)?;
    let depth = l_depth(d_pred, d_gt, w)?;
    Ok(TotalLoss {
        value: att.value + w.gamma * depth.value,
        dav_gradient: att.gradient,
        depth_gradient: depth.gradient.iter().map(|g| w.gamma * g).collect(),
        warning: att.warning,
    })
}
