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

use nalgebra::{DMatrix, DVector};

use super::params::{BlockConfig, BlockParams, Branch, Conv1x1, Norm};
use super::{sigmoid, FeatureMap};
use crate::error::{Error, Result};

pub(super) fn affine(x: &DMatrix<f64>, conv: &Conv1x1) -> Result<DMatrix<f64>> {
    if x.ncols() != conv.c_in() || conv.bias.len() != conv.c_out() {
        return Err(Error::config(format!(
            "1x1 conv expects {} input channels, got {}",
            conv.c_in(),
            x.ncols()
        )));
    }
    let mut y = x * conv.weight.transpose();
    for mut row in y.row_iter_mut() {
        row += conv.bias.transpose();
    }
    Ok(y)
}

/// Per-channel standardization over rows. Returns `(x̂, 1/sqrt(var + eps))`.
///
/// The mean is accumulated relative to the first row so a constant channel
/// yields exactly zero deviations.
pub(super) fn standardize(x: &DMatrix<f64>, eps: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = x.nrows() as f64;
    let mut xhat = x.clone();
    let mut inv_std = DVector::zeros(x.ncols());
    for (c, mut col) in xhat.column_iter_mut().enumerate() {
        let pivot = col[0];
        let mean = pivot + col.iter().map(|v| v - pivot).sum::<f64>() / n;
        col.apply(|v| *v -= mean);
        let var = col.iter().map(|v| v * v).sum::<f64>() / n;
        let inv = 1.0 / (var + eps).sqrt();
        // Zero deviations stay exactly zero even when var + eps == 0.
        col.apply(|v| {
            if *v != 0.0 {
                *v *= inv
            }
        });
        inv_std[c] = inv;
    }
    (xhat, inv_std)
}

pub(super) fn scale_shift(xhat: &DMatrix<f64>, norm: &Norm) -> Result<DMatrix<f64>> {
    if norm.scale.len() != xhat.ncols() || norm.shift.len() != xhat.ncols() {
        return Err(Error::config("normalization parameters do not match channels"));
    }
    let mut y = xhat.clone();
    for (c, mut col) in y.column_iter_mut().enumerate() {
        let (s, b) = (norm.scale[c], norm.shift[c]);
        col.apply(|v| *v = s * *v + b);
    }
    Ok(y)
}

fn check_feature(x: &FeatureMap, channels: usize) -> Result<()> {
    if x.channels() != channels {
        return Err(Error::config(format!(
            "feature map has {} channels, expected {channels}",
            x.channels()
        )));
    }
    Ok(())
}

/// Per-pixel affine map across channels.
pub fn conv1x1(x: &FeatureMap, conv: &Conv1x1) -> Result<FeatureMap> {
    Ok(FeatureMap {
        h: x.h,
        w: x.w,
        data: affine(&x.data, conv)?,
    })
}

/// Single-instance normalization over spatial positions (biased variance).
pub fn batch_norm(x: &FeatureMap, norm: &Norm, eps: f64) -> Result<FeatureMap> {
    let (xhat, _) = standardize(&x.data, eps);
    Ok(FeatureMap {
        h: x.h,
        w: x.w,
        data: scale_shift(&xhat, norm)?,
    })
}

/// Intermediate activations of one embedding branch.
#[derive(Clone, Debug)]
pub struct BranchCache {
    /// Embedding before normalization (`green-1` / `blue-1`).
    pub embed: DMatrix<f64>,
    pub standardized: DMatrix<f64>,
    pub inv_std: DVector<f64>,
    pub normalized: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    /// Normalized features after the other branch's modulation.
    pub denorm: DMatrix<f64>,
    pub activated: DMatrix<f64>,
    /// Output of the post convolution (`green-2` / `blue-2`).
    pub out: DMatrix<f64>,
}

fn branch_head(embed: DMatrix<f64>, b: &Branch, eps: f64) -> Result<BranchCache> {
    let (standardized, inv_std) = standardize(&embed, eps);
    let normalized = scale_shift(&standardized, &b.norm)?;
    let gamma = affine(&embed, &b.gamma)?;
    let beta = affine(&embed, &b.beta)?;
    Ok(BranchCache {
        standardized,
        inv_std,
        normalized,
        gamma,
        beta,
        denorm: DMatrix::zeros(0, 0),
        activated: DMatrix::zeros(0, 0),
        out: DMatrix::zeros(0, 0),
        embed,
    })
}

fn branch_tail(cache: &mut BranchCache, other: (&DMatrix<f64>, &DMatrix<f64>), b: &Branch) -> Result<()> {
    let (other_gamma, other_beta) = other;
    cache.denorm = cache.normalized.component_mul(other_gamma) + other_beta;
    cache.activated = cache.denorm.map(|v| v.max(0.0));
    cache.out = affine(&cache.activated, &b.post)?;
    Ok(())
}

fn cross_denormalize_cached(
    green_in: DMatrix<f64>,
    blue_in: DMatrix<f64>,
    green: &Branch,
    blue: &Branch,
    eps: f64,
) -> Result<(BranchCache, BranchCache)> {
    if green_in.shape() != blue_in.shape() {
        return Err(Error::config("green and blue embeddings differ in shape"));
    }
    let mut g = branch_head(green_in, green, eps)?;
    let mut b = branch_head(blue_in, blue, eps)?;
    branch_tail(&mut g, (&b.gamma, &b.beta), green)?;
    branch_tail(&mut b, (&g.gamma, &g.beta), blue)?;
    Ok((g, b))
}

/// Cross-denormalization of two embeddings followed by ReLU and the post
/// convolutions: `green2 = post_g(relu(BN_g(green) ⊙ γ_b(blue) + β_b(blue)))`
/// and symmetrically for blue.
pub fn cross_denormalize(
    green_in: &FeatureMap,
    blue_in: &FeatureMap,
    green: &Branch,
    blue: &Branch,
    eps: f64,
) -> Result<(FeatureMap, FeatureMap)> {
    if green_in.h != blue_in.h || green_in.w != blue_in.w {
        return Err(Error::config("green and blue embeddings differ in shape"));
    }
    let (g, b) =
        cross_denormalize_cached(green_in.data.clone(), blue_in.data.clone(), green, blue, eps)?;
    let wrap = |data| FeatureMap {
        h: green_in.h,
        w: green_in.w,
        data,
    };
    Ok((wrap(g.out), wrap(b.out)))
}

/// Every intermediate of a forward pass, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub green: BranchCache,
    pub blue: BranchCache,
    /// `(HW) × (HW)` predicted attention, `σ(s · green2 blue2ᵀ)`.
    pub dav: DMatrix<f64>,
    pub orange: DMatrix<f64>,
    pub aggregated: DMatrix<f64>,
    pub out_conv: DMatrix<f64>,
    pub out_standardized: DMatrix<f64>,
    pub out_inv_std: DVector<f64>,
    pub y: FeatureMap,
    /// True when the attention came from a caller override.
    pub attention_overridden: bool,
}

fn dav_from_branches(g: &BranchCache, b: &BranchCache, cfg: &BlockConfig) -> DMatrix<f64> {
    let s = cfg.logit_scale();
    (&g.out * b.out.transpose()).map(|v| sigmoid(s * v))
}

fn check_params(params: &BlockParams, cfg: &BlockConfig) -> Result<()> {
    cfg.validate()?;
    if !params.config_matches(cfg) {
        return Err(Error::config("block parameters do not match the configuration"));
    }
    Ok(())
}

/// Predicted DAV as an `(HW) × (HW)` matrix over row-major positions.
pub fn predict_dav(x: &FeatureMap, params: &BlockParams, cfg: &BlockConfig) -> Result<DMatrix<f64>> {
    check_params(params, cfg)?;
    check_feature(x, cfg.c_in)?;
    let (g, b) = cross_denormalize_cached(
        affine(&x.data, &params.green.embed)?,
        affine(&x.data, &params.blue.embed)?,
        &params.green,
        &params.blue,
        cfg.eps_bn,
    )?;
    Ok(dav_from_branches(&g, &b, cfg))
}

/// Full forward pass; `attention` replaces the predicted DAV in the
/// aggregation when given (the returned `dav` is the override).
pub fn forward_with_attention(
    x: &FeatureMap,
    params: &BlockParams,
    cfg: &BlockConfig,
    attention: Option<&DMatrix<f64>>,
) -> Result<ForwardCache> {
    check_params(params, cfg)?;
    check_feature(x, cfg.c_in)?;
    let n = x.positions();
    let (green, blue) = cross_denormalize_cached(
        affine(&x.data, &params.green.embed)?,
        affine(&x.data, &params.blue.embed)?,
        &params.green,
        &params.blue,
        cfg.eps_bn,
    )?;
    let dav = match attention {
        Some(a) if a.shape() == (n, n) => a.clone(),
        Some(a) => {
            return Err(Error::config(format!(
                "attention override is {}x{}, expected {n}x{n}",
                a.nrows(),
                a.ncols()
            )))
        }
        None => dav_from_branches(&green, &blue, cfg),
    };
    let orange = affine(&x.data, &params.orange)?;
    let aggregated = &dav * &orange;
    let out_conv = affine(&aggregated, &params.out)?;
    let (out_standardized, out_inv_std) = standardize(&out_conv, cfg.eps_bn);
    let y = &x.data + scale_shift(&out_standardized, &params.out_norm)?;
    Ok(ForwardCache {
        green,
        blue,
        dav,
        orange,
        aggregated,
        out_conv,
        out_standardized,
        out_inv_std,
        y: FeatureMap {
            h: x.h,
            w: x.w,
            data: y,
        },
        attention_overridden: attention.is_some(),
    })
}

/// `Y = X + BN(conv(DAV · orange(X)))` together with the predicted DAV.
pub fn forward(
    x: &FeatureMap,
    params: &BlockParams,
    cfg: &BlockConfig,
) -> Result<(FeatureMap, DMatrix<f64>)> {
    let cache = forward_with_attention(x, params, cfg, None)?;
    Ok((cache.y, cache.dav))
}
