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

//! Reverse-mode gradients of the block, written out by hand.

use nalgebra::{DMatrix, DVector};

use super::forward::{forward_with_attention, BranchCache, ForwardCache};
use super::params::{BlockConfig, BlockParams, Branch, Conv1x1, GradientBundle, Norm};
use super::FeatureMap;
use crate::error::{Error, Result};

/// Gradients of a scalar loss with respect to the two block outputs.
#[derive(Clone, Debug)]
pub struct Upstream {
    /// `(HW) × c_in`, same layout as the output features.
    pub dy: DMatrix<f64>,
    /// `(HW) × (HW)`, same layout as the predicted DAV.
    pub ddav: DMatrix<f64>,
}

impl Upstream {
    /// Gradient flowing only into the predicted DAV.
    pub fn dav_only(ddav: DMatrix<f64>, c_in: usize) -> Self {
        let n = ddav.nrows();
        Self {
            dy: DMatrix::zeros(n, c_in),
            ddav,
        }
    }
}

fn affine_backward(dy: &DMatrix<f64>, x: &DMatrix<f64>, conv: &Conv1x1, grad: &mut Conv1x1) -> DMatrix<f64> {
    grad.weight += dy.transpose() * x;
    for (c, col) in dy.column_iter().enumerate() {
        grad.bias[c] += col.sum();
    }
    dy * &conv.weight
}

fn norm_backward(
    dy: &DMatrix<f64>,
    xhat: &DMatrix<f64>,
    inv_std: &DVector<f64>,
    norm: &Norm,
    grad: &mut Norm,
) -> DMatrix<f64> {
    let n = dy.nrows() as f64;
    let mut dx = DMatrix::zeros(dy.nrows(), dy.ncols());
    for c in 0..dy.ncols() {
        let (dyc, xc) = (dy.column(c), xhat.column(c));
        grad.scale[c] += dyc.dot(&xc);
        grad.shift[c] += dyc.sum();
        let dxhat = dyc * norm.scale[c];
        let sum = dxhat.sum();
        let dot = dxhat.dot(&xc);
        let k = inv_std[c] / n;
        for r in 0..dy.nrows() {
            dx[(r, c)] = k * (n * dxhat[r] - sum - xc[r] * dot);
        }
    }
    dx
}

/// Gradient wrt the branch's post-conv output → gradient wrt its embedding,
/// plus the gradients that leave through the modulation tensors it consumed
/// from the other branch.
struct BranchGrads {
    /// d/d(own embedding) from the normalization path.
    embed_from_norm: DMatrix<f64>,
    /// d/d(other branch's gamma output).
    other_gamma: DMatrix<f64>,
    /// d/d(other branch's beta output).
    other_beta: DMatrix<f64>,
}

fn branch_backward(
    dout: &DMatrix<f64>,
    cache: &BranchCache,
    other_gamma: &DMatrix<f64>,
    params: &Branch,
    grad: &mut Branch,
) -> BranchGrads {
    let dact = affine_backward(dout, &cache.activated, &params.post, &mut grad.post);
    let mut dden = dact;
    dden.zip_apply(&cache.denorm, |g, d| {
        if d <= 0.0 {
            *g = 0.0
        }
    });
    let dnormalized = dden.component_mul(other_gamma);
    let other_gamma_grad = dden.component_mul(&cache.normalized);
    let embed_from_norm = norm_backward(
        &dnormalized,
        &cache.standardized,
        &cache.inv_std,
        &params.norm,
        &mut grad.norm,
    );
    BranchGrads {
        embed_from_norm,
        other_gamma: other_gamma_grad,
        other_beta: dden,
    }
}

/// Gradients from a cached forward pass.
pub fn backward_from_cache(
    x: &FeatureMap,
    params: &BlockParams,
    cfg: &BlockConfig,
    cache: &ForwardCache,
    upstream: &Upstream,
) -> Result<GradientBundle> {
    let n = x.positions();
    if upstream.dy.shape() != (n, cfg.c_in) || upstream.ddav.shape() != (n, n) {
        return Err(Error::config(format!(
            "upstream gradients must be {n}x{} and {n}x{n}",
            cfg.c_in
        )));
    }
    let mut g = params.zeros_like();
    let mut dx = upstream.dy.clone();

    // Residual output path: Y = X + norm(out(DAV · orange)).
    let dz = norm_backward(
        &upstream.dy,
        &cache.out_standardized,
        &cache.out_inv_std,
        &params.out_norm,
        &mut g.out_norm,
    );
    let dagg = affine_backward(&dz, &cache.aggregated, &params.out, &mut g.out);
    let dorange = cache.dav.transpose() * &dagg;
    dx += affine_backward(&dorange, &x.data, &params.orange, &mut g.orange);

    if !cache.attention_overridden {
        let ddav = &upstream.ddav + &dagg * cache.orange.transpose();
        let dlogits = ddav.zip_map(&cache.dav, |gd, s| gd * s * (1.0 - s)) * cfg.logit_scale();
        let dg2 = &dlogits * &cache.blue.out;
        let db2 = dlogits.transpose() * &cache.green.out;

        let gb = branch_backward(&dg2, &cache.green, &cache.blue.gamma, &params.green, &mut g.green);
        let bb = branch_backward(&db2, &cache.blue, &cache.green.gamma, &params.blue, &mut g.blue);

        // Each embedding feeds its own norm plus the gamma/beta convolutions
        // whose outputs modulate the other branch.
        let mut dg1 = gb.embed_from_norm;
        dg1 += affine_backward(&bb.other_gamma, &cache.green.embed, &params.green.gamma, &mut g.green.gamma);
        dg1 += affine_backward(&bb.other_beta, &cache.green.embed, &params.green.beta, &mut g.green.beta);
        let mut db1 = bb.embed_from_norm;
        db1 += affine_backward(&gb.other_gamma, &cache.blue.embed, &params.blue.gamma, &mut g.blue.gamma);
        db1 += affine_backward(&gb.other_beta, &cache.blue.embed, &params.blue.beta, &mut g.blue.beta);

        dx += affine_backward(&dg1, &x.data, &params.green.embed, &mut g.green.embed);
        dx += affine_backward(&db1, &x.data, &params.blue.embed, &mut g.blue.embed);
    }

    Ok(GradientBundle { params: g, input: dx })
}

/// Exact gradients of `L(Y, DAV)` given `∂L/∂Y` and `∂L/∂DAV`.
pub fn backward(
    x: &FeatureMap,
    params: &BlockParams,
    cfg: &BlockConfig,
    upstream: &Upstream,
) -> Result<GradientBundle> {
    let cache = forward_with_attention(x, params, cfg, None)?;
    backward_from_cache(x, params, cfg, &cache, upstream)
}
