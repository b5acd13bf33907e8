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

//! The non-local depth-attention block.
//!
//! ```text
//!  X ─┬─ conv ─ green-1 ─┐ cross          ┌─ relu ─ conv ─ green-2 ─┐
//!     │                  ├─ denormalize ──┤                         ├─ σ(s · g2 b2ᵀ) = DAV
//!     ├─ conv ─ blue-1 ──┘                └─ relu ─ conv ─ blue-2 ──┘          │
//!     └─ conv ─ orange ──────────────────────────────────────────────── DAV · orange
//!                                                                              │
//!  Y = X + norm(conv(DAV · orange))  ◄──────────────────────────────────────────┘
//! ```
//!
//! Cross denormalization normalizes each branch and rescales it with
//! `γ`, `β` predicted by 1×1 convolutions of the other branch.
//!
//! Feature maps are stored as `(H·W) × C` matrices whose rows are spatial
//! positions in row-major `(row, col)` order; a 1×1 convolution is then a
//! plain affine map on rows. Normalization uses per-instance statistics
//! over spatial positions with biased variance.

mod backward;
mod forward;
mod params;
mod train;

pub use backward::{backward, Upstream};
pub use forward::{
    batch_norm, conv1x1, cross_denormalize, forward, forward_with_attention, predict_dav,
    ForwardCache,
};
pub use params::{BlockConfig, BlockParams, Branch, Conv1x1, GradientBundle, Norm};
pub use train::{toy_train, ToyRun, ToyTrainConfig};

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// `H × W × C` activations.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    pub h: usize,
    pub w: usize,
    /// `(h·w) × c`, row `r·w + c` holds the channels of pixel `(r, c)`.
    pub data: DMatrix<f64>,
}

impl FeatureMap {
    pub fn new(h: usize, w: usize, data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() != h * w {
            return Err(Error::config(format!(
                "feature matrix has {} rows, expected {}",
                data.nrows(),
                h * w
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("feature map contains non-finite values"));
        }
        Ok(Self { h, w, data })
    }

    pub fn zeros(h: usize, w: usize, c: usize) -> Self {
        Self {
            h,
            w,
            data: DMatrix::zeros(h * w, c),
        }
    }

    /// Standard-normal activations.
    pub fn random<R: Rng + ?Sized>(h: usize, w: usize, c: usize, rng: &mut R) -> Self {
        let data = DMatrix::from_fn(h * w, c, |_, _| rng.sample::<f64, _>(StandardNormal));
        Self { h, w, data }
    }

    pub fn channels(&self) -> usize {
        self.data.ncols()
    }

    pub fn positions(&self) -> usize {
        self.h * self.w
    }

    /// Value at pixel `(row, col)`, channel `ch`.
    pub fn at(&self, row: usize, col: usize, ch: usize) -> f64 {
        self.data[(row * self.w + col, ch)]
    }
}

/// Logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
