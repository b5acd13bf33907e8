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
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlockConfig {
    pub c_in: usize,
    pub c_embed: usize,
    pub c_orange: usize,
    pub eps_bn: f64,
    /// Divide the green·blue logits by `sqrt(c_embed)` before the sigmoid.
    pub scale_logits: bool,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            c_in: 16,
            c_embed: 32,
            c_orange: 8,
            eps_bn: 1e-5,
            scale_logits: true,
        }
    }
}

impl BlockConfig {
    pub fn validate(&self) -> Result<()> {
        if self.c_in == 0 || self.c_embed == 0 || self.c_orange == 0 {
            return Err(Error::config("channel counts must be at least 1"));
        }
        if !(self.eps_bn >= 0.0 && self.eps_bn.is_finite()) {
            return Err(Error::config("normalization epsilon must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn logit_scale(&self) -> f64 {
        if self.scale_logits {
            1.0 / (self.c_embed as f64).sqrt()
        } else {
            1.0
        }
    }
}

/// 1×1 convolution: `y = x Wᵀ + b`, weight is `out × in`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv1x1 {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Conv1x1 {
    pub fn zeros(c_in: usize, c_out: usize) -> Self {
        Self {
            weight: DMatrix::zeros(c_out, c_in),
            bias: DVector::zeros(c_out),
        }
    }

    pub fn identity(c: usize) -> Self {
        Self {
            weight: DMatrix::identity(c, c),
            bias: DVector::zeros(c),
        }
    }

    /// Uniform in `±1/sqrt(c_in)` for weights and biases.
    pub fn random<R: Rng + ?Sized>(c_in: usize, c_out: usize, rng: &mut R) -> Self {
        Self::random_with_gain(c_in, c_out, 1.0, rng)
    }

    /// Uniform in `±gain/sqrt(c_in)`.
    pub fn random_with_gain<R: Rng + ?Sized>(c_in: usize, c_out: usize, gain: f64, rng: &mut R) -> Self {
        let bound = gain / (c_in as f64).sqrt();
        Self {
            weight: DMatrix::from_fn(c_out, c_in, |_, _| rng.random_range(-bound..bound)),
            bias: DVector::from_fn(c_out, |_, _| rng.random_range(-bound..bound)),
        }
    }

    pub fn c_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn c_out(&self) -> usize {
        self.weight.nrows()
    }
}

/// Per-channel affine parameters applied after normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct Norm {
    pub scale: DVector<f64>,
    pub shift: DVector<f64>,
}

impl Norm {
    pub fn identity(c: usize) -> Self {
        Self {
            scale: DVector::from_element(c, 1.0),
            shift: DVector::zeros(c),
        }
    }
}

/// One embedding branch (green or blue).
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    /// `c_in → c_embed`
    pub embed: Conv1x1,
    pub norm: Norm,
    /// `c_embed → c_embed`, produces the multiplicative modulation.
    pub gamma: Conv1x1,
    /// `c_embed → c_embed`, produces the additive modulation.
    pub beta: Conv1x1,
    /// `c_embed → c_embed`, applied after the ReLU.
    pub post: Conv1x1,
}

impl Branch {
    fn random<R: Rng + ?Sized>(c_in: usize, c_embed: usize, gain: f64, rng: &mut R) -> Self {
        Self {
            embed: Conv1x1::random_with_gain(c_in, c_embed, gain, rng),
            norm: Norm::identity(c_embed),
            gamma: Conv1x1::random_with_gain(c_embed, c_embed, gain, rng),
            beta: Conv1x1::random_with_gain(c_embed, c_embed, gain, rng),
            post: Conv1x1::random_with_gain(c_embed, c_embed, gain, rng),
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            embed: zero_conv(&self.embed),
            norm: Norm {
                scale: DVector::zeros(self.norm.scale.len()),
                shift: DVector::zeros(self.norm.shift.len()),
            },
            gamma: zero_conv(&self.gamma),
            beta: zero_conv(&self.beta),
            post: zero_conv(&self.post),
        }
    }
}

fn zero_conv(c: &Conv1x1) -> Conv1x1 {
    Conv1x1::zeros(c.c_in(), c.c_out())
}

/// All learnable tensors of the block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams {
    pub green: Branch,
    pub blue: Branch,
    /// `c_in → c_orange`
    pub orange: Conv1x1,
    /// `c_orange → c_in`
    pub out: Conv1x1,
    pub out_norm: Norm,
}

impl BlockParams {
    /// Output convolution starts at zero so the block begins as the identity.
    pub fn init<R: Rng + ?Sized>(cfg: &BlockConfig, rng: &mut R) -> Self {
        Self {
            green: Branch::random(cfg.c_in, cfg.c_embed, 1.0, rng),
            blue: Branch::random(cfg.c_in, cfg.c_embed, 1.0, rng),
            orange: Conv1x1::random(cfg.c_in, cfg.c_orange, rng),
            out: Conv1x1::zeros(cfg.c_orange, cfg.c_in),
            out_norm: Norm::identity(cfg.c_in),
        }
    }

    pub fn zeros(cfg: &BlockConfig) -> Self {
        let branch = || Branch {
            embed: Conv1x1::zeros(cfg.c_in, cfg.c_embed),
            norm: Norm::identity(cfg.c_embed),
            gamma: Conv1x1::zeros(cfg.c_embed, cfg.c_embed),
            beta: Conv1x1::zeros(cfg.c_embed, cfg.c_embed),
            post: Conv1x1::zeros(cfg.c_embed, cfg.c_embed),
        };
        Self {
            green: branch(),
            blue: branch(),
            orange: Conv1x1::zeros(cfg.c_in, cfg.c_orange),
            out: Conv1x1::zeros(cfg.c_orange, cfg.c_in),
            out_norm: Norm::identity(cfg.c_in),
        }
    }

    /// Every tensor random, including the output convolution, with weights
    /// drawn at unit output variance (`±sqrt(3/fan_in)`).
    ///
    /// At the training initialization the predicted DAV stays close to 0.5,
    /// the aggregated features are nearly constant and the output
    /// normalization divides by a tiny deviation; finite differences there
    /// are dominated by round-off. This point is better conditioned.
    pub fn random<R: Rng + ?Sized>(cfg: &BlockConfig, rng: &mut R) -> Self {
        let gain = 3f64.sqrt();
        let mut p = Self {
            green: Branch::random(cfg.c_in, cfg.c_embed, gain, rng),
            blue: Branch::random(cfg.c_in, cfg.c_embed, gain, rng),
            orange: Conv1x1::random_with_gain(cfg.c_in, cfg.c_orange, gain, rng),
            out: Conv1x1::random_with_gain(cfg.c_orange, cfg.c_in, gain, rng),
            out_norm: Norm::identity(cfg.c_in),
        };
        for norm in [&mut p.green.norm, &mut p.blue.norm, &mut p.out_norm] {
            norm.scale.apply(|s| *s = rng.random_range(0.5..1.5));
            norm.shift.apply(|s| *s = rng.random_range(-0.5..0.5));
        }
        p
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            green: self.green.zeros_like(),
            blue: self.blue.zeros_like(),
            orange: zero_conv(&self.orange),
            out: zero_conv(&self.out),
            out_norm: Norm {
                scale: DVector::zeros(self.out_norm.scale.len()),
                shift: DVector::zeros(self.out_norm.shift.len()),
            },
        }
    }

    /// Named flat views of every tensor, in serialization order.
    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let mut out: Vec<(&'static str, &[f64])> = Vec::with_capacity(26);
        for (prefix, b) in [("green", &self.green), ("blue", &self.blue)] {
            let names = branch_names(prefix);
            out.push((names[0], b.embed.weight.as_slice()));
            out.push((names[1], b.embed.bias.as_slice()));
            out.push((names[2], b.norm.scale.as_slice()));
            out.push((names[3], b.norm.shift.as_slice()));
            out.push((names[4], b.gamma.weight.as_slice()));
            out.push((names[5], b.gamma.bias.as_slice()));
            out.push((names[6], b.beta.weight.as_slice()));
            out.push((names[7], b.beta.bias.as_slice()));
            out.push((names[8], b.post.weight.as_slice()));
            out.push((names[9], b.post.bias.as_slice()));
        }
        out.push(("orange.weight", self.orange.weight.as_slice()));
        out.push(("orange.bias", self.orange.bias.as_slice()));
        out.push(("out.weight", self.out.weight.as_slice()));
        out.push(("out.bias", self.out.bias.as_slice()));
        out.push(("out_norm.scale", self.out_norm.scale.as_slice()));
        out.push(("out_norm.shift", self.out_norm.shift.as_slice()));
        out
    }

    /// Mutable counterpart of [`tensors`](Self::tensors), same order.
    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let mut out: Vec<(&'static str, &mut [f64])> = Vec::with_capacity(26);
        for (prefix, b) in [("green", &mut self.green), ("blue", &mut self.blue)] {
            let names = branch_names(prefix);
            out.push((names[0], b.embed.weight.as_mut_slice()));
            out.push((names[1], b.embed.bias.as_mut_slice()));
            out.push((names[2], b.norm.scale.as_mut_slice()));
            out.push((names[3], b.norm.shift.as_mut_slice()));
            out.push((names[4], b.gamma.weight.as_mut_slice()));
            out.push((names[5], b.gamma.bias.as_mut_slice()));
            out.push((names[6], b.beta.weight.as_mut_slice()));
            out.push((names[7], b.beta.bias.as_mut_slice()));
            out.push((names[8], b.post.weight.as_mut_slice()));
            out.push((names[9], b.post.bias.as_mut_slice()));
        }
        out.push(("orange.weight", self.orange.weight.as_mut_slice()));
        out.push(("orange.bias", self.orange.bias.as_mut_slice()));
        out.push(("out.weight", self.out.weight.as_mut_slice()));
        out.push(("out.bias", self.out.bias.as_mut_slice()));
        out.push(("out_norm.scale", self.out_norm.scale.as_mut_slice()));
        out.push(("out_norm.shift", self.out_norm.shift.as_mut_slice()));
        out
    }

    /// Tensor shapes `(rows, cols)` in serialization order for `cfg`.
    pub fn shapes(cfg: &BlockConfig) -> Vec<(usize, usize)> {
        let (ci, ce, co) = (cfg.c_in, cfg.c_embed, cfg.c_orange);
        let branch = [
            (ce, ci),
            (ce, 1),
            (ce, 1),
            (ce, 1),
            (ce, ce),
            (ce, 1),
            (ce, ce),
            (ce, 1),
            (ce, ce),
            (ce, 1),
        ];
        let mut out = Vec::with_capacity(26);
        out.extend(branch);
        out.extend(branch);
        out.extend([(co, ci), (co, 1), (ci, co), (ci, 1), (ci, 1), (ci, 1)]);
        out
    }

    /// Rebuilds parameters from flat tensors in serialization order.
    pub fn from_tensors(cfg: &BlockConfig, tensors: &[Vec<f64>]) -> Result<Self> {
        let shapes = Self::shapes(cfg);
        if tensors.len() != shapes.len() {
            return Err(Error::config(format!(
                "expected {} tensors, got {}",
                shapes.len(),
                tensors.len()
            )));
        }
        for (i, ((r, c), t)) in shapes.iter().zip(tensors).enumerate() {
            if t.len() != r * c {
                return Err(Error::config(format!(
                    "tensor {i} has {} values, expected {}",
                    t.len(),
                    r * c
                )));
            }
        }
        let mut p = Self::zeros(cfg);
        for ((_, dst), src) in p.tensors_mut().into_iter().zip(tensors) {
            dst.copy_from_slice(src);
        }
        Ok(p)
    }

    pub fn config_matches(&self, cfg: &BlockConfig) -> bool {
        let shapes = Self::shapes(cfg);
        let tensors = self.tensors();
        let conv_shapes = [
            (&self.green.embed, shapes[0]),
            (&self.blue.embed, shapes[10]),
            (&self.orange, shapes[20]),
            (&self.out, shapes[22]),
        ];
        conv_shapes
            .iter()
            .all(|(c, (r, k))| c.c_out() == *r && c.c_in() == *k)
            && tensors
                .iter()
                .zip(&shapes)
                .all(|((_, t), (r, c))| t.len() == r * c)
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// `self -= lr * grad`, tensor by tensor.
    pub fn descend(&mut self, grad: &BlockParams, lr: f64) {
        for ((_, p), (_, g)) in self.tensors_mut().into_iter().zip(grad.tensors()) {
            for (pi, gi) in p.iter_mut().zip(g) {
                *pi -= lr * gi;
            }
        }
    }
}

fn branch_names(prefix: &str) -> [&'static str; 10] {
    match prefix {
        "green" => [
            "green.embed.weight",
            "green.embed.bias",
            "green.norm.scale",
            "green.norm.shift",
            "green.gamma.weight",
            "green.gamma.bias",
            "green.beta.weight",
            "green.beta.bias",
            "green.post.weight",
            "green.post.bias",
        ],
        _ => [
            "blue.embed.weight",
            "blue.embed.bias",
            "blue.norm.scale",
            "blue.norm.shift",
            "blue.gamma.weight",
            "blue.gamma.bias",
            "blue.beta.weight",
            "blue.beta.bias",
            "blue.post.weight",
            "blue.post.bias",
        ],
    }
}

/// Gradient of a scalar loss with respect to every parameter and the input.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientBundle {
    pub params: BlockParams,
    /// `(h·w) × c_in`, same layout as the input feature matrix.
    pub input: DMatrix<f64>,
}
