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

//! Central finite-difference checks of the block's analytic gradients.
//!
//! The probe loss is a fixed random linear functional of both outputs,
//! `L = Σ R_y ⊙ Y + Σ R_d ⊙ DAV`, so its upstream gradients are exactly
//! `(R_y, R_d)` and every path through the block is exercised.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::block::{backward, forward_with_attention, BlockConfig, BlockParams, FeatureMap, Upstream};
use crate::error::{Error, Result};

/// Relative error `|a - n| / max(|a|, |n|, floor)`.
///
/// The floor keeps entries whose true gradient is near zero from turning
/// round-off in the difference quotient into a large ratio.
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheckConfig {
    pub h: usize,
    pub w: usize,
    pub block: BlockConfig,
    pub step: f64,
    pub tolerance: f64,
    pub floor: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            h: 4,
            w: 4,
            block: BlockConfig {
                c_in: 8,
                ..Default::default()
            },
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-4,
            seed: 0,
        }
    }
}

/// Outcome for one tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorCheck {
    pub name: String,
    pub entries: usize,
    /// Entries whose stencil flips a ReLU, where the block is not
    /// differentiable and the difference quotient means nothing.
    pub skipped: usize,
    pub max_relative_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.tensors.iter().all(|t| t.passed)
    }

    /// Plain-text table, one tensor per line.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{:<20} {:>8} {:>8} {:>14}  result\n",
            "tensor", "entries", "skipped", "max rel err"
        );
        for t in &self.tensors {
            out.push_str(&format!(
                "{:<20} {:>8} {:>8} {:>14.3e}  {}\n",
                t.name,
                t.entries,
                t.skipped,
                t.max_relative_error,
                if t.passed { "pass" } else { "FAIL" }
            ));
        }
        out
    }
}

/// Test hook applied to the analytic gradients before comparison.
pub type Corruption = fn(&mut BlockParams, &mut DMatrix<f64>);

/// Block outputs plus the ReLU activation pattern of both branches.
struct Outputs {
    y: FeatureMap,
    dav: DMatrix<f64>,
    active: Vec<bool>,
}

fn probe_outputs(x: &FeatureMap, params: &BlockParams, cfg: &BlockConfig) -> Result<Outputs> {
    let cache = forward_with_attention(x, params, cfg, None)?;
    let active = cache
        .green
        .denorm
        .iter()
        .chain(cache.blue.denorm.iter())
        .map(|d| *d > 0.0)
        .collect();
    Ok(Outputs {
        y: cache.y,
        dav: cache.dav,
        active,
    })
}

/// `(L(+h) - L(-h)) / 2h` for the linear probe loss. Output differences are
/// taken per entry and summed with Neumaier compensation, so the quotient is
/// not swamped by round-off in two large, nearly equal loss totals.
///
/// `None` when either side changes the activation pattern of `base`.
fn central_difference(base: &Outputs, plus: &Outputs, minus: &Outputs, up: &Upstream, h: f64) -> Option<f64> {
    if plus.active != base.active || minus.active != base.active {
        return None;
    }
    let terms = up
        .dy
        .iter()
        .zip(plus.y.data.iter().zip(minus.y.data.iter()))
        .chain(up.ddav.iter().zip(plus.dav.iter().zip(minus.dav.iter())))
        .map(|(r, (a, b))| r * (a - b));
    Some(compensated_sum(terms) / (2.0 * h))
}

fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        carry += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + carry
}

fn check_entries(
    name: &str,
    analytic: &[f64],
    cfg: &GradCheckConfig,
    mut numeric: impl FnMut(usize) -> Result<Option<f64>>,
) -> Result<TensorCheck> {
    let mut worst: f64 = 0.0;
    let mut skipped = 0;
    for (i, a) in analytic.iter().enumerate() {
        match numeric(i)? {
            Some(n) => worst = worst.max(relative_error(*a, n, cfg.floor)),
            None => skipped += 1,
        }
    }
    Ok(TensorCheck {
        name: name.to_string(),
        entries: analytic.len(),
        skipped,
        max_relative_error: worst,
        passed: worst < cfg.tolerance,
    })
}

/// Compares every parameter tensor and the input gradient against central
/// differences on a seeded random instance.
pub fn check_block(cfg: &GradCheckConfig, corrupt: Option<Corruption>) -> Result<GradCheckReport> {
    cfg.block.validate()?;
    if cfg.h == 0 || cfg.w == 0 {
        return Err(Error::config("grad-check shape must be non-empty"));
    }
    if !(cfg.step > 0.0 && cfg.step.is_finite()) {
        return Err(Error::config("finite-difference step must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x = FeatureMap::random(cfg.h, cfg.w, cfg.block.c_in, &mut rng);
    // All tensors random so no gradient path is trivially zero.
    let params = BlockParams::random(&cfg.block, &mut rng);
    let n = x.positions();
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let up = Upstream {
        dy: DMatrix::from_fn(n, cfg.block.c_in, |_, _| normal()),
        ddav: DMatrix::from_fn(n, n, |_, _| normal()),
    };

    let mut grads = backward(&x, &params, &cfg.block, &up)?;
    if let Some(hook) = corrupt {
        hook(&mut grads.params, &mut grads.input);
    }

    let h = cfg.step;
    let base_out = probe_outputs(&x, &params, &cfg.block)?;
    let mut tensors = Vec::new();
    let analytic: Vec<(String, Vec<f64>)> = grads
        .params
        .tensors()
        .into_iter()
        .map(|(name, t)| (name.to_string(), t.to_vec()))
        .collect();
    for (k, (name, a)) in analytic.iter().enumerate() {
        let mut probe = params.clone();
        let check = check_entries(name, a, cfg, |i| {
            let base = probe.tensors()[k].1[i];
            probe.tensors_mut()[k].1[i] = base + h;
            let plus = probe_outputs(&x, &probe, &cfg.block)?;
            probe.tensors_mut()[k].1[i] = base - h;
            let minus = probe_outputs(&x, &probe, &cfg.block)?;
            probe.tensors_mut()[k].1[i] = base;
            Ok(central_difference(&base_out, &plus, &minus, &up, h))
        })?;
        tensors.push(check);
    }

    let mut xp = x.clone();
    let input = check_entries("input", grads.input.as_slice(), cfg, |i| {
        let base = xp.data.as_slice()[i];
        xp.data.as_mut_slice()[i] = base + h;
        let plus = probe_outputs(&xp, &params, &cfg.block)?;
        xp.data.as_mut_slice()[i] = base - h;
        let minus = probe_outputs(&xp, &params, &cfg.block)?;
        xp.data.as_mut_slice()[i] = base;
        Ok(central_difference(&base_out, &plus, &minus, &up, h))
    })?;
    tensors.push(input);
    Ok(GradCheckReport { tensors })
}

/// Negative control: flips the sign of the orange-conv weight gradient.
pub fn flip_orange_weight(params: &mut BlockParams, _input: &mut DMatrix<f64>) {
    params.orange.weight.neg_mut();
}
