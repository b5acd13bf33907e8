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

//! Toy training loop: fit the DAV predictor to a ground-truth volume.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backward::{backward_from_cache, Upstream};
use super::forward::forward_with_attention;
use super::params::{BlockConfig, BlockParams};
use super::FeatureMap;
use crate::dav::{ground_truth_dav, DavConfig};
use crate::error::{Error, Result};
use crate::geometry::DepthMap;
use crate::losses::{l_attention, LossWeights};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyTrainConfig {
    pub block: BlockConfig,
    pub dav: DavConfig,
    pub weights: LossWeights,
    /// Seeds both the fixed input features and the initial parameters.
    pub seed: u64,
}

impl Default for ToyTrainConfig {
    fn default() -> Self {
        Self {
            block: BlockConfig::default(),
            dav: DavConfig::default(),
            weights: LossWeights::default(),
            seed: 0,
        }
    }
}

/// Result of a toy run.
#[derive(Clone, Debug)]
pub struct ToyRun {
    /// `L_attention` before each step, plus the value after the last one
    /// (`steps + 1` entries).
    pub trace: Vec<f64>,
    pub params: BlockParams,
}

/// Plain gradient descent on `L_attention` between the predicted DAV of a
/// fixed random feature map and the scene's ground-truth DAV.
pub fn toy_train(scene: &DepthMap, cfg: &ToyTrainConfig, steps: usize, learning_rate: f64) -> Result<ToyRun> {
    cfg.block.validate()?;
    cfg.weights.validate()?;
    if !(learning_rate.is_finite() && learning_rate >= 0.0) {
        return Err(Error::config("learning rate must be finite and non-negative"));
    }
    let (gt, _) = ground_truth_dav(scene, &cfg.dav)?;
    let target = gt.as_matrix();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let x = FeatureMap::random(gt.h, gt.w, cfg.block.c_in, &mut rng);
    let mut params = BlockParams::init(&cfg.block, &mut rng);

    let mut trace = Vec::with_capacity(steps + 1);
    for step in 0..=steps {
        let cache = forward_with_attention(&x, &params, &cfg.block, None)?;
        let loss = l_attention(&cache.dav, &target, &cfg.weights)?;
        if !loss.value.is_finite() {
            return Err(Error::Divergence { step });
        }
        trace.push(loss.value);
        if step == steps {
            break;
        }
        let upstream = Upstream::dav_only(loss.gradient, cfg.block.c_in);
        let grad = backward_from_cache(&x, &params, &cfg.block, &cache, &upstream)?;
        params.descend(&grad.params, learning_rate);
    }
    Ok(ToyRun { trace, params })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene() -> DepthMap {
        // Two fronto-parallel halves: near on the left, far on the right.
        DepthMap::from_fn(16, 16, |_, u| if u < 8 { 1.0 } else { 3.0 }).unwrap()
    }

    fn cfg() -> ToyTrainConfig {
        let mut c = ToyTrainConfig {
            block: BlockConfig {
                c_in: 4,
                c_embed: 6,
                c_orange: 2,
                ..Default::default()
            },
            ..Default::default()
        };
        c.dav.factor = 4;
        c.dav.ransac.max_planes = 0;
        c
    }

    #[test]
    fn zero_rate_is_flat() {
        let run = toy_train(&scene(), &cfg(), 5, 0.0).unwrap();
        assert_eq!(run.trace.len(), 6);
        assert!(run.trace.iter().all(|v| *v == run.trace[0]));
    }

    #[test]
    fn descends_and_replays() {
        let a = toy_train(&scene(), &cfg(), 20, 0.5).unwrap();
        let b = toy_train(&scene(), &cfg(), 20, 0.5).unwrap();
        assert_eq!(a.trace, b.trace);
        assert!(a.trace[20] < a.trace[0]);
    }

    #[test]
    fn rejects_bad_rate() {
        assert!(toy_train(&scene(), &cfg(), 1, f64::NAN).is_err());
    }
}
