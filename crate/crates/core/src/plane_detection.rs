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

//! Sequential RANSAC extraction of the most prominent planes.
//!
//! Each round samples 3-point hypotheses, keeps the one with the most
//! inliers (earliest trial wins ties), refits it by total least squares on
//! its inliers and recounts once. The inliers are then removed and the
//! next round runs on what is left, so inlier sets are disjoint.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{fit_plane_lsq, IndexedPoint, Plane, Point3};

/// RANSAC settings; defaults are 1 cm threshold, 100 iterations, at most
/// 5 planes, each covering more than 7% of the image.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub inlier_threshold: f64,
    pub max_iterations: usize,
    pub max_planes: usize,
    pub min_coverage: f64,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            inlier_threshold: 0.01,
            max_iterations: 100,
            max_planes: 5,
            min_coverage: 0.07,
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold > 0.0 && self.inlier_threshold.is_finite()) {
            return Err(Error::config("inlier threshold must be positive"));
        }
        if !(0.0..=1.0).contains(&self.min_coverage) {
            return Err(Error::config("min coverage must lie in [0, 1]"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max iterations must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectedPlane {
    pub plane: Plane,
    /// Flat pixel indices, ascending.
    pub inlier_pixels: Vec<usize>,
    /// `inlier_pixels.len() / image_pixel_count`.
    pub coverage: f64,
}

impl DetectedPlane {
    pub fn inlier_count(&self) -> usize {
        self.inlier_pixels.len()
    }
}

// Cap on rejected (collinear) samples so a degenerate cloud cannot spin forever.
const DEGENERATE_DRAWS_PER_ITERATION: usize = 64;

fn inlier_positions(points: &[IndexedPoint], plane: &Plane, threshold: f64) -> Vec<usize> {
    points
        .iter()
        .enumerate()
        .filter(|(_, p)| plane.signed_distance(p.point).abs() <= threshold)
        .map(|(i, _)| i)
        .collect()
}

fn count_inliers(points: &[IndexedPoint], plane: &Plane, threshold: f64) -> usize {
    points
        .iter()
        .filter(|p| plane.signed_distance(p.point).abs() <= threshold)
        .count()
}

/// Best single plane over `cfg.max_iterations` non-degenerate 3-point samples.
///
/// Returns the inlier positions into `points` alongside the plane; the
/// public wrapper [`ransac_single`] converts them to pixel indices.
fn ransac_core<R: Rng + ?Sized>(
    points: &[IndexedPoint],
    cfg: &RansacConfig,
    rng: &mut R,
) -> Result<(Plane, Vec<usize>)> {
    if points.len() < 3 {
        return Err(Error::degenerate(format!(
            "RANSAC needs at least 3 points, got {}",
            points.len()
        )));
    }
    let mut best: Option<(Plane, usize)> = None;
    let mut trials = 0;
    let mut rejected = 0;
    let reject_cap = DEGENERATE_DRAWS_PER_ITERATION * cfg.max_iterations;
    while trials < cfg.max_iterations {
        let idx = sample(rng, points.len(), 3);
        let (a, b, c) = (
            points[idx.index(0)].point,
            points[idx.index(1)].point,
            points[idx.index(2)].point,
        );
        let Some(plane) = Plane::through_points(a, b, c) else {
            rejected += 1;
            if rejected >= reject_cap {
                break;
            }
            continue;
        };
        trials += 1;
        let count = count_inliers(points, &plane, cfg.inlier_threshold);
        // Strictly greater keeps the earliest trial on ties.
        if best.is_none_or(|(_, n)| count > n) {
            best = Some((plane, count));
        }
    }
    let Some((hypothesis, _)) = best else {
        return Err(Error::degenerate("every sampled triple was collinear"));
    };
    let inliers = inlier_positions(points, &hypothesis, cfg.inlier_threshold);
    let support: Vec<Point3> = inliers.iter().map(|&i| points[i].point).collect();
    let refit = fit_plane_lsq(&support).unwrap_or(hypothesis);
    let inliers = inlier_positions(points, &refit, cfg.inlier_threshold);
    Ok((refit, inliers))
}

/// Single RANSAC round over `points`.
pub fn ransac_single<R: Rng + ?Sized>(
    points: &[IndexedPoint],
    image_pixel_count: usize,
    cfg: &RansacConfig,
    rng: &mut R,
) -> Result<DetectedPlane> {
    cfg.validate()?;
    let (plane, inliers) = ransac_core(points, cfg, rng)?;
    let mut inlier_pixels: Vec<usize> = inliers.iter().map(|&i| points[i].pixel).collect();
    inlier_pixels.sort_unstable();
    Ok(DetectedPlane {
        plane,
        coverage: inlier_pixels.len() as f64 / image_pixel_count.max(1) as f64,
        inlier_pixels,
    })
}

/// Greedy extraction of up to `cfg.max_planes` planes, strongest first.
pub fn extract_planes(
    points: &[IndexedPoint],
    image_pixel_count: usize,
    cfg: &RansacConfig,
) -> Result<Vec<DetectedPlane>> {
    cfg.validate()?;
    let mut found = Vec::new();
    if cfg.max_planes == 0 {
        return Ok(found);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut remaining = points.to_vec();
    while found.len() < cfg.max_planes {
        let candidate = match ransac_single(&remaining, image_pixel_count, cfg, &mut rng) {
            Ok(c) => c,
            Err(e) if found.is_empty() => return Err(e),
            Err(e) => {
                log::debug!("stopping plane extraction: {e}");
                break;
            }
        };
        if candidate.coverage < cfg.min_coverage || candidate.inlier_pixels.is_empty() {
            break;
        }
        remaining.retain(|p| candidate.inlier_pixels.binary_search(&p.pixel).is_err());
        found.push(candidate);
    }
    found.sort_by(|a, b| b.inlier_count().cmp(&a.inlier_count()));
    Ok(found)
}
