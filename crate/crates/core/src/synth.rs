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

//! Procedural planar scenes with exact plane labels.
//!
//! Camera frame: origin at the optical center, `x` right, `y` down, `z`
//! forward. Pixel `(u, v)` casts the ray `((u - cx)/fx, (v - cy)/fy, 1)`,
//! so the parameter of the intersection is also its depth.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, DepthMap, Plane, Point3};

/// Smallest share of the image each generated plane must cover.
pub const MIN_PLANE_COVERAGE: f64 = 0.07;
/// Rejection-sampling budget of [`make_room`].
pub const MAX_ROOM_ATTEMPTS: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Earlier planes win exact depth ties.
    pub planes: Vec<Plane>,
    pub camera: CameraIntrinsics,
    pub seed: u64,
    pub depth_bounds: (f64, f64),
    /// Standard deviation of additive Gaussian depth noise, meters.
    #[serde(default)]
    pub noise_sigma: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledScene {
    pub depth: DepthMap,
    /// Plane index per pixel, `None` where no plane is hit within bounds.
    pub labels: Vec<Option<usize>>,
    pub spec: SceneSpec,
}

impl LabeledScene {
    /// Pixels labeled with each plane.
    pub fn label_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.spec.planes.len()];
        for l in self.labels.iter().flatten() {
            counts[*l] += 1;
        }
        counts
    }

    /// Pixel indices per plane, ascending.
    pub fn regions(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.spec.planes.len()];
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(l) = l {
                out[*l].push(i);
            }
        }
        out
    }
}

/// Depth at which the ray through `(u, v)` meets `plane`, if in front.
pub fn intersect(camera: &CameraIntrinsics, plane: &Plane, u: f64, v: f64) -> Option<f64> {
    let r = camera.ray(u, v);
    let denom = plane.normal[0] * r.x + plane.normal[1] * r.y + plane.normal[2] * r.z;
    if denom == 0.0 {
        return None;
    }
    let t = -plane.offset / denom;
    (t > 0.0 && t.is_finite()).then_some(t)
}

fn render_labels(spec: &SceneSpec) -> (Vec<f64>, Vec<Option<usize>>) {
    let k = &spec.camera;
    let (lo, hi) = spec.depth_bounds;
    let mut depth = vec![0.0; k.width * k.height];
    let mut labels = vec![None; k.width * k.height];
    for v in 0..k.height {
        for u in 0..k.width {
            let mut best: Option<(f64, usize)> = None;
            for (idx, plane) in spec.planes.iter().enumerate() {
                if let Some(t) = intersect(k, plane, u as f64, v as f64) {
                    if best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, idx));
                    }
                }
            }
            if let Some((t, idx)) = best.filter(|(t, _)| *t >= lo && *t <= hi) {
                depth[v * k.width + u] = t;
                labels[v * k.width + u] = Some(idx);
            }
        }
    }
    (depth, labels)
}

/// Casts one ray per pixel and keeps the nearest positive intersection.
/// Depths outside `depth_bounds` leave the pixel invalid.
pub fn render(spec: &SceneSpec) -> Result<LabeledScene> {
    spec.camera.validate()?;
    let (lo, hi) = spec.depth_bounds;
    if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
        return Err(Error::config("depth bounds must satisfy 0 < min < max"));
    }
    if spec.planes.is_empty() {
        return Err(Error::config("scene has no planes"));
    }
    if !(spec.noise_sigma.is_finite() && spec.noise_sigma >= 0.0) {
        return Err(Error::config("noise sigma must be finite and non-negative"));
    }
    let (mut depth, labels) = render_labels(spec);
    if labels.iter().all(|l| l.is_none()) {
        return Err(Error::config("no pixel sees a plane within the depth bounds"));
    }
    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x6e6f_6973_65);
        let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::config(e.to_string()))?;
        for (d, l) in depth.iter_mut().zip(&labels) {
            if l.is_some() {
                *d += normal.sample(&mut rng);
            }
        }
    }
    let mask: Vec<bool> = labels.iter().map(|l| l.is_some()).collect();
    let depth = DepthMap::with_mask(spec.camera.height, spec.camera.width, depth, mask)?;
    Ok(LabeledScene {
        depth,
        labels,
        spec: spec.clone(),
    })
}

fn axis_plane(normal: [f64; 3], anchor: Point3) -> Plane {
    Plane::from_normal_and_point(normal, anchor).expect("axis normals are unit length")
}

/// Draws every room plane once; the caller truncates.
fn sample_room<R: Rng>(rng: &mut R, camera: &CameraIntrinsics, n_planes: usize) -> Vec<Plane> {
    let back = rng.random_range(3.0..6.0);
    // Half extents of the view frustum at the back wall.
    let half_x = back * camera.width as f64 / (2.0 * camera.fx);
    let half_y = back * camera.height as f64 / (2.0 * camera.fy);
    let mut planes = vec![
        axis_plane([0.0, 0.0, -1.0], Point3::new(0.0, 0.0, back)),
        axis_plane([0.0, -1.0, 0.0], Point3::new(0.0, half_y * rng.random_range(0.35..0.7), 0.0)),
        axis_plane([0.0, 1.0, 0.0], Point3::new(0.0, -half_y * rng.random_range(0.35..0.7), 0.0)),
        axis_plane([1.0, 0.0, 0.0], Point3::new(-half_x * rng.random_range(0.45..0.75), 0.0, 0.0)),
        axis_plane([-1.0, 0.0, 0.0], Point3::new(half_x * rng.random_range(0.45..0.75), 0.0, 0.0)),
    ];
    while planes.len() < n_planes {
        // Panel in front of the back wall, tilted 20° to 50° off the view axis.
        let z = rng.random_range(1.5..back - 0.5);
        let anchor = Point3::new(
            rng.random_range(-0.5..0.5) * half_x * z / back,
            rng.random_range(-0.5..0.5) * half_y * z / back,
            z,
        );
        let tilt = rng.random_range(20f64..50.0).to_radians();
        let azimuth = rng.random_range(0.0..std::f64::consts::TAU);
        let normal = [
            tilt.sin() * azimuth.cos(),
            tilt.sin() * azimuth.sin(),
            -tilt.cos(),
        ];
        planes.push(Plane::from_normal_and_point(normal, anchor).expect("unit normal"));
    }
    planes.truncate(n_planes);
    planes
}

/// Deterministic room: back wall, floor, ceiling, left and right walls,
/// then slanted panels, truncated to `n_planes`. Resamples until every
/// plane covers at least [`MIN_PLANE_COVERAGE`] of the image and every
/// pixel is valid.
pub fn make_room(seed: u64, n_planes: usize, camera: &CameraIntrinsics) -> Result<SceneSpec> {
    camera.validate()?;
    if n_planes == 0 {
        return Err(Error::config("a room needs at least one plane"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pixels = (camera.width * camera.height) as f64;
    for _ in 0..MAX_ROOM_ATTEMPTS {
        let spec = SceneSpec {
            planes: sample_room(&mut rng, camera, n_planes),
            camera: *camera,
            seed,
            depth_bounds: (0.1, 20.0),
            noise_sigma: 0.0,
        };
        let (_, labels) = render_labels(&spec);
        if labels.iter().any(|l| l.is_none()) {
            continue;
        }
        let mut counts = vec![0usize; n_planes];
        for l in labels.iter().flatten() {
            counts[*l] += 1;
        }
        if counts.iter().all(|c| *c as f64 / pixels >= MIN_PLANE_COVERAGE) {
            return Ok(spec);
        }
    }
    Err(Error::Generation(format!(
        "no room with {n_planes} planes of at least {}% coverage after {MAX_ROOM_ATTEMPTS} attempts",
        MIN_PLANE_COVERAGE * 100.0
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn camera() -> CameraIntrinsics {
        CameraIntrinsics::centered(32, 24, 30.0)
    }

    fn spec(planes: Vec<Plane>) -> SceneSpec {
        SceneSpec {
            planes,
            camera: camera(),
            seed: 0,
            depth_bounds: (0.1, 100.0),
            noise_sigma: 0.0,
        }
    }

    #[test]
    fn fronto_parallel_plane() {
        let s = render(&spec(vec![axis_plane([0.0, 0.0, 1.0], Point3::new(0.0, 0.0, 2.0))])).unwrap();
        assert!(s.depth.values().iter().all(|d| *d == 2.0));
        assert!(s.labels.iter().all(|l| *l == Some(0)));
    }

    #[test]
    fn floor_matches_closed_form() {
        let k = camera();
        let s = render(&spec(vec![axis_plane([0.0, 1.0, 0.0], Point3::new(0.0, 1.5, 0.0))])).unwrap();
        for v in 0..k.height {
            for u in 0..k.width {
                let i = v * k.width + u;
                let dy = v as f64 - k.cy;
                if dy > 0.0 {
                    let want = 1.5 * k.fy / dy;
                    assert!((s.depth.values()[i] - want).abs() < 1e-9 * want);
                } else {
                    assert!(!s.depth.mask()[i]);
                }
            }
        }
    }

    #[test]
    fn occlusion_and_errors() {
        let near = axis_plane([0.0, 0.0, 1.0], Point3::new(0.0, 0.0, 2.0));
        let far = axis_plane([0.0, 0.0, 1.0], Point3::new(0.0, 0.0, 3.0));
        let s = render(&spec(vec![near, far])).unwrap();
        assert!(s.labels.iter().all(|l| *l == Some(0)));
        let s = render(&spec(vec![far, near])).unwrap();
        assert!(s.labels.iter().all(|l| *l == Some(1)));
        let behind = axis_plane([0.0, 0.0, 1.0], Point3::new(0.0, 0.0, -1.0));
        assert!(matches!(render(&spec(vec![behind])), Err(Error::Config(_))));
    }

    #[test]
    fn rooms_are_deterministic_and_covered() {
        let k = camera();
        assert_eq!(make_room(7, 4, &k).unwrap(), make_room(7, 4, &k).unwrap());
        let one = make_room(3, 1, &k).unwrap();
        assert_eq!(one.planes.len(), 1);
        assert_eq!(one.planes[0].normal, [0.0, 0.0, -1.0]);
        let s = render(&make_room(42, 3, &k).unwrap()).unwrap();
        let total = (k.width * k.height) as f64;
        assert!(s.label_counts().iter().all(|c| *c as f64 / total >= MIN_PLANE_COVERAGE));
        assert!(make_room(0, 0, &k).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let mut sp = make_room(5, 2, &camera()).unwrap();
        sp.noise_sigma = 0.01;
        let a = render(&sp).unwrap();
        let b = render(&sp).unwrap();
        assert_eq!(a.depth, b.depth);
        sp.noise_sigma = 0.0;
        assert_ne!(a.depth, render(&sp).unwrap().depth);
    }
}
