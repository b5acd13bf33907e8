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

//! Ground-truth depth-attention volumes.
//!
//! For two subsampled cells `p`, `q` with depths `d_p`, `d_q`:
//!
//! * zero order: `A0(p, q) = 1 - σ(|d_p - d_q|)`
//! * first order for plane `S`: `Ai(p, q) = 1 - σ(|S·X_p| + |S·X_q|)` with
//!   `X = (x_norm, y_norm, d, 1)`
//! * combined: `A_D = max_i Ai`
//!
//! As written these peak at 0.5. [`Variant::Rescaled`] doubles every score
//! so the diagonal reaches 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DepthMap, IndexedPoint, Plane, Point3};
use crate::plane_detection::{extract_planes, DetectedPlane, RansacConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Scores exactly as the formulas define them, in `(0, 0.5]`.
    #[default]
    Literal,
    /// Scores doubled, in `(0, 1]`.
    Rescaled,
}

impl Variant {
    fn scale(self) -> f64 {
        match self {
            Variant::Literal => 1.0,
            Variant::Rescaled => 2.0,
        }
    }

    /// Score of a pair whose argument is zero (the diagonal).
    pub fn max_score(self) -> f64 {
        0.5 * self.scale()
    }
}

/// `1 - σ(t)` evaluated as `σ(-t)`, which keeps precision for large `t`.
pub fn one_minus_sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + t.exp())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DavConfig {
    pub ransac: RansacConfig,
    pub factor: usize,
    pub variant: Variant,
}

impl Default for DavConfig {
    fn default() -> Self {
        Self {
            ransac: RansacConfig::default(),
            factor: 8,
            variant: Variant::Literal,
        }
    }
}

/// Depth samples on the subsampled grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SubsampledGrid {
    pub factor: usize,
    pub h: usize,
    pub w: usize,
    /// Row-major `h × w` depths in meters.
    pub depths: Vec<f64>,
    /// Row-major `h × w` normalized `(x, y)` image coordinates in `[0, 1]`.
    pub coords: Vec<(f64, f64)>,
    /// Flat full-resolution index of the center pixel of each cell.
    pub source_pixels: Vec<usize>,
}

impl SubsampledGrid {
    pub fn len(&self) -> usize {
        self.h * self.w
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(x_norm, y_norm, d)` of a cell, the space first-order planes live in.
    pub fn feature_point(&self, cell: usize) -> Point3 {
        let (x, y) = self.coords[cell];
        Point3::new(x, y, self.depths[cell])
    }
}

fn nearest_valid(depth: &DepthMap, row: usize, col: usize) -> Option<usize> {
    let w = depth.width();
    depth
        .mask()
        .iter()
        .enumerate()
        .filter(|(_, ok)| **ok)
        .map(|(i, _)| {
            let (dr, dc) = ((i / w) as isize - row as isize, (i % w) as isize - col as isize);
            (dr * dr + dc * dc, i)
        })
        .min()
        .map(|(_, i)| i)
}

/// Center-pixel subsampling: cell `(i, j)` reads full-resolution pixel
/// `(i·f + f/2, j·f + f/2)`. Invalid centers fall back to the nearest valid
/// pixel (ties broken by scan order).
pub fn subsample(depth: &DepthMap, factor: usize) -> Result<SubsampledGrid> {
    if factor == 0 {
        return Err(Error::config("subsampling factor must be at least 1"));
    }
    if depth.height() < factor || depth.width() < factor {
        return Err(Error::config(format!(
            "{}x{} image is smaller than subsampling factor {factor}",
            depth.height(),
            depth.width()
        )));
    }
    let (h, w) = (depth.height() / factor, depth.width() / factor);
    let (fh, fw) = (depth.height() as f64, depth.width() as f64);
    let mut depths = Vec::with_capacity(h * w);
    let mut coords = Vec::with_capacity(h * w);
    let mut source_pixels = Vec::with_capacity(h * w);
    for i in 0..h {
        for j in 0..w {
            let (v, u) = (i * factor + factor / 2, j * factor + factor / 2);
            let center = v * depth.width() + u;
            let src = if depth.mask()[center] {
                center
            } else {
                nearest_valid(depth, v, u)
                    .ok_or_else(|| Error::config("depth map has no valid pixel to sample"))?
            };
            depths.push(depth.values()[src]);
            coords.push(((u as f64 + 0.5) / fw, (v as f64 + 0.5) / fh));
            source_pixels.push(center);
        }
    }
    Ok(SubsampledGrid {
        factor,
        h,
        w,
        depths,
        coords,
        source_pixels,
    })
}

/// `H × W × H × W` attention tensor, row-major over `(p_row, p_col, q_row, q_col)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DAVolume {
    pub h: usize,
    pub w: usize,
    values: Vec<f64>,
}

impl DAVolume {
    pub fn from_values(h: usize, w: usize, values: Vec<f64>) -> Result<Self> {
        let n = h * w;
        if values.len() != n * n {
            return Err(Error::config(format!(
                "volume of {h}x{w} cells needs {} values, got {}",
                n * n,
                values.len()
            )));
        }
        Ok(Self { h, w, values })
    }

    /// Builds a symmetric volume, evaluating `score` once per unordered pair.
    pub fn from_symmetric_fn(h: usize, w: usize, score: impl Fn(usize, usize) -> f64 + Sync) -> Self {
        let n = h * w;
        let mut values = vec![0.0; n * n];
        values.par_chunks_mut(n).enumerate().for_each(|(p, row)| {
            for (q, slot) in row.iter_mut().enumerate() {
                let (a, b) = if p <= q { (p, q) } else { (q, p) };
                *slot = score(a, b);
            }
        });
        Self { h, w, values }
    }

    pub fn cells(&self) -> usize {
        self.h * self.w
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Score between flat cell indices `p` and `q`.
    pub fn get(&self, p: usize, q: usize) -> f64 {
        self.values[p * self.cells() + q]
    }

    pub fn as_matrix(&self) -> nalgebra::DMatrix<f64> {
        let n = self.cells();
        nalgebra::DMatrix::from_row_slice(n, n, &self.values)
    }
}

pub fn dav_zero_order(grid: &SubsampledGrid, variant: Variant) -> DAVolume {
    let s = variant.scale();
    DAVolume::from_symmetric_fn(grid.h, grid.w, |p, q| {
        s * one_minus_sigmoid((grid.depths[p] - grid.depths[q]).abs())
    })
}

/// First-order volume for a plane fitted in `(x_norm, y_norm, d)` space.
pub fn dav_first_order(grid: &SubsampledGrid, plane: &Plane, variant: Variant) -> DAVolume {
    let s = variant.scale();
    let dist: Vec<f64> = (0..grid.len())
        .map(|c| plane.signed_distance(grid.feature_point(c)).abs())
        .collect();
    DAVolume::from_symmetric_fn(grid.h, grid.w, |p, q| {
        s * one_minus_sigmoid(dist[p] + dist[q])
    })
}

/// Element-wise maximum.
pub fn dav_combine(volumes: &[DAVolume]) -> Result<DAVolume> {
    let (first, rest) = volumes
        .split_first()
        .ok_or_else(|| Error::config("cannot combine an empty list of volumes"))?;
    let mut out = first.clone();
    for v in rest {
        if v.h != out.h || v.w != out.w {
            return Err(Error::config(format!(
                "volume shapes differ: {}x{} vs {}x{}",
                out.h, out.w, v.h, v.w
            )));
        }
        for (a, b) in out.values.iter_mut().zip(&v.values) {
            *a = a.max(*b);
        }
    }
    Ok(out)
}

/// Points `(x_norm, y_norm, d)` for every valid full-resolution pixel.
pub fn normalized_points(depth: &DepthMap) -> Vec<IndexedPoint> {
    let (fh, fw) = (depth.height() as f64, depth.width() as f64);
    let mut out = Vec::with_capacity(depth.valid_count());
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            let pixel = v * depth.width() + u;
            if depth.mask()[pixel] {
                out.push(IndexedPoint {
                    pixel,
                    point: Point3::new(
                        (u as f64 + 0.5) / fw,
                        (v as f64 + 0.5) / fh,
                        depth.values()[pixel],
                    ),
                });
            }
        }
    }
    out
}

/// Subsample, detect planes in normalized space, then combine the
/// zero-order volume with one first-order volume per plane.
pub fn ground_truth_dav(depth: &DepthMap, cfg: &DavConfig) -> Result<(DAVolume, Vec<DetectedPlane>)> {
    let grid = subsample(depth, cfg.factor)?;
    let planes = if cfg.ransac.max_planes == 0 {
        cfg.ransac.validate()?;
        Vec::new()
    } else {
        extract_planes(&normalized_points(depth), depth.len(), &cfg.ransac)?
    };
    let mut volumes = Vec::with_capacity(planes.len() + 1);
    volumes.push(dav_zero_order(&grid, cfg.variant));
    volumes.extend(planes.iter().map(|p| dav_first_order(&grid, &p.plane, cfg.variant)));
    Ok((dav_combine(&volumes)?, planes))
}

/// Attention map of one query cell `(row, col)`, row-major `h × w`.
pub fn attention_slice(dav: &DAVolume, row: usize, col: usize) -> Result<Vec<f64>> {
    if row >= dav.h || col >= dav.w {
        return Err(Error::Bounds(format!(
            "query ({row}, {col}) outside {}x{} grid",
            dav.h, dav.w
        )));
    }
    let n = dav.cells();
    let p = row * dav.w + col;
    Ok(dav.values[p * n..(p + 1) * n].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // 1 - σ(1) and 1 - σ(2) to 17 digits, from mpmath.
    const ONE_MINUS_SIG1: f64 = 0.268_941_421_369_995_1;
    const ONE_MINUS_SIG2: f64 = 0.119_202_922_022_117_58;

    fn grid_from(depths: &[f64], h: usize, w: usize) -> SubsampledGrid {
        let d = DepthMap::from_values(h, w, depths.to_vec()).unwrap();
        subsample(&d, 1).unwrap()
    }

    #[test]
    fn subsample_shapes() {
        let d = DepthMap::constant(228, 304, 1.0).unwrap();
        let g = subsample(&d, 8).unwrap();
        assert_eq!((g.h, g.w), (28, 38));
        let d = DepthMap::constant(16, 16, 2.5).unwrap();
        let g = subsample(&d, 8).unwrap();
        assert_eq!((g.h, g.w), (2, 2));
        assert!(g.depths.iter().all(|&x| x == 2.5));
        assert_eq!(g.source_pixels[0], 4 * 16 + 4);
        assert!(matches!(subsample(&d, 17), Err(Error::Config(_))));
        assert!(matches!(subsample(&d, 0), Err(Error::Config(_))));
    }

    #[test]
    fn subsample_identity_at_factor_one() {
        let d = DepthMap::from_fn(3, 4, |v, u| 1.0 + (v * 4 + u) as f64).unwrap();
        let g = subsample(&d, 1).unwrap();
        assert_eq!(g.depths, d.values());
        assert_eq!(g.coords[5], (1.5 / 4.0, 1.5 / 3.0));
    }

    #[test]
    fn subsample_falls_back_to_nearest_valid() {
        let mut values = vec![0.0; 9];
        values[8] = 4.0;
        values[1] = 3.0;
        let d = DepthMap::from_values(3, 3, values).unwrap();
        let g = subsample(&d, 3).unwrap();
        assert_eq!(g.depths, vec![3.0]);
        let empty = DepthMap::constant(4, 4, 0.0).unwrap();
        assert!(matches!(subsample(&empty, 2), Err(Error::Config(_))));
    }

    #[test]
    fn zero_order_values() {
        let g = grid_from(&[1.0, 1.0, 2.0], 1, 3);
        let v = dav_zero_order(&g, Variant::Literal);
        assert_eq!(v.get(0, 1), 0.5);
        assert_abs_diff_eq!(v.get(0, 2), ONE_MINUS_SIG1, epsilon = 1e-15);
        let r = dav_zero_order(&g, Variant::Rescaled);
        assert_eq!(r.get(0, 1), 1.0);
    }

    #[test]
    fn first_order_values() {
        let g = grid_from(&[1.0, 1.5, 11.0], 1, 3);
        // Plane d = 1 in (x, y, d) space.
        let plane = Plane {
            normal: [0.0, 0.0, 1.0],
            offset: -1.0,
        };
        let v = dav_first_order(&g, &plane, Variant::Literal);
        assert_eq!(v.get(0, 0), 0.5);
        assert_abs_diff_eq!(v.get(1, 1), ONE_MINUS_SIG1, epsilon = 1e-15);
        assert_abs_diff_eq!(v.get(0, 2), 4.539_786_870_243_439e-5, epsilon = 1e-17);
    }

    #[test]
    fn combine_rules() {
        let a = DAVolume::from_values(1, 2, vec![0.1, 0.4, 0.4, 0.2]).unwrap();
        let b = DAVolume::from_values(1, 2, vec![0.3, 0.1, 0.1, 0.2]).unwrap();
        assert_eq!(dav_combine(std::slice::from_ref(&a)).unwrap(), a);
        assert_eq!(dav_combine(&[a.clone(), a.clone()]).unwrap(), a);
        assert_eq!(
            dav_combine(&[a.clone(), b]).unwrap().values(),
            &[0.3, 0.4, 0.4, 0.2]
        );
        assert!(dav_combine(&[]).is_err());
        let c = DAVolume::from_values(2, 1, vec![0.0; 4]).unwrap();
        let d = DAVolume::from_values(1, 1, vec![0.0; 1]).unwrap();
        assert!(dav_combine(&[c, d]).is_err());
    }

    #[test]
    fn fronto_parallel_saturates() {
        let d = DepthMap::constant(32, 32, 2.0).unwrap();
        let (v, planes) = ground_truth_dav(&d, &DavConfig::default()).unwrap();
        assert_eq!(planes.len(), 1);
        assert!(v.values().iter().all(|&x| x == 0.5));
    }

    #[test]
    fn step_scene() {
        let d = DepthMap::from_fn(16, 32, |_, u| if u < 16 { 1.0 } else { 3.0 }).unwrap();
        let cfg = DavConfig {
            ransac: RansacConfig {
                max_planes: 1,
                ..Default::default()
            },
            ..Default::default()
        };
        let (v, _) = ground_truth_dav(&d, &cfg).unwrap();
        let n = v.cells();
        for p in 0..n {
            for q in 0..n {
                let same = (p % 4 < 2) == (q % 4 < 2);
                let want = if same { 0.5 } else { ONE_MINUS_SIG2 };
                assert_abs_diff_eq!(v.get(p, q), want, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn no_planes_reduces_to_zero_order() {
        let d = DepthMap::from_fn(24, 24, |v, u| 1.0 + 0.01 * (u * v) as f64).unwrap();
        let cfg = DavConfig {
            ransac: RansacConfig {
                max_planes: 0,
                ..Default::default()
            },
            ..Default::default()
        };
        let (v, planes) = ground_truth_dav(&d, &cfg).unwrap();
        assert!(planes.is_empty());
        let zero = dav_zero_order(&subsample(&d, 8).unwrap(), Variant::Literal);
        assert_eq!(v, zero);
    }

    #[test]
    fn slices() {
        let g = grid_from(&[1.0, 2.0, 3.0, 5.0], 2, 2);
        let v = dav_zero_order(&g, Variant::Literal);
        let s = attention_slice(&v, 1, 0).unwrap();
        assert_eq!(s[2], 0.5);
        for q in 0..4 {
            assert_eq!(s[q], v.get(q, 2));
        }
        assert!(matches!(attention_slice(&v, 2, 0), Err(Error::Bounds(_))));
    }
}
