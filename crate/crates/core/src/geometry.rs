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

//! Camera model, depth maps, planes and Sobel surface normals.
//!
//! Conventions: camera frame with `x` right, `y` down, `z` forward. Pixel
//! `(u, v)` is (column, row) and grids are stored row-major, so the flat
//! index of a pixel is `v * width + u`.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pinhole intrinsics of an undistorted camera.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    /// Centered principal point and the same focal length on both axes.
    pub fn centered(width: usize, height: usize, focal: f64) -> Self {
        Self {
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::config("focal lengths must be positive"));
        }
        if !(0.0..self.width as f64).contains(&self.cx)
            || !(0.0..self.height as f64).contains(&self.cy)
        {
            return Err(Error::config("principal point outside the image"));
        }
        Ok(())
    }

    /// Unnormalized viewing ray through pixel `(u, v)` with unit `z`.
    pub fn ray(&self, u: f64, v: f64) -> Point3 {
        Point3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Pixel coordinates of a camera-frame point.
    pub fn project(&self, p: Point3) -> (f64, f64) {
        (self.fx * p.x / p.z + self.cx, self.fy * p.y / p.z + self.cy)
    }
}

/// Metric depth grid with a validity mask.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    height: usize,
    width: usize,
    values: Vec<f64>,
    valid: Vec<bool>,
}

impl DepthMap {
    /// Builds a map whose mask marks every finite, strictly positive sample.
    pub fn from_values(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::config(format!(
                "expected {} depth samples, got {}",
                height * width,
                values.len()
            )));
        }
        let valid = values.iter().map(|d| d.is_finite() && *d > 0.0).collect();
        Ok(Self {
            height,
            width,
            values,
            valid,
        })
    }

    /// Builds a map with an explicit mask; masked pixels must hold positive depth.
    pub fn with_mask(
        height: usize,
        width: usize,
        values: Vec<f64>,
        valid: Vec<bool>,
    ) -> Result<Self> {
        if values.len() != height * width || valid.len() != values.len() {
            return Err(Error::config("depth values and mask sizes differ"));
        }
        if values
            .iter()
            .zip(&valid)
            .any(|(d, ok)| *ok && !(d.is_finite() && *d > 0.0))
        {
            return Err(Error::config("valid pixel with non-positive depth"));
        }
        Ok(Self {
            height,
            width,
            values,
            valid,
        })
    }

    pub fn constant(height: usize, width: usize, depth: f64) -> Result<Self> {
        Self::from_values(height, width, vec![depth; height * width])
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(height * width);
        for v in 0..height {
            for u in 0..width {
                values.push(f(v, u));
            }
        }
        Self::from_values(height, width, values)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> &[bool] {
        &self.valid
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid[row * self.width + col]
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }

    /// Applies `f` to every valid sample; samples that become non-positive
    /// or non-finite are masked out.
    pub fn map_valid(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let mut values = self.values.clone();
        let mut valid = self.valid.clone();
        for (d, ok) in values.iter_mut().zip(valid.iter_mut()) {
            if *ok {
                *d = f(*d);
                *ok = d.is_finite() && *d > 0.0;
            }
        }
        Self {
            height: self.height,
            width: self.width,
            values,
            valid,
        }
    }

    pub fn same_shape(&self, other: &DepthMap) -> bool {
        self.height == other.height && self.width == other.width
    }
}

/// Camera-frame point in meters.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }
}

/// A point tagged with the flat index of the pixel it came from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndexedPoint {
    pub pixel: usize,
    pub point: Point3,
}

/// Plane `n·p + c = 0` with unit normal `n`.
///
/// The same type is used for metric 3-D planes and for planes fitted in
/// `(x_norm, y_norm, depth)` space, where `normal = (n_x, n_y, n_d)`.
/// `signed_distance` is the 4-vector product `(n, c)·(p, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl Plane {
    /// Normalizes `normal` and sets the offset so that `anchor` lies on the plane.
    pub fn from_normal_and_point(normal: [f64; 3], anchor: Point3) -> Result<Self> {
        let n = Vector3::from(normal);
        let len = n.norm();
        if !(len.is_finite() && len > 0.0) {
            return Err(Error::degenerate("plane normal has zero length"));
        }
        let n = n / len;
        Ok(Self {
            normal: n.into(),
            offset: -n.dot(&anchor.to_vector()),
        })
    }

    /// Exact plane through three points, `None` when the triangle area is
    /// below `1e-12`.
    pub fn through_points(a: Point3, b: Point3, c: Point3) -> Option<Self> {
        let (a, b, c) = (a.to_vector(), b.to_vector(), c.to_vector());
        let cross = (b - a).cross(&(c - a));
        let norm = cross.norm();
        if !(0.5 * norm > 1e-12) {
            return None;
        }
        let n = cross / norm;
        Some(Self {
            normal: n.into(),
            offset: -n.dot(&a),
        })
    }

    pub fn normal_vector(&self) -> Vector3<f64> {
        Vector3::from(self.normal)
    }

    pub fn signed_distance(&self, p: Point3) -> f64 {
        self.normal[0] * p.x + self.normal[1] * p.y + self.normal[2] * p.z + self.offset
    }

    pub fn flipped(&self) -> Self {
        Self {
            normal: [-self.normal[0], -self.normal[1], -self.normal[2]],
            offset: -self.offset,
        }
    }

    /// Angle between the two normals in degrees, ignoring orientation.
    /// Computed as `atan2(|a×b|, |a·b|)`, which stays exact for equal normals
    /// where `acos` of a rounded dot product would not.
    pub fn angle_deg(&self, other: &Plane) -> f64 {
        let (a, b) = (self.normal_vector(), other.normal_vector());
        a.cross(&b).norm().atan2(a.dot(&b).abs()).to_degrees()
    }

    /// Orientation rule used by the least-squares fit: the offset is
    /// non-positive (the normal points away from the origin); planes
    /// through the origin get a positive largest-magnitude component.
    fn canonical(self) -> Self {
        if self.offset > 0.0 {
            return self.flipped();
        }
        if self.offset == 0.0 {
            let n = self.normal;
            let k = (0..3)
                .max_by(|&i, &j| n[i].abs().total_cmp(&n[j].abs()))
                .unwrap_or(0);
            if n[k] < 0.0 {
                return self.flipped();
            }
        }
        self
    }
}

/// Back-projects every valid pixel: `x = (u - cx) z / fx`, `y = (v - cy) z / fy`.
pub fn back_project(depth: &DepthMap, k: &CameraIntrinsics) -> Result<Vec<IndexedPoint>> {
    if depth.width() != k.width || depth.height() != k.height {
        return Err(Error::config(format!(
            "depth map is {}x{} but intrinsics describe {}x{}",
            depth.height(),
            depth.width(),
            k.height,
            k.width
        )));
    }
    let mut out = Vec::with_capacity(depth.valid_count());
    for v in 0..depth.height() {
        for u in 0..depth.width() {
            let pixel = v * depth.width() + u;
            if !depth.mask()[pixel] {
                continue;
            }
            let z = depth.values()[pixel];
            let point = Point3::new(
                (u as f64 - k.cx) * z / k.fx,
                (v as f64 - k.cy) * z / k.fy,
                z,
            );
            out.push(IndexedPoint { pixel, point });
        }
    }
    Ok(out)
}

pub fn signed_distance(plane: &Plane, p: Point3) -> f64 {
    plane.signed_distance(p)
}

/// Total-least-squares plane: the normal is the eigenvector of the smallest
/// eigenvalue of the centered scatter matrix and `c = -n·centroid`.
pub fn fit_plane_lsq(points: &[Point3]) -> Result<Plane> {
    if points.len() < 3 {
        return Err(Error::degenerate(format!(
            "plane fit needs 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let centroid = points
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.to_vector())
        / n;
    let mut scatter = Matrix3::zeros();
    for p in points {
        let d = p.to_vector() - centroid;
        scatter += d * d.transpose();
    }
    let eig = SymmetricEigen::new(scatter);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let (mid, big) = (eig.eigenvalues[order[1]], eig.eigenvalues[order[2]]);
    if !(big > 0.0) || mid <= 1e-12 * big {
        return Err(Error::degenerate("points are collinear or coincident"));
    }
    let normal = eig.eigenvectors.column(order[0]).normalize();
    if !normal.iter().all(|c| c.is_finite()) {
        return Err(Error::degenerate("plane fit produced a non-finite normal"));
    }
    Ok(Plane {
        normal: normal.into(),
        offset: -normal.dot(&centroid),
    }
    .canonical())
}

/// Per-pixel unit normals; `None` where the 3×3 neighborhood is not fully valid.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalMap {
    pub height: usize,
    pub width: usize,
    pub normals: Vec<Option<[f64; 3]>>,
}

impl NormalMap {
    pub fn get(&self, row: usize, col: usize) -> Option<[f64; 3]> {
        self.normals[row * self.width + col]
    }
}

const SOBEL_X: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];

fn clamp_index(i: usize, di: isize, n: usize) -> usize {
    (i as isize + di).clamp(0, n as isize - 1) as usize
}

/// Horizontal and vertical derivatives by the 1/8-normalized Sobel kernels
/// with replicate padding.
pub fn sobel_gradients(values: &[f64], height: usize, width: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; values.len()];
    let mut gy = vec![0.0; values.len()];
    for r in 0..height {
        for c in 0..width {
            let (mut sx, mut sy) = (0.0, 0.0);
            for (i, di) in (-1isize..=1).enumerate() {
                let rr = clamp_index(r, di, height);
                for (j, dj) in (-1isize..=1).enumerate() {
                    let v = values[rr * width + clamp_index(c, dj, width)];
                    sx += SOBEL_X[i][j] * v;
                    sy += SOBEL_X[j][i] * v;
                }
            }
            gx[r * width + c] = sx / 8.0;
            gy[r * width + c] = sy / 8.0;
        }
    }
    (gx, gy)
}

/// Adjoint of [`sobel_gradients`]: maps upstream gradients on `(gx, gy)`
/// back onto the input grid.
pub fn sobel_adjoint(dgx: &[f64], dgy: &[f64], height: usize, width: usize) -> Vec<f64> {
    let mut out = vec![0.0; dgx.len()];
    for r in 0..height {
        for c in 0..width {
            let (ux, uy) = (dgx[r * width + c] / 8.0, dgy[r * width + c] / 8.0);
            if ux == 0.0 && uy == 0.0 {
                continue;
            }
            for (i, di) in (-1isize..=1).enumerate() {
                let rr = clamp_index(r, di, height);
                for (j, dj) in (-1isize..=1).enumerate() {
                    out[rr * width + clamp_index(c, dj, width)] +=
                        SOBEL_X[i][j] * ux + SOBEL_X[j][i] * uy;
                }
            }
        }
    }
    out
}

/// True when the pixel and its clamped 3×3 neighborhood are all valid.
pub fn neighborhood_valid(mask: &[bool], height: usize, width: usize, r: usize, c: usize) -> bool {
    (-1isize..=1).all(|di| {
        let rr = clamp_index(r, di, height);
        (-1isize..=1).all(|dj| mask[rr * width + clamp_index(c, dj, width)])
    })
}

/// Normal from depth derivatives: `normalize(-gx, -gy, 1)`.
pub fn normal_from_gradient(gx: f64, gy: f64) -> [f64; 3] {
    let len = (gx * gx + gy * gy + 1.0).sqrt();
    [-gx / len, -gy / len, 1.0 / len]
}

pub fn sobel_normals(depth: &DepthMap) -> NormalMap {
    let (h, w) = (depth.height(), depth.width());
    let (gx, gy) = sobel_gradients(depth.values(), h, w);
    let normals = (0..h * w)
        .map(|i| {
            neighborhood_valid(depth.mask(), h, w, i / w, i % w)
                .then(|| normal_from_gradient(gx[i], gy[i]))
        })
        .collect();
    NormalMap {
        height: h,
        width: w,
        normals,
    }
}
