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

//! Slow, obviously-correct reference implementations shared by the
//! integration tests. Nothing here calls into the crate's numerics.

#![allow(dead_code)]

use dav_core::geometry::{CameraIntrinsics, DepthMap, Plane};

pub fn sigmoid(t: f64) -> f64 {
    1.0 / (1.0 + (-t).exp())
}

/// Ground-truth volume by four nested loops over `(p_row, p_col, q_row, q_col)`,
/// center-pixel sampling with every center assumed valid.
pub fn naive_dav(depth: &DepthMap, factor: usize, planes: &[Plane], scale: f64) -> Vec<f64> {
    let (hh, ww) = (depth.height(), depth.width());
    let (h, w) = (hh / factor, ww / factor);
    let feature = |i: usize, j: usize| -> [f64; 4] {
        let v = i * factor + factor / 2;
        let u = j * factor + factor / 2;
        [
            (u as f64 + 0.5) / ww as f64,
            (v as f64 + 0.5) / hh as f64,
            depth.get(v, u),
            1.0,
        ]
    };
    let dot = |s: &Plane, x: [f64; 4]| {
        s.normal[0] * x[0] + s.normal[1] * x[1] + s.normal[2] * x[2] + s.offset * x[3]
    };
    let mut out = Vec::with_capacity(h * w * h * w);
    for pr in 0..h {
        for pc in 0..w {
            for qr in 0..h {
                for qc in 0..w {
                    let (xp, xq) = (feature(pr, pc), feature(qr, qc));
                    let mut best = 1.0 - sigmoid((xp[2] - xq[2]).abs());
                    for s in planes {
                        let a = 1.0 - sigmoid(dot(s, xp).abs() + dot(s, xq).abs());
                        if a > best {
                            best = a;
                        }
                    }
                    out.push(scale * best);
                }
            }
        }
    }
    out
}

/// Distance to the nearest `true` cell by scanning every cell.
pub fn exhaustive_distance(edges: &[bool], h: usize, w: usize) -> Vec<f64> {
    let sites: Vec<(i64, i64)> = (0..h * w)
        .filter(|&i| edges[i])
        .map(|i| ((i / w) as i64, (i % w) as i64))
        .collect();
    (0..h * w)
        .map(|i| {
            let (r, c) = ((i / w) as i64, (i % w) as i64);
            sites
                .iter()
                .map(|&(sr, sc)| (((sr - r).pow(2) + (sc - c).pow(2)) as f64).sqrt())
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Eigen-decomposition of a symmetric 3×3 matrix by cyclic Jacobi sweeps.
/// Returns eigenvalues and the matching eigenvectors (as columns).
pub fn jacobi_eigen(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..100 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-30 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// Total-least-squares plane `(normal, offset)` through `pts`.
pub fn tls_plane(pts: &[[f64; 3]]) -> ([f64; 3], f64) {
    let n = pts.len() as f64;
    let mut mean = [0.0; 3];
    for p in pts {
        for k in 0..3 {
            mean[k] += p[k] / n;
        }
    }
    let mut cov = [[0.0; 3]; 3];
    for p in pts {
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]);
            }
        }
    }
    let (vals, vecs) = jacobi_eigen(cov);
    let k = (0..3).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap();
    let normal = [vecs[0][k], vecs[1][k], vecs[2][k]];
    let offset = -(normal[0] * mean[0] + normal[1] * mean[1] + normal[2] * mean[2]);
    (normal, offset)
}

pub fn angle_deg(a: [f64; 3], b: [f64; 3]) -> f64 {
    let c = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).abs();
    let la = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    let lb = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
    (c / (la * lb)).min(1.0).acos().to_degrees()
}

/// Normalized Sobel derivatives written out term by term, borders replicated.
pub fn sobel(z: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let at = |r: isize, c: isize| {
        let r = r.clamp(0, h as isize - 1) as usize;
        let c = c.clamp(0, w as isize - 1) as usize;
        z[r * w + c]
    };
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for r in 0..h as isize {
        for c in 0..w as isize {
            let right = at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1);
            let left = at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1);
            let down = at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1);
            let up = at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1);
            gx[r as usize * w + c as usize] = (right - left) / 8.0;
            gy[r as usize * w + c as usize] = (down - up) / 8.0;
        }
    }
    (gx, gy)
}

fn window_valid(mask: &[bool], h: usize, w: usize, i: usize) -> bool {
    let (r, c) = ((i / w) as isize, (i % w) as isize);
    for dr in -1..=1 {
        for dc in -1..=1 {
            let rr = (r + dr).clamp(0, h as isize - 1) as usize;
            let cc = (c + dc).clamp(0, w as isize - 1) as usize;
            if !mask[rr * w + cc] {
                return false;
            }
        }
    }
    true
}

pub fn joint_mask(pred: &DepthMap, gt: &DepthMap, max_depth: f64) -> Vec<bool> {
    (0..gt.len())
        .map(|i| {
            let (p, g) = (pred.values()[i], gt.values()[i]);
            p.is_finite() && p > 0.0 && g.is_finite() && g > 0.0 && g <= max_depth
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
pub struct Basic {
    pub rel: f64,
    pub rmse: f64,
    pub log10: f64,
    pub sqrel: f64,
    pub si: f64,
    pub imae: f64,
    pub irmse: f64,
    pub delta: [f64; 3],
}

pub fn basic(pred: &DepthMap, gt: &DepthMap, max_depth: f64) -> Basic {
    let mask = joint_mask(pred, gt, max_depth);
    let idx: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let t = idx.len() as f64;
    let (mut rel, mut sq, mut lg, mut sqrel, mut imae, mut isq) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut delta = [0.0; 3];
    let mut logs = Vec::new();
    for &i in &idx {
        let (p, g) = (pred.values()[i], gt.values()[i]);
        rel += (p - g).abs() / g;
        sq += (p - g) * (p - g);
        lg += (p.log10() - g.log10()) * (p.log10() - g.log10());
        sqrel += (p - g) * (p - g) / (g * g);
        imae += (1.0 / p - 1.0 / g).abs();
        isq += (1.0 / p - 1.0 / g) * (1.0 / p - 1.0 / g);
        let ratio = if p / g > g / p { p / g } else { g / p };
        for (k, d) in delta.iter_mut().enumerate() {
            if ratio < 1.25f64.powi(k as i32 + 1) {
                *d += 1.0;
            }
        }
        logs.push(p.ln() - g.ln());
    }
    let alpha = -logs.iter().sum::<f64>() / t;
    let si = logs.iter().map(|l| (l + alpha) * (l + alpha)).sum::<f64>() / (2.0 * t);
    Basic {
        rel: rel / t,
        rmse: (sq / t).sqrt(),
        log10: (lg / t).sqrt(),
        sqrel: sqrel / t,
        si,
        imae: imae / t,
        irmse: (isq / t).sqrt(),
        delta: delta.map(|d| d / t),
    }
}

/// `(eps_0, eps_minus, eps_plus)` in percent.
pub fn directed(pred: &DepthMap, gt: &DepthMap, reference: f64, max_depth: f64) -> (f64, f64, f64) {
    let mask = joint_mask(pred, gt, max_depth);
    let (mut s, mut m, mut p, mut n) = (0.0, 0.0, 0.0, 0.0);
    for i in (0..mask.len()).filter(|&i| mask[i]) {
        n += 1.0;
        let gf = gt.values()[i] < reference;
        let pf = pred.values()[i] < reference;
        if gf == pf {
            s += 1.0;
        } else if pf {
            m += 1.0;
        } else {
            p += 1.0;
        }
    }
    (100.0 * s / n, 100.0 * m / n, 100.0 * p / n)
}

fn camera_points(depth: &DepthMap, k: &CameraIntrinsics, pixels: &[usize]) -> Vec<[f64; 3]> {
    pixels
        .iter()
        .map(|&i| {
            let (v, u) = ((i / depth.width()) as f64, (i % depth.width()) as f64);
            let z = depth.values()[i];
            [(u - k.cx) * z / k.fx, (v - k.cy) * z / k.fy, z]
        })
        .collect()
}

/// `(eps_plan in cm, eps_orie in degrees)` averaged over regions.
pub fn planarity(
    pred: &DepthMap,
    gt: &DepthMap,
    k: &CameraIntrinsics,
    regions: &[Vec<usize>],
    max_depth: f64,
) -> (f64, f64) {
    let mask = joint_mask(pred, gt, max_depth);
    let (mut plan, mut orie) = (0.0, 0.0);
    for region in regions {
        let px: Vec<usize> = region.iter().copied().filter(|&i| mask[i]).collect();
        let pp = camera_points(pred, k, &px);
        let gp = camera_points(gt, k, &px);
        let (pn, pc) = tls_plane(&pp);
        let (gn, _) = tls_plane(&gp);
        let d: Vec<f64> = pp.iter().map(|p| pn[0] * p[0] + pn[1] * p[1] + pn[2] * p[2] + pc).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / d.len() as f64;
        plan += 100.0 * var.sqrt();
        orie += angle_deg(pn, gn);
    }
    (plan / regions.len() as f64, orie / regions.len() as f64)
}

/// `(eps_acc, eps_comp)`, `None` for a side without edges.
pub fn boundary(pred: &DepthMap, gt: &DepthMap, threshold: f64, max_depth: f64) -> (Option<f64>, Option<f64>) {
    let (h, w) = (gt.height(), gt.width());
    let mask = joint_mask(pred, gt, max_depth);
    let edges = |d: &DepthMap| -> Vec<bool> {
        let (gx, gy) = sobel(d.values(), h, w);
        (0..h * w)
            .map(|i| mask[i] && window_valid(&mask, h, w, i) && (gx[i] * gx[i] + gy[i] * gy[i]).sqrt() > threshold)
            .collect()
    };
    let (pe, ge) = (edges(pred), edges(gt));
    let (pd, gd) = (exhaustive_distance(&pe, h, w), exhaustive_distance(&ge, h, w));
    let cap = ((h * h + w * w) as f64).sqrt();
    let score = |e: &[bool], d: &[f64]| {
        let n = e.iter().filter(|x| **x).count();
        (n > 0).then(|| (0..h * w).filter(|&i| e[i]).map(|i| d[i].min(cap)).sum::<f64>() / n as f64)
    };
    (score(&pe, &gd), score(&ge, &pd))
}

pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn l_mae(p: &[f64], g: &[f64]) -> f64 {
    p.iter().zip(g).map(|(a, b)| (a - b).abs()).sum::<f64>() / p.len() as f64
}

/// Row and column cosine terms of two `n × n` row-major matrices.
pub fn l_ang(p: &[f64], g: &[f64], n: usize) -> f64 {
    let cos = |a: Vec<f64>, b: Vec<f64>| {
        let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            return 0.0;
        }
        a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() / (na * nb)
    };
    let mut total = 0.0;
    for i in 0..n {
        let row = |m: &[f64]| (0..n).map(|j| m[i * n + j]).collect::<Vec<_>>();
        let col = |m: &[f64]| (0..n).map(|j| m[j * n + i]).collect::<Vec<_>>();
        total += (1.0 - cos(row(p), row(g))).abs();
        total += (1.0 - cos(col(p), col(g))).abs();
    }
    total / n as f64
}

pub fn l_log(p: &[f64], g: &[f64], alpha: f64) -> f64 {
    p.iter().zip(g).map(|(a, b)| ((a - b).abs() + alpha).ln()).sum::<f64>() / p.len() as f64
}

/// Fully valid maps only.
pub fn l_grad(p: &[f64], g: &[f64], h: usize, w: usize, alpha: f64) -> f64 {
    let e: Vec<f64> = p.iter().zip(g).map(|(a, b)| (a - b).abs()).collect();
    let (gx, gy) = sobel(&e, h, w);
    (0..h * w)
        .map(|i| (gx[i].abs() + alpha).ln() + (gy[i].abs() + alpha).ln())
        .sum::<f64>()
        / (h * w) as f64
}

/// Fully valid maps only.
pub fn l_norm(p: &[f64], g: &[f64], h: usize, w: usize) -> f64 {
    let (px, py) = sobel(p, h, w);
    let (gx, gy) = sobel(g, h, w);
    let unit = |x: f64, y: f64| {
        let l = (x * x + y * y + 1.0).sqrt();
        [-x / l, -y / l, 1.0 / l]
    };
    (0..h * w)
        .map(|i| {
            let (a, b) = (unit(px[i], py[i]), unit(gx[i], gy[i]));
            (1.0 - (a[0] * b[0] + a[1] * b[1] + a[2] * b[2])).abs()
        })
        .sum::<f64>()
        / (h * w) as f64
}

/// Central differences of `f` at `x` with step `h`.
pub fn numeric_gradient(x: &[f64], h: f64, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}
