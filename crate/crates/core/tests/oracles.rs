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

//! Crate numerics against the slow references in `common`.

mod common;

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dav_core::dav::{ground_truth_dav, DavConfig, Variant};
use dav_core::geometry::{
    back_project, fit_plane_lsq, sobel_gradients, sobel_normals, CameraIntrinsics, DepthMap, Point3,
};
use dav_core::losses::{l_ang, l_grad, l_log, l_mae, l_norm};
use dav_core::plane_detection::{extract_planes, RansacConfig};
use dav_core::synth::{make_room, render};
use dav_core::metrics::{
    basic_metrics, boundary_errors, directed_depth_errors, distance_transform, planarity_errors,
};

fn tilted_scene(rng: &mut ChaCha8Rng, h: usize, w: usize) -> DepthMap {
    // Left part a slanted plane, right part noisy clutter.
    let (a, b) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    let split = w / 2 + rng.random_range(0..w / 4);
    let noise: Vec<f64> = (0..h * w).map(|_| rng.random_range(1.0..4.0)).collect();
    DepthMap::from_fn(h, w, |v, u| {
        if u < split {
            2.0 + a * u as f64 / w as f64 + b * v as f64 / h as f64
        } else {
            noise[v * w + u]
        }
    })
    .unwrap()
}

#[test]
fn dav_matches_quadruple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut planes_seen = 0;
    for trial in 0..12 {
        let factor = 1 + trial % 3;
        let (gh, gw) = (3 + trial % 4, 6 - trial % 3);
        let depth = tilted_scene(&mut rng, gh * factor, gw * factor);
        for variant in [Variant::Literal, Variant::Rescaled] {
            let mut cfg = DavConfig {
                factor,
                variant,
                ..Default::default()
            };
            cfg.ransac.seed = trial as u64;
            let (dav, planes) = ground_truth_dav(&depth, &cfg).unwrap();
            planes_seen += planes.len();
            let plain: Vec<_> = planes.iter().map(|p| p.plane).collect();
            let scale = if variant == Variant::Literal { 1.0 } else { 2.0 };
            let want = common::naive_dav(&depth, factor, &plain, scale);
            assert_eq!(dav.values().len(), want.len());
            for (a, b) in dav.values().iter().zip(&want) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
            }
        }
    }
    assert!(planes_seen > 0);
}

#[test]
fn distance_transform_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..40 {
        let (h, w) = (rng.random_range(1..12), rng.random_range(1..12));
        let density = rng.random_range(0.0..0.5);
        let edges: Vec<bool> = (0..h * w).map(|_| rng.random_bool(density)).collect();
        assert_eq!(distance_transform(&edges, h, w), common::exhaustive_distance(&edges, h, w));
    }
}

#[test]
fn plane_fit_matches_jacobi() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let pts: Vec<[f64; 3]> = (0..40)
            .map(|_| {
                let (x, y) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                [x, y, 3.0 - 0.4 * x + 0.7 * y + rng.random_range(-0.05..0.05)]
            })
            .collect();
        let fit = fit_plane_lsq(&pts.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect::<Vec<_>>()).unwrap();
        let (n, c) = common::tls_plane(&pts);
        let angle = common::angle_deg(fit.normal, n);
        assert!(angle < 1e-5, "{angle}");
        let s = if fit.normal[2] * n[2] < 0.0 { -1.0 } else { 1.0 };
        assert_abs_diff_eq!(fit.offset, s * c, epsilon = 1e-9);
    }
}

#[test]
fn noisy_plane_normal() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let pts: Vec<Point3> = (0..200)
        .map(|_| {
            let (x, y) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
            Point3::new(x, y, 3.0 - x - y + rng.random_range(-1e-6..1e-6))
        })
        .collect();
    let fit = fit_plane_lsq(&pts).unwrap();
    let arr: Vec<[f64; 3]> = pts.iter().map(|p| [p.x, p.y, p.z]).collect();
    let (n, _) = common::tls_plane(&arr);
    let s = 1.0 / 3f64.sqrt();
    assert!(common::angle_deg(fit.normal, [s, s, s]) < 1e-4);
    assert!(common::angle_deg(fit.normal, n) < 1e-4);
}

#[test]
fn sobel_matches_explicit_stencil() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (h, w) in [(1, 1), (1, 5), (4, 1), (5, 7), (9, 3)] {
        let z: Vec<f64> = (0..h * w).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (gx, gy) = sobel_gradients(&z, h, w);
        let (ox, oy) = common::sobel(&z, h, w);
        for i in 0..h * w {
            assert_abs_diff_eq!(gx[i], ox[i], epsilon = 1e-14);
            assert_abs_diff_eq!(gy[i], oy[i], epsilon = 1e-14);
        }
    }
}

#[test]
fn ramp_normals_are_exact() {
    let (a, b) = (0.3, -0.2);
    let depth = DepthMap::from_fn(6, 7, |v, u| 5.0 + a * u as f64 + b * v as f64).unwrap();
    let normals = sobel_normals(&depth);
    let l = (a * a + b * b + 1.0f64).sqrt();
    for r in 1..5 {
        for c in 1..6 {
            let n = normals.get(r, c).unwrap();
            assert_abs_diff_eq!(n[0], -a / l, epsilon = 1e-12);
            assert_abs_diff_eq!(n[1], -b / l, epsilon = 1e-12);
            assert_abs_diff_eq!(n[2], 1.0 / l, epsilon = 1e-12);
        }
    }
}

fn random_pair(rng: &mut ChaCha8Rng, h: usize, w: usize, holes: bool) -> (DepthMap, DepthMap) {
    let mut gt: Vec<f64> = (0..h * w).map(|_| rng.random_range(0.5..12.0)).collect();
    let mut pred: Vec<f64> = gt.iter().map(|g| g * rng.random_range(0.6..1.6)).collect();
    if holes {
        for i in 0..h * w {
            if rng.random_bool(0.1) {
                gt[i] = 0.0;
            }
            if rng.random_bool(0.1) {
                pred[i] = f64::NAN;
            }
        }
    }
    (DepthMap::from_values(h, w, pred).unwrap(), DepthMap::from_values(h, w, gt).unwrap())
}

#[test]
fn basic_and_directed_metrics_match_pixel_loops() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for trial in 0..30 {
        let (pred, gt) = random_pair(&mut rng, 5 + trial % 4, 6, trial % 2 == 1);
        let m = basic_metrics(&pred, &gt, 10.0).unwrap();
        let o = common::basic(&pred, &gt, 10.0);
        for (a, b) in [
            (m.rel, o.rel),
            (m.rmse, o.rmse),
            (m.log10, o.log10),
            (m.sqrel, o.sqrel),
            (m.si, o.si),
            (m.imae, o.imae),
            (m.irmse, o.irmse),
            (m.delta1, o.delta[0]),
            (m.delta2, o.delta[1]),
            (m.delta3, o.delta[2]),
        ] {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        let d = directed_depth_errors(&pred, &gt, 3.0, 10.0).unwrap();
        let (e0, em, ep) = common::directed(&pred, &gt, 3.0, 10.0);
        assert_abs_diff_eq!(d.eps_0, e0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.eps_minus, em, epsilon = 1e-12);
        assert_abs_diff_eq!(d.eps_plus, ep, epsilon = 1e-12);
    }
}

#[test]
fn boundary_errors_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..20 {
        let (pred, gt) = random_pair(&mut rng, 7, 8, trial % 3 == 0);
        let thr = rng.random_range(0.2..1.5);
        let b = boundary_errors(&pred, &gt, thr, 10.0).unwrap();
        let (acc, comp) = common::boundary(&pred, &gt, thr, 10.0);
        assert_eq!(b.eps_acc.is_some(), acc.is_some());
        assert_eq!(b.eps_comp.is_some(), comp.is_some());
        if let (Some(a), Some(o)) = (b.eps_acc, acc) {
            assert_abs_diff_eq!(a, o, epsilon = 1e-12);
        }
        if let (Some(a), Some(o)) = (b.eps_comp, comp) {
            assert_abs_diff_eq!(a, o, epsilon = 1e-12);
        }
    }
}

#[test]
fn planarity_matches_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let k = CameraIntrinsics::centered(8, 6, 7.0);
    for _ in 0..10 {
        let gt = DepthMap::from_fn(6, 8, |v, u| if u < 4 { 2.0 + 0.1 * v as f64 } else { 3.0 - 0.05 * u as f64 })
            .unwrap();
        let noise: Vec<f64> = (0..48).map(|_| rng.random_range(-0.02..0.02)).collect();
        let pred = DepthMap::from_fn(6, 8, |v, u| gt.get(v, u) * 1.05 + noise[v * 8 + u]).unwrap();
        let regions = vec![
            (0..48).filter(|i| i % 8 < 4).collect::<Vec<_>>(),
            (0..48).filter(|i| i % 8 >= 4).collect::<Vec<_>>(),
        ];
        let p = planarity_errors(&pred, &gt, &k, &regions, 10.0).unwrap();
        let (plan, orie) = common::planarity(&pred, &gt, &k, &regions, 10.0);
        assert_abs_diff_eq!(p.eps_plan, plan, epsilon = 1e-9);
        assert_abs_diff_eq!(p.eps_orie, orie, epsilon = 1e-6);
    }
}

fn random_dav(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.random_range(0.01..0.5))
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Entries whose error lies within one step of the |·| kink are skipped.
fn assert_gradients(analytic: &[f64], numeric: &[f64], errors: &[f64], tol: f64) {
    for ((a, n), e) in analytic.iter().zip(numeric).zip(errors) {
        if e.abs() <= 1e-6 {
            continue;
        }
        let rel = (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
        assert!(rel < tol, "analytic {a} vs numeric {n}");
    }
}

#[test]
fn dav_losses_match_loops_and_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 9;
    for _ in 0..5 {
        let (p, g) = (random_dav(&mut rng, n), random_dav(&mut rng, n));
        let (pv, gv) = (row_major(&p), row_major(&g));

        let mae = l_mae(&p, &g).unwrap();
        assert_abs_diff_eq!(mae.value, common::l_mae(&pv, &gv), epsilon = 1e-12);
        let num = common::numeric_gradient(&pv, 1e-6, |x| common::l_mae(x, &gv));
        let errors: Vec<f64> = pv.iter().zip(&gv).map(|(a, b)| a - b).collect();
        assert_gradients(&row_major(&mae.gradient), &num, &errors, 1e-5);

        let ang = l_ang(&p, &g).unwrap();
        assert_abs_diff_eq!(ang.value, common::l_ang(&pv, &gv, n), epsilon = 1e-12);
        let num = common::numeric_gradient(&pv, 1e-6, |x| common::l_ang(x, &gv, n));
        assert_gradients(&row_major(&ang.gradient), &num, &errors, 1e-5);
    }
}

fn smooth_map(rng: &mut ChaCha8Rng, h: usize, w: usize) -> Vec<f64> {
    let (a, b, c) = (rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), rng.random_range(0.0..0.2));
    (0..h * w)
        .map(|i| {
            let (v, u) = ((i / w) as f64, (i % w) as f64);
            2.0 + a * u + b * v + c * (u * v).sin() + rng.random_range(-0.2..0.2)
        })
        .collect()
}

#[test]
fn depth_losses_match_loops_and_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (h, w, alpha) = (4, 4, 0.5);
    for _ in 0..5 {
        let g = smooth_map(&mut rng, h, w);
        let p = smooth_map(&mut rng, h, w);
        let gt = DepthMap::from_values(h, w, g.clone()).unwrap();
        let pred = DepthMap::from_values(h, w, p.clone()).unwrap();

        let errors: Vec<f64> = p.iter().zip(&g).map(|(a, b)| a - b).collect();
        let log = l_log(&pred, &gt, alpha).unwrap();
        assert_abs_diff_eq!(log.value, common::l_log(&p, &g, alpha), epsilon = 1e-12);
        assert_gradients(&log.gradient, &common::numeric_gradient(&p, 1e-6, |x| common::l_log(x, &g, alpha)), &errors, 1e-5);

        let grad = l_grad(&pred, &gt, alpha).unwrap();
        assert_abs_diff_eq!(grad.value, common::l_grad(&p, &g, h, w, alpha), epsilon = 1e-12);
        assert_gradients(
            &grad.gradient,
            &common::numeric_gradient(&p, 1e-6, |x| common::l_grad(x, &g, h, w, alpha)),
            &errors,
            1e-5,
        );

        let norm = l_norm(&pred, &gt).unwrap();
        assert_abs_diff_eq!(norm.value, common::l_norm(&p, &g, h, w), epsilon = 1e-12);
        assert_gradients(&norm.gradient, &common::numeric_gradient(&p, 1e-6, |x| common::l_norm(x, &g, h, w)), &errors, 1e-5);
    }
}

#[test]
fn rooms_recover_generator_planes() {
    // Each detected plane matches one generator plane. Its inliers are the
    // generator's own pixels plus neighbors that happen to lie within the
    // threshold of it (the row where the floor meets the back wall), so the
    // coverage gap is explained pixel by pixel.
    let k = CameraIntrinsics::centered(64, 48, 51.2);
    for seed in 0..10u64 {
        let scene = render(&make_room(seed, 4, &k).unwrap()).unwrap();
        let points = back_project(&scene.depth, &k).unwrap();
        let cfg = RansacConfig { seed, ..Default::default() };
        let found = extract_planes(&points, scene.depth.len(), &cfg).unwrap();
        assert_eq!(found.len(), 4, "seed {seed}");
        let mut claimed = vec![false; scene.depth.len()];
        for d in &found {
            let (label, truth) = scene
                .spec
                .planes
                .iter()
                .enumerate()
                .min_by(|a, b| {
                    let da = common::angle_deg(d.plane.normal, a.1.normal) + (d.plane.offset.abs() - a.1.offset.abs()).abs();
                    let db = common::angle_deg(d.plane.normal, b.1.normal) + (d.plane.offset.abs() - b.1.offset.abs()).abs();
                    da.total_cmp(&db)
                })
                .unwrap();
            assert!(common::angle_deg(d.plane.normal, truth.normal) < 0.5);
            for &i in &d.inlier_pixels {
                assert!(truth.signed_distance(points[i].point).abs() <= 2.0 * cfg.inlier_threshold);
                claimed[i] = true;
            }
            for (i, l) in scene.labels.iter().enumerate() {
                if *l == Some(label) {
                    assert!(claimed[i], "seed {seed}: pixel {i} of plane {label} unclaimed");
                }
            }
        }
    }
}
