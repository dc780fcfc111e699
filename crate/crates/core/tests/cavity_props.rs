mod common;

use std::f64::consts::PI;
use std::sync::Arc;

use cavicore::cavity::{
    cavity_perimeter, cavity_volume, degree_range, polyline_length, shoelace_area, tangential_jacobian,
    topological_image_contains, trace_on_circle, winding_number, ImageMembership, TraceCurve,
};
use cavicore::deformation::{
    catalog, compose, Affine, Deformation, EuclideanCavity, RadialDeformation, RadialProfile, CATALOG_KEYS,
};
use cavicore::geometry::{Mat2, QBall, QNorm, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn winding_matches_crossing_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut nonzero = 0;
    for _ in 0..100 {
        let points = common::random_fourier_curve(&mut rng, 5, 512);
        let curve = TraceCurve::from_points(points.clone()).unwrap();
        let (lo, hi) = common::bounding_box(&points);
        let mut queried = 0;
        while queried < 20 {
            let p = Vec2::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y));
            if common::polyline_distance(&points, p) < 1e-6 {
                continue;
            }
            let w = winding_number(&curve, p).unwrap();
            assert_eq!(w, common::crossing_winding(&points, p), "query {p}");
            nonzero += (w != 0) as usize;
            queried += 1;
        }
    }
    assert!(nonzero > 100);
}

#[test]
fn catalog_degree_range_is_zero_or_one() {
    for key in CATALOG_KEYS {
        let y = catalog(key, None).unwrap();
        for eps in [0.1, 0.4] {
            let curve = trace_on_circle(y.as_ref(), Vec2::ZERO, eps, 1024).unwrap();
            let range = degree_range(&curve, 200);
            assert!(range.iter().all(|d| *d == 0 || *d == 1), "{key} eps={eps}: {range:?}");
            assert!(range.contains(&1), "{key}: no enclosed points");
        }
    }
}

fn smooth_curves() -> Vec<(String, TraceCurve)> {
    let mut out = Vec::new();
    let cavity = EuclideanCavity::new(0.5).unwrap();
    out.push((
        "euclidean-cavity".into(),
        trace_on_circle(&cavity, Vec2::ZERO, 0.3, 1024).unwrap(),
    ));
    let shear = Affine::linear(Mat2::new(1.5, 0.4, -0.2, 0.8), QBall::unit(QNorm::Two));
    out.push((
        "affine".into(),
        trace_on_circle(&shear, Vec2::new(0.1, 0.2), 0.3, 1024).unwrap(),
    ));
    let ellipse = TraceCurve::from_fn(1024, |t| {
        let (s, c) = t.sin_cos();
        (Vec2::new(2.0 * c, 0.5 * s), Vec2::new(-2.0 * s, 0.5 * c))
    })
    .unwrap();
    out.push(("ellipse".into(), ellipse));
    out
}

#[test]
fn boundary_integrals_track_polygon_oracles() {
    // Shoelace and polyline are second-order chords of the smooth integrals;
    // the acceptance harness reports the pinned comparison at n = 1024.
    for (name, curve) in smooth_curves() {
        let v = cavity_volume(&curve);
        let p = cavity_perimeter(&curve);
        let sv = shoelace_area(&curve.points).abs();
        let pl = polyline_length(&curve.points);
        assert!((v - sv).abs() <= 1e-4 * v, "{name}: volume {v} vs shoelace {sv}");
        assert!((p - pl).abs() <= 1e-4 * p, "{name}: perimeter {p} vs polyline {pl}");
        assert!(v >= 0.0 && p >= 0.0);
    }
}

#[test]
fn chart_identity_on_catalog_traces() {
    for key in CATALOG_KEYS {
        let y = catalog(key, None).unwrap();
        let eps = 0.3;
        let curve = trace_on_circle(y.as_ref(), Vec2::ZERO, eps, 256).unwrap();
        for k in 0..curve.len() {
            let t = 2.0 * PI * k as f64 / 256.0 + 1e-3;
            let j = tangential_jacobian(y.as_ref(), Vec2::ZERO, eps, t).unwrap();
            let x = Vec2::polar(t) * eps;
            let speed = y.grad(x).mul_vec(Vec2::polar(t).perp()).norm() * eps;
            assert!(
                (eps * j - speed).abs() <= 1e-10 * speed,
                "{key} t={t}: {} vs {speed}",
                eps * j
            );
        }
    }
}

/// Two disjoint bubbles: `ρ(r) = r + b(1 - r/c)²` on `[0, c]`, identity
/// beyond, about each of two centres.
fn bubble(center: Vec2, b: f64, c: f64) -> Arc<dyn Deformation> {
    let nodes: Vec<f64> = (0..=64).map(|i| c * i as f64 / 64.0).collect();
    let values = nodes.iter().map(|r| r + b * (1.0 - r / c).powi(2)).collect();
    let profile = RadialProfile::new(nodes, values).unwrap();
    Arc::new(RadialDeformation::new(profile, center).with_domain(QBall::unit(QNorm::Two)))
}

#[test]
fn two_bubble_images_are_disjoint() {
    let (a, b) = (Vec2::new(-0.4, 0.0), Vec2::new(0.4, 0.0));
    let y = compose(bubble(a, 0.05, 0.3), bubble(b, 0.08, 0.3));
    let eps = 0.1;
    let ca = trace_on_circle(&y, a, eps, 1024).unwrap();
    let cb = trace_on_circle(&y, b, eps, 1024).unwrap();
    let n = 200;
    let (mut in_a, mut in_b) = (0, 0);
    for i in 0..n {
        for j in 0..n {
            let p = Vec2::new(
                -1.0 + 2.0 * (i as f64 + 0.5) / n as f64,
                -1.0 + 2.0 * (j as f64 + 0.5) / n as f64,
            );
            let ia = topological_image_contains(&ca, p) == ImageMembership::Inside;
            let ib = topological_image_contains(&cb, p) == ImageMembership::Inside;
            assert!(!(ia && ib), "{p} in both images");
            in_a += ia as usize;
            in_b += ib as usize;
        }
    }
    assert!(in_a > 0 && in_b > 0);
}
