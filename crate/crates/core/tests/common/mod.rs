#![allow(dead_code)]

use std::f64::consts::PI;

use cavicore::geometry::Vec2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Winding number of a closed polyline about `p` by signed upward/downward
/// crossings of the horizontal ray to the right of `p`.
pub fn crossing_winding(points: &[Vec2], p: Vec2) -> i64 {
    let n = points.len();
    let mut w = 0;
    for i in 0..n {
        let a = points[i];
        let b = points[(i + 1) % n];
        let side = (b - a).cross(p - a);
        if a.y <= p.y {
            if b.y > p.y && side > 0.0 {
                w += 1;
            }
        } else if b.y <= p.y && side < 0.0 {
            w -= 1;
        }
    }
    w
}

/// Random trigonometric curve `c + Σ_k (α_k cos kt + β_k sin kt)` with
/// `modes` harmonics and decaying amplitudes; may self-intersect.
pub fn random_fourier_curve(rng: &mut ChaCha8Rng, modes: usize, n: usize) -> Vec<Vec2> {
    let center = Vec2::new(rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5));
    let coeffs: Vec<[f64; 4]> = (1..=modes)
        .map(|k| {
            let s = 1.0 / (k as f64);
            [
                rng.gen_range(-s..s),
                rng.gen_range(-s..s),
                rng.gen_range(-s..s),
                rng.gen_range(-s..s),
            ]
        })
        .collect();
    (0..n)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / n as f64;
            let mut p = center;
            for (k, c) in coeffs.iter().enumerate() {
                let (s, co) = ((k + 1) as f64 * t).sin_cos();
                p += Vec2::new(c[0] * co + c[1] * s, c[2] * co + c[3] * s);
            }
            p
        })
        .collect()
}

pub fn bounding_box(points: &[Vec2]) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    (lo, hi)
}

/// Distance from `p` to the closed polyline.
pub fn polyline_distance(points: &[Vec2], p: Vec2) -> f64 {
    let n = points.len();
    (0..n)
        .map(|i| {
            let a = points[i];
            let b = points[(i + 1) % n];
            let d = b - a;
            let t = ((p - a).dot(d) / d.norm_sq()).clamp(0.0, 1.0);
            p.dist(a + d * t)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Projection of `v` onto the column space of `h` by Gram-Schmidt.
pub fn gram_schmidt_projection(h: &nalgebra::DMatrix<f64>, v: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
    let mut basis: Vec<nalgebra::DVector<f64>> = Vec::new();
    for j in 0..h.ncols() {
        let mut u = h.column(j).into_owned();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&u);
                u -= q * c;
            }
        }
        let n = u.norm();
        basis.push(u / n);
    }
    let mut out = nalgebra::DVector::zeros(v.len());
    for q in &basis {
        out += q * q.dot(v);
    }
    out
}
