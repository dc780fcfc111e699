use cavicore::deformation::{
    catalog, fd_gradient, ChangeOfReference, Deformation, RadialDeformation, RadialProfile, ReferenceStretch, Spike,
    Superposition, CATALOG_KEYS,
};
use cavicore::geometry::{QNorm, Vec2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Scalar functions whose zero sets contain the branch seams of each example.
fn seams(key: &str, x: Vec2) -> Vec<f64> {
    match key {
        "radial" => vec![x.x, x.y],
        "change-of-reference" => {
            let f = ReferenceStretch.eval(x);
            vec![x.x, f.norm() - 1.0]
        }
        "superposition" => {
            let z = Superposition::u(x).0;
            vec![
                x.x.abs() - x.y.abs(),
                z.x,
                z.y,
                z.x.abs() - z.y.abs(),
                z.x.abs() - 0.5,
                z.y.abs() - 0.5,
            ]
        }
        "spike" => {
            let z = Spike::u(x).0;
            vec![z.x, z.y - Spike::SLOPE * z.x.abs() - 0.5]
        }
        _ => unreachable!(),
    }
}

fn sample(y: &dyn Deformation, rng: &mut ChaCha8Rng, margin: f64) -> Vec2 {
    let outer = y.domain().outer;
    loop {
        let x = outer.center + Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * outer.radius;
        if outer.distance_to_boundary(x) > margin && y.singular_points().iter().all(|s| x.dist(*s) > margin) {
            return x;
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for key in CATALOG_KEYS {
        let y = catalog(key, None).unwrap();
        let mut checked = 0;
        while checked < 2000 {
            let x = sample(y.as_ref(), &mut rng, 1e-3);
            if seams(key, x).iter().any(|s| s.abs() < 1e-3) {
                continue;
            }
            let g = y.grad(x);
            let fd = fd_gradient(y.as_ref(), x, 1e-5);
            let rel = g.max_abs_diff(&fd) / g.frobenius();
            assert!(rel <= 1e-6, "{key} at {x}: relative error {rel}");
            checked += 1;
        }
    }
}

#[test]
fn orientation_preserved_on_samples() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for key in CATALOG_KEYS {
        let y = catalog(key, None).unwrap();
        for _ in 0..10_000 {
            let x = sample(y.as_ref(), &mut rng, 1e-9);
            let d = y.grad(x).det();
            if key == "spike" {
                assert!(d >= 0.0, "{key} at {x}: det {d}");
            } else {
                assert!(d > 0.0, "{key} at {x}: det {d}");
            }
        }
    }

    let nodes: Vec<f64> = (0..=20).map(|i| 0.05 + 0.95 * i as f64 / 20.0).collect();
    let mut values = Vec::new();
    let mut v = 0.2;
    for _ in &nodes {
        v += rng.gen_range(0.01..0.1);
        values.push(v);
    }
    let y = RadialDeformation::new(RadialProfile::new(nodes, values).unwrap(), Vec2::ZERO);
    for _ in 0..10_000 {
        let x = Vec2::polar(rng.gen_range(0.0..6.3)) * rng.gen_range(0.05..1.0);
        assert!(y.grad(x).det() > 0.0);
    }
}

#[test]
fn boundary_datum() {
    let radial = catalog("radial", None).unwrap();
    let change = ChangeOfReference::new(0.5).unwrap();
    let superposition = Superposition;
    for k in 0..4000 {
        let t = 2.0 * std::f64::consts::PI * k as f64 / 4000.0;
        let u = Vec2::polar(t);
        let on_diamond = u * (1.0 / (u.x.abs() + u.y.abs()));
        assert!(radial.eval(on_diamond).dist(on_diamond) <= 1e-15);
        let on_square = u * (1.0 / u.x.abs().max(u.y.abs()));
        assert!(superposition.eval(on_square).dist(on_square) <= 1e-15);
        // The stretched reference carries the stretch as its boundary datum.
        assert!(change.eval(on_square).dist(ReferenceStretch.eval(on_square)) <= 1e-15);
    }
    assert_eq!(radial.domain().outer.q, QNorm::One);
}

#[test]
fn seams_are_continuous() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for key in CATALOG_KEYS {
        let y = catalog(key, None).unwrap();
        let mut crossings = 0;
        for _ in 0..2000 {
            let p = sample(y.as_ref(), &mut rng, 1e-2);
            let q = sample(y.as_ref(), &mut rng, 1e-2);
            let at = |s: f64| p + (q - p) * s;
            let fp = seams(key, p);
            let fq = seams(key, q);
            for i in 0..fp.len() {
                if fp[i].signum() == fq[i].signum() {
                    continue;
                }
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if seams(key, at(mid))[i].signum() == fp[i].signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo < 1e-15 {
                        break;
                    }
                }
                let (a, b) = (at(lo), at(hi));
                if y.singular_points().iter().any(|s| a.dist(*s) < 1e-2) {
                    continue;
                }
                let jump = y.eval(a).dist(y.eval(b));
                assert!(jump <= 1e-9, "{key}: seam {i} jump {jump} at {a}");
                crossings += 1;
            }
        }
        assert!(crossings > 100, "{key}: {crossings} crossings");
    }
}
