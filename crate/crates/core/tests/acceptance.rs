//! Acceptance report: one PASS/FAIL line per criterion.

mod common;

use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

use cavicore::cavity::{
    cavity_metrics, cavity_perimeter, cavity_volume, degree_range, polyline_length, shoelace_area, tangential_jacobian,
    trace_on_circle, winding_number, TraceCurve,
};
use cavicore::deformation::{
    catalog, Affine, ChangeOfReference, Deformation, EuclideanCavity, Identity, RadialProfile, CATALOG_KEYS,
};
use cavicore::energy::{
    extended_det_pairing, limit_cavity, regularized_energy, Density, Lambdas, LimitCavity, LimitTolerances,
    PolynomialBump,
};
use cavicore::geometry::{pseudoinverse, Confinement, Domain, FlawConfig, Mat2, QBall, QNorm, Vec2};
use cavicore::minimize::{gamma_sweep, lift, minimize_radial, radial_reduced_energy, RadialProblem};
use cavicore::recovery::{default_r_rule, recovery_energy_table};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const RADII: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: usize, pass: bool, detail: String) {
        if !pass {
            self.failed += 1;
        }
        println!("AC{id:<2} {} {detail}", if pass { "PASS" } else { "FAIL" });
    }
}

fn limit_of(key: &str) -> LimitCavity {
    let y = catalog(key, None).unwrap();
    limit_cavity(y.as_ref(), Vec2::ZERO, &RADII, &LimitTolerances::default()).unwrap()
}

fn ac1(rep: &mut Report) {
    let start = Instant::now();
    let c = limit_of("radial");
    let elapsed = start.elapsed().as_secs_f64();
    let b = 0.5;
    let diamond = [
        Vec2::new(b, 0.0),
        Vec2::new(0.0, b),
        Vec2::new(-b, 0.0),
        Vec2::new(0.0, -b),
    ];
    let area = shoelace_area(&diamond);
    let dp = (c.perimeter.limit - 4.0 * SQRT_2 * b).abs();
    let dv = (c.volume.limit - area).abs();
    rep.line(
        1,
        dp <= 1e-3 && dv <= 1e-4 && elapsed < 2.0,
        format!(
            "radial: perimeter {:.7} (|Δ| {dp:.1e} ≤ 1e-3), volume {:.7} vs shoelace {area} (|Δ| {dv:.1e} ≤ 1e-4), {elapsed:.2}s < 2s",
            c.perimeter.limit, c.volume.limit
        ),
    );
}

fn ac2(rep: &mut Report) {
    let c = limit_of("change-of-reference");
    let y = ChangeOfReference::new(0.5).unwrap();
    let dp = (c.perimeter.limit - PI).abs();
    let mut worst = 0.0f64;
    for r in RADII {
        let (left, right) = y.split_perimeter(r);
        let direct = cavity_metrics(&y, Vec2::ZERO, r).unwrap().perimeter;
        worst = worst.max(((left + right) - direct).abs());
    }
    rep.line(
        2,
        dp <= 1e-3 && worst <= 1e-4,
        format!(
            "change-of-reference: perimeter {:.7} (|Δ| {dp:.1e} ≤ 1e-3), split vs direct max |Δ| {worst:.1e} ≤ 1e-4",
            c.perimeter.limit
        ),
    );
}

fn ac3(rep: &mut Report) {
    let c = limit_of("superposition");
    let dp = (c.perimeter.limit - 8.0 / SQRT_2).abs();
    rep.line(
        3,
        dp <= 1e-3,
        format!(
            "superposition: perimeter {:.7} (|Δ| {dp:.1e} ≤ 1e-3)",
            c.perimeter.limit
        ),
    );
}

fn ac4(rep: &mut Report) {
    let c = limit_of("spike");
    let analytic = c.analytic.unwrap().perimeter;
    let dp = (c.perimeter.limit - (PI + 1.0)).abs();
    let gap = c.perimeter.limit - analytic;
    rep.line(
        4,
        dp <= 1e-2 && (analytic - PI).abs() < 1e-12 && (gap - 1.0).abs() <= 1e-2 && c.conv_perimeter_violated,
        format!(
            "spike: perimeter {:.5} (|Δ| {dp:.1e} ≤ 1e-2), reduced boundary {analytic:.5}, gap {gap:.5}, conv-perimeter violated: {}",
            c.perimeter.limit, c.conv_perimeter_violated
        ),
    );
}

fn ac5(rep: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut mismatches = 0;
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
            if winding_number(&curve, p).unwrap() != common::crossing_winding(&points, p) {
                mismatches += 1;
            }
            queried += 1;
        }
    }
    let mut bad_ranges = Vec::new();
    for key in CATALOG_KEYS {
        let y = catalog(key, None).unwrap();
        for r in RADII {
            let curve = trace_on_circle(y.as_ref(), Vec2::ZERO, r, 1024).unwrap();
            let range = degree_range(&curve, 200);
            if range.iter().any(|d| *d != 0 && *d != 1) {
                bad_ranges.push(format!("{key}@{r}: {range:?}"));
            }
        }
    }
    rep.line(
        5,
        mismatches == 0 && bad_ranges.is_empty(),
        format!("oracle mismatches {mismatches}/2000, degree ranges outside {{0,1}}: {bad_ranges:?}"),
    );
}

fn ac6(rep: &mut Report) {
    // Smooth analytic traces; the catalog traces have corners.
    let cavity = EuclideanCavity::new(0.5).unwrap();
    let shear = Affine::linear(Mat2::new(1.5, 0.4, -0.2, 0.8), QBall::unit(QNorm::Two));
    let maps: [(&dyn Deformation, Vec2); 2] = [(&cavity, Vec2::ZERO), (&shear, Vec2::new(0.1, 0.2))];
    let (mut dv, mut dp, mut chart) = (0.0f64, 0.0f64, 0.0f64);
    for (y, a) in maps {
        let curve = trace_on_circle(y, a, 0.3, 1024).unwrap();
        let v = cavity_volume(&curve);
        dv = dv.max((v - shoelace_area(&curve.points).abs()).abs());
        let p = cavity_perimeter(&curve);
        dp = dp.max((p - polyline_length(&curve.points)).abs() / p);
    }
    for key in CATALOG_KEYS {
        let y = catalog(key, None).unwrap();
        for k in 0..1024 {
            let t = 2.0 * PI * (k as f64 + 0.37) / 1024.0;
            let j = tangential_jacobian(y.as_ref(), Vec2::ZERO, 0.3, t).unwrap();
            let speed = y.grad(Vec2::polar(t) * 0.3).mul_vec(Vec2::polar(t).perp()).norm() * 0.3;
            chart = chart.max((0.3 * j - speed).abs() / speed);
        }
    }
    rep.line(
        6,
        dv <= 1e-8 && dp <= 1e-6 && chart <= 1e-10,
        format!("n=1024: volume vs shoelace {dv:.1e} (≤ 1e-8), perimeter vs polyline {dp:.1e} rel (≤ 1e-6), chart identity {chart:.1e} rel (≤ 1e-10)"),
    );
}

fn ac7(rep: &mut Report) {
    let disk = QBall::unit(QNorm::Two);
    let cfg = FlawConfig::new(vec![Vec2::ZERO], 0.3, 1, Confinement::default_disk());
    let phi = PolynomialBump::new(Vec2::ZERO, 1.0, 2).unwrap();
    let id = extended_det_pairing(&Identity::new(disk), &cfg, &Domain::new(disk), &phi).unwrap();
    let exact = PI * (1.0f64 - 0.09).powi(3) / 3.0;
    let d_id = (id.pairing - exact).abs();

    let y = catalog("radial", None).unwrap();
    let cfg = FlawConfig::single(Vec2::ZERO, 0.1);
    let mut worst = 0.0f64;
    for k in [2, 3, 4] {
        let phi = PolynomialBump::new(Vec2::ZERO, 0.7, k).unwrap();
        let r = extended_det_pairing(y.as_ref(), &cfg, &y.domain(), &phi).unwrap();
        worst = worst.max(r.residual);
    }
    rep.line(
        7,
        d_id <= 1e-6 && worst <= 1e-4,
        format!("identity pairing {:.9} vs {exact:.9} (|Δ| {d_id:.1e} ≤ 1e-6), radial residual k=2,3,4 max {worst:.1e} ≤ 1e-4", id.pairing),
    );
}

fn ac8(rep: &mut Report) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut left, mut proj) = (0.0f64, 0.0f64);
    for (rows, cols) in [(2, 1), (3, 2)] {
        for _ in 0..200 {
            let h = loop {
                let h = DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-2.0..2.0));
                let s = h.clone().svd(false, false).singular_values;
                if s.min() > 0.05 * s.max() {
                    break h;
                }
            };
            let hp = pseudoinverse(&h).unwrap();
            left = left.max((&hp * &h - DMatrix::identity(cols, cols)).amax());
            let v = DVector::from_fn(rows, |_, _| rng.gen_range(-2.0..2.0));
            proj = proj.max((&h * (&hp * &v) - common::gram_schmidt_projection(&h, &v)).amax());
        }
    }
    rep.line(
        8,
        left <= 1e-12 && proj <= 1e-10,
        format!("400 matrices: |H†H - I| {left:.1e} ≤ 1e-12, |HH†v - proj v| {proj:.1e} ≤ 1e-10"),
    );
}

fn ac9(rep: &mut Report) {
    let y = catalog("radial", None).unwrap();
    let dom = y.domain();
    let density = Density::power(1.2, 1.2).unwrap();
    let t = recovery_energy_table(y, &[Vec2::ZERO], &dom, &RADII, &density, Lambdas::ONE, &default_r_rule).unwrap();
    let last = t.rows.last().unwrap();
    let trace = t.rows.iter().map(|r| r.trace_identity).fold(0.0, f64::max);
    let shortfall = t
        .rows
        .iter()
        .map(|r| t.limit.breakdown.total - r.energy.total)
        .fold(f64::NEG_INFINITY, f64::max);
    let gaps: Vec<String> = t
        .rows
        .iter()
        .map(|r| format!("{:.2}%", 100.0 * r.relative_gap))
        .collect();
    rep.line(
        9,
        last.relative_gap < 0.02 && trace <= 1e-6 && t.lower_bound_holds(5e-3),
        format!(
            "power p=q=1.2, λ=1: limit {:.5}, relative gaps {gaps:?} (< 2% at ε=0.025), trace identity {trace:.1e} ≤ 1e-6, largest 𝓔 - 𝓔_ε {shortfall:.2e} (≤ 5e-3)",
            t.limit.breakdown.total
        ),
    );
}

fn ac10(rep: &mut Report, suite: Instant) {
    let density = Density::default_density(2.0).unwrap();
    let mut no_stretch = 0.0f64;
    for eps in RADII {
        let prob = RadialProblem::new(eps, 1.0, 1.0, density, Lambdas::ZERO, 32).unwrap();
        let id = radial_reduced_energy(&RadialProfile::identity(prob.nodes()).unwrap(), &prob)
            .unwrap()
            .total;
        let m = minimize_radial(&prob).unwrap();
        no_stretch = no_stretch.max(m.breakdown.total - id);
    }

    let template = RadialProblem::new(0.2, 1.0, 2.0, density, Lambdas::ONE, 32).unwrap();
    let sweep = gamma_sweep(&[0.2, 0.1, 0.05], &template).unwrap();
    let monotone = sweep.gaps_nonincreasing(0.05);

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let eps = 0.1;
    let lambdas = Lambdas::new(0.7, 1.3).unwrap();
    let prob = RadialProblem::new(eps, 1.0, 1.6, Density::default_density(2.5).unwrap(), lambdas, 16).unwrap();
    let dom = Domain::new(prob.domain());
    let cfg = FlawConfig::single(Vec2::ZERO, eps);
    let mut consistency = 0.0f64;
    for _ in 0..20 {
        let nodes = prob.nodes();
        let mut values = vec![rng.gen_range(0.0..0.3)];
        for _ in 1..nodes.len() {
            let last = *values.last().unwrap();
            values.push(last + rng.gen_range(0.01..0.2));
        }
        let scale = prob.boundary_value / values.last().unwrap();
        let profile = RadialProfile::new(nodes, values.iter().map(|v| v * scale).collect()).unwrap();
        let e1 = radial_reduced_energy(&profile, &prob).unwrap().total;
        let e2 = regularized_energy(&lift(&profile, Vec2::ZERO), &cfg, &dom, &prob.density, lambdas)
            .unwrap()
            .breakdown
            .total;
        consistency = consistency.max((e1 - e2).abs() / e2);
    }
    let elapsed = suite.elapsed().as_secs_f64();
    let gaps: Vec<String> = sweep.gaps.iter().map(|g| format!("{g:.4}")).collect();
    rep.line(
        10,
        no_stretch <= 1e-8 && monotone && consistency <= 1e-4 && elapsed < 300.0,
        format!(
            "no-stretch excess over identity {no_stretch:.1e} ≤ 1e-8, stretch-2 gaps {gaps:?} nonincreasing (5%): {monotone}, 1D/2D {consistency:.1e} ≤ 1e-4, acceptance runtime {elapsed:.1}s < 300s"
        ),
    );
}

fn main() {
    let suite = Instant::now();
    let mut rep = Report { failed: 0 };
    ac1(&mut rep);
    ac2(&mut rep);
    ac3(&mut rep);
    ac4(&mut rep);
    ac5(&mut rep);
    ac6(&mut rep);
    ac7(&mut rep);
    ac8(&mut rep);
    ac9(&mut rep);
    ac10(&mut rep, suite);
    println!("{} of 10 criteria failed", rep.failed);
}
