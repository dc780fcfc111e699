//! Traces of deformations on circles, winding numbers, and cavity volume and
//! perimeter as boundary integrals over the trace.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::deformation::Deformation;
use crate::error::{Error, Result};
use crate::geometry::{pseudoinverse, Mat2, Vec2};
use crate::quadrature::{breakpoints, integrate, Tolerance};

/// Relative proximity tolerance for degree queries (times the curve diameter).
pub const DEGREE_TOL: f64 = 1e-7;

/// Samples at which refinement of cavity metrics starts and stops.
pub const MIN_SAMPLES: usize = 256;
pub const MAX_SAMPLES: usize = 1 << 14;

/// Successive refinements closer than this are considered converged.
pub const REFINE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DerivativeMode {
    /// Chain rule through the exact gradient of the deformation.
    Analytic,
    /// Central differences in the parameter.
    FiniteDifference,
}

/// Closed curve sampled at `n` uniform parameters `t_k = 2πk/n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceCurve {
    pub center: Vec2,
    pub eps: f64,
    pub points: Vec<Vec2>,
    pub derivs: Vec<Vec2>,
    pub mode: DerivativeMode,
}

impl TraceCurve {
    /// Samples a parametrized curve `t ↦ (w(t), w'(t))` on `[0, 2π)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(f64) -> (Vec2, Vec2)) -> Result<Self> {
        check_samples(n)?;
        let (points, derivs) = (0..n).map(|k| f(parameter(k, n))).unzip();
        Ok(Self {
            center: Vec2::ZERO,
            eps: 1.0,
            points,
            derivs,
            mode: DerivativeMode::Analytic,
        })
    }

    /// Curve from samples only; derivatives by periodic central differences.
    pub fn from_points(points: Vec<Vec2>) -> Result<Self> {
        let n = points.len();
        check_samples(n)?;
        let derivs = periodic_differences(&points);
        Ok(Self {
            center: Vec2::ZERO,
            eps: 1.0,
            points,
            derivs,
            mode: DerivativeMode::FiniteDifference,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn step(&self) -> f64 {
        2.0 * PI / self.len() as f64
    }

    /// Diagonal of the bounding box of the samples.
    pub fn diameter(&self) -> f64 {
        let (mut lo, mut hi) = (self.points[0], self.points[0]);
        for p in &self.points {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        hi.dist(lo)
    }

    /// Euclidean distance from `xi` to the closed polyline through the samples.
    pub fn distance_to(&self, xi: Vec2) -> f64 {
        let n = self.len();
        (0..n)
            .map(|k| segment_distance(xi, self.points[k], self.points[(k + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }
}

fn parameter(k: usize, n: usize) -> f64 {
    2.0 * PI * k as f64 / n as f64
}

fn check_samples(n: usize) -> Result<()> {
    if n < 64 || !n.is_power_of_two() {
        return Err(Error::InvalidArgument(format!(
            "trace sample count must be a power of two >= 64, got {n}"
        )));
    }
    Ok(())
}

fn periodic_differences(points: &[Vec2]) -> Vec<Vec2> {
    let n = points.len();
    let h = 2.0 * PI / n as f64;
    (0..n)
        .map(|k| (points[(k + 1) % n] - points[(k + n - 1) % n]) * (0.5 / h))
        .collect()
}

fn segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let l2 = ab.norm_sq();
    if l2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / l2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Samples `t ↦ y(a + ε(cos t, sin t))` counterclockwise.
pub fn trace_on_circle(y: &dyn Deformation, a: Vec2, eps: f64, n: usize) -> Result<TraceCurve> {
    check_samples(n)?;
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "circle radius must be positive, got {eps}"
        )));
    }
    let outer = y.domain().outer;
    let margin = outer.distance_to_boundary(a);
    if margin < eps * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "circle S({a}, {eps}) leaves the domain of {}",
            y.name()
        )));
    }
    let exact = y.grad_is_exact();
    let mut points = Vec::with_capacity(n);
    let mut derivs = Vec::with_capacity(n);
    for k in 0..n {
        let e = Vec2::polar(parameter(k, n));
        let x = a + e * eps;
        points.push(y.try_eval(x)?);
        if exact {
            derivs.push(y.grad(x) * (e.perp() * eps));
        }
    }
    let mode = if exact {
        DerivativeMode::Analytic
    } else {
        derivs = periodic_differences(&points);
        DerivativeMode::FiniteDifference
    };
    Ok(TraceCurve {
        center: a,
        eps,
        points,
        derivs,
        mode,
    })
}

/// Winding number of the sampled curve about `xi` by angle summation.
pub fn winding_number(curve: &TraceCurve, xi: Vec2) -> Result<i64> {
    let tolerance = DEGREE_TOL * curve.diameter();
    let distance = curve.distance_to(xi);
    if distance <= tolerance {
        return Err(Error::NearBoundary {
            point: xi,
            distance,
            tolerance,
        });
    }
    Ok(winding_unchecked(curve, xi))
}

fn winding_unchecked(curve: &TraceCurve, xi: Vec2) -> i64 {
    let n = curve.len();
    let mut total = 0.0;
    for k in 0..n {
        let u = curve.points[k] - xi;
        let v = curve.points[(k + 1) % n] - xi;
        total += u.cross(v).atan2(u.dot(v));
    }
    (total / (2.0 * PI)).round() as i64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImageMembership {
    Inside,
    Outside,
    NearBoundary,
}

/// Membership of `xi` in the topological image enclosed by the curve.
pub fn topological_image_contains(curve: &TraceCurve, xi: Vec2) -> ImageMembership {
    match winding_number(curve, xi) {
        Err(_) => ImageMembership::NearBoundary,
        Ok(0) => ImageMembership::Outside,
        Ok(_) => ImageMembership::Inside,
    }
}

/// `½∮(w₁w₂' − w₂w₁') dt` by the periodic trapezoid rule; positive for
/// counterclockwise images.
pub fn signed_volume(curve: &TraceCurve) -> f64 {
    let s: f64 = curve.points.iter().zip(&curve.derivs).map(|(w, d)| w.cross(*d)).sum();
    0.5 * s * curve.step()
}

/// Area enclosed by the trace. A clockwise image (negative degree) is
/// reported through the log and returned by absolute value.
pub fn cavity_volume(curve: &TraceCurve) -> f64 {
    let v = signed_volume(curve);
    if v < 0.0 {
        log::warn!(
            "trace around {} has negative orientation (signed volume {v:e})",
            curve.center
        );
    }
    v.abs()
}

/// `∮|w'(t)| dt` by the periodic trapezoid rule.
pub fn cavity_perimeter(curve: &TraceCurve) -> f64 {
    curve.derivs.iter().map(|d| d.norm()).sum::<f64>() * curve.step()
}

/// Polygon area of the samples (shoelace formula).
pub fn shoelace_area(points: &[Vec2]) -> f64 {
    let n = points.len();
    0.5 * (0..n).map(|k| points[k].cross(points[(k + 1) % n])).sum::<f64>()
}

/// Length of the closed polyline through the samples.
pub fn polyline_length(points: &[Vec2]) -> f64 {
    let n = points.len();
    (0..n).map(|k| points[k].dist(points[(k + 1) % n])).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityMetrics {
    pub volume: f64,
    pub signed_volume: f64,
    pub perimeter: f64,
    pub degree_range: BTreeSet<i64>,
    pub samples: usize,
    pub converged: bool,
}

/// Volume and perimeter of the image of `S(a, ε)`.
///
/// With an exact gradient both boundary integrals are integrated adaptively
/// on the angular panels between the kinks the map reports about `a`;
/// otherwise the trapezoid sampling is doubled from [`MIN_SAMPLES`] until
/// successive values agree to [`REFINE_TOL`] or [`MAX_SAMPLES`] is reached.
/// `samples` counts integrand evaluations in the first case.
pub fn cavity_metrics(y: &dyn Deformation, a: Vec2, eps: f64) -> Result<CavityMetrics> {
    let curve = trace_on_circle(y, a, eps, MIN_SAMPLES)?;
    let degree_range = degree_range(&curve, 24);
    let (vol, per, samples, converged) = if y.grad_is_exact() {
        adaptive_metrics(y, a, eps)?
    } else {
        sampled_metrics(y, a, eps, curve)?
    };
    if vol < 0.0 {
        log::warn!("trace S({a}, {eps}) of {} is negatively oriented", y.name());
    }
    Ok(CavityMetrics {
        volume: vol.abs(),
        signed_volume: vol,
        perimeter: per,
        degree_range,
        samples,
        converged,
    })
}

fn adaptive_metrics(y: &dyn Deformation, a: Vec2, eps: f64) -> Result<(f64, f64, usize, bool)> {
    let kinks = y.trace_breakpoints(a, eps).into_iter().map(|t| t.rem_euclid(2.0 * PI));
    let panels = breakpoints(0.0, 2.0 * PI, kinks);
    let tol = Tolerance::new(1e-13, 1e-12);
    let tangent = |t: f64| {
        let e = Vec2::polar(t);
        let x = a + e * eps;
        (y.eval(x), y.grad(x) * (e.perp() * eps))
    };
    let v = integrate(
        |t| {
            let (w, d) = tangent(t);
            0.5 * w.cross(d)
        },
        &panels,
        tol,
    );
    let p = integrate(|t| tangent(t).1.norm(), &panels, tol);
    if !(v.value.is_finite() && p.value.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite boundary integral on S({a}, {eps})"
        )));
    }
    Ok((
        v.value,
        p.value,
        v.evaluations + p.evaluations,
        v.converged && p.converged,
    ))
}

fn sampled_metrics(y: &dyn Deformation, a: Vec2, eps: f64, mut curve: TraceCurve) -> Result<(f64, f64, usize, bool)> {
    let mut n = curve.len();
    let mut vol = signed_volume(&curve);
    let mut per = cavity_perimeter(&curve);
    let mut converged = false;
    while n < MAX_SAMPLES {
        n *= 2;
        curve = trace_on_circle(y, a, eps, n)?;
        let (v, p) = (signed_volume(&curve), cavity_perimeter(&curve));
        let done = (v - vol).abs() < REFINE_TOL && (p - per).abs() < REFINE_TOL;
        vol = v;
        per = p;
        if done {
            converged = true;
            break;
        }
    }
    Ok((vol, per, n, converged))
}

/// Degrees observed on a `grid × grid` lattice over the bounding box of the
/// curve (padded by 10%); points near the curve are skipped.
pub fn degree_range(curve: &TraceCurve, grid: usize) -> BTreeSet<i64> {
    let (mut lo, mut hi) = (curve.points[0], curve.points[0]);
    for p in &curve.points {
        lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let pad = (hi - lo) * 0.1;
    let (lo, hi) = (lo - pad, hi + pad);
    let mut out = BTreeSet::new();
    for i in 0..grid {
        for j in 0..grid {
            let s = (i as f64 + 0.5) / grid as f64;
            let t = (j as f64 + 0.5) / grid as f64;
            let xi = Vec2::new(lo.x + s * (hi.x - lo.x), lo.y + t * (hi.y - lo.y));
            if let Ok(d) = winding_number(curve, xi) {
                out.insert(d);
            }
        }
    }
    out
}

fn chart_derivative(eps: f64, t: f64) -> DMatrix<f64> {
    DMatrix::from_column_slice(2, 1, &[-eps * t.sin(), eps * t.cos()])
}

/// Tangential gradient `∇ᵗy = Du (Dη)†` on `S(a, ε)` at parameter `t`, with
/// the chart `η(t) = a + ε(cos t, sin t)` and `u = y ∘ η`.
pub fn tangential_gradient_on_circle(y: &dyn Deformation, a: Vec2, eps: f64, t: f64) -> Result<Mat2> {
    let x = a + Vec2::polar(t) * eps;
    let dy = y.try_grad(x)?;
    let deta = chart_derivative(eps, t);
    let du = dy * Vec2::new(deta[(0, 0)], deta[(1, 0)]);
    let pinv = pseudoinverse(&deta)?;
    Ok(Mat2::from_cols(du * pinv[(0, 0)], du * pinv[(0, 1)]))
}

/// Tangential Jacobian `|cof(∇ᵗy) ν|` on `S(a, ε)` at parameter `t`.
pub fn tangential_jacobian(y: &dyn Deformation, a: Vec2, eps: f64, t: f64) -> Result<f64> {
    let g = tangential_gradient_on_circle(y, a, eps, t)?;
    Ok((g.cof() * Vec2::polar(t)).norm())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub limit: f64,
    pub uncertainty: f64,
    /// Polynomial degree of the fit.
    pub degree: usize,
}

/// Limit as `r → 0⁺` of values sampled at decreasing radii.
///
/// Fits a least-squares polynomial in `r` of degree `min(m - 1, 3)` and
/// returns its intercept. The uncertainty combines the change of the
/// intercept when the degree drops by one with the residual RMS.
pub fn extrapolate_limit(rs: &[f64], vals: &[f64]) -> Result<Extrapolation> {
    if rs.len() != vals.len() {
        return Err(Error::InvalidArgument("radii and values differ in length".into()));
    }
    if rs.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "extrapolation needs at least 3 radii, got {}",
            rs.len()
        )));
    }
    if rs.windows(2).any(|w| !(w[1] < w[0])) || rs.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::InvalidArgument(
            "radii must be positive and strictly decreasing".into(),
        ));
    }
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite value in extrapolation input".into()));
    }
    let degree = (rs.len() - 1).min(3);
    let (c_hi, res_hi) = poly_fit_intercept(rs, vals, degree)?;
    let (c_lo, _) = poly_fit_intercept(rs, vals, degree - 1)?;
    Ok(Extrapolation {
        limit: c_hi,
        uncertainty: (c_hi - c_lo).abs() + res_hi,
        degree,
    })
}

fn poly_fit_intercept(rs: &[f64], vals: &[f64], degree: usize) -> Result<(f64, f64)> {
    let scale = rs[0];
    let m = rs.len();
    let a = DMatrix::from_fn(m, degree + 1, |i, j| (rs[i] / scale).powi(j as i32));
    let b = DVector::from_column_slice(vals);
    let svd = a.clone().svd(true, true);
    let c = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::Numerical(format!("polynomial fit failed: {e}")))?;
    let r = &a * &c - &b;
    let rms = (r.norm_squared() / m as f64).sqrt();
    Ok((c[0], rms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformation::{Affine, Identity, RadialExample};
    use crate::geometry::{QBall, QNorm};
    use approx::assert_relative_eq;

    fn unit_circle(n: usize, turns: f64) -> TraceCurve {
        TraceCurve::from_fn(n, |t| (Vec2::polar(turns * t), Vec2::polar(turns * t).perp() * turns)).unwrap()
    }

    #[test]
    fn identity_trace() {
        let id = Identity::new(QBall::unit(QNorm::Two));
        let c = trace_on_circle(&id, Vec2::ZERO, 1.0, 64).unwrap();
        for (w, d) in c.points.iter().zip(&c.derivs) {
            assert_relative_eq!(w.norm(), 1.0, epsilon = 1e-15);
            assert_relative_eq!(d.norm(), 1.0, epsilon = 1e-15);
        }
        assert!(trace_on_circle(&id, Vec2::ZERO, 1.0, 100).is_err());
        assert!(trace_on_circle(&id, Vec2::new(0.5, 0.0), 0.6, 64).is_err());
    }

    #[test]
    fn affine_trace_derivative() {
        let f = Mat2::new(2.0, 0.3, -0.1, 1.5);
        let y = Affine::linear(f, QBall::unit(QNorm::Two));
        let c = trace_on_circle(&y, Vec2::new(0.1, 0.2), 0.3, 64).unwrap();
        for k in 0..64 {
            let t = 2.0 * PI * k as f64 / 64.0;
            let exact = f * (Vec2::new(-t.sin(), t.cos()) * 0.3);
            assert!(c.derivs[k].dist(exact) < 1e-15);
        }
    }

    #[test]
    fn winding_examples() {
        let c = unit_circle(256, 1.0);
        assert_eq!(winding_number(&c, Vec2::ZERO).unwrap(), 1);
        assert_eq!(winding_number(&c, Vec2::new(2.0, 0.0)).unwrap(), 0);
        let twice = unit_circle(256, 2.0);
        assert_eq!(winding_number(&twice, Vec2::ZERO).unwrap(), 2);
        assert!(matches!(
            winding_number(&c, Vec2::new(1.0, 0.0)),
            Err(Error::NearBoundary { .. })
        ));
        assert_eq!(
            topological_image_contains(&c, c.points[3]),
            ImageMembership::NearBoundary
        );
    }

    #[test]
    fn disk_and_ellipse_metrics() {
        let c = unit_circle(256, 1.0);
        assert_relative_eq!(cavity_volume(&c), PI, epsilon = 1e-8);
        assert_relative_eq!(cavity_perimeter(&c), 2.0 * PI, epsilon = 1e-8);
        let e = TraceCurve::from_fn(256, |t| {
            (Vec2::new(2.0 * t.cos(), t.sin()), Vec2::new(-2.0 * t.sin(), t.cos()))
        })
        .unwrap();
        assert_relative_eq!(cavity_volume(&e), 2.0 * PI, epsilon = 1e-10);
    }

    #[test]
    fn clockwise_trace_reports_absolute_volume() {
        let c = TraceCurve::from_fn(128, |t| (Vec2::polar(-t), -Vec2::polar(-t).perp())).unwrap();
        assert!(signed_volume(&c) < 0.0);
        assert_relative_eq!(cavity_volume(&c), PI, epsilon = 1e-10);
    }

    #[test]
    fn tangential_gradient_examples() {
        let id = Identity::new(QBall::unit(QNorm::Two));
        let g = tangential_gradient_on_circle(&id, Vec2::ZERO, 0.5, 0.0).unwrap();
        assert!(g.max_abs_diff(&Mat2::diag(0.0, 1.0)) < 1e-15);
        assert_relative_eq!(
            tangential_jacobian(&id, Vec2::ZERO, 0.5, 1.3).unwrap(),
            1.0,
            epsilon = 1e-14
        );

        let f = Mat2::diag(2.0, 1.0);
        let y = Affine::linear(f, QBall::unit(QNorm::Two));
        let t = PI / 2.0;
        let nu = Vec2::polar(t);
        let g = tangential_gradient_on_circle(&y, Vec2::ZERO, 0.5, t).unwrap();
        assert!(g.max_abs_diff(&(f * (Mat2::IDENTITY - Mat2::outer(nu, nu)))) < 1e-15);
        assert!((g * nu).norm() < 1e-15);
        assert_relative_eq!(
            tangential_jacobian(&y, Vec2::ZERO, 0.5, t).unwrap(),
            2.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn tangential_jacobian_of_diamond_cavity() {
        // |w'(t)| ≈ √2 b / (cos t + sin t)² as the radius shrinks.
        let y = RadialExample::new(0.5).unwrap();
        for &t in &[0.3, 0.7, 1.2] {
            let r = 1e-4;
            let jt = tangential_jacobian(&y, Vec2::ZERO, r, t).unwrap() * r;
            let lead = 2f64.sqrt() * 0.5 / (t.cos() + t.sin()).powi(2);
            assert!((jt - lead).abs() < 10.0 * r, "t = {t}: {jt} vs {lead}");
        }
    }

    #[test]
    fn extrapolation_examples() {
        let rs = [0.2, 0.1, 0.05, 0.025];
        let vals: Vec<f64> = rs.iter().map(|r| 5.0 + 3.0 * r).collect();
        let e = extrapolate_limit(&rs, &vals).unwrap();
        assert_relative_eq!(e.limit, 5.0, epsilon = 1e-12);
        assert!(e.uncertainty <= 1e-12);
        assert!(extrapolate_limit(&rs[..2], &vals[..2]).is_err());
        assert!(extrapolate_limit(&[0.1, 0.2, 0.3], &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn degree_range_of_circle() {
        let c = unit_circle(256, 1.0);
        let d = degree_range(&c, 20);
        assert_eq!(d.into_iter().collect::<Vec<_>>(), vec![0, 1]);
    }
}
