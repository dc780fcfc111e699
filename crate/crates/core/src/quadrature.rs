//! One-dimensional quadrature: adaptive Gauss–Kronrod (7/15) with
//! user-supplied breakpoints and fixed Gauss–Legendre rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rayon::prelude::*;

use crate::geometry::{QBall, Vec2};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Self {
            abs,
            rel,
            max_intervals: 2000,
        }
    }

    pub const fn with_max_intervals(mut self, n: usize) -> Self {
        self.max_intervals = n;
        self
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self::new(1e-12, 1e-10)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Single 15-point Kronrod panel with the QUADPACK error heuristic.
pub fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut rk = fc * WGK[7];
    let mut rg = fc * WG[3];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let f1 = f(c - dx);
        let f2 = f(c + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        rk += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            rg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * rk;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = rk * h;
    let asc = asc * h.abs();
    let mut err = ((rk - rg) * h).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    let floor = 50.0 * f64::EPSILON * (value.abs());
    (value, err.max(floor))
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error)
    }
}

/// Adaptive integral of `f` over `[points[0], points[last]]`, with the
/// interior points treated as breakpoints (kinks or seams of the integrand).
/// Points must be nondecreasing; repeated points are ignored.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, points: &[f64], tol: Tolerance) -> Estimate {
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let (mut value, mut error) = (0.0, 0.0);
    for w in points.windows(2) {
        if w[1] > w[0] {
            let (v, e) = gk15(&mut f, w[0], w[1]);
            evaluations += 15;
            value += v;
            error += e;
            heap.push(Panel {
                a: w[0],
                b: w[1],
                value: v,
                error: e,
            });
        }
    }
    loop {
        let target = tol.abs.max(tol.rel * value.abs());
        if !value.is_finite() {
            return Estimate {
                value,
                error,
                evaluations,
                converged: false,
            };
        }
        if error <= target {
            return Estimate {
                value,
                error,
                evaluations,
                converged: true,
            };
        }
        if heap.len() >= tol.max_intervals {
            return Estimate {
                value,
                error,
                evaluations,
                converged: false,
            };
        }
        let Some(worst) = heap.pop() else {
            return Estimate {
                value: 0.0,
                error: 0.0,
                evaluations,
                converged: true,
            };
        };
        if worst.error == 0.0 {
            // Every remaining panel is exhausted.
            return Estimate {
                value,
                error,
                evaluations,
                converged: false,
            };
        }
        let m = 0.5 * (worst.a + worst.b);
        if !(m > worst.a && m < worst.b) {
            // Interval exhausted at machine resolution; keep its estimate.
            error -= worst.error;
            heap.push(Panel { error: 0.0, ..worst });
            continue;
        }
        let (v1, e1) = gk15(&mut f, worst.a, m);
        let (v2, e2) = gk15(&mut f, m, worst.b);
        evaluations += 30;
        value += v1 + v2 - worst.value;
        error = (error + e1 + e2 - worst.error).max(0.0);
        heap.push(Panel {
            a: worst.a,
            b: m,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: m,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
}

/// Sorts, deduplicates and clips breakpoints to `[a, b]`, keeping both ends.
pub fn breakpoints(a: f64, b: f64, interior: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut pts: Vec<f64> = interior
        .into_iter()
        .filter(|t| t.is_finite() && *t > a && *t < b)
        .collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    let span = (b - a).abs().max(f64::MIN_POSITIVE);
    pts.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * span);
    if let Some(last) = pts.last_mut() {
        *last = b;
    }
    pts[0] = a;
    pts
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Known kinks of an integrand in polar coordinates about a pole.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Breaks {
    pub radial: Vec<f64>,
    pub angular: Vec<f64>,
}

fn combine(parts: impl IntoIterator<Item = Estimate>) -> Estimate {
    parts.into_iter().fold(
        Estimate {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
            converged: true,
        },
        |acc, e| Estimate {
            value: acc.value + e.value,
            error: acc.error + e.error,
            evaluations: acc.evaluations + e.evaluations,
            converged: acc.converged && e.converged,
        },
    )
}

fn wrap_angle(t: f64) -> f64 {
    t.rem_euclid(2.0 * PI)
}

/// Integral over the disk sector family `{pole + ρ(cos θ, sin θ): r_in < ρ < r_out(θ)}`.
///
/// The radius is substituted as `ρ = r_in + (r_out - r_in) u³`, which clusters
/// nodes at the inner circle and absorbs integrable singularities at the
/// pole. Angular panels are integrated in parallel.
#[allow(clippy::too_many_arguments)]
fn polar_patch<F, R>(
    f: &F,
    pole: Vec2,
    r_in: f64,
    r_out: &R,
    radial: &[f64],
    angular: Vec<f64>,
    tol: Tolerance,
) -> Estimate
where
    F: Fn(Vec2) -> f64 + Sync,
    R: Fn(f64) -> f64 + Sync,
{
    let inner_tol = Tolerance::new(tol.abs * 1e-2, tol.rel * 1e-2).with_max_intervals(tol.max_intervals);
    let ray = |theta: f64| -> f64 {
        let e = Vec2::polar(theta);
        let r1 = r_out(theta);
        if !(r1 > r_in) {
            return 0.0;
        }
        let span = r1 - r_in;
        let ubreaks = radial
            .iter()
            .filter(|r| **r > r_in && **r < r1)
            .map(|r| ((r - r_in) / span).cbrt());
        let (u0, tail) = if r_in == 0.0 {
            pole_tail(f, pole, e, span)
        } else {
            (0.0, 0.0)
        };
        let pts = breakpoints(u0, 1.0, ubreaks.filter(|u| *u > u0));
        tail + integrate(
            |u: f64| {
                let rho = r_in + span * u * u * u;
                let jac = 3.0 * u * u * span;
                if jac == 0.0 {
                    return 0.0;
                }
                f(pole + e * rho) * rho * jac
            },
            &pts,
            inner_tol,
        )
        .value
    };
    let panels = breakpoints(0.0, 2.0 * PI, angular.into_iter().map(wrap_angle));
    let parts: Vec<Estimate> = panels
        .par_windows(2)
        .map(|w| integrate(ray, &[w[0], w[1]], tol))
        .collect();
    combine(parts)
}

/// Relative radius below which a polar patch about its pole switches to
/// the power-law tail.
const POLE_CUTOFF: f64 = 1e-9;

/// `∫_0^{r_c} f(pole + ρe) ρ dρ` for `r_c = POLE_CUTOFF · span`, assuming
/// `f ≈ C ρ^{-s}` there with `s` fitted from the values at `r_c` and `2r_c`.
/// Matrix-based integrands lose all precision much closer to a singular
/// pole, so the last stretch is integrated in closed form. Returns the
/// matching lower limit in the `u` variable and the tail value.
fn pole_tail<F: Fn(Vec2) -> f64>(f: &F, pole: Vec2, e: Vec2, span: f64) -> (f64, f64) {
    let rc = POLE_CUTOFF * span;
    let w1 = f(pole + e * rc);
    let w2 = f(pole + e * (2.0 * rc));
    let tail = if w1 == 0.0 {
        0.0
    } else if w1.is_finite() && w2.is_finite() && w1 * w2 > 0.0 {
        let s = (w1 / w2).ln() / std::f64::consts::LN_2;
        if s >= 2.0 {
            f64::INFINITY
        } else {
            w1 * rc * rc / (2.0 - s)
        }
    } else {
        w1 * rc * rc / 2.0
    };
    (POLE_CUTOFF.cbrt(), tail)
}

fn corner_angles(outer: &QBall, pole: Vec2) -> Vec<f64> {
    outer.corners().into_iter().map(|c| (c - pole).angle()).collect()
}

/// Integral of `f` over `outer` with the open disks `B(a, inner)` removed
/// for every `a` in `holes` (the full ball when `inner = 0` or there are no
/// holes). `breaks` supplies kinks of the integrand about a pole.
///
/// Each hole is surrounded by a polar annulus patch; the remainder is
/// integrated along rays from the center of `outer`, skipping the chords
/// covered by the patches.
pub fn integrate_perforated<F>(
    f: &F,
    outer: &QBall,
    holes: &[Vec2],
    inner: f64,
    breaks: &(dyn Fn(Vec2) -> Breaks + Sync),
    tol: Tolerance,
) -> Estimate
where
    F: Fn(Vec2) -> f64 + Sync,
{
    let full = |pole: Vec2, r_in: f64| {
        let b = breaks(pole);
        let mut angular = b.angular;
        angular.extend(corner_angles(outer, pole));
        let r_out = |t: f64| outer.ray_exit(pole, Vec2::polar(t));
        polar_patch(f, pole, r_in, &r_out, &b.radial, angular, tol)
    };
    match holes {
        [] => return full(outer.center, 0.0),
        [a] => return full(*a, inner),
        _ => {}
    }

    // Patch radii: halfway between the hole and the nearest obstacle.
    let radii: Vec<f64> = holes
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let sep = holes
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, b)| 0.5 * a.dist(*b))
                .fold(f64::INFINITY, f64::min);
            let room = sep.min(outer.distance_to_boundary(*a));
            inner + 0.5 * (room - inner)
        })
        .collect();
    let mut parts: Vec<Estimate> = holes
        .iter()
        .zip(&radii)
        .map(|(a, rho)| {
            let b = breaks(*a);
            let r_out = |_t: f64| *rho;
            polar_patch(f, *a, inner, &r_out, &b.radial, b.angular, tol)
        })
        .collect();

    let pole = outer.center;
    let b = breaks(pole);
    let mut angular = b.angular.clone();
    angular.extend(corner_angles(outer, pole));
    for (a, rho) in holes.iter().zip(&radii) {
        let d = *a - pole;
        if d.norm() > *rho {
            let half = (rho / d.norm()).asin();
            angular.push(d.angle() - half);
            angular.push(d.angle() + half);
        }
    }
    let inner_tol = Tolerance::new(tol.abs * 1e-2, tol.rel * 1e-2).with_max_intervals(tol.max_intervals);
    let ray = |theta: f64| -> f64 {
        let e = Vec2::polar(theta);
        let r1 = outer.ray_exit(pole, e);
        // Chords of the ray inside the patches, clipped to [0, r1].
        let mut cut: Vec<(f64, f64)> = holes
            .iter()
            .zip(&radii)
            .filter_map(|(a, rho)| {
                let d = *a - pole;
                let bb = d.dot(e);
                let disc = bb * bb - (d.norm_sq() - rho * rho);
                if disc <= 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                let (t0, t1) = ((bb - s).max(0.0), (bb + s).min(r1));
                (t1 > t0).then_some((t0, t1))
            })
            .collect();
        cut.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut total = 0.0;
        let mut start = 0.0;
        let mut segment = |lo: f64, hi: f64| {
            if hi > lo {
                let pts = breakpoints(lo, hi, b.radial.iter().copied());
                total += integrate(|t: f64| f(pole + e * t) * t, &pts, inner_tol).value;
            }
        };
        for (t0, t1) in cut {
            segment(start, t0);
            start = start.max(t1);
        }
        segment(start, r1);
        total
    };
    let panels = breakpoints(0.0, 2.0 * PI, angular.into_iter().map(wrap_angle));
    parts.extend(
        panels
            .par_windows(2)
            .map(|w| integrate(ray, &[w[0], w[1]], tol))
            .collect::<Vec<_>>(),
    );
    combine(parts)
}
