//! Planar points and matrices, q-norms, flaw sets, perforated domains and the
//! full-column-rank pseudoinverse used by the chart calculus on circles.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at angle `t` (counterclockwise from the first axis).
    #[inline]
    pub fn polar(t: f64) -> Self {
        let (s, c) = t.sin_cos();
        Self { x: c, y: s }
    }

    #[inline]
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// Scalar cross product `self.x * o.y - self.y * o.x`.
    #[inline]
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Counterclockwise rotation by a quarter turn.
    #[inline]
    pub fn perp(self) -> Self {
        Self { x: -self.y, y: self.x }
    }

    #[inline]
    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    #[inline]
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    #[inline]
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    #[inline]
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    #[inline]
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        v * self
    }
}

impl fmt::Display for Vec2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// 2×2 real matrix stored row-major: `[[a11, a12], [a21, a22]]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);
    pub const ZERO: Mat2 = Mat2::new(0.0, 0.0, 0.0, 0.0);

    #[inline]
    pub const fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self { a11, a12, a21, a22 }
    }

    #[inline]
    pub const fn diag(d1: f64, d2: f64) -> Self {
        Self::new(d1, 0.0, 0.0, d2)
    }

    /// Matrix whose columns are `c1` and `c2`.
    #[inline]
    pub fn from_cols(c1: Vec2, c2: Vec2) -> Self {
        Self::new(c1.x, c2.x, c1.y, c2.y)
    }

    /// Tensor product `u ⊗ v`, i.e. the matrix `u vᵀ`.
    #[inline]
    pub fn outer(u: Vec2, v: Vec2) -> Self {
        Self::new(u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y)
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    /// Cofactor matrix; `cof F = det(F) F⁻ᵀ` whenever F is invertible.
    #[inline]
    pub fn cof(&self) -> Self {
        Self::new(self.a22, -self.a21, -self.a12, self.a11)
    }

    /// Adjugate, the transpose of the cofactor.
    #[inline]
    pub fn adj(&self) -> Self {
        Self::new(self.a22, -self.a12, -self.a21, self.a11)
    }

    #[inline]
    pub fn transpose(&self) -> Self {
        Self::new(self.a11, self.a21, self.a12, self.a22)
    }

    #[inline]
    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    #[inline]
    pub fn col(&self, j: usize) -> Vec2 {
        match j {
            0 => Vec2::new(self.a11, self.a21),
            _ => Vec2::new(self.a12, self.a22),
        }
    }

    /// Frobenius inner product `A : B`.
    #[inline]
    pub fn ddot(&self, o: &Mat2) -> f64 {
        self.a11 * o.a11 + self.a12 * o.a12 + self.a21 * o.a21 + self.a22 * o.a22
    }

    #[inline]
    pub fn frobenius(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    #[inline]
    pub fn mul_vec(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.a11 * v.x + self.a12 * v.y, self.a21 * v.x + self.a22 * v.y)
    }

    #[inline]
    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a21.is_finite() && self.a22.is_finite()
    }

    pub fn max_abs_diff(&self, o: &Mat2) -> f64 {
        (self.a11 - o.a11)
            .abs()
            .max((self.a12 - o.a12).abs())
            .max((self.a21 - o.a21).abs())
            .max((self.a22 - o.a22).abs())
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    #[inline]
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a11 + o.a11, self.a12 + o.a12, self.a21 + o.a21, self.a22 + o.a22)
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    #[inline]
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(self.a11 - o.a11, self.a12 - o.a12, self.a21 - o.a21, self.a22 - o.a22)
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    #[inline]
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

impl Mul<Vec2> for Mat2 {
    type Output = Vec2;
    #[inline]
    fn mul(self, v: Vec2) -> Vec2 {
        self.mul_vec(v)
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    #[inline]
    fn mul(self, s: f64) -> Mat2 {
        self.scale(s)
    }
}

/// Exponent of a q-norm. Only `q >= 1` is a norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum QNorm {
    One,
    Two,
    Inf,
    General(f64),
}

impl QNorm {
    pub fn new(q: f64) -> Result<Self> {
        if q.is_nan() || q < 1.0 {
            return Err(Error::InvalidArgument(format!("q-norm exponent must be >= 1, got {q}")));
        }
        Ok(if q == 1.0 {
            QNorm::One
        } else if q == 2.0 {
            QNorm::Two
        } else if q.is_infinite() {
            QNorm::Inf
        } else {
            QNorm::General(q)
        })
    }

    pub fn exponent(&self) -> f64 {
        match self {
            QNorm::One => 1.0,
            QNorm::Two => 2.0,
            QNorm::Inf => f64::INFINITY,
            QNorm::General(q) => *q,
        }
    }
}

pub fn qnorm(x: Vec2, q: QNorm) -> f64 {
    match q {
        QNorm::One => x.x.abs() + x.y.abs(),
        QNorm::Two => x.norm(),
        QNorm::Inf => x.x.abs().max(x.y.abs()),
        QNorm::General(q) => (x.x.abs().powf(q) + x.y.abs().powf(q)).powf(1.0 / q),
    }
}

/// Open q-ball `B_q(center, radius)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QBall {
    pub center: Vec2,
    pub radius: f64,
    pub q: QNorm,
}

impl QBall {
    pub fn new(center: Vec2, radius: f64, q: QNorm) -> Self {
        Self { center, radius, q }
    }

    pub fn unit(q: QNorm) -> Self {
        Self::new(Vec2::ZERO, 1.0, q)
    }

    pub fn contains(&self, x: Vec2) -> bool {
        qnorm(x - self.center, self.q) < self.radius
    }

    pub fn contains_closed(&self, x: Vec2, tol: f64) -> bool {
        qnorm(x - self.center, self.q) <= self.radius + tol
    }

    pub fn area(&self) -> f64 {
        let r2 = self.radius * self.radius;
        match self.q {
            QNorm::One => 2.0 * r2,
            QNorm::Two => PI * r2,
            QNorm::Inf => 4.0 * r2,
            QNorm::General(q) => {
                // 4 Γ(1+1/q)² / Γ(1+2/q), via the Beta integral.
                let g1 = gamma(1.0 + 1.0 / q);
                4.0 * g1 * g1 / gamma(1.0 + 2.0 / q) * r2
            }
        }
    }

    /// Euclidean distance from an interior point to the boundary; negative outside.
    pub fn distance_to_boundary(&self, x: Vec2) -> f64 {
        let d = x - self.center;
        match self.q {
            QNorm::Two => self.radius - d.norm(),
            QNorm::Inf => (self.radius - d.x.abs()).min(self.radius - d.y.abs()),
            QNorm::One => (self.radius - d.x.abs() - d.y.abs()) / 2f64.sqrt(),
            QNorm::General(_) => {
                // Sampled minimum over the boundary; only used for exotic exponents.
                let m = 4096;
                let mut best = f64::INFINITY;
                for k in 0..m {
                    let e = Vec2::polar(2.0 * PI * k as f64 / m as f64);
                    let b = self.center + e * (self.radius / qnorm(e, self.q));
                    best = best.min(b.dist(x));
                }
                if self.contains(x) {
                    best
                } else {
                    -best
                }
            }
        }
    }

    /// Distance `t >= 0` at which the ray `from + t·dir` leaves the ball.
    /// `from` must be inside and `dir` a unit vector.
    pub fn ray_exit(&self, from: Vec2, dir: Vec2) -> f64 {
        let d = from - self.center;
        match self.q {
            QNorm::Two => {
                let b = d.dot(dir);
                let c = d.norm_sq() - self.radius * self.radius;
                -b + (b * b - c).max(0.0).sqrt()
            }
            QNorm::Inf => {
                let mut t = f64::INFINITY;
                for (di, ei) in [(d.x, dir.x), (d.y, dir.y)] {
                    if ei > 0.0 {
                        t = t.min((self.radius - di) / ei);
                    } else if ei < 0.0 {
                        t = t.min((-self.radius - di) / ei);
                    }
                }
                t.max(0.0)
            }
            _ => {
                // Convex ball: the norm along the ray is convex and crosses the
                // radius exactly once beyond an interior start point.
                let (mut lo, mut hi) = (0.0, self.radius.max(1e-300));
                while qnorm(d + dir * hi, self.q) < self.radius {
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if qnorm(d + dir * mid, self.q) < self.radius {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-16 * hi {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }

    /// Boundary corners (polygonal balls only).
    pub fn corners(&self) -> Vec<Vec2> {
        let (c, r) = (self.center, self.radius);
        match self.q {
            QNorm::One => vec![
                c + Vec2::new(r, 0.0),
                c + Vec2::new(0.0, r),
                c + Vec2::new(-r, 0.0),
                c + Vec2::new(0.0, -r),
            ],
            QNorm::Inf => vec![
                c + Vec2::new(r, r),
                c + Vec2::new(-r, r),
                c + Vec2::new(-r, -r),
                c + Vec2::new(r, -r),
            ],
            _ => Vec::new(),
        }
    }
}

fn gamma(x: f64) -> f64 {
    // Lanczos approximation (g = 7), adequate for the area of exotic q-balls.
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// The compact confinement set `H` for flaw points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Confinement {
    Disk { center: Vec2, radius: f64 },
    Square { center: Vec2, half_width: f64 },
}

impl Confinement {
    /// Default used throughout: the closed disk of radius 0.6 about the origin.
    pub fn default_disk() -> Self {
        Confinement::Disk {
            center: Vec2::ZERO,
            radius: 0.6,
        }
    }

    pub fn contains(&self, x: Vec2) -> bool {
        const TOL: f64 = 1e-12;
        match *self {
            Confinement::Disk { center, radius } => x.dist(center) <= radius + TOL,
            Confinement::Square { center, half_width } => qnorm(x - center, QNorm::Inf) <= half_width + TOL,
        }
    }

    /// `dist(H, ∂Ω)` for `H` inside the convex ball `outer`; nonpositive when
    /// `H` is not contained in `outer`.
    pub fn distance_to_boundary(&self, outer: &QBall) -> f64 {
        match *self {
            Confinement::Disk { center, radius } => match outer.q {
                QNorm::General(_) => {
                    let m = 720;
                    (0..m)
                        .map(|k| {
                            let p = center + Vec2::polar(2.0 * PI * k as f64 / m as f64) * radius;
                            outer.distance_to_boundary(p)
                        })
                        .fold(f64::INFINITY, f64::min)
                }
                // Distance to the boundary of these balls is a minimum of
                // 1-Lipschitz affine pieces (or R - |x|), so the disk loses
                // exactly its radius.
                _ => outer.distance_to_boundary(center) - radius,
            },
            Confinement::Square { center, half_width } => {
                let h = half_width;
                [Vec2::new(h, h), Vec2::new(-h, h), Vec2::new(-h, -h), Vec2::new(h, -h)]
                    .into_iter()
                    .map(|c| outer.distance_to_boundary(center + c))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Flaw set `A`, core radius `ε`, cardinality bound `M` and confinement set `H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlawConfig {
    pub points: Vec<Vec2>,
    pub eps: f64,
    pub max_count: usize,
    pub confinement: Confinement,
}

impl FlawConfig {
    pub fn new(points: Vec<Vec2>, eps: f64, max_count: usize, confinement: Confinement) -> Self {
        Self {
            points,
            eps,
            max_count,
            confinement,
        }
    }

    /// One flaw at `a` with the default confinement disk.
    pub fn single(a: Vec2, eps: f64) -> Self {
        Self::new(vec![a], eps, 1, Confinement::default_disk())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    NonPositiveRadius {
        eps: f64,
    },
    TooManyPoints {
        count: usize,
        max: usize,
    },
    OutsideConfinement {
        index: usize,
        point: Vec2,
    },
    Separation {
        i: usize,
        j: usize,
        distance: f64,
        required: f64,
    },
    RadiusTooLarge {
        eps: f64,
        eps_bar: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NonPositiveRadius { eps } => write!(f, "core radius must be positive (eps = {eps})"),
            Violation::TooManyPoints { count, max } => {
                write!(f, "count violated: {count} flaw points exceed the bound {max}")
            }
            Violation::OutsideConfinement { index, point } => {
                write!(f, "confinement violated: flaw #{index} at {point} lies outside H")
            }
            Violation::Separation {
                i,
                j,
                distance,
                required,
            } => write!(
                f,
                "separation violated: |a{i} - a{j}| = {distance} < 3 eps = {required}"
            ),
            Violation::RadiusTooLarge { eps, eps_bar } => {
                write!(
                    f,
                    "radius violated: eps = {eps} is not below dist(H, boundary) = {eps_bar}"
                )
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub violations: Vec<Violation>,
}

impl ValidityReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidFlawConfig(self))
        }
    }
}

impl fmt::Display for ValidityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every admissibility constraint of a flaw configuration against the
/// outer domain. Never fails; all violations are listed.
pub fn validate_flaw_config(cfg: &FlawConfig, outer: &Domain) -> ValidityReport {
    let mut violations = Vec::new();
    if !(cfg.eps > 0.0) {
        violations.push(Violation::NonPositiveRadius { eps: cfg.eps });
    }
    if cfg.points.len() > cfg.max_count {
        violations.push(Violation::TooManyPoints {
            count: cfg.points.len(),
            max: cfg.max_count,
        });
    }
    for (index, &point) in cfg.points.iter().enumerate() {
        if !cfg.confinement.contains(point) {
            violations.push(Violation::OutsideConfinement { index, point });
        }
    }
    let required = 3.0 * cfg.eps;
    for i in 0..cfg.points.len() {
        for j in i + 1..cfg.points.len() {
            let distance = cfg.points[i].dist(cfg.points[j]);
            if distance < required {
                violations.push(Violation::Separation {
                    i,
                    j,
                    distance,
                    required,
                });
            }
        }
    }
    let eps_bar = cfg.confinement.distance_to_boundary(&outer.outer);
    if cfg.eps >= eps_bar {
        violations.push(Violation::RadiusTooLarge { eps: cfg.eps, eps_bar });
    }
    ValidityReport { violations }
}

/// Reference domain `Ω` (a q-ball), optionally perforated by closed disks of
/// radius `ε` around the flaw points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub outer: QBall,
    pub flaws: Option<FlawConfig>,
}

impl Domain {
    pub fn new(outer: QBall) -> Self {
        Self { outer, flaws: None }
    }

    pub fn perforated(outer: QBall, flaws: FlawConfig) -> Self {
        Self {
            outer,
            flaws: Some(flaws),
        }
    }

    pub fn with_flaws(&self, flaws: FlawConfig) -> Self {
        Self {
            outer: self.outer,
            flaws: Some(flaws),
        }
    }

    pub fn flaw_points(&self) -> &[Vec2] {
        self.flaws.as_ref().map(|f| f.points.as_slice()).unwrap_or(&[])
    }

    pub fn core_radius(&self) -> f64 {
        self.flaws.as_ref().map(|f| f.eps).unwrap_or(0.0)
    }

    /// Membership in `Ω_ε^A = Ω \ ∪ B̄(a, ε)`.
    pub fn contains(&self, x: Vec2) -> bool {
        if !self.outer.contains(x) {
            return false;
        }
        match &self.flaws {
            None => true,
            Some(f) => f.points.iter().all(|a| x.dist(*a) > f.eps),
        }
    }

    /// Membership in `Ω̃_ε^A = Ω \ ∪ B(a, ε)` (the spheres are kept).
    pub fn contains_with_spheres(&self, x: Vec2) -> bool {
        if !self.outer.contains(x) {
            return false;
        }
        match &self.flaws {
            None => true,
            Some(f) => f.points.iter().all(|a| x.dist(*a) >= f.eps),
        }
    }
}

/// Pseudoinverse `H† = (HᵀH)⁻¹Hᵀ` of a tall matrix with full column rank.
pub fn pseudoinverse(h: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (rows, cols) = h.shape();
    if cols == 0 || rows < cols {
        return Err(Error::InvalidArgument(format!(
            "pseudoinverse expects a tall N×(N-1) matrix, got {rows}×{cols}"
        )));
    }
    let gram = h.transpose() * h;
    let scale = gram.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::SingularMatrix);
    }
    let chol = gram.clone().cholesky().ok_or(Error::SingularMatrix)?;
    // Reject numerically rank-deficient input: the Cholesky factor's smallest
    // pivot relative to the largest measures the column condition.
    let l = chol.l();
    let (mut pmin, mut pmax) = (f64::INFINITY, 0.0f64);
    for i in 0..cols {
        let v = l[(i, i)].abs();
        pmin = pmin.min(v);
        pmax = pmax.max(v);
    }
    if pmin <= 1e-12 * pmax {
        return Err(Error::SingularMatrix);
    }
    Ok(chol.solve(&h.transpose()))
}
