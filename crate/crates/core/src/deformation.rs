//! Deformations: maps with value and gradient on a domain, the analytic
//! catalog of cavitating maps, piecewise-linear radial maps and composition.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{qnorm, Domain, Mat2, QBall, QNorm, Vec2};

/// Relative tolerance for treating a point as lying on the closed domain.
const CLOSURE_TOL: f64 = 1e-12;

/// Limit cavity at a flaw point: the topological image of the point and the
/// limit of trace perimeters on shrinking circles (which may exceed the
/// perimeter of the image).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CavityLimit {
    pub volume: f64,
    pub perimeter: f64,
    pub trace_perimeter_limit: f64,
}

impl CavityLimit {
    pub fn perimeter_converges(&self) -> bool {
        (self.perimeter - self.trace_perimeter_limit).abs() <= 1e-12 * self.perimeter.max(1.0)
    }
}

pub trait Deformation: Send + Sync + Debug {
    fn name(&self) -> String;

    /// Reference domain (flaws, if any, are supplied separately).
    fn domain(&self) -> Domain;

    fn eval(&self, x: Vec2) -> Vec2;

    /// Gradient `Dy(x)`. The default is a central difference; implementors
    /// with a closed form override both this and [`Deformation::grad_is_exact`].
    fn grad(&self, x: Vec2) -> Mat2 {
        fd_gradient(self, x, 1e-6)
    }

    fn grad_is_exact(&self) -> bool {
        false
    }

    /// Points where the map is undefined.
    fn singular_points(&self) -> Vec<Vec2> {
        Vec::new()
    }

    /// Radii about `center` across which the gradient jumps.
    fn radial_breakpoints(&self, _center: Vec2) -> Vec<f64> {
        Vec::new()
    }

    /// Polar angles about `center` across which the gradient jumps.
    fn angular_breakpoints(&self, _center: Vec2) -> Vec<f64> {
        Vec::new()
    }

    /// Parameters `t` at which the trace `t ↦ y(center + radius(cos t, sin t))`
    /// has a kink. Defaults to the angular breakpoints about `center`.
    fn trace_breakpoints(&self, center: Vec2, _radius: f64) -> Vec<f64> {
        self.angular_breakpoints(center)
    }

    /// Closed-form cavity at `a`, when known.
    fn analytic_cavity(&self, _a: Vec2) -> Option<CavityLimit> {
        None
    }

    /// Range of Sobolev exponents for which the map is admissible; metadata
    /// only, never verified.
    fn sobolev_range(&self) -> Option<(f64, f64)> {
        None
    }

    /// Checked evaluation: `x` must lie in the closed domain, away from the
    /// singular points, and the value must be finite.
    fn try_eval(&self, x: Vec2) -> Result<Vec2> {
        let dom = self.domain();
        let tol = CLOSURE_TOL * dom.outer.radius.max(1.0);
        if !x.is_finite() || !dom.outer.contains_closed(x, tol) {
            return Err(Error::OutsideDomain {
                map: self.name(),
                point: x,
            });
        }
        if self.singular_points().contains(&x) {
            return Err(Error::SingularPoint {
                map: self.name(),
                point: x,
            });
        }
        let y = self.eval(x);
        if !y.is_finite() {
            return Err(Error::SingularPoint {
                map: self.name(),
                point: x,
            });
        }
        Ok(y)
    }

    fn try_grad(&self, x: Vec2) -> Result<Mat2> {
        self.try_eval(x)?;
        let g = self.grad(x);
        if !g.is_finite() {
            return Err(Error::SingularPoint {
                map: self.name(),
                point: x,
            });
        }
        Ok(g)
    }
}

/// Central-difference gradient of `y` with step `h`.
pub fn fd_gradient<D: Deformation + ?Sized>(y: &D, x: Vec2, h: f64) -> Mat2 {
    let dx = (y.eval(x + Vec2::new(h, 0.0)) - y.eval(x - Vec2::new(h, 0.0))) * (0.5 / h);
    let dy = (y.eval(x + Vec2::new(0.0, h)) - y.eval(x - Vec2::new(0.0, h))) * (0.5 / h);
    Mat2::from_cols(dx, dy)
}

#[inline]
fn sgn(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Gradient of the norm `|x|_q` away from its kinks.
fn norm_gradient(x: Vec2, q: QNorm) -> Vec2 {
    match q {
        QNorm::One => Vec2::new(sgn(x.x), sgn(x.y)),
        QNorm::Two => x * (1.0 / x.norm()),
        QNorm::Inf => {
            if x.x.abs() >= x.y.abs() {
                Vec2::new(sgn(x.x), 0.0)
            } else {
                Vec2::new(0.0, sgn(x.y))
            }
        }
        QNorm::General(q) => {
            let n = qnorm(x, QNorm::General(q));
            let f = |v: f64| sgn(v) * (v.abs() / n).powf(q - 1.0);
            Vec2::new(f(x.x), f(x.y))
        }
    }
}

/// `x ↦ αx + β x/|x|_q` and its gradient: the building block of every
/// catalog map.
fn radial_q(x: Vec2, q: QNorm, alpha: f64, beta: f64) -> (Vec2, Mat2) {
    let n = qnorm(x, q);
    let value = x * (alpha + beta / n);
    let g = norm_gradient(x, q);
    let grad = Mat2::IDENTITY.scale(alpha + beta / n) - Mat2::outer(x, g).scale(beta / (n * n));
    (value, grad)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Identity {
    pub domain: QBall,
}

impl Identity {
    pub fn new(domain: QBall) -> Self {
        Self { domain }
    }
}

impl Deformation for Identity {
    fn name(&self) -> String {
        "identity".into()
    }
    fn domain(&self) -> Domain {
        Domain::new(self.domain)
    }
    fn eval(&self, x: Vec2) -> Vec2 {
        x
    }
    fn grad(&self, _x: Vec2) -> Mat2 {
        Mat2::IDENTITY
    }
    fn grad_is_exact(&self) -> bool {
        true
    }
}

/// `x ↦ Fx + c`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine {
    pub matrix: Mat2,
    pub shift: Vec2,
    pub domain: QBall,
}

impl Affine {
    pub fn new(matrix: Mat2, shift: Vec2, domain: QBall) -> Self {
        Self { matrix, shift, domain }
    }

    pub fn linear(matrix: Mat2, domain: QBall) -> Self {
        Self::new(matrix, Vec2::ZERO, domain)
    }
}

impl Deformation for Affine {
    fn name(&self) -> String {
        "affine".into()
    }
    fn domain(&self) -> Domain {
        Domain::new(self.domain)
    }
    fn eval(&self, x: Vec2) -> Vec2 {
        self.matrix * x + self.shift
    }
    fn grad(&self, _x: Vec2) -> Mat2 {
        self.matrix
    }
    fn grad_is_exact(&self) -> bool {
        true
    }
}

fn check_b(b: f64) -> Result<()> {
    if b > 0.0 && b < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "cavity parameter b must lie in (0, 1), got {b}"
        )))
    }
}

fn axis_angles() -> Vec<f64> {
    (0..=4).map(|k| k as f64 * PI / 2.0).collect()
}

fn octant_angles() -> Vec<f64> {
    (0..=8).map(|k| k as f64 * PI / 4.0).collect()
}

/// Diamond cavity: `y(x) = ((1-b)|x|₁ + b) x/|x|₁` on the unit 1-ball.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialExample {
    pub b: f64,
}

impl RadialExample {
    pub fn new(b: f64) -> Result<Self> {
        check_b(b)?;
        Ok(Self { b })
    }
}

impl Deformation for RadialExample {
    fn name(&self) -> String {
        format!("radial(b={})", self.b)
    }
    fn domain(&self) -> Domain {
        Domain::new(QBall::unit(QNorm::One))
    }
    fn eval(&self, x: Vec2) -> Vec2 {
        radial_q(x, QNorm::One, 1.0 - self.b, self.b).0
    }
    fn grad(&self, x: Vec2) -> Mat2 {
        radial_q(x, QNorm::One, 1.0 - self.b, self.b).1
    }
    fn grad_is_exact(&self) -> bool {
        true
    }
    fn singular_points(&self) -> Vec<Vec2> {
        vec![Vec2::ZERO]
    }
    fn angular_breakpoints(&self, center: Vec2) -> Vec<f64> {
        if center == Vec2::ZERO {
            axis_angles()
        } else {
            Vec::new()
        }
    }
    fn analytic_cavity(&self, a: Vec2) -> Option<CavityLimit> {
        (a == Vec2::ZERO).then(|| {
            let b = self.b;
            CavityLimit {
                volume: 2.0 * b * b,
                perimeter: 4.0 * SQRT_2 * b,
                trace_perimeter_limit: 4.0 * SQRT_2 * b,
            }
        })
    }
    fn sobolev_range(&self) -> Option<(f64, f64)> {
        Some((1.0, 2.0))
    }
}

/// `f(x) = (2x₁, x₂)` for `x₁ ≥ 0`, identity otherwise, on `(-1, 1)²`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ReferenceStretch;

impl Deformation for ReferenceStretch {
    fn name(&self) -> String {
        "reference-stretch".into()
    }
    fn domain(&self) -> Domain {
        Domain::new(QBall::unit(QNorm::Inf))
    }
    fn eval(&self, x: Vec2) -> Vec2 {
        if x.x >= 0.0 {
            Vec2::new(2.0 * x.x, x.y)
        } else {
            x
        }
    }
    fn grad(&self, x: Vec2) -> Mat2 {
        if x.x >= 0.0 {
            Mat2::diag(2.0, 1.0)
        } else {
            Mat2::IDENTITY
        }
    }
    fn grad_is_exact(&self) -> bool {
        true
    }
    fn angular_breakpoints(&self, center: Vec2) -> Vec<f64> {
        if center == Vec2::ZERO {
            vec![0.5 * PI, 1.5 * PI]
        } else {
            Vec::new()
        }
    }
}

/// Euclidean cavity `u(z) = ((1-b)|z| + b) z/|z|` inside the unit disk and the
/// identity outside, on `(-1, 2)²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EuclideanCavity {
    pub b: f64,
}

impl EuclideanCavity {
    pub fn new(b: f64) -> Result<Self> {
        check_b(b)?;
        Ok(Self { b })
    }
}

impl Deformation for EuclideanCavity {
    fn name(&self) -> String {
        format!("euclidean-cavity(b={})", self.b)
    }
    fn domain(&self) -> Domain {
        Domain::new(QBall::new(Vec2::new(0.5, 0.5), 1.5, QNorm::Inf))
    }
    fn eval(&self, z: Vec2) -> Vec2 {
        if z.norm() < 1.0 {
            radial_q(z, QNorm::Two, 1.0 - self.b, self.b).0
        } else {
            z
        }
    }
    fn grad(&self, z: Vec2) -> Mat2 {
        if z.norm() < 1.0 {
            radial_q(z, QNorm::Two, 1.0 - self.b, self.b).1
        } else {
            Mat2::IDENTITY
        }
    }
    fn grad_is_exact(&self) -> bool {
        true
    }
    fn singular_points(&self) -> Vec<Vec2> {
        vec![Vec2::ZERO]
    }
    fn radial_breakpoints(&self, center: Vec2) -> Vec<f64> {
        if center == Vec2::ZERO {
            vec![1.0]
        } else {
            Vec::new()
        }
    }
}

/// Circular cavity opened after stretching the right half of the square:
/// `y = u ∘ f` with [`EuclideanCavity`] and [`ReferenceStretch`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChangeOfReference {
    pub b: f64,
}

impl ChangeOfReference {
    pub fn new(b: f64) -> Result<Self> {
        check_b(b)?;
        Ok(Self { b })
    }

    /// The right half of a trace on `S(0, r)` has length
    /// `2 ∫_0^{π/2} |v_r'(t)| dt` with `v_r(t) = ((1-b)r + b/√(3cos²t + 1))(2cos t, sin t)`,
    /// the left half is a half circle of radius `(1-b)r + b`. Returns both parts.
    pub fn split_perimeter(&self, r: f64) -> (f64, f64) {
        let b = self.b;
        let speed = |t: f64| {
            let (s, c) = t.sin_cos();
            let q = (3.0 * c * c + 1.0).sqrt();
            let m = (1.0 - b) * r + b / q;
            // dm/dt = b · 3 cos t sin t / q³
            let dm = 3.0 * b * c * s / (q * q * q);
            let v = Vec2::new(2.0 * c, s);
            let dv = Vec2::new(-2.0 * s, c);
            (v * dm + dv * m).norm()
        };
        let quarter =
            crate::quadrature::integrate(speed, &[0.0, 0.5 * PI], crate::quadrature::Tolerance::new(1e-14, 1e-13))
                .value;
        (PI * ((1.0 - b) * r + b), 2.0 * quarter)
    }
}

impl Deformation for ChangeOfReference {
    fn name(&self) -> String {
        format!("change-of-reference(b={})", self.b)
    }
    fn domain(&self) -> Domain {
        Domain::new(QBall::unit(QNorm::Inf))
    }
    fn eval(&self, x: Vec2) -> Vec2 {
        let u = EuclideanCavity { b: self.b };
        u.eval(ReferenceStretch.eval(x))
    }
    fn grad(&self, x: Vec2) -> Mat2 {
        let u = EuclideanCavity { b: self.b };
        u.grad(ReferenceStretch.eval(x)) * ReferenceStretch.grad(x)
    }
    fn grad_is_exact(&self) -> bool {
        true
    }
    fn singular_points(&self) -> Vec<Vec2> {
        vec![Vec2::ZERO]
    }
    fn angular_breakpoints(&self, center: Vec2) -> Vec<f64> {
        ReferenceStretch.angular_breakpoints(center)
    }
    fn analytic_cavity(&self, a: Vec2) -> Option<CavityLimit> {
        (a == Vec2::ZERO).then(|| {
            let b = self.b;
            CavityLimit {
                volume: PI * b * b,
                perimeter: 2.0 * PI * b,
                trace_perimeter_limit: 2.0 * PI * b,
            }
        })
    }
    fn sobolev_range(&self) -> Option<(f64, f64)> {
        Some((1.0, 2.0))
    }
}

/// Square cavity pushed onto a diamond: `y = g ∘ u` with
/// `u(x) = ½(|x|_∞ + 1) x/|x|_∞` and the piecewise map `g`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Superposition;

impl Superposition {
    fn g(z: Vec2) -> (Vec2, Mat2) {
        let (z1, z2) = (z.x, z.y);
        if z1.abs() > z2.abs() && z2.abs() < 0.5 {
            let v = Vec2::new(sgn(z1) * (1.0 - 2.0 * z2.abs()) + 2.0 * z1 * z2.abs(), z2);
            let d = Mat2::new(2.0 * z2.abs(), 2.0 * sgn(z2) * (z1 - sgn(z1)), 0.0, 1.0);
            (v, d)
        } else if z2.abs() > z1.abs() && z1.abs() < 0.5 {
            let v = Vec2::new(z1, sgn(z2) * (1.0 - 2.0 * z1.abs()) + 2.0 * z1.abs() * z2);
            let d = Mat2::new(1.0, 0.0, 2.0 * sgn(z1) * (z2 - sgn(z2)), 2.0 * z1.abs());
            (v, d)
        } else {
            (z, Mat2::IDENTITY)
        }
    }

    pub fn u(x: Vec2) -> (Vec2, Mat2) {
        radial_q(x, QNorm::Inf, 0.5, 0.5)
    }
}

impl Deformation for Superposition {
    fn name(&self) -> String {
        "superposition".into()
    }
    fn domain(&self) -> Domain {
        Domain::new(QBall::unit(QNorm::Inf))
    }
    fn eval(&self, x: Vec2) -> Vec2 {
        Self::g(Self::u(x).0).0
    }
    fn grad(&self, x: Vec2) -> Mat2 {
        let (z, du) = Self::u(x);
        Self::g(z).1 * du
    }
    fn grad_is_exact(&self) -> bool {
        true
    }
    fn singular_points(&self) -> Vec<Vec2> {
        vec![Vec2::ZERO]
    }
    fn angular_breakpoints(&self, center: Vec2) -> Vec<f64> {
        if center == Vec2::ZERO {
            octant_angles()
        } else {
            Vec::new()
        }
    }
    fn analytic_cavity(&self, a: Vec2) -> Option<CavityLimit> {
        (a == Vec2::ZERO).then_some(CavityLimit {
            volume: 2.0,
            perimeter: 4.0 * SQRT_2,
            trace_perimeter_limit: 4.0 * SQRT_2,
        })
    }
    fn sobolev_range(&self) -> Option<(f64, f64)> {
        Some((1.0, 2.0))
    }
}

/// Disk cavity with a spike: `y = g ∘ u` with `u(x) = ½(|x| + 1) x/|x|` and
/// `g` collapsing the segment from `(0, ½)` to `(0, 1)` onto `(0, 1)`.
///
/// The coefficient `c(s)` of `g` on the region `V` is fixed by requiring
/// `g = id` on the two slanted segments bounding `V`; its radicand is
/// `4(5 - 2√3)s² - 1`, which is nonnegative on the whole annulus.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Spike;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

impl Spike {
    /// Slope `√3 - 1` of the segments bounding `V`.
    pub const SLOPE: f64 = SQRT_3 - 1.0;

    pub fn in_v(z: Vec2) -> bool {
        let s = z.norm();
        s > 0.5 && s < 1.0 && z.y > Self::SLOPE * z.x.abs() + 0.5
    }

    /// `c(s)` and `c'(s)` for `s ∈ (½, 1]`.
    pub fn coefficient(s: f64) -> (f64, f64) {
        let k = 5.0 - 2.0 * SQRT_3;
        let d = (4.0 * k * s * s - 1.0).max(0.0).sqrt();
        let den = 1.0 - SQRT_3 + d;
        let c = (-9.0 + 4.0 * SQRT_3 + Self::SLOPE * d) / den;
        let dd = 4.0 * k * s / d;
        let dc = k * dd / (den * den);
        (c, dc)
    }

    fn g(z: Vec2) -> (Vec2, Mat2) {
        if !Self::in_v(z) {
            return (z, Mat2::IDENTITY);
        }
        let s = z.norm();
        let (c, dc) = Self::coefficient(s);
        let a = z.x.abs();
        let v = Vec2::new(z.x, c * a + 1.0);
        let d = Mat2::new(1.0, 0.0, dc * z.x * a / s + c * sgn(z.x), dc * z.y * a / s);
        (v, d)
    }

    pub fn u(x: Vec2) -> (Vec2, Mat2) {
        radial_q(x, QNorm::Two, 0.5, 0.5)
    }
}

impl Deformation for Spike {
    fn name(&self) -> String {
        "spike".into()
    }
    fn domain(&self) -> Domain {
        Domain::new(QBall::unit(QNorm::Two))
    }
    fn eval(&self, x: Vec2) -> Vec2 {
        Self::g(Self::u(x).0).0
    }
    fn grad(&self, x: Vec2) -> Mat2 {
        let (z, du) = Self::u(x);
        Self::g(z).1 * du
    }
    fn grad_is_exact(&self) -> bool {
        true
    }
    fn singular_points(&self) -> Vec<Vec2> {
        vec![Vec2::ZERO]
    }
    fn angular_breakpoints(&self, center: Vec2) -> Vec<f64> {
        if center == Vec2::ZERO {
            vec![0.5 * PI]
        } else {
            Vec::new()
        }
    }
    fn trace_breakpoints(&self, center: Vec2, radius: f64) -> Vec<f64> {
        let mut t = self.angular_breakpoints(center);
        if center == Vec2::ZERO {
            // S(0, r) is mapped by u onto the circle of radius s = (r + 1)/2,
            // which meets V for |θ - π/2| < acos(1/(2s√(1 + m²))) - atan m.
            let s = 0.5 * (radius + 1.0);
            let m = Self::SLOPE;
            let half = (1.0 / (2.0 * s * (1.0 + m * m).sqrt())).acos() - m.atan();
            if half > 0.0 {
                t.extend([0.5 * PI - half, 0.5 * PI + half]);
            }
        }
        t
    }
    fn analytic_cavity(&self, a: Vec2) -> Option<CavityLimit> {
        (a == Vec2::ZERO).then_some(CavityLimit {
            volume: PI / 4.0,
            perimeter: PI,
            trace_perimeter_limit: PI + 1.0,
        })
    }
    fn sobolev_range(&self) -> Option<(f64, f64)> {
        Some((1.0, 2.0))
    }
}

/// Piecewise-linear radial profile `ρ` on nodes `r_0 < … < r_K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProfile {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
}

impl RadialProfile {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != values.len() {
            return Err(Error::InvalidArgument(format!(
                "radial profile needs matching node/value lists of length >= 2 (got {} and {})",
                nodes.len(),
                values.len()
            )));
        }
        if nodes[0] < 0.0 || nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(
                "profile nodes must be nonnegative and strictly increasing".into(),
            ));
        }
        if values[0] < 0.0 || values.windows(2).any(|w| !(w[1] > w[0])) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "profile values must be nonnegative and strictly increasing".into(),
            ));
        }
        Ok(Self { nodes, values })
    }

    /// `ρ(R) = R` on the given nodes.
    pub fn identity(nodes: Vec<f64>) -> Result<Self> {
        let values = nodes.clone();
        Self::new(nodes, values)
    }

    /// Affine interpolation between `rho_inner` at the first node and
    /// `rho_outer` at the last.
    pub fn affine(nodes: Vec<f64>, rho_inner: f64, rho_outer: f64) -> Result<Self> {
        let (r0, rk) = (nodes[0], *nodes.last().unwrap());
        let values = nodes
            .iter()
            .map(|r| rho_inner + (rho_outer - rho_inner) * (r - r0) / (rk - r0))
            .collect();
        Self::new(nodes, values)
    }

    pub fn inner_radius(&self) -> f64 {
        self.nodes[0]
    }

    pub fn outer_radius(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    /// `ρ` at the inner node (the cavity radius).
    pub fn cavity_radius(&self) -> f64 {
        self.values[0]
    }

    pub fn boundary_value(&self) -> f64 {
        *self.values.last().unwrap()
    }

    fn segment(&self, r: f64) -> usize {
        let k = self.nodes.len() - 1;
        match self.nodes.partition_point(|n| *n <= r) {
            0 => 0,
            i if i > k => k - 1,
            i => (i - 1).min(k - 1),
        }
    }

    /// `(ρ(r), ρ'(r))`. Below the first node the first segment is extended;
    /// beyond the last node the map continues homogeneously.
    pub fn eval(&self, r: f64) -> (f64, f64) {
        let rk = self.outer_radius();
        if r > rk {
            let s = self.boundary_value() / rk;
            return (s * r, s);
        }
        let i = self.segment(r);
        let (r0, r1) = (self.nodes[i], self.nodes[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        let slope = (v1 - v0) / (r1 - r0);
        (v0 + slope * (r - r0), slope)
    }
}

/// `y(x) = c + ρ(|x - c|) (x - c)/|x - c|` for a radial profile `ρ`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialDeformation {
    pub profile: RadialProfile,
    pub center: Vec2,
    pub domain: QBall,
}

impl RadialDeformation {
    /// Defined on the disk spanned by the profile.
    pub fn new(profile: RadialProfile, center: Vec2) -> Self {
        let domain = QBall::new(center, profile.outer_radius(), QNorm::Two);
        Self {
            profile,
            center,
            domain,
        }
    }

    /// Defined on a larger domain; beyond the last node the map is
    /// `c + (ρ_K/r_K)(x - c)`.
    pub fn with_domain(mut self, domain: QBall) -> Self {
        self.domain = domain;
        self
    }
}

impl Deformation for RadialDeformation {
    fn name(&self) -> String {
        "radial-profile".into()
    }
    fn domain(&self) -> Domain {
        Domain::new(self.domain)
    }
    fn eval(&self, x: Vec2) -> Vec2 {
        let d = x - self.center;
        let r = d.norm();
        let (rho, _) = self.profile.eval(r);
        self.center + d * (rho / r)
    }
    fn grad(&self, x: Vec2) -> Mat2 {
        let d = x - self.center;
        let r = d.norm();
        let e = d * (1.0 / r);
        let (rho, drho) = self.profile.eval(r);
        let ee = Mat2::outer(e, e);
        (Mat2::IDENTITY - ee).scale(rho / r) + ee.scale(drho)
    }
    fn grad_is_exact(&self) -> bool {
        true
    }
    fn singular_points(&self) -> Vec<Vec2> {
        vec![self.center]
    }
    fn radial_breakpoints(&self, center: Vec2) -> Vec<f64> {
        if center == self.center {
            self.profile.nodes.clone()
        } else {
            Vec::new()
        }
    }
    fn analytic_cavity(&self, a: Vec2) -> Option<CavityLimit> {
        (a == self.center).then(|| {
            let (rho0, _) = self.profile.eval(0.0);
            let rho0 = rho0.max(0.0);
            CavityLimit {
                volume: PI * rho0 * rho0,
                perimeter: 2.0 * PI * rho0,
                trace_perimeter_limit: 2.0 * PI * rho0,
            }
        })
    }
}

/// `outer ∘ inner`, with the gradient by the chain rule.
#[derive(Clone, Debug)]
pub struct Compose {
    pub outer: Arc<dyn Deformation>,
    pub inner: Arc<dyn Deformation>,
}

pub fn compose(outer: Arc<dyn Deformation>, inner: Arc<dyn Deformation>) -> Compose {
    Compose { outer, inner }
}

impl Deformation for Compose {
    fn name(&self) -> String {
        format!("{}∘{}", self.outer.name(), self.inner.name())
    }
    fn domain(&self) -> Domain {
        self.inner.domain()
    }
    fn eval(&self, x: Vec2) -> Vec2 {
        self.outer.eval(self.inner.eval(x))
    }
    fn grad(&self, x: Vec2) -> Mat2 {
        self.outer.grad(self.inner.eval(x)) * self.inner.grad(x)
    }
    fn grad_is_exact(&self) -> bool {
        self.outer.grad_is_exact() && self.inner.grad_is_exact()
    }
    fn singular_points(&self) -> Vec<Vec2> {
        let mut s = self.inner.singular_points();
        // Singular points of the outer map that the inner map fixes.
        for p in self.outer.singular_points() {
            if self.inner.domain().outer.contains(p) && self.inner.eval(p) == p && !s.contains(&p) {
                s.push(p);
            }
        }
        s
    }
    fn radial_breakpoints(&self, center: Vec2) -> Vec<f64> {
        let mut v = self.inner.radial_breakpoints(center);
        v.extend(self.outer.radial_breakpoints(center));
        v
    }
    fn angular_breakpoints(&self, center: Vec2) -> Vec<f64> {
        let mut v = self.inner.angular_breakpoints(center);
        v.extend(self.outer.angular_breakpoints(center));
        v
    }
    fn trace_breakpoints(&self, center: Vec2, radius: f64) -> Vec<f64> {
        // Exact when the inner map sends circles about `center` to circles
        // about `center`, as radial pushes do.
        let image_radius = self
            .inner
            .eval(center + Vec2::new(radius, 0.0))
            .dist(self.inner.eval(center));
        let mut v = self.inner.trace_breakpoints(center, radius);
        v.extend(self.outer.trace_breakpoints(center, image_radius));
        v
    }
    fn try_eval(&self, x: Vec2) -> Result<Vec2> {
        let z = self.inner.try_eval(x)?;
        self.outer.try_eval(z)
    }
}

/// Keys accepted by [`catalog`].
pub const CATALOG_KEYS: [&str; 4] = ["radial", "change-of-reference", "superposition", "spike"];

/// Analytic deformation by key. `b` is used by the keys that take a cavity
/// parameter and defaults to ½.
pub fn catalog(key: &str, b: Option<f64>) -> Result<Arc<dyn Deformation>> {
    let b = b.unwrap_or(0.5);
    Ok(match key {
        "radial" => Arc::new(RadialExample::new(b)?),
        "change-of-reference" => Arc::new(ChangeOfReference::new(b)?),
        "superposition" => Arc::new(Superposition),
        "spike" => Arc::new(Spike),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown example '{other}' (expected one of {})",
                CATALOG_KEYS.join(", ")
            )))
        }
    })
}
