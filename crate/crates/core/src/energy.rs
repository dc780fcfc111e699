//! Stored-energy densities, the regularized and limit energies, the extended
//! distributional determinant and sampled admissibility checks.

use std::collections::BTreeSet;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{
    self, cavity_metrics, extrapolate_limit, trace_on_circle, CavityMetrics, Extrapolation, ImageMembership,
};
use crate::deformation::{CavityLimit, Deformation};
use crate::error::{Error, Result};
use crate::geometry::{validate_flaw_config, Domain, FlawConfig, Mat2, QBall, QNorm, Vec2};
use crate::quadrature::{integrate, integrate_perforated, Breaks, Tolerance};

/// Stored-energy density `W(F) = |F|^p + h(det F)`, `+∞` when `det F ≤ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Density {
    /// `h(d) = (d - 1)² + 1/d`, `p ≥ 2`.
    Default { p: f64 },
    /// `h(d) = d^q + 1/d`, `p, q > 1`. With `p, q < 2` point cavities have
    /// finite energy.
    Power { p: f64, q: f64 },
}

/// Additive constant `c₀` in the stress-control bound.
pub const STRESS_C0: f64 = 1.0;

impl Density {
    pub fn default_density(p: f64) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::InvalidArgument(format!("default density needs p >= 2, got {p}")));
        }
        Ok(Density::Default { p })
    }

    pub fn power(p: f64, q: f64) -> Result<Self> {
        if !(p > 1.0 && q > 1.0) || !p.is_finite() || !q.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "power density needs p, q > 1, got p = {p}, q = {q}"
            )));
        }
        Ok(Density::Power { p, q })
    }

    /// Density by CLI name; `q` is ignored by the default density.
    pub fn by_name(name: &str, p: f64, q: f64) -> Result<Self> {
        match name {
            "default" => Self::default_density(p),
            "power" => Self::power(p, q),
            other => Err(Error::InvalidArgument(format!(
                "unknown density '{other}' (expected default or power)"
            ))),
        }
    }

    pub fn p(&self) -> f64 {
        match *self {
            Density::Default { p } | Density::Power { p, .. } => p,
        }
    }

    /// Coercivity constant `c` in `W(F) ≥ c|F|^p + g(det F)`.
    pub fn c(&self) -> f64 {
        1.0
    }

    /// Coercivity minorant `g(ϑ)`; here `W(F) = |F|^p + g(det F)` exactly.
    pub fn g(&self, d: f64) -> f64 {
        if d <= 0.0 {
            return f64::INFINITY;
        }
        match *self {
            Density::Default { .. } => (d - 1.0) * (d - 1.0) + 1.0 / d,
            Density::Power { q, .. } => d.powf(q) + 1.0 / d,
        }
    }

    fn dg(&self, d: f64) -> f64 {
        match *self {
            Density::Default { .. } => 2.0 * (d - 1.0) - 1.0 / (d * d),
            Density::Power { q, .. } => q * d.powf(q - 1.0) - 1.0 / (d * d),
        }
    }

    pub fn w(&self, f: &Mat2) -> f64 {
        let d = f.det();
        if !(d > 0.0) {
            return f64::INFINITY;
        }
        f.ddot(f).powf(0.5 * self.p()) + self.g(d)
    }

    /// `DW(F) = p|F|^{p-2} F + g'(det F) cof F`.
    pub fn dw(&self, f: &Mat2) -> Mat2 {
        let d = f.det();
        let p = self.p();
        let n2 = f.ddot(f);
        let s = if n2 > 0.0 { p * n2.powf(0.5 * p - 1.0) } else { 0.0 };
        f.scale(s) + f.cof().scale(self.dg(d))
    }

    /// `|Fᵀ DW(F)| / (W(F) + c₀)`.
    pub fn stress_ratio(&self, f: &Mat2) -> f64 {
        (f.transpose() * self.dw(f)).frobenius() / (self.w(f) + STRESS_C0)
    }

    /// Largest stress ratio over the samples: a sampled estimate of the
    /// stress-control constant `c₁`.
    pub fn stress_control_constant(&self, samples: &[Mat2]) -> f64 {
        samples
            .iter()
            .filter(|f| f.det() > 0.0)
            .map(|f| self.stress_ratio(f))
            .fold(0.0, f64::max)
    }

    /// `W(diag(a, b))` for a radial map with `a = ρ'` and `b = ρ/R`.
    pub fn w_radial(&self, a: f64, b: f64) -> f64 {
        let d = a * b;
        if !(d > 0.0) {
            return f64::INFINITY;
        }
        (a * a + b * b).powf(0.5 * self.p()) + self.g(d)
    }

    /// Partial derivatives of [`Density::w_radial`].
    pub fn dw_radial(&self, a: f64, b: f64) -> (f64, f64) {
        let p = self.p();
        let s = p * (a * a + b * b).powf(0.5 * p - 1.0);
        let h = self.dg(a * b);
        (s * a + h * b, s * b + h * a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lambdas {
    pub volume: f64,
    pub perimeter: f64,
}

impl Lambdas {
    pub fn new(volume: f64, perimeter: f64) -> Result<Self> {
        if !(volume >= 0.0 && perimeter >= 0.0) || !volume.is_finite() || !perimeter.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda weights must be finite and nonnegative, got ({volume}, {perimeter})"
            )));
        }
        Ok(Self { volume, perimeter })
    }

    pub const ZERO: Lambdas = Lambdas {
        volume: 0.0,
        perimeter: 0.0,
    };
    pub const ONE: Lambdas = Lambdas {
        volume: 1.0,
        perimeter: 1.0,
    };
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub elastic: f64,
    /// Sum of cavity volumes before weighting.
    pub volume: f64,
    /// Sum of cavity perimeters before weighting.
    pub perimeter: f64,
    pub volume_term: f64,
    pub perimeter_term: f64,
    pub total: f64,
    pub lambdas: Lambdas,
}

impl EnergyBreakdown {
    pub fn new(elastic: f64, volume: f64, perimeter: f64, lambdas: Lambdas) -> Self {
        let volume_term = lambdas.volume * volume;
        let perimeter_term = lambdas.perimeter * perimeter;
        Self {
            elastic,
            volume,
            perimeter,
            volume_term,
            perimeter_term,
            total: elastic + volume_term + perimeter_term,
            lambdas,
        }
    }
}

/// Quadrature tolerance for elastic energies.
pub const ENERGY_TOL: Tolerance = Tolerance::new(1e-12, 1e-9);

fn breaks_of<'a>(y: &'a dyn Deformation, extra_radial: &'a [f64]) -> impl Fn(Vec2) -> Breaks + Sync + 'a {
    move |pole: Vec2| {
        let mut radial = y.radial_breakpoints(pole);
        radial.extend_from_slice(extra_radial);
        Breaks {
            radial,
            angular: y.angular_breakpoints(pole),
        }
    }
}

fn check_holes_inside(outer: &QBall, holes: &[Vec2], eps: f64) -> Result<()> {
    for a in holes {
        if outer.distance_to_boundary(*a) <= eps {
            return Err(Error::InvalidArgument(format!(
                "flaw disk B({a}, {eps}) is not inside the domain"
            )));
        }
    }
    Ok(())
}

/// `∫_{Ω_ε^A} W(Dy)`; over all of `Ω` when the domain carries no flaws.
pub fn elastic_energy(y: &dyn Deformation, dom: &Domain, density: &Density) -> Result<f64> {
    let holes = dom.flaw_points();
    let eps = dom.core_radius();
    if holes.is_empty() {
        if let Some(s) = y
            .singular_points()
            .into_iter()
            .find(|s| dom.outer.contains_closed(*s, 0.0))
        {
            return Err(Error::SingularPoint {
                map: y.name(),
                point: s,
            });
        }
    }
    check_holes_inside(&dom.outer, holes, eps)?;
    let f = |x: Vec2| density.w(&y.grad(x));
    let b = breaks_of(y, &[]);
    let est = integrate_perforated(&f, &dom.outer, holes, eps, &b, ENERGY_TOL);
    if !est.value.is_finite() {
        return Ok(f64::INFINITY);
    }
    if !est.converged {
        log::warn!(
            "elastic energy of {} not converged (error estimate {:e})",
            y.name(),
            est.error
        );
    }
    Ok(est.value)
}

/// `∫_Ω W(Dy)` for a map whose singular points are the flaw points `points`.
pub fn elastic_energy_full(y: &dyn Deformation, outer: &QBall, points: &[Vec2], density: &Density) -> Result<f64> {
    check_holes_inside(outer, points, 0.0)?;
    let f = |x: Vec2| {
        if points.contains(&x) {
            0.0
        } else {
            density.w(&y.grad(x))
        }
    };
    let b = breaks_of(y, &[]);
    let est = integrate_perforated(&f, outer, points, 0.0, &b, ENERGY_TOL);
    if !est.value.is_finite() {
        return Ok(f64::INFINITY);
    }
    if !est.converged {
        log::warn!(
            "elastic energy of {} over the full domain not converged (error estimate {:e})",
            y.name(),
            est.error
        );
    }
    Ok(est.value)
}

/// Regularized energy with per-flaw cavity metrics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularizedEnergy {
    pub breakdown: EnergyBreakdown,
    pub cavities: Vec<CavityMetrics>,
}

/// `𝓔_ε(A, y) = ∫_{Ω_ε^A} W(Dy) + λ_v Σ vol + λ_p Σ per` over the traces on
/// the spheres `S(a, ε)`.
pub fn regularized_energy(
    y: &dyn Deformation,
    cfg: &FlawConfig,
    dom: &Domain,
    density: &Density,
    lambdas: Lambdas,
) -> Result<RegularizedEnergy> {
    validate_flaw_config(cfg, dom).into_result()?;
    let perforated = dom.with_flaws(cfg.clone());
    let elastic = elastic_energy(y, &perforated, density)?;
    let cavities = cfg
        .points
        .par_iter()
        .map(|a| cavity_metrics(y, *a, cfg.eps))
        .collect::<Result<Vec<_>>>()?;
    let volume = cavities.iter().map(|c| c.volume).sum();
    let perimeter = cavities.iter().map(|c| c.perimeter).sum();
    Ok(RegularizedEnergy {
        breakdown: EnergyBreakdown::new(elastic, volume, perimeter, lambdas),
        cavities,
    })
}

/// Thresholds used when extrapolating cavity metrics to `r → 0⁺`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitTolerances {
    /// Extrapolated volume below which a flaw point opens no cavity.
    pub no_cavity_volume: f64,
    /// Allowed gap between the extrapolated trace perimeter and the
    /// perimeter of the limit cavity before perimeter convergence is
    /// reported as violated.
    pub conv_perimeter: f64,
    /// Extrapolation uncertainty, relative to `max(1, |limit|)`, above which
    /// a limit is flagged.
    pub extrapolation: f64,
}

impl Default for LimitTolerances {
    fn default() -> Self {
        Self {
            no_cavity_volume: 1e-6,
            conv_perimeter: 1e-2,
            extrapolation: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitCavity {
    pub point: Vec2,
    pub radii: Vec<f64>,
    pub volumes: Vec<f64>,
    pub perimeters: Vec<f64>,
    pub volume: Extrapolation,
    pub perimeter: Extrapolation,
    /// Closed-form cavity when the deformation knows it.
    pub analytic: Option<CavityLimit>,
    pub opens_cavity: bool,
    pub conv_perimeter_violated: bool,
    pub uncertain: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitEnergy {
    pub breakdown: EnergyBreakdown,
    pub cavities: Vec<LimitCavity>,
}

impl LimitEnergy {
    pub fn conv_perimeter_violated(&self) -> bool {
        self.cavities.iter().any(|c| c.conv_perimeter_violated)
    }

    pub fn flagged(&self) -> bool {
        self.cavities.iter().any(|c| c.conv_perimeter_violated || c.uncertain)
    }
}

/// Trace metrics of `y` on `S(a, r)` for each radius, extrapolated to
/// `r → 0⁺`.
pub fn limit_cavity(y: &dyn Deformation, a: Vec2, r_grid: &[f64], tols: &LimitTolerances) -> Result<LimitCavity> {
    let metrics = r_grid
        .par_iter()
        .map(|r| cavity_metrics(y, a, *r))
        .collect::<Result<Vec<_>>>()?;
    let volumes: Vec<f64> = metrics.iter().map(|m| m.volume).collect();
    let perimeters: Vec<f64> = metrics.iter().map(|m| m.perimeter).collect();
    let volume = extrapolate_limit(r_grid, &volumes)?;
    let perimeter = extrapolate_limit(r_grid, &perimeters)?;
    let analytic = y.analytic_cavity(a);
    let opens_cavity = volume.limit >= tols.no_cavity_volume;
    let conv_perimeter_violated = analytic.is_some_and(|c| (perimeter.limit - c.perimeter).abs() > tols.conv_perimeter);
    let uncertain = volume.uncertainty > tols.extrapolation * volume.limit.abs().max(1.0)
        || perimeter.uncertainty > tols.extrapolation * perimeter.limit.abs().max(1.0);
    Ok(LimitCavity {
        point: a,
        radii: r_grid.to_vec(),
        volumes,
        perimeters,
        volume,
        perimeter,
        analytic,
        opens_cavity,
        conv_perimeter_violated,
        uncertain,
    })
}

/// `𝓔(A, y) = ∫_Ω W(Dy) + λ_v Σ 𝒱 + λ_p Σ 𝒫`, with cavity volume and
/// perimeter extrapolated from traces on the circles of `r_grid`.
pub fn limit_energy(
    y: &dyn Deformation,
    points: &[Vec2],
    dom: &Domain,
    density: &Density,
    lambdas: Lambdas,
    r_grid: &[f64],
) -> Result<LimitEnergy> {
    limit_energy_with(y, points, dom, density, lambdas, r_grid, &LimitTolerances::default())
}

/// [`limit_energy`] with explicit thresholds.
pub fn limit_energy_with(
    y: &dyn Deformation,
    points: &[Vec2],
    dom: &Domain,
    density: &Density,
    lambdas: Lambdas,
    r_grid: &[f64],
    tols: &LimitTolerances,
) -> Result<LimitEnergy> {
    let elastic = elastic_energy_full(y, &dom.outer, points, density)?;
    let cavities = points
        .iter()
        .map(|a| limit_cavity(y, *a, r_grid, tols))
        .collect::<Result<Vec<_>>>()?;
    let (mut volume, mut perimeter) = (0.0, 0.0);
    for c in &cavities {
        if c.opens_cavity {
            volume += c.volume.limit;
            perimeter += c.perimeter.limit;
        }
    }
    Ok(LimitEnergy {
        breakdown: EnergyBreakdown::new(elastic, volume, perimeter, lambdas),
        cavities,
    })
}

/// Smooth test function with compact support.
pub trait TestFunction: Sync {
    fn value(&self, x: Vec2) -> f64;
    fn grad(&self, x: Vec2) -> Vec2;
    /// Closed disk containing the support.
    fn support(&self) -> QBall;
}

/// `φ(x) = (1 - |x - c|²/ρ²)^k` on `B(c, ρ)`, zero outside.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialBump {
    pub center: Vec2,
    pub radius: f64,
    pub power: u32,
}

impl PolynomialBump {
    pub fn new(center: Vec2, radius: f64, power: u32) -> Result<Self> {
        if !(radius > 0.0) || power < 2 {
            return Err(Error::InvalidArgument(format!(
                "bump needs positive radius and power >= 2, got ({radius}, {power})"
            )));
        }
        Ok(Self { center, radius, power })
    }
}

impl TestFunction for PolynomialBump {
    fn value(&self, x: Vec2) -> f64 {
        let s = (x - self.center).norm_sq() / (self.radius * self.radius);
        if s >= 1.0 {
            0.0
        } else {
            (1.0 - s).powi(self.power as i32)
        }
    }
    fn grad(&self, x: Vec2) -> Vec2 {
        let d = x - self.center;
        let r2 = self.radius * self.radius;
        let s = d.norm_sq() / r2;
        if s >= 1.0 {
            Vec2::ZERO
        } else {
            let k = self.power as f64;
            d * (-2.0 * k * (1.0 - s).powi(self.power as i32 - 1) / r2)
        }
    }
    fn support(&self) -> QBall {
        QBall::new(self.center, self.radius, QNorm::Two)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetPairing {
    /// `⟨Det_ε^A Dy, φ⟩`.
    pub pairing: f64,
    /// `∫_{Ω_ε^A} det Dy φ`.
    pub det_integral: f64,
    /// Relative discrepancy of the two.
    pub residual: f64,
}

/// Extended distributional determinant tested against `φ`:
/// `-½∫_{Ω_ε^A} ((adj Dy) y)·Dφ - ½ Σ_a ∫_0^{2π} (w₁w₂' - w₂w₁') φ dt`,
/// with `w` the trace on `S(a, ε)`, compared with `∫_{Ω_ε^A} det Dy φ`.
pub fn extended_det_pairing(
    y: &dyn Deformation,
    cfg: &FlawConfig,
    dom: &Domain,
    phi: &dyn TestFunction,
) -> Result<DetPairing> {
    let support = phi.support();
    if dom.outer.distance_to_boundary(support.center) < support.radius {
        return Err(Error::InvalidArgument(
            "test function support must lie inside the domain".into(),
        ));
    }
    let eps = cfg.eps;
    let holes: Vec<Vec2> = cfg
        .points
        .iter()
        .copied()
        .filter(|a| a.dist(support.center) < support.radius + eps)
        .collect();
    let b = breaks_of(y, std::slice::from_ref(&support.radius));
    let breaks = |pole: Vec2| {
        let mut br = b(pole);
        br.radial.push((support.center - pole).norm() + support.radius);
        br
    };
    let tol = Tolerance::new(1e-13, 1e-10);
    let pairing_density = |x: Vec2| {
        if holes.iter().any(|a| x.dist(*a) <= eps) {
            return 0.0;
        }
        (y.grad(x).adj() * y.eval(x)).dot(phi.grad(x))
    };
    let det_density = |x: Vec2| {
        if holes.iter().any(|a| x.dist(*a) <= eps) {
            return 0.0;
        }
        y.grad(x).det() * phi.value(x)
    };
    let bulk = integrate_perforated(&pairing_density, &support, &holes, eps, &breaks, tol).value;
    let det_integral = integrate_perforated(&det_density, &support, &holes, eps, &breaks, tol).value;

    let mut boundary = 0.0;
    for a in &holes {
        let mut angles: Vec<f64> = y.angular_breakpoints(*a);
        angles.extend([0.0, 2.0 * PI]);
        let pts = crate::quadrature::breakpoints(0.0, 2.0 * PI, angles);
        let integrand = |t: f64| {
            let e = Vec2::polar(t);
            let x = *a + e * eps;
            let w = y.eval(x);
            let dw = y.grad(x) * (e.perp() * eps);
            w.cross(dw) * phi.value(x)
        };
        boundary += integrate(integrand, &pts, Tolerance::new(1e-14, 1e-12)).value;
    }
    let pairing = -0.5 * bulk - 0.5 * boundary;
    let residual = (pairing - det_integral).abs() / det_integral.abs().max(1e-300);
    Ok(DetPairing {
        pairing,
        det_integral,
        residual,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRow {
    pub check: String,
    pub passed: bool,
    pub samples: usize,
    pub failures: usize,
    pub detail: String,
}

impl CheckRow {
    fn new(check: &str, samples: usize, failures: usize, detail: String) -> Self {
        Self {
            check: check.into(),
            passed: failures == 0,
            samples,
            failures,
            detail,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub rows: Vec<CheckRow>,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn row(&self, check: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.check == check)
    }
}

/// Trace samples used by the sampled admissibility checks.
const CHECK_SAMPLES: usize = 512;

/// Residual bound for the extended-determinant identity.
pub const DET_IDENTITY_TOL: f64 = 1e-4;

/// Sampled surrogate of the admissibility class on the perforated domain.
///
/// Rows: orientation (det Dy > 0 on a grid), degree range ⊆ {0, 1} on test
/// circles, membership of sampled images in the topological images of the
/// test circles (inside for reference points inside the circle, outside
/// otherwise), no reference point mapped into a cavity, trace
/// near-injectivity on each `S(a, ε)`, and the extended-determinant identity
/// for three polynomial bumps. Test circles are the circles `S(a, r)` for
/// `r` in `radii` plus four seeded random circles away from the flaws.
pub fn check_admissibility_sampled(
    y: &dyn Deformation,
    cfg: &FlawConfig,
    dom: &Domain,
    radii: &[f64],
    grid: usize,
    seed: u64,
) -> Result<AdmissibilityReport> {
    let mut rows = Vec::new();
    let perforated = dom.with_flaws(cfg.clone());
    let outer = dom.outer;
    let eps = cfg.eps;

    // Offset lattice over the bounding square of the domain; irrational
    // offsets keep samples off axes and diagonals.
    let lattice: Vec<Vec2> = (0..grid)
        .flat_map(|i| (0..grid).map(move |j| (i, j)))
        .map(|(i, j)| {
            let s = (i as f64 + 0.5 + 0.1234567) / grid as f64;
            let t = (j as f64 + 0.5 + 0.0765432) / grid as f64;
            outer.center + Vec2::new((2.0 * s - 1.0) * outer.radius, (2.0 * t - 1.0) * outer.radius)
        })
        .filter(|x| perforated.contains(*x) && y.singular_points().iter().all(|s| x.dist(*s) > 1e-9))
        .collect();

    // (i) orientation
    let bad = lattice.iter().filter(|x| !(y.grad(**x).det() > 0.0)).count();
    rows.push(CheckRow::new(
        "orientation",
        lattice.len(),
        bad,
        format!("{bad} of {} grid points with det Dy <= 0", lattice.len()),
    ));

    // Test circles.
    let mut circles: Vec<(Vec2, f64)> = Vec::new();
    for a in &cfg.points {
        for r in radii {
            if *r >= eps && outer.distance_to_boundary(*a) > *r {
                circles.push((*a, *r));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    let mut random_circles = 0;
    while random_circles < 4 && attempts < 10_000 {
        attempts += 1;
        let c = outer.center + Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * outer.radius;
        if !outer.contains(c) {
            continue;
        }
        let room = cfg
            .points
            .iter()
            .map(|a| c.dist(*a) - eps)
            .fold(outer.distance_to_boundary(c), f64::min);
        let singular_room = y
            .singular_points()
            .iter()
            .map(|s| c.dist(*s))
            .fold(f64::INFINITY, f64::min);
        let room = room.min(singular_room);
        if room < 0.05 * outer.radius {
            continue;
        }
        let r = rng.gen_range(0.3..0.9) * room;
        circles.push((c, r));
        random_circles += 1;
    }

    let traces = circles
        .par_iter()
        .map(|(c, r)| trace_on_circle(y, *c, *r, CHECK_SAMPLES).map(|t| (*c, *r, t)))
        .collect::<Result<Vec<_>>>()?;

    // (iv.3) degree range
    let mut degrees = BTreeSet::new();
    let mut bad_circles = 0;
    for (_, _, t) in &traces {
        let d = cavity::degree_range(t, 40);
        if d.iter().any(|k| *k != 0 && *k != 1) {
            bad_circles += 1;
        }
        degrees.extend(d);
    }
    rows.push(CheckRow::new(
        "degree-range",
        traces.len(),
        bad_circles,
        format!("degrees observed {:?}", degrees),
    ));

    // (INV′) membership of sampled images
    let (mut samples, mut failures) = (0, 0);
    for (c, r, t) in &traces {
        let images: Vec<(bool, ImageMembership)> = lattice
            .par_iter()
            .filter(|x| (x.dist(*c) - r).abs() > 1e-3 * r)
            .map(|x| (x.dist(*c) < *r, cavity::topological_image_contains(t, y.eval(*x))))
            .collect();
        for (inside, m) in images {
            match (inside, m) {
                (_, ImageMembership::NearBoundary) => {}
                (true, ImageMembership::Inside) | (false, ImageMembership::Outside) => samples += 1,
                _ => {
                    samples += 1;
                    failures += 1;
                }
            }
        }
    }
    rows.push(CheckRow::new(
        "image-membership",
        samples,
        failures,
        format!("{failures} of {samples} sampled images on the wrong side of a test-circle image"),
    ));

    // (iv.2) no reference point lands in a cavity
    let flaw_traces = cfg
        .points
        .par_iter()
        .map(|a| trace_on_circle(y, *a, eps, CHECK_SAMPLES))
        .collect::<Result<Vec<_>>>()?;
    let mut filled = 0;
    for t in &flaw_traces {
        filled += lattice
            .par_iter()
            .filter(|x| x.dist(t.center) > eps * (1.0 + 1e-3))
            .filter(|x| cavity::topological_image_contains(t, y.eval(**x)) == ImageMembership::Inside)
            .count();
    }
    rows.push(CheckRow::new(
        "cavity-not-filled",
        lattice.len() * flaw_traces.len(),
        filled,
        format!("{filled} sampled images inside a cavity"),
    ));

    // (iv.4) trace near-injectivity
    let mut collisions = 0;
    let mut min_gap = f64::INFINITY;
    for t in &flaw_traces {
        let n = t.len();
        let threshold = 1e-6 * t.diameter();
        for i in 0..n {
            for j in i + 1..n {
                let dt = (j - i).min(n - (j - i));
                if dt <= 4 {
                    continue;
                }
                let d = t.points[i].dist(t.points[j]);
                min_gap = min_gap.min(d / t.diameter());
                if d <= threshold {
                    collisions += 1;
                }
            }
        }
    }
    rows.push(CheckRow::new(
        "trace-injectivity",
        flaw_traces.len(),
        collisions,
        format!("minimal relative distance between distinct samples {min_gap:e}"),
    ));

    // (v) extended determinant identity
    let (mut worst, mut bumps, mut bad_bumps) = (0.0f64, 0, 0);
    let center = cfg.points.first().copied().unwrap_or(outer.center);
    let radius = (0.99 * outer.distance_to_boundary(center)).min(0.7 * outer.radius);
    for k in [2, 3, 4] {
        let phi = PolynomialBump::new(center, radius, k)?;
        let r = extended_det_pairing(y, cfg, dom, &phi)?;
        bumps += 1;
        worst = worst.max(r.residual);
        if !(r.residual <= DET_IDENTITY_TOL) {
            bad_bumps += 1;
        }
    }
    rows.push(CheckRow::new(
        "det-identity",
        bumps,
        bad_bumps,
        format!("largest relative residual {worst:e}"),
    ));

    Ok(AdmissibilityReport { rows })
}
