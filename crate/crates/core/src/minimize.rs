//! Radially reduced minimization of the regularized energy, single-flaw
//! search over candidate points and ε-sweeps.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::{extrapolate_limit, Extrapolation};
use crate::deformation::{RadialDeformation, RadialProfile};
use crate::energy::{Density, EnergyBreakdown, Lambdas};
use crate::error::{Error, Result};
use crate::geometry::{validate_flaw_config, Confinement, Domain, FlawConfig, Mat2, QBall, QNorm, Vec2};
use crate::quadrature::GaussLegendre;

/// Minimal gap between consecutive profile values.
pub const DELTA_MIN: f64 = 1e-8;

/// Gauss-Legendre points per profile segment.
const SEGMENT_POINTS: usize = 8;

/// Radial problem on the annulus `A(0, ε, R)` with `ρ(R)` prescribed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialProblem {
    pub eps: f64,
    pub outer_radius: f64,
    pub boundary_value: f64,
    pub density: Density,
    pub lambdas: Lambdas,
    /// Number of profile segments; the profile has `k + 1` nodes.
    pub k: usize,
}

impl RadialProblem {
    pub fn new(
        eps: f64,
        outer_radius: f64,
        boundary_value: f64,
        density: Density,
        lambdas: Lambdas,
        k: usize,
    ) -> Result<Self> {
        let p = Self {
            eps,
            outer_radius,
            boundary_value,
            density,
            lambdas,
            k,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps < self.outer_radius) || !self.outer_radius.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "radial problem needs 0 < eps < outer radius, got eps = {}, R = {}",
                self.eps, self.outer_radius
            )));
        }
        if !(self.boundary_value > 0.0) || !self.boundary_value.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "boundary value must be positive, got {}",
                self.boundary_value
            )));
        }
        if self.k < 8 {
            return Err(Error::InvalidArgument(format!(
                "radial problem needs at least 8 segments, got {}",
                self.k
            )));
        }
        Ok(())
    }

    /// Affine datum `x ↦ s x` with `s = ρ(R)/R`.
    pub fn stretch(&self) -> f64 {
        self.boundary_value / self.outer_radius
    }

    pub fn with_eps(&self, eps: f64) -> Result<Self> {
        let p = Self { eps, ..*self };
        p.validate()?;
        Ok(p)
    }

    /// Geometrically graded nodes from `ε` to `R`.
    pub fn nodes(&self) -> Vec<f64> {
        let ratio = self.outer_radius / self.eps;
        let mut nodes: Vec<f64> = (0..=self.k)
            .map(|i| self.eps * ratio.powf(i as f64 / self.k as f64))
            .collect();
        nodes[0] = self.eps;
        nodes[self.k] = self.outer_radius;
        nodes
    }

    /// `ρ(R) = s R` on the nodes: the cavity-free affine profile.
    pub fn homogeneous_profile(&self) -> RadialProfile {
        let s = self.stretch();
        let nodes = self.nodes();
        let values = nodes.iter().map(|r| s * r).collect();
        RadialProfile { nodes, values }
    }

    /// Affine profile from the trial cavity radius `½ρ(R)` to `ρ(R)`.
    pub fn trial_profile(&self) -> RadialProfile {
        RadialProfile::affine(self.nodes(), 0.5 * self.boundary_value, self.boundary_value)
            .expect("affine profile with increasing values")
    }

    pub fn domain(&self) -> QBall {
        QBall::new(Vec2::ZERO, self.outer_radius, QNorm::Two)
    }
}

fn check_profile(profile: &RadialProfile, prob: &RadialProblem) -> Result<()> {
    let (r0, rk) = (profile.inner_radius(), profile.outer_radius());
    if (r0 - prob.eps).abs() > 1e-12 * prob.outer_radius || (rk - prob.outer_radius).abs() > 1e-12 * prob.outer_radius {
        return Err(Error::InvalidArgument(format!(
            "profile spans [{r0}, {rk}] but the problem needs [{}, {}]",
            prob.eps, prob.outer_radius
        )));
    }
    if profile.values[0] < 0.0 || profile.values.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "profile must be nonnegative and strictly increasing".into(),
        ));
    }
    Ok(())
}

fn elastic_1d(nodes: &[f64], values: &[f64], density: &Density, gl: &GaussLegendre) -> f64 {
    let mut total = 0.0;
    for i in 0..nodes.len() - 1 {
        let (r0, r1) = (nodes[i], nodes[i + 1]);
        let (v0, v1) = (values[i], values[i + 1]);
        let slope = (v1 - v0) / (r1 - r0);
        total += gl.integrate(r0, r1, |r| {
            let rho = v0 + slope * (r - r0);
            2.0 * PI * r * density.w_radial(slope, rho / r)
        });
    }
    total
}

fn elastic_1d_grad(nodes: &[f64], values: &[f64], density: &Density, gl: &GaussLegendre, grad: &mut [f64]) {
    grad.iter_mut().for_each(|g| *g = 0.0);
    for i in 0..nodes.len() - 1 {
        let (r0, r1) = (nodes[i], nodes[i + 1]);
        let h = r1 - r0;
        let (v0, v1) = (values[i], values[i + 1]);
        let slope = (v1 - v0) / h;
        let (mut g0, mut g1) = (0.0, 0.0);
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let s = 0.5 * (x + 1.0);
            let r = r0 + h * s;
            let rho = v0 + slope * (r - r0);
            let (wa, wb) = density.dw_radial(slope, rho / r);
            let weight = 0.5 * w * h * 2.0 * PI * r;
            g0 += weight * (-wa / h + wb * (1.0 - s) / r);
            g1 += weight * (wa / h + wb * s / r);
        }
        grad[i] += g0;
        if i + 1 < grad.len() {
            grad[i + 1] += g1;
        }
    }
}

fn breakdown_of(values: &[f64], nodes: &[f64], prob: &RadialProblem, gl: &GaussLegendre) -> EnergyBreakdown {
    let elastic = elastic_1d(nodes, values, &prob.density, gl);
    let rho0 = values[0];
    EnergyBreakdown::new(elastic, PI * rho0 * rho0, 2.0 * PI * rho0, prob.lambdas)
}

/// `2π ∫_ε^R W(diag(ρ', ρ/R)) R dR + λ_v πρ(ε)² + λ_p 2πρ(ε)`.
pub fn radial_reduced_energy(profile: &RadialProfile, prob: &RadialProblem) -> Result<EnergyBreakdown> {
    prob.validate()?;
    check_profile(profile, prob)?;
    let gl = GaussLegendre::new(SEGMENT_POINTS);
    Ok(breakdown_of(&profile.values, &profile.nodes, prob, &gl))
}

/// Lifts a profile to the plane map `x ↦ c + ρ(|x - c|)(x - c)/|x - c|`.
pub fn lift(profile: &RadialProfile, center: Vec2) -> RadialDeformation {
    RadialDeformation::new(profile.clone(), center)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    /// Stop when the projected-gradient sup norm falls below this.
    pub tol: f64,
    pub max_iterations: usize,
    pub delta_min: f64,
    /// Armijo constant.
    pub armijo: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iterations: 100_000,
            delta_min: DELTA_MIN,
            armijo: 1e-4,
        }
    }
}

/// Projected-gradient level at which a stalled line search still counts as
/// converged: the energy decrease left is below rounding.
pub const STALL_TOLERANCE: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Converged,
    /// Line search could not decrease the energy any further.
    Stalled,
    MaxIterations,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialMinimum {
    pub profile: RadialProfile,
    pub breakdown: EnergyBreakdown,
    pub iterations: usize,
    pub termination: Termination,
    pub projected_gradient: f64,
    /// Energy after each accepted step, starting with the initial profile.
    pub energy_trace: Vec<f64>,
    pub initial_energy: f64,
}

impl RadialMinimum {
    /// Converged, or stalled at a projected gradient below
    /// [`STALL_TOLERANCE`].
    pub fn converged(&self) -> bool {
        match self.termination {
            Termination::Converged => true,
            Termination::Stalled => self.projected_gradient < STALL_TOLERANCE,
            Termination::MaxIterations => false,
        }
    }
}

/// Euclidean projection onto `{x₀ ≥ δ, x_{i+1} - x_i ≥ δ, x_{K-1} ≤ ρ(R) - δ}`
/// via pool-adjacent-violators on `u_i = x_i - iδ` followed by clipping.
pub fn project_monotone(x: &mut [f64], boundary_value: f64, delta: f64) {
    let k = x.len();
    let lo = delta;
    let hi = boundary_value - k as f64 * delta;
    let u: Vec<f64> = x.iter().enumerate().map(|(i, v)| v - i as f64 * delta).collect();
    let mut fitted = pav(&u);
    for (i, v) in fitted.iter_mut().enumerate() {
        *v = v.clamp(lo, hi.max(lo)) + i as f64 * delta;
    }
    x.copy_from_slice(&fitted);
}

/// Isotonic (nondecreasing) least-squares fit with unit weights.
pub fn pav(y: &[f64]) -> Vec<f64> {
    let mut means: Vec<f64> = Vec::with_capacity(y.len());
    let mut counts: Vec<usize> = Vec::with_capacity(y.len());
    for &v in y {
        means.push(v);
        counts.push(1);
        while means.len() > 1 && means[means.len() - 2] > means[means.len() - 1] {
            let (m1, c1) = (means.pop().unwrap(), counts.pop().unwrap());
            let (m0, c0) = (means.pop().unwrap(), counts.pop().unwrap());
            let c = c0 + c1;
            means.push((m0 * c0 as f64 + m1 * c1 as f64) / c as f64);
            counts.push(c);
        }
    }
    means
        .iter()
        .zip(&counts)
        .flat_map(|(m, c)| std::iter::repeat_n(*m, *c))
        .collect()
}

struct Objective<'a> {
    prob: &'a RadialProblem,
    nodes: Vec<f64>,
    gl: GaussLegendre,
    full: Vec<f64>,
}

impl<'a> Objective<'a> {
    fn new(prob: &'a RadialProblem) -> Self {
        let nodes = prob.nodes();
        let mut full = vec![0.0; nodes.len()];
        full[prob.k] = prob.boundary_value;
        Self {
            prob,
            nodes,
            gl: GaussLegendre::new(SEGMENT_POINTS),
            full,
        }
    }

    fn energy(&mut self, x: &[f64]) -> f64 {
        self.full[..x.len()].copy_from_slice(x);
        breakdown_of(&self.full, &self.nodes, self.prob, &self.gl).total
    }

    fn gradient(&mut self, x: &[f64], grad: &mut [f64]) {
        self.full[..x.len()].copy_from_slice(x);
        let mut g = vec![0.0; self.full.len()];
        elastic_1d_grad(&self.nodes, &self.full, &self.prob.density, &self.gl, &mut g);
        grad.copy_from_slice(&g[..x.len()]);
        grad[0] += 2.0 * PI * (self.prob.lambdas.volume * x[0] + self.prob.lambdas.perimeter);
    }
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Projected gradient with Barzilai-Borwein trial steps and Armijo
/// backtracking from a given start.
pub fn minimize_from(prob: &RadialProblem, start: &RadialProfile, opts: &MinimizeOptions) -> Result<RadialMinimum> {
    prob.validate()?;
    let mut obj = Objective::new(prob);
    let k = prob.k;
    let mut x: Vec<f64> = obj.nodes[..k].iter().map(|r| start.eval(*r).0).collect();
    project_monotone(&mut x, prob.boundary_value, opts.delta_min);
    let mut e = obj.energy(&x);
    if !e.is_finite() {
        return Err(Error::Numerical("initial profile has infinite energy".into()));
    }
    let mut g = vec![0.0; k];
    obj.gradient(&x, &mut g);
    let mut trace = vec![e];
    let mut alpha = 1.0 / g.iter().map(|v| v.abs()).fold(1e-300, f64::max) * prob.boundary_value;
    let mut termination = Termination::MaxIterations;
    let mut iterations = 0;
    let mut pg = f64::INFINITY;
    let mut trial = vec![0.0; k];
    let mut g_new = vec![0.0; k];
    while iterations < opts.max_iterations {
        trial
            .iter_mut()
            .zip(x.iter().zip(&g))
            .for_each(|(t, (xi, gi))| *t = xi - gi);
        project_monotone(&mut trial, prob.boundary_value, opts.delta_min);
        pg = sup_dist(&trial, &x);
        if pg < opts.tol {
            termination = Termination::Converged;
            break;
        }
        let mut step = alpha;
        let accepted = loop {
            trial
                .iter_mut()
                .zip(x.iter().zip(&g))
                .for_each(|(t, (xi, gi))| *t = xi - step * gi);
            project_monotone(&mut trial, prob.boundary_value, opts.delta_min);
            let decrease: f64 = g
                .iter()
                .zip(trial.iter().zip(&x))
                .map(|(gi, (t, xi))| gi * (t - xi))
                .sum();
            let e_trial = obj.energy(&trial);
            if e_trial.is_finite() && e_trial <= e + opts.armijo * decrease && e_trial < e {
                break Some(e_trial);
            }
            step *= 0.5;
            if step < 1e-30 || decrease == 0.0 {
                break None;
            }
        };
        let Some(e_new) = accepted else {
            termination = Termination::Stalled;
            break;
        };
        obj.gradient(&trial, &mut g_new);
        let mut ss = 0.0;
        let mut sy = 0.0;
        for i in 0..k {
            let s = trial[i] - x[i];
            ss += s * s;
            sy += s * (g_new[i] - g[i]);
        }
        alpha = if sy > 0.0 {
            (ss / sy).clamp(1e-14, 1e14)
        } else {
            2.0 * step
        };
        std::mem::swap(&mut x, &mut trial);
        std::mem::swap(&mut g, &mut g_new);
        e = e_new;
        trace.push(e);
        iterations += 1;
    }
    let mut values = x;
    values.push(prob.boundary_value);
    let profile = RadialProfile {
        nodes: obj.nodes.clone(),
        values,
    };
    let breakdown = breakdown_of(&profile.values, &profile.nodes, prob, &obj.gl);
    Ok(RadialMinimum {
        profile,
        breakdown,
        iterations,
        termination,
        projected_gradient: pg,
        initial_energy: trace[0],
        energy_trace: trace,
    })
}

/// Minimizes from the cavity-free affine profile and from the trial-cavity
/// profile and keeps the lower result.
pub fn minimize_radial(prob: &RadialProblem) -> Result<RadialMinimum> {
    minimize_radial_with(prob, &MinimizeOptions::default(), &[])
}

/// As [`minimize_radial`], with extra starting profiles.
pub fn minimize_radial_with(
    prob: &RadialProblem,
    opts: &MinimizeOptions,
    extra_starts: &[RadialProfile],
) -> Result<RadialMinimum> {
    prob.validate()?;
    let mut starts = vec![prob.homogeneous_profile(), prob.trial_profile()];
    starts.extend_from_slice(extra_starts);
    let results = starts
        .par_iter()
        .map(|s| minimize_from(prob, s, opts))
        .collect::<Result<Vec<_>>>()?;
    let best = results
        .into_iter()
        .min_by(|a, b| a.breakdown.total.total_cmp(&b.breakdown.total))
        .expect("at least one start");
    if !best.converged() {
        log::warn!(
            "radial minimization at eps = {} ended with {:?} (projected gradient {:e})",
            prob.eps,
            best.termination,
            best.projected_gradient
        );
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateRow {
    pub point: Vec2,
    /// Violations when the candidate is rejected.
    pub rejected: Option<String>,
    /// Radius of the largest disk about the candidate inside `Ω`.
    pub disk_radius: f64,
    /// Radial minimum plus the affine-datum energy outside that disk.
    pub energy: Option<f64>,
    pub cavity_radius: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlawSearch {
    pub table: Vec<CandidateRow>,
    pub best_index: usize,
    pub best: RadialMinimum,
}

impl FlawSearch {
    pub fn best_point(&self) -> Vec2 {
        self.table[self.best_index].point
    }

    pub fn best_energy(&self) -> f64 {
        self.table[self.best_index]
            .energy
            .expect("best candidate has an energy")
    }
}

/// Exhaustive single-flaw search. For each admissible candidate `a` the
/// radial problem is posed on the largest disk `B(a, R_a) ⊂ Ω` with the
/// template's affine datum, and the datum fills `Ω \ B(a, R_a)`. The
/// template's node count applies to `R_a = template.outer_radius`.
pub fn flaw_search(
    candidates: &[Vec2],
    template: &RadialProblem,
    omega: &QBall,
    confinement: Confinement,
) -> Result<FlawSearch> {
    if candidates.is_empty() {
        return Err(Error::InvalidArgument(
            "flaw search needs at least one candidate".into(),
        ));
    }
    let stretch = template.stretch();
    let outside_density = template.density.w(&Mat2::IDENTITY.scale(stretch));
    let dom = Domain::new(*omega);
    let results: Vec<(CandidateRow, Option<RadialMinimum>)> = candidates
        .par_iter()
        .map(|a| {
            let cfg = FlawConfig::new(vec![*a], template.eps, 1, confinement);
            let report = validate_flaw_config(&cfg, &dom);
            let disk_radius = omega.distance_to_boundary(*a);
            if !report.is_valid() {
                let row = CandidateRow {
                    point: *a,
                    rejected: Some(report.to_string()),
                    disk_radius,
                    energy: None,
                    cavity_radius: None,
                };
                return Ok((row, None));
            }
            // Same logarithmic node spacing for every candidate.
            let k = ((template.k as f64) * (disk_radius / template.eps).ln()
                / (template.outer_radius / template.eps).ln())
            .ceil()
            .max(8.0) as usize;
            let prob = RadialProblem {
                outer_radius: disk_radius,
                boundary_value: stretch * disk_radius,
                k,
                ..*template
            };
            prob.validate()?;
            let m = minimize_radial(&prob)?;
            let energy = m.breakdown.total + outside_density * (omega.area() - PI * disk_radius * disk_radius);
            let row = CandidateRow {
                point: *a,
                rejected: None,
                disk_radius,
                energy: Some(energy),
                cavity_radius: Some(m.profile.cavity_radius()),
            };
            Ok((row, Some(m)))
        })
        .collect::<Result<Vec<_>>>()?;
    let best_index = results
        .iter()
        .enumerate()
        .filter_map(|(i, (row, _))| row.energy.map(|e| (i, e)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidArgument("every flaw candidate was rejected".into()))?;
    let mut table = Vec::with_capacity(results.len());
    let mut best = None;
    for (i, (row, m)) in results.into_iter().enumerate() {
        if i == best_index {
            best = m;
        }
        table.push(row);
    }
    Ok(FlawSearch {
        table,
        best_index,
        best: best.expect("best candidate was minimized"),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub eps: f64,
    pub min_energy: EnergyBreakdown,
    /// `ρ(ε)` of the minimizer.
    pub cavity_radius: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaSweep {
    pub rows: Vec<SweepRow>,
    /// Minimal energies extrapolated to `ε → 0⁺`.
    pub limit: Extrapolation,
    /// Cavity radii extrapolated to `ε → 0⁺`, clamped at zero.
    pub cavity_radius_limit: Extrapolation,
    /// `|min 𝓔_ε - limit|` per row.
    pub gaps: Vec<f64>,
}

impl GammaSweep {
    /// Whether each gap is at most `(1 + tol)` times the previous one.
    pub fn gaps_nonincreasing(&self, tol: f64) -> bool {
        self.gaps.windows(2).all(|w| w[1] <= (1.0 + tol) * w[0])
    }
}

/// Minimizes the template problem for each `ε` (decreasing), warm-starting
/// from the previous minimizer.
pub fn gamma_sweep(eps_list: &[f64], template: &RadialProblem) -> Result<GammaSweep> {
    if eps_list.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "gamma sweep needs at least 3 eps values, got {}",
            eps_list.len()
        )));
    }
    if eps_list.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::InvalidArgument("eps values must be strictly decreasing".into()));
    }
    let dom = Domain::new(template.domain());
    let center_only = Confinement::Disk {
        center: Vec2::ZERO,
        radius: 0.0,
    };
    for eps in eps_list {
        validate_flaw_config(&FlawConfig::new(vec![Vec2::ZERO], *eps, 1, center_only), &dom).into_result()?;
    }
    let mut rows = Vec::with_capacity(eps_list.len());
    let mut previous: Option<RadialProfile> = None;
    for eps in eps_list {
        let prob = template.with_eps(*eps)?;
        let extra: Vec<RadialProfile> = previous.iter().cloned().collect();
        let m = minimize_radial_with(&prob, &MinimizeOptions::default(), &extra)?;
        rows.push(SweepRow {
            eps: *eps,
            min_energy: m.breakdown,
            cavity_radius: m.profile.cavity_radius(),
            iterations: m.iterations,
            converged: m.converged(),
        });
        previous = Some(m.profile);
    }
    let totals: Vec<f64> = rows.iter().map(|r| r.min_energy.total).collect();
    let radii: Vec<f64> = rows.iter().map(|r| r.cavity_radius).collect();
    let limit = extrapolate_limit(eps_list, &totals)?;
    let mut cavity_radius_limit = extrapolate_limit(eps_list, &radii)?;
    cavity_radius_limit.limit = cavity_radius_limit.limit.max(0.0);
    let gaps = totals.iter().map(|e| (e - limit.limit).abs()).collect();
    Ok(GammaSweep {
        rows,
        limit,
        cavity_radius_limit,
        gaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn problem(eps: f64, bv: f64, lambdas: Lambdas) -> RadialProblem {
        RadialProblem::new(eps, 1.0, bv, Density::default_density(2.0).unwrap(), lambdas, 24).unwrap()
    }

    #[test]
    fn identity_profile_energy() {
        let prob = problem(0.5, 1.0, Lambdas::ZERO);
        let id = RadialProfile::identity(prob.nodes()).unwrap();
        let e = radial_reduced_energy(&id, &prob).unwrap();
        assert_relative_eq!(e.total, 2.25 * PI, max_relative = 1e-12);
        let with = RadialProblem {
            lambdas: Lambdas::ONE,
            ..prob
        };
        let e1 = radial_reduced_energy(&id, &with).unwrap();
        assert_relative_eq!(e1.total - e.total, PI * 0.25 + 2.0 * PI * 0.5, max_relative = 1e-12);
    }

    #[test]
    fn pav_examples() {
        assert_eq!(pav(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(pav(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
        let mut x = vec![-1.0, 0.5, 0.4, 5.0];
        project_monotone(&mut x, 2.0, 0.1);
        assert!(x[0] >= 0.1 - 1e-15);
        assert!(x.windows(2).all(|w| w[1] - w[0] >= 0.1 - 1e-12));
        assert!(2.0 - x[3] >= 0.1 - 1e-12);
    }

    #[test]
    fn gradient_matches_differences() {
        let prob = problem(0.1, 2.0, Lambdas::new(0.7, 0.3).unwrap());
        let mut obj = Objective::new(&prob);
        let x: Vec<f64> = prob.trial_profile().values[..prob.k].to_vec();
        let mut g = vec![0.0; prob.k];
        obj.gradient(&x, &mut g);
        for i in 0..prob.k {
            let h = 1e-7 * x[i].max(1e-3);
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (obj.energy(&xp) - obj.energy(&xm)) / (2.0 * h);
            assert!(
                (fd - g[i]).abs() <= 1e-5 * g[i].abs().max(1e-2),
                "node {i}: {fd} vs {}",
                g[i]
            );
        }
    }

    #[test]
    fn no_stretch_never_worse_than_identity() {
        for eps in [0.2, 0.1, 0.05] {
            let prob = problem(eps, 1.0, Lambdas::ZERO);
            let id = radial_reduced_energy(&RadialProfile::identity(prob.nodes()).unwrap(), &prob).unwrap();
            let m = minimize_radial(&prob).unwrap();
            assert!(m.breakdown.total <= id.total + 1e-8);
            assert!(m.energy_trace.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn huge_penalties_suppress_the_cavity() {
        let prob = problem(0.1, 1.0, Lambdas::new(1e6, 1e6).unwrap());
        let m = minimize_radial(&prob).unwrap();
        let open = radial_reduced_energy(&prob.trial_profile(), &prob).unwrap();
        assert!(m.profile.cavity_radius() < 1e-3, "{}", m.profile.cavity_radius());
        assert!(m.breakdown.total < open.total);
    }

    #[test]
    fn search_prefers_the_center_for_symmetric_data() {
        let prob =
            RadialProblem::new(0.05, 1.0, 1.2, Density::default_density(2.0).unwrap(), Lambdas::ONE, 48).unwrap();
        let disk = QBall::unit(QNorm::Two);
        let candidates = vec![
            Vec2::ZERO,
            Vec2::new(0.2, 0.0),
            Vec2::new(0.0, -0.3),
            Vec2::new(0.9, 0.0),
        ];
        let s = flaw_search(&candidates, &prob, &disk, Confinement::default_disk()).unwrap();
        assert!(s.table[3].rejected.as_deref().unwrap().contains("confinement"));
        let e0 = s.table[0].energy.unwrap();
        assert!(s.best_energy() >= e0 - 1e-6);
        assert!(flaw_search(&[], &prob, &disk, Confinement::default_disk()).is_err());
    }
}
