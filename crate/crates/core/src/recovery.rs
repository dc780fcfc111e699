//! Recovery sequences `y_n = y ∘ f_n` on shrinking perforations, built from
//! a radial push `f_n` that maps `B(a, ε_n)` onto `B(a, r_n)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cavity::cavity_metrics;
use crate::deformation::{compose, CavityLimit, Deformation};
use crate::energy::{limit_energy, regularized_energy, Density, EnergyBreakdown, Lambdas, LimitEnergy, ENERGY_TOL};
use crate::error::{Error, Result};
use crate::geometry::{Confinement, Domain, FlawConfig, Mat2, QBall, QNorm, Vec2};
use crate::quadrature::{integrate_perforated, Breaks};

fn smoothstep(u: f64) -> f64 {
    u * u * (3.0 - 2.0 * u)
}

/// `∫_0^u smoothstep`.
fn smoothstep_integral(u: f64) -> f64 {
    u * u * u * (1.0 - 0.5 * u)
}

/// Strictly increasing profile `φ` with `φ(0) = 0`, `φ(ε) = r` and
/// `φ(t) = t` for `t ≥ 2ε`.
///
/// Piecewise affine with slope one on `(ε - δ, ε + δ)`, `δ = ε/4`; the kinks
/// are blended over half-width `δ/2` with a cubic smoothstep in `φ'`, which
/// leaves the slope-one window and the identity region untouched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfilePhi {
    pub eps_n: f64,
    pub r_n: f64,
    pub n: usize,
    pub delta: f64,
    /// Kink locations of the unblended profile.
    kinks: [f64; 3],
    /// Slopes on `[0, t₀]`, `[t₀, t₁]`, `[t₁, t₂]`, `[t₂, ∞)`.
    slopes: [f64; 4],
    /// Blend half-width.
    width: f64,
}

impl ProfilePhi {
    /// Unblended piecewise-affine profile.
    fn affine(&self, t: f64) -> f64 {
        let [t0, t1, t2] = self.kinks;
        let [s0, s1, s2, _] = self.slopes;
        if t <= t0 {
            s0 * t
        } else if t <= t1 {
            s0 * t0 + s1 * (t - t0)
        } else if t <= t2 {
            s0 * t0 + s1 * (t1 - t0) + s2 * (t - t1)
        } else {
            t
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t >= 2.0 * self.eps_n {
            return t;
        }
        let w = self.width;
        for (k, &tk) in self.kinks.iter().enumerate() {
            if (t - tk).abs() < w {
                let (sl, sr) = (self.slopes[k], self.slopes[k + 1]);
                let u = (t - tk + w) / (2.0 * w);
                return self.affine(tk - w) + sl * (t - tk + w) + (sr - sl) * 2.0 * w * smoothstep_integral(u);
            }
        }
        if t >= self.kinks[2] + w {
            return t;
        }
        self.affine(t)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        if t >= 2.0 * self.eps_n {
            return 1.0;
        }
        let w = self.width;
        for (k, &tk) in self.kinks.iter().enumerate() {
            if (t - tk).abs() < w {
                let (sl, sr) = (self.slopes[k], self.slopes[k + 1]);
                return sl + (sr - sl) * smoothstep((t - tk + w) / (2.0 * w));
            }
        }
        let [t0, t1, t2] = self.kinks;
        if t < t0 {
            self.slopes[0]
        } else if t < t1 {
            self.slopes[1]
        } else if t < t2 {
            self.slopes[2]
        } else {
            1.0
        }
    }

    /// `sup |φ(t)/t - 1| + |φ'(t) - 1|` over `m` equispaced points of `(0, 3ε]`.
    pub fn uniform_deviation(&self, m: usize) -> f64 {
        (1..=m)
            .map(|i| {
                let t = 3.0 * self.eps_n * i as f64 / m as f64;
                (self.eval(t) / t - 1.0).abs() + (self.deriv(t) - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `φ(t)/t`, continuous at `t = 0`.
    pub fn ratio(&self, t: f64) -> f64 {
        if t < self.kinks[0] - self.width {
            self.slopes[0]
        } else {
            self.eval(t) / t
        }
    }
}

/// Builds `φ_n` with `φ_n(ε_n) = r_n`; needs `|r_n - ε_n| ≤ ε_n/(4n)`.
pub fn build_phi(eps_n: f64, r_n: f64, n: usize) -> Result<ProfilePhi> {
    if !(eps_n > 0.0) || !(r_n > 0.0) || n == 0 || !eps_n.is_finite() || !r_n.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "build_phi needs eps_n, r_n > 0 and n >= 1, got ({eps_n}, {r_n}, {n})"
        )));
    }
    if (r_n - eps_n).abs() > eps_n / (4.0 * n as f64) * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "target radius {r_n} is farther than eps_n/(4n) = {} from eps_n = {eps_n}",
            eps_n / (4.0 * n as f64)
        )));
    }
    let delta = 0.25 * eps_n;
    let width = 0.5 * delta;
    let t0 = eps_n - delta;
    let t1 = eps_n + delta;
    let t2 = 2.0 * eps_n - width;
    let s0 = (r_n - delta) / t0;
    let s2 = (t2 - (r_n + delta)) / (t2 - t1);
    Ok(ProfilePhi {
        eps_n,
        r_n,
        n,
        delta,
        kinks: [t0, t1, t2],
        slopes: [s0, 1.0, s2, 1.0],
        width,
    })
}

/// `f(x) = a + φ(|x - a|)(x - a)/|x - a|` near each flaw point, the identity
/// outside `⋃ B(a, 2ε_n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialPush {
    pub phi: ProfilePhi,
    pub flaws: Vec<Vec2>,
    pub domain: QBall,
}

/// Checks that the balls `B(a, 2ε_n)` are disjoint and inside `domain`.
pub fn build_push(phi: ProfilePhi, flaws: &[Vec2], domain: QBall) -> Result<RadialPush> {
    let reach = 2.0 * phi.eps_n;
    for (i, a) in flaws.iter().enumerate() {
        if domain.distance_to_boundary(*a) <= reach {
            return Err(Error::InvalidArgument(format!(
                "push ball B({a}, {reach}) leaves the domain"
            )));
        }
        for b in &flaws[i + 1..] {
            if a.dist(*b) <= 2.0 * reach {
                return Err(Error::InvalidArgument(format!("push balls around {a} and {b} overlap")));
            }
        }
    }
    Ok(RadialPush {
        phi,
        flaws: flaws.to_vec(),
        domain,
    })
}

impl RadialPush {
    fn nearest(&self, x: Vec2) -> Option<Vec2> {
        let reach = 2.0 * self.phi.eps_n;
        self.flaws.iter().copied().find(|a| x.dist(*a) < reach)
    }
}

impl Deformation for RadialPush {
    fn name(&self) -> String {
        format!("push(n = {})", self.phi.n)
    }
    fn domain(&self) -> Domain {
        Domain::new(self.domain)
    }
    fn eval(&self, x: Vec2) -> Vec2 {
        match self.nearest(x) {
            None => x,
            Some(a) => {
                let d = x - a;
                a + d * self.phi.ratio(d.norm())
            }
        }
    }
    fn grad(&self, x: Vec2) -> Mat2 {
        match self.nearest(x) {
            None => Mat2::IDENTITY,
            Some(a) => {
                let d = x - a;
                let r = d.norm();
                if r == 0.0 {
                    return Mat2::IDENTITY.scale(self.phi.slopes[0]);
                }
                let e = d * (1.0 / r);
                let ee = Mat2::outer(e, e);
                (Mat2::IDENTITY - ee).scale(self.phi.ratio(r)) + ee.scale(self.phi.deriv(r))
            }
        }
    }
    fn grad_is_exact(&self) -> bool {
        true
    }
    fn radial_breakpoints(&self, center: Vec2) -> Vec<f64> {
        if self.flaws.contains(&center) {
            let w = self.phi.width;
            self.phi.kinks.iter().flat_map(|k| [k - w, k + w]).collect()
        } else {
            Vec::new()
        }
    }
}

/// `r_n = ε_n (1 + 1/(8n))`.
pub fn default_r_rule(eps_n: f64, n: usize) -> f64 {
    eps_n * (1.0 + 1.0 / (8.0 * n as f64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub eps: f64,
    pub n: usize,
    pub r_n: f64,
    pub energy: EnergyBreakdown,
    pub limit_total: f64,
    /// `|𝓔_{ε_n}(A, y_n) - 𝓔(A, y)|`.
    pub gap: f64,
    pub relative_gap: f64,
    /// Largest relative difference of cavity volume and perimeter between
    /// the trace of `y_n` on `S(a, ε_n)` and that of `y` on `S(a, r_n)`.
    pub trace_identity: f64,
    /// `Σ_a ∫_{A(a, ε_n, 2ε_n)} W(Dy_n)`.
    pub annular_energy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveryTable {
    pub rows: Vec<RecoveryRow>,
    pub limit: LimitEnergy,
    /// True when the perimeter-convergence hypothesis holds numerically and
    /// energy convergence can be asserted.
    pub convergence_checked: bool,
}

impl RecoveryTable {
    pub fn conv_perimeter_violated(&self) -> bool {
        self.limit.conv_perimeter_violated()
    }

    /// Every row satisfies `𝓔_{ε_n} ≥ 𝓔 - slack`.
    pub fn lower_bound_holds(&self, slack: f64) -> bool {
        self.rows
            .iter()
            .all(|r| r.energy.total >= self.limit.breakdown.total - slack)
    }
}

/// Radii used for the limit-energy extrapolation.
pub const LIMIT_RADII: [f64; 4] = [0.2, 0.1, 0.05, 0.025];

/// Energies of `y ∘ f_n` on `Ω_{ε_n}^A` for `ε_n` in `eps_list`
/// (row `n` uses index `n = 1, 2, …`), against the limit energy of `y`.
pub fn recovery_energy_table(
    y: Arc<dyn Deformation>,
    points: &[Vec2],
    dom: &Domain,
    eps_list: &[f64],
    density: &Density,
    lambdas: Lambdas,
    r_rule: &(dyn Fn(f64, usize) -> f64 + Sync),
) -> Result<RecoveryTable> {
    if eps_list.is_empty() {
        return Err(Error::InvalidArgument("recovery table needs at least one eps".into()));
    }
    let limit = limit_energy(y.as_ref(), points, dom, density, lambdas, &LIMIT_RADII)?;
    let limit_total = limit.breakdown.total;
    let spread = points.iter().map(|a| a.dist(dom.outer.center)).fold(0.0, f64::max);
    let confinement = Confinement::Disk {
        center: dom.outer.center,
        radius: spread,
    };
    let rows = eps_list
        .par_iter()
        .enumerate()
        .map(|(i, &eps)| {
            let n = i + 1;
            let r_n = r_rule(eps, n);
            let phi = build_phi(eps, r_n, n)?;
            let push = Arc::new(build_push(phi, points, dom.outer)?);
            let y_n = compose(y.clone(), push.clone());
            let cfg = FlawConfig::new(points.to_vec(), eps, points.len(), confinement);
            let energy = regularized_energy(&y_n, &cfg, dom, density, lambdas)?.breakdown;
            let mut trace_identity: f64 = 0.0;
            for a in points {
                let m_n = cavity_metrics(&y_n, *a, eps)?;
                let m = cavity_metrics(y.as_ref(), *a, r_n)?;
                trace_identity = trace_identity
                    .max((m_n.perimeter - m.perimeter).abs() / m.perimeter.abs().max(1e-300))
                    .max((m_n.volume - m.volume).abs() / m.volume.abs().max(1e-300));
            }
            let annular_energy = points.iter().map(|a| annulus_energy(&y_n, *a, eps, density)).sum();
            let gap = (energy.total - limit_total).abs();
            Ok(RecoveryRow {
                eps,
                n,
                r_n,
                energy,
                limit_total,
                gap,
                relative_gap: gap / limit_total.abs().max(1e-300),
                trace_identity,
                annular_energy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let convergence_checked = !limit.conv_perimeter_violated();
    if !convergence_checked {
        log::warn!(
            "perimeter convergence fails for {}; energy convergence is not asserted",
            y.name()
        );
    }
    Ok(RecoveryTable {
        rows,
        limit,
        convergence_checked,
    })
}

fn annulus_energy(y: &dyn Deformation, a: Vec2, eps: f64, density: &Density) -> f64 {
    let ring = QBall::new(a, 2.0 * eps, QNorm::Two);
    let f = |x: Vec2| density.w(&y.grad(x));
    let breaks = |pole: Vec2| Breaks {
        radial: y.radial_breakpoints(pole),
        angular: y.angular_breakpoints(pole),
    };
    integrate_perforated(&f, &ring, &[a], eps, &breaks, ENERGY_TOL).value
}

/// Analytic cavities of `y` at the points, when known.
pub fn analytic_cavities(y: &dyn Deformation, points: &[Vec2]) -> Vec<Option<CavityLimit>> {
    points.iter().map(|a| y.analytic_cavity(*a)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformation::fd_gradient;
    use approx::assert_relative_eq;

    #[test]
    fn identity_target_gives_identity() {
        let phi = build_phi(0.1, 0.1, 3).unwrap();
        for i in 0..=1000 {
            let t = 0.3 * i as f64 / 1000.0;
            assert!((phi.eval(t) - t).abs() <= 1e-12);
            assert!((phi.deriv(t) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn phi_hits_target_and_stays_close() {
        let phi = build_phi(0.1, 0.1005, 10).unwrap();
        assert_eq!(phi.eval(0.1), 0.1005);
        assert!(phi.uniform_deviation(10_000) <= 0.1);
        for t in [0.2, 0.25, 1.0] {
            assert_eq!(phi.eval(t), t);
        }
        assert_eq!(phi.eval(0.0), 0.0);
        assert!(build_phi(0.1, 0.11, 10).is_err());
    }

    #[test]
    fn phi_derivative_is_consistent() {
        let phi = build_phi(0.2, 0.2 * (1.0 - 1.0 / 12.0), 3).unwrap();
        let h = 1e-7;
        for i in 1..600 {
            let t = 0.5 * i as f64 / 600.0;
            let fd = (phi.eval(t + h) - phi.eval(t - h)) / (2.0 * h);
            assert!((fd - phi.deriv(t)).abs() < 1e-6, "t = {t}");
            assert!(phi.deriv(t) > 0.0);
        }
    }

    #[test]
    fn push_fixes_flaws_and_determinant() {
        let phi = build_phi(0.1, 0.1 * (1.0 + 1.0 / 16.0), 2).unwrap();
        let a = Vec2::new(0.1, -0.05);
        let push = build_push(phi.clone(), &[a], QBall::unit(QNorm::Two)).unwrap();
        assert_eq!(push.eval(a), a);
        let x = a + Vec2::polar(0.7) * 0.1;
        assert_relative_eq!(push.eval(x).dist(a), phi.r_n, max_relative = 1e-14);
        let det = push.grad(x).det();
        assert_relative_eq!(det, phi.r_n / 0.1 * phi.deriv(0.1), max_relative = 1e-12);
        assert_relative_eq!(fd_gradient(&push, x, 1e-6).det(), det, max_relative = 1e-8);
        let far = Vec2::new(0.6, 0.3);
        assert_eq!(push.eval(far), far);
        assert!(build_push(phi, &[a, a + Vec2::new(0.3, 0.0)], QBall::unit(QNorm::Two)).is_err());
    }
}
