//! C ABI over `cavicore`.
//!
//! Every entry point returns a [`CavStatus`]; results are written through
//! out-pointers. On failure the message is kept per thread and can be read
//! with [`cav_last_error`]. Handles are opaque and freed with the matching
//! `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use cavicore::cavity::cavity_metrics;
use cavicore::deformation::{catalog, Deformation};
use cavicore::energy::{limit_energy, regularized_energy, Density, EnergyBreakdown, Lambdas};
use cavicore::geometry::{Confinement, FlawConfig, Mat2, Vec2};
use cavicore::minimize::{minimize_radial, RadialProblem};
use cavicore::recovery::LIMIT_RADII;
use cavicore::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CavStatus {
    Ok = 0,
    InvalidArgument = 1,
    SingularMatrix = 2,
    InvalidFlawConfig = 3,
    OutsideDomain = 4,
    SingularPoint = 5,
    NearBoundary = 6,
    Numerical = 7,
    Io = 8,
    NullPointer = 9,
    Panic = 10,
}

impl From<&Error> for CavStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => CavStatus::InvalidArgument,
            Error::SingularMatrix => CavStatus::SingularMatrix,
            Error::InvalidFlawConfig(_) => CavStatus::InvalidFlawConfig,
            Error::OutsideDomain { .. } => CavStatus::OutsideDomain,
            Error::SingularPoint { .. } => CavStatus::SingularPoint,
            Error::NearBoundary { .. } => CavStatus::NearBoundary,
            Error::Numerical(_) => CavStatus::Numerical,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => CavStatus::Io,
        }
    }
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CavVec2 {
    pub x: f64,
    pub y: f64,
}

/// Row-major 2×2 matrix.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CavMat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CavCavity {
    pub volume: f64,
    pub signed_volume: f64,
    pub perimeter: f64,
    pub converged: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CavEnergy {
    pub elastic: f64,
    pub volume: f64,
    pub perimeter: f64,
    pub total: f64,
    /// Set when the limit of the trace perimeters differs from the perimeter
    /// of the limit cavity. Always false for regularized energies.
    pub conv_perimeter_violated: bool,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CavRadialMinimum {
    pub energy: f64,
    pub cavity_radius: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Opaque deformation handle.
pub struct CavDeformation(Arc<dyn Deformation>);

/// Opaque stored-energy density handle.
pub struct CavDensity(Density);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), (CavStatus, String)>) -> CavStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CavStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(msg);
            CavStatus::Panic
        }
    }
}

fn lib(e: Error) -> (CavStatus, String) {
    (CavStatus::from(&e), e.to_string())
}

fn null(what: &str) -> (CavStatus, String) {
    (CavStatus::NullPointer, format!("{what} is null"))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, (CavStatus, String)> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write<T>(p: *mut T, v: T, what: &str) -> Result<(), (CavStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn read_points(p: *const CavVec2, n: usize) -> Result<Vec<Vec2>, (CavStatus, String)> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null("points"));
    }
    Ok(std::slice::from_raw_parts(p, n)
        .iter()
        .map(|v| Vec2::new(v.x, v.y))
        .collect())
}

fn energy_out(b: &EnergyBreakdown, violated: bool) -> CavEnergy {
    CavEnergy {
        elastic: b.elastic,
        volume: b.volume,
        perimeter: b.perimeter,
        total: b.total,
        conv_perimeter_violated: violated,
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn cav_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cav_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Catalog deformation by key (`radial`, `change-of-reference`,
/// `superposition`, `spike`). A NaN `b` selects the default parameter.
///
/// # Safety
/// `key` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cav_deformation_catalog(
    key: *const c_char,
    b: f64,
    out: *mut *mut CavDeformation,
) -> CavStatus {
    guard(|| {
        if key.is_null() {
            return Err(null("key"));
        }
        let key = CStr::from_ptr(key)
            .to_str()
            .map_err(|_| (CavStatus::InvalidArgument, "key is not UTF-8".to_string()))?;
        let y = catalog(key, (!b.is_nan()).then_some(b)).map_err(lib)?;
        write(out, Box::into_raw(Box::new(CavDeformation(y))), "out")
    })
}

/// # Safety
/// `y` must be null or a handle from [`cav_deformation_catalog`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cav_deformation_free(y: *mut CavDeformation) {
    if !y.is_null() {
        drop(Box::from_raw(y));
    }
}

/// # Safety
/// `y` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cav_deformation_eval(y: *const CavDeformation, x: CavVec2, out: *mut CavVec2) -> CavStatus {
    guard(|| {
        let y = deref(y, "deformation")?;
        let v = y.0.try_eval(Vec2::new(x.x, x.y)).map_err(lib)?;
        write(out, CavVec2 { x: v.x, y: v.y }, "out")
    })
}

/// # Safety
/// `y` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cav_deformation_grad(y: *const CavDeformation, x: CavVec2, out: *mut CavMat2) -> CavStatus {
    guard(|| {
        let y = deref(y, "deformation")?;
        let g: Mat2 = y.0.try_grad(Vec2::new(x.x, x.y)).map_err(lib)?;
        write(
            out,
            CavMat2 {
                a11: g.a11,
                a12: g.a12,
                a21: g.a21,
                a22: g.a22,
            },
            "out",
        )
    })
}

/// Volume and perimeter of the image of the circle `S(a, eps)`.
///
/// # Safety
/// `y` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cav_cavity_metrics(
    y: *const CavDeformation,
    a: CavVec2,
    eps: f64,
    out: *mut CavCavity,
) -> CavStatus {
    guard(|| {
        let y = deref(y, "deformation")?;
        let m = cavity_metrics(y.0.as_ref(), Vec2::new(a.x, a.y), eps).map_err(lib)?;
        write(
            out,
            CavCavity {
                volume: m.volume,
                signed_volume: m.signed_volume,
                perimeter: m.perimeter,
                converged: m.converged,
            },
            "out",
        )
    })
}

/// `|F|^p + (det F - 1)² + 1/det F`, `p ≥ 2`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cav_density_default(p: f64, out: *mut *mut CavDensity) -> CavStatus {
    guard(|| {
        let d = Density::default_density(p).map_err(lib)?;
        write(out, Box::into_raw(Box::new(CavDensity(d))), "out")
    })
}

/// `|F|^p + (det F)^q + 1/det F`, `p, q > 1`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cav_density_power(p: f64, q: f64, out: *mut *mut CavDensity) -> CavStatus {
    guard(|| {
        let d = Density::power(p, q).map_err(lib)?;
        write(out, Box::into_raw(Box::new(CavDensity(d))), "out")
    })
}

/// # Safety
/// `w` must be null or a density handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cav_density_free(w: *mut CavDensity) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// `W(F)`; `+∞` when `det F ≤ 0`.
///
/// # Safety
/// `w` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cav_density_eval(w: *const CavDensity, f: CavMat2, out: *mut f64) -> CavStatus {
    guard(|| {
        let w = deref(w, "density")?;
        write(out, w.0.w(&Mat2::new(f.a11, f.a12, f.a21, f.a22)), "out")
    })
}

/// Regularized energy of `y` with flaws `points[0..n]` of core radius `eps`
/// on the deformation's own domain.
///
/// # Safety
/// Handles must be live, `points` must hold `n` entries and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cav_regularized_energy(
    y: *const CavDeformation,
    w: *const CavDensity,
    points: *const CavVec2,
    n: usize,
    eps: f64,
    lambda_v: f64,
    lambda_p: f64,
    out: *mut CavEnergy,
) -> CavStatus {
    guard(|| {
        let y = deref(y, "deformation")?;
        let w = deref(w, "density")?;
        let pts = read_points(points, n)?;
        let dom = y.0.domain();
        let spread = pts.iter().map(|a| a.dist(dom.outer.center)).fold(0.0, f64::max);
        let cfg = FlawConfig::new(
            pts,
            eps,
            n.max(1),
            Confinement::Disk {
                center: dom.outer.center,
                radius: spread,
            },
        );
        let lambdas = Lambdas::new(lambda_v, lambda_p).map_err(lib)?;
        let e = regularized_energy(y.0.as_ref(), &cfg, &dom, &w.0, lambdas).map_err(lib)?;
        write(out, energy_out(&e.breakdown, false), "out")
    })
}

/// Limit energy of `y` with flaws `points[0..n]`, cavities extrapolated from
/// circles of radii 0.2, 0.1, 0.05 and 0.025.
///
/// # Safety
/// Handles must be live, `points` must hold `n` entries and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cav_limit_energy(
    y: *const CavDeformation,
    w: *const CavDensity,
    points: *const CavVec2,
    n: usize,
    lambda_v: f64,
    lambda_p: f64,
    out: *mut CavEnergy,
) -> CavStatus {
    guard(|| {
        let y = deref(y, "deformation")?;
        let w = deref(w, "density")?;
        let pts = read_points(points, n)?;
        let lambdas = Lambdas::new(lambda_v, lambda_p).map_err(lib)?;
        let e = limit_energy(y.0.as_ref(), &pts, &y.0.domain(), &w.0, lambdas, &LIMIT_RADII).map_err(lib)?;
        write(out, energy_out(&e.breakdown, e.conv_perimeter_violated()), "out")
    })
}

/// Minimizes the radially reduced energy on the annulus `eps < |x| < R`
/// with `ρ(R) = boundary_value`, using `k` profile segments.
///
/// # Safety
/// `w` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cav_minimize_radial(
    w: *const CavDensity,
    eps: f64,
    outer_radius: f64,
    boundary_value: f64,
    lambda_v: f64,
    lambda_p: f64,
    k: usize,
    out: *mut CavRadialMinimum,
) -> CavStatus {
    guard(|| {
        let w = deref(w, "density")?;
        let lambdas = Lambdas::new(lambda_v, lambda_p).map_err(lib)?;
        let prob = RadialProblem::new(eps, outer_radius, boundary_value, w.0, lambdas, k).map_err(lib)?;
        let m = minimize_radial(&prob).map_err(lib)?;
        write(
            out,
            CavRadialMinimum {
                energy: m.breakdown.total,
                cavity_radius: m.profile.cavity_radius(),
                iterations: m.iterations,
                converged: m.converged(),
            },
            "out",
        )
    })
}
