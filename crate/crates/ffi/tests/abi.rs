use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use cavicore_ffi::*;

fn last_error() -> String {
    let p = cav_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn deformation(key: &str) -> *mut CavDeformation {
    let key = CString::new(key).unwrap();
    let mut y = ptr::null_mut();
    assert_eq!(
        unsafe { cav_deformation_catalog(key.as_ptr(), f64::NAN, &mut y) },
        CavStatus::Ok
    );
    y
}

#[test]
fn radial_cavity_through_the_abi() {
    let y = deformation("radial");
    let mut v = CavVec2::default();
    assert_eq!(
        unsafe { cav_deformation_eval(y, CavVec2 { x: 0.5, y: 0.0 }, &mut v) },
        CavStatus::Ok
    );
    assert!((v.x - 0.75).abs() < 1e-15 && v.y == 0.0);
    let mut g = CavMat2::default();
    assert_eq!(
        unsafe { cav_deformation_grad(y, CavVec2 { x: 0.3, y: 0.2 }, &mut g) },
        CavStatus::Ok
    );
    assert!(g.a11 * g.a22 - g.a12 * g.a21 > 0.0);
    let mut c = CavCavity::default();
    assert_eq!(
        unsafe { cav_cavity_metrics(y, CavVec2::default(), 0.2, &mut c) },
        CavStatus::Ok
    );
    let direct = cavicore::cavity::cavity_metrics(
        cavicore::deformation::catalog("radial", None).unwrap().as_ref(),
        cavicore::Vec2::ZERO,
        0.2,
    )
    .unwrap();
    assert_eq!(c.volume, direct.volume);
    assert_eq!(c.perimeter, direct.perimeter);
    assert!(c.converged);
    unsafe { cav_deformation_free(y) };
}

#[test]
fn energies_through_the_abi() {
    let y = deformation("radial");
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { cav_density_power(1.2, 1.2, &mut w) }, CavStatus::Ok);
    let origin = [CavVec2::default()];
    let mut limit = CavEnergy::default();
    assert_eq!(
        unsafe { cav_limit_energy(y, w, origin.as_ptr(), 1, 1.0, 1.0, &mut limit) },
        CavStatus::Ok
    );
    assert!(!limit.conv_perimeter_violated);
    assert!((limit.volume - 0.5).abs() < 1e-4);
    let mut reg = CavEnergy::default();
    assert_eq!(
        unsafe { cav_regularized_energy(y, w, origin.as_ptr(), 1, 0.1, 1.0, 1.0, &mut reg) },
        CavStatus::Ok
    );
    assert!((reg.total - (reg.elastic + reg.volume + reg.perimeter)).abs() < 1e-12 * reg.total);
    let mut f = 0.0;
    assert_eq!(
        unsafe {
            cav_density_eval(
                w,
                CavMat2 {
                    a11: 1.0,
                    a12: 0.0,
                    a21: 0.0,
                    a22: 1.0,
                },
                &mut f,
            )
        },
        CavStatus::Ok
    );
    assert!((f - (2f64.powf(0.6) + 2.0)).abs() < 1e-12);
    unsafe {
        cav_density_free(w);
        cav_deformation_free(y);
    }
}

#[test]
fn radial_minimizer_through_the_abi() {
    let mut w = ptr::null_mut();
    assert_eq!(unsafe { cav_density_default(2.0, &mut w) }, CavStatus::Ok);
    let mut m = CavRadialMinimum::default();
    assert_eq!(
        unsafe { cav_minimize_radial(w, 0.1, 1.0, 2.0, 1.0, 1.0, 16, &mut m) },
        CavStatus::Ok
    );
    assert!(m.energy.is_finite() && m.cavity_radius >= 0.0 && m.iterations > 0);
    assert_eq!(
        unsafe { cav_minimize_radial(w, 2.0, 1.0, 2.0, 1.0, 1.0, 16, &mut m) },
        CavStatus::InvalidArgument
    );
    assert!(last_error().contains("eps"));
    unsafe { cav_density_free(w) };
}

#[test]
fn errors_are_reported() {
    let key = CString::new("nope").unwrap();
    let mut y = ptr::null_mut();
    assert_eq!(
        unsafe { cav_deformation_catalog(key.as_ptr(), f64::NAN, &mut y) },
        CavStatus::InvalidArgument
    );
    assert!(last_error().contains("unknown example"));
    assert!(y.is_null());

    let mut w = ptr::null_mut();
    assert_eq!(unsafe { cav_density_default(1.5, &mut w) }, CavStatus::InvalidArgument);
    assert_eq!(
        unsafe { cav_deformation_catalog(ptr::null(), 0.5, &mut y) },
        CavStatus::NullPointer
    );

    let y = deformation("radial");
    let mut v = CavVec2::default();
    assert_eq!(
        unsafe { cav_deformation_eval(y, CavVec2::default(), &mut v) },
        CavStatus::SingularPoint
    );
    assert_eq!(
        unsafe { cav_deformation_eval(y, CavVec2 { x: 0.1, y: 0.1 }, ptr::null_mut()) },
        CavStatus::NullPointer
    );
    assert_eq!(
        unsafe { cav_deformation_eval(y, CavVec2 { x: 0.1, y: 0.1 }, &mut v) },
        CavStatus::Ok
    );
    assert!(cav_last_error().is_null());
    unsafe { cav_deformation_free(y) };

    let version = unsafe { CStr::from_ptr(cav_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/cavicore.h");
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-x", "c", header])
        .output()
    else {
        eprintln!("no C compiler; skipping");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
