use std::ffi::{CStr, CString};
use std::ptr;

use qhj_ffi::*;

fn last_error() -> String {
    let p = qhj_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn harmonic_round_trip() {
    unsafe {
        let mut v = ptr::null_mut();
        assert_eq!(qhj_potential_harmonic(1.0, &mut v), QhjStatus::Ok);
        let mut k = ptr::null_mut();
        let t = std::f64::consts::FRAC_PI_4;
        assert_eq!(qhj_propagator_closed_form(v, t, 1.0, -8.0, 8.0, 256, &mut k), QhjStatus::Ok);
        let mut psi = ptr::null_mut();
        assert_eq!(qhj_wavefunction_gaussian(-8.0, 8.0, 256, 1.0, 0.0, 0.5f64.sqrt(), 1.0, &mut psi), QhjStatus::Ok);
        let mut out = ptr::null_mut();
        assert_eq!(qhj_propagator_apply(k, psi, &mut out), QhjStatus::Ok);
        let n = qhj_wavefunction_len(out);
        assert_eq!(n, 256);
        let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
        assert_eq!(qhj_wavefunction_amplitudes(out, re.as_mut_ptr(), im.as_mut_ptr(), n), QhjStatus::Ok);
        let norm: f64 = re.iter().zip(&im).map(|(a, b)| a * a + b * b).sum::<f64>() * 16.0 / 255.0;
        assert!((norm - 1.0).abs() < 1e-6, "{norm}");

        let mut rep = QhjOracleReport::default();
        assert_eq!(qhj_compare_oracle(v, k, psi, &mut rep), QhjStatus::Ok);
        assert!(rep.l2_error < 1e-4);

        qhj_wavefunction_free(out);
        qhj_wavefunction_free(psi);
        qhj_propagator_free(k);
        qhj_potential_free(v);
    }
}

#[test]
fn conversion_and_heisenberg() {
    unsafe {
        let mut v = ptr::null_mut();
        assert_eq!(qhj_potential_harmonic(1.0, &mut v), QhjStatus::Ok);
        let mut f1 = ptr::null_mut();
        assert_eq!(qhj_generating_closed_form(v, 1, 0.7, 1.0, &mut f1), QhjStatus::Ok);
        let mut f2 = ptr::null_mut();
        assert_eq!(qhj_generating_convert(f1, 2, &mut f2), QhjStatus::Ok);
        let mut c = [0.0; 12];
        assert_eq!(qhj_generating_coefficients(f2, c.as_mut_ptr()), QhjStatus::Ok);
        assert!((c[0] + 0.7f64.tan()).abs() < 1e-10);
        assert!((c[2] - 1.0 / 0.7f64.cos()).abs() < 1e-10);

        let mut h = [0.0; 6];
        assert_eq!(qhj_heisenberg(v, 0.7, 1.0, h.as_mut_ptr()), QhjStatus::Ok);
        assert!((h[0] - 0.7f64.cos()).abs() < 1e-10 && (h[1] - 0.7f64.sin()).abs() < 1e-10);
        qhj_generating_free(f1);
        qhj_generating_free(f2);
        qhj_potential_free(v);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut v = ptr::null_mut();
        assert_eq!(qhj_potential_harmonic(-1.0, &mut v), QhjStatus::InvalidParameter);
        assert!(last_error().contains("omega"));
        assert!(v.is_null());

        assert_eq!(qhj_potential_harmonic(1.0, &mut v), QhjStatus::Ok);
        let mut f = ptr::null_mut();
        assert_eq!(qhj_generating_closed_form(v, 1, std::f64::consts::PI, 1.0, &mut f), QhjStatus::Caustic);
        assert_eq!(qhj_generating_closed_form(v, 9, 1.0, 1.0, &mut f), QhjStatus::InvalidParameter);
        assert_eq!(qhj_heisenberg(ptr::null(), 1.0, 1.0, ptr::null_mut()), QhjStatus::NullPointer);
        assert_eq!(qhj_potential_constant_force(1.0, ptr::null_mut()), QhjStatus::NullPointer);

        let cubic = [0.0, 0.0, 0.5, 0.1];
        let mut c = ptr::null_mut();
        assert_eq!(qhj_potential_polynomial(cubic.as_ptr(), 4, &mut c), QhjStatus::Ok);
        let mut k = ptr::null_mut();
        assert_eq!(qhj_propagator_closed_form(c, 1.0, 1.0, -5.0, 5.0, 64, &mut k), QhjStatus::UnsupportedPotential);
        qhj_potential_free(c);
        qhj_potential_free(v);
        qhj_potential_free(ptr::null_mut());
    }
}

#[test]
fn runs_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"scenario": "heisenberg", "potential": {"kind": "constant-force", "a": 1.0}, "times": [0.5, 1.0], "hbar": 1.0}"#,
    )
    .unwrap();
    let path = CString::new(cfg.to_str().unwrap()).unwrap();
    let out = CString::new(dir.path().join("out").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { qhj_run_config(path.as_ptr(), out.as_ptr(), 0) }, QhjStatus::Ok);
    assert!(dir.path().join("out/manifest.json").exists());
    let bad = CString::new(dir.path().join("missing.json").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { qhj_run_config(bad.as_ptr(), out.as_ptr(), 0) }, QhjStatus::Config);
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/qhj.h");
    let src = include_str!("../src/lib.rs");
    let mut count = 0;
    for line in src.lines() {
        if let Some(rest) = line.split("extern \"C\" fn ").nth(1) {
            let name = rest.split('(').next().unwrap();
            assert!(header.contains(&format!("{name}(")), "{name} missing from header");
            count += 1;
        }
    }
    assert!(count >= 15);
    assert!(CStr::from_bytes_until_nul(unsafe { std::slice::from_raw_parts(qhj_version() as *const u8, 16) }).is_ok());
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = std::process::Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    assert!(cc.status.success());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("probe.c");
    std::fs::write(
        &src,
        "#include \"qhj.h\"\nint main(void) {\n  QhjPotential *v = 0;\n  QhjStatus s = qhj_potential_harmonic(1.0, &v);\n  qhj_potential_free(v);\n  return s == QHJ_STATUS_OK ? 0 : 1;\n}\n",
    )
    .unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let out = std::process::Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", include])
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
