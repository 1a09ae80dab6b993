use casimir_ffi::*;
use std::ffi::{CStr, CString};
use std::f64::consts::PI;
use std::ptr;

fn last_error() -> String {
    unsafe { CStr::from_ptr(casimir_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn one_d_energy_and_force() {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(casimir_config_two_intervals(0.0, 1.0, 2.0, 3.0, &mut cfg), CasimirStatus::Ok);
        assert_eq!(casimir_config_len(cfg), 2);
        let (mut e, mut err) = (0.0, 0.0);
        assert_eq!(casimir_energy(cfg, 0, 1e-10, &mut e, &mut err), CasimirStatus::Ok);
        assert!((e + PI / 24.0).abs() < 1e-9);
        for route in [
            CasimirForceRoute::FiniteDifference,
            CasimirForceRoute::SurfaceIntegral,
            CasimirForceRoute::BoundaryHadamard,
        ] {
            let mut f = [0.0; 2];
            assert_eq!(casimir_force(cfg, 1, route, 0, 1e-10, f.as_mut_ptr(), ptr::null_mut()), CasimirStatus::Ok);
            assert!((f[0] + PI / 24.0).abs() < 1e-7, "{route:?}: {}", f[0]);
        }
        let mut x = 0.0;
        assert_eq!(casimir_xi(cfg, 1.0, 0, &mut x), CasimirStatus::Ok);
        assert!((x - (-(-2.0f64).exp()).ln_1p()).abs() < 1e-14);
        casimir_config_free(cfg);
    }
}

#[test]
fn errors_map_to_status_codes() {
    let mut cfg = ptr::null_mut();
    unsafe {
        assert_eq!(casimir_config_two_intervals(0.0, 1.0, 0.5, 3.0, &mut cfg), CasimirStatus::Geometry);
        assert!(cfg.is_null());
        assert!(last_error().contains("overlap"));
        let mut x = 0.0;
        assert_eq!(casimir_xi(ptr::null(), 1.0, 0, &mut x), CasimirStatus::NullPointer);
        let bad = CString::new("schema_version = 1\ndimension = 2\n[[obstacles]]\nkind = \"square\"\n").unwrap();
        assert_eq!(casimir_config_parse(bad.as_ptr(), 0, &mut cfg), CasimirStatus::Parse);
        assert!(last_error().contains("square"));
        assert_eq!(casimir_config_two_discs(1.0, 1.0, 3.0, &mut cfg), CasimirStatus::Ok);
        assert_eq!(last_error(), "");
        assert_eq!(casimir_xi(cfg, -1.0, 32, &mut x), CasimirStatus::InvalidArgument);
        casimir_config_free(cfg);
        casimir_config_free(ptr::null_mut());
    }
}

#[test]
fn parse_json_and_mass() {
    let text = CString::new(
        r#"{"schema_version": 1, "dimension": 1, "obstacles": [{"kind": "interval", "a": 0, "b": 1}, {"kind": "interval", "a": 2, "b": 3}]}"#,
    )
    .unwrap();
    let (mut cfg, mut heavy) = (ptr::null_mut(), ptr::null_mut());
    unsafe {
        assert_eq!(casimir_config_parse(text.as_ptr(), 1, &mut cfg), CasimirStatus::Ok, "{}", last_error());
        assert_eq!(casimir_config_with_mass(cfg, 1.0, &mut heavy), CasimirStatus::Ok);
        let (mut e0, mut e1) = (0.0, 0.0);
        casimir_energy(cfg, 0, 1e-10, &mut e0, ptr::null_mut());
        casimir_energy(heavy, 0, 1e-10, &mut e1, ptr::null_mut());
        assert!(e0 < e1 && e1 < 0.0);
        casimir_config_free(cfg);
        casimir_config_free(heavy);
    }
    assert!(!unsafe { CStr::from_ptr(casimir_version()) }.to_bytes().is_empty());
}

/// The generated header compiles as C and as C++.
#[test]
fn header_compiles() {
    let inc = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"casimir.h\"\nint main(void) { CasimirConfig *c = 0; CasimirStatus s = casimir_config_two_discs(1.0, 1.0, 3.0, &c); casimir_config_free(c); return (int)s; }\n",
    )
    .unwrap();
    for (compiler, extra) in [("cc", vec!["-std=c99"]), ("c++", vec!["-x", "c++"])] {
        let out = match std::process::Command::new(compiler)
            .args(&extra)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-I", inc])
            .arg(&src)
            .output()
        {
            Ok(o) => o,
            Err(_) => {
                eprintln!("{compiler} not available; skipping");
                continue;
            }
        };
        assert!(out.status.success(), "{compiler}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
