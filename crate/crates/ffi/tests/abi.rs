use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use bvmlab_ffi::*;

fn last_error() -> String {
    let p = bvm_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn normal_density(mean: f64) -> *mut BvmDensity {
    let grid: Vec<f64> = (0..4001).map(|i| -8.0 + 17.0 * i as f64 / 4000.0).collect();
    let values: Vec<f64> = grid.iter().map(|x| (-(x - mean) * (x - mean) / 2.0).exp()).collect();
    let mut d = ptr::null_mut();
    let s = unsafe { bvm_density_new(grid.as_ptr(), values.as_ptr(), grid.len(), &mut d) };
    assert_eq!(s, BvmStatus::Ok);
    d
}

#[test]
fn density_roundtrip_and_tv() {
    let p = normal_density(0.0);
    let q = normal_density(1.0);
    let (mut m, mut v, mut tv, mut med) = (0.0, 0.0, 0.0, 0.0);
    unsafe {
        assert_eq!(bvm_density_moments(p, &mut m, &mut v), BvmStatus::Ok);
        assert_eq!(bvm_density_tv(p, q, &mut tv), BvmStatus::Ok);
        assert_eq!(bvm_density_quantile(q, 0.5, &mut med), BvmStatus::Ok);
    }
    assert!(m.abs() < 1e-6 && (v - 1.0).abs() < 1e-5);
    assert!((tv - 0.382925).abs() < 1e-4, "{tv}");
    assert!((med - 1.0).abs() < 1e-4);
    let mut self_tv = 1.0;
    unsafe {
        assert_eq!(bvm_density_tv_normal(p, 0.0, 1.0, &mut self_tv), BvmStatus::Ok);
        bvm_density_free(p);
        bvm_density_free(q);
    }
    assert!(self_tv < 1e-5);
}

#[test]
fn invalid_arguments_are_reported() {
    let grid = [0.0, 1.0, 2.0];
    let negative = [1.0, -1.0, 1.0];
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(bvm_density_new(grid.as_ptr(), negative.as_ptr(), 3, &mut d), BvmStatus::InvalidArgument);
        assert!(d.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(bvm_density_new(ptr::null(), negative.as_ptr(), 3, &mut d), BvmStatus::NullPointer);
        let mut out = 0.0;
        assert_eq!(bvm_density_quantile(ptr::null(), 0.5, &mut out), BvmStatus::NullPointer);
        let p = normal_density(0.0);
        assert_eq!(bvm_density_quantile(p, 1.5, &mut out), BvmStatus::InvalidArgument);
        assert_eq!(bvm_density_tv_normal(p, 0.0, -1.0, &mut out), BvmStatus::InvalidArgument);
        bvm_density_free(p);
        // freeing null is a no-op
        bvm_density_free(ptr::null_mut());
        bvm_config_free(ptr::null_mut());
        bvm_output_free(ptr::null_mut());
    }
}

#[test]
fn config_errors_map_to_config_status() {
    let mut c = ptr::null_mut();
    let bad = CString::new(r#"{"experiment":"plr_bvm","n_values":[],"replications":1,"seed":1}"#).unwrap();
    let s = unsafe { bvm_config_from_json(bad.as_ptr(), &mut c) };
    assert_eq!(s, BvmStatus::ConfigError);
    assert!(last_error().contains("n_values"));
    let junk = CString::new("not json").unwrap();
    assert_eq!(unsafe { bvm_config_from_json(junk.as_ptr(), &mut c) }, BvmStatus::ConfigError);
    assert!(c.is_null());
}

#[test]
fn experiment_runs_and_reports() {
    let json = CString::new(r#"{"experiment":"parametric_demo","n_values":[4,16],"replications":3,"seed":5}"#).unwrap();
    let mut c = ptr::null_mut();
    let mut o = ptr::null_mut();
    let mut rows = 0usize;
    let mut needed = 0usize;
    unsafe {
        assert_eq!(bvm_config_from_json(json.as_ptr(), &mut c), BvmStatus::Ok);
        assert_eq!(bvm_config_set_seed(c, 6), BvmStatus::Ok);
        assert_eq!(bvm_run(c, 1, &mut o), BvmStatus::Ok);
        assert_eq!(bvm_output_rows(o, &mut rows), BvmStatus::Ok);
        assert_eq!(bvm_output_csv(o, ptr::null_mut(), 0, &mut needed), BvmStatus::BufferTooSmall);
        let mut buf = vec![0 as std::ffi::c_char; needed];
        assert_eq!(bvm_output_csv(o, buf.as_mut_ptr(), buf.len(), ptr::null_mut()), BvmStatus::Ok);
        let csv = CStr::from_ptr(buf.as_ptr()).to_str().unwrap().to_owned();
        assert!(csv.starts_with("n,replication,tv_to_limit"));
        assert_eq!(csv.lines().count(), rows + 1);

        assert_eq!(bvm_output_summary_json(o, ptr::null_mut(), 0, &mut needed), BvmStatus::BufferTooSmall);
        let mut buf = vec![0 as std::ffi::c_char; needed];
        assert_eq!(bvm_output_summary_json(o, buf.as_mut_ptr(), buf.len(), ptr::null_mut()), BvmStatus::Ok);
        let summary: serde_json::Value = serde_json::from_str(CStr::from_ptr(buf.as_ptr()).to_str().unwrap()).unwrap();
        assert_eq!(summary["seed"], 6);
        assert_eq!(summary["summary"].as_array().unwrap().len(), 2);

        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path();
        let cdir = CString::new(dir.to_str().unwrap()).unwrap();
        assert_eq!(bvm_output_write(o, cdir.as_ptr()), BvmStatus::Ok);
        assert!(dir.join("report.csv").exists());
        assert!(dir.join("figures/parametric_panels.svg").exists());

        bvm_output_free(o);
        bvm_config_free(c);
    }
    assert_eq!(rows, 6);
}

#[test]
fn version_is_nul_terminated() {
    let v = unsafe { CStr::from_ptr(bvm_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/bvmlab.h");
    let src = std::env::temp_dir().join(format!("bvmlab_hdr_{}.c", std::process::id()));
    std::fs::write(
        &src,
        format!(
            "#include \"{header}\"\nint main(void) {{ BvmDensity *d = 0; double m, v; \
             return bvm_density_moments(d, &m, &v) == BVM_STATUS_NULL_POINTER ? 0 : 1; }}\n"
        ),
    )
    .unwrap();
    let status = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only"]).arg(&src).status();
    std::fs::remove_file(&src).ok();
    match status {
        Ok(s) => assert!(s.success(), "generated header does not compile"),
        Err(_) => eprintln!("no C compiler found; header check skipped"),
    }
}
