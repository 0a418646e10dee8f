use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use gammacop_ffi::*;

const BB10: &str = r#"{"n":2,"coeffs":{"1":1,"2":1,"1,2":0.5},"lambda":1,"lambdas":[2,3]}"#;

fn last_error() -> String {
    unsafe { CStr::from_ptr(gc_last_error_message()).to_string_lossy().into_owned() }
}

fn model(json: &str) -> *mut GcModel {
    let text = CString::new(json).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { gc_model_from_json(text.as_ptr(), &mut m) }, GcStatus::Ok, "{}", last_error());
    m
}

#[test]
fn model_lifecycle_and_queries() {
    let m = model(BB10);
    unsafe {
        assert_eq!(gc_model_dimension(m), 2);
        let mut div = false;
        assert_eq!(gc_model_check_divisible(m, 1e-12, &mut div), GcStatus::Ok);
        assert!(div);
        let x = [1.0, 2.0];
        let mut lp = 0.0;
        assert_eq!(gc_model_logpdf(m, x.as_ptr(), 2, &mut lp), GcStatus::Ok);
        let direct = gammacop::densities::model_logpdf(
            &gammacop::polynomial::AffineModel::from_json_str(BB10).unwrap(),
            &x,
            &Default::default(),
        )
        .unwrap();
        assert_eq!(lp, direct);
        gc_model_free(m);
        gc_model_free(ptr::null_mut());
        assert_eq!(gc_model_dimension(ptr::null()), 0);
    }
}

#[test]
fn copula_handle() {
    let m = model(BB10);
    unsafe {
        let mut c = ptr::null_mut();
        assert_eq!(gc_copula_new(m, false, &mut c), GcStatus::Ok);
        let v = [0.3, 0.6];
        let (mut cdf, mut pdf, mut cond, mut tau, mut rho) = (0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(gc_copula_cdf(c, v.as_ptr(), 2, &mut cdf), GcStatus::Ok);
        assert_eq!(gc_copula_pdf(c, v.as_ptr(), 2, &mut pdf), GcStatus::Ok);
        assert_eq!(gc_copula_conditional(c, 0.3, 0.6, &mut cond), GcStatus::Ok);
        assert_eq!(gc_kendall_tau(c, &mut tau), GcStatus::Ok);
        assert_eq!(gc_spearman_rho(c, &mut rho), GcStatus::Ok);
        assert!(cdf > 0.18 && cdf < 0.3 && pdf > 0.0 && (0.0..1.0).contains(&cond));
        assert!(tau > 0.0 && rho > tau);
        let bad = [1.5, 0.5];
        assert_eq!(gc_copula_cdf(c, bad.as_ptr(), 2, &mut cdf), GcStatus::Argument);
        assert!(!last_error().is_empty());
        gc_copula_free(c);
        gc_model_free(m);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut m = ptr::null_mut();
        let bad = CString::new(r#"{"n":2,"coeffs":{"":0.9},"lambda":1}"#).unwrap();
        assert_eq!(gc_model_from_json(bad.as_ptr(), &mut m), GcStatus::Parse);
        assert!(m.is_null());
        assert!(last_error().contains("constant term"), "{}", last_error());
        assert_eq!(gc_model_from_json(ptr::null(), &mut m), GcStatus::NullPointer);
        let nd = model(r#"{"n":2,"coeffs":{"1":1,"2":1,"1,2":2},"lambda":1}"#);
        let mut c = ptr::null_mut();
        assert_eq!(gc_copula_new(nd, false, &mut c), GcStatus::Model);
        let mut out = 0.0;
        assert_eq!(gc_kendall_tau(ptr::null(), &mut out), GcStatus::NullPointer);
        gc_model_free(nd);
    }
}

#[test]
fn sampling_is_reproducible() {
    let m = model(BB10);
    unsafe {
        let mut a = vec![0.0; 20];
        let mut b = vec![0.0; 20];
        assert_eq!(gc_sample(m, GC_SPACE_GAMMA, 10, 7, 0, a.as_mut_ptr(), a.len()), GcStatus::Ok);
        assert_eq!(gc_sample(m, GC_SPACE_GAMMA, 10, 7, 0, b.as_mut_ptr(), b.len()), GcStatus::Ok);
        assert_eq!(a, b);
        assert!(a.iter().all(|&x| x > 0.0));
        assert_eq!(gc_sample(m, GC_SPACE_COPULA, 10, 7, 0, a.as_mut_ptr(), a.len()), GcStatus::Ok);
        assert!(a.iter().all(|&x| x > 0.0 && x < 1.0));
        assert_eq!(gc_sample(m, GC_SPACE_COPULA, 11, 7, 0, a.as_mut_ptr(), a.len()), GcStatus::Argument);
        assert_eq!(gc_sample(m, 9, 1, 7, 0, a.as_mut_ptr(), a.len()), GcStatus::Argument);
        gc_model_free(m);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(gc_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include").join("gammacop.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "gc_version",
        "gc_last_error_message",
        "gc_model_from_json",
        "gc_model_free",
        "gc_model_dimension",
        "gc_model_check_divisible",
        "gc_model_logpdf",
        "gc_copula_new",
        "gc_copula_free",
        "gc_copula_cdf",
        "gc_copula_pdf",
        "gc_copula_conditional",
        "gc_kendall_tau",
        "gc_spearman_rho",
        "gc_sample",
        "typedef struct GcModel GcModel",
        "typedef struct GcCopula GcCopula",
        "GC_STATUS_CONVERGENCE = 7",
        "#define GC_SPACE_COPULA 1",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
}

#[test]
fn header_compiles_as_c() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler found, skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        r#"#include "gammacop.h"
int probe(const char *json) {
    GcModel *m = NULL;
    GcCopula *c = NULL;
    double v[2] = {0.3, 0.6}, out = 0.0;
    if (gc_model_from_json(json, &m) != GC_STATUS_OK) return 1;
    if (gc_copula_new(m, false, &c) != GC_STATUS_OK) return 2;
    gc_copula_cdf(c, v, 2, &out);
    gc_copula_free(c);
    gc_model_free(m);
    return out > 0.0 ? 0 : 3;
}
"#,
    )
    .unwrap();
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header().parent().unwrap())
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}
