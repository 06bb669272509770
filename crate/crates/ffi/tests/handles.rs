use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use shf_ffi::*;

#[test]
fn graph_handle_lifecycle() {
    let mut g: *mut ShfGraph = ptr::null_mut();
    unsafe {
        assert_eq!(shf_graph_new(3, &mut g), ShfStatus::Ok);
        assert_eq!(shf_graph_add_edge(g, 0, 1, 2.0), ShfStatus::Ok);
        assert_eq!(shf_graph_add_edge(g, 1, 2, 3.0), ShfStatus::Ok);
        assert_eq!(shf_graph_add_edge(g, 0, 2, 5.0), ShfStatus::Ok);
        let mut trees = 0.0;
        assert_eq!(shf_graph_spanning_tree_sum(g, &mut trees), ShfStatus::Ok);
        // 2·3 + 2·5 + 3·5
        assert!((trees - 31.0).abs() < 1e-12);
        let pinned = [0usize];
        let mut log_det = 0.0;
        assert_eq!(shf_graph_reduced_log_det(g, pinned.as_ptr(), 1, &mut log_det), ShfStatus::Ok);
        assert!((log_det - 31f64.ln()).abs() < 1e-12);
        let mut log_z = 0.0;
        assert_eq!(shf_graph_gff_log_partition(g, pinned.as_ptr(), 1, &mut log_z), ShfStatus::Ok);
        let expected = 2.0 * (2.0 * std::f64::consts::PI).ln() - 31f64.ln();
        assert!((log_z - expected).abs() < 1e-12);
        assert_eq!(shf_graph_add_edge(g, 0, 7, 1.0), ShfStatus::Graph);
        assert_eq!(shf_graph_add_edge(g, 0, 1, -1.0), ShfStatus::Graph);
        shf_graph_free(g);
        shf_graph_free(ptr::null_mut());
    }
}

#[test]
fn graph_from_json() {
    let json = CString::new(r#"{"n": 2, "edges": [[0, 1, 4.0]], "boundary": [0]}"#).unwrap();
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(shf_graph_from_json(json.as_ptr(), &mut g), ShfStatus::Ok);
        let mut log_det = 0.0;
        assert_eq!(shf_graph_reduced_log_det(g, [0usize].as_ptr(), 1, &mut log_det), ShfStatus::Ok);
        assert!((log_det - 4f64.ln()).abs() < 1e-14);
        shf_graph_free(g);
        let bad = CString::new(r#"{"n": 2, "edges": [], "extra": 1}"#).unwrap();
        assert_ne!(shf_graph_from_json(bad.as_ptr(), &mut g), ShfStatus::Ok);
    }
}

#[test]
fn dickman_handle() {
    let mut d = ptr::null_mut();
    unsafe {
        assert_eq!(shf_dickman_new(0.0, 0.0, &mut d), ShfStatus::Ok);
        let t = 1e-6;
        let mut g = 0.0;
        assert_eq!(shf_dickman_density(d, t, &mut g), ShfStatus::Ok);
        let l = -f64::ln(t);
        assert!((g * t * l * l - 1.0).abs() < 5.0 / (l * l));
        let mut i = 0.0;
        assert_eq!(shf_dickman_integral(d, 1e-4, &mut i), ShfStatus::Ok);
        assert!((i * 1e4f64.ln() - 1.0).abs() < 0.03);
        assert_eq!(shf_dickman_density(d, 2.0, &mut g), ShfStatus::Domain);
        let mut buf = [0 as c_char; 128];
        assert!(shf_last_error_message(buf.as_mut_ptr(), buf.len()) > 0);
        assert!(CStr::from_ptr(buf.as_ptr()).to_str().unwrap().contains("(0, 1]"));
        shf_dickman_free(d);
        assert_eq!(shf_dickman_new(f64::NAN, 0.0, &mut d), ShfStatus::Domain);
    }
}

#[test]
fn plain_functions() {
    let (mut v, mut e) = (0.0, 1.0);
    unsafe {
        assert_eq!(shf_moment_gaussian(1, 0.0, 3, 10, 1, &mut v, &mut e), ShfStatus::Ok);
        assert_eq!((v, e), (0.5, 0.0));
        assert_eq!(shf_compute_r_n(1, &mut v), ShfStatus::Ok);
        assert_eq!(v, 0.25);
        assert_eq!(shf_compute_r_n(u64::MAX, &mut v), ShfStatus::Resource);
    }
}

/// Compiles a small C program against the generated header and static
/// library. Skipped when no C compiler is on the path.
#[test]
fn c_program_links_against_header() {
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header_dir = crate_dir.join("include");
    assert!(header_dir.join("shf_lab.h").exists());
    let profile_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libshf_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "shf_lab.h"
int main(void) {
    ShfGraph *g = NULL;
    if (shf_graph_new(2, &g) != SHF_STATUS_OK) return 10;
    if (shf_graph_add_edge(g, 0, 1, 4.0) != SHF_STATUS_OK) return 11;
    size_t pinned[1] = {0};
    double log_det = 0.0;
    if (shf_graph_reduced_log_det(g, pinned, 1, &log_det) != SHF_STATUS_OK) return 12;
    shf_graph_free(g);
    double r = 0.0;
    if (shf_compute_r_n(0, &r) != SHF_STATUS_DOMAIN) return 13;
    char msg[256];
    shf_last_error_message(msg, sizeof msg);
    printf("%.15f %s %s\n", log_det, shf_version(), msg);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("main");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let output = Command::new(&exe).output().unwrap();
    assert!(output.status.success(), "{output:?}");
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.starts_with(&format!("{:.15}", 4f64.ln())), "{text}");
    assert!(text.contains("domain error"));
}
