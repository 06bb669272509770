//! C interface to `shf-lab`.
//!
//! Every function returns a [`ShfStatus`]; results come back through out
//! pointers. On failure the message is kept per thread and can be copied out
//! with [`shf_last_error_message`]. Graphs and Dickman evaluators are opaque
//! handles owned by the caller and released with their `_free` functions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use shf_lab::dpre::compute_r_n;
use shf_lab::graph::{gff_log_partition, reduced_log_det, spanning_tree_sum, WeightedGraph};
use shf_lab::moment::moment_gaussian;
use shf_lab::special::{g_theta, g_theta_integral, DickmanParams};
use shf_lab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShfStatus {
    Ok = 0,
    Domain = 1,
    Numerical = 2,
    Graph = 3,
    TooLarge = 4,
    Resource = 5,
    Io = 6,
    NullPointer = 7,
    InvalidArgument = 8,
    Panic = 9,
}

/// Weighted graph with an optional boundary set.
pub struct ShfGraph {
    inner: WeightedGraph,
}

/// Evaluator of `G_θ` and its primitive at a fixed `θ`.
pub struct ShfDickman {
    params: DickmanParams,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> ShfStatus {
    match e {
        Error::Domain(_) => ShfStatus::Domain,
        Error::Numerical(_) => ShfStatus::Numerical,
        Error::Graph(_) => ShfStatus::Graph,
        Error::TooLarge { .. } => ShfStatus::TooLarge,
        Error::Resource(_) => ShfStatus::Resource,
        Error::Io(_) | Error::Json(_) | Error::Csv(_) => ShfStatus::Io,
    }
}

enum Failure {
    Lib(Error),
    Null(&'static str),
    Invalid(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `f`, converting errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ShfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            ShfStatus::Ok
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            ShfStatus::NullPointer
        }
        Ok(Err(Failure::Invalid(msg))) => {
            set_error(msg);
            ShfStatus::InvalidArgument
        }
        Err(_) => {
            set_error("internal panic".into());
            ShfStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(ptr: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    ptr.as_mut().ok_or(Failure::Null(name))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, name: &'static str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(Failure::Null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

/// Version string of the library, static and NUL-terminated.
#[no_mangle]
pub extern "C" fn shf_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => panic!("version contains a NUL byte"),
    };
    VERSION.as_ptr()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes) and returns the full message length.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn shf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates an edgeless graph on `vertex_count` vertices.
///
/// # Safety
/// `graph` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn shf_graph_new(vertex_count: usize, graph: *mut *mut ShfGraph) -> ShfStatus {
    guard(|| {
        let slot = out(graph, "graph")?;
        let inner = WeightedGraph::new(vertex_count)?;
        *slot = Box::into_raw(Box::new(ShfGraph { inner }));
        Ok(())
    })
}

/// Builds a graph from its JSON form `{"n": .., "edges": [[u, v, c], ..]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `graph` writable.
#[no_mangle]
pub unsafe extern "C" fn shf_graph_from_json(json: *const c_char, graph: *mut *mut ShfGraph) -> ShfStatus {
    guard(|| {
        let slot = out(graph, "graph")?;
        if json.is_null() {
            return Err(Failure::Null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| Failure::Invalid(format!("json is not UTF-8: {e}")))?;
        let inner = WeightedGraph::from_json(text)?;
        *slot = Box::into_raw(Box::new(ShfGraph { inner }));
        Ok(())
    })
}

/// Releases a graph; null is ignored.
///
/// # Safety
/// `graph` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn shf_graph_free(graph: *mut ShfGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Adds conductance `c > 0` between `u` and `v`; parallel edges add up.
///
/// # Safety
/// `graph` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn shf_graph_add_edge(graph: *mut ShfGraph, u: usize, v: usize, c: f64) -> ShfStatus {
    guard(|| {
        let g = out(graph, "graph")?;
        g.inner.add_edge(u, v, c)?;
        Ok(())
    })
}

/// # Safety
/// `graph` must be a live handle and `boundary` point to `len` indices.
#[no_mangle]
pub unsafe extern "C" fn shf_graph_set_boundary(graph: *mut ShfGraph, boundary: *const usize, len: usize) -> ShfStatus {
    guard(|| {
        let g = out(graph, "graph")?;
        let b = slice(boundary, len, "boundary")?;
        g.inner.set_boundary(b.to_vec())?;
        Ok(())
    })
}

/// Log-determinant of the Laplacian with the `pinned` vertices removed.
///
/// # Safety
/// `graph` must be a live handle, `pinned` point to `len` indices and
/// `log_det` be writable.
#[no_mangle]
pub unsafe extern "C" fn shf_graph_reduced_log_det(
    graph: *const ShfGraph,
    pinned: *const usize,
    len: usize,
    log_det: *mut f64,
) -> ShfStatus {
    guard(|| {
        let g = graph.as_ref().ok_or(Failure::Null("graph"))?;
        let p = slice(pinned, len, "pinned")?;
        let slot = out(log_det, "log_det")?;
        *slot = reduced_log_det(&g.inner, p)?;
        Ok(())
    })
}

/// Log partition function of the planar GFF with the `pinned` vertices at 0.
///
/// # Safety
/// As for [`shf_graph_reduced_log_det`].
#[no_mangle]
pub unsafe extern "C" fn shf_graph_gff_log_partition(
    graph: *const ShfGraph,
    pinned: *const usize,
    len: usize,
    log_partition: *mut f64,
) -> ShfStatus {
    guard(|| {
        let g = graph.as_ref().ok_or(Failure::Null("graph"))?;
        let p = slice(pinned, len, "pinned")?;
        let slot = out(log_partition, "log_partition")?;
        *slot = gff_log_partition(&g.inner, p)?.log_partition;
        Ok(())
    })
}

/// Weighted spanning-tree sum by exhaustive enumeration (small graphs only).
///
/// # Safety
/// `graph` must be a live handle and `sum` writable.
#[no_mangle]
pub unsafe extern "C" fn shf_graph_spanning_tree_sum(graph: *const ShfGraph, sum: *mut f64) -> ShfStatus {
    guard(|| {
        let g = graph.as_ref().ok_or(Failure::Null("graph"))?;
        let slot = out(sum, "sum")?;
        *slot = spanning_tree_sum(&g.inner)?;
        Ok(())
    })
}

/// Creates an evaluator of `G_θ`; `rel_tol ≤ 0` selects the default.
///
/// # Safety
/// `dickman` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shf_dickman_new(theta: f64, rel_tol: f64, dickman: *mut *mut ShfDickman) -> ShfStatus {
    guard(|| {
        let slot = out(dickman, "dickman")?;
        let mut params = DickmanParams::new(theta);
        if rel_tol > 0.0 {
            params = params.with_rel_tol(rel_tol);
        }
        params.validate()?;
        *slot = Box::into_raw(Box::new(ShfDickman { params }));
        Ok(())
    })
}

/// # Safety
/// `dickman` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn shf_dickman_free(dickman: *mut ShfDickman) {
    if !dickman.is_null() {
        drop(Box::from_raw(dickman));
    }
}

/// `G_θ(t)` for `t ∈ (0, 1]`.
///
/// # Safety
/// `dickman` must be a live handle and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn shf_dickman_density(dickman: *const ShfDickman, t: f64, value: *mut f64) -> ShfStatus {
    guard(|| {
        let d = dickman.as_ref().ok_or(Failure::Null("dickman"))?;
        let slot = out(value, "value")?;
        *slot = g_theta(&d.params, t)?;
        Ok(())
    })
}

/// `∫_0^t G_θ` for `t ∈ (0, 1]`.
///
/// # Safety
/// As for [`shf_dickman_density`].
#[no_mangle]
pub unsafe extern "C" fn shf_dickman_integral(dickman: *const ShfDickman, t: f64, value: *mut f64) -> ShfStatus {
    guard(|| {
        let d = dickman.as_ref().ok_or(Failure::Null("dickman"))?;
        let slot = out(value, "value")?;
        *slot = g_theta_integral(&d.params, t)?;
        Ok(())
    })
}

/// Truncated moment `E[Z(g_1)^h]` with its standard error.
///
/// # Safety
/// `value` and `std_error` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shf_moment_gaussian(
    h: usize,
    theta: f64,
    m_max: usize,
    samples: usize,
    seed: u64,
    value: *mut f64,
    std_error: *mut f64,
) -> ShfStatus {
    guard(|| {
        let v = out(value, "value")?;
        let s = out(std_error, "std_error")?;
        let e = moment_gaussian(h, theta, m_max, samples, seed)?;
        *v = e.value;
        *s = e.std_error;
        Ok(())
    })
}

/// Expected collision count `R_N` of two walks up to time `n`.
///
/// # Safety
/// `value` must be writable.
#[no_mangle]
pub unsafe extern "C" fn shf_compute_r_n(n: u64, value: *mut f64) -> ShfStatus {
    guard(|| {
        let slot = out(value, "value")?;
        *slot = compute_r_n(n)?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn last_error() -> String {
        let mut buf = vec![0 as c_char; 256];
        unsafe { shf_last_error_message(buf.as_mut_ptr(), buf.len()) };
        unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
    }

    #[test]
    fn error_message_is_truncated_safely() {
        let mut v = 0.0;
        assert_eq!(unsafe { shf_compute_r_n(0, &mut v) }, ShfStatus::Domain);
        let mut tiny = [0 as c_char; 4];
        let full = unsafe { shf_last_error_message(tiny.as_mut_ptr(), tiny.len()) };
        assert!(full > 3);
        assert_eq!(tiny[3], 0);
        assert_eq!(unsafe { shf_last_error_message(ptr::null_mut(), 0) }, full);
    }

    #[test]
    fn version_is_the_crate_version() {
        let v = unsafe { CStr::from_ptr(shf_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn null_out_pointer_is_reported() {
        assert_eq!(unsafe { shf_compute_r_n(10, ptr::null_mut()) }, ShfStatus::NullPointer);
        assert!(last_error().contains("null"));
        assert_eq!(unsafe { shf_graph_new(3, ptr::null_mut()) }, ShfStatus::NullPointer);
    }
}
