//! C ABI over `nmf_subspace`.
//!
//! Matrices and masks cross the boundary as opaque handles created by the
//! `*_new` functions and released with the matching `*_free`. Every fallible
//! call returns an [`NmfStatus`]; on failure [`nmf_last_error_message`]
//! describes the error for the calling thread. Seeds are master seeds: the
//! same seed gives the same result as the Rust API with
//! `SeedSpec::from_master(seed)`.
//!
//! Matrix data is row-major `double`. Labels are written to caller-owned
//! `size_t` buffers with one slot per row.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nmf_subspace::{
    basic_completion, bernoulli_mask, cluster_via_nmf, correlation_measure, nmf_factorize, relative_error,
    BlockCompletion, DataMatrix, Error, KMeansSettings, Mask, SeedSpec, SolverSettings, Subspace,
};

/// Opaque row-major matrix.
pub struct NmfMatrix {
    inner: DataMatrix,
}

/// Opaque set of observed `(row, col)` positions.
pub struct NmfMask {
    inner: Mask,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NmfStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    Parameter = 3,
    Negative = 4,
    Data = 5,
    Degenerate = 6,
    Io = 7,
    Panic = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &Error) -> NmfStatus {
    match err {
        Error::Dimension(_) => NmfStatus::Dimension,
        Error::Parameter(_) | Error::Config(_) => NmfStatus::Parameter,
        Error::Negative { .. } => NmfStatus::Negative,
        Error::Data(_) => NmfStatus::Data,
        Error::Degenerate(_) | Error::DegenerateBlock { .. } | Error::RotationTooLarge { .. } => {
            NmfStatus::Degenerate
        }
        Error::Io { .. } | Error::Csv { .. } => NmfStatus::Io,
    }
}

enum Fail {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Lib(e)
    }
}

/// Runs `f`, recording any error or panic for [`nmf_last_error_message`].
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NmfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            NmfStatus::Ok
        }
        Ok(Err(Fail::Null(what))) => {
            set_last_error(&format!("null pointer: {what}"));
            NmfStatus::NullPointer
        }
        Ok(Err(Fail::Lib(e))) => {
            set_last_error(&e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_last_error("internal panic");
            NmfStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &'static str) -> Result<&'a mut [T], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, what: &'static str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::Null(what));
    }
    out.write(value);
    Ok(())
}

fn boxed(m: DataMatrix) -> *mut NmfMatrix {
    Box::into_raw(Box::new(NmfMatrix { inner: m }))
}

fn write_labels(labels: &[usize], out: &mut [usize]) -> Result<(), Fail> {
    if out.len() != labels.len() {
        return Err(Fail::Lib(Error::Dimension(format!(
            "label buffer holds {} entries, need {}",
            out.len(),
            labels.len()
        ))));
    }
    out.copy_from_slice(labels);
    Ok(())
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn nmf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Copies `rows * cols` row-major values into a new matrix.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nmf_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut NmfMatrix,
) -> NmfStatus {
    guard(|| {
        let len = rows.checked_mul(cols).ok_or(Error::Dimension("rows * cols overflows".into()))?;
        let values = slice(data, len, "data")?.to_vec();
        let m = DataMatrix::new(rows, cols, values)?;
        put(out, boxed(m), "out")
    })
}

/// # Safety
/// `m` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nmf_matrix_free(m: *mut NmfMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Row count, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nmf_matrix_rows(m: *const NmfMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.rows())
}

/// Column count, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nmf_matrix_cols(m: *const NmfMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.cols())
}

/// Copies the row-major data into `out`, which must hold exactly
/// `rows * cols` values.
///
/// # Safety
/// `m` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn nmf_matrix_copy_data(m: *const NmfMatrix, out: *mut f64, len: usize) -> NmfStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let src = m.inner.as_slice();
        if len != src.len() {
            return Err(Error::Dimension(format!("buffer holds {len} values, matrix has {}", src.len())).into());
        }
        slice_mut(out, len, "out")?.copy_from_slice(src);
        Ok(())
    })
}

/// Mask from `count` pairs stored as `coords[2i] = row, coords[2i + 1] = col`.
///
/// # Safety
/// `coords` must point to `2 * count` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nmf_mask_new(
    rows: usize,
    cols: usize,
    coords: *const usize,
    count: usize,
    out: *mut *mut NmfMask,
) -> NmfStatus {
    guard(|| {
        let flat = slice(coords, count.saturating_mul(2), "coords")?;
        let mask = Mask::new(rows, cols, flat.chunks_exact(2).map(|c| (c[0], c[1])))?;
        put(out, Box::into_raw(Box::new(NmfMask { inner: mask })), "out")
    })
}

/// Each position observed independently with probability `p`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nmf_mask_bernoulli(
    rows: usize,
    cols: usize,
    p: f64,
    seed: u64,
    out: *mut *mut NmfMask,
) -> NmfStatus {
    guard(|| {
        let mask = bernoulli_mask(rows, cols, p, SeedSpec::from_master(seed))?;
        put(out, Box::into_raw(Box::new(NmfMask { inner: mask })), "out")
    })
}

/// # Safety
/// `m` must come from this library and not be freed twice. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn nmf_mask_free(m: *mut NmfMask) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Number of observed positions, or 0 for a null handle.
///
/// # Safety
/// `m` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nmf_mask_len(m: *const NmfMask) -> usize {
    m.as_ref().map_or(0, |m| m.inner.len())
}

/// `‖estimate − truth‖_F / ‖truth‖_F`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nmf_relative_error(
    estimate: *const NmfMatrix,
    truth: *const NmfMatrix,
    out: *mut f64,
) -> NmfStatus {
    guard(|| {
        let e = relative_error(&deref(estimate, "estimate")?.inner, &deref(truth, "truth")?.inner)?;
        put(out, e, "out")
    })
}

/// Correlation of the row spans of two nonnegative full-row-rank bases.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nmf_correlation_measure(
    u_basis: *const NmfMatrix,
    v_basis: *const NmfMatrix,
    out: *mut f64,
) -> NmfStatus {
    guard(|| {
        let u = Subspace::new(deref(u_basis, "u_basis")?.inner.clone())?;
        let v = Subspace::new(deref(v_basis, "v_basis")?.inner.clone())?;
        put(out, correlation_measure(&u, &v)?, "out")
    })
}

/// `x ≈ W H` with `r` topics after `iters` multiplicative updates.
///
/// # Safety
/// `x` must be live; `w_out` and `h_out` must be writable. The returned
/// handles are owned by the caller.
#[no_mangle]
pub unsafe extern "C" fn nmf_factorize_matrix(
    x: *const NmfMatrix,
    r: usize,
    iters: usize,
    seed: u64,
    w_out: *mut *mut NmfMatrix,
    h_out: *mut *mut NmfMatrix,
) -> NmfStatus {
    guard(|| {
        let x = deref(x, "x")?;
        if w_out.is_null() || h_out.is_null() {
            return Err(Fail::Null("w_out / h_out"));
        }
        let f = nmf_factorize(&x.inner, r, &SolverSettings::with_iters(iters), SeedSpec::from_master(seed))?;
        put(w_out, boxed(f.w), "w_out")?;
        put(h_out, boxed(f.h), "h_out")
    })
}

/// Rank-`r` completion from the entries of `observed` on `mask`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nmf_basic_completion(
    observed: *const NmfMatrix,
    mask: *const NmfMask,
    r: usize,
    iters: usize,
    seed: u64,
    out: *mut *mut NmfMatrix,
) -> NmfStatus {
    guard(|| {
        let x = deref(observed, "observed")?;
        let mask = deref(mask, "mask")?;
        let completed = basic_completion(
            &x.inner,
            &mask.inner,
            r,
            &SolverSettings::with_iters(iters),
            SeedSpec::from_master(seed),
        )?;
        put(out, boxed(completed), "out")
    })
}

/// Clusters the rows of `x` into `k` groups through a rank-`r` NMF.
///
/// # Safety
/// `x` must be live; `labels_out` must point to `labels_len` writable slots
/// and `labels_len` must equal the row count.
#[no_mangle]
pub unsafe extern "C" fn nmf_cluster(
    x: *const NmfMatrix,
    r: usize,
    k: usize,
    iters: usize,
    seed: u64,
    labels_out: *mut usize,
    labels_len: usize,
) -> NmfStatus {
    guard(|| {
        let x = deref(x, "x")?;
        let out = slice_mut(labels_out, labels_len, "labels_out")?;
        let seed = SeedSpec::from_master(seed);
        let found = cluster_via_nmf(
            &x.inner,
            r,
            &KMeansSettings::new(k, seed.child(2)),
            &SolverSettings::with_iters(iters),
            seed.child(1),
        )?;
        write_labels(&found.labels, out)
    })
}

/// Block completion: whole-matrix completion at rank `r_full`, clustering
/// into `k` groups, then rank-`r_block` completion of each group. Clusters
/// too sparse to complete keep the whole-matrix rows.
///
/// # Safety
/// Handles must be live; `completed_out` must be writable; `labels_out`
/// must point to `labels_len` writable slots (the row count).
#[no_mangle]
pub unsafe extern "C" fn nmf_block_completion(
    observed: *const NmfMatrix,
    mask: *const NmfMask,
    r_full: usize,
    r_block: usize,
    k: usize,
    iters: usize,
    seed: u64,
    completed_out: *mut *mut NmfMatrix,
    labels_out: *mut usize,
    labels_len: usize,
) -> NmfStatus {
    guard(|| {
        let x = deref(observed, "observed")?;
        let mask = deref(mask, "mask")?;
        let labels = slice_mut(labels_out, labels_len, "labels_out")?;
        if completed_out.is_null() {
            return Err(Fail::Null("completed_out"));
        }
        let seed = SeedSpec::from_master(seed);
        let solver = BlockCompletion {
            r_full,
            r_block,
            kmeans: KMeansSettings::new(k, seed),
            solver: SolverSettings::with_iters(iters),
            strict_blocks: false,
        };
        let report = solver.run(&x.inner, &mask.inner, seed)?;
        write_labels(&report.assignment.labels, labels)?;
        put(completed_out, boxed(report.completed), "completed_out")
    })
}
