//! C ABI over the `stabflow` library.
//!
//! Every fallible function returns an [`SfStatus`]; on failure the message
//! is available from [`sf_last_error`] on the same thread until the next
//! call. Handles are opaque and must be released with their `_free`
//! function. Labels cross the boundary as `size_t` values in `1..=k`.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use stabflow::cluster::{ClusterMethod, Clusterer};
use stabflow::config::load_config;
use stabflow::dataset::{self, Dataset, QcRow, Schema};
use stabflow::preprocess::{FeatureSet, ImputerKind, PipelineSpec, QualityFilter};
use stabflow::report::{self, RunOptions};
use stabflow::validate::{self, ConsensusMatrix, Labeling, StabilityParams, StabilityTable};
use stabflow::{Error, Matrix};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Data = 4,
    Numeric = 5,
    Io = 6,
    Panic = 7,
}

impl From<&Error> for SfStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) => SfStatus::InvalidArgument,
            Error::Config(_) | Error::Json(_) => SfStatus::Config,
            Error::Numeric(_) => SfStatus::Numeric,
            Error::Io { .. } => SfStatus::Io,
            _ => SfStatus::Data,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(SfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail((&e).into(), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(SfStatus::NullPointer, format!("`{what}` is null"))
}

fn bad(msg: impl Into<String>) -> Fail {
    Fail(SfStatus::InvalidArgument, msg.into())
}

/// Run `f`, turning errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SfStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            SfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| bad(format!("`{what}` is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Valid until
/// the next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn sf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Adjusted Rand index of two labelings of length `n`.
///
/// # Safety
/// `a` and `b` must point to `n` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_ari(a: *const usize, b: *const usize, n: usize, out: *mut f64) -> SfStatus {
    guard(|| {
        let (a, b) = (slice_arg(a, n, "a")?, slice_arg(b, n, "b")?);
        *out_arg(out, "out")? = validate::ari(a, b)?;
        Ok(())
    })
}

/// A loaded catalog.
pub struct SfDataset {
    inner: Dataset,
}

/// Read a catalog CSV. `schema_json` may be NULL for the default column
/// names; otherwise it is a JSON object with the schema fields.
///
/// # Safety
/// Strings must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_dataset_load(path: *const c_char, schema_json: *const c_char, out: *mut *mut SfDataset) -> SfStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let schema: Schema = if schema_json.is_null() {
            Schema::default()
        } else {
            serde_json::from_str(str_arg(schema_json, "schema_json")?).map_err(|e| Fail(SfStatus::Config, e.to_string()))?
        };
        let out = out_arg(out, "out")?;
        let ds = dataset::load_catalog(Path::new(path), &schema)?;
        *out = Box::into_raw(Box::new(SfDataset { inner: ds }));
        Ok(())
    })
}

/// Build a dataset from a row-major `rows x cols` matrix. NaN entries are
/// treated as missing. Rows get ids `r0, r1, ..` and features
/// `x1..x<cols>`; there is no QC metadata.
///
/// # Safety
/// `values` must point to `rows * cols` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sf_dataset_from_matrix(values: *const f64, rows: usize, cols: usize, out: *mut *mut SfDataset) -> SfStatus {
    guard(|| {
        let len = rows.checked_mul(cols).ok_or_else(|| bad("rows * cols overflows"))?;
        if len == 0 {
            return Err(bad("matrix is empty"));
        }
        let vals = slice_arg(values, len, "values")?;
        let out = out_arg(out, "out")?;
        let missing: Vec<bool> = vals.iter().map(|v| v.is_nan()).collect();
        let meta = QcRow {
            snr: f64::NAN,
            teff: f64::NAN,
            logg: f64::NAN,
            vb: f64::NAN,
            starflag: None,
        };
        let ds = Dataset::new(
            (0..rows).map(|i| format!("r{i}")).collect(),
            vec![None; rows],
            vec![meta; rows],
            (1..=cols).map(|j| format!("x{j}")).collect(),
            Matrix::from_vec(rows, cols, vals.to_vec())?,
            missing,
        )?;
        *out = Box::into_raw(Box::new(SfDataset { inner: ds }));
        Ok(())
    })
}

/// Number of rows, or 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_dataset_rows(ds: *const SfDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.len())
}

/// Number of feature columns, or 0 for NULL.
///
/// # Safety
/// `ds` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_dataset_cols(ds: *const SfDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.inner.feature_names().len())
}

/// # Safety
/// `ds` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sf_dataset_free(ds: *mut SfDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Result of a stability search.
pub struct SfStability {
    table: StabilityTable,
    names: Vec<CString>,
    best: usize,
}

/// Stability search on one pipeline (all features, standardized and
/// mean-imputed). `methods` is a comma-separated list such as
/// `"kmeans,hc-ward,spectral-30"`.
///
/// # Safety
/// `ds` must be a live handle, `methods` NUL-terminated, `ks` readable for
/// `n_ks` values and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sf_stability_search(
    ds: *const SfDataset,
    methods: *const c_char,
    ks: *const usize,
    n_ks: usize,
    b: usize,
    pi: f64,
    seed: u64,
    out: *mut *mut SfStability,
) -> SfStatus {
    guard(|| {
        let ds = &handle(ds, "ds")?.inner;
        let methods: Vec<ClusterMethod> = str_arg(methods, "methods")?
            .split(',')
            .map(|m| m.trim().parse())
            .collect::<stabflow::Result<_>>()?;
        let ks = slice_arg(ks, n_ks, "ks")?;
        let out = out_arg(out, "out")?;
        let spec = PipelineSpec::new(
            QualityFilter::permissive(),
            FeatureSet::custom("all", ds.feature_names().to_vec()),
            ImputerKind::Mean,
            None,
        );
        let m: Vec<&dyn Clusterer> = methods.iter().map(|m| m as &dyn Clusterer).collect();
        let params = StabilityParams { b, pi, seed };
        let table = validate::stability_search(ds, &[spec], &m, ks, &params, false)?;
        let best = table.ranking()[0];
        let names = table
            .cells
            .iter()
            .map(|c| CString::new(c.method.clone()).unwrap_or_default())
            .collect();
        *out = Box::into_raw(Box::new(SfStability { table, names, best }));
        Ok(())
    })
}

/// Number of (method, k) cells.
///
/// # Safety
/// `t` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_stability_len(t: *const SfStability) -> usize {
    t.as_ref().map_or(0, |t| t.table.cells.len())
}

/// Index of the most stable cell.
///
/// # Safety
/// `t` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_stability_best(t: *const SfStability) -> usize {
    t.as_ref().map_or(0, |t| t.best)
}

/// Read cell `i`: method name (owned by the handle), k, mean and sd of the
/// stability score. Any output pointer may be NULL.
///
/// # Safety
/// `t` must be a live handle; non-NULL outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_stability_cell(
    t: *const SfStability,
    i: usize,
    method: *mut *const c_char,
    k: *mut usize,
    mean: *mut f64,
    sd: *mut f64,
) -> SfStatus {
    guard(|| {
        let t = handle(t, "t")?;
        let c = t.table.cells.get(i).ok_or_else(|| bad(format!("cell {i} out of range")))?;
        if let Some(m) = method.as_mut() {
            *m = t.names[i].as_ptr();
        }
        if let Some(k) = k.as_mut() {
            *k = c.k;
        }
        if let Some(x) = mean.as_mut() {
            *x = c.mean;
        }
        if let Some(x) = sd.as_mut() {
            *x = c.sd;
        }
        Ok(())
    })
}

/// # Safety
/// `t` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sf_stability_free(t: *mut SfStability) {
    if !t.is_null() {
        drop(Box::from_raw(t));
    }
}

/// Co-clustering matrix over a fixed set of rows.
pub struct SfConsensus {
    inner: ConsensusMatrix,
}

/// Consensus matrix from `n_runs` full labelings of `n_rows` rows, stored
/// run-major (`labels[r * n_rows + i]`).
///
/// # Safety
/// `labels` must hold `n_runs * n_rows` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sf_consensus_from_labels(
    labels: *const usize,
    n_rows: usize,
    n_runs: usize,
    out: *mut *mut SfConsensus,
) -> SfStatus {
    guard(|| {
        let len = n_rows.checked_mul(n_runs).ok_or_else(|| bad("n_rows * n_runs overflows"))?;
        if len == 0 {
            return Err(bad("need at least one run over at least one row"));
        }
        let all = slice_arg(labels, len, "labels")?;
        let out = out_arg(out, "out")?;
        let ids: Vec<String> = (0..n_rows).map(|i| format!("r{i}")).collect();
        let runs: Vec<Labeling> = all.chunks(n_rows).map(|c| Labeling::full(c.to_vec())).collect();
        let c = validate::consensus_from_labelings(&ids, &runs)?;
        *out = Box::into_raw(Box::new(SfConsensus { inner: c }));
        Ok(())
    })
}

/// Side length, or 0 for NULL.
///
/// # Safety
/// `c` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_consensus_len(c: *const SfConsensus) -> usize {
    c.as_ref().map_or(0, |c| c.inner.len())
}

/// Entry `(i, j)`; NaN when out of range or NULL.
///
/// # Safety
/// `c` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sf_consensus_get(c: *const SfConsensus, i: usize, j: usize) -> f64 {
    match c.as_ref() {
        Some(c) if i < c.inner.len() && j < c.inner.len() => c.inner.get(i, j),
        _ => f64::NAN,
    }
}

/// Average-linkage clusters of `1 - C` cut at `k`, written to
/// `labels_out` (length `sf_consensus_len`).
///
/// # Safety
/// `c` must be a live handle; `labels_out` must hold `sf_consensus_len`
/// values.
#[no_mangle]
pub unsafe extern "C" fn sf_consensus_cluster(c: *const SfConsensus, k: usize, labels_out: *mut usize) -> SfStatus {
    guard(|| {
        let c = &handle(c, "c")?.inner;
        if labels_out.is_null() {
            return Err(null("labels_out"));
        }
        let a = validate::consensus_labels(c, k)?;
        std::slice::from_raw_parts_mut(labels_out, c.len()).copy_from_slice(&a.labels);
        Ok(())
    })
}

/// Per-row local stability for `labels` (length `sf_consensus_len`).
///
/// # Safety
/// `c` must be a live handle; `labels` and `scores_out` must hold
/// `sf_consensus_len` values.
#[no_mangle]
pub unsafe extern "C" fn sf_local_stability(c: *const SfConsensus, labels: *const usize, scores_out: *mut f64) -> SfStatus {
    guard(|| {
        let c = &handle(c, "c")?.inner;
        let labels = slice_arg(labels, c.len(), "labels")?;
        if scores_out.is_null() {
            return Err(null("scores_out"));
        }
        let ls = validate::local_stability(c, labels)?;
        std::slice::from_raw_parts_mut(scores_out, c.len()).copy_from_slice(&ls.scores);
        Ok(())
    })
}

/// # Safety
/// `c` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sf_consensus_free(c: *mut SfConsensus) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Run one workflow stage (`prepare`, `explore`, `search`, `validate`,
/// `report` or `run`) from a configuration file, as the CLI would.
///
/// # Safety
/// Strings must be NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn sf_run_stage(config_path: *const c_char, stage: *const c_char, reproducible: c_int) -> SfStatus {
    guard(|| {
        let cfg = load_config(Path::new(str_arg(config_path, "config_path")?))?;
        let opts = RunOptions {
            reproducible: reproducible != 0,
        };
        match str_arg(stage, "stage")? {
            "prepare" => report::cmd_prepare(&cfg, opts).map(drop),
            "explore" => report::cmd_explore(&cfg, opts).map(drop),
            "search" => report::cmd_search(&cfg, opts).map(drop),
            "validate" => report::cmd_validate(&cfg, opts).map(drop),
            "report" => report::cmd_report(&cfg, opts).map(drop),
            "run" => report::cmd_run(&cfg, opts).map(drop),
            other => return Err(bad(format!("unknown stage `{other}`"))),
        }?;
        Ok(())
    })
}
