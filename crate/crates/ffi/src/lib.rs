//! C ABI over `paircd`.
//!
//! Every fallible call returns a [`PaircdStatus`]; on failure a message is
//! available from [`paircd_last_error`] on the same thread. Objects are
//! opaque handles released with their matching `_free` function. Strings
//! returned through out-pointers are released with [`paircd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use paircd::ci_test::{pair_ci, CITestConfig, VarianceEstimator};
use paircd::data::{load_csv, IncompleteDataset, ImputedStack, ImputerKind, Matrix, DEFAULT_NA_MARKERS};
use paircd::discovery::{discover, DiscoverConfig, Method};
use paircd::error::Error;
use paircd::graph::MixedGraph;
use paircd::imputation::{build_cache, MiceConfig};
use paircd::learners::Variant;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaircdStatus {
    Ok = 0,
    NullArg = 1,
    InvalidArg = 2,
    Io = 3,
    Parse = 4,
    Data = 5,
    Compute = 6,
    Panic = 7,
}

/// Incomplete data table.
pub struct PaircdDataset(IncompleteDataset);

/// Multiply imputed copies of a dataset.
pub struct PaircdCache(ImputedStack);

/// Mixed graph with node names.
pub struct PaircdGraph {
    graph: MixedGraph,
    names: Vec<String>,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaircdCiConfig {
    /// 0 = general (random forest), 1 = fast (extra-trees).
    pub variant: u32,
    pub k_folds: u32,
    pub alpha: f64,
    /// 0 = Bayle, 1 = Nadeau-Bengio.
    pub variance_estimator: u32,
    pub early_stop: bool,
    pub n_trees: u32,
    pub min_samples_leaf: u32,
    pub seed: u64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PaircdCiResult {
    pub mu_hat: f64,
    pub t_total: f64,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub reject: bool,
    pub early_stopped: bool,
    pub degenerate: bool,
    pub m_used: u32,
    pub n_used: u32,
}

/// Edge mark between two nodes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaircdEdge {
    None = 0,
    /// `i -> j`
    Forward = 1,
    /// `j -> i`
    Backward = 2,
    Undirected = 3,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

type Failure = (PaircdStatus, String);

fn classify(e: Error) -> Failure {
    let status = match &e {
        Error::Io { .. } => PaircdStatus::Io,
        Error::Parse { .. } | Error::Csv(_) | Error::Json(_) => PaircdStatus::Parse,
        Error::Validation(_) | Error::Imputation { .. } | Error::DegenerateDesign(_) | Error::InsufficientData(_) => {
            PaircdStatus::Data
        }
        Error::Config(_) | Error::Contract(_) => PaircdStatus::InvalidArg,
        Error::Fit(_) | Error::Oracle { .. } => PaircdStatus::Compute,
    };
    (status, e.to_string())
}

fn null(what: &str) -> Failure {
    (PaircdStatus::NullArg, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    (PaircdStatus::InvalidArg, msg.into())
}

/// Runs `f`, recording any failure or panic in the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PaircdStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PaircdStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            PaircdStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn paircd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn paircd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn paircd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a CSV with a header row. Empty cells, `NA` and `nan` are missing.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paircd_dataset_load_csv(path: *const c_char, out: *mut *mut PaircdDataset) -> PaircdStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = str_arg(path, "path")?;
        let ds = load_csv(path, &DEFAULT_NA_MARKERS).map_err(classify)?;
        put(out, PaircdDataset(ds));
        Ok(())
    })
}

/// Builds a dataset from `n_rows * n_cols` row-major values; NaN marks a
/// missing cell. Columns are named `X0, X1, ...`.
///
/// # Safety
/// `values` must point to `n_rows * n_cols` readable doubles; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn paircd_dataset_from_values(
    values: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut *mut PaircdDataset,
) -> PaircdStatus {
    guard(|| {
        if values.is_null() {
            return Err(null("values"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let len = n_rows
            .checked_mul(n_cols)
            .ok_or_else(|| invalid("n_rows * n_cols overflows"))?;
        let flat = std::slice::from_raw_parts(values, len);
        let rows: Vec<Vec<f64>> = flat.chunks(n_cols.max(1)).map(<[f64]>::to_vec).collect();
        let m = Matrix::from_rows(&rows);
        let mask: Vec<bool> = (0..n_cols)
            .flat_map(|j| (0..n_rows).map(move |i| (i, j)))
            .map(|(i, j)| !flat[i * n_cols + j].is_nan())
            .collect();
        let ds = IncompleteDataset::new(m, mask, IncompleteDataset::default_names(n_cols)).map_err(classify)?;
        put(out, PaircdDataset(ds));
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live dataset handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn paircd_dataset_n_rows(ds: *const PaircdDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n_rows())
}

/// # Safety
/// `ds` must be a live dataset handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn paircd_dataset_n_cols(ds: *const PaircdDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.n_cols())
}

/// # Safety
/// `ds` must be a live dataset handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn paircd_dataset_missing_count(ds: *const PaircdDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.missing_count())
}

/// # Safety
/// `ds` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn paircd_dataset_free(ds: *mut PaircdDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// MICE with `m` imputations over all columns, for reuse across tests.
///
/// # Safety
/// `ds` must be a live dataset handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paircd_cache_build(
    ds: *const PaircdDataset,
    m: u32,
    seed: u64,
    out: *mut *mut PaircdCache,
) -> PaircdStatus {
    guard(|| {
        let ds = ref_arg(ds, "dataset")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = MiceConfig {
            m_imputations: m as usize,
            seed,
            ..MiceConfig::default()
        };
        let stack = build_cache(&ds.0, &cfg).map_err(classify)?;
        put(out, PaircdCache(stack));
        Ok(())
    })
}

/// # Safety
/// `cache` must be a live cache handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn paircd_cache_m(cache: *const PaircdCache) -> usize {
    cache.as_ref().map_or(0, |c| c.0.m())
}

/// # Safety
/// `cache` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn paircd_cache_free(cache: *mut PaircdCache) {
    if !cache.is_null() {
        drop(Box::from_raw(cache));
    }
}

/// Defaults for `variant` (0 general, 1 fast).
#[no_mangle]
pub extern "C" fn paircd_ci_config_default(variant: u32) -> PaircdCiConfig {
    let c = CITestConfig::for_variant(if variant == 1 { Variant::Fast } else { Variant::General });
    PaircdCiConfig {
        variant: if variant == 1 { 1 } else { 0 },
        k_folds: c.k_folds as u32,
        alpha: c.alpha,
        variance_estimator: 0,
        early_stop: c.early_stop.enabled,
        n_trees: c.learner.n_trees as u32,
        min_samples_leaf: c.learner.min_samples_leaf as u32,
        seed: 0,
    }
}

fn to_config(c: &PaircdCiConfig) -> Result<CITestConfig, Failure> {
    let variant = match c.variant {
        0 => Variant::General,
        1 => Variant::Fast,
        v => return Err(invalid(format!("unknown variant {v}"))),
    };
    let mut out = CITestConfig::for_variant(variant);
    out.k_folds = c.k_folds as usize;
    out.alpha = c.alpha;
    out.variance_estimator = match c.variance_estimator {
        0 => VarianceEstimator::Bayle,
        1 => VarianceEstimator::NadeauBengio,
        v => return Err(invalid(format!("unknown variance estimator {v}"))),
    };
    out.early_stop.enabled = c.early_stop;
    out.learner.n_trees = c.n_trees as usize;
    out.learner.min_samples_leaf = c.min_samples_leaf as usize;
    out.seed = c.seed;
    out.validate().map_err(classify)?;
    Ok(out)
}

/// Tests `z _||_ y | cond` on a cache.
///
/// # Safety
/// `cache` and `config` must be live; `cond` must point to `n_cond` indices
/// (or be NULL when `n_cond` is 0); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paircd_ci_test(
    cache: *const PaircdCache,
    z: usize,
    y: usize,
    cond: *const usize,
    n_cond: usize,
    config: *const PaircdCiConfig,
    out: *mut PaircdCiResult,
) -> PaircdStatus {
    guard(|| {
        let cache = ref_arg(cache, "cache")?;
        let config = to_config(ref_arg(config, "config")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cond: &[usize] = if n_cond == 0 {
            &[]
        } else if cond.is_null() {
            return Err(null("cond"));
        } else {
            std::slice::from_raw_parts(cond, n_cond)
        };
        let r = pair_ci(&cache.0, z, y, cond, &config).map_err(classify)?;
        *out = PaircdCiResult {
            mu_hat: r.mu_hat,
            t_total: r.t_total,
            statistic: r.statistic,
            df: r.df,
            p_value: r.p_value,
            reject: r.reject,
            early_stopped: r.early_stopped,
            degenerate: r.degenerate,
            m_used: r.m_used as u32,
            n_used: r.n_used as u32,
        };
        Ok(())
    })
}

/// Runs PC with `method` (`pairci`, `complete_case`, `testwise`,
/// `fz_single`, `fz_rubin`, `fz_vote`). `config` may be NULL for the
/// general-variant defaults; its seed also drives imputation.
///
/// # Safety
/// `ds` must be live, `method` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn paircd_discover(
    ds: *const PaircdDataset,
    method: *const c_char,
    alpha: f64,
    m: u32,
    config: *const PaircdCiConfig,
    out: *mut *mut PaircdGraph,
) -> PaircdStatus {
    guard(|| {
        let ds = ref_arg(ds, "dataset")?;
        let method: Method = str_arg(method, "method")?.parse().map_err(classify)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let ci = match config.as_ref() {
            Some(c) => to_config(c)?,
            None => CITestConfig::general(),
        };
        let config = DiscoverConfig {
            alpha,
            imputer: ImputerKind::Mice,
            mice: MiceConfig {
                m_imputations: m as usize,
                ..MiceConfig::default()
            },
            ci,
        }
        .with_seed(ci.seed);
        let d = discover(&ds.0, method, &config).map_err(classify)?;
        put(
            out,
            PaircdGraph {
                graph: d.graph,
                names: ds.0.column_names().to_vec(),
            },
        );
        Ok(())
    })
}

/// # Safety
/// `g` must be a live graph handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn paircd_graph_n_nodes(g: *const PaircdGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.p())
}

/// # Safety
/// `g` must be a live graph handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn paircd_graph_n_edges(g: *const PaircdGraph) -> usize {
    g.as_ref().map_or(0, |g| g.graph.n_edges())
}

/// Mark between `i` and `j`; out-of-range nodes read as no edge.
///
/// # Safety
/// `g` must be a live graph handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn paircd_graph_edge(g: *const PaircdGraph, i: usize, j: usize) -> PaircdEdge {
    let Some(g) = g.as_ref() else {
        return PaircdEdge::None;
    };
    let p = g.graph.p();
    if i >= p || j >= p || i == j || !g.graph.is_adjacent(i, j) {
        PaircdEdge::None
    } else if g.graph.has_directed(i, j) {
        PaircdEdge::Forward
    } else if g.graph.has_directed(j, i) {
        PaircdEdge::Backward
    } else {
        PaircdEdge::Undirected
    }
}

/// Graph as JSON (`p`, `names`, `directed`, `undirected`). Free the string
/// with [`paircd_string_free`].
///
/// # Safety
/// `g` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn paircd_graph_to_json(g: *const PaircdGraph, out: *mut *mut c_char) -> PaircdStatus {
    guard(|| {
        let g = ref_arg(g, "graph")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let json = serde_json::to_string(&g.graph.to_json(Some(&g.names))).map_err(|e| classify(e.into()))?;
        *out = CString::new(json).map_err(|e| invalid(e.to_string()))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `g` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn paircd_graph_free(g: *mut PaircdGraph) {
    if !g.is_null() {
        drop(Box::from_raw(g));
    }
}
