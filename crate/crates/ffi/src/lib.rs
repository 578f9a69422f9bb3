//! C ABI over the causal-shap library.
//!
//! Every fallible function returns a [`CsStatus`]; on failure a message is
//! available from [`cs_last_error_message`] on the same thread. Handles are
//! opaque and released with their `_free` function. Matrices are row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use causal_shap::attribution::{causal_shap, CausalSampler, Flag, SamplerConfig};
use causal_shap::data::{builtin_spec, load_csv, sample_sem, DataTable};
use causal_shap::discovery::{default_max_cond_size, pc};
use causal_shap::effects::{estimate_effects, CausalEffects, EffectsConfig};
use causal_shap::model::{expected_prediction, ForestParams, Model, ModelSpec, PredictionMode, Predictor};
use causal_shap::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Data = 4,
    Singular = 5,
    Model = 6,
    Discovery = 7,
    Effects = 8,
    Attribution = 9,
    Internal = 10,
}

/// Bit set in `cs_explain`'s flag output when normalization was skipped.
pub const CS_FLAG_DEGENERATE: u32 = 1;
/// Bit set when no feature has a directed path to the target.
pub const CS_FLAG_NO_CAUSAL_SIGNAL: u32 = 2;

/// A data table with a designated target column.
pub struct CsTable {
    inner: DataTable,
}

/// A trained predictor.
pub struct CsModel {
    inner: Model,
}

/// A discovered graph with effect weights and fitted node regressions.
pub struct CsExplainer {
    train: DataTable,
    effects: CausalEffects,
    sampler: CausalSampler,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CsStatus {
    match e {
        Error::Io { .. } => CsStatus::Io,
        Error::Csv(_) | Error::Data(_) => CsStatus::Data,
        Error::InvalidArgument(_) | Error::Config(_) | Error::Json(_) => CsStatus::InvalidArgument,
        Error::Singular(_) => CsStatus::Singular,
        Error::Model(_) | Error::Protocol(_) | Error::Timeout(_) | Error::ProcessExited(_) => CsStatus::Model,
        Error::Discovery(_) => CsStatus::Discovery,
        Error::Effects(_) => CsStatus::Effects,
        Error::Attribution(_) | Error::Evaluation(_) => CsStatus::Attribution,
    }
}

struct Failure(CsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(CsStatus::NullPointer, format!("{what} is null"))
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(CsStatus::InvalidArgument, message.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            CsStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            CsStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_out<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

/// Message of the last failed call on this thread, or NULL. Valid until the next call.
#[no_mangle]
pub extern "C" fn cs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a CSV file with a header row.
///
/// # Safety
/// `path` and `target` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_table_load_csv(path: *const c_char, target: *const c_char, out: *mut *mut CsTable) -> CsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let table = load_csv(Path::new(str_arg(path, "path")?), str_arg(target, "target")?)?;
        *out = Box::into_raw(Box::new(CsTable { inner: table }));
        Ok(())
    })
}

/// Builds a table from a row-major `n_rows × n_cols` matrix and `n_cols` column names.
///
/// # Safety
/// `data` must hold `n_rows * n_cols` doubles, `names` `n_cols` strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_table_from_rows(
    data: *const f64,
    n_rows: usize,
    n_cols: usize,
    names: *const *const c_char,
    target_index: usize,
    out: *mut *mut CsTable,
) -> CsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let len = n_rows.checked_mul(n_cols).ok_or_else(|| invalid("table size overflows"))?;
        let values = slice_arg(data, len, "data")?;
        let names = slice_arg(names, n_cols, "names")?
            .iter()
            .map(|&p| str_arg(p, "column name").map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        let columns = (0..n_cols)
            .map(|c| (0..n_rows).map(|r| values[r * n_cols + c]).collect())
            .collect();
        let table = DataTable::new(names, columns, target_index)?;
        *out = Box::into_raw(Box::new(CsTable { inner: table }));
        Ok(())
    })
}

/// Samples `n` rows of a built-in structural equation model.
///
/// # Safety
/// `spec` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_table_generate(spec: *const c_char, n: usize, seed: u64, out: *mut *mut CsTable) -> CsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let table = sample_sem(&builtin_spec(str_arg(spec, "spec")?, seed)?, n)?;
        *out = Box::into_raw(Box::new(CsTable { inner: table }));
        Ok(())
    })
}

/// Row count, or 0 for NULL.
///
/// # Safety
/// `table` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_table_rows(table: *const CsTable) -> usize {
    table.as_ref().map_or(0, |t| t.inner.row_count())
}

/// Feature count (target excluded), or 0 for NULL.
///
/// # Safety
/// `table` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_table_features(table: *const CsTable) -> usize {
    table.as_ref().map_or(0, |t| t.inner.n_features())
}

/// Copies row `row`'s features into `out` (length `len` = feature count).
///
/// # Safety
/// `table` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cs_table_feature_row(table: *const CsTable, row: usize, out: *mut f64, len: usize) -> CsStatus {
    guard(|| {
        let t = &ref_arg(table, "table")?.inner;
        if row >= t.row_count() || len != t.n_features() {
            return Err(invalid("row index or output length out of range"));
        }
        slice_out(out, len, "out")?.copy_from_slice(&t.feature_row(row));
        Ok(())
    })
}

/// # Safety
/// `table` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_table_free(table: *mut CsTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Ordinary (ridge ≥ 0) least squares on the table's features.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_model_train_linear(table: *const CsTable, ridge: f64, out: *mut *mut CsModel) -> CsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec = ModelSpec {
            ridge,
            ..ModelSpec::linear()
        };
        let model = spec.train(&ref_arg(table, "table")?.inner)?;
        *out = Box::into_raw(Box::new(CsModel { inner: model }));
        Ok(())
    })
}

/// Bagged CART forest; `probability` nonzero reads outputs as class-1 probabilities.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_model_train_forest(
    table: *const CsTable,
    n_trees: usize,
    max_depth: usize,
    min_leaf: usize,
    seed: u64,
    probability: i32,
    out: *mut *mut CsModel,
) -> CsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let params = ForestParams {
            n_trees,
            max_depth,
            min_leaf,
            seed,
            ..ForestParams::default()
        };
        let mode = if probability != 0 {
            PredictionMode::Probability
        } else {
            PredictionMode::Regression
        };
        let model = ModelSpec::random_forest(params, mode).train(&ref_arg(table, "table")?.inner)?;
        *out = Box::into_raw(Box::new(CsModel { inner: model }));
        Ok(())
    })
}

/// Predicts `n_rows` rows of width `n_features` into `out`.
///
/// # Safety
/// `rows` must hold `n_rows * n_features` doubles and `out` `n_rows` doubles.
#[no_mangle]
pub unsafe extern "C" fn cs_model_predict(
    model: *const CsModel,
    rows: *const f64,
    n_rows: usize,
    n_features: usize,
    out: *mut f64,
) -> CsStatus {
    guard(|| {
        let m = &ref_arg(model, "model")?.inner;
        if n_features != m.n_features() {
            return Err(invalid(format!(
                "model expects {} features, got {n_features}",
                m.n_features()
            )));
        }
        let len = n_rows.checked_mul(n_features).ok_or_else(|| invalid("batch size overflows"))?;
        let values = slice_arg(rows, len, "rows")?;
        let preds = m.predict_batch(&DMatrix::from_row_slice(n_rows, n_features, values))?;
        slice_out(out, n_rows, "out")?.copy_from_slice(&preds);
        Ok(())
    })
}

/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_model_free(model: *mut CsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Discovers a CPDAG on `train` (PC at level `alpha`), estimates causal weight
/// factors and fits the node regressions used for sampling.
///
/// # Safety
/// `train` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cs_explainer_new(train: *const CsTable, alpha: f64, out: *mut *mut CsExplainer) -> CsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let train = ref_arg(train, "train")?.inner.clone();
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(invalid(format!("alpha {alpha} must lie in (0, 1)")));
        }
        let result = pc(&train, alpha, default_max_cond_size(train.n_columns()))?;
        let effects = estimate_effects(&train, &result.cpdag, EffectsConfig::default())?;
        let sampler = CausalSampler::new(&train, effects.dag.clone())?;
        *out = Box::into_raw(Box::new(CsExplainer {
            train,
            effects,
            sampler,
        }));
        Ok(())
    })
}

/// Copies the causal weight factors (one per feature) into `out`.
///
/// # Safety
/// `explainer` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn cs_explainer_gamma(explainer: *const CsExplainer, out: *mut f64, len: usize) -> CsStatus {
    guard(|| {
        let gamma = ref_arg(explainer, "explainer")?.effects.gamma();
        if len != gamma.len() {
            return Err(invalid(format!("expected length {}, got {len}", gamma.len())));
        }
        slice_out(out, len, "out")?.copy_from_slice(gamma);
        Ok(())
    })
}

/// Causal SHAP values of `model` at `x`; `phi_out` receives the normalized values
/// and `flags_out` (optional) a bit set of `CS_FLAG_*`.
///
/// # Safety
/// Handles must be live; `x` and `phi_out` must hold `n_features` doubles.
#[no_mangle]
pub unsafe extern "C" fn cs_explain(
    explainer: *const CsExplainer,
    model: *const CsModel,
    x: *const f64,
    n_features: usize,
    mc_samples: usize,
    mc_iterations: usize,
    seed: u64,
    phi_out: *mut f64,
    flags_out: *mut u32,
) -> CsStatus {
    guard(|| {
        let e = ref_arg(explainer, "explainer")?;
        let m = &ref_arg(model, "model")?.inner;
        if n_features != e.train.n_features() {
            return Err(invalid(format!(
                "explainer has {} features, got {n_features}",
                e.train.n_features()
            )));
        }
        let x = slice_arg(x, n_features, "x")?;
        let phi = slice_out(phi_out, n_features, "phi_out")?;
        let config = SamplerConfig {
            mc_samples,
            mc_iterations,
            ..SamplerConfig::new(seed)
        };
        let baseline = expected_prediction(m, &e.train)?.expected_prediction;
        let result = causal_shap(m, x, &e.sampler, &e.effects.weights, baseline, &config, 0)?;
        phi.copy_from_slice(&result.phi_normalized);
        if let Some(flags) = flags_out.as_mut() {
            *flags = result.flags.iter().fold(0, |acc, f| {
                acc | match f {
                    Flag::DegenerateNormalization => CS_FLAG_DEGENERATE,
                    Flag::NoCausalSignal => CS_FLAG_NO_CAUSAL_SIGNAL,
                }
            });
        }
        Ok(())
    })
}

/// # Safety
/// `explainer` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_explainer_free(explainer: *mut CsExplainer) {
    if !explainer.is_null() {
        drop(Box::from_raw(explainer));
    }
}
