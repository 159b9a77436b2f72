//! C ABI over the diffsurv core.
//!
//! Every fallible call returns a `DsStatus`; on failure the message is kept in
//! a thread-local slot readable with `ds_last_error`. Schedules and models are
//! opaque handles owned by the caller and released with their `_free`
//! function. Matrices are row-major; permutation matrices are `n × n` with row
//! = sample and column = rank.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use diffsurv::autodiff::{Tape, Tensor};
use diffsurv::censoring::{build_qp, network_input, SurvivalRecord};
use diffsurv::losses::diffsurv_loss;
use diffsurv::metrics::c_index;
use diffsurv::model::Mlp;
use diffsurv::relaxperm::{relaxed_sort, RelaxationConfig, RelaxationKind};
use diffsurv::sortnet::{ComparatorSchedule, NetworkKind};
use diffsurv::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    NonFinite = 4,
    Io = 5,
    ParamFormat = 6,
    Internal = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DsNetwork {
    OddEven = 0,
    Bitonic = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DsRelaxation {
    Logistic = 0,
    Cauchy = 1,
}

/// Opaque comparator schedule.
pub struct DsSchedule(ComparatorSchedule);

/// Opaque trained risk model.
pub struct DsModel(Mlp);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> DsStatus {
    match err {
        Error::Shape(_) | Error::Axis { .. } => DsStatus::Shape,
        Error::NonFinite(_) | Error::Divergence { .. } => DsStatus::NonFinite,
        Error::Io(_) | Error::Csv { .. } => DsStatus::Io,
        Error::ParamFormat(_) => DsStatus::ParamFormat,
        _ => DsStatus::InvalidArgument,
    }
}

fn fail(status: DsStatus, msg: impl Into<String>) -> DsStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard(f: impl FnOnce() -> Result<(), DsStatus>) -> DsStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(DsStatus::Internal, "panic inside diffsurv"),
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, DsStatus>;
}

impl<T> OrStatus<T> for diffsurv::Result<T> {
    fn or_status(self) -> Result<T, DsStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn input<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], DsStatus> {
    if p.is_null() {
        return Err(fail(DsStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a, T>(p: *mut T, len: usize, name: &str) -> Result<&'a mut [T], DsStatus> {
    if p.is_null() {
        return Err(fail(DsStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, DsStatus> {
    p.as_ref().ok_or_else(|| fail(DsStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn records(times: *const f64, events: *const u8, n: usize) -> Result<Vec<SurvivalRecord>, DsStatus> {
    let times = input(times, n, "times")?;
    let events = input(events, n, "events")?;
    times
        .iter()
        .zip(events)
        .map(|(&t, &e)| SurvivalRecord::new(t, e != 0, Vec::new()).or_status())
        .collect()
}

fn relaxation(kind: DsRelaxation, beta: f64) -> Result<RelaxationConfig, DsStatus> {
    let kind = match kind {
        DsRelaxation::Logistic => RelaxationKind::Logistic,
        DsRelaxation::Cauchy => RelaxationKind::Cauchy,
    };
    RelaxationConfig::new(kind, beta).or_status()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn ds_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static nul-terminated string.
#[no_mangle]
pub extern "C" fn ds_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be a valid pointer to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ds_schedule_new(network: DsNetwork, n: usize, out: *mut *mut DsSchedule) -> DsStatus {
    guard(|| {
        let slot = output(out, 1, "out")?;
        let kind = match network {
            DsNetwork::OddEven => NetworkKind::OddEven,
            DsNetwork::Bitonic => NetworkKind::Bitonic,
        };
        let schedule = ComparatorSchedule::new(kind, n).or_status()?;
        slot[0] = Box::into_raw(Box::new(DsSchedule(schedule)));
        Ok(())
    })
}

/// # Safety
/// `schedule` must be null or a handle from `ds_schedule_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_schedule_free(schedule: *mut DsSchedule) {
    if !schedule.is_null() {
        drop(Box::from_raw(schedule));
    }
}

/// Number of wires, or 0 for a null handle.
///
/// # Safety
/// `schedule` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_schedule_n(schedule: *const DsSchedule) -> usize {
    schedule.as_ref().map_or(0, |s| s.0.n())
}

/// Number of layers, or 0 for a null handle.
///
/// # Safety
/// `schedule` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_schedule_depth(schedule: *const DsSchedule) -> usize {
    schedule.as_ref().map_or(0, |s| s.0.layers().len())
}

/// # Safety
/// `schedule` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_schedule_comparators(schedule: *const DsSchedule) -> usize {
    schedule.as_ref().map_or(0, |s| s.0.comparator_count())
}

/// Relaxed ascending sort of `z` (length n). Writes the `n × n` permutation
/// to `out_perm` and, if non-null, the relaxed sorted values to `out_sorted`.
///
/// # Safety
/// `z` must hold n values, `out_perm` n·n, and `out_sorted` n when non-null.
#[no_mangle]
pub unsafe extern "C" fn ds_relaxed_sort(
    schedule: *const DsSchedule,
    relax: DsRelaxation,
    beta: f64,
    z: *const f64,
    out_perm: *mut f64,
    out_sorted: *mut f64,
) -> DsStatus {
    guard(|| {
        let schedule = &handle(schedule, "schedule")?.0;
        let n = schedule.n();
        let z = input(z, n, "z")?;
        let out_perm = output(out_perm, n * n, "out_perm")?;
        let relax = relaxation(relax, beta)?;
        let tape = Tape::new();
        let zv = tape.constant(Tensor::vector(z.to_vec()));
        let perm = relaxed_sort(schedule, zv, relax).or_status()?;
        out_perm.copy_from_slice(perm.matrix.value().data());
        if !out_sorted.is_null() {
            output(out_sorted, n, "out_sorted")?.copy_from_slice(perm.relaxed_sorted.value().data());
        }
        Ok(())
    })
}

/// Possible-permutation matrix of n labelled samples as `n × n` 0/1 bytes.
///
/// # Safety
/// `times` and `events` must hold n values and `out` n·n bytes.
#[no_mangle]
pub unsafe extern "C" fn ds_build_qp(times: *const f64, events: *const u8, n: usize, out: *mut u8) -> DsStatus {
    guard(|| {
        let recs = records(times, events, n)?;
        let out = output(out, n * n, "out")?;
        let qp = build_qp(&recs).or_status()?;
        for i in 0..n {
            out[i * n..(i + 1) * n].copy_from_slice(qp.row(i));
        }
        Ok(())
    })
}

/// Diffsurv loss of one risk set given risk scores (higher = earlier event).
/// `out_grad`, when non-null, receives d loss / d score.
///
/// # Safety
/// `scores`, `times`, `events` must hold `schedule`'s n values; `out_loss`
/// must be writable; `out_grad` must be null or hold n values.
#[no_mangle]
pub unsafe extern "C" fn ds_diffsurv_loss(
    schedule: *const DsSchedule,
    relax: DsRelaxation,
    beta: f64,
    scores: *const f64,
    times: *const f64,
    events: *const u8,
    out_loss: *mut f64,
    out_grad: *mut f64,
) -> DsStatus {
    guard(|| {
        let schedule = &handle(schedule, "schedule")?.0;
        let n = schedule.n();
        let scores = input(scores, n, "scores")?;
        let recs = records(times, events, n)?;
        let out_loss = output(out_loss, 1, "out_loss")?;
        let relax = relaxation(relax, beta)?;
        let qp = build_qp(&recs).or_status()?;
        let tape = Tape::new();
        let h = tape.leaf(Tensor::vector(scores.to_vec()));
        let perm = relaxed_sort(schedule, network_input(h), relax).or_status()?;
        let loss = diffsurv_loss(&perm, &[qp]).or_status()?.scalar;
        out_loss[0] = loss.item();
        if !out_grad.is_null() {
            tape.backward(loss).or_status()?;
            output(out_grad, n, "out_grad")?.copy_from_slice(h.grad().data());
        }
        Ok(())
    })
}

/// Harrell's C-index. `out_comparable` may be null.
///
/// # Safety
/// `scores`, `times`, `events` must hold n values; `out_c` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ds_c_index(
    scores: *const f64,
    times: *const f64,
    events: *const u8,
    n: usize,
    out_c: *mut f64,
    out_comparable: *mut u64,
) -> DsStatus {
    guard(|| {
        let scores = input(scores, n, "scores")?;
        let recs = records(times, events, n)?;
        let out_c = output(out_c, 1, "out_c")?;
        let result = c_index(scores, &recs).or_status()?;
        out_c[0] = result.c_index;
        if !out_comparable.is_null() {
            *out_comparable = result.n_comparable;
        }
        Ok(())
    })
}

/// Loads a parameter file written by `diffsurv train`.
///
/// # Safety
/// `path` must be a nul-terminated string and `out` a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn ds_model_load(path: *const c_char, out: *mut *mut DsModel) -> DsStatus {
    guard(|| {
        if path.is_null() {
            return Err(fail(DsStatus::NullPointer, "`path` is null"));
        }
        let slot = output(out, 1, "out")?;
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(DsStatus::InvalidArgument, "`path` is not UTF-8"))?;
        let model = Mlp::load(Path::new(path)).or_status()?;
        slot[0] = Box::into_raw(Box::new(DsModel(model)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from `ds_model_load` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_model_free(model: *mut DsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Covariate count the model expects, or 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_model_input_dim(model: *const DsModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.input_dim())
}

/// Risk scores for `rows` row-major covariate vectors.
///
/// # Safety
/// `x` must hold rows·input_dim values and `out` rows values.
#[no_mangle]
pub unsafe extern "C" fn ds_model_predict(model: *const DsModel, x: *const f64, rows: usize, out: *mut f64) -> DsStatus {
    guard(|| {
        let model = &handle(model, "model")?.0;
        let x = input(x, rows * model.input_dim(), "x")?;
        let out = output(out, rows, "out")?;
        out.copy_from_slice(&model.predict(x).or_status()?);
        Ok(())
    })
}
