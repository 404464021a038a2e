//! C ABI for the tfc solver.
//!
//! Every fallible call returns a [`TfcStatus`]; on failure the message is
//! available from [`tfc_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Panics never cross
//! the boundary: they surface as [`TfcStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::slice;

use tfc::io::{self, IoError};
use tfc::model::{evaluate, Assignment, Balance, Instance, ModelError, ObjectiveBreakdown};
use tfc::relax::LpStatus;
use tfc::solve::{self, Algorithm, ReferenceMode, SolveError, SolveOptions, SolveReport};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Infeasible = 4,
    IterationLimit = 5,
    SolverFailure = 6,
    Io = 7,
    Panic = 8,
    TimeLimit = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfcBalanceKind {
    Lambda = 0,
    Alpha = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfcAlgorithm {
    Exact = 0,
    PipageL1 = 1,
    RpipageL2 = 2,
    Greedy = 3,
    Random = 4,
}

impl From<TfcAlgorithm> for Algorithm {
    fn from(a: TfcAlgorithm) -> Self {
        match a {
            TfcAlgorithm::Exact => Algorithm::Exact,
            TfcAlgorithm::PipageL1 => Algorithm::PipageL1,
            TfcAlgorithm::RpipageL2 => Algorithm::RpipageL2,
            TfcAlgorithm::Greedy => Algorithm::Greedy,
            TfcAlgorithm::Random => Algorithm::Random,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfcObjective {
    pub task_satisfaction: f64,
    pub social_satisfaction: f64,
    pub lambda: f64,
    pub total: f64,
}

impl From<ObjectiveBreakdown> for TfcObjective {
    fn from(b: ObjectiveBreakdown) -> Self {
        TfcObjective {
            task_satisfaction: b.task_satisfaction,
            social_satisfaction: b.social_satisfaction,
            lambda: b.lambda,
            total: b.total,
        }
    }
}

/// Zero in `sparsify`, `compact_target`, `max_lp_iterations`, `lp_time_limit` or
/// `exact_budget` selects "off" or the library default. `lp_time_limit` is in
/// seconds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TfcSolveOptions {
    pub algorithm: TfcAlgorithm,
    pub seed: u64,
    pub repetitions: usize,
    pub sparsify: f64,
    pub compact_target: usize,
    pub max_lp_iterations: usize,
    pub lp_time_limit: f64,
    pub exact_budget: u64,
}

impl TfcSolveOptions {
    fn to_options(self) -> SolveOptions {
        let d = SolveOptions::default();
        SolveOptions {
            algorithm: self.algorithm.into(),
            seed: self.seed,
            repetitions: self.repetitions,
            sparsify: (self.sparsify != 0.0).then_some(self.sparsify),
            compact: (self.compact_target != 0).then_some(self.compact_target),
            reference: ReferenceMode::Auto,
            max_lp_iterations: (self.max_lp_iterations != 0).then_some(self.max_lp_iterations),
            lp_time_limit: (self.lp_time_limit != 0.0).then_some(self.lp_time_limit),
            exact_budget: if self.exact_budget == 0 { d.exact_budget } else { self.exact_budget },
        }
    }
}

/// Opaque problem instance.
pub struct TfcInstance {
    inner: Instance,
}

/// Opaque solve result.
pub struct TfcReport {
    report: SolveReport,
    tasks: Vec<usize>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(TfcStatus, String);

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let status = match &e {
            IoError::File { .. } => TfcStatus::Io,
            IoError::Model(ModelError::Infeasible(_)) => TfcStatus::Infeasible,
            IoError::Model(_) | IoError::Invalid(_) => TfcStatus::InvalidArgument,
            _ => TfcStatus::Parse,
        };
        Failure(status, e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::Infeasible(_) => TfcStatus::Infeasible,
            _ => TfcStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        let status = match &e {
            SolveError::Options(_) => TfcStatus::InvalidArgument,
            _ => match e.lp_limit() {
                Some(LpStatus::TimeLimit) => TfcStatus::TimeLimit,
                Some(_) => TfcStatus::IterationLimit,
                None => TfcStatus::SolverFailure,
            },
        };
        Failure(status, e.to_string())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TfcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            TfcStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal panic: {message}"));
            TfcStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(TfcStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(TfcStatus::InvalidArgument, format!("`{what}` is not UTF-8")))
}

/// Empty slices may come with a null pointer.
unsafe fn array<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    match (p.is_null(), len) {
        (_, 0) => Ok(&[]),
        (true, _) => Err(null(what)),
        (false, n) => Ok(slice::from_raw_parts(p, n)),
    }
}

unsafe fn instance<'a>(p: *const TfcInstance) -> Result<&'a Instance, Failure> {
    p.as_ref().map(|i| &i.inner).ok_or_else(|| null("instance"))
}

unsafe fn report<'a>(p: *const TfcReport) -> Result<&'a TfcReport, Failure> {
    p.as_ref().ok_or_else(|| null("report"))
}

unsafe fn emit<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message for the last failed call on this thread, or null after a success. The
/// pointer stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn tfc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses the canonical instance text format.
///
/// # Safety
/// `text` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tfc_instance_parse(text: *const c_char, out: *mut *mut TfcInstance) -> TfcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = io::parse_instance(c_str(text, "text")?)?;
        emit(out, TfcInstance { inner });
        Ok(())
    })
}

/// Loads an instance file in the canonical format.
///
/// # Safety
/// `path` must be a nul-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tfc_instance_load(path: *const c_char, out: *mut *mut TfcInstance) -> TfcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = io::load_instance(Path::new(c_str(path, "path")?))?;
        emit(out, TfcInstance { inner });
        Ok(())
    })
}

/// Builds an instance from index arrays. Nodes are named `v0, v1, ...` and
/// tasks `t0, t1, ...`.
///
/// # Safety
/// Each pointer must reference the stated number of elements (or be null when
/// the count is zero); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tfc_instance_from_arrays(
    num_nodes: usize,
    num_tasks: usize,
    capacities: *const usize,
    num_edges: usize,
    edge_u: *const usize,
    edge_v: *const usize,
    edge_weight: *const f64,
    num_preferences: usize,
    pref_node: *const usize,
    pref_task: *const usize,
    pref_value: *const f64,
    balance_kind: TfcBalanceKind,
    balance_value: f64,
    out: *mut *mut TfcInstance,
) -> TfcStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let caps = array(capacities, num_tasks, "capacities")?.to_vec();
        let (u, v, w) = (
            array(edge_u, num_edges, "edge_u")?,
            array(edge_v, num_edges, "edge_v")?,
            array(edge_weight, num_edges, "edge_weight")?,
        );
        let (pn, pt, pv) = (
            array(pref_node, num_preferences, "pref_node")?,
            array(pref_task, num_preferences, "pref_task")?,
            array(pref_value, num_preferences, "pref_value")?,
        );
        let edges = (0..num_edges).map(|i| (u[i], v[i], w[i])).collect();
        let prefs = (0..num_preferences).map(|i| (pn[i], pt[i], pv[i])).collect();
        let balance = match balance_kind {
            TfcBalanceKind::Lambda => Balance::Lambda(balance_value),
            TfcBalanceKind::Alpha => Balance::Alpha(balance_value),
        };
        let inner = Instance::from_indexed(num_nodes, caps, edges, prefs, balance)?;
        emit(out, TfcInstance { inner });
        Ok(())
    })
}

/// # Safety
/// `inst` must come from a `tfc_instance_*` constructor and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tfc_instance_free(inst: *mut TfcInstance) {
    if !inst.is_null() {
        drop(Box::from_raw(inst));
    }
}

/// Number of individuals, or 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tfc_instance_num_nodes(inst: *const TfcInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.num_nodes())
}

/// Number of tasks, or 0 for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tfc_instance_num_tasks(inst: *const TfcInstance) -> usize {
    inst.as_ref().map_or(0, |i| i.inner.num_tasks())
}

/// Resolved λ, or NaN for a null handle.
///
/// # Safety
/// `inst` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tfc_instance_lambda(inst: *const TfcInstance) -> f64 {
    inst.as_ref().map_or(f64::NAN, |i| i.inner.lambda())
}

/// Objective of the assignment `tasks[v]` (task index per node).
///
/// # Safety
/// `tasks` must hold `len` elements; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tfc_evaluate(
    inst: *const TfcInstance,
    tasks: *const usize,
    len: usize,
    out: *mut TfcObjective,
) -> TfcStatus {
    guard(|| {
        let inst = instance(inst)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let tasks = array(tasks, len, "tasks")?.to_vec();
        let a = Assignment::checked(inst, tasks)?;
        *out = evaluate(inst, &a)?.into();
        Ok(())
    })
}

/// Defaults: randomized rounding on L2, seed 0, one repetition, no speedups.
#[no_mangle]
pub extern "C" fn tfc_solve_options_default() -> TfcSolveOptions {
    TfcSolveOptions {
        algorithm: TfcAlgorithm::RpipageL2,
        seed: 0,
        repetitions: 1,
        sparsify: 0.0,
        compact_target: 0,
        max_lp_iterations: 0,
        lp_time_limit: 0.0,
        exact_budget: 0,
    }
}

/// Runs the full pipeline. A null `options` uses the defaults. If the LP stops
/// at its iteration or time limit the report is still produced and the call
/// returns `IterationLimit` or `TimeLimit`.
///
/// # Safety
/// `inst` must be a live handle, `options` null or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tfc_solve(
    inst: *const TfcInstance,
    options: *const TfcSolveOptions,
    out: *mut *mut TfcReport,
) -> TfcStatus {
    let mut limited = None;
    let status = guard(|| {
        let inst = instance(inst)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let opts = options.as_ref().copied().unwrap_or_else(|| tfc_solve_options_default()).to_options();
        let report = solve::solve(inst, &opts)?;
        let tasks = report.best_assignment(inst)?.tasks().to_vec();
        limited = report.results.relaxation.as_ref().map(|r| r.status).filter(|s| s.is_limit());
        emit(out, TfcReport { report, tasks });
        Ok(())
    });
    match (status, limited) {
        (TfcStatus::Ok, Some(LpStatus::TimeLimit)) => {
            set_last_error("LP stopped at the time limit");
            TfcStatus::TimeLimit
        }
        (TfcStatus::Ok, Some(_)) => {
            set_last_error("LP stopped at the iteration limit");
            TfcStatus::IterationLimit
        }
        _ => status,
    }
}

/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tfc_report_objective(report: *const TfcReport, out: *mut TfcObjective) -> TfcStatus {
    guard(|| {
        let r = self::report(report)?;
        *out.as_mut().ok_or_else(|| null("out"))? = r.report.results.objective.into();
        Ok(())
    })
}

/// Number of entries [`tfc_report_assignment`] writes, or 0 for a null handle.
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tfc_report_len(report: *const TfcReport) -> usize {
    report.as_ref().map_or(0, |r| r.tasks.len())
}

/// Copies the best assignment (task index per node) into `tasks`.
///
/// # Safety
/// `tasks` must have room for `len` elements.
#[no_mangle]
pub unsafe extern "C" fn tfc_report_assignment(report: *const TfcReport, tasks: *mut usize, len: usize) -> TfcStatus {
    guard(|| {
        let r = self::report(report)?;
        if len != r.tasks.len() {
            return Err(Failure(
                TfcStatus::InvalidArgument,
                format!("buffer holds {len}, assignment has {}", r.tasks.len()),
            ));
        }
        if tasks.is_null() && len > 0 {
            return Err(null("tasks"));
        }
        if len > 0 {
            slice::from_raw_parts_mut(tasks, len).copy_from_slice(&r.tasks);
        }
        Ok(())
    })
}

/// Full report as JSON. Release the string with [`tfc_string_free`].
///
/// # Safety
/// `report` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tfc_report_to_json(report: *const TfcReport, out: *mut *mut c_char) -> TfcStatus {
    guard(|| {
        let r = self::report(report)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = serde_json::to_string(&r.report).map_err(|e| Failure(TfcStatus::SolverFailure, e.to_string()))?;
        *out = CString::new(text).expect("JSON has no nul bytes").into_raw();
        Ok(())
    })
}

/// # Safety
/// `report` must come from [`tfc_solve`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tfc_report_free(report: *mut TfcReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn tfc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
