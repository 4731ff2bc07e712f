//! C ABI over the selectivbench toolkit.
//!
//! Every fallible function returns an [`SbStatus`]; on failure the message is
//! available from [`sb_last_error_message`] on the same thread. Handles are
//! opaque and must be released with their `_free` function. Strings returned
//! to the caller are released with [`sb_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use selectivbench::complexity::topological_entropy;
use selectivbench::grammar::{build_grammar, Grammar, GrammarConfig};
use selectivbench::kernels::{count_gate_params, state_size, ModelKind, ModelSpec};
use selectivbench::oracle::oracle_eval;
use selectivbench::tasks::{generate, DataSplit, Dataset, GapTest, TaskConfig};
use selectivbench::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidConfig = 3,
    ConstructionFailed = 4,
    Io = 5,
    Format = 6,
    HashMismatch = 7,
    Numerical = 8,
    Panic = 9,
    Other = 10,
}

/// Opaque grammar handle.
pub struct SbGrammar(Grammar);

/// Opaque handle to one generated dataset (or a gap-sweep family).
pub struct SbDataset(Vec<Dataset>);

/// Task generation settings. `split` is 0 for train, 1 for test.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SbTaskConfig {
    pub task: u8,
    pub split: u8,
    pub t_min: usize,
    pub t_max: usize,
    pub n_min: usize,
    pub n_max: usize,
    pub test_gap: usize,
    pub gamma: f32,
    pub p_gap: f64,
    pub num_sequences: usize,
    pub seed: u64,
}

/// Oracle evaluation summary.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SbOracleResult {
    pub sequences: usize,
    pub positions: usize,
    pub mismatches: usize,
    pub failures: usize,
    /// NaN when undefined.
    pub accuracy_all: f64,
    pub accuracy_symbols: f64,
    pub certified: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> SbStatus {
    match err {
        Error::InvalidConfig(_) | Error::UnknownModel { .. } | Error::UnknownProfile { .. } => SbStatus::InvalidConfig,
        Error::ConstructionFailed { .. } | Error::InvalidGrammar(_) | Error::EmptyInitialSet => {
            SbStatus::ConstructionFailed
        }
        Error::Io(_) => SbStatus::Io,
        Error::Format(_) | Error::Json(_) | Error::Toml(_) => SbStatus::Format,
        Error::HashMismatch { .. } => SbStatus::HashMismatch,
        Error::NonConvergence { .. } | Error::NonFinite { .. } => SbStatus::Numerical,
        _ => SbStatus::Other,
    }
}

/// Runs `f`, recording errors and containing panics.
fn guard(f: impl FnOnce() -> Result<(), (SbStatus, String)>) -> SbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {msg}"));
            SbStatus::Panic
        }
    }
}

fn lib<T>(r: selectivbench::Result<T>) -> Result<T, (SbStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (SbStatus, String) {
    (SbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn cstr<'a>(p: *const c_char, what: &str) -> Result<&'a str, (SbStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (SbStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (SbStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a grammar.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_grammar_build(
    num_observables: usize,
    ambiguity: usize,
    p_transition: f64,
    p_end: f64,
    seed: u64,
    out: *mut *mut SbGrammar,
) -> SbStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let config = GrammarConfig {
            num_observables,
            ambiguity,
            p_transition,
            p_end,
            seed,
            ..GrammarConfig::default()
        };
        let g = lib(build_grammar(&config))?;
        *out = Box::into_raw(Box::new(SbGrammar(g)));
        Ok(())
    })
}

/// Parses a grammar from its JSON document.
///
/// # Safety
/// `json` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_grammar_from_json(json: *const c_char, out: *mut *mut SbGrammar) -> SbStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let g = lib(Grammar::from_json(cstr(json, "json")?))?;
        *out = Box::into_raw(Box::new(SbGrammar(g)));
        Ok(())
    })
}

/// Serializes a grammar; free the result with `sb_string_free`.
///
/// # Safety
/// `grammar` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_grammar_to_json(grammar: *const SbGrammar, out: *mut *mut c_char) -> SbStatus {
    guard(|| {
        let g = grammar.as_ref().ok_or_else(|| null("grammar"))?;
        let out = out_ref(out, "out")?;
        let text = lib(g.0.to_json())?;
        *out = CString::new(text).expect("JSON has no nul bytes").into_raw();
        Ok(())
    })
}

/// # Safety
/// `grammar` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sb_grammar_free(grammar: *mut SbGrammar) {
    if !grammar.is_null() {
        drop(Box::from_raw(grammar));
    }
}

/// Vocabulary size including the terminal symbol; 0 for a null handle.
///
/// # Safety
/// `grammar` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_grammar_vocab_size(grammar: *const SbGrammar) -> usize {
    grammar.as_ref().map_or(0, |g| g.0.vocab_size())
}

/// Number of non-terminal latent states; 0 for a null handle.
///
/// # Safety
/// `grammar` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_grammar_latent_count(grammar: *const SbGrammar) -> usize {
    grammar.as_ref().map_or(0, |g| g.0.latent_count())
}

/// # Safety
/// `grammar` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_grammar_topological_entropy(grammar: *const SbGrammar, out: *mut f64) -> SbStatus {
    guard(|| {
        let g = grammar.as_ref().ok_or_else(|| null("grammar"))?;
        *out_ref(out, "out")? = lib(topological_entropy(&g.0))?;
        Ok(())
    })
}

/// Writes whether the grammar is exactly disambiguable.
///
/// # Safety
/// `grammar` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_grammar_validate(grammar: *const SbGrammar, out: *mut bool) -> SbStatus {
    guard(|| {
        let g = grammar.as_ref().ok_or_else(|| null("grammar"))?;
        *out_ref(out, "out")? = g.0.validate_disambiguable().passed;
        Ok(())
    })
}

/// Default task settings (Task 1, train split, 1000 sequences).
#[no_mangle]
pub extern "C" fn sb_task_config_default() -> SbTaskConfig {
    let d = TaskConfig::default();
    SbTaskConfig {
        task: d.task,
        split: 0,
        t_min: d.t_min,
        t_max: d.t_max,
        n_min: d.n_min,
        n_max: d.n_max,
        test_gap: 10,
        gamma: d.gamma,
        p_gap: d.p_gap,
        num_sequences: d.num_sequences,
        seed: d.seed,
    }
}

fn task_config(c: &SbTaskConfig) -> Result<TaskConfig, (SbStatus, String)> {
    let split = match c.split {
        0 => DataSplit::Train,
        1 => DataSplit::Test,
        other => return Err((SbStatus::InvalidArgument, format!("split must be 0 or 1, got {other}"))),
    };
    Ok(TaskConfig {
        task: c.task,
        t_min: c.t_min,
        t_max: c.t_max,
        n_min: c.n_min,
        n_max: c.n_max,
        gap_test: GapTest::Fixed(c.test_gap),
        gamma: c.gamma,
        p_gap: c.p_gap,
        split,
        num_sequences: c.num_sequences,
        seed: c.seed,
    })
}

/// Generates a dataset from a grammar.
///
/// # Safety
/// `grammar` must be a live handle; `config` and `out` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_generate(
    grammar: *const SbGrammar,
    config: *const SbTaskConfig,
    out: *mut *mut SbDataset,
) -> SbStatus {
    guard(|| {
        let g = grammar.as_ref().ok_or_else(|| null("grammar"))?;
        let c = task_config(config.as_ref().ok_or_else(|| null("config"))?)?;
        let out = out_ref(out, "out")?;
        let d = lib(generate(&g.0, &c))?;
        *out = Box::into_raw(Box::new(SbDataset(d)));
        Ok(())
    })
}

/// Total sequences in the dataset; 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_sequence_count(dataset: *const SbDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.iter().map(|d| d.streams.len()).sum())
}

/// Total tokens in the dataset; 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_token_count(dataset: *const SbDataset) -> usize {
    dataset
        .as_ref()
        .map_or(0, |d| d.0.iter().flat_map(|d| &d.streams).map(|s| s.len()).sum())
}

/// # Safety
/// `dataset` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sb_dataset_free(dataset: *mut SbDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Runs the oracle over every sequence of the dataset.
///
/// # Safety
/// Handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_oracle_eval(
    grammar: *const SbGrammar,
    dataset: *const SbDataset,
    out: *mut SbOracleResult,
) -> SbStatus {
    guard(|| {
        let g = grammar.as_ref().ok_or_else(|| null("grammar"))?;
        let d = dataset.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out_ref(out, "out")?;
        let mut total = SbOracleResult {
            certified: !d.0.is_empty(),
            ..SbOracleResult::default()
        };
        let (mut hits_all, mut hits_sym, mut sym_positions) = (0.0, 0.0, 0usize);
        for ds in &d.0 {
            let r = oracle_eval(&g.0, ds);
            total.sequences += r.sequences;
            total.positions += r.positions;
            total.mismatches += r.mismatches.len();
            total.failures += r.failures.len();
            total.certified &= r.certified();
            hits_all += r.accuracy_all.unwrap_or(0.0) * r.positions as f64;
            hits_sym += r.accuracy_symbols.unwrap_or(0.0) * r.symbol_positions as f64;
            sym_positions += r.symbol_positions;
        }
        let ratio = |hits: f64, n: usize| if n == 0 { f64::NAN } else { hits / n as f64 };
        total.accuracy_all = ratio(hits_all, total.positions);
        total.accuracy_symbols = ratio(hits_sym, sym_positions);
        *out = total;
        Ok(())
    })
}

unsafe fn model_spec(
    model: *const c_char,
    d: usize,
    n_heads: usize,
    d_state: usize,
    n_householder: usize,
    expansion: usize,
) -> Result<ModelSpec, (SbStatus, String)> {
    let kind: ModelKind = lib(cstr(model, "model")?.parse())?;
    let spec = ModelSpec {
        kind,
        d,
        n_heads,
        d_state,
        n_householder,
        expansion,
        gla_tau: 16.0,
    };
    lib(spec.validate())?;
    Ok(spec)
}

/// Transition-gate parameter count for a model name such as `"deltanet"`.
///
/// # Safety
/// `model` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_gate_params(
    model: *const c_char,
    d: usize,
    n_heads: usize,
    d_state: usize,
    n_householder: usize,
    expansion: usize,
    out: *mut u64,
) -> SbStatus {
    guard(|| {
        let spec = model_spec(model, d, n_heads, d_state, n_householder, expansion)?;
        *out_ref(out, "out")? = count_gate_params(&spec);
        Ok(())
    })
}

/// Recurrent state size. Fails with `InvalidArgument` for softmax attention,
/// whose cache is unbounded.
///
/// # Safety
/// `model` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sb_state_size(
    model: *const c_char,
    d: usize,
    n_heads: usize,
    d_state: usize,
    n_householder: usize,
    expansion: usize,
    out: *mut u64,
) -> SbStatus {
    guard(|| {
        let spec = model_spec(model, d, n_heads, d_state, n_householder, expansion)?;
        let size = state_size(&spec)
            .ok_or_else(|| (SbStatus::InvalidArgument, format!("{} has no fixed-size state", spec.kind)))?;
        *out_ref(out, "out")? = size;
        Ok(())
    })
}
