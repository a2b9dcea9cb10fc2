//! C ABI over `nbest-core`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `_free` function. Every fallible call returns an [`NbStatus`];
//! on failure the message is available from [`nb_last_error_message`] on
//! the same thread. Strings returned through out-parameters are JSON,
//! NUL-terminated, and must be released with [`nb_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nbest_core::error::Error;
use nbest_core::grammar::parse_chart;
use nbest_core::pipeline::io::{join_corpus, parse_nbest};
use nbest_core::pipeline::{run_utterance, Config, GrammarBundle};
use nbest_core::preference::PreferenceModel;
use nbest_core::repair::{apply_candidates, detect_repairs};

/// Result of an FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NbStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidData = 4,
    Invariant = 5,
    Panic = 6,
}

/// Lexicon, general grammar, specialised grammar and LR table.
pub struct NbBundle {
    bundle: GrammarBundle,
    config: Config,
}

/// A trained preference model.
pub struct NbModel {
    model: PreferenceModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(NbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Io { .. } => NbStatus::Io,
            Error::Invariant(_) => NbStatus::Invariant,
            _ => NbStatus::InvalidData,
        };
        Failure(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> NbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            NbStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside nbest");
            NbStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(NbStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(NbStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(NbStatus::NullArgument, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(NbStatus::NullArgument, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(NbStatus::NullArgument, "output pointer is null".into()));
    }
    let c = CString::new(s).map_err(|_| Failure(NbStatus::Invariant, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(|w| w.to_lowercase()).collect()
}

/// Load `lexicon.tsv`, `grammar.txt`, `specialized.txt` and `lr_table.txt`
/// from `data_dir`, with default configuration.
///
/// # Safety
/// `data_dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nb_bundle_load(data_dir: *const c_char, out: *mut *mut NbBundle) -> NbStatus {
    guard(|| {
        let dir = Path::new(text(data_dir, "data_dir")?);
        let bundle = GrammarBundle::load(
            &dir.join("lexicon.tsv"),
            &dir.join("grammar.txt"),
            &dir.join("specialized.txt"),
            &dir.join("lr_table.txt"),
        )?;
        put(
            out,
            NbBundle {
                bundle,
                config: Config::default(),
            },
        )
    })
}

/// Override one configuration setting, e.g. `("repair", "no")`.
///
/// # Safety
/// `bundle` must come from [`nb_bundle_load`]; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn nb_bundle_set(bundle: *mut NbBundle, key: *const c_char, value: *const c_char) -> NbStatus {
    guard(|| {
        let b = bundle
            .as_mut()
            .ok_or_else(|| Failure(NbStatus::NullArgument, "bundle is null".into()))?;
        let mut c = b.config.clone();
        c.set(text(key, "key")?, text(value, "value")?)
            .map_err(|m| Failure(NbStatus::InvalidData, m))?;
        c.validate()?;
        b.config = c;
        Ok(())
    })
}

/// # Safety
/// `bundle` must come from [`nb_bundle_load`] or be null.
#[no_mangle]
pub unsafe extern "C" fn nb_bundle_free(bundle: *mut NbBundle) {
    if !bundle.is_null() {
        drop(Box::from_raw(bundle));
    }
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nb_model_load(path: *const c_char, out: *mut *mut NbModel) -> NbStatus {
    guard(|| {
        let model = PreferenceModel::load(Path::new(text(path, "path")?))?;
        put(out, NbModel { model })
    })
}

/// A model that ranks by acoustic score alone.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn nb_model_speech_only(out: *mut *mut NbModel) -> NbStatus {
    guard(|| {
        put(
            out,
            NbModel {
                model: PreferenceModel::speech_only(),
            },
        )
    })
}

/// # Safety
/// `model` must come from a model constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn nb_model_free(model: *mut NbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Repair candidates for one sentence:
/// `{"candidates": [...], "corrected": "..."}`.
///
/// # Safety
/// Pointers must be valid as described in the module documentation.
#[no_mangle]
pub unsafe extern "C" fn nb_detect_repairs(
    bundle: *const NbBundle,
    sentence: *const c_char,
    out_json: *mut *mut c_char,
) -> NbStatus {
    guard(|| {
        let b = handle(bundle, "bundle")?;
        let w = words(text(sentence, "sentence")?);
        let candidates = detect_repairs(&b.bundle.lexicon, &w, b.config.span_cap);
        let v = serde_json::json!({
            "candidates": candidates,
            "corrected": apply_candidates(&w, &candidates).join(" "),
        });
        put_string(out_json, v.to_string())
    })
}

/// Derivation signatures of one sentence as a JSON array. `specialized`
/// non-zero parses with the specialised grammar, falling back to the
/// general one as configured.
///
/// # Safety
/// Pointers must be valid as described in the module documentation.
#[no_mangle]
pub unsafe extern "C" fn nb_parse(
    bundle: *const NbBundle,
    sentence: *const c_char,
    specialized: i32,
    out_json: *mut *mut c_char,
) -> NbStatus {
    guard(|| {
        let b = handle(bundle, "bundle")?;
        let w = words(text(sentence, "sentence")?);
        let trees = if specialized != 0 {
            b.bundle.parse_hypothesis(&w, b.config.fallback_general).trees
        } else {
            parse_chart(&b.bundle.general, &b.bundle.lexicon, &w)
        };
        let sigs: Vec<String> = trees.iter().map(|t| t.signature()).collect();
        put_string(out_json, serde_json::to_string(&sigs).expect("strings serialise"))
    })
}

/// Select one analysis per utterance of an N-best list given in the
/// tab-separated file format. Writes a JSON array of selection results.
///
/// # Safety
/// Pointers must be valid as described in the module documentation.
#[no_mangle]
pub unsafe extern "C" fn nb_select(
    bundle: *const NbBundle,
    model: *const NbModel,
    nbest_text: *const c_char,
    out_json: *mut *mut c_char,
) -> NbStatus {
    guard(|| {
        let b = handle(bundle, "bundle")?;
        let m = handle(model, "model")?;
        let corpus = join_corpus(parse_nbest(text(nbest_text, "nbest_text")?)?, None)?;
        let mut parts = Vec::with_capacity(corpus.len());
        for u in &corpus {
            let r = run_utterance(&u.truncated(b.config.nbest_n), &b.bundle, &m.model, &b.config)?;
            parts.push(r.to_json());
        }
        put_string(out_json, format!("[{}]", parts.join(",")))
    })
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn nb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must come from this library or be null.
#[no_mangle]
pub unsafe extern "C" fn nb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
