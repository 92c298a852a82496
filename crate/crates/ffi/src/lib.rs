//! C interface to the kgpath engine.
//!
//! Objects cross the boundary as opaque handles created by `kgp_*_new` or
//! `kgp_*_load` and released by the matching `kgp_*_free`. Fallible calls
//! return a [`KgpStatus`]; the message of the last failure on the calling
//! thread is available from [`kgp_last_error`]. Strings returned as
//! `char *` are owned by the caller and released with [`kgp_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use kgpath::answerer::{answer_question, AnswerOutcome, AnswerSource};
use kgpath::backend::InMemoryStore;
use kgpath::config::{parse_config, EngineConfig, PartialConfig};
use kgpath::dot::export_dot;
use kgpath::gateway::ScriptedAgent;
use kgpath::ipg::TopicMap;
use kgpath::metering::ApproxTokenCounter;
use kgpath::EngineError;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KgpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Config = 4,
    NoTopic = 5,
    Backend = 6,
    Agent = 7,
    Panic = 8,
}

/// In-memory knowledge graph.
pub struct KgpStore(InMemoryStore);

/// Agent replaying a JSONL script.
pub struct KgpAgent(ScriptedAgent);

/// Result of answering one question.
pub struct KgpOutcome {
    inner: AnswerOutcome,
    answer: CString,
    source: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: KgpStatus, msg: impl Into<String>) -> KgpStatus {
    set_error(msg);
    status
}

fn engine_status(e: &EngineError) -> KgpStatus {
    match e {
        EngineError::NoTopicEntities => KgpStatus::NoTopic,
        EngineError::Backend(_) => KgpStatus::Backend,
        EngineError::Agent(_) => KgpStatus::Agent,
        EngineError::Config(_) => KgpStatus::Config,
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, KgpStatus> {
    if p.is_null() {
        return Err(fail(KgpStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(KgpStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn optional_text<'a>(p: *const c_char, what: &str) -> Result<Option<&'a str>, KgpStatus> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(Some)
    }
}

fn guarded(f: impl FnOnce() -> Result<(), KgpStatus>) -> KgpStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KgpStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => fail(KgpStatus::Panic, "internal panic"),
    }
}

fn owned(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn kgp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Loads a tab-separated triple file and an optional label file.
///
/// # Safety
/// Paths must be null or NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kgp_store_load(
    triples_path: *const c_char,
    labels_path: *const c_char,
    out: *mut *mut KgpStore,
) -> KgpStatus {
    guarded(|| {
        if out.is_null() {
            return Err(fail(KgpStatus::NullArgument, "out is null"));
        }
        let triples = text(triples_path, "triples_path")?;
        let labels = optional_text(labels_path, "labels_path")?;
        let store = InMemoryStore::load(Path::new(triples), labels.map(Path::new))
            .map_err(|e| fail(KgpStatus::Io, e.to_string()))?;
        *out = Box::into_raw(Box::new(KgpStore(store)));
        Ok(())
    })
}

/// # Safety
/// `store` must come from [`kgp_store_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn kgp_store_free(store: *mut KgpStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

/// Loads a JSONL agent script.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kgp_agent_load(path: *const c_char, out: *mut *mut KgpAgent) -> KgpStatus {
    guarded(|| {
        if out.is_null() {
            return Err(fail(KgpStatus::NullArgument, "out is null"));
        }
        let path = text(path, "path")?;
        let agent = ScriptedAgent::load(Path::new(path)).map_err(|e| fail(KgpStatus::Io, e))?;
        *out = Box::into_raw(Box::new(KgpAgent(agent)));
        Ok(())
    })
}

/// Number of script records consumed so far.
///
/// # Safety
/// `agent` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kgp_agent_consumed(agent: *const KgpAgent) -> usize {
    agent.as_ref().map_or(0, |a| a.0.consumed_count())
}

/// # Safety
/// `agent` must come from [`kgp_agent_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn kgp_agent_free(agent: *mut KgpAgent) {
    if !agent.is_null() {
        drop(Box::from_raw(agent));
    }
}

/// Answers `question`. `topics_json` is an optional JSON object mapping
/// labels to entity ids; `config_toml` is an optional configuration layer.
///
/// # Safety
/// Handles must be live; strings must be null or NUL-terminated; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn kgp_answer(
    agent: *const KgpAgent,
    store: *const KgpStore,
    question: *const c_char,
    topics_json: *const c_char,
    config_toml: *const c_char,
    out: *mut *mut KgpOutcome,
) -> KgpStatus {
    guarded(|| {
        let (Some(agent), Some(store)) = (agent.as_ref(), store.as_ref()) else {
            return Err(fail(KgpStatus::NullArgument, "agent or store is null"));
        };
        if out.is_null() {
            return Err(fail(KgpStatus::NullArgument, "out is null"));
        }
        let question = text(question, "question")?;
        let topics: TopicMap = match optional_text(topics_json, "topics_json")? {
            Some(t) => serde_json::from_str(t).map_err(|e| fail(KgpStatus::Config, format!("topics_json: {e}")))?,
            None => TopicMap::new(),
        };
        let layer = match optional_text(config_toml, "config_toml")? {
            Some(t) => parse_config(t).map_err(|e| fail(KgpStatus::Config, e.to_string()))?,
            None => PartialConfig::default(),
        };
        let cfg = EngineConfig::layered(Some(&layer), &PartialConfig::default())
            .map_err(|e| fail(KgpStatus::Config, e.to_string()))?;
        let inner = answer_question(question, &topics, &agent.0, &store.0, &ApproxTokenCounter, &cfg.answer())
            .map_err(|e| fail(engine_status(&e), e.to_string()))?;
        let outcome = KgpOutcome {
            answer: CString::new(inner.answer_text.replace('\0', " ")).unwrap_or_default(),
            source: CString::new(inner.source.as_str()).unwrap_or_default(),
            inner,
        };
        *out = Box::into_raw(Box::new(outcome));
        Ok(())
    })
}

/// Answer text, borrowed from the outcome.
///
/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kgp_outcome_answer(outcome: *const KgpOutcome) -> *const c_char {
    outcome.as_ref().map_or(ptr::null(), |o| o.answer.as_ptr())
}

/// `"Subgraph"` or `"InternalFallback"`, borrowed from the outcome.
///
/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kgp_outcome_source(outcome: *const KgpOutcome) -> *const c_char {
    outcome.as_ref().map_or(ptr::null(), |o| o.source.as_ptr())
}

/// Round whose evaluation found the subgraphs sufficient, or -1.
///
/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kgp_outcome_round(outcome: *const KgpOutcome) -> i64 {
    match outcome.as_ref() {
        Some(o) if o.inner.source == AnswerSource::Subgraph => {
            o.inner.answerable_round.map_or(-1, |r| r as i64)
        }
        _ => -1,
    }
}

/// Number of agent calls made for the question.
///
/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kgp_outcome_call_count(outcome: *const KgpOutcome) -> usize {
    outcome.as_ref().map_or(0, |o| o.inner.ledger.call_count())
}

/// Total tokens metered for the question.
///
/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kgp_outcome_total_tokens(outcome: *const KgpOutcome) -> u64 {
    outcome.as_ref().map_or(0, |o| o.inner.ledger.total_tokens())
}

/// Full outcome as JSON. Free with [`kgp_string_free`].
///
/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kgp_outcome_json(outcome: *const KgpOutcome) -> *mut c_char {
    match outcome.as_ref() {
        Some(o) => serde_json::to_string(&o.inner).map_or(ptr::null_mut(), owned),
        None => ptr::null_mut(),
    }
}

/// Final subgraphs in Graphviz DOT. Free with [`kgp_string_free`].
///
/// # Safety
/// `outcome` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kgp_outcome_dot(outcome: *const KgpOutcome) -> *mut c_char {
    outcome.as_ref().map_or(ptr::null_mut(), |o| owned(export_dot(&o.inner.final_subgraphs)))
}

/// # Safety
/// `outcome` must come from [`kgp_answer`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn kgp_outcome_free(outcome: *mut KgpOutcome) {
    if !outcome.is_null() {
        drop(Box::from_raw(outcome));
    }
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn kgp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
