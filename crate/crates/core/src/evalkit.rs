//! Benchmark harness: dataset files, Hits@1 scoring, IO/CoT baselines and
//! the full pipeline run over a worker pool.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::answerer::{answer_question, AnswerConfig, AnswerSource};
use crate::backend::KnowledgeBackend;
use crate::gateway::{render_prompt, AgentConfig, AgentGateway, Exchange, PromptBindings, PromptKind, Session};
use crate::ipg::TopicMap;
use crate::metering::{aggregate, CostLedger, CostRow, MeteringError, TokenCounter};
use crate::model::Subgraph;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read dataset {path}: {reason}")]
    UnreadableDataset { path: String, reason: String },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QARecord {
    pub id: String,
    pub question: String,
    pub topic_entities: TopicMap,
    pub gold_answers: Vec<String>,
    pub dataset_id: String,
}

#[derive(Deserialize)]
struct RawRecord {
    #[serde(default)]
    id: Option<serde_json::Value>,
    question: String,
    #[serde(default)]
    topic_entities: TopicMap,
    answers: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct LoadedDataset {
    pub records: Vec<QARecord>,
    /// Entries dropped because they did not parse or broke a record invariant.
    pub skipped: usize,
}

/// Parses dataset text: one JSON object per line, or a single JSON array.
pub fn parse_dataset(text: &str, dataset_id: &str) -> LoadedDataset {
    let mut out = LoadedDataset::default();
    let entries: Vec<Result<RawRecord, String>> = if text.trim_start().starts_with('[') {
        match serde_json::from_str::<Vec<serde_json::Value>>(text) {
            Ok(items) => items
                .into_iter()
                .map(|v| serde_json::from_value(v).map_err(|e| e.to_string()))
                .collect(),
            Err(e) => vec![Err(e.to_string())],
        }
    } else {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| e.to_string()))
            .collect()
    };
    for (i, entry) in entries.into_iter().enumerate() {
        let raw = match entry {
            Ok(r) => r,
            Err(e) => {
                log::warn!("{dataset_id}: entry {} skipped: {e}", i + 1);
                out.skipped += 1;
                continue;
            }
        };
        let answers: Vec<String> = raw.answers.into_iter().filter(|a| !a.trim().is_empty()).collect();
        if raw.question.trim().is_empty() || answers.is_empty() {
            log::warn!("{dataset_id}: entry {} skipped: empty question or answers", i + 1);
            out.skipped += 1;
            continue;
        }
        let id = match raw.id {
            Some(serde_json::Value::String(s)) => s,
            Some(v) if !v.is_null() => v.to_string(),
            _ => format!("{dataset_id}-{}", i + 1),
        };
        out.records.push(QARecord {
            id,
            question: raw.question,
            topic_entities: raw.topic_entities,
            gold_answers: answers,
            dataset_id: dataset_id.to_string(),
        });
    }
    out
}

pub fn load_dataset(path: &Path, dataset_id: &str) -> Result<LoadedDataset, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::UnreadableDataset {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let loaded = parse_dataset(&text, dataset_id);
    if loaded.records.is_empty() && loaded.skipped > 0 {
        return Err(EvalError::UnreadableDataset {
            path: path.display().to_string(),
            reason: format!("no usable records ({} malformed)", loaded.skipped),
        });
    }
    Ok(loaded)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatchPolicy {
    /// Normalized equality or whole-token containment of a gold alias.
    #[default]
    Normalized,
    /// Normalized equality only.
    Strict,
}

fn strip_article(s: &str) -> Option<&str> {
    ["the ", "a ", "an "].iter().find_map(|a| s.strip_prefix(a))
}

fn is_terminal_punct(c: char) -> bool {
    matches!(c, '.' | ',' | ';' | ':' | '!' | '?')
}

/// Lowercase, trim, collapse whitespace, drop leading articles and terminal
/// punctuation; repeated until nothing changes, so it is idempotent.
pub fn normalize(s: &str) -> String {
    let mut cur = s.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
    loop {
        let mut next = cur.trim_end_matches(is_terminal_punct).trim().to_string();
        while let Some(rest) = strip_article(&next) {
            next = rest.trim_start().to_string();
        }
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

fn token_core(t: &str) -> &str {
    t.trim_matches(|c: char| c.is_ascii_punctuation() && c != '&' && c != '+' && c != '#')
}

fn tokens(s: &str) -> Vec<&str> {
    s.split_whitespace().map(token_core).filter(|t| !t.is_empty()).collect()
}

pub fn hits_at_1(predicted: &str, gold: &[String], policy: MatchPolicy) -> bool {
    let p = normalize(predicted);
    if p.is_empty() {
        return false;
    }
    let ptoks = tokens(&p);
    gold.iter().any(|g| {
        let g = normalize(g);
        if g.is_empty() {
            return false;
        }
        if g == p {
            return true;
        }
        if policy == MatchPolicy::Strict {
            return false;
        }
        let gtoks = tokens(&g);
        !gtoks.is_empty() && ptoks.windows(gtoks.len()).any(|w| w == gtoks.as_slice())
    })
}

/// The `{...}` following the last "the answer is" (case-insensitive).
pub fn extract_braced_answer(text: &str) -> Option<String> {
    let lower = text.to_lowercase();
    let at = lower.rfind("the answer is")?;
    let rest = &text[at..];
    let open = rest.find('{')?;
    let close = rest[open..].find('}')?;
    let inner = rest[open + 1..open + close].trim();
    (!inner.is_empty()).then(|| inner.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BaselineMode {
    Io,
    Cot,
}

impl BaselineMode {
    pub fn kind(self) -> PromptKind {
        match self {
            BaselineMode::Io => PromptKind::Io,
            BaselineMode::Cot => PromptKind::Cot,
        }
    }
}

/// Every runnable method, including the ablation switches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMode {
    KnowPath,
    /// Inference paths off (`n = 0`).
    NoIpg,
    /// Subgraph exploration off (`D = 0`).
    NoSe,
    Io,
    Cot,
}

impl EvalMode {
    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::KnowPath => "knowpath",
            EvalMode::NoIpg => "no-ipg",
            EvalMode::NoSe => "no-se",
            EvalMode::Io => "io",
            EvalMode::Cot => "cot",
        }
    }
}

impl FromStr for EvalMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "knowpath" | "full" => Ok(EvalMode::KnowPath),
            "no-ipg" => Ok(EvalMode::NoIpg),
            "no-se" => Ok(EvalMode::NoSe),
            "io" => Ok(EvalMode::Io),
            "cot" => Ok(EvalMode::Cot),
            other => Err(format!("unknown mode {other:?} (knowpath, no-ipg, no-se, io, cot)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordResult {
    pub id: String,
    pub question: String,
    pub predicted: String,
    pub hit: bool,
    pub source: Option<AnswerSource>,
    pub best_effort: bool,
    pub error: Option<String>,
    pub ledger: CostLedger,
    pub transcript: Vec<Exchange>,
    pub final_subgraphs: Vec<Subgraph>,
}

impl RecordResult {
    pub fn kinds(&self) -> Vec<PromptKind> {
        self.transcript.iter().map(|x| x.kind).collect()
    }
}

#[derive(Debug, Clone)]
pub struct EvalResult {
    pub label: String,
    pub dataset_id: String,
    pub records: Vec<RecordResult>,
    pub hits_at_1: f64,
    pub cost: Result<CostRow, MeteringError>,
}

impl EvalResult {
    fn build(label: &str, dataset_id: &str, records: Vec<RecordResult>) -> Self {
        let hits = records.iter().filter(|r| r.hit).count();
        let hits_at_1 = if records.is_empty() {
            0.0
        } else {
            100.0 * hits as f64 / records.len() as f64
        };
        let ledgers: Vec<CostLedger> = records.iter().map(|r| r.ledger.clone()).collect();
        Self {
            label: label.to_string(),
            dataset_id: dataset_id.to_string(),
            cost: aggregate(label, &ledgers),
            records,
            hits_at_1,
        }
    }
}

fn dataset_of(records: &[QARecord]) -> String {
    records.first().map(|r| r.dataset_id.clone()).unwrap_or_default()
}

fn pooled<F>(records: &[QARecord], workers: usize, f: F) -> Result<Vec<RecordResult>, EvalError>
where
    F: Fn(&QARecord) -> RecordResult + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| EvalError::Pool(e.to_string()))?;
    // indexed parallel collect keeps input order
    Ok(pool.install(|| records.par_iter().map(&f).collect()))
}

pub fn baseline_prompt(mode: BaselineMode, question: &str) -> String {
    let b = PromptBindings::new().with("question", question);
    render_prompt(mode.kind(), &b).expect("baseline slots are all bound")
}

/// One call per record; the braced answer is scored when present, the raw
/// reply otherwise.
#[allow(clippy::too_many_arguments)]
pub fn run_baseline(
    mode: BaselineMode,
    records: &[QARecord],
    agent: &dyn AgentGateway,
    counter: &dyn TokenCounter,
    config: &AgentConfig,
    policy: MatchPolicy,
    workers: usize,
) -> Result<EvalResult, EvalError> {
    let results = pooled(records, workers, |rec| {
        let mut session = Session::new(agent, counter, config);
        let prompt = baseline_prompt(mode, &rec.question);
        let (predicted, error) = match session.complete(mode.kind(), &prompt) {
            Ok(reply) => (
                extract_braced_answer(&reply).unwrap_or_else(|| reply.trim().to_string()),
                None,
            ),
            Err(e) => (String::new(), Some(e.to_string())),
        };
        let hit = error.is_none() && hits_at_1(&predicted, &rec.gold_answers, policy);
        let (ledger, transcript, _) = session.into_parts();
        RecordResult {
            id: rec.id.clone(),
            question: rec.question.clone(),
            predicted,
            hit,
            source: None,
            best_effort: false,
            error,
            ledger,
            transcript,
            final_subgraphs: Vec::new(),
        }
    })?;
    let label = match mode {
        BaselineMode::Io => "IO",
        BaselineMode::Cot => "CoT",
    };
    Ok(EvalResult::build(label, &dataset_of(records), results))
}

#[allow(clippy::too_many_arguments)]
pub fn run_knowpath(
    label: &str,
    records: &[QARecord],
    agent: &dyn AgentGateway,
    backend: &dyn KnowledgeBackend,
    counter: &dyn TokenCounter,
    config: &AnswerConfig,
    policy: MatchPolicy,
    workers: usize,
) -> Result<EvalResult, EvalError> {
    let results = pooled(records, workers, |rec| {
        match answer_question(&rec.question, &rec.topic_entities, agent, backend, counter, config) {
            Ok(out) => RecordResult {
                id: rec.id.clone(),
                question: rec.question.clone(),
                hit: hits_at_1(&out.answer_text, &rec.gold_answers, policy),
                predicted: out.answer_text,
                source: Some(out.source),
                best_effort: out.best_effort,
                error: (!out.errors.is_empty()).then(|| out.errors.join("; ")),
                ledger: out.ledger,
                transcript: out.transcript,
                final_subgraphs: out.final_subgraphs,
            },
            Err(e) => RecordResult {
                id: rec.id.clone(),
                question: rec.question.clone(),
                predicted: String::new(),
                hit: false,
                source: None,
                best_effort: false,
                error: Some(e.to_string()),
                ledger: CostLedger::new(),
                transcript: Vec::new(),
                final_subgraphs: Vec::new(),
            },
        }
    })?;
    Ok(EvalResult::build(label, &dataset_of(records), results))
}

/// Dispatches a mode, applying the ablation overrides to `config`.
#[allow(clippy::too_many_arguments)]
pub fn run_mode(
    mode: EvalMode,
    records: &[QARecord],
    agent: &dyn AgentGateway,
    backend: &dyn KnowledgeBackend,
    counter: &dyn TokenCounter,
    config: &AnswerConfig,
    policy: MatchPolicy,
    workers: usize,
) -> Result<EvalResult, EvalError> {
    let mut cfg = config.clone();
    match mode {
        EvalMode::Io => {
            return run_baseline(BaselineMode::Io, records, agent, counter, &cfg.agent, policy, workers)
        }
        EvalMode::Cot => {
            return run_baseline(BaselineMode::Cot, records, agent, counter, &cfg.agent, policy, workers)
        }
        EvalMode::NoIpg => cfg.triple_count = 0,
        EvalMode::NoSe => cfg.explorer.max_depth = 0,
        EvalMode::KnowPath => {}
    }
    let label = match mode {
        EvalMode::NoIpg => "KnowPath -w/o IPG",
        EvalMode::NoSe => "KnowPath -w/o SE",
        _ => "KnowPath",
    };
    run_knowpath(label, records, agent, backend, counter, &cfg, policy, workers)
}

pub const HITS_COLUMNS: [&str; 4] = ["Method", "Dataset", "Records", "Hits@1"];

pub fn render_hits_table(results: &[EvalResult]) -> String {
    let rows: Vec<[String; 4]> = results
        .iter()
        .map(|r| {
            [
                r.label.clone(),
                r.dataset_id.clone(),
                r.records.len().to_string(),
                format!("{:.1}", r.hits_at_1),
            ]
        })
        .collect();
    let mut widths = HITS_COLUMNS.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let line = |cells: [&str; 4], out: &mut String| {
        let _ = writeln!(
            out,
            "{:<w0$}  {:<w1$}  {:>w2$}  {:>w3$}",
            cells[0],
            cells[1],
            cells[2],
            cells[3],
            w0 = widths[0],
            w1 = widths[1],
            w2 = widths[2],
            w3 = widths[3]
        );
    };
    line(HITS_COLUMNS, &mut out);
    for row in &rows {
        line([&row[0], &row[1], &row[2], &row[3]], &mut out);
    }
    out
}

fn csv_cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render_hits_csv(results: &[EvalResult]) -> String {
    let mut out = String::from("method,dataset,records,hits_at_1\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{:.1}",
            csv_cell(&r.label),
            csv_cell(&r.dataset_id),
            r.records.len(),
            r.hits_at_1
        );
    }
    out
}

pub fn render_records_csv(result: &EvalResult) -> String {
    let mut out = String::from("id,hit,source,calls,total_tokens,predicted,error\n");
    for r in &result.records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            csv_cell(&r.id),
            r.hit,
            r.source.map(AnswerSource::as_str).unwrap_or("-"),
            r.ledger.call_count(),
            r.ledger.total_tokens(),
            csv_cell(&r.predicted),
            csv_cell(r.error.as_deref().unwrap_or(""))
        );
    }
    out
}
