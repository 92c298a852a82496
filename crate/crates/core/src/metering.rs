//! Per-question cost accounting: LLM calls, tokens and gateway wall time.
//!
//! Averages include retry calls issued after malformed responses.

use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::PromptKind;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeteringError {
    #[error("cannot aggregate an empty set of ledgers")]
    EmptyAggregate,
}

/// Counts tokens in a piece of text.
pub trait TokenCounter: Send + Sync {
    fn count(&self, text: &str) -> u64;
    /// Whether counts are estimates rather than tokenizer output.
    fn approximate(&self) -> bool {
        true
    }
}

/// Byte length divided by four, rounded up.
#[derive(Debug, Clone, Copy, Default)]
pub struct ApproxTokenCounter;

impl TokenCounter for ApproxTokenCounter {
    fn count(&self, text: &str) -> u64 {
        (text.len() as u64).div_ceil(4)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub kind: PromptKind,
    pub input_tokens: u64,
    pub output_tokens: u64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    calls: Vec<CallRecord>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_call(
        &mut self,
        kind: PromptKind,
        prompt: &str,
        response: &str,
        elapsed: Duration,
        counter: &dyn TokenCounter,
    ) {
        self.calls.push(CallRecord {
            kind,
            input_tokens: counter.count(prompt),
            output_tokens: counter.count(response),
            elapsed,
        });
    }

    pub fn calls(&self) -> &[CallRecord] {
        &self.calls
    }

    pub fn call_count(&self) -> usize {
        self.calls.len()
    }

    pub fn input_tokens(&self) -> u64 {
        self.calls.iter().map(|c| c.input_tokens).sum()
    }

    pub fn output_tokens(&self) -> u64 {
        self.calls.iter().map(|c| c.output_tokens).sum()
    }

    pub fn total_tokens(&self) -> u64 {
        self.input_tokens() + self.output_tokens()
    }

    pub fn wall_time(&self) -> Duration {
        self.calls.iter().map(|c| c.elapsed).sum()
    }

    pub fn calls_of(&self, kind: PromptKind) -> usize {
        self.calls.iter().filter(|c| c.kind == kind).count()
    }

    /// Sub-ledger restricted to one prompt kind.
    pub fn by_kind(&self, kind: PromptKind) -> CostLedger {
        CostLedger {
            calls: self.calls.iter().filter(|c| c.kind == kind).cloned().collect(),
        }
    }

    pub fn merge(&mut self, other: &CostLedger) {
        self.calls.extend_from_slice(&other.calls);
    }

    pub fn summary(&self) -> String {
        format!(
            "calls={} input_tokens={} total_tokens={} time={:.3}s",
            self.call_count(),
            self.input_tokens(),
            self.total_tokens(),
            self.wall_time().as_secs_f64()
        )
    }
}

/// Mean cost per question, in the column order LLM Call, Total Token,
/// Input Token, Time(s).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub label: String,
    pub questions: usize,
    pub mean_calls: f64,
    pub mean_total_tokens: f64,
    pub mean_input_tokens: f64,
    pub mean_time_secs: f64,
}

pub fn aggregate(label: &str, ledgers: &[CostLedger]) -> Result<CostRow, MeteringError> {
    if ledgers.is_empty() {
        return Err(MeteringError::EmptyAggregate);
    }
    let n = ledgers.len() as f64;
    let mean = |f: &dyn Fn(&CostLedger) -> f64| ledgers.iter().map(f).sum::<f64>() / n;
    Ok(CostRow {
        label: label.to_string(),
        questions: ledgers.len(),
        mean_calls: mean(&|l| l.call_count() as f64),
        mean_total_tokens: mean(&|l| l.total_tokens() as f64),
        mean_input_tokens: mean(&|l| l.input_tokens() as f64),
        mean_time_secs: mean(&|l| l.wall_time().as_secs_f64()),
    })
}

pub const COST_COLUMNS: [&str; 4] = ["LLM Call", "Total Token", "Input Token", "Time(s)"];

/// Aligned plain-text table with one-decimal cells.
pub fn render_cost_table(rows: &[CostRow], approximate_tokens: bool) -> String {
    let width = rows
        .iter()
        .map(|r| r.label.len())
        .chain(std::iter::once("Method".len()))
        .max()
        .unwrap_or(6);
    let mut out = String::new();
    let _ = write!(out, "{:<width$}", "Method");
    for c in COST_COLUMNS {
        let _ = write!(out, "  {c:>12}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{:<width$}", r.label);
        for v in [r.mean_calls, r.mean_total_tokens, r.mean_input_tokens, r.mean_time_secs] {
            let _ = write!(out, "  {v:>12.1}");
        }
        out.push('\n');
    }
    out.push_str("note: means include retry calls made after malformed responses");
    if approximate_tokens {
        out.push_str("; token counts are approximate (bytes/4)");
    }
    out.push('\n');
    out
}

/// Comma-separated rows with a header line.
pub fn render_cost_csv(rows: &[CostRow]) -> String {
    let mut out = String::from("method,questions,llm_calls,total_tokens,input_tokens,time_s\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.1},{:.1},{:.1},{:.1}",
            r.label, r.questions, r.mean_calls, r.mean_total_tokens, r.mean_input_tokens, r.mean_time_secs
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Fixed(u64);

    impl TokenCounter for Fixed {
        fn count(&self, text: &str) -> u64 {
            if text.is_empty() {
                0
            } else {
                self.0
            }
        }
    }

    fn ledger(calls: usize) -> CostLedger {
        let mut l = CostLedger::new();
        for _ in 0..calls {
            l.record_call(PromptKind::Evaluation, "p", "r", Duration::from_millis(10), &Fixed(1));
        }
        l
    }

    #[test]
    fn arithmetic_of_three_calls() {
        let mut l = CostLedger::new();
        let prompt = "x".repeat(400);
        let response = "y".repeat(80);
        for _ in 0..3 {
            l.record_call(PromptKind::Ipg, &prompt, &response, Duration::ZERO, &ApproxTokenCounter);
        }
        assert_eq!(l.call_count(), 3);
        assert_eq!(l.input_tokens(), 300);
        assert_eq!(l.total_tokens(), 360);
    }

    #[test]
    fn empty_response_is_still_a_call() {
        let mut l = CostLedger::new();
        l.record_call(PromptKind::Io, "abc", "", Duration::ZERO, &ApproxTokenCounter);
        assert_eq!(l.call_count(), 1);
        assert_eq!(l.output_tokens(), 0);
        assert_eq!(l.input_tokens(), 1);
    }

    #[test]
    fn per_kind_decomposition_sums_to_totals() {
        let mut l = ledger(2);
        l.record_call(PromptKind::Ipg, "abcdefgh", "abcd", Duration::ZERO, &ApproxTokenCounter);
        let kinds = PromptKind::ALL;
        let calls: usize = kinds.iter().map(|k| l.by_kind(*k).call_count()).sum();
        let tokens: u64 = kinds.iter().map(|k| l.by_kind(*k).total_tokens()).sum();
        assert_eq!(calls, l.call_count());
        assert_eq!(tokens, l.total_tokens());
    }

    #[test]
    fn aggregate_means() {
        let row = aggregate("x", &[ledger(4), ledger(6)]).unwrap();
        assert_eq!(row.mean_calls, 5.0);
        let single = aggregate("x", &[ledger(4)]).unwrap();
        assert_eq!(single.mean_calls, 4.0);
        assert_eq!(single.mean_total_tokens, 8.0);
        assert_eq!(aggregate("x", &[]), Err(MeteringError::EmptyAggregate));
    }

    #[test]
    fn table_uses_one_decimal() {
        let row = CostRow {
            label: "engine".into(),
            questions: 3,
            mean_calls: 9.9,
            mean_total_tokens: 2742.44,
            mean_input_tokens: 2368.9,
            mean_time_secs: 16.5,
        };
        let t = render_cost_table(std::slice::from_ref(&row), true);
        assert!(t.contains("LLM Call"));
        assert!(t.contains("2742.4"));
        assert!(t.contains("approximate"));
        let csv = render_cost_csv(&[row]);
        assert_eq!(csv.lines().nth(1), Some("engine,3,9.9,2742.4,2368.9,16.5"));
    }
}
