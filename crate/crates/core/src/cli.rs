//! Command-line front end: `ask`, `bench` and `export`.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::answerer::{answer_question, AnswerOutcome, AnswerSource};
use crate::backend::{InMemoryStore, KnowledgeBackend, SparqlBackend};
use crate::config::{load_config, EngineConfig, PartialConfig};
use crate::dot::export_dot;
use crate::error::EngineError;
use crate::evalkit::{
    load_dataset, render_hits_csv, render_hits_table, render_records_csv, run_mode, EvalError, EvalMode,
    EvalResult,
};
use crate::gateway::{AgentGateway, LiveAgent, ScriptedAgent};
use crate::ipg::TopicMap;
use crate::metering::{render_cost_csv, render_cost_table, ApproxTokenCounter};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NO_TOPIC: i32 = 3;
pub const EXIT_BACKEND: i32 = 4;
pub const EXIT_DATASET: i32 = 5;

#[derive(Debug, Parser)]
#[command(name = "kgpath", version, about = "Answer questions over a knowledge graph with a language agent")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Answer one question.
    Ask(AskArgs),
    /// Score a dataset and report Hits@1 and cost.
    Bench(BenchArgs),
    /// Write the DOT graph of a saved answer.
    Export(ExportArgs),
}

/// Settings shared by `ask` and `bench`. API keys come from the environment only.
#[derive(Debug, Args, Clone, Default)]
pub struct EngineArgs {
    /// TOML file with engine settings; flags override it.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Maximum exploration depth.
    #[arg(long)]
    pub depth: Option<usize>,
    /// Triples requested from inference; 0 turns inference off.
    #[arg(long)]
    pub triples: Option<usize>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Relation and entity selection width.
    #[arg(long)]
    pub width: Option<usize>,
    /// Cap on live paths per subgraph.
    #[arg(long)]
    pub max_width: Option<usize>,
    /// Row cap per knowledge-graph query.
    #[arg(long)]
    pub result_limit: Option<usize>,
    /// Retries after a malformed agent reply.
    #[arg(long)]
    pub retries: Option<u32>,
    /// SPARQL endpoint URL.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Chat-completion endpoint URL.
    #[arg(long)]
    pub chat_endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<u64>,
    /// Score with normalized equality only.
    #[arg(long)]
    pub strict: bool,
    /// Replay agent replies from a JSONL script instead of calling a model.
    #[arg(long, value_name = "SCRIPTFILE")]
    pub scripted: Option<PathBuf>,
    /// Use a tab-separated triple file instead of a SPARQL endpoint.
    #[arg(long, value_name = "TRIPLEFILE")]
    pub kg_file: Option<PathBuf>,
    /// Tab-separated id/label file for --kg-file.
    #[arg(long, value_name = "FILE", requires = "kg_file")]
    pub labels_file: Option<PathBuf>,
}

impl EngineArgs {
    pub fn flags(&self) -> PartialConfig {
        PartialConfig {
            max_depth: self.depth,
            triple_count: self.triples,
            temperature: self.temperature,
            relation_width: self.width,
            entity_width: self.width,
            max_width: self.max_width,
            result_limit: self.result_limit,
            retries: self.retries,
            model_name: self.model.clone(),
            sparql_endpoint: self.endpoint.clone(),
            chat_endpoint: self.chat_endpoint.clone(),
            workers: self.workers,
            timeout_secs: self.timeout,
            strict_match: self.strict.then_some(true),
            ..PartialConfig::default()
        }
    }

    pub fn engine_config(&self) -> Result<EngineConfig, EngineError> {
        let file = self.config.as_deref().map(load_config).transpose()?;
        EngineConfig::layered(file.as_ref(), &self.flags())
    }

    fn agent(&self, cfg: &EngineConfig) -> Result<Box<dyn AgentGateway>, EngineError> {
        match &self.scripted {
            Some(path) => Ok(Box::new(ScriptedAgent::load(path).map_err(EngineError::Config)?)),
            None => Ok(Box::new(LiveAgent::new(cfg.live_agent()))),
        }
    }

    fn backend(&self, cfg: &EngineConfig) -> Result<Box<dyn KnowledgeBackend>, EngineError> {
        match &self.kg_file {
            Some(path) => {
                let store = InMemoryStore::load(path, self.labels_file.as_deref())?;
                Ok(Box::new(store.with_config(cfg.backend())))
            }
            None => Ok(Box::new(SparqlBackend::new(cfg.backend()))),
        }
    }
}

fn parse_topic(s: &str) -> Result<(String, String), String> {
    match s.split_once('=') {
        Some((label, id)) if !label.trim().is_empty() && !id.trim().is_empty() => {
            Ok((label.trim().to_string(), id.trim().to_string()))
        }
        _ => Err(format!("expected LABEL=ID, got {s:?}")),
    }
}

#[derive(Debug, Args)]
pub struct AskArgs {
    pub question: String,
    /// Topic entity as LABEL=ID; repeatable. Without any, inferred labels are used.
    #[arg(long = "topic", value_parser = parse_topic)]
    pub topics: Vec<(String, String)>,
    /// Write the explored subgraph as DOT.
    #[arg(long, value_name = "PATH")]
    pub dot: Option<PathBuf>,
    /// Save the full outcome (transcript included) as JSON.
    #[arg(long, value_name = "PATH")]
    pub save: Option<PathBuf>,
    /// Print the full outcome as JSON.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// JSONL dataset: question, topic_entities, answers, id.
    #[arg(long, value_name = "PATH")]
    pub dataset: PathBuf,
    /// Name used in reports; defaults to the file stem.
    #[arg(long)]
    pub dataset_id: Option<String>,
    /// knowpath, no-ipg, no-se, io or cot.
    #[arg(long, default_value = "knowpath")]
    pub mode: EvalMode,
    /// Comma-separated triple counts; one report row each.
    #[arg(long, value_delimiter = ',', value_name = "N,N,...")]
    pub sweep_triples: Vec<usize>,
    /// Only the first N records.
    #[arg(long)]
    pub limit: Option<usize>,
    /// Directory for report files.
    #[arg(long, value_name = "DIR")]
    pub out_dir: Option<PathBuf>,
    /// Directory for one DOT file per record.
    #[arg(long, value_name = "DIR")]
    pub dot: Option<PathBuf>,
    #[command(flatten)]
    pub engine: EngineArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Outcome JSON written by `ask --save`.
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub dot: Option<PathBuf>,
}

fn engine_exit(e: &EngineError) -> i32 {
    match e {
        EngineError::NoTopicEntities => EXIT_NO_TOPIC,
        EngineError::Config(_) => EXIT_CONFIG,
        EngineError::Backend(_) => EXIT_BACKEND,
        EngineError::Agent(_) => EXIT_FAILURE,
    }
}

fn write_file(path: &Path, text: &str, err: &mut dyn Write) -> bool {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        let _ = std::fs::create_dir_all(dir);
    }
    match std::fs::write(path, text) {
        Ok(()) => true,
        Err(e) => {
            let _ = writeln!(err, "error: cannot write {}: {e}", path.display());
            false
        }
    }
}

pub fn print_outcome(out: &mut dyn Write, o: &AnswerOutcome) -> std::io::Result<()> {
    writeln!(out, "answer: {}", o.answer_text)?;
    let tag = match (o.source, o.answerable_round, o.best_effort) {
        (AnswerSource::Subgraph, Some(r), _) => format!("Subgraph (round {r})"),
        (AnswerSource::Subgraph, None, true) => "Subgraph (best-effort)".to_string(),
        (s, _, _) => s.as_str().to_string(),
    };
    writeln!(out, "source: {tag}")?;
    writeln!(out, "paths:")?;
    for g in &o.final_subgraphs {
        for p in &g.paths {
            writeln!(out, "  {}", p.render())?;
        }
    }
    writeln!(out, "ledger: {}", o.ledger.summary())?;
    for w in &o.warnings {
        writeln!(out, "warning: {w}")?;
    }
    Ok(())
}

fn cmd_ask(args: &AskArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let run = || -> Result<AnswerOutcome, EngineError> {
        let cfg = args.engine.engine_config()?;
        let agent = args.engine.agent(&cfg)?;
        let backend = args.engine.backend(&cfg)?;
        let topics: TopicMap = args.topics.iter().cloned().collect();
        answer_question(&args.question, &topics, agent.as_ref(), backend.as_ref(), &ApproxTokenCounter, &cfg.answer())
    };
    let outcome = match run() {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return engine_exit(&e);
        }
    };
    let printed = if args.json {
        serde_json::to_string_pretty(&outcome)
            .map_err(std::io::Error::other)
            .and_then(|s| writeln!(out, "{s}"))
    } else {
        print_outcome(out, &outcome)
    };
    if printed.is_err() {
        return EXIT_FAILURE;
    }
    let mut code = EXIT_OK;
    if let Some(path) = &args.dot {
        if !write_file(path, &export_dot(&outcome.final_subgraphs), err) {
            code = EXIT_FAILURE;
        }
    }
    if let Some(path) = &args.save {
        let json = serde_json::to_string_pretty(&outcome).expect("outcome serializes");
        if !write_file(path, &json, err) {
            code = EXIT_FAILURE;
        }
    }
    if let Some(msg) = &outcome.backend_failure {
        let _ = writeln!(err, "error: knowledge backend failed ({msg}); the answer above is best-effort");
        code = EXIT_BACKEND;
    }
    code
}

fn cmd_bench(args: &BenchArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let cfg = match args.engine.engine_config() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return engine_exit(&e);
        }
    };
    if !args.sweep_triples.is_empty() && matches!(args.mode, EvalMode::Io | EvalMode::Cot) {
        let _ = writeln!(err, "error: --sweep-triples needs a knowpath mode");
        return EXIT_CONFIG;
    }
    let dataset_id = args.dataset_id.clone().unwrap_or_else(|| {
        args.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let loaded = match load_dataset(&args.dataset, &dataset_id) {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_DATASET;
        }
    };
    if loaded.skipped > 0 {
        let _ = writeln!(err, "warning: skipped {} malformed record(s)", loaded.skipped);
    }
    let mut records = loaded.records;
    if let Some(n) = args.limit {
        records.truncate(n);
    }
    let (agent, backend) = match args.engine.agent(&cfg).and_then(|a| Ok((a, args.engine.backend(&cfg)?))) {
        Ok(x) => x,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return engine_exit(&e);
        }
    };

    let sweep: Vec<Option<usize>> = if args.sweep_triples.is_empty() {
        vec![None]
    } else {
        args.sweep_triples.iter().copied().map(Some).collect()
    };
    let mut results: Vec<EvalResult> = Vec::new();
    for n in sweep {
        let mut answer = cfg.answer();
        if let Some(n) = n {
            answer.triple_count = n;
        }
        let run = run_mode(
            args.mode,
            &records,
            agent.as_ref(),
            backend.as_ref(),
            &ApproxTokenCounter,
            &answer,
            cfg.match_policy(),
            cfg.workers,
        );
        let mut result = match run {
            Ok(r) => r,
            Err(e @ EvalError::UnreadableDataset { .. }) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_DATASET;
            }
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_FAILURE;
            }
        };
        if let Some(n) = n {
            result.label = format!("{} n={n}", result.label);
            if let Ok(row) = result.cost.as_mut() {
                row.label = result.label.clone();
            }
        }
        results.push(result);
    }

    let rows: Vec<_> = results.iter().filter_map(|r| r.cost.clone().ok()).collect();
    let hits = render_hits_table(&results);
    let cost = render_cost_table(&rows, true);
    let _ = write!(out, "{hits}\n{cost}");
    for r in &results {
        let failed = r.records.iter().filter(|x| x.error.is_some()).count();
        if failed > 0 {
            let _ = writeln!(err, "warning: {}: {failed} record(s) reported errors", r.label);
        }
    }

    let mut code = EXIT_OK;
    if let Some(dir) = &args.out_dir {
        let mut ok = write_file(&dir.join("hits.txt"), &hits, err)
            && write_file(&dir.join("hits.csv"), &render_hits_csv(&results), err)
            && write_file(&dir.join("cost.txt"), &cost, err)
            && write_file(&dir.join("cost.csv"), &render_cost_csv(&rows), err);
        for r in &results {
            let name = format!("records-{}.csv", slug(&r.label));
            ok &= write_file(&dir.join(name), &render_records_csv(r), err);
        }
        if !ok {
            code = EXIT_FAILURE;
        }
    }
    if let Some(dir) = &args.dot {
        for r in &results {
            for rec in r.records.iter().filter(|x| !x.final_subgraphs.is_empty()) {
                let name = format!("{}-{}.dot", slug(&r.label), slug(&rec.id));
                if !write_file(&dir.join(name), &export_dot(&rec.final_subgraphs), err) {
                    code = EXIT_FAILURE;
                }
            }
        }
    }
    code
}

fn slug(s: &str) -> String {
    let s: String = s
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c.to_ascii_lowercase() } else { '-' })
        .collect();
    s.split('-').filter(|p| !p.is_empty()).collect::<Vec<_>>().join("-")
}

fn cmd_export(args: &ExportArgs, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let text = match std::fs::read_to_string(&args.input) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", args.input.display());
            return EXIT_FAILURE;
        }
    };
    let outcome: AnswerOutcome = match serde_json::from_str(&text) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(err, "error: {} is not a saved outcome: {e}", args.input.display());
            return EXIT_FAILURE;
        }
    };
    let dot = export_dot(&outcome.final_subgraphs);
    match &args.dot {
        Some(path) => {
            if write_file(path, &dot, err) {
                EXIT_OK
            } else {
                EXIT_FAILURE
            }
        }
        None => match out.write_all(dot.as_bytes()) {
            Ok(()) => EXIT_OK,
            Err(_) => EXIT_FAILURE,
        },
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match &cli.command {
        Command::Ask(a) => cmd_ask(a, out, err),
        Command::Bench(b) => cmd_bench(b, out, err),
        Command::Export(x) => cmd_export(x, out, err),
    }
}

pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
