mod common;

use kgpath::answerer::AnswerConfig;
use kgpath::evalkit::{run_mode, EvalMode, MatchPolicy, QARecord};
use kgpath::gateway::{PromptKind, ScriptRecord, ScriptedAgent};
use kgpath::metering::ApproxTokenCounter;

use common::{chain_script, chain_store, chain_topics, Faults};

const IPG_TEXT: &str = "the answer from memory is c0_1";

/// Ten chain questions; gold answers alternate between the node the IPG
/// guesses and the node the subgraph reaches at round 2.
fn suite() -> (Vec<QARecord>, Vec<ScriptRecord>) {
    let mut records = Vec::new();
    let mut script = Vec::new();
    for i in 0..10 {
        let tag = format!("[q{i}]");
        script.extend(chain_script(&tag, 1, 2, 3, Faults::default()));
        script.push(ScriptRecord::new(PromptKind::Io, "c0_2").when(tag.clone()));
        let gold = if i % 2 == 0 { "c0_1" } else { "c0_2" };
        records.push(QARecord {
            id: format!("q{i}"),
            question: format!("where does the chain end {tag}?"),
            topic_entities: chain_topics(1),
            gold_answers: vec![gold.to_string()],
            dataset_id: "chains".into(),
        });
    }
    (records, script)
}

/// Hits@1 is reported as a percentage.
fn evaluate(mode: EvalMode, workers: usize) -> kgpath::evalkit::EvalResult {
    let (records, script) = suite();
    let agent = ScriptedAgent::new(script);
    let store = chain_store(1, 3);
    run_mode(mode, &records, &agent, &store, &ApproxTokenCounter, &AnswerConfig::default(), MatchPolicy::Normalized, workers)
        .unwrap()
}

#[test]
fn full_pipeline_scores_the_subgraph_answers() {
    let r = evaluate(EvalMode::KnowPath, 4);
    assert_eq!(r.label, "KnowPath");
    assert_eq!(r.records.len(), 10);
    // the round-2 answer text names c0_2 only
    let expected = r.records.iter().enumerate().filter(|(i, _)| i % 2 == 1).count() as f64 * 10.0;
    assert!((r.hits_at_1 - expected).abs() < 1e-12, "{}", r.hits_at_1);
    for (i, rec) in r.records.iter().enumerate() {
        assert_eq!(rec.id, format!("q{i}"));
        assert_eq!(rec.ledger.call_count(), 1 + 2 * 3);
        assert_eq!(
            rec.kinds(),
            [
                PromptKind::Ipg,
                PromptKind::RelationExploration,
                PromptKind::EntityExploration,
                PromptKind::Evaluation,
                PromptKind::RelationExploration,
                PromptKind::EntityExploration,
                PromptKind::Evaluation,
            ]
        );
    }
    let cost = r.cost.unwrap();
    assert!((cost.mean_calls - 7.0).abs() < 1e-12);
}

#[test]
fn without_exploration_scores_equal_the_inference_answers() {
    let (records, _) = suite();
    let r = evaluate(EvalMode::NoSe, 3);
    assert_eq!(r.label, "KnowPath -w/o SE");
    let oracle = records
        .iter()
        .filter(|rec| rec.gold_answers.iter().any(|g| IPG_TEXT.split(' ').any(|w| w == g)))
        .count() as f64
        * 100.0
        / records.len() as f64;
    assert!((r.hits_at_1 - oracle).abs() < 1e-12);
    assert!((r.hits_at_1 - 50.0).abs() < 1e-12);
    for rec in &r.records {
        assert_eq!(rec.kinds(), [PromptKind::Ipg]);
        assert_eq!(rec.predicted, IPG_TEXT);
    }
}

#[test]
fn io_baseline_only_calls_io() {
    let r = evaluate(EvalMode::Io, 2);
    assert_eq!(r.label, "IO");
    assert!((r.hits_at_1 - 50.0).abs() < 1e-12);
    for rec in &r.records {
        assert_eq!(rec.kinds(), [PromptKind::Io]);
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let one = evaluate(EvalMode::KnowPath, 1);
    let many = evaluate(EvalMode::KnowPath, 8);
    let key = |r: &kgpath::evalkit::EvalResult| {
        r.records.iter().map(|x| (x.id.clone(), x.predicted.clone(), x.hit)).collect::<Vec<_>>()
    };
    assert_eq!(key(&one), key(&many));
}
