mod common;

use kgpath::answerer::{answer_question, AnswerConfig};
use kgpath::dot::export_dot;
use kgpath::gateway::{parse_entity_selection, parse_relation_selection, PromptKind, ScriptedAgent};
use kgpath::metering::ApproxTokenCounter;
use kgpath::model::{parse_path, render_path, Direction, EntityRef, PathSource, PathStep, ReasoningPath, RelationRef};
use proptest::prelude::*;

use common::{chain_script, chain_store, chain_topics, Faults};

const TOKEN: &str = "[A-Za-z0-9_.]([A-Za-z0-9_. -]{0,10}[A-Za-z0-9_.])?";

fn path_strategy() -> impl Strategy<Value = ReasoningPath> {
    let step = (any::<bool>(), TOKEN, TOKEN).prop_map(|(fwd, r, e)| {
        let dir = if fwd { Direction::Forward } else { Direction::Backward };
        PathStep::new(dir, RelationRef::new(r), EntityRef::new(e))
    });
    (TOKEN, proptest::collection::vec(step, 0..5)).prop_map(|(origin, steps)| {
        let mut p = ReasoningPath::new(EntityRef::new(origin), PathSource::External);
        p.steps = steps;
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rendered_paths_parse_back(p in path_strategy()) {
        let back = parse_path(&render_path(&p), PathSource::External).unwrap();
        prop_assert_eq!(back, p);
    }
}

fn quoted(items: &[String]) -> String {
    items.iter().map(|s| format!("{s:?}")).collect::<Vec<_>>().join(", ")
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn relation_selection_stays_within_candidates(
        cands in proptest::collection::vec("[a-z]{1,4}\\.[a-z]{1,4}", 0..8),
        picks in proptest::collection::vec("[a-z]{1,4}\\.[a-z]{1,4}", 0..10),
        extra in proptest::collection::vec(0usize..8, 0..6),
        width in 1usize..6,
    ) {
        let mut picks = picks;
        picks.extend(extra.iter().filter_map(|&i| cands.get(i).cloned()));
        let text = format!("Sure. {{\"Relations\": [{}]}}", quoted(&picks));
        let candidates: Vec<RelationRef> = cands.iter().map(RelationRef::new).collect();
        let out = parse_relation_selection(&text, &candidates, width).unwrap();
        prop_assert!(out.len() <= width);
        for (i, r) in out.iter().enumerate() {
            prop_assert!(candidates.contains(r));
            prop_assert!(!out[..i].contains(r));
        }
    }

    #[test]
    fn entity_selection_stays_within_candidates(
        cands in proptest::collection::vec(("m\\.[0-9]{1,3}", proptest::option::of("[A-Z][a-z]{0,5}")), 0..8),
        picks in proptest::collection::vec("[A-Za-z0-9.]{1,6}", 0..10),
        extra in proptest::collection::vec(0usize..8, 0..6),
        width in 1usize..6,
    ) {
        let candidates: Vec<EntityRef> = cands
            .iter()
            .map(|(id, l)| match l {
                Some(l) => EntityRef::labeled(id, l),
                None => EntityRef::new(id),
            })
            .collect();
        let mut picks = picks;
        picks.extend(extra.iter().filter_map(|&i| candidates.get(i).map(|c| c.display().to_string())));
        let text = format!("{{\"Entities\": [{}]}}", quoted(&picks));
        let out = parse_entity_selection(&text, &candidates, width).unwrap();
        prop_assert!(out.len() <= width);
        for (i, e) in out.iter().enumerate() {
            prop_assert!(candidates.contains(e));
            prop_assert!(!out[..i].contains(e));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn ledger_accounts_for_every_call(
        topics in 1usize..4,
        depth in 1usize..4,
        gate in 1usize..5,
        ipg in 0usize..3,
        evaluation in 0usize..3,
        relation in 0usize..3,
    ) {
        let faults = Faults { ipg, evaluation, relation };
        let tag = "Canberra";
        let agent = ScriptedAgent::new(chain_script(tag, topics, gate, depth, faults));
        let store = chain_store(topics, depth);
        let mut cfg = AnswerConfig::default();
        cfg.explorer.max_depth = depth;
        let q = format!("where does the {tag} chain end?");
        let out = answer_question(&q, &chain_topics(topics), &agent, &store, &ApproxTokenCounter, &cfg).unwrap();

        prop_assert_eq!(out.ledger.call_count(), agent.consumed_count());
        prop_assert_eq!(out.ledger.call_count(), out.transcript.len());
        prop_assert_eq!(out.ledger.total_tokens(), out.ledger.input_tokens() + out.ledger.output_tokens());
        let kinds = [
            PromptKind::Ipg,
            PromptKind::RelationExploration,
            PromptKind::EntityExploration,
            PromptKind::Evaluation,
            PromptKind::Cot,
            PromptKind::Io,
        ];
        let (mut calls, mut input, mut output) = (0, 0, 0);
        for k in kinds {
            let part = out.ledger.by_kind(k);
            calls += part.call_count();
            input += part.input_tokens();
            output += part.output_tokens();
        }
        prop_assert_eq!(calls, out.ledger.call_count());
        prop_assert_eq!(input, out.ledger.input_tokens());
        prop_assert_eq!(output, out.ledger.output_tokens());
        for (x, call) in out.transcript.iter().zip(out.ledger.calls()) {
            prop_assert_eq!(x.kind, call.kind);
            prop_assert_eq!(call.input_tokens, (x.prompt.len() as u64).div_ceil(4));
            prop_assert_eq!(call.output_tokens, (x.response.len() as u64).div_ceil(4));
        }
    }

    #[test]
    fn dot_export_is_deterministic(topics in 1usize..4, depth in 1usize..4) {
        let run = || {
            let agent = ScriptedAgent::new(chain_script("chain", topics, depth + 1, depth, Faults::default()));
            let mut cfg = AnswerConfig::default();
            cfg.explorer.max_depth = depth;
            answer_question("which chain end?", &chain_topics(topics), &agent, &chain_store(topics, depth), &ApproxTokenCounter, &cfg).unwrap()
        };
        let a = export_dot(&run().final_subgraphs);
        let b = export_dot(&run().final_subgraphs);
        prop_assert_eq!(&a, &b);
        for i in 0..topics {
            let edge = format!("\"t{}\" -> \"c{}_1\"", i, i);
            prop_assert!(a.contains(&edge), "missing {} in {}", edge, a);
            for j in 1..=depth {
                let node = format!("\"c{}_{}\"", i, j);
                prop_assert!(a.contains(&node), "missing {} in {}", node, a);
            }
        }
    }
}
