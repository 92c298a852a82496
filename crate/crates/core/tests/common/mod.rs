#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Mutex;

use kgpath::backend::InMemoryStore;
use kgpath::gateway::{AgentError, AgentGateway, PromptKind, ScriptRecord};
use rand::rngs::StdRng;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};

pub const QUESTION: &str = "what is the majority party now in the country where Canberra is located?";

/// The quoted list following `marker` at the start of a prompt line.
pub fn listed(prompt: &str, marker: &str) -> Vec<String> {
    let Some(line) = prompt.lines().find_map(|l| l.strip_prefix(marker)) else {
        return Vec::new();
    };
    serde_json::from_str::<Vec<String>>(&format!("[{line}]")).unwrap_or_default()
}

/// Replies at random but always in a plausible shape: picks a few listed
/// candidates, sometimes adds names that were never offered, sometimes
/// answers garbage, and says "answerable" with probability `p_answer`.
pub struct RandomAgent {
    rng: Mutex<StdRng>,
    pub p_answer: f64,
}

impl RandomAgent {
    pub fn new(seed: u64, p_answer: f64) -> Self {
        Self {
            rng: Mutex::new(StdRng::seed_from_u64(seed)),
            p_answer,
        }
    }

    fn pick(rng: &mut StdRng, items: &[String]) -> Vec<String> {
        let most = items.len().min(4);
        let n = if most > 0 && rng.random_bool(0.85) { rng.random_range(1..=most) } else { 0 };
        let mut chosen: Vec<String> = items
            .choose_multiple(rng, n)
            .cloned()
            .collect();
        if rng.random_bool(0.3) {
            chosen.push(format!("invented.{}", rng.random_range(0..1000)));
        }
        chosen.shuffle(rng);
        chosen
    }
}

impl AgentGateway for RandomAgent {
    fn complete(&self, kind: PromptKind, prompt: &str, _t: f64) -> Result<String, AgentError> {
        let mut rng = self.rng.lock().unwrap();
        if rng.random_bool(0.1) {
            return Ok("I am not sure.".into());
        }
        Ok(match kind {
            PromptKind::Ipg => {
                let n = rng.random_range(0..100);
                format!(r#"{{"reasoning_path": ["e{n}→r→e{}"], "response": "the answer is e{n}"}}"#, n + 1)
            }
            PromptKind::RelationExploration => {
                let picks = Self::pick(&mut rng, &listed(prompt, "RelationList: "));
                serde_json::json!({ "Relations": picks }).to_string()
            }
            PromptKind::EntityExploration => {
                let picks = Self::pick(&mut rng, &listed(prompt, "EntityList: "));
                serde_json::json!({ "Entities": picks }).to_string()
            }
            PromptKind::Evaluation => {
                let yes = rng.random_bool(self.p_answer);
                format!(r#"{{"Answerable": {}, "Response": "maybe"}}"#, if yes { "True" } else { "False" })
            }
            PromptKind::Cot | PromptKind::Io => "The answer is {x}.".into(),
        })
    }
}

/// A random graph over `entities` nodes and `relations` relation names.
pub fn random_kg(rng: &mut StdRng, entities: usize, relations: usize, triples: usize) -> (InMemoryStore, BTreeSet<(String, String, String)>) {
    let mut set = BTreeSet::new();
    while set.len() < triples {
        let h = rng.random_range(0..entities);
        let t = rng.random_range(0..entities);
        let r = rng.random_range(0..relations);
        set.insert((format!("e{h}"), format!("rel.p{r}"), format!("e{t}")));
    }
    let store = InMemoryStore::from_triples(set.iter().cloned());
    (store, set)
}

/// Chain scenario: topic `t{i}` leads to `c{i}_1 … c{i}_depth` through
/// `link{i}_{j}`; every chain node also has a dead-end side branch.
pub fn chain_triples(topics: usize, depth: usize) -> Vec<(String, String, String)> {
    let mut out = Vec::new();
    for i in 0..topics {
        let mut prev = format!("t{i}");
        for j in 1..=depth {
            let next = format!("c{i}_{j}");
            out.push((prev.clone(), format!("link{i}_{j}"), next.clone()));
            out.push((prev.clone(), format!("side{i}_{j}"), format!("s{i}_{j}")));
            prev = next;
        }
    }
    out
}

pub fn chain_store(topics: usize, depth: usize) -> InMemoryStore {
    InMemoryStore::from_triples(chain_triples(topics, depth))
}

pub fn ipg_reply(answer: &str) -> String {
    format!(r#"{{"reasoning_path": ["t0→link0_1→c0_1"], "response": "{answer}"}}"#)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Faults {
    /// Malformed replies before the good inference reply.
    pub ipg: usize,
    /// Malformed replies before the good reply of the first evaluation.
    pub evaluation: usize,
    /// Malformed replies before the first relation selection.
    pub relation: usize,
}

impl Faults {
    pub fn total(&self) -> usize {
        self.ipg + self.evaluation + self.relation
    }
}

/// Script for a chain question whose gate fires after round `gate` (never,
/// when `gate > depth`). Every record is tied to `tag`, which must appear in
/// the question, so scripts for different questions can share one agent.
pub fn chain_script(tag: &str, topics: usize, gate: usize, depth: usize, faults: Faults) -> Vec<ScriptRecord> {
    let bad = "no idea";
    let mut s = Vec::new();
    for _ in 0..faults.ipg {
        s.push(ScriptRecord::new(PromptKind::Ipg, bad).when(tag));
    }
    s.push(ScriptRecord::new(PromptKind::Ipg, ipg_reply("the answer from memory is c0_1")).when(tag));
    for round in 1..=depth.min(gate) {
        for i in 0..topics {
            if round == 1 && i == 0 {
                for _ in 0..faults.relation {
                    s.push(ScriptRecord::new(PromptKind::RelationExploration, bad).when(tag));
                }
            }
            s.push(
                ScriptRecord::new(PromptKind::RelationExploration, format!(r#"{{"Relations":["link{i}_{round}"]}}"#))
                    .when(tag),
            );
            s.push(
                ScriptRecord::new(PromptKind::EntityExploration, format!(r#"{{"Entities":["c{i}_{round}"]}}"#))
                    .when(tag),
            );
        }
        if round == 1 {
            for _ in 0..faults.evaluation {
                s.push(ScriptRecord::new(PromptKind::Evaluation, bad).when(tag));
            }
        }
        let reply = if round == gate {
            format!(r#"{{"Answerable": True, "Response": "the answer to the question is c0_{round}"}}"#)
        } else {
            r#"{"Answerable": False, "Response": ""}"#.to_string()
        };
        s.push(ScriptRecord::new(PromptKind::Evaluation, reply).when(tag));
    }
    s
}

pub fn chain_topics(topics: usize) -> kgpath::ipg::TopicMap {
    (0..topics).map(|i| (format!("t{i}"), format!("t{i}"))).collect()
}
