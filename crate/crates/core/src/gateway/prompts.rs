use std::collections::BTreeMap;

use thiserror::Error;

use super::PromptKind;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PromptError {
    #[error("{kind} prompt is missing binding ${slot}")]
    MissingBinding { kind: PromptKind, slot: String },
}

/// Named values for `$slot` substitution.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PromptBindings {
    values: BTreeMap<String, String>,
}

impl PromptBindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, slot: &str, value: impl Into<String>) -> Self {
        self.values.insert(slot.to_string(), value.into());
        self
    }

    pub fn set(&mut self, slot: &str, value: impl Into<String>) {
        self.values.insert(slot.to_string(), value.into());
    }

    pub fn get(&self, slot: &str) -> Option<&str> {
        self.values.get(slot).map(String::as_str)
    }
}

/// `"a", "b", "c"` with JSON string escaping.
pub fn quoted_list<I, S>(items: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    items
        .into_iter()
        .map(|s| serde_json::Value::String(s.as_ref().to_string()).to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

const IPG: &str = "You need to answer Question using follow steps:
step1: You need to extract the most relevant topic entities from the Question.
step2: Based on the topic entities and Question. List the $tripleCount related knowledge triples from high to low in terms of relevance to the Question. The triples are given in the form of (entity, relation, entity).
step3: Based on the knowledge triples you listed, combined with the Question and topic entities, you need to give the final answer. In addition, you need to give the reasoning path. The overall format should be \"entity1→relation1→entity2→relation2→entity3→...→end\".
The answer format is {reasoning_path : [\"entity1→relation1→entity2→relation2→entity3→...→end\"], \"response\": \"based on the knowledge, the answer to the question $question is xxxx\" }
Query:$question";

const RELATION_EXPLORATION: &str = "Dict : {
\"Question\" : $question,
\"Topic entity\" : $topicEntity,
\"Knowledge Path\" : $knowpath_str,
}
RelationList: $relationList
Now you need to find out up to 7 most relevant relations from RelationList to each entry in the dictionary Dict and put them into a list called Relations. The answer format is: { \"Relations\":[xxx, xxx, xxx,...] (length up to 5) }. Do not output any extra content except what is required by the format.
Answer:";

const ENTITY_EXPLORATION: &str = "Dict : {
\"Question\" : $question,
\"Topic entity\" : $topicEntity,
\"Knowledge Path\" : $knowpath_str,
\"RelationList\" : $relationList,
}
EntityList: $entityList
Now you need to find out up to 7 entities that are most relevant to each entry in the dictionary Dict from EntityList by relevance, and put them into a list called Entities. The answer format is: { \"Entities\":[xxx, xxx, xxx,...] (length up to 5) }. Do not output any extra content except what is required by the format.
Answer:";

const EVALUATION: &str = "Reasoning_path:$subgraph
Based on the Reasoning_path and your own knowledge, you need to determine whether the Question:$question can be answered. '->' and '<-' indicate the direction of Reasoning_path between entities and relationships.
Requests:
1. The answer format is: { \"Answerable\": True or False, \"Response\": \"the answer to the question $question is xxxx\" }
Answer:";

const COT: &str = "Q: What state is home to the university that is represented in sports by George Washington Colonials men's basketball?
A: First, the education institution has a sports team named George Washington Colonials men's basketball in is George Washington University, Second, George Washington University is in Washington D.C.
The answer is {Washington, D.C.}.

Q: Who lists Pramatha Chaudhuri as an influence and wrote Jana Gana Mana?
A: First, Bharoto Bhagyo Bidhata wrote Jana Gana Mana. Second, Bharoto Bhagyo Bidhata lists Pramatha Chaudhuri as an influence.
The answer is {Bharoto Bhagyo Bidhata}.

Q: Who was the artist nominated for an award for You Drive Me Crazy?
A: First, the artist nominated for an award for You Drive Me Crazy is Britney Spears.
The answer is {Jason Allen Alexander}.

Q: What person born in Siegen influenced the work of Vincent Van Gogh?
A: First, Peter Paul Rubens, Claude Monet and etc. influenced the work of Vincent Van Gogh. Second, Peter Paul Rubens born in Siegen.
The answer is {Peter Paul Rubens}.

Q: What is the country close to Russia where Mikheil Saakashvii holds a government position?
A: First, China, Norway, Finland, Estonia and Georgia is close to Russia. Second, Mikheil Saakashvii holds a government position at Georgia.
The answer is {Georgia}.

Q: What drug did the actor who portrayed the character Urethane Wheels Guy overdosed on?
A: First, Mitchell Lee Hedberg portrayed character Urethane Wheels Guy. Second, Mitchell Lee Hedberg overdose Heroin.
The answer is {Heroin}.

Q: $question
A:";

const IO: &str = "Q: $question
A:";

fn template(kind: PromptKind) -> &'static str {
    match kind {
        PromptKind::Ipg => IPG,
        PromptKind::RelationExploration => RELATION_EXPLORATION,
        PromptKind::EntityExploration => ENTITY_EXPLORATION,
        PromptKind::Evaluation => EVALUATION,
        PromptKind::Cot => COT,
        PromptKind::Io => IO,
    }
}

/// Slots that fall back to a default instead of failing.
fn default_for(kind: PromptKind, slot: &str) -> Option<&'static str> {
    match (kind, slot) {
        (PromptKind::Ipg, "tripleCount") => Some("15"),
        _ => None,
    }
}

/// Substitutes every `$slot` of the template for `kind` in a single pass;
/// substituted text is never rescanned.
pub fn render_prompt(kind: PromptKind, bindings: &PromptBindings) -> Result<String, PromptError> {
    let text = template(kind);
    let mut out = String::with_capacity(text.len() + 256);
    let mut rest = text;
    while let Some(pos) = rest.find('$') {
        out.push_str(&rest[..pos]);
        let after = &rest[pos + 1..];
        let len = after
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(after.len());
        let slot = &after[..len];
        if slot.is_empty() {
            out.push('$');
        } else {
            let value = bindings
                .get(slot)
                .or_else(|| default_for(kind, slot))
                .ok_or_else(|| PromptError::MissingBinding {
                    kind,
                    slot: slot.to_string(),
                })?;
            out.push_str(value);
        }
        rest = &after[len..];
    }
    out.push_str(rest);
    Ok(out)
}
