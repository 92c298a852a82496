//! Recovery of structured selections from free-form model output.
//!
//! Models are asked for JSON but routinely return Python literals, single
//! quotes, unquoted words, trailing prose or code fences. Each extractor first
//! tries strict JSON on every balanced `{...}` span, then a relaxed rewrite of
//! it, then a direct scan for the expected key.

use serde_json::{Map, Value};
use thiserror::Error;

use crate::backend::FREEBASE_PREFIX;
use crate::model::{parse_path, EntityRef, PathSource, ReasoningPath, RelationRef, Triple};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("malformed selection: {0}")]
    MalformedSelection(String),
}

const MAX_OBJECT_CANDIDATES: usize = 16;

/// Byte span of the balanced `{...}` starting at `start`, tracking
/// double-quoted strings.
fn balanced_from(text: &str, start: usize) -> Option<&str> {
    let mut depth = 0usize;
    let mut in_str = false;
    let mut esc = false;
    for (i, c) in text[start..].char_indices() {
        if in_str {
            if esc {
                esc = false;
            } else if c == '\\' {
                esc = true;
            } else if c == '"' {
                in_str = false;
            }
            continue;
        }
        match c {
            '"' => in_str = true,
            '{' | '[' => depth += 1,
            '}' | ']' => {
                depth = depth.checked_sub(1)?;
                if depth == 0 {
                    return if c == '}' {
                        Some(&text[start..start + i + 1])
                    } else {
                        None
                    };
                }
            }
            _ => {}
        }
    }
    None
}

fn is_structural(c: char) -> bool {
    matches!(c, '{' | '}' | '[' | ']' | ':' | ',')
}

fn strip_trailing_comma(out: &mut String) {
    let trimmed = out.trim_end().len();
    if out[..trimmed].ends_with(',') {
        out.truncate(trimmed - 1);
    }
}

fn bare_word(word: &str) -> String {
    match word {
        "True" | "true" | "TRUE" => "true".to_string(),
        "False" | "false" | "FALSE" => "false".to_string(),
        "None" | "null" | "NULL" | "Null" => "null".to_string(),
        w if w.parse::<f64>().is_ok() && !w.starts_with('+') => w.to_string(),
        w => Value::String(w.to_string()).to_string(),
    }
}

/// Rewrites Python-ish/unquoted object text into JSON.
fn relax(s: &str) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len() + 16);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '"' => {
                out.push('"');
                i += 1;
                let mut esc = false;
                while i < chars.len() {
                    let d = chars[i];
                    i += 1;
                    if esc {
                        out.push(d);
                        esc = false;
                        continue;
                    }
                    match d {
                        '\\' => {
                            out.push(d);
                            esc = true;
                        }
                        '"' => break,
                        '\n' => out.push_str("\\n"),
                        _ => out.push(d),
                    }
                }
                if esc {
                    out.pop();
                }
                out.push('"');
            }
            '\'' if out.trim_end().chars().last().is_none_or(is_structural) => {
                i += 1;
                let mut buf = String::new();
                while i < chars.len() {
                    let d = chars[i];
                    i += 1;
                    if d == '\\' && i < chars.len() {
                        buf.push(chars[i]);
                        i += 1;
                        continue;
                    }
                    if d == '\'' {
                        // an apostrophe followed by a letter is part of the word
                        if chars.get(i).is_some_and(|n| n.is_alphanumeric()) {
                            buf.push(d);
                            continue;
                        }
                        break;
                    }
                    buf.push(d);
                }
                out.push_str(&Value::String(buf).to_string());
            }
            '}' | ']' => {
                strip_trailing_comma(&mut out);
                out.push(c);
                i += 1;
            }
            c if is_structural(c) || c.is_whitespace() => {
                out.push(c);
                i += 1;
            }
            _ => {
                let start = i;
                while i < chars.len() && !is_structural(chars[i]) && chars[i] != '"' {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let trimmed = word.trim();
                out.push_str(&bare_word(trimmed));
                let trailing = word.len() - word.trim_end().len();
                out.extend(std::iter::repeat_n(' ', trailing.min(1)));
            }
        }
    }
    out
}

/// First JSON object recoverable from `text`.
pub fn extract_json_object(text: &str) -> Option<Map<String, Value>> {
    let starts = text
        .char_indices()
        .filter(|(_, c)| *c == '{')
        .map(|(i, _)| i)
        .take(MAX_OBJECT_CANDIDATES);
    for start in starts {
        let Some(span) = balanced_from(text, start) else {
            continue;
        };
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(span) {
            return Some(map);
        }
        if let Ok(Value::Object(map)) = serde_json::from_str::<Value>(&relax(span)) {
            return Some(map);
        }
    }
    None
}

fn get_ci<'a>(map: &'a Map<String, Value>, key: &str) -> Option<&'a Value> {
    map.iter()
        .find(|(k, _)| k.trim().eq_ignore_ascii_case(key))
        .map(|(_, v)| v)
}

fn value_text(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Null => None,
        Value::Number(_) | Value::Bool(_) => Some(v.to_string()),
        Value::Array(_) | Value::Object(_) => None,
    }
}

/// Byte offsets just past each ASCII-case-insensitive occurrence of `key`.
fn key_positions<'a>(text: &'a str, key: &'a str) -> impl Iterator<Item = usize> + 'a {
    let hay = text.as_bytes();
    let needle = key.as_bytes();
    (0..hay.len().saturating_sub(needle.len()) + 1)
        .filter(move |&i| {
            hay.len() >= needle.len() && hay[i..i + needle.len()].eq_ignore_ascii_case(needle)
        })
        .map(move |i| i + needle.len())
}

/// After a key: skip closing quote, whitespace and the colon.
fn after_colon(text: &str, pos: usize) -> Option<usize> {
    let rest = &text[pos..];
    let mut seen_colon = false;
    for (i, c) in rest.char_indices() {
        match c {
            '"' | '\'' if !seen_colon && i == 0 => {}
            ':' if !seen_colon => seen_colon = true,
            c if c.is_whitespace() => {}
            _ => return seen_colon.then_some(pos + i),
        }
    }
    None
}

fn split_items(body: &str) -> Vec<String> {
    let mut items = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    let mut esc = false;
    for c in body.chars() {
        match quote {
            Some(q) => {
                if esc {
                    esc = false;
                    cur.push(c);
                } else if c == '\\' {
                    esc = true;
                } else if c == q {
                    quote = None;
                } else {
                    cur.push(c);
                }
            }
            None => match c {
                '"' => quote = Some('"'),
                '\'' if cur.trim().is_empty() => quote = Some('\''),
                ',' => items.push(std::mem::take(&mut cur)),
                _ => cur.push(c),
            },
        }
    }
    items.push(cur);
    items
        .into_iter()
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn scan_array(text: &str, key: &str) -> Option<Vec<String>> {
    for pos in key_positions(text, key) {
        let Some(open) = after_colon(text, pos) else {
            continue;
        };
        if !text[open..].starts_with('[') {
            continue;
        }
        let body_start = open + 1;
        let mut quote: Option<char> = None;
        let mut esc = false;
        let mut end = None;
        for (i, c) in text[body_start..].char_indices() {
            match quote {
                Some(q) => {
                    if esc {
                        esc = false;
                    } else if c == '\\' {
                        esc = true;
                    } else if c == q {
                        quote = None;
                    }
                }
                None => match c {
                    '"' => quote = Some('"'),
                    ']' => {
                        end = Some(body_start + i);
                        break;
                    }
                    _ => {}
                },
            }
        }
        if let Some(end) = end {
            return Some(split_items(&text[body_start..end]));
        }
    }
    None
}

/// Items of the array stored under `key` (matched case-insensitively).
pub fn extract_array(text: &str, key: &str) -> Option<Vec<String>> {
    if let Some(obj) = extract_json_object(text) {
        if let Some(Value::Array(items)) = get_ci(&obj, key) {
            return Some(items.iter().filter_map(value_text).collect());
        }
    }
    scan_array(text, key)
}

fn scan_string(text: &str, key: &str) -> Option<String> {
    for pos in key_positions(text, key) {
        let Some(start) = after_colon(text, pos) else {
            continue;
        };
        let rest = &text[start..];
        let mut chars = rest.chars();
        let Some(q @ ('"' | '\'')) = chars.next() else {
            continue;
        };
        let mut out = String::new();
        let mut esc = false;
        let mut closed = false;
        for c in chars {
            if esc {
                out.push(match c {
                    'n' => '\n',
                    't' => '\t',
                    other => other,
                });
                esc = false;
            } else if c == '\\' {
                esc = true;
            } else if c == q {
                closed = true;
                break;
            } else {
                out.push(c);
            }
        }
        if !closed {
            out = out.trim_end().trim_end_matches('}').trim_end().to_string();
        }
        return Some(out);
    }
    None
}

fn scan_bool(text: &str, key: &str) -> Option<bool> {
    for pos in key_positions(text, key) {
        let Some(start) = after_colon(text, pos) else {
            continue;
        };
        let word: String = text[start..]
            .trim_start_matches(['"', '\''])
            .chars()
            .take_while(|c| c.is_ascii_alphabetic())
            .collect();
        if let Some(b) = word_bool(&word) {
            return Some(b);
        }
    }
    None
}

fn word_bool(word: &str) -> Option<bool> {
    match word.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" => Some(true),
        "false" | "no" => Some(false),
        _ => None,
    }
}

fn normalize_relation(s: &str) -> String {
    let s = s.trim().trim_matches(['"', '\'', '`']).trim();
    let s = s.strip_prefix(FREEBASE_PREFIX).unwrap_or(s);
    let s = s.strip_prefix("ns:").unwrap_or(s);
    s.to_lowercase()
}

/// Relations named in the `Relations` array, restricted to `candidates`,
/// in response order, deduplicated and capped at `width`.
pub fn parse_relation_selection(
    text: &str,
    candidates: &[RelationRef],
    width: usize,
) -> Result<Vec<RelationRef>, ParseError> {
    let items = extract_array(text, "Relations")
        .ok_or_else(|| ParseError::MalformedSelection("no Relations array".into()))?;
    let mut out: Vec<RelationRef> = Vec::new();
    for item in items {
        let wanted = normalize_relation(&item);
        if let Some(c) = candidates.iter().find(|c| c.name.to_lowercase() == wanted) {
            if !out.contains(c) {
                out.push(c.clone());
            }
        }
        if out.len() >= width {
            break;
        }
    }
    Ok(out)
}

/// Entities named in the `Entities` array, matched against candidate labels
/// first and ids second.
pub fn parse_entity_selection(
    text: &str,
    candidates: &[EntityRef],
    width: usize,
) -> Result<Vec<EntityRef>, ParseError> {
    let items = extract_array(text, "Entities")
        .ok_or_else(|| ParseError::MalformedSelection("no Entities array".into()))?;
    let mut out: Vec<EntityRef> = Vec::new();
    for item in items {
        let wanted = item.trim().trim_matches(['"', '\'', '`']).trim().to_lowercase();
        let hit = candidates
            .iter()
            .find(|c| c.label.as_ref().is_some_and(|l| l.to_lowercase() == wanted))
            .or_else(|| candidates.iter().find(|c| c.id.to_lowercase() == wanted));
        if let Some(c) = hit {
            if !out.contains(c) {
                out.push(c.clone());
            }
        }
        if out.len() >= width {
            break;
        }
    }
    Ok(out)
}

/// `(answerable, response)` from an evaluation reply. A missing flag reads
/// as not answerable; a missing response as empty.
pub fn parse_evaluation(text: &str) -> Result<(bool, String), ParseError> {
    if let Some(obj) = extract_json_object(text) {
        let answerable = get_ci(&obj, "Answerable").and_then(|v| match v {
            Value::Bool(b) => Some(*b),
            Value::String(s) => word_bool(s),
            _ => None,
        });
        let response = get_ci(&obj, "Response").and_then(value_text);
        if answerable.is_some() || response.is_some() {
            return Ok((answerable.unwrap_or(false), response.unwrap_or_default()));
        }
    }
    let answerable = scan_bool(text, "Answerable");
    let response = scan_string(text, "Response");
    if answerable.is_none() && response.is_none() {
        return Err(ParseError::MalformedSelection(
            "neither Answerable nor Response present".into(),
        ));
    }
    Ok((answerable.unwrap_or(false), response.unwrap_or_default()))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IpgParse {
    pub paths: Vec<ReasoningPath>,
    pub answer: String,
    pub triples: Vec<Triple>,
    /// Path entries that could not be parsed.
    pub dropped: usize,
}

const ANNOTATIONS: [&str; 2] = ["(topic entity)", "(final answer)"];

fn strip_annotations(s: &str) -> String {
    let mut out = s.to_string();
    for a in ANNOTATIONS {
        while let Some(pos) = out.to_ascii_lowercase().find(a) {
            out.replace_range(pos..pos + a.len(), "");
        }
    }
    out
}

fn starts_with_arrow(s: &str) -> bool {
    ["→", "->", "←", "<-"].iter().any(|a| s.starts_with(a))
}

/// The multi-line layout: an origin line followed by `→ relation → entity`
/// continuation lines, introduced by a line mentioning the reasoning path.
fn prose_path(text: &str) -> Option<String> {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    let intro = lines
        .iter()
        .position(|l| l.to_ascii_lowercase().contains("reasoning path"))?;
    let mut body: Vec<&str> = Vec::new();
    for line in &lines[intro + 1..] {
        if line.is_empty() {
            if body.is_empty() {
                continue;
            }
            break;
        }
        if !body.is_empty() && !starts_with_arrow(line) {
            break;
        }
        body.push(line);
    }
    (!body.is_empty()).then(|| body.join(" "))
}

fn prose_answer(text: &str) -> Option<String> {
    let lines: Vec<&str> = text.lines().map(str::trim).collect();
    let at = lines
        .iter()
        .position(|l| l.to_ascii_lowercase().contains("final answer is"))?;
    let same_line = lines[at]
        .split_once(':')
        .map(|(_, rest)| rest.trim())
        .filter(|s| !s.is_empty());
    let answer = same_line.or_else(|| lines[at + 1..].iter().copied().find(|l| !l.is_empty()))?;
    Some(strip_annotations(answer).trim().to_string())
}

fn triple_line(line: &str) -> Option<Triple> {
    let line = line.trim().trim_end_matches('\\').trim();
    let open = line.find('(')?;
    let close = line.rfind(')')?;
    if close <= open || !line[close + 1..].trim().is_empty() {
        return None;
    }
    if !line[..open]
        .chars()
        .all(|c| c.is_ascii_digit() || c.is_whitespace() || matches!(c, '.' | '-' | '*' | ')'))
    {
        return None;
    }
    let parts: Vec<&str> = line[open + 1..close].split(',').map(str::trim).collect();
    match parts.as_slice() {
        [h, r, t] if !h.is_empty() && !r.is_empty() && !t.is_empty() => Some(Triple::new(
            EntityRef::new(*h),
            RelationRef::new(*r),
            EntityRef::new(*t),
        )),
        _ => None,
    }
}

/// Internal reasoning paths, answer and listed triples from an inference
/// reply. Unparseable path entries are dropped one by one.
pub fn parse_ipg(text: &str) -> Result<IpgParse, ParseError> {
    let entries = extract_array(text, "reasoning_path")
        .or_else(|| prose_path(text).map(|p| vec![p]))
        .ok_or_else(|| ParseError::MalformedSelection("no reasoning_path found".into()))?;

    let mut out = IpgParse::default();
    for entry in entries {
        match parse_path(strip_annotations(&entry).trim(), PathSource::Internal) {
            Ok(p) => out.paths.push(p),
            Err(e) => {
                log::debug!("dropping reasoning path entry: {e}");
                out.dropped += 1;
            }
        }
    }
    out.answer = extract_json_object(text)
        .and_then(|o| get_ci(&o, "response").and_then(value_text))
        .or_else(|| scan_string(text, "response"))
        .or_else(|| prose_answer(text))
        .unwrap_or_default();
    out.triples = text.lines().filter_map(triple_line).collect();
    Ok(out)
}
