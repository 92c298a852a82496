//! Graphviz export of explored subgraphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::model::{collect_triples, Subgraph};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

/// One node per entity, one edge per underlying triple (head to tail,
/// whatever direction the path walked it). Topic entities get a double
/// octagon. Output depends only on the subgraphs' contents.
pub fn export_dot(subgraphs: &[Subgraph]) -> String {
    let topics: BTreeSet<&str> = subgraphs.iter().map(|g| g.topic.id.as_str()).collect();
    let mut nodes: BTreeMap<String, String> = BTreeMap::new();
    for g in subgraphs {
        nodes.entry(g.topic.id.clone()).or_insert_with(|| g.topic.display().to_string());
        for p in &g.paths {
            for e in p.entities() {
                nodes
                    .entry(e.id.clone())
                    .and_modify(|l| {
                        if l == &e.id && e.label.is_some() {
                            *l = e.display().to_string();
                        }
                    })
                    .or_insert_with(|| e.display().to_string());
            }
        }
    }
    let mut out = String::from("digraph kg {\n    rankdir=LR;\n    node [shape=ellipse];\n");
    for (id, label) in &nodes {
        let shape = if topics.contains(id.as_str()) {
            " shape=doubleoctagon"
        } else {
            ""
        };
        let _ = writeln!(out, "    {} [label={}{shape}];", quote(id), quote(label));
    }
    for (t, _) in collect_triples(subgraphs) {
        let _ = writeln!(
            out,
            "    {} -> {} [label={}];",
            quote(&t.head.id),
            quote(&t.tail.id),
            quote(t.relation.as_str())
        );
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_path, EntityRef, PathSource};

    fn graph(text: &str) -> Subgraph {
        let p = parse_path(text, PathSource::External).unwrap();
        let mut g = Subgraph::seed(p.origin.clone());
        g.paths = vec![p];
        g
    }

    #[test]
    fn forward_edge() {
        let d = export_dot(&[graph("A → r → B")]);
        assert!(d.contains("\"A\" -> \"B\" [label=\"r\"];"));
        assert!(d.contains("\"A\" [label=\"A\" shape=doubleoctagon];"));
        assert!(d.contains("\"B\" [label=\"B\"];"));
    }

    #[test]
    fn backward_edge_follows_triple() {
        let d = export_dot(&[graph("A ← r ← B")]);
        assert!(d.contains("\"B\" -> \"A\" [label=\"r\"];"));
        assert!(!d.contains("\"A\" -> \"B\""));
    }

    #[test]
    fn empty() {
        assert_eq!(export_dot(&[]), "digraph kg {\n    rankdir=LR;\n    node [shape=ellipse];\n}\n");
        let seed = Subgraph::seed(EntityRef::labeled("m.1", "Say \"hi\""));
        assert!(export_dot(&[seed]).contains("[label=\"Say \\\"hi\\\"\" shape=doubleoctagon]"));
    }
}
