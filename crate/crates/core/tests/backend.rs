use std::collections::BTreeSet;
use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use kgpath::backend::{render_sparql, BackendConfig, BackendError, InMemoryStore, KnowledgeBackend, SparqlBackend, SparqlTemplate};
use kgpath::model::{EntityRef, RelationRef};
use proptest::prelude::*;
use serde_json::json;

fn uri(id: &str) -> serde_json::Value {
    json!({"type": "uri", "value": format!("http://rdf.freebase.com/ns/{id}")})
}

fn rows(var: &str, terms: Vec<serde_json::Value>) -> String {
    let bindings: Vec<_> = terms.into_iter().map(|t| json!({ var: t })).collect();
    json!({"head": {"vars": [var]}, "results": {"bindings": bindings}}).to_string()
}

/// Canned endpoint: answers by query shape and logs every decoded query.
fn serve() -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/sparql", listener.local_addr().unwrap());
    let log = Arc::new(Mutex::new(Vec::new()));
    let seen = log.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            reader.read_line(&mut request_line).unwrap();
            loop {
                let mut h = String::new();
                if reader.read_line(&mut h).unwrap() == 0 || h == "\r\n" {
                    break;
                }
            }
            let target = request_line.split_whitespace().nth(1).unwrap_or("").to_string();
            let raw = target
                .split_once('?')
                .map(|(_, q)| q)
                .unwrap_or("")
                .split('&')
                .find_map(|kv| kv.strip_prefix("query="))
                .unwrap_or("")
                .replace('+', " ");
            let query = percent_encoding::percent_decode_str(&raw).decode_utf8_lossy().into_owned();
            seen.lock().unwrap().push(query.clone());
            let (status, body) = if query.contains("m.down") {
                (503, "overloaded".to_string())
            } else if query.contains("m.bad") {
                (400, "parse error".to_string())
            } else if query.contains("?name") {
                (
                    200,
                    rows(
                        "name",
                        vec![
                            json!({"type": "literal", "value": "Kanbera", "xml:lang": "ru"}),
                            json!({"type": "literal", "value": "Canberra", "xml:lang": "en"}),
                        ],
                    ),
                )
            } else if query.contains("?relation ?tail") {
                (
                    200,
                    rows(
                        "relation",
                        vec![
                            uri("location.location.containedby"),
                            uri("location.location.containedby"),
                            json!({"type": "uri", "value": "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"}),
                            uri("type.object.type"),
                        ],
                    ),
                )
            } else if query.contains("?head ?relation") {
                (200, rows("relation", vec![uri("location.country.capital")]))
            } else {
                (200, rows("Entity", vec![uri("m.0chghy"), json!({"type": "literal", "value": "x"})]))
            };
            let reason = if status == 200 { "OK" } else { "Error" };
            let _ = write!(
                stream,
                "HTTP/1.1 {status} {reason}\r\nContent-Type: application/sparql-results+json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    (url, log)
}

fn backend(url: &str) -> SparqlBackend {
    let cfg = BackendConfig {
        endpoint_url: url.to_string(),
        timeout: Duration::from_secs(5),
        denylist: vec!["type.".into()],
        ..BackendConfig::default()
    };
    // the environment override would point at a different server
    std::env::remove_var(kgpath::backend::ENDPOINT_ENV);
    SparqlBackend::new(cfg)
}

#[test]
fn sparql_backend_end_to_end() {
    let (url, log) = serve();
    let b = backend(&url);
    let canberra = EntityRef::new("m.0b1t1");

    let rels = b.head_relations(&canberra).unwrap();
    assert_eq!(rels, vec![RelationRef::new("location.location.containedby")]);
    let sent = log.lock().unwrap().last().cloned().unwrap();
    let expected = render_sparql(SparqlTemplate::HeadRelation, &["m.0b1t1"]).unwrap() + "LIMIT 200\n";
    assert_eq!(sent, expected);

    assert_eq!(
        b.tail_relations(&canberra).unwrap(),
        vec![RelationRef::new("location.country.capital")]
    );
    let tails = b
        .tail_entities(&canberra, &RelationRef::new("location.location.containedby"))
        .unwrap();
    assert_eq!(tails, vec![EntityRef::new("m.0chghy")]);
    let sent = log.lock().unwrap().last().cloned().unwrap();
    assert!(sent.contains("ns:m.0b1t1 ns:location.location.containedby ?Entity ."));

    let heads = b
        .head_entities(&EntityRef::new("m.0chghy"), &RelationRef::new("location.location.containedby"))
        .unwrap();
    assert_eq!(heads, vec![EntityRef::new("m.0chghy")]);
    let sent = log.lock().unwrap().last().cloned().unwrap();
    assert!(sent.contains("?Entity ns:location.location.containedby ns:m.0chghy ."));

    let before = b.request_count();
    let named = b.resolve_label(&canberra).unwrap();
    assert_eq!(named.display(), "Canberra");
    b.resolve_label(&canberra).unwrap();
    assert_eq!(b.request_count(), before + 1);
}

#[test]
fn server_errors_retry_once_then_fail() {
    let (url, _) = serve();
    let b = backend(&url);
    let before = b.request_count();
    let err = b.head_relations(&EntityRef::new("m.down")).unwrap_err();
    assert!(matches!(err, BackendError::BackendUnavailable(_)));
    assert_eq!(b.request_count() - before, 2);

    let before = b.request_count();
    let err = b.head_relations(&EntityRef::new("m.bad")).unwrap_err();
    assert!(matches!(err, BackendError::QueryRejected(_)));
    assert_eq!(b.request_count() - before, 1);
}

#[test]
fn bad_bindings_never_reach_the_wire() {
    let (url, _) = serve();
    let b = backend(&url);
    let err = b.head_relations(&EntityRef::new("m.1 } DROP")).unwrap_err();
    assert!(matches!(err, BackendError::BadBinding(_)));
    assert_eq!(b.request_count(), 0);
}

fn small_kg() -> impl Strategy<Value = BTreeSet<(u8, u8, u8)>> {
    proptest::collection::btree_set((0u8..12, 0u8..4, 0u8..12), 0..60)
}

proptest! {
    #[test]
    fn in_memory_queries_are_symmetric(k in small_kg()) {
        let name = |x: u8| format!("e{x}");
        let rel = |x: u8| format!("r{x}");
        let store = InMemoryStore::from_triples(k.iter().map(|&(h, r, t)| (name(h), rel(r), name(t))));
        for &(h, r, t) in &k {
            let (he, te, re) = (EntityRef::new(name(h)), EntityRef::new(name(t)), RelationRef::new(rel(r)));
            prop_assert!(store.tail_entities(&he, &re).unwrap().contains(&te));
            prop_assert!(store.head_entities(&te, &re).unwrap().contains(&he));
            prop_assert!(store.head_relations(&he).unwrap().contains(&re));
            prop_assert!(store.tail_relations(&te).unwrap().contains(&re));
        }
        for e in 0u8..12 {
            let ent = EntityRef::new(name(e));
            for re in store.head_relations(&ent).unwrap() {
                for t in store.tail_entities(&ent, &re).unwrap() {
                    let r: u8 = re.name[1..].parse().unwrap();
                    let t: u8 = t.id[1..].parse().unwrap();
                    prop_assert!(k.contains(&(e, r, t)));
                }
            }
        }
    }
}
