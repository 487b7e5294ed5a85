//! Prompt rendering and response handling against checked-in fixtures.
//!
//! Set `KGMEND_BLESS=1` to rewrite `prompt.txt` from the current renderer.

use std::collections::BTreeSet;
use std::path::PathBuf;

use kgmend::complete::{
    assemble_context, complete_and_merge, extract_evidence_ids, parse_response, render_prompt, validate,
    CompletionBackend, CompletionConfig, RejectReason,
};
use kgmend::graph::{load_graph, GraphIndex, MockEmbedder, NodeId};
use kgmend::sampler::{induced_edges, CorruptionRecord, SubgraphView, ViewLabel};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/golden").join(name)
}

fn graph_and_view() -> (GraphIndex, SubgraphView) {
    let g = load_graph(fixture("graph.jsonl")).unwrap();
    let nodes: BTreeSet<NodeId> = g.nodes().map(|n| n.id.clone()).collect();
    let view = SubgraphView {
        root: "elinor".into(),
        edges: induced_edges(&g, &nodes),
        nodes: nodes.into_iter().collect(),
        label: ViewLabel::Unlabeled,
        corruption: CorruptionRecord::default(),
    };
    (g, view)
}

#[test]
fn prompt_matches_golden() {
    let (g, view) = graph_and_view();
    let request = assemble_context(&g, &view, 12).unwrap();
    let prompt = render_prompt(&request);
    let path = fixture("prompt.txt");
    if std::env::var_os("KGMEND_BLESS").is_some() {
        std::fs::write(&path, &prompt).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert_eq!(prompt, expected);
    let ids: BTreeSet<String> = extract_evidence_ids(&prompt).into_iter().map(|c| c.to_string()).collect();
    assert_eq!(ids, ["ch01", "ch02", "ch03", "ch04"].map(String::from).into());
}

#[test]
fn response_is_parsed_and_validated() {
    let (g, view) = graph_and_view();
    let request = assemble_context(&g, &view, 12).unwrap();
    let text = std::fs::read_to_string(fixture("response.txt")).unwrap();
    let parsed = parse_response(&text);
    assert_eq!(parsed.triples.len(), 8);
    assert_eq!(parsed.malformed, 1);

    let v = validate(parsed.triples, &request);
    let kept: Vec<String> = v.validated.iter().map(|t| t.to_string()).collect();
    assert_eq!(
        kept,
        [
            "(Sell Mill | located in | Harrowgate) [cites: ch01, ch02]",
            "(the fire | ruined | Harrowgate) [cites: ch03]",
            "(Elinor Vance | worked in | Harrowgate) [cites: ch02]",
            "(the fire | occurred in | 1891) [cites: ch03]",
            "(Elinor Vance | left | Harrowgate) [cites: ch01]",
        ]
    );
    let reasons: Vec<RejectReason> = v.rejected.iter().map(|(_, r)| *r).collect();
    assert_eq!(
        reasons,
        [RejectReason::NoCitation, RejectReason::UnknownChunk, RejectReason::Duplicate]
    );
}

struct FromFile(String);

impl CompletionBackend for FromFile {
    fn complete(&self, _prompt: &str) -> kgmend::Result<String> {
        Ok(self.0.clone())
    }
}

#[test]
fn response_merges_with_exact_accounting() {
    let (mut g, view) = graph_and_view();
    let before = g.stats();
    let backend = FromFile(std::fs::read_to_string(fixture("response.txt")).unwrap());
    let provider = MockEmbedder::new(3, 0);
    let cfg = CompletionConfig::default();
    let report = complete_and_merge(&mut g, std::slice::from_ref(&view), &backend, &provider, &cfg).unwrap();
    let after = g.stats();

    assert_eq!(report.views, 1);
    assert_eq!(report.received, 9);
    assert_eq!(report.validated, 5);
    assert_eq!(report.rejected.no_citation, 1);
    assert_eq!(report.rejected.unknown_chunk, 1);
    assert_eq!(report.rejected.duplicate, 1);
    assert_eq!(report.rejected.malformed, 1);
    assert_eq!(report.merged_duplicates, 1);
    assert_eq!(report.triples_added, 4);
    assert_eq!(report.nodes_added, 1);
    assert_eq!(after.triples - before.triples, 4);
    assert_eq!(after.nodes - before.nodes, 1);
    assert_eq!(after.edges - before.edges, report.edges_added);

    let year = g.entity_by_label("1891").expect("new entity for the year");
    assert_eq!(g.node(year).unwrap().feature.as_ref().map(Vec::len), Some(3));
    let edge = g.find_triple("sell mill", "located in", "harrowgate").unwrap();
    let cites: Vec<&str> = edge.provenance.iter().map(|c| c.as_str()).collect();
    assert_eq!(cites, ["ch01", "ch02"]);
    g.check_invariants().unwrap();

    // The same answer again changes nothing.
    let again = complete_and_merge(&mut g, std::slice::from_ref(&view), &backend, &provider, &cfg).unwrap();
    assert_eq!(again.triples_added, 0);
    assert_eq!(g.stats(), after);
}
