use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use fincot_core::blueprint::{
    load_registry, parse_mermaid, render_hint, strip_hint, validate_blueprint, BlueprintRegistry,
    NodeShape,
};
use fincot_core::DomainCode;
use proptest::prelude::*;

mod common;
use common::ECONOMICS_EDGES;

fn blueprint_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../blueprints")
}

#[test]
fn all_nine_parse_without_errors() {
    let reg = load_registry(&blueprint_dir()).unwrap();
    assert_eq!(reg.len(), 9);
    assert!(reg.is_complete());
    for bp in reg.in_fixed_order() {
        let report = validate_blueprint(bp);
        assert!(
            report.errors.is_empty(),
            "{}: {:?}",
            bp.domain,
            report.errors
        );
        assert!(
            bp.graph.node_count() > 0 && bp.graph.edge_count() > 0,
            "{}",
            bp.domain
        );
    }
}

#[test]
fn disk_blueprints_match_builtin_copies() {
    let disk = load_registry(&blueprint_dir()).unwrap();
    let builtin = BlueprintRegistry::builtin();
    for d in DomainCode::BLUEPRINTED {
        assert_eq!(disk.get(d), builtin.get(d), "{d}");
    }
}

#[test]
fn economics_matches_hand_count() {
    let reg = load_registry(&blueprint_dir()).unwrap();
    let g = &reg.get(DomainCode::Economics).unwrap().graph;
    assert_eq!(g.node_count(), 17);
    assert_eq!(g.edge_count(), 20);
    let parsed: Vec<(&str, &str)> = g
        .edges
        .iter()
        .map(|e| (e.from.as_str(), e.to.as_str()))
        .collect();
    assert_eq!(parsed, ECONOMICS_EDGES);
    let expected_nodes: BTreeSet<&str> =
        ECONOMICS_EDGES.iter().flat_map(|&(a, b)| [a, b]).collect();
    let parsed_nodes: BTreeSet<&str> = g.nodes.keys().map(String::as_str).collect();
    assert_eq!(parsed_nodes, expected_nodes);
    assert_eq!(g.root().unwrap().id, "A");
    assert_eq!(g.nodes["A1"].shape, NodeShape::Decision);
    assert_eq!(g.nodes["E1"].shape, NodeShape::Rounded);
    assert_eq!(g.edges[0].label.as_deref(), Some("Extract key terms"));
    assert!(validate_blueprint(reg.get(DomainCode::Economics).unwrap())
        .warnings
        .is_empty());
}

#[test]
fn render_strip_parse_round_trip() {
    for bp in BlueprintRegistry::builtin().in_fixed_order() {
        let hint = render_hint(bp);
        let (title, source) = strip_hint(&hint).expect("hint strips");
        assert_eq!(title, bp.title);
        assert_eq!(parse_mermaid(source).unwrap(), bp.graph, "{}", bp.domain);
    }
}

#[test]
fn file_text_round_trip() {
    for bp in BlueprintRegistry::builtin().in_fixed_order() {
        let again = fincot_core::blueprint::Blueprint::from_file_text(&bp.to_file_text()).unwrap();
        assert_eq!(&again, bp);
    }
}

#[derive(Debug, Clone)]
struct GenNode {
    id: String,
    label: String,
    shape: NodeShape,
}

fn node_strategy(idx: usize) -> impl Strategy<Value = GenNode> {
    (
        "[A-Za-z][A-Za-z0-9 ,:+]{0,20}[A-Za-z0-9]",
        prop_oneof![
            Just(NodeShape::Rectangle),
            Just(NodeShape::Decision),
            Just(NodeShape::Rounded)
        ],
    )
        .prop_map(move |(label, shape)| GenNode {
            id: format!("N{idx}"),
            label,
            shape,
        })
}

type GenEdge = (usize, usize, Option<String>);

fn graph_strategy() -> impl Strategy<Value = (Vec<GenNode>, Vec<GenEdge>)> {
    (1usize..12).prop_flat_map(|n| {
        let nodes = (0..n).map(node_strategy).collect::<Vec<_>>();
        let edges = prop::collection::vec(
            (
                0..n,
                0..n,
                prop::option::of("[A-Za-z][A-Za-z0-9 ]{0,12}[A-Za-z0-9]"),
            ),
            0..20,
        );
        (nodes, edges)
    })
}

fn render(nodes: &[GenNode], edges: &[GenEdge]) -> String {
    let mut s = String::from("graph TD\n");
    for n in nodes {
        let (open, close) = match n.shape {
            NodeShape::Rectangle => ('[', ']'),
            NodeShape::Decision => ('{', '}'),
            NodeShape::Rounded => ('(', ')'),
        };
        s.push_str(&format!("  {}{open}{}{close}\n", n.id, n.label));
    }
    for (a, b, label) in edges {
        match label {
            Some(l) => s.push_str(&format!("  N{a} -->|{l}| N{b}\n")),
            None => s.push_str(&format!("  N{a} --> N{b}\n")),
        }
    }
    s
}

proptest! {
    #[test]
    fn generated_graphs_parse_back((nodes, edges) in graph_strategy()) {
        let g = parse_mermaid(&render(&nodes, &edges)).unwrap();
        prop_assert_eq!(g.node_count(), nodes.len());
        for (decl, want) in g.nodes.values().zip(&nodes) {
            prop_assert_eq!(&decl.id, &want.id);
            prop_assert_eq!(&decl.label, &want.label);
            prop_assert_eq!(decl.shape, want.shape);
        }
        prop_assert_eq!(g.edge_count(), edges.len());
        for (e, (a, b, label)) in g.edges.iter().zip(&edges) {
            prop_assert_eq!(&e.from, &format!("N{a}"));
            prop_assert_eq!(&e.to, &format!("N{b}"));
            prop_assert_eq!(&e.label, label);
        }
    }
}
