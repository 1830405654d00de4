use proptest::prelude::*;
use semipar::graph::{parse_edge_csv, read_graph, write_edge_csv, write_vertex_csv, DirectedGraph, GraphJson, WeightMode};
use semipar::Error;

#[test]
fn three_rows_three_edges() {
    let g = read_graph("0,1\n1,0\n0,2\n", None).unwrap();
    assert_eq!(g.n(), 3);
    assert_eq!(g.edge_count(), 3);
    assert!(g.edges().iter().all(|e| e.weight == 1.0));
}

#[test]
fn duplicate_rows_sum() {
    let g = read_graph("source,target,weight\n0,1,2\n0,1,3\n", None).unwrap();
    assert_eq!(g.edge_count(), 1);
    assert_eq!(g.weight(0, 1), 5.0);
}

#[test]
fn errors_carry_line_numbers() {
    match read_graph("source,target\n0,1\n2,x\n", None) {
        Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("expected a parse error, got {other:?}"),
    }
    assert!(matches!(read_graph("0,0\n", None), Err(Error::Validation(_))));
}

#[test]
fn metadata_attaches() {
    let g = read_graph("0,1\n", Some("id,type,claws,distance\n0,KC,3,1.5\n1,PN,,\n2,PN,,\n")).unwrap();
    assert_eq!(g.n(), 3);
    let meta = g.meta().unwrap();
    assert_eq!(meta[0].claws, Some(3));
    assert_eq!(meta[1].distance, None);
    assert_eq!(g.vertices_with_type("PN"), vec![1, 2]);
}

#[test]
fn canonical_csv_is_byte_stable() {
    let text = "source,target,weight\n0,2,1\n1,0,2.5\n2,1,7\n";
    let g = read_graph(text, None).unwrap();
    let mut out = Vec::new();
    write_edge_csv(&g, &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), text);

    let meta = "id,type,claws,distance\n0,KC,3,1.5\n1,PN,,\n2,MBON,,0.25\n";
    let g = read_graph(text, Some(meta)).unwrap();
    let mut out = Vec::new();
    write_vertex_csv(g.meta().unwrap(), &mut out).unwrap();
    assert_eq!(String::from_utf8(out).unwrap(), meta);
}

#[test]
fn json_round_trip() {
    let g = read_graph("0,1,2\n2,0,1\n", Some("id,type\n0,A\n1,B\n2,A\n")).unwrap();
    let json = GraphJson::from(&g).to_json().unwrap();
    let back = GraphJson::from_json(&json).unwrap().into_graph().unwrap();
    assert_eq!(back, g);
}

#[test]
fn weight_views() {
    let g = DirectedGraph::from_edges(3, [(0, 1, 7.0), (1, 2, std::f64::consts::E - 1.0)]).unwrap();
    assert_eq!(g.weight_transform(WeightMode::Binarize).weight(0, 1), 1.0);
    assert!((g.weight_transform(WeightMode::Log1p).weight(1, 2) - 1.0).abs() < 1e-15);
    assert_eq!(g.weight_transform(WeightMode::Identity), g);
}

proptest! {
    #[test]
    fn edge_parser_never_panics(text in "\\PC{0,200}") {
        let _ = parse_edge_csv(&text);
    }

    #[test]
    fn generated_graphs_round_trip(edges in prop::collection::vec((0usize..12, 0usize..12, 1u32..20), 0..60)) {
        let edges: Vec<(usize, usize, f64)> = edges.into_iter().filter(|(s, t, _)| s != t).map(|(s, t, w)| (s, t, w as f64)).collect();
        let g = DirectedGraph::from_edges(12, edges).unwrap();
        let mut out = Vec::new();
        write_edge_csv(&g, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let rows = parse_edge_csv(&text).unwrap();
        let back = DirectedGraph::from_edges(12, rows).unwrap();
        prop_assert_eq!(back, g);
    }
}
