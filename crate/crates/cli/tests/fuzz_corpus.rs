//! Replays the checked-in fuzz seeds, plus cheap byte mutations of them,
//! through every parser entry point on stable Rust.

use std::path::Path;

use rand::Rng;
use semipar::curve::{CurveJson, SemiparJson};
use semipar::graph::{parse_edge_csv, parse_vertex_csv, read_graph, GraphJson};
use semipar::rng::seeded;
use semipar::spectral::Embedding;
use semipar_cli::commands::SbmJson;
use semipar_cli::PipelineConfig;

/// Bytes that tend to matter to the CSV and JSON grammars.
const ALPHABET: &[u8] = b"0,.-e9\n{}[]\"x:";

fn feed(target: &str, data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match target {
        "edge_csv" => {
            let _ = parse_edge_csv(text);
            let _ = read_graph(text, None);
        }
        "vertex_csv" => {
            let _ = parse_vertex_csv(text);
        }
        "graph_json" => {
            if let Ok(j) = GraphJson::from_json(text) {
                let _ = j.into_graph();
            }
        }
        "embedding_csv" => {
            if let Some((f, rest)) = text.split_at_checked(1) {
                let _ = Embedding::read_csv(rest, f == "\u{1}");
            }
        }
        "curve_json" => {
            if let Ok(c) = CurveJson::from_json(text).and_then(CurveJson::into_params) {
                let _ = c.log_density(&vec![0.5; c.dim()]);
            }
        }
        "semipar_json" => {
            if let Ok(m) = SemiparJson::from_json(text).and_then(SemiparJson::into_model) {
                let _ = m.log_density(&vec![0.25; m.dim()]);
            }
        }
        "sbm_json" => {
            if let Ok(p) = SbmJson::from_json(text).and_then(SbmJson::into_params) {
                let _ = p.expected_edges(&vec![3; p.k()]);
            }
        }
        "pipeline_config" => {
            if let Ok(cfg) = PipelineConfig::from_json(text) {
                let _ = cfg.validate();
            }
        }
        other => panic!("no entry point for corpus directory {other}"),
    }
}

#[test]
fn corpus_seeds_and_mutations_do_not_panic() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let mut rng = seeded(0);
    let mut seeds = 0;
    for dir in std::fs::read_dir(&root).expect("fuzz corpus is checked in") {
        let dir = dir.unwrap();
        let target = dir.file_name().into_string().unwrap();
        for file in std::fs::read_dir(dir.path()).unwrap() {
            let data = std::fs::read(file.unwrap().path()).unwrap();
            feed(&target, &data);
            seeds += 1;
            for _ in 0..300 {
                let mut m = data.clone();
                for _ in 0..rng.gen_range(1..4) {
                    let op = rng.gen_range(0..3);
                    if m.is_empty() || op == 0 {
                        let at = rng.gen_range(0..=m.len());
                        m.insert(at, ALPHABET[rng.gen_range(0..ALPHABET.len())]);
                    } else if op == 1 {
                        let at = rng.gen_range(0..m.len());
                        m.remove(at);
                    } else {
                        let at = rng.gen_range(0..m.len());
                        m[at] = rng.gen();
                    }
                }
                feed(&target, &m);
            }
        }
    }
    assert!(seeds >= 16, "only {seeds} corpus seeds found");
}
