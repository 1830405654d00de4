//! Edge-list and vertex-table CSV ingestion, plus the JSON graph export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{DirectedGraph, VertexMeta};
use crate::error::{Error, Result};

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    parse_err(line, e.to_string())
}

fn is_blank(record: &csv::StringRecord) -> bool {
    record.iter().all(|f| f.is_empty())
}

fn parse_index(field: &str, what: &str, line: u64) -> Result<usize> {
    field
        .parse::<usize>()
        .map_err(|_| parse_err(line, format!("{what} `{field}` is not a non-negative integer")))
}

/// Parses `source,target[,weight]` rows. A leading header row starting with
/// `source` is skipped. Self-loops are rejected here so the error carries the
/// offending line.
pub fn parse_edge_csv(text: &str) -> Result<Vec<(usize, usize, f64)>> {
    let mut rows = Vec::new();
    let mut first = true;
    for record in reader(text).records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if is_blank(&record) {
            continue;
        }
        if std::mem::take(&mut first) && record.get(0) == Some("source") {
            continue;
        }
        if !(2..=3).contains(&record.len()) {
            return Err(parse_err(line, format!("expected 2 or 3 fields, found {}", record.len())));
        }
        let s = parse_index(&record[0], "source", line)?;
        let t = parse_index(&record[1], "target", line)?;
        let w = match record.get(2) {
            None | Some("") => 1.0,
            Some(f) => f
                .parse::<f64>()
                .map_err(|_| parse_err(line, format!("weight `{f}` is not a number")))?,
        };
        if !w.is_finite() || w < 0.0 {
            return Err(parse_err(line, format!("weight {w} must be finite and non-negative")));
        }
        if s == t {
            return Err(Error::Validation(format!("self-loop on vertex {s} at line {line}")));
        }
        rows.push((s, t, w));
    }
    Ok(rows)
}

/// Parses `id,type[,claws][,distance]` rows. Ids must cover `0..m` exactly
/// once; the result is ordered by id.
pub fn parse_vertex_csv(text: &str) -> Result<Vec<VertexMeta>> {
    let mut rows: Vec<Option<VertexMeta>> = Vec::new();
    let mut first = true;
    let mut count = 0usize;
    for record in reader(text).records() {
        let record = record.map_err(csv_err)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if is_blank(&record) {
            continue;
        }
        if std::mem::take(&mut first) && record.get(0) == Some("id") {
            continue;
        }
        if !(2..=4).contains(&record.len()) {
            return Err(parse_err(line, format!("expected 2 to 4 fields, found {}", record.len())));
        }
        let id = parse_index(&record[0], "id", line)?;
        let claws = match record.get(2) {
            None | Some("") => None,
            Some(f) => Some(
                f.parse::<u32>()
                    .map_err(|_| parse_err(line, format!("claws `{f}` is not a non-negative integer")))?,
            ),
        };
        let distance = match record.get(3) {
            None | Some("") => None,
            Some(f) => {
                let v = f
                    .parse::<f64>()
                    .map_err(|_| parse_err(line, format!("distance `{f}` is not a number")))?;
                if !v.is_finite() || v < 0.0 {
                    return Err(parse_err(line, format!("distance {v} must be finite and non-negative")));
                }
                Some(v)
            }
        };
        // Guard the allocation below against absurd ids from untrusted input.
        if id > count + 1_000_000 {
            return Err(parse_err(line, format!("vertex id {id} is not contiguous")));
        }
        if rows.len() <= id {
            rows.resize(id + 1, None);
        }
        if rows[id].is_some() {
            return Err(parse_err(line, format!("duplicate vertex id {id}")));
        }
        rows[id] = Some(VertexMeta { id, type_label: record[1].to_string(), claws, distance });
        count += 1;
    }
    rows.into_iter()
        .enumerate()
        .map(|(i, m)| m.ok_or_else(|| Error::Validation(format!("vertex id {i} missing from vertex table"))))
        .collect()
}

/// Reads a graph from edge CSV text and an optional vertex table. With a
/// vertex table the vertex count is its row count; otherwise it is one more
/// than the largest id seen.
pub fn read_graph(edge_text: &str, vertex_text: Option<&str>) -> Result<DirectedGraph> {
    let rows = parse_edge_csv(edge_text)?;
    match vertex_text {
        Some(vt) => {
            let meta = parse_vertex_csv(vt)?;
            DirectedGraph::from_edges(meta.len(), rows)?.with_meta(meta)
        }
        None => {
            let n = rows.iter().map(|&(s, t, _)| s.max(t) + 1).max().unwrap_or(0);
            DirectedGraph::from_edges(n, rows)
        }
    }
}

/// Canonical edge CSV: header, rows sorted by `(source, target)`, weights in
/// shortest round-trip form.
pub fn write_edge_csv<W: Write>(g: &DirectedGraph, mut out: W) -> Result<()> {
    writeln!(out, "source,target,weight")?;
    for e in g.edges() {
        writeln!(out, "{},{},{}", e.source, e.target, e.weight)?;
    }
    Ok(())
}

pub fn write_vertex_csv<W: Write>(meta: &[VertexMeta], mut out: W) -> Result<()> {
    writeln!(out, "id,type,claws,distance")?;
    for m in meta {
        let claws = m.claws.map(|c| c.to_string()).unwrap_or_default();
        let distance = m.distance.map(|d| d.to_string()).unwrap_or_default();
        let label = if m.type_label.contains([',', '"', '\n', '\r']) || m.type_label.trim() != m.type_label {
            format!("\"{}\"", m.type_label.replace('"', "\"\""))
        } else {
            m.type_label.clone()
        };
        writeln!(out, "{},{},{},{}", m.id, label, claws, distance)?;
    }
    Ok(())
}

/// JSON form `{n, edges: [[s, t, w], ...], meta: [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub meta: Vec<VertexMeta>,
}

impl From<&DirectedGraph> for GraphJson {
    fn from(g: &DirectedGraph) -> Self {
        Self {
            n: g.n(),
            edges: g.edges().iter().map(|e| (e.source, e.target, e.weight)).collect(),
            meta: g.meta().map(<[_]>::to_vec).unwrap_or_default(),
        }
    }
}

impl GraphJson {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn into_graph(self) -> Result<DirectedGraph> {
        let g = DirectedGraph::from_edges(self.n, self.edges)?;
        if self.meta.is_empty() {
            Ok(g)
        } else {
            g.with_meta(self.meta)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows() {
        let g = read_graph("0,1\n1,0\n0,2\n", None).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_count(), 3);
        assert!(g.edges().iter().all(|e| e.weight == 1.0));
    }

    #[test]
    fn duplicate_rows_sum_weights() {
        let g = read_graph("source,target,weight\n0,1,2\n0,1,3\n", None).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.weight(0, 1), 5.0);
    }

    #[test]
    fn malformed_row_reports_line() {
        match parse_edge_csv("source,target,weight\n0,1,1\n0,x,1\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_edge_csv("0,1,-2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_edge_csv("0\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn self_loop_is_validation_error() {
        assert!(matches!(parse_edge_csv("0,1\n2,2\n"), Err(Error::Validation(_))));
    }

    #[test]
    fn vertex_table_sets_n_and_meta() {
        let v = "id,type,claws,distance\n1,MBIN,,\n0,KC,3,12.5\n2,KC,,0\n";
        let g = read_graph("0,1\n", Some(v)).unwrap();
        assert_eq!(g.n(), 3);
        let meta = g.meta().unwrap();
        assert_eq!(meta[0].type_label, "KC");
        assert_eq!(meta[0].claws, Some(3));
        assert_eq!(meta[0].distance, Some(12.5));
        assert_eq!(meta[1].claws, None);
        assert_eq!(g.vertices_with_type("KC"), vec![0, 2]);
    }

    #[test]
    fn vertex_table_gaps_and_range() {
        assert!(parse_vertex_csv("0,KC\n2,KC\n").is_err());
        assert!(parse_vertex_csv("0,KC\n0,PN\n").is_err());
        assert!(read_graph("0,5\n", Some("0,KC\n1,KC\n")).is_err());
    }

    #[test]
    fn canonical_csv_is_byte_stable() {
        let text = "source,target,weight\n0,1,5\n0,2,0.25\n3,0,1\n";
        let g = read_graph(text, None).unwrap();
        let mut out = Vec::new();
        write_edge_csv(&g, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn json_key_order() {
        let g = read_graph("0,1,2\n", Some("0,KC,1,2.5\n1,PN,,\n")).unwrap();
        let json = GraphJson::from(&g).to_json().unwrap();
        assert_eq!(
            json,
            r#"{"n":2,"edges":[[0,1,2.0]],"meta":[{"id":0,"type":"KC","claws":1,"distance":2.5},{"id":1,"type":"PN","claws":null,"distance":null}]}"#
        );
        let back = GraphJson::from_json(&json).unwrap().into_graph().unwrap();
        assert_eq!(back, g);
    }
}
