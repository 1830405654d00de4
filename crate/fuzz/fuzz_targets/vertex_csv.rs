#![no_main]
use libfuzzer_sys::fuzz_target;
use semipar::graph::{parse_vertex_csv, read_graph};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_vertex_csv(text);
    let _ = read_graph("0,1\n", Some(text));
});
