#![no_main]
use libfuzzer_sys::fuzz_target;
use semipar::graph::{parse_edge_csv, read_graph, write_edge_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = parse_edge_csv(text);
    // Whatever parses must survive a write/read round trip unchanged.
    if let Ok(g) = read_graph(text, None) {
        let mut out = Vec::new();
        write_edge_csv(&g, &mut out).unwrap();
        let again = read_graph(std::str::from_utf8(&out).unwrap(), None).unwrap();
        assert_eq!(again.edges(), g.edges());
    }
});
