#![no_main]
use libfuzzer_sys::fuzz_target;
use semipar::graph::GraphJson;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(j) = GraphJson::from_json(text) {
        let _ = j.into_graph();
    }
});
