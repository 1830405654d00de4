#![no_main]
use libfuzzer_sys::fuzz_target;
use semipar_cli::commands::SbmJson;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(j) = SbmJson::from_json(text) {
        if let Ok(p) = j.into_params() {
            let _ = p.expected_edges(&vec![3; p.k()]);
        }
    }
});
