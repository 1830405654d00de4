#![no_main]
use libfuzzer_sys::fuzz_target;
use semipar::curve::SemiparJson;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(j) = SemiparJson::from_json(text) else { return };
    if let Ok(m) = j.into_model() {
        let _ = m.log_density(&vec![0.25; m.dim()]);
    }
});
