#![no_main]
use libfuzzer_sys::fuzz_target;
use semipar_cli::PipelineConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = PipelineConfig::from_json(text) {
        let _ = cfg.validate();
        let _ = cfg.fixed_q();
    }
});
