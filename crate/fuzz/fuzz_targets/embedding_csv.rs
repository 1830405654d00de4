#![no_main]
use libfuzzer_sys::fuzz_target;
use semipar::spectral::Embedding;

fuzz_target!(|data: &[u8]| {
    let Some((&flag, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    let _ = Embedding::read_csv(text, flag & 1 == 1);
});
