#![no_main]
use libfuzzer_sys::fuzz_target;
use semipar::curve::{project_to_curve, CurveJson};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(j) = CurveJson::from_json(text) else { return };
    if let Ok(c) = j.into_params() {
        let x = vec![0.5; c.dim()];
        let p = project_to_curve(&x, &c);
        assert!((0.0..=1.0).contains(&p.t));
        let _ = c.log_density(&x);
    }
});
