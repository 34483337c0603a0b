#![no_main]

use libfuzzer_sys::fuzz_target;
use wignerlab::SimConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = SimConfig::from_json(text) {
        // anything accepted must survive its own serialization
        let again = SimConfig::from_json(&cfg.to_json()).expect("resolved config reparses");
        assert_eq!(again.to_json(), cfg.to_json());
    }
});
