#![no_main]

use libfuzzer_sys::fuzz_target;
use wignerlab::config::apply_override;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let mut lines = text.lines();
    let base = lines.next().unwrap_or("{}");
    let Ok(mut doc) = serde_json::from_str::<serde_json::Value>(base) else { return };
    for assignment in lines {
        let _ = apply_override(&mut doc, assignment);
    }
});
