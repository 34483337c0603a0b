#![no_main]

use libfuzzer_sys::fuzz_target;
use wignerlab::io::{parse_report_json, report_csv, report_json, report_rows};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = parse_report_json(text) {
        let _ = report_csv(&report_rows(&report));
        if let Ok(out) = report_json(&report) {
            let _ = parse_report_json(&out);
        }
    }
});
