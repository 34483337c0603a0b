#![no_main]

use libfuzzer_sys::fuzz_target;
use wignerlab::io::{parse_report_csv, report_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_report_csv(text) {
        let _ = parse_report_csv(&report_csv(&rows)).expect("written rows reparse");
    }
});
