#![no_main]

use libfuzzer_sys::fuzz_target;
use wignerlab::io::{decode_raw, encode_raw, parse_sidecar};

// Input layout: sidecar JSON, a NUL byte, then the raw payload.
fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == 0).unwrap_or(data.len());
    let Ok(text) = std::str::from_utf8(&data[..split]) else { return };
    let Ok(sidecar) = parse_sidecar(text) else { return };
    let payload = data.get(split + 1..).unwrap_or(&[]);
    if let Ok((_, m)) = decode_raw(&sidecar, payload) {
        let bytes = encode_raw(&m, sidecar.components == 2);
        assert_eq!(bytes.len(), payload.len());
        // bitwise, so NaN payloads compare too
        let re: Vec<u64> = bytes.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        let orig: Vec<u64> = payload.chunks_exact(8).map(|c| u64::from_le_bytes(c.try_into().unwrap())).collect();
        assert_eq!(re, orig);
    }
});
