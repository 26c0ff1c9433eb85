#![no_main]

use dwlab_core::grid::{decode_fields, FieldHeader};
use libfuzzer_sys::fuzz_target;

// Input layout: header text, one NUL byte, raw payload.
fuzz_target!(|data: &[u8]| {
    let Some(split) = data.iter().position(|&b| b == 0) else {
        return;
    };
    let Ok(text) = std::str::from_utf8(&data[..split]) else {
        return;
    };
    let Ok(header) = FieldHeader::parse(text) else {
        return;
    };
    if let Ok(fields) = decode_fields(&header, &data[split + 1..]) {
        assert_eq!(fields.len(), header.fields);
    }
});
